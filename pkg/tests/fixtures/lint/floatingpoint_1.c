// top: average
float average(int a[8]) {
    int i, s = 0;
    for (i = 0; i < 8; i++)
        s += a[i];
    return s / 8.0f;
}
