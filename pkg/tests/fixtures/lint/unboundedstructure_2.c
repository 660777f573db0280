// top: scale
void scale(int n, int out[16]) {
    int tmp[n];
    int i;
    for (i = 0; i < 16; i++) {
        tmp[i & 3] = i * 2;
        out[i] = tmp[i & 3];
    }
}
