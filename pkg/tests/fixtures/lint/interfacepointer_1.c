// top: sum_words
int sum_words(int *p) {
    int s = 0;
    int i;
    for (i = 0; i < 8; i++) {
        s += *p;
        p++;
    }
    return s;
}
