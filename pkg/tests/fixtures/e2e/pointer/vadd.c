#define N 16

void vadd(int *a, int *b, int *c) {
    int i;
    for (i = 0; i < N; i++) {
        c[i] = a[i] + b[i];
    }
}
