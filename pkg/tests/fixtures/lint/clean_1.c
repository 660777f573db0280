// top: vadd
#define N 16

void vadd(int a[N], int b[N], int c[N]) {
    int i;
    for (i = 0; i < N; i++)
        c[i] = a[i] + b[i];
}
