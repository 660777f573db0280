#include <stdio.h>

int main(void) {
    int a[N], b[N], c[N];
    int i;
    for (i = 0; i < N; i++) {
        a[i] = i * 3 - 7;
        b[i] = 100 - i * i;
    }
    vadd(a, b, c);
    for (i = 0; i < N; i++)
        printf("c[%d] = %d\n", i, c[i]);
    return 0;
}
