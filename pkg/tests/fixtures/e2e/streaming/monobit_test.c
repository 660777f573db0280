#include <stdio.h>

int main(void) {
    int i;
    int sum = 0;
    for (i = 0; i < N; i++)
        epsilon[i] = (i * 7) % 3 == 0;
    monobit(&sum);
    printf("sum = %d\n", sum);
    return 0;
}
