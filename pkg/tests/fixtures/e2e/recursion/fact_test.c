#include <stdio.h>

int main(void) {
    int out[8];
    int i;
    fact_table(out);
    for (i = 0; i < 8; i++)
        printf("%d! = %d\n", i, out[i]);
    return 0;
}
