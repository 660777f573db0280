// top: histogram
#include <stdlib.h>
#define BINS 16

int histogram(int data[64], int out[BINS]) {
    int i;
    int *tmp = calloc(BINS, sizeof(int));
    for (i = 0; i < 64; i++)
        tmp[data[i] & (BINS - 1)]++;
    for (i = 0; i < BINS; i++)
        out[i] = tmp[i];
    free(tmp);
    return 0;
}
