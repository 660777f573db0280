// top: BlockFrequency
// expect: batch
#include <stdbool.h>
double cephes_igamc(double a, double x);
double p_value;
int epsilon[1024];

void BlockFrequency(int M, int n) {
int i, j, N, blockSum;
double p_value, sum, pi, v, chi2;
N = n / M;  /* # OF SUBSTRING BLOCKS */
sum = 0.0;
for (i = 0; i < N; i++) {
    blockSum = 0;
    for (j = 0; j < M; j++) {
        blockSum += epsilon[j + i * M];
    }
    pi = (double)blockSum / (double)M;
    v = pi - 0.5;
    sum += v * v;
}
chi2 = 4.0 * M * sum;
p_value = cephes_igamc(N / 2.0, chi2 / 2.0);}
