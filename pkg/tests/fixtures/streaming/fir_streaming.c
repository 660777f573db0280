// top: fir
// expect: streaming
#define N 20
#define TAPS 11

void fir(int *y, int x) {
    int c[TAPS] = {53, 0, -91, 0, 313, 500, 313, 0, -91, 0, 53};
    static int shift_reg[TAPS];
    static int acc;
    static int j = 0;
    int i;
    acc = 0;
    for (i = TAPS - 1; i >= 0; i--) {
        if (i == 0) {
            acc += x * c[0];
            shift_reg[0] = x;
        } else {
            shift_reg[i] = shift_reg[i - 1];
            acc += shift_reg[i] * c[i];
        }
    }
    if (j == N) {
        *y = acc;
        j = 0;
    } else {
        j++;
    }
}
