// top: fact_bounded
#define MAX_N 12

int fact_bounded(int n) {
    int result = 1;
    int i;
    for (i = 1; i <= MAX_N; i++) {
        if (i > n)
            break;
        result *= i;
    }
    return result;
}
