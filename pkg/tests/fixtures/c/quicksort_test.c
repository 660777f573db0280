#include <stdio.h>

int main(void) {
    int arr[N] = {5, 2, 9, 0, 0, 0, 0, 0};
    int want[N] = {2, 5, 9, 0, 0, 0, 0, 0};
    int k;
    quickSort(arr, 0, 2);
    for (k = 0; k < N; k++) {
        if (arr[k] != want[k]) {
            printf("mismatch at %d\n", k);
            return 1;
        }
    }
    printf("sorted\n");
    return 0;
}
