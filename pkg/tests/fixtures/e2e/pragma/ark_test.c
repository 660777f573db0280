#include <stdio.h>

int main(void) {
    unsigned char state[ROWS][COLS], key[ROWS][COLS];
    int r, c;
    for (r = 0; r < ROWS; r++)
        for (c = 0; c < COLS; c++) {
            state[r][c] = (unsigned char)(r * 16 + c * 5 + 1);
            key[r][c] = (unsigned char)(0xA5 ^ (r * 3 + c));
        }
    add_round_key(state, key);
    for (r = 0; r < ROWS; r++) {
        for (c = 0; c < COLS; c++)
            printf("%02x ", state[r][c]);
        printf("\n");
    }
    return 0;
}
