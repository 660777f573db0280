#define ROWS 4
#define COLS 4

void add_round_key(unsigned char state[ROWS][COLS], unsigned char key[ROWS][COLS]) {
    int r, c;
    for (r = 0; r < ROWS; r++) {
        for (c = 0; c < COLS; c++) {
            state[r][c] ^= key[r][c];
        }
    }
}
