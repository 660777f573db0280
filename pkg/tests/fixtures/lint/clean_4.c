// top: add_round_key
#include <stdint.h>
typedef uint8_t state_t[4][4];

void add_round_key(uint8_t round, state_t state, const uint8_t round_key[176]) {
    uint8_t i, j;
    for (i = 0; i < 4; ++i)
        for (j = 0; j < 4; ++j)
            state[i][j] ^= round_key[(round * 16) + (i * 4) + j];
}
