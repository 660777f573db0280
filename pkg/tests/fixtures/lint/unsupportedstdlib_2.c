// top: load_key
#include <stdio.h>

int load_key(unsigned char key[16]) {
    FILE *fp = fopen("key.bin", "rb");
    int n = (int)fread(key, 1, 16, fp);
    fclose(fp);
    return n;
}
