// top: clear_bytes
void clear_bytes(void *buf) {
    unsigned char *b = (unsigned char *)buf;
    int i;
    for (i = 0; i < 16; i++)
        b[i] = 0;
}
