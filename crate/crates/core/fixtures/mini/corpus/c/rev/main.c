// snippet: c/rev
#include <stdio.h>
#include <string.h>

int main(void) {
    char line[1024];
    if (!fgets(line, sizeof line, stdin)) {
        return 0;
    }
    size_t n = strcspn(line, "\r\n");
    for (size_t i = n; i > 0; i--) {
        putchar(line[i - 1]);
    }
    putchar('\n');
    return 0;
}
