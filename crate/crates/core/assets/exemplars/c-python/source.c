#include <stdio.h>

long gcd(long a, long b) {
    while (b != 0) {
        long t = a % b;
        a = b;
        b = t;
    }
    return a;
}

int main(void) {
    long a, b;
    if (scanf("%ld %ld", &a, &b) != 2) {
        return 1;
    }
    long g = gcd(a, b);
    printf("%ld %ld\n", g, a / g * b);
    return 0;
}
