#include <iostream>

long long gcd(long long a, long long b) {
    while (b != 0) {
        long long t = a % b;
        a = b;
        b = t;
    }
    return a;
}

int main() {
    long long a, b;
    std::cin >> a >> b;
    long long g = gcd(a, b);
    std::cout << g << " " << a / g * b << std::endl;
    return 0;
}
