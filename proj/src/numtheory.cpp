#include "ecrank/numtheory.hpp"

#include <stdexcept>
#include <string>

namespace ecrank {

PrimeTable primes_up_to(std::uint64_t b) {
    if (b < 2) {
        throw std::invalid_argument("primes_up_to: bound must be >= 2, got " + std::to_string(b));
    }
    std::vector<bool> composite(b + 1, false);
    PrimeTable table;
    table.bound = b;
    for (std::uint64_t i = 2; i <= b; ++i) {
        if (composite[i]) {
            continue;
        }
        table.primes.push_back(static_cast<std::uint32_t>(i));
        for (std::uint64_t j = i * i; j <= b; j += i) {
            composite[j] = true;
        }
    }
    return table;
}

std::uint64_t mulmod(std::uint64_t a, std::uint64_t b, std::uint64_t m) {
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>(a) * b) % m);
}

std::uint64_t powmod(std::uint64_t base, std::uint64_t exp, std::uint64_t m) {
    std::uint64_t result = 1 % m;
    base %= m;
    while (exp > 0) {
        if (exp & 1) {
            result = mulmod(result, base, m);
        }
        base = mulmod(base, base, m);
        exp >>= 1;
    }
    return result;
}

std::uint64_t mod_canonical(std::int64_t a, std::uint64_t p) {
    const std::int64_t m = static_cast<std::int64_t>(p);
    std::int64_t r = a % m;
    if (r < 0) {
        r += m;
    }
    return static_cast<std::uint64_t>(r);
}

namespace {

bool is_odd_prime(std::uint64_t p) {
    if (p < 3 || p % 2 == 0) {
        return false;
    }
    for (std::uint64_t d = 3; d * d <= p; d += 2) {
        if (p % d == 0) {
            return false;
        }
    }
    return true;
}

} // namespace

int legendre(std::int64_t a, std::uint64_t p) {
    if (!is_odd_prime(p)) {
        throw std::invalid_argument("legendre: modulus " + std::to_string(p) + " is not an odd prime");
    }
    const std::uint64_t r = mod_canonical(a, p);
    if (r == 0) {
        return 0;
    }
    const std::uint64_t e = powmod(r, (p - 1) / 2, p);
    return e == 1 ? 1 : -1;
}

ResiduePair mod_reduce_polynomial(std::int64_t a, std::int64_t b, std::uint64_t p) {
    return ResiduePair{mod_canonical(a, p), mod_canonical(b, p)};
}

std::vector<std::int8_t> quadratic_character_table(std::uint32_t p) {
    if (p < 3 || p % 2 == 0) {
        throw std::invalid_argument("quadratic_character_table: p must be an odd prime");
    }
    std::vector<std::int8_t> chi(p, -1);
    chi[0] = 0;
    for (std::uint64_t t = 1; t <= (p - 1) / 2; ++t) {
        chi[(t * t) % p] = 1;
    }
    return chi;
}

} // namespace ecrank
