#pragma once

#include <cstdint>
#include <vector>

namespace ecrank {

/// Ascending table of all primes <= bound.
struct PrimeTable {
    std::uint64_t bound = 0;
    std::vector<std::uint32_t> primes;

    std::size_t count() const { return primes.size(); }
};

/// Sieve of Eratosthenes. Throws std::invalid_argument for b < 2.
PrimeTable primes_up_to(std::uint64_t b);

/// Legendre symbol (a|p) in {-1,0,1} by Euler's criterion.
/// Throws std::invalid_argument unless p is an odd prime.
int legendre(std::int64_t a, std::uint64_t p);

/// Canonical residues (A mod p, B mod p), both in [0, p).
struct ResiduePair {
    std::uint64_t first = 0;
    std::uint64_t second = 0;
};
ResiduePair mod_reduce_polynomial(std::int64_t a, std::int64_t b, std::uint64_t p);

/// chi[t] = (t|p) for t in [0, p). One pass over squares; used by the
/// character-sum point count, where a modpow per x would dominate.
std::vector<std::int8_t> quadratic_character_table(std::uint32_t p);

std::uint64_t mulmod(std::uint64_t a, std::uint64_t b, std::uint64_t m);
std::uint64_t powmod(std::uint64_t base, std::uint64_t exp, std::uint64_t m);

/// Canonical residue of a signed value in [0, p).
std::uint64_t mod_canonical(std::int64_t a, std::uint64_t p);

} // namespace ecrank
