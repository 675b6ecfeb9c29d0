#include "ecrank/curve.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "ecrank/errors.hpp"

namespace ecrank {

namespace {

std::uint64_t mod_i128(__int128 v, std::uint64_t p) {
    const auto m = static_cast<__int128>(p);
    __int128 r = v % m;
    if (r < 0) {
        r += m;
    }
    return static_cast<std::uint64_t>(r);
}

// Affine point count of the long Weierstrass model over F_p, plus infinity.
// With nonsingular_only, points where both partials vanish are skipped
// (infinity is always smooth). O(p^2); used only for p in {2, 3}.
std::uint64_t count_points(const CurveRecord& curve, std::uint32_t p, bool nonsingular_only) {
    const std::uint64_t a1 = mod_canonical(curve.a[0], p);
    const std::uint64_t a2 = mod_canonical(curve.a[1], p);
    const std::uint64_t a3 = mod_canonical(curve.a[2], p);
    const std::uint64_t a4 = mod_canonical(curve.a[3], p);
    const std::uint64_t a6 = mod_canonical(curve.a[4], p);

    std::uint64_t n = 1; // point at infinity
    for (std::uint64_t x = 0; x < p; ++x) {
        const std::uint64_t x2 = (x * x) % p;
        const std::uint64_t x3 = (x2 * x) % p;
        const std::uint64_t rhs = (x3 + a2 * x2 + a4 * x + a6) % p;
        for (std::uint64_t y = 0; y < p; ++y) {
            const std::uint64_t lhs = (y * y + a1 * x * y + a3 * y) % p;
            if (lhs != rhs) {
                continue;
            }
            if (nonsingular_only) {
                const std::uint64_t fx = (a1 * y + 2 * (p - 1) * a2 * x % p + 3 * (p - 1) * x2 % p
                                          + (p - 1) * a4)
                                         % p; // a1*y - 3x^2 - 2*a2*x - a4
                const std::uint64_t fy = (2 * y + a1 * x + a3) % p;
                if (fx == 0 && fy == 0) {
                    continue;
                }
            }
            ++n;
        }
    }
    return n;
}

} // namespace

CurveInvariants curve_invariants(const CurveRecord& curve) {
    const __int128 a1 = curve.a[0], a2 = curve.a[1], a3 = curve.a[2];
    const __int128 a4 = curve.a[3], a6 = curve.a[4];
    CurveInvariants inv{};
    inv.b2 = a1 * a1 + 4 * a2;
    inv.b4 = 2 * a4 + a1 * a3;
    inv.b6 = a3 * a3 + 4 * a6;
    inv.b8 = a1 * a1 * a6 + 4 * a2 * a6 - a1 * a3 * a4 + a2 * a3 * a3 - a4 * a4;
    inv.c4 = inv.b2 * inv.b2 - 24 * inv.b4;
    inv.c6 = -inv.b2 * inv.b2 * inv.b2 + 36 * inv.b2 * inv.b4 - 216 * inv.b6;
    inv.disc = -inv.b2 * inv.b2 * inv.b8 - 8 * inv.b4 * inv.b4 * inv.b4 - 27 * inv.b6 * inv.b6
               + 9 * inv.b2 * inv.b4 * inv.b6;
    return inv;
}

void validate_record(const CurveRecord& curve) {
    if (curve.rank < 0 || curve.rank > 4) {
        throw DataError(curve.label + ": rank " + std::to_string(curve.rank) + " outside [0,4]");
    }
    if (curve.conductor < 1) {
        throw DataError(curve.label + ": conductor must be positive");
    }
    const CurveInvariants inv = curve_invariants(curve);
    if (inv.disc == 0) {
        throw DataError(curve.label + ": singular model (discriminant 0)");
    }

    // Divide out every prime of N from |disc|; a minimal model leaves 1.
    __int128 d = inv.disc < 0 ? -inv.disc : inv.disc;
    std::uint64_t n = static_cast<std::uint64_t>(curve.conductor);
    for (std::uint64_t q = 2; q * q <= n; ++q) {
        if (n % q) {
            continue;
        }
        while (n % q == 0) {
            n /= q;
        }
        if (d % q != 0) {
            throw DataError(curve.label + ": conductor prime " + std::to_string(q)
                            + " does not divide the discriminant");
        }
        while (d % q == 0) {
            d /= q;
        }
    }
    if (n > 1) {
        if (d % n != 0) {
            throw DataError(curve.label + ": conductor prime " + std::to_string(n)
                            + " does not divide the discriminant");
        }
        while (d % n == 0) {
            d /= n;
        }
    }
    if (d != 1) {
        throw DataError(curve.label
                        + ": discriminant has a prime factor outside the conductor "
                          "(non-minimal model or wrong conductor)");
    }
}

std::int64_t ap_good(const CurveRecord& curve, std::uint32_t p) {
    if (curve.conductor % p == 0) {
        throw std::invalid_argument(curve.label + ": ap_good called at bad prime "
                                    + std::to_string(p));
    }
    if (p < 5) {
        const std::uint64_t n = count_points(curve, p, false);
        return static_cast<std::int64_t>(p) + 1 - static_cast<std::int64_t>(n);
    }
    // Short Weierstrass y^2 = x^3 + Ax + B with A = -27 c4, B = -54 c6;
    // the transform is an isomorphism over F_p since gcd(p, 6) = 1.
    const CurveInvariants inv = curve_invariants(curve);
    const std::uint64_t A = mod_i128(-27 * inv.c4, p);
    const std::uint64_t B = mod_i128(-54 * inv.c6, p);
    const std::vector<std::int8_t> chi = quadratic_character_table(p);
    std::int64_t sum = 0;
    for (std::uint64_t x = 0; x < p; ++x) {
        const std::uint64_t f = (mulmod(mulmod(x, x, p), x, p) + mulmod(A, x, p) + B) % p;
        sum += chi[f];
    }
    const std::int64_t ap = -sum;
    const double hasse = 2.0 * std::sqrt(static_cast<double>(p));
    if (static_cast<double>(ap > 0 ? ap : -ap) > hasse) {
        throw NumericError(curve.label + ": Hasse bound violated at p=" + std::to_string(p));
    }
    return ap;
}

int ap_bad(const CurveRecord& curve, std::uint32_t p) {
    if (curve.conductor % p != 0) {
        throw std::invalid_argument(curve.label + ": ap_bad called at good prime "
                                    + std::to_string(p));
    }
    if (p < 5) {
        const std::uint64_t ns = count_points(curve, p, true);
        return static_cast<int>(static_cast<std::int64_t>(p) - static_cast<std::int64_t>(ns));
    }
    // p >= 5, minimal at p: multiplicative iff c4 != 0 mod p, and then
    // split iff -c6 is a square mod p (tangent slopes at the node).
    const CurveInvariants inv = curve_invariants(curve);
    if (mod_i128(inv.c4, p) == 0) {
        return 0;
    }
    const std::uint64_t mc6 = mod_i128(-inv.c6, p);
    return powmod(mc6, (p - 1) / 2, p) == 1 ? 1 : -1;
}

std::int64_t frobenius_trace(const CurveRecord& curve, std::uint32_t p) {
    return curve.conductor % p == 0 ? ap_bad(curve, p) : ap_good(curve, p);
}

TraceVector trace_vector(const CurveRecord& curve, const PrimeTable& primes) {
    TraceVector tv;
    tv.curve_label = curve.label;
    tv.bound = primes.bound;
    tv.ap.resize(primes.count());
    tv.normalized.resize(primes.count());
    try {
        for (std::size_t i = 0; i < primes.count(); ++i) {
            const std::uint32_t p = primes.primes[i];
            const std::int64_t ap = frobenius_trace(curve, p);
            tv.ap[i] = static_cast<std::int16_t>(ap);
            tv.normalized[i] =
                static_cast<double>(ap) / (2.0 * std::sqrt(static_cast<double>(p)));
        }
    } catch (const std::exception& e) {
        throw DataError("trace_vector(" + curve.label + "): " + e.what());
    }
    return tv;
}

std::vector<TraceVector> trace_vectors(std::span<const CurveRecord> curves,
                                       const PrimeTable& primes) {
    std::vector<TraceVector> out(curves.size());
    for (std::size_t c = 0; c < curves.size(); ++c) {
        out[c].curve_label = curves[c].label;
        out[c].bound = primes.bound;
        out[c].ap.resize(primes.count());
        out[c].normalized.resize(primes.count());
    }
    // Prime-outer so the character table for each p is built once, not once
    // per curve. Every (curve, prime) cell is independent.
    for (std::size_t i = 0; i < primes.count(); ++i) {
        const std::uint32_t p = primes.primes[i];
        const double two_sqrt_p = 2.0 * std::sqrt(static_cast<double>(p));
        std::vector<std::int8_t> chi;
        if (p >= 5) {
            chi = quadratic_character_table(p);
        }
        std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 16) if (curves.size() > 1 && p >= 64)
        for (std::size_t c = 0; c < curves.size(); ++c) {
            try {
                const CurveRecord& curve = curves[c];
                std::int64_t ap;
                if (curve.conductor % p == 0) {
                    ap = ap_bad(curve, p);
                } else if (p < 5) {
                    ap = ap_good(curve, p);
                } else {
                    const CurveInvariants inv = curve_invariants(curve);
                    const std::uint64_t A = mod_i128(-27 * inv.c4, p);
                    const std::uint64_t B = mod_i128(-54 * inv.c6, p);
                    std::int64_t sum = 0;
                    for (std::uint64_t x = 0; x < p; ++x) {
                        const std::uint64_t f =
                            (mulmod(mulmod(x, x, p), x, p) + mulmod(A, x, p) + B) % p;
                        sum += chi[f];
                    }
                    ap = -sum;
                    const double hasse = 2.0 * std::sqrt(static_cast<double>(p));
                    if (static_cast<double>(ap > 0 ? ap : -ap) > hasse) {
                        throw NumericError(curve.label + ": Hasse bound violated at p="
                                           + std::to_string(p));
                    }
                }
                out[c].ap[i] = static_cast<std::int16_t>(ap);
                out[c].normalized[i] = static_cast<double>(ap) / two_sqrt_p;
            } catch (...) {
#pragma omp critical
                if (!failure) {
                    failure = std::current_exception();
                }
            }
        }
        if (failure) {
            std::rethrow_exception(failure);
        }
    }
    return out;
}

} // namespace ecrank
