#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ecrank/numtheory.hpp"

namespace ecrank {

/// A globally minimal integral Weierstrass model with its conductor and
/// analytic rank label. The engine never minimizes; database exports are
/// expected to be minimal already.
struct CurveRecord {
    std::string label;
    std::array<std::int64_t, 5> a{}; // a1, a2, a3, a4, a6
    std::int64_t conductor = 0;
    int rank = 0;
};

/// Standard b/c invariants and the discriminant, in 128-bit arithmetic so
/// coefficient magnitudes from large-conductor exports cannot overflow.
struct CurveInvariants {
    __int128 b2, b4, b6, b8, c4, c6, disc;
};
CurveInvariants curve_invariants(const CurveRecord& curve);

/// Checks disc != 0, rank range, and that stripping the conductor's primes
/// from the discriminant leaves a unit (minimal models have equal support).
/// Throws DataError naming the curve on violation.
void validate_record(const CurveRecord& curve);

/// Frobenius trace at a good prime: p + 1 - #E(F_p). Character sum over the
/// short Weierstrass form for p >= 5, projective enumeration for p in {2,3}.
/// Throws std::invalid_argument when p divides the conductor.
std::int64_t ap_good(const CurveRecord& curve, std::uint32_t p);

/// Frobenius trace at a bad prime: 1 split, -1 non-split, 0 additive,
/// equal to p - #E_ns(F_p) with the point at infinity counted.
/// Throws std::invalid_argument when p does not divide the conductor.
int ap_bad(const CurveRecord& curve, std::uint32_t p);

/// Dispatch on p | N.
std::int64_t frobenius_trace(const CurveRecord& curve, std::uint32_t p);

/// Feature vector of a curve: exact integer traces and their Hasse
/// normalization a_p / (2 sqrt p), one entry per prime <= bound.
struct TraceVector {
    std::string curve_label;
    std::uint64_t bound = 0;
    std::vector<std::int16_t> ap;
    std::vector<double> normalized;
};

TraceVector trace_vector(const CurveRecord& curve, const PrimeTable& primes);

/// Batch variant: shares one quadratic-character table per prime across all
/// curves and parallelizes over curves. Output order equals input order and
/// is bit-identical to per-curve trace_vector calls.
std::vector<TraceVector> trace_vectors(std::span<const CurveRecord> curves,
                                       const PrimeTable& primes);

} // namespace ecrank
