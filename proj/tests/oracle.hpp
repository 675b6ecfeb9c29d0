#pragma once

// Independent oracles for tests. These deliberately avoid the library's
// implementation paths: trial division instead of the sieve, O(p^2) point
// enumeration instead of character sums, central differences instead of
// backprop.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

namespace oracle {

inline bool is_prime_trial(std::uint64_t n) {
    if (n < 2) {
        return false;
    }
    for (std::uint64_t d = 2; d * d <= n; ++d) {
        if (n % d == 0) {
            return false;
        }
    }
    return true;
}

inline std::vector<std::uint32_t> primes_trial(std::uint64_t bound) {
    std::vector<std::uint32_t> out;
    for (std::uint64_t n = 2; n <= bound; ++n) {
        if (is_prime_trial(n)) {
            out.push_back(static_cast<std::uint32_t>(n));
        }
    }
    return out;
}

inline std::int64_t imod(std::int64_t a, std::int64_t p) {
    std::int64_t r = a % p;
    return r < 0 ? r + p : r;
}

// Points of y^2 + a1 x y + a3 y = x^3 + a2 x^2 + a4 x + a6 over F_p,
// including the point at infinity. With nonsingular_only, skips affine
// points where both partial derivatives vanish.
inline std::int64_t count_affine_plus_infinity(const std::array<std::int64_t, 5>& a,
                                               std::int64_t p, bool nonsingular_only) {
    const std::int64_t a1 = imod(a[0], p), a2 = imod(a[1], p), a3 = imod(a[2], p);
    const std::int64_t a4 = imod(a[3], p), a6 = imod(a[4], p);
    std::int64_t n = 1;
    for (std::int64_t x = 0; x < p; ++x) {
        for (std::int64_t y = 0; y < p; ++y) {
            const std::int64_t f =
                imod(y * y + a1 * x * y + a3 * y - x * x * x - a2 * x * x - a4 * x - a6, p);
            if (f != 0) {
                continue;
            }
            if (nonsingular_only) {
                const std::int64_t fx = imod(a1 * y - 3 * x * x - 2 * a2 * x - a4, p);
                const std::int64_t fy = imod(2 * y + a1 * x + a3, p);
                if (fx == 0 && fy == 0) {
                    continue;
                }
            }
            ++n;
        }
    }
    return n;
}

/// a_p by definition: p + 1 - #E(F_p) at good p, p - #E_ns(F_p) at bad p.
inline std::int64_t ap_brute(const std::array<std::int64_t, 5>& a, std::int64_t conductor,
                             std::int64_t p) {
    if (conductor % p == 0) {
        return p - count_affine_plus_infinity(a, p, true);
    }
    return p + 1 - count_affine_plus_infinity(a, p, false);
}

/// Central finite difference of f at x along coordinate i.
inline double central_diff(const std::function<double(const std::vector<double>&)>& f,
                           std::vector<double> x, std::size_t i, double h = 1e-5) {
    x[i] += h;
    const double fp = f(x);
    x[i] -= 2 * h;
    const double fm = f(x);
    return (fp - fm) / (2 * h);
}

/// |a-b| relative to max(|a|,|b|); tiny pairs compare as equal.
inline double rel_err(double a, double b) {
    const double scale = std::max(std::abs(a), std::abs(b));
    if (scale < 1e-12) {
        return 0.0;
    }
    return std::abs(a - b) / scale;
}

/// Gradient-check comparison of analytic vs central-difference values.
/// Central differences at h=1e-5 carry ~1e-11 of cancellation noise on
/// O(1) functions, so gradients that small cannot be resolved relatively;
/// differences under the absolute floor count as agreement. Any gradient of
/// real magnitude must still match to the relative tolerance.
inline bool grad_match(double analytic, double fd, double rtol = 1e-6,
                       double atol = 1e-9) {
    if (std::abs(analytic - fd) <= atol) {
        return true;
    }
    return rel_err(analytic, fd) < rtol;
}

/// Semicircle CDF on [-1,1]: F(t) = 1/2 + (t sqrt(1-t^2) + asin t) / pi.
inline double semicircle_cdf(double t) {
    if (t <= -1.0) {
        return 0.0;
    }
    if (t >= 1.0) {
        return 1.0;
    }
    return 0.5 + (t * std::sqrt(1.0 - t * t) + std::asin(t)) / M_PI;
}

/// Kolmogorov-Smirnov distance of samples against a CDF. Sorts a copy.
inline double ks_distance(std::vector<double> samples,
                          const std::function<double(double)>& cdf) {
    std::sort(samples.begin(), samples.end());
    const double n = static_cast<double>(samples.size());
    double d = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double f = cdf(samples[i]);
        d = std::max(d, std::abs(f - static_cast<double>(i) / n));
        d = std::max(d, std::abs(static_cast<double>(i + 1) / n - f));
    }
    return d;
}

} // namespace oracle
