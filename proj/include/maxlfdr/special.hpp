#pragma once

// Special functions used by the model layer and the asymptotic predictions:
// standard normal and standard Cauchy pdf / survival / inverse survival, and
// the regularized lower incomplete gamma function.
//
// Accuracy targets (checked against Boost.Math in tests):
//   normal_cdf / normal_sf       erfc based, relative error ~1e-15
//   normal_quantile              Wichura AS241 plus one Newton step, < 1e-12
//   gamma_p                      series / continued fraction, < 1e-12

#include <cmath>
#include <limits>
#include <numbers>

#include "maxlfdr/errors.hpp"

namespace maxlfdr::special {

inline constexpr double kInvSqrt2Pi = 0.39894228040143267794;

inline double normal_pdf(double x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

/// Upper tail P{N(0,1) > x}; accurate far into the right tail.
inline double normal_sf(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

namespace detail {

template <std::size_t N>
inline double horner(const double (&c)[N], double x) {
    double acc = c[N - 1];
    for (std::size_t i = N - 1; i-- > 0;) acc = acc * x + c[i];
    return acc;
}

// AS241 (PPND16), coefficients in ascending powers.
inline double as241(double p) {
    static constexpr double a[] = {3.3871328727963666080e0,  1.3314166789178437745e+2,
                                   1.9715909503065514427e+3, 1.3731693765509461125e+4,
                                   4.5921953931549871457e+4, 6.7265770927008700853e+4,
                                   3.3430575583588128105e+4, 2.5090809287301226727e+3};
    static constexpr double b[] = {1.0,
                                   4.2313330701600911252e+1, 6.8718700749205790830e+2,
                                   5.3941960214247511077e+3, 2.1213794301586595867e+4,
                                   3.9307895800092710610e+4, 2.8729085735721942674e+4,
                                   5.2264952788528545610e+3};
    static constexpr double c[] = {1.42343711074968357734e0,  4.63033784615654529590e0,
                                   5.76949722146069140550e0,  3.64784832476320460504e0,
                                   1.27045825245236838258e0,  2.41780725177450611770e-1,
                                   2.27238449892691845833e-2, 7.74545014278341407640e-4};
    static constexpr double d[] = {1.0,
                                   2.05319162663775882187e0,  1.67638483018380384940e0,
                                   6.89767334985100004550e-1, 1.48103976427480074590e-1,
                                   1.51986665636164571966e-2, 5.47593808499534494600e-4,
                                   1.05075007164441684324e-9};
    static constexpr double e[] = {6.65790464350110377720e0,  5.46378491116411436990e0,
                                   1.78482653991729133580e0,  2.96560571828504891230e-1,
                                   2.65321895265761230930e-2, 1.24266094738807843860e-3,
                                   2.71155556874348757815e-5, 2.01033439929228813265e-7};
    static constexpr double f[] = {1.0,
                                   5.99832206555887937690e-1, 1.36929880922735805310e-1,
                                   1.48753612908506148525e-2, 7.86869131145613259100e-4,
                                   1.84631831751005468180e-5, 1.42151175831644588870e-7,
                                   2.04426310338993978564e-15};

    const double q = p - 0.5;
    if (std::fabs(q) <= 0.425) {
        const double r = 0.180625 - q * q;
        return q * horner(a, r) / horner(b, r);
    }
    double r = std::sqrt(-std::log(q < 0.0 ? p : 1.0 - p));
    double x;
    if (r <= 5.0) {
        r -= 1.6;
        x = horner(c, r) / horner(d, r);
    } else {
        r -= 5.0;
        x = horner(e, r) / horner(f, r);
    }
    return q < 0.0 ? -x : x;
}

}  // namespace detail

/// Inverse of normal_cdf on (0,1).
inline double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw DomainError("normal quantile requires p in (0,1)");
    double x = detail::as241(p);
    // One Newton step against whichever tail is small, so precision holds
    // for p near 0 and near 1.
    const double dens = normal_pdf(x);
    if (dens > 0.0) {
        const double resid = p < 0.5 ? normal_cdf(x) - p : (1.0 - p) - normal_sf(x);
        x -= resid / dens;
    }
    return x;
}

/// Inverse survival function: returns y with normal_sf(y) = t. Exact in both
/// tails since it never forms 1 - t.
inline double normal_isf(double t) {
    if (!(t > 0.0 && t < 1.0)) throw DomainError("normal isf requires t in (0,1)");
    double y = -detail::as241(t);
    const double dens = normal_pdf(y);
    if (dens > 0.0) {
        const double resid = t < 0.5 ? normal_sf(y) - t : (1.0 - t) - normal_cdf(y);
        y += resid / dens;
    }
    return y;
}

inline double cauchy_pdf(double y) { return 1.0 / (std::numbers::pi * (1.0 + y * y)); }

/// P{Cauchy > y}, via atan2 so that the far right tail does not cancel.
inline double cauchy_sf(double y) { return std::atan2(1.0, y) / std::numbers::pi; }

inline double cauchy_isf(double t) {
    if (!(t > 0.0 && t < 1.0)) throw DomainError("cauchy isf requires t in (0,1)");
    const double a = std::numbers::pi * t;
    return std::cos(a) / std::sin(a);
}

/// Regularized lower incomplete gamma P(a, x) = gamma(a, x) / Gamma(a).
inline double gamma_p(double a, double x) {
    if (!(a > 0.0)) throw DomainError("gamma_p requires a > 0");
    if (x < 0.0) throw DomainError("gamma_p requires x >= 0");
    if (x == 0.0) return 0.0;

    constexpr int kMaxIter = 10000;
    constexpr double kEps = 1e-16;
    const double log_prefactor = -x + a * std::log(x) - std::lgamma(a);

    if (x < a + 1.0) {
        // Series: sum_n x^n / (a (a+1) ... (a+n)).
        double ap = a;
        double term = 1.0 / a;
        double sum = term;
        for (int n = 0; n < kMaxIter; ++n) {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if (std::fabs(term) < std::fabs(sum) * kEps) break;
        }
        return sum * std::exp(log_prefactor);
    }

    // Continued fraction for Q(a, x), modified Lentz.
    constexpr double kTiny = std::numeric_limits<double>::min() / kEps;
    double b = x + 1.0 - a;
    double c = 1.0 / kTiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < kMaxIter; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = b + an / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::fabs(delta - 1.0) < kEps) break;
    }
    return 1.0 - std::exp(log_prefactor) * h;
}

}  // namespace maxlfdr::special
