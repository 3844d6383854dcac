#pragma once

// Large-m predictions for the SL procedure: cube-root limits of the threshold
// and of the lfdr at the threshold, the m^{-2/3} regret constant, the
// global-null regret series, and the Storey estimator's m^{2/5} limit.
//
// Chernoff's distribution (argmax of two-sided Brownian motion minus a
// parabola) enters every constant. Only the crude N(0, 0.52^2) stand-in and
// two published constants are used here: Var(Z) ~ 0.26 and P{Z >= 1} ~ 0.05.
// The two disagree (the normal stand-in gives P{Z >= 1} ~ 0.027), so
// percentile predictions are available under either convention.

#include <cmath>
#include <cstddef>

#include "maxlfdr/errors.hpp"
#include "maxlfdr/models.hpp"
#include "maxlfdr/special.hpp"

namespace maxlfdr {

struct ChernoffApprox {
    static constexpr double sigma = 0.52;
    static constexpr double variance = 0.26;
    /// Published tail value P{Z >= 1} ~ 0.05, i.e. a 95th percentile of 1.
    static constexpr double published_upper_tail_at_one = 0.05;
    static constexpr double published_p95 = 1.0;
};

inline double chernoff_cdf(double z) { return special::normal_cdf(z / ChernoffApprox::sigma); }

inline double chernoff_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw DomainError("quantile level must lie in (0,1)");
    return ChernoffApprox::sigma * special::normal_quantile(p);
}

/// Interquartile range of Z under the normal stand-in.
inline double chernoff_iqr() { return chernoff_quantile(0.75) - chernoff_quantile(0.25); }

// ---------------------------------------------------------------------------

struct ThresholdLimit {
    double center = 0.0;  ///< t_q
    double scale = 0.0;   ///< sd-scale of tau - t_q in units of Z
};

struct LfdrLimit {
    double center = 0.0;          ///< pi0 q
    double relative_scale = 0.0;  ///< scale of (lfdr(tau) - pi0 q) / (pi0 q) in units of Z

    /// Predicted p-quantile of lfdr(tau) given the matching quantile of Z.
    double quantile_at(double z) const { return center * (1.0 + relative_scale * z); }
    /// Predicted interquartile range of lfdr(tau) under the normal stand-in.
    double iqr() const { return center * relative_scale * chernoff_iqr(); }
};

namespace detail {

struct SlopeAtThreshold {
    double t = 0.0;
    double f_prime = 0.0;
};

inline SlopeAtThreshold slope_at_tq(const TwoGroupsSpec& spec, double q) {
    if (!spec.monotone()) throw AssumptionError("asymptotics need a non-increasing f1");
    const double t = population_threshold_tq(spec, q);
    if (!(t > 0.0 && t < 1.0)) throw AssumptionError("assumption (i) violated: t_q not in (0,1)");
    const double fp = mixture_f_prime(spec, t);
    if (!(fp < 0.0)) throw AssumptionError("assumption (ii) violated: f'(t_q) >= 0");
    return {t, fp};
}

inline double check_m(double m) {
    if (!(m >= 1.0)) throw DomainError("m must be >= 1");
    return m;
}

}  // namespace detail

/// Scale of tau - t_q given the slope f'(t_q) directly.
inline double threshold_scale(double q, double f_prime, double m) {
    detail::check_m(m);
    if (!(f_prime < 0.0)) throw AssumptionError("assumption (ii) violated: f'(t_q) >= 0");
    return std::pow(m, -1.0 / 3.0) * std::pow(q * f_prime * f_prime / 4.0, -1.0 / 3.0);
}

/// m^{1/3}(tau - t_q) => (q f'(t_q)^2 / 4)^{-1/3} Z.
inline ThresholdLimit threshold_limit(const TwoGroupsSpec& spec, double q, double m) {
    detail::check_m(m);
    const auto s = detail::slope_at_tq(spec, q);
    return {s.t, threshold_scale(q, s.f_prime, m)};
}

/// m^{1/3}(lfdr(tau) - pi0 q) / (pi0 q) => (4 q^2 |f'(t_q)|)^{1/3} Z, given
/// the slope directly.
inline LfdrLimit lfdr_limit(double pi0, double q, double f_prime, double m) {
    detail::check_m(m);
    if (!(f_prime < 0.0)) throw AssumptionError("assumption (ii) violated: f'(t_q) >= 0");
    return {pi0 * q, std::pow(m, -1.0 / 3.0) * std::cbrt(4.0 * q * q * std::fabs(f_prime))};
}

inline LfdrLimit lfdr_limit(const TwoGroupsSpec& spec, double q, double m) {
    detail::check_m(m);
    const auto s = detail::slope_at_tq(spec, q);
    return lfdr_limit(spec.pi0(), q, s.f_prime, m);
}

/// lim m^{2/3} Regret = (alpha^2 |f'(tau*)| / (2 pi0^2))^{-1/3} Var(Z) for SL
/// at level alpha / pi0, given the slope at the oracle threshold directly.
inline double regret_limit(double pi0, double alpha, double f_prime_at_oracle) {
    if (!(pi0 > 0.0 && pi0 <= 1.0)) throw AssumptionError("regret limit needs pi0 in (0,1]");
    if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("alpha must lie in (0,1)");
    if (!(f_prime_at_oracle < 0.0)) throw AssumptionError("assumption (ii) violated: f'(tau*) >= 0");
    return std::pow(alpha * alpha * std::fabs(f_prime_at_oracle) / (2.0 * pi0 * pi0), -1.0 / 3.0) *
           ChernoffApprox::variance;
}

inline double regret_limit(const TwoGroupsSpec& spec, double alpha) {
    const double pi0 = spec.pi0();
    if (!(pi0 > 0.0 && pi0 < 1.0)) throw AssumptionError("regret limit needs pi0 in (0,1)");
    if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("alpha must lie in (0,1)");
    const auto s = detail::slope_at_tq(spec, alpha / pi0);
    return regret_limit(pi0, alpha, s.f_prime);
}

/// Finite-m regret prediction constant * m^{-2/3}.
inline double regret_prediction(double constant, double m) {
    return constant * std::pow(detail::check_m(m), -2.0 / 3.0);
}

// ---------------------------------------------------------------------------

struct GlobalNullLimit {
    double value = 0.0;            ///< lambda * sum_{k<=K} P{Gamma(k, rate k) <= q}
    double remainder_bound = 0.0;  ///< bound on the omitted tail k > K
    std::size_t terms = 0;
};

/// P{U_k <= q}, U_k ~ Gamma(shape k, rate k).
inline double gamma_mean_one_cdf(std::size_t k, double q) {
    return special::gamma_p(static_cast<double>(k), static_cast<double>(k) * q);
}

/// Limit of m * Regret under the global null. Each omitted term obeys the
/// Chernoff bound P{U_k <= q} <= (q e^{1-q})^k, which gives the remainder.
inline GlobalNullLimit global_null_limit(double q, double lambda, std::size_t truncation_k = 50) {
    if (!(q >= 0.0 && q < 1.0)) throw DomainError("q must lie in [0,1)");
    if (!(lambda > 0.0)) throw DomainError("lambda must be positive");
    if (truncation_k < 1) throw DomainError("truncation_k must be >= 1");
    GlobalNullLimit out;
    out.terms = truncation_k;
    if (q == 0.0) return out;
    double sum = 0.0;
    for (std::size_t k = 1; k <= truncation_k; ++k) sum += gamma_mean_one_cdf(k, q);
    const double r = q * std::exp(1.0 - q);
    out.value = lambda * sum;
    out.remainder_bound =
        lambda * std::pow(r, static_cast<double>(truncation_k + 1)) / (1.0 - r);
    return out;
}

// ---------------------------------------------------------------------------

/// Storey estimator at zeta = 1 - m^{-1/5}:
/// m^{2/5}(pi0_hat - pi0) -> N((1 - pi0) f1''(1) / 6, pi0).
struct Pi0EstimatorLimit {
    double standardized_mean = 0.0;      ///< (1 - pi0) f1''(1) / 6
    double standardized_variance = 0.0;  ///< pi0
    double bias = 0.0;                   ///< standardized_mean * m^{-2/5}
    double sd = 0.0;                     ///< sqrt(pi0) * m^{-2/5}
};

inline Pi0EstimatorLimit pi0_estimator_limit(double pi0, double f1_second_derivative_at_one,
                                             double m) {
    detail::check_m(m);
    if (!(pi0 >= 0.0 && pi0 <= 1.0)) throw DomainError("pi0 must lie in [0,1]");
    Pi0EstimatorLimit out;
    out.standardized_mean = (1.0 - pi0) * f1_second_derivative_at_one / 6.0;
    out.standardized_variance = pi0;
    const double scale = std::pow(m, -0.4);
    out.bias = out.standardized_mean * scale;
    out.sd = std::sqrt(pi0) * scale;
    return out;
}

/// Model version. Needs f1(1) = f1'(1) = 0 with f1 twice differentiable at 1,
/// checked numerically from f1(1 - h) ~ f1''(1) h^2 / 2. None of the built-in
/// alternatives qualifies (Lehmann and Cauchy have f1(1) > 0; the normal
/// mixture has f1(1) = 0 but an unbounded one-sided derivative), so only the
/// degenerate pi0 = 1 case succeeds for them.
inline Pi0EstimatorLimit pi0_estimator_limit(const TwoGroupsSpec& spec, double m) {
    if (spec.pi0() == 1.0) return pi0_estimator_limit(1.0, 0.0, m);
    constexpr double h1 = 1e-3;
    constexpr double h2 = 1e-4;
    const double c1 = f1(spec, 1.0 - h1) / (h1 * h1);
    const double c2 = f1(spec, 1.0 - h2) / (h2 * h2);
    if (!(std::isfinite(c1) && std::isfinite(c2)) ||
        std::fabs(c1 - c2) > 0.05 * std::max(1.0, std::fabs(c2))) {
        throw AssumptionError("pi0 estimator limit assumptions fail: need f1(1) = f1'(1) = 0");
    }
    const double h = h2;
    const double fdd = (-2.0 * f1(spec, 1.0 - h) + f1(spec, 1.0 - 2.0 * h)) / (h * h);
    return pi0_estimator_limit(spec.pi0(), fdd, m);
}

}  // namespace maxlfdr
