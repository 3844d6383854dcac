#pragma once

// Multiple testing procedures on a PValueSample: the support-line (SL) rule,
// Benjamini-Hochberg, the Storey-adaptive SL rule, fixed thresholds, and the
// Grenander route to the SL threshold.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "maxlfdr/errors.hpp"
#include "maxlfdr/sample.hpp"

namespace maxlfdr {

/// Output of a procedure. rejected_indices are 0-based input positions in
/// ascending p-value order and always equal {i : p_i <= threshold}.
///
/// rejection_count is the procedure's own index (the argmin for SL, the
/// step-up index for BH). Under exact ties the two could in principle
/// differ, but for SL, BH and adaptive SL a tie at the threshold strictly
/// lowers the objective at the later index, so the argmin already absorbs
/// every tied value and the counts agree.
struct RejectionResult {
    std::size_t rejection_count = 0;
    double threshold = 0.0;
    std::vector<std::uint32_t> rejected_indices;
    double effective_level = 0.0;
    std::optional<double> pi0_estimate;
};

namespace detail {

inline void check_level(double q) {
    if (!(q > 0.0 && q <= 1.0)) throw LevelError("level q must lie in (0,1]");
}

inline void check_zeta(double zeta) {
    if (!(zeta > 0.0 && zeta < 1.0)) throw DomainError("zeta must lie in (0,1)");
}

inline std::vector<std::uint32_t> prefix_indices(const PValueSample& sample, std::size_t count) {
    const auto order = sample.order();
    return {order.begin(), order.begin() + static_cast<std::ptrdiff_t>(count)};
}

inline RejectionResult reject_up_to(const PValueSample& sample, double threshold,
                                    std::size_t rejection_count, double level) {
    RejectionResult r;
    r.rejection_count = rejection_count;
    r.threshold = threshold;
    r.effective_level = level;
    r.rejected_indices = prefix_indices(sample, sample.count_at_most(threshold));
    return r;
}

/// Last minimizer of scale * p_(k) - q k / m over k = 0..k_max.
inline std::size_t last_argmin(const PValueSample& sample, double scale, double q,
                               std::size_t k_max) {
    const auto p = sample.order_statistics();
    const double m = static_cast<double>(sample.size());
    std::size_t best_k = 0;
    double best = 0.0;
    for (std::size_t k = 1; k <= k_max; ++k) {
        const double obj = scale * p[k] - q * static_cast<double>(k) / m;
        if (obj <= best) {
            best = obj;
            best_k = k;
        }
    }
    return best_k;
}

}  // namespace detail

/// SL procedure: R = last minimizer of p_(k) - q k / m over k = 0..m,
/// threshold p_(R). Requires q in (0,1].
inline RejectionResult sl_reject(const PValueSample& sample, double q) {
    detail::check_level(q);
    const std::size_t r = detail::last_argmin(sample, 1.0, q, sample.size());
    return detail::reject_up_to(sample, sample.order_statistic(r), r, q);
}

/// Benjamini-Hochberg: R = max{k : p_(k) <= q k / m}, threshold q R / m.
inline RejectionResult bh_reject(const PValueSample& sample, double q) {
    detail::check_level(q);
    const auto p = sample.order_statistics();
    const std::size_t m = sample.size();
    std::size_t r = 0;
    for (std::size_t k = m; k >= 1; --k) {
        if (p[k] <= q * static_cast<double>(k) / static_cast<double>(m)) {
            r = k;
            break;
        }
    }
    const double tau = q * static_cast<double>(r) / static_cast<double>(m);
    return detail::reject_up_to(sample, tau, r, q);
}

/// Storey's null-proportion estimate (1 + #{p_i > zeta}) / ((1 - zeta) m).
/// Not clipped at 1.
inline double storey_pi0(const PValueSample& sample, double zeta) {
    detail::check_zeta(zeta);
    const std::size_t m = sample.size();
    const std::size_t above = m - sample.count_at_most(zeta);
    return (1.0 + static_cast<double>(above)) / ((1.0 - zeta) * static_cast<double>(m));
}

/// zeta = 1 - m^{-1/5}, the schedule under which the Storey estimate is
/// m^{2/5}-consistent. Requires m >= 2.
inline double zeta_schedule(std::size_t m) {
    if (m < 2) throw DomainError("zeta schedule needs m >= 2");
    return 1.0 - std::pow(static_cast<double>(m), -0.2);
}

/// Adaptive SL: R = last minimizer of pi0_hat p_(k) - q k / m over the k with
/// p_(k) <= zeta (k = 0 always admissible), pi0_hat = storey_pi0(zeta).
/// effective_level reports q / pi0_hat.
inline RejectionResult adaptive_sl_reject(const PValueSample& sample, double q, double zeta) {
    detail::check_level(q);
    const double pi0 = storey_pi0(sample, zeta);
    const std::size_t admissible = sample.count_at_most(zeta);
    const std::size_t r = detail::last_argmin(sample, pi0, q, admissible);
    auto result = detail::reject_up_to(sample, sample.order_statistic(r), r, q / pi0);
    result.pi0_estimate = pi0;
    return result;
}

/// SL at the corrected level q / pi0_hat with no restriction to p_(k) <= zeta.
/// Agrees with adaptive_sl_reject whenever its threshold is at most zeta.
/// The corrected level may exceed 1, so no level check beyond q in (0,1].
inline RejectionResult adaptive_sl_reject_unrestricted(const PValueSample& sample, double q,
                                                       double zeta) {
    detail::check_level(q);
    const double pi0 = storey_pi0(sample, zeta);
    const std::size_t r = detail::last_argmin(sample, pi0, q, sample.size());
    auto result = detail::reject_up_to(sample, sample.order_statistic(r), r, q / pi0);
    result.pi0_estimate = pi0;
    return result;
}

/// BH at the Storey-corrected level min(1, q / pi0_hat).
inline RejectionResult adaptive_bh_reject(const PValueSample& sample, double q, double zeta) {
    detail::check_level(q);
    const double pi0 = storey_pi0(sample, zeta);
    auto result = bh_reject(sample, std::min(1.0, q / pi0));
    result.pi0_estimate = pi0;
    return result;
}

/// Rejects every p_i <= t. The reported threshold is t when something is
/// rejected and 0 otherwise; effective_level records t.
inline RejectionResult fixed_threshold_reject(const PValueSample& sample, double t) {
    if (!(t >= 0.0 && t <= 1.0)) throw DomainError("fixed threshold outside [0,1]");
    const std::size_t r = sample.count_at_most(t);
    RejectionResult result;
    result.rejection_count = r;
    result.threshold = r > 0 ? t : 0.0;
    result.effective_level = t;
    result.rejected_indices = detail::prefix_indices(sample, r);
    return result;
}

/// The SL threshold read off the Grenander estimator:
/// sup{t in [0,1] : f_hat(t) >= 1/q}, sup of the empty set = 0.
inline double sl_threshold_via_grenander(const GrenanderFit& fit, double q) {
    detail::check_level(q);
    const double level = 1.0 / q;
    double tau = 0.0;
    for (std::size_t j = 0; j < fit.segment_count(); ++j) {
        if (fit.slopes[j] >= level) {
            tau = fit.knots[j + 1];
        } else {
            break;
        }
    }
    return tau;
}

inline double sl_threshold_via_grenander(const PValueSample& sample, double q) {
    return sl_threshold_via_grenander(lcm_fit(sample), q);
}

/// Lebesgue measure of the set of u in [0,1] for which, with p_1..p_{m-1}
/// fixed and p_m = u, the SL threshold equals u (u is the last rejection).
/// Computed segment by segment between the fixed values: on each segment u
/// has a fixed rank and wins exactly while its objective stays below the best
/// objective of every other index.
inline double last_rejection_winning_measure(std::span<const double> fixed, double q) {
    if (!(q > 0.0)) throw LevelError("level q must be positive");
    std::vector<double> s(fixed.begin(), fixed.end());
    std::sort(s.begin(), s.end());
    const std::size_t n = s.size();  // m - 1
    const double m = static_cast<double>(n + 1);

    // With u at rank j+1 (j fixed values below it):
    //   k <= j   : objective s_(k) - q k / m        (s_(0) = 0)
    //   k >= j+2 : objective s_(k-1) - q k / m
    std::vector<double> prefix_min(n + 1);
    double run = 0.0;
    prefix_min[0] = 0.0;
    for (std::size_t k = 1; k <= n; ++k) {
        run = std::min(run, s[k - 1] - q * static_cast<double>(k) / m);
        prefix_min[k] = run;
    }
    std::vector<double> suffix_min(n + 2, std::numeric_limits<double>::infinity());
    for (std::size_t k = n + 1; k >= 2; --k) {
        // objective at index k uses s_(k-1), i.e. s[k-2]
        const double obj = s[k - 2] - q * static_cast<double>(k) / m;
        suffix_min[k - 1] = std::min(suffix_min[k], obj);
    }
    // suffix_min[j+1] = min over k >= j+2.

    double measure = 0.0;
    double lo = 0.0;
    for (std::size_t j = 0; j <= n; ++j) {
        const double hi = std::min(j < n ? s[j] : 1.0, 1.0);
        if (hi > lo) {
            const double others = std::min(prefix_min[j], suffix_min[j + 1]);
            const double cutoff = others + q * static_cast<double>(j + 1) / m;
            measure += std::clamp(cutoff - lo, 0.0, hi - lo);
        }
        lo = std::max(lo, hi);
    }
    return measure;
}

}  // namespace maxlfdr
