#pragma once

// p-value samples, the empirical cdf, its least concave majorant, and the
// Grenander (monotone density) estimator read off the majorant's slopes.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <utility>
#include <vector>

#include "maxlfdr/errors.hpp"

namespace maxlfdr {

/// An immutable batch of m >= 1 p-values in [0,1] with cached order
/// statistics. Ties keep their input order, so `order()` sorts by
/// (p-value, original index).
class PValueSample {
public:
    explicit PValueSample(std::vector<double> values) : values_(std::move(values)) {
        if (values_.empty()) throw EmptySampleError();
        const std::size_t m = values_.size();
        std::vector<std::pair<double, std::uint32_t>> keyed(m);
        for (std::size_t i = 0; i < m; ++i) {
            const double p = values_[i];
            if (!(p >= 0.0 && p <= 1.0)) throw DomainError("p-value outside [0,1]");
            keyed[i] = {p, static_cast<std::uint32_t>(i)};
        }
        std::sort(keyed.begin(), keyed.end());
        sorted_.resize(m + 1);
        order_.resize(m);
        sorted_[0] = 0.0;
        for (std::size_t k = 0; k < m; ++k) {
            sorted_[k + 1] = keyed[k].first;
            order_[k] = keyed[k].second;
        }
    }

    std::size_t size() const noexcept { return values_.size(); }

    /// p-values in input order.
    std::span<const double> values() const noexcept { return values_; }

    /// p_(0) = 0, p_(1) <= ... <= p_(m); length m + 1.
    std::span<const double> order_statistics() const noexcept { return sorted_; }

    /// p_(k) for k in 0..m.
    double order_statistic(std::size_t k) const noexcept { return sorted_[k]; }

    /// Input indices (0-based) sorted by (p-value, index).
    std::span<const std::uint32_t> order() const noexcept { return order_; }

    /// #{i : p_i <= t}.
    std::size_t count_at_most(double t) const noexcept {
        return static_cast<std::size_t>(
            std::upper_bound(sorted_.begin() + 1, sorted_.end(), t) - (sorted_.begin() + 1));
    }

    double ecdf(double t) const {
        if (!(t >= 0.0 && t <= 1.0)) throw DomainError("ecdf argument outside [0,1]");
        return static_cast<double>(count_at_most(t)) / static_cast<double>(size());
    }

private:
    std::vector<double> values_;
    std::vector<double> sorted_;
    std::vector<std::uint32_t> order_;
};

inline std::vector<double> order_statistics(const PValueSample& sample) {
    const auto s = sample.order_statistics();
    return {s.begin(), s.end()};
}

inline double ecdf(const PValueSample& sample, double t) { return sample.ecdf(t); }

/// Slope of the chord between ecdf vertices (x_lo, k_lo/m) and (x_hi, k_hi/m).
/// Every slope in the library goes through this one expression so that the
/// hull scan and the pool-adjacent-violators route round identically.
inline double chord_slope(std::size_t k_lo, double x_lo, std::size_t k_hi, double x_hi,
                          std::size_t m) noexcept {
    return static_cast<double>(k_hi - k_lo) / (static_cast<double>(m) * (x_hi - x_lo));
}

/// Least concave majorant of the ecdf and its left derivative.
///
/// knots[0] = 0 and knots.back() = 1. Segment j spans (knots[j], knots[j+1]]
/// with slope slopes[j]; slopes are strictly decreasing. counts[j] is the
/// number of p-values <= knots[j], so majorant_values[j] = counts[j] / m.
/// If some p-values equal 0 exactly the majorant starts at F_m(0) > 0 and the
/// slopes integrate to 1 - F_m(0).
struct GrenanderFit {
    std::size_t m = 0;
    std::vector<double> knots;
    std::vector<std::size_t> counts;
    std::vector<double> majorant_values;
    std::vector<double> slopes;

    std::size_t segment_count() const noexcept { return slopes.size(); }

    /// Index of the segment (knots[j], knots[j+1]] containing t in (0,1].
    std::size_t segment_of(double t) const noexcept {
        const auto it = std::lower_bound(knots.begin() + 1, knots.end(), t);
        return static_cast<std::size_t>(it - (knots.begin() + 1));
    }

    /// The majorant itself, by linear interpolation between knots.
    double majorant(double t) const {
        if (!(t >= 0.0 && t <= 1.0)) throw DomainError("majorant argument outside [0,1]");
        if (t == 0.0) return majorant_values.front();
        const std::size_t j = segment_of(t);
        return majorant_values[j] + slopes[j] * (t - knots[j]);
    }
};

/// Upper-hull scan over the ecdf vertices {(0, F_m(0))} U {(p_(k), k/m)} U {(1, 1)}.
/// Duplicate abscissae keep their largest ordinate; collinear vertices are
/// dropped. O(m) after the sample's sort.
inline GrenanderFit lcm_fit(const PValueSample& sample) {
    const std::size_t m = sample.size();
    const auto sorted = sample.order_statistics();

    std::vector<double> xs;
    std::vector<std::size_t> ks;
    xs.reserve(m + 2);
    ks.reserve(m + 2);
    xs.push_back(0.0);
    ks.push_back(0);
    for (std::size_t k = 1; k <= m; ++k) {
        if (sorted[k] == xs.back()) {
            ks.back() = k;
        } else {
            xs.push_back(sorted[k]);
            ks.push_back(k);
        }
    }
    if (xs.back() < 1.0) {
        xs.push_back(1.0);
        ks.push_back(m);
    }

    std::vector<std::size_t> hull;
    hull.reserve(xs.size());
    for (std::size_t c = 0; c < xs.size(); ++c) {
        while (hull.size() >= 2) {
            const std::size_t b = hull[hull.size() - 1];
            const std::size_t a = hull[hull.size() - 2];
            if (chord_slope(ks[a], xs[a], ks[b], xs[b], m) <= chord_slope(ks[b], xs[b], ks[c], xs[c], m)) {
                hull.pop_back();
            } else {
                break;
            }
        }
        hull.push_back(c);
    }

    GrenanderFit fit;
    fit.m = m;
    for (std::size_t v : hull) {
        fit.knots.push_back(xs[v]);
        fit.counts.push_back(ks[v]);
        fit.majorant_values.push_back(static_cast<double>(ks[v]) / static_cast<double>(m));
    }
    for (std::size_t j = 0; j + 1 < hull.size(); ++j) {
        const std::size_t a = hull[j];
        const std::size_t b = hull[j + 1];
        fit.slopes.push_back(chord_slope(ks[a], xs[a], ks[b], xs[b], m));
    }
    return fit;
}

/// Grenander density estimate at t in (0,1]: the left derivative of the
/// majorant, so a knot takes the slope of the segment to its left.
inline double grenander_density(const GrenanderFit& fit, double t) {
    if (!(t > 0.0 && t <= 1.0)) throw DomainError("Grenander density requires t in (0,1]");
    return fit.slopes[fit.segment_of(t)];
}

/// Returned by lfdr_hat where the density estimate is zero.
inline constexpr double kNoDensity = std::numeric_limits<double>::infinity();

/// Plug-in lfdr estimate pi0_bound / f_hat(t). The conservative choice is
/// pi0_bound = 1; a Storey estimate above 1 is accepted unclipped.
inline double lfdr_hat(const GrenanderFit& fit, double t, double pi0_bound = 1.0) {
    if (!(pi0_bound > 0.0 && std::isfinite(pi0_bound))) {
        throw DomainError("pi0 bound must be positive and finite");
    }
    const double f = grenander_density(fit, t);
    return f > 0.0 ? pi0_bound / f : kNoDensity;
}

}  // namespace maxlfdr
