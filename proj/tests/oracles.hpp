#pragma once

// Independent reference computations used only by the tests. Nothing here
// calls the routine it is checking.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <random>
#include <vector>

#include "maxlfdr/sample.hpp"

namespace oracle {

/// Last minimizer of scale * p_(k) - q k / m over k = 0..k_max, by direct
/// enumeration on a sorted copy.
inline std::size_t exhaustive_argmin(std::vector<double> p, double q, double scale = 1.0,
                                     std::size_t k_max = std::numeric_limits<std::size_t>::max()) {
    std::sort(p.begin(), p.end());
    const double m = static_cast<double>(p.size());
    k_max = std::min(k_max, p.size());
    std::vector<double> obj(k_max + 1);
    obj[0] = 0.0;
    for (std::size_t k = 1; k <= k_max; ++k) obj[k] = scale * p[k - 1] - q * static_cast<double>(k) / m;
    const double best = *std::min_element(obj.begin(), obj.end());
    std::size_t arg = 0;
    for (std::size_t k = 0; k <= k_max; ++k) {
        if (obj[k] == best) arg = k;
    }
    return arg;
}

/// min_k (p_(k) - q k / m) over k = 0..m: the objective's minimum value.
inline double sl_objective_min(std::vector<double> p, double q) {
    std::sort(p.begin(), p.end());
    const double m = static_cast<double>(p.size());
    double best = 0.0;
    for (std::size_t k = 1; k <= p.size(); ++k) {
        best = std::min(best, p[k - 1] - q * static_cast<double>(k) / m);
    }
    return best;
}

/// Largest k with p_(k) <= q k / m, by direct scan.
inline std::size_t bh_count(std::vector<double> p, double q) {
    std::sort(p.begin(), p.end());
    const double m = static_cast<double>(p.size());
    std::size_t r = 0;
    for (std::size_t k = 1; k <= p.size(); ++k) {
        if (p[k - 1] <= q * static_cast<double>(k) / m) r = k;
    }
    return r;
}

struct StepDensity {
    std::vector<double> knots;  // block boundaries, starting at 0 and ending at 1
    std::vector<double> slopes;
};

/// Grenander density by pool-adjacent-violators: antitonic regression of the
/// raw ecdf increments, weighted by interval length. Pooled block values use
/// the same chord expression as the hull scan so results can match exactly.
inline StepDensity pava_grenander(std::vector<double> p) {
    std::sort(p.begin(), p.end());
    const std::size_t m = p.size();
    // Distinct abscissae with cumulative counts.
    std::vector<double> x{0.0};
    std::vector<std::size_t> k{0};
    for (std::size_t i = 0; i < m; ++i) {
        if (p[i] == x.back()) {
            k.back() = i + 1;
        } else {
            x.push_back(p[i]);
            k.push_back(i + 1);
        }
    }
    if (x.back() < 1.0) {
        x.push_back(1.0);
        k.push_back(m);
    }

    struct Block {
        std::size_t lo, hi;  // vertex indices
        double value;
    };
    std::vector<Block> blocks;
    for (std::size_t i = 1; i < x.size(); ++i) {
        blocks.push_back({i - 1, i, maxlfdr::chord_slope(k[i - 1], x[i - 1], k[i], x[i], m)});
        while (blocks.size() >= 2 && blocks[blocks.size() - 2].value <= blocks.back().value) {
            const Block last = blocks.back();
            blocks.pop_back();
            Block& prev = blocks.back();
            prev.hi = last.hi;
            prev.value = maxlfdr::chord_slope(k[prev.lo], x[prev.lo], k[prev.hi], x[prev.hi], m);
        }
    }
    StepDensity out;
    out.knots.push_back(x[blocks.front().lo]);
    for (const auto& b : blocks) {
        out.knots.push_back(x[b.hi]);
        out.slopes.push_back(b.value);
    }
    return out;
}

/// Random p-value vector of size m: a mix of uniforms, small values and,
/// with some probability, deliberate ties on a coarse grid.
inline std::vector<double> random_p_values(std::mt19937_64& gen, std::size_t m) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const bool ties = unif(gen) < 0.3;
    const double small_frac = unif(gen);
    std::vector<double> p(m);
    for (auto& v : p) {
        double u = unif(gen);
        if (unif(gen) < small_frac) u = std::pow(u, 4.0);
        if (ties) u = std::ceil(u * 20.0) / 20.0;
        v = std::clamp(u, 1e-9, 1.0);
    }
    return p;
}

struct Moments {
    double mean = 0.0;
    double se = 0.0;
    double sd = 0.0;
};

/// Two-pass mean, sd and standard error.
inline Moments moments(const std::vector<double>& xs) {
    Moments out;
    const double n = static_cast<double>(xs.size());
    for (const double x : xs) out.mean += x;
    out.mean /= n;
    double ss = 0.0;
    for (const double x : xs) ss += (x - out.mean) * (x - out.mean);
    out.sd = std::sqrt(ss / (n - 1.0));
    out.se = out.sd / std::sqrt(n);
    return out;
}

/// Sample Pearson correlation.
inline double correlation(const std::vector<double>& a, const std::vector<double>& b) {
    const auto ma = moments(a), mb = moments(b);
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - ma.mean) * (b[i] - mb.mean);
    return s / (static_cast<double>(a.size()) - 1.0) / (ma.sd * mb.sd);
}

/// Kolmogorov-Smirnov distance between the ecdf of xs and a cdf.
template <class Cdf>
double ks_distance(std::vector<double> xs, Cdf cdf) {
    std::sort(xs.begin(), xs.end());
    const double n = static_cast<double>(xs.size());
    double d = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double f = cdf(xs[i]);
        d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
    }
    return d;
}

}  // namespace oracle
