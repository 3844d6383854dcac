#pragma once

// Analytic two-groups models: p_i is Unif(0,1) under the null (probability
// pi0) and drawn from an alternative density f1 otherwise. Provides f1, the
// mixture f and F, the true lfdr pi0 / f, population thresholds and the
// fixed-threshold regret rho(t).

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <string>
#include <string_view>
#include <type_traits>
#include <variant>
#include <vector>

#include "maxlfdr/errors.hpp"
#include "maxlfdr/special.hpp"

namespace maxlfdr {

/// f1(t) = theta t^{theta - 1}, a Beta(theta, 1) density.
struct Lehmann {
    double theta = 0.5;
};

struct Shift {
    double value = 0.0;
    double prob = 1.0;
};

/// One-sided z-test p-values p = 1 - Phi(Y), Y ~ N(mu, 1), mu drawn from `shifts`.
struct NormalLocation {
    std::vector<Shift> shifts;
};

/// Same construction with a standard Cauchy location family. f1 is not
/// monotone, which makes this the misspecified case.
struct CauchyLocation {
    std::vector<Shift> shifts;
};

using Alternative = std::variant<Lehmann, NormalLocation, CauchyLocation>;

class TwoGroupsSpec {
public:
    TwoGroupsSpec(double pi0, Alternative alternative, std::string name = {})
        : pi0_(pi0), alternative_(std::move(alternative)), name_(std::move(name)) {
        if (!(pi0_ >= 0.0 && pi0_ <= 1.0)) throw DomainError("pi0 must lie in [0,1]");
        std::visit(
            [](const auto& alt) {
                using T = std::decay_t<decltype(alt)>;
                if constexpr (std::is_same_v<T, Lehmann>) {
                    if (!(alt.theta > 0.0 && alt.theta < 1.0)) {
                        throw DomainError("Lehmann theta must lie in (0,1)");
                    }
                } else {
                    if (alt.shifts.empty()) throw DomainError("shift mixture is empty");
                    double total = 0.0;
                    for (const auto& s : alt.shifts) {
                        if (!(s.prob >= 0.0) || !std::isfinite(s.value)) {
                            throw DomainError("invalid shift component");
                        }
                        total += s.prob;
                    }
                    if (std::fabs(total - 1.0) > 1e-12) {
                        throw DomainError("shift probabilities must sum to 1");
                    }
                }
            },
            alternative_);
    }

    double pi0() const noexcept { return pi0_; }
    const Alternative& alternative() const noexcept { return alternative_; }
    const std::string& name() const noexcept { return name_; }

    /// True when f1 is non-increasing (equivalently lfdr non-decreasing):
    /// always for Lehmann, for normal shifts that are all >= 0, never for a
    /// non-degenerate Cauchy mixture.
    bool monotone() const noexcept {
        return std::visit(
            [](const auto& alt) {
                using T = std::decay_t<decltype(alt)>;
                if constexpr (std::is_same_v<T, Lehmann>) {
                    return true;
                } else if constexpr (std::is_same_v<T, NormalLocation>) {
                    return std::all_of(alt.shifts.begin(), alt.shifts.end(),
                                       [](const Shift& s) { return s.value >= 0.0; });
                } else {
                    return std::all_of(alt.shifts.begin(), alt.shifts.end(),
                                       [](const Shift& s) { return s.value == 0.0; });
                }
            },
            alternative_);
    }

private:
    double pi0_;
    Alternative alternative_;
    std::string name_;
};

// ---------------------------------------------------------------------------
// Presets

/// Shift mixture 5j/4, j = 1..4, equally weighted.
inline std::vector<Shift> bh64_shifts() {
    return {{1.25, 0.25}, {2.5, 0.25}, {3.75, 0.25}, {5.0, 0.25}};
}

/// pi0 = 3/4, non-null means 5j/4 each with overall probability 1/16.
inline TwoGroupsSpec bh64_model() { return {0.75, NormalLocation{bh64_shifts()}, "bh64"}; }

inline TwoGroupsSpec bh64_cauchy_model() {
    return {0.75, CauchyLocation{bh64_shifts()}, "bh64-cauchy"};
}

inline TwoGroupsSpec lehmann_model(double pi0, double theta) {
    std::string name = "lehmann(" + std::to_string(pi0) + "," + std::to_string(theta) + ")";
    return {pi0, Lehmann{theta}, std::move(name)};
}

namespace detail {

inline double parse_number(std::string_view text) {
    while (!text.empty() && text.front() == ' ') text.remove_prefix(1);
    while (!text.empty() && text.back() == ' ') text.remove_suffix(1);
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty()) {
        throw ConfigError("malformed number '" + std::string(text) + "'");
    }
    return value;
}

}  // namespace detail

/// Resolves "bh64", "bh64-cauchy", "global-null" or "lehmann(pi0,theta)".
inline TwoGroupsSpec parse_model(std::string_view text) {
    if (text == "bh64") return bh64_model();
    if (text == "bh64-cauchy") return bh64_cauchy_model();
    if (text == "global-null") return {1.0, Lehmann{0.5}, "global-null"};
    constexpr std::string_view prefix = "lehmann(";
    if (text.starts_with(prefix) && text.ends_with(")")) {
        const auto body = text.substr(prefix.size(), text.size() - prefix.size() - 1);
        const auto comma = body.find(',');
        if (comma == std::string_view::npos) throw ConfigError("lehmann model needs (pi0,theta)");
        const double pi0 = detail::parse_number(body.substr(0, comma));
        const double theta = detail::parse_number(body.substr(comma + 1));
        try {
            return {pi0, Lehmann{theta}, std::string(text)};
        } catch (const DomainError& e) {
            throw ConfigError(std::string("invalid lehmann model: ") + e.what());
        }
    }
    throw ConfigError("unknown model '" + std::string(text) + "'");
}

// ---------------------------------------------------------------------------
// Densities and distribution functions

inline double f1(const TwoGroupsSpec& spec, double t) {
    if (!(t > 0.0 && t < 1.0)) throw DomainError("f1 is evaluated on (0,1) only");
    return std::visit(
        [t](const auto& alt) {
            using T = std::decay_t<decltype(alt)>;
            if constexpr (std::is_same_v<T, Lehmann>) {
                return alt.theta * std::pow(t, alt.theta - 1.0);
            } else if constexpr (std::is_same_v<T, NormalLocation>) {
                // phi(y - mu) / phi(y) = exp(mu y - mu^2 / 2)
                const double y = special::normal_isf(t);
                double sum = 0.0;
                for (const auto& s : alt.shifts) {
                    sum += s.prob * std::exp(s.value * y - 0.5 * s.value * s.value);
                }
                return sum;
            } else {
                const double y = special::cauchy_isf(t);
                double sum = 0.0;
                for (const auto& s : alt.shifts) {
                    // (1 + y^2) / (1 + (y - mu)^2), divided through by y^2 when
                    // |y| is large so that t near 0 does not give inf / inf
                    if (std::fabs(y) > 1.0) {
                        const double u = 1.0 / y;
                        const double d = 1.0 - s.value * u;
                        sum += s.prob * (1.0 + u * u) / (u * u + d * d);
                    } else {
                        const double d = y - s.value;
                        sum += s.prob * (1.0 + y * y) / (1.0 + d * d);
                    }
                }
                return sum;
            }
        },
        spec.alternative());
}

inline double F1(const TwoGroupsSpec& spec, double t) {
    if (!(t >= 0.0 && t <= 1.0)) throw DomainError("F1 is evaluated on [0,1]");
    if (t == 0.0) return 0.0;
    if (t == 1.0) return 1.0;
    return std::visit(
        [t](const auto& alt) {
            using T = std::decay_t<decltype(alt)>;
            if constexpr (std::is_same_v<T, Lehmann>) {
                return std::pow(t, alt.theta);
            } else if constexpr (std::is_same_v<T, NormalLocation>) {
                const double y = special::normal_isf(t);
                double sum = 0.0;
                for (const auto& s : alt.shifts) sum += s.prob * special::normal_sf(y - s.value);
                return sum;
            } else {
                const double y = special::cauchy_isf(t);
                double sum = 0.0;
                for (const auto& s : alt.shifts) sum += s.prob * special::cauchy_sf(y - s.value);
                return sum;
            }
        },
        spec.alternative());
}

inline double mixture_f(const TwoGroupsSpec& spec, double t) {
    const double pi0 = spec.pi0();
    if (pi0 == 1.0) {
        if (!(t > 0.0 && t < 1.0)) throw DomainError("f is evaluated on (0,1) only");
        return 1.0;
    }
    return pi0 + (1.0 - pi0) * f1(spec, t);
}

inline double mixture_F(const TwoGroupsSpec& spec, double t) {
    const double pi0 = spec.pi0();
    return pi0 * t + (1.0 - pi0) * F1(spec, t);
}

/// lfdr(t) = P{H = 0 | p = t} = pi0 / f(t).
inline double true_lfdr(const TwoGroupsSpec& spec, double t) {
    return spec.pi0() / mixture_f(spec, t);
}

/// f'(t): analytic for Lehmann, central differences otherwise with
/// h = max(1e-6, 1e-6 t), shrunk so that t +- h stays inside (0,1).
inline double mixture_f_prime(const TwoGroupsSpec& spec, double t) {
    if (!(t > 0.0 && t < 1.0)) throw DomainError("f' is evaluated on (0,1) only");
    const double pi0 = spec.pi0();
    if (pi0 == 1.0) return 0.0;
    if (const auto* leh = std::get_if<Lehmann>(&spec.alternative())) {
        const double th = leh->theta;
        return (1.0 - pi0) * th * (th - 1.0) * std::pow(t, th - 2.0);
    }
    double h = std::max(1e-6, 1e-6 * t);
    h = std::min({h, 0.5 * t, 0.5 * (1.0 - t)});
    return (mixture_f(spec, t + h) - mixture_f(spec, t - h)) / (2.0 * h);
}

// ---------------------------------------------------------------------------
// Population thresholds

namespace detail {

/// Largest t in [lo, hi] with pred(t) true for a predicate that is true on an
/// initial segment; bisects to machine precision.
template <class Pred>
double last_true(Pred pred, double lo, double hi) {
    for (int it = 0; it < 400; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        (pred(mid) ? lo : hi) = mid;
    }
    return lo;
}

inline constexpr double kRootLo = 1e-12;
inline constexpr double kRootHi = 1.0 - 1e-12;

inline void require_monotone(const TwoGroupsSpec& spec) {
    if (!spec.monotone()) {
        throw AssumptionError("population threshold undefined for non-monotone f1");
    }
}

}  // namespace detail

/// t_q = sup{t in [0,1] : f(t) >= 1/q}: the root of f = 1/q for monotone f,
/// 0 if f < 1/q everywhere, 1 if f >= 1/q everywhere. Requires q in (0, 1/pi0).
inline double population_threshold_tq(const TwoGroupsSpec& spec, double q) {
    detail::require_monotone(spec);
    const double pi0 = spec.pi0();
    if (!(q > 0.0 && q * pi0 < 1.0)) throw DomainError("q must lie in (0, 1/pi0)");
    const double level = 1.0 / q;
    if (pi0 == 1.0) return 0.0;  // f == 1 < 1/q
    if (const auto* leh = std::get_if<Lehmann>(&spec.alternative())) {
        const double th = leh->theta;
        const double t = std::pow((level - pi0) / ((1.0 - pi0) * th), -1.0 / (1.0 - th));
        return std::min(t, 1.0);
    }
    const auto above = [&](double t) { return mixture_f(spec, t) >= level; };
    if (!above(detail::kRootLo)) return 0.0;
    if (above(detail::kRootHi)) return 1.0;
    return detail::last_true(above, detail::kRootLo, detail::kRootHi);
}

/// Population BH threshold: max{t in [0,1] : F(t) = t / q}. Requires q in (0,1).
inline double population_threshold_bh(const TwoGroupsSpec& spec, double q) {
    detail::require_monotone(spec);
    if (!(q > 0.0 && q < 1.0)) throw DomainError("q must lie in (0,1)");
    const double pi0 = spec.pi0();
    const double level = 1.0 / q;
    if (pi0 == 1.0) return 0.0;
    if (const auto* leh = std::get_if<Lehmann>(&spec.alternative())) {
        const double th = leh->theta;
        const double t = std::pow((level - pi0) / (1.0 - pi0), -1.0 / (1.0 - th));
        return std::min(t, 1.0);
    }
    const auto above = [&](double t) { return mixture_F(spec, t) >= level * t; };
    if (!above(detail::kRootLo)) return 0.0;
    return detail::last_true(above, detail::kRootLo, detail::kRootHi);
}

/// Oracle threshold tau* = max{t : lfdr(t) <= alpha}, 0 if none.
/// Monotone models use t_{alpha/pi0}. For a non-monotone model the set
/// {lfdr <= alpha} need not be an interval; the literal max is located on a
/// log-spaced grid and refined by bisection.
inline double oracle_threshold(const TwoGroupsSpec& spec, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("alpha must lie in (0,1)");
    const double pi0 = spec.pi0();
    if (pi0 == 0.0) return 1.0;
    if (spec.monotone()) return population_threshold_tq(spec, alpha / pi0);

    constexpr int kGrid = 4096;
    const auto ok = [&](double t) { return true_lfdr(spec, t) <= alpha; };
    const double log_lo = std::log(detail::kRootLo);
    const auto grid = [&](int i) {
        return std::exp(log_lo * (1.0 - static_cast<double>(i) / kGrid));
    };
    double right = detail::kRootHi;
    if (ok(right)) return 1.0;
    for (int i = kGrid - 1; i >= 0; --i) {
        const double t = std::min(grid(i), detail::kRootHi);
        if (ok(t)) return detail::last_true(ok, t, right);
        right = t;
    }
    return 0.0;
}

/// q' = t_q / F(t_q), the level at which population BH reproduces t_q.
inline double bh_equivalent_level(const TwoGroupsSpec& spec, double q) {
    const double t = population_threshold_tq(spec, q);
    if (!(t > 0.0)) throw DomainError("t_q = 0: no equivalent BH level");
    return t / mixture_F(spec, t);
}

/// Regret of the fixed-threshold rule at t relative to the oracle at level
/// alpha: rho(t) = F(tau*) - F(t) - (pi0/alpha)(tau* - t). Free of m. For a
/// non-monotone model (spec.monotone() false) the value can be negative and
/// should be read as a warning rather than a regret.
inline double rho_regret(const TwoGroupsSpec& spec, double alpha, double t) {
    if (!(t >= 0.0 && t <= 1.0)) throw DomainError("t must lie in [0,1]");
    const double tau = oracle_threshold(spec, alpha);
    return mixture_F(spec, tau) - mixture_F(spec, t) - spec.pi0() / alpha * (tau - t);
}

}  // namespace maxlfdr
