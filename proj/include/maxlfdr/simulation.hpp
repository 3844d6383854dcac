#pragma once

// Seeded Monte Carlo engine for two-groups scenarios.
//
// Every replicate r draws from its own generator, seeded from (seed, r), so
// the output does not depend on how replicates are spread over threads.
// Summaries are reduced in fixed blocks of replicates (Welford inside a
// block, pairwise merges across blocks in block order), which makes the
// streaming summary and aggregate(run_scenario(...)) agree bit for bit.

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "maxlfdr/errors.hpp"
#include "maxlfdr/io.hpp"
#include "maxlfdr/metrics.hpp"
#include "maxlfdr/models.hpp"
#include "maxlfdr/procedures.hpp"
#include "maxlfdr/sample.hpp"
#include "maxlfdr/special.hpp"

namespace maxlfdr {

// ---------------------------------------------------------------------------
// Random numbers

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// mt19937_64 with uniforms on the open interval (0,1) and polar-method
/// normals. Satisfies UniformRandomBitGenerator.
class Rng {
public:
    using result_type = std::uint64_t;
    static constexpr const char* description = "mt19937_64 seeded by splitmix64(seed, replicate)";

    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Stream for replicate r: splitmix64 of the seed, offset by r, hashed
    /// again. Distinct replicates get distinct engine seeds.
    static Rng for_replicate(std::uint64_t seed, std::uint64_t replicate) {
        std::uint64_t s = seed;
        std::uint64_t t = splitmix64(s) + replicate;
        return Rng(splitmix64(t));
    }

    static constexpr result_type min() { return std::mt19937_64::min(); }
    static constexpr result_type max() { return std::mt19937_64::max(); }
    result_type operator()() { return engine_(); }

    /// (k + 1/2) 2^-53 for a 53-bit k: never 0 or 1.
    double uniform() { return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53; }

    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double f = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * f;
        has_spare_ = true;
        return u * f;
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

// ---------------------------------------------------------------------------
// Samplers

struct Dependence {
    enum class Kind { independent, equicorrelated, autoregressive };
    Kind kind = Kind::independent;
    double rho = 0.0;

    static Dependence independent() { return {}; }
    static Dependence equicorrelated(double rho) { return {Kind::equicorrelated, rho}; }
    static Dependence autoregressive(double rho) { return {Kind::autoregressive, rho}; }

    std::string label() const {
        switch (kind) {
            case Kind::equicorrelated: return "equicorrelated";
            case Kind::autoregressive: return "autoregressive";
            default: return "independent";
        }
    }

    /// Equicorrelation needs rho in (-1/(m-1), 1), AR(1) needs rho in (-1,1).
    void validate(std::size_t m) const {
        if (kind == Kind::independent) return;
        if (!std::isfinite(rho) || !(rho < 1.0)) throw ConfigError("rho must be below 1");
        if (kind == Kind::autoregressive && !(rho > -1.0)) {
            throw ConfigError("autoregressive rho must lie in (-1,1)");
        }
        if (kind == Kind::equicorrelated) {
            const double lower = m > 1 ? -1.0 / static_cast<double>(m - 1) : -1.0;
            if (!(rho > lower)) {
                throw ConfigError("equicorrelated rho must exceed -1/(m-1) = " +
                                  io::format_number(lower));
            }
        }
    }
};

/// Y = mu + noise with unit marginal variances.
///   equicorrelated, rho >= 0: one shared factor, Y_i = mu_i + sqrt(rho) Z_0 + sqrt(1-rho) Z_i
///   equicorrelated, rho < 0 : symmetric root of the covariance,
///                             sqrt(1-rho)(Z - mean Z) + sqrt(1+(m-1)rho) mean Z
///   autoregressive          : e_1 = Z_1, e_i = rho e_{i-1} + sqrt(1-rho^2) Z_i
inline std::vector<double> sample_correlated_normal(std::span<const double> mu,
                                                    const Dependence& dependence, Rng& rng) {
    const std::size_t m = mu.size();
    dependence.validate(m);
    std::vector<double> y(m);
    const double rho = dependence.rho;
    switch (dependence.kind) {
        case Dependence::Kind::independent:
            for (std::size_t i = 0; i < m; ++i) y[i] = mu[i] + rng.normal();
            break;
        case Dependence::Kind::equicorrelated:
            if (rho >= 0.0) {
                const double shared = std::sqrt(rho) * rng.normal();
                const double own = std::sqrt(1.0 - rho);
                for (std::size_t i = 0; i < m; ++i) y[i] = mu[i] + shared + own * rng.normal();
            } else {
                double mean = 0.0;
                for (std::size_t i = 0; i < m; ++i) {
                    y[i] = rng.normal();
                    mean += y[i];
                }
                mean /= static_cast<double>(m);
                const double a = std::sqrt(1.0 - rho);
                const double b = std::sqrt(1.0 + static_cast<double>(m - 1) * rho) * mean;
                for (std::size_t i = 0; i < m; ++i) y[i] = mu[i] + a * (y[i] - mean) + b;
            }
            break;
        case Dependence::Kind::autoregressive: {
            const double innov = std::sqrt(1.0 - rho * rho);
            double e = 0.0;
            for (std::size_t i = 0; i < m; ++i) {
                e = i == 0 ? rng.normal() : rho * e + innov * rng.normal();
                y[i] = mu[i] + e;
            }
            break;
        }
    }
    return y;
}

struct TwoGroupsDraw {
    std::vector<std::uint8_t> hypotheses;  ///< 1 = non-null
    std::vector<double> p_values;
};

namespace detail {

// p-values are kept inside [DBL_MIN, 1 - 2^-53] so the lfdr of every draw is
// defined; this only touches events of probability ~1e-300 or tail-rounding.
inline double clamp_p(double p) {
    return std::clamp(p, std::numeric_limits<double>::min(), 1.0 - 0x1.0p-53);
}

inline double draw_shift(const std::vector<Shift>& shifts, Rng& rng) {
    const double u = rng.uniform();
    double acc = 0.0;
    for (const auto& s : shifts) {
        acc += s.prob;
        if (u < acc) return s.value;
    }
    return shifts.back().value;
}

}  // namespace detail

/// One draw of m hypotheses and p-values. Labels come first (H_i = 1 with
/// probability 1 - pi0; no draws at all when pi0 = 1), then the non-null
/// shifts, then the noise. Dependence is only defined for the normal family.
inline TwoGroupsDraw sample_two_groups(const TwoGroupsSpec& spec, std::size_t m, Rng& rng,
                                       const Dependence& dependence = Dependence::independent()) {
    TwoGroupsDraw draw;
    draw.hypotheses.assign(m, 0);
    draw.p_values.resize(m);
    const double pi1 = 1.0 - spec.pi0();
    if (pi1 > 0.0) {
        for (auto& h : draw.hypotheses) h = rng.uniform() < pi1 ? 1 : 0;
    }
    const auto& alt = spec.alternative();
    const bool normal = std::holds_alternative<NormalLocation>(alt);
    if (!normal && dependence.kind != Dependence::Kind::independent) {
        throw ConfigError("dependence is only available for the normal location model");
    }

    if (const auto* leh = std::get_if<Lehmann>(&alt)) {
        const double inv_theta = 1.0 / leh->theta;
        for (std::size_t i = 0; i < m; ++i) {
            const double u = rng.uniform();
            draw.p_values[i] = detail::clamp_p(draw.hypotheses[i] ? std::pow(u, inv_theta) : u);
        }
    } else if (const auto* nl = std::get_if<NormalLocation>(&alt)) {
        std::vector<double> mu(m, 0.0);
        for (std::size_t i = 0; i < m; ++i) {
            if (draw.hypotheses[i]) mu[i] = detail::draw_shift(nl->shifts, rng);
        }
        const auto y = sample_correlated_normal(mu, dependence, rng);
        for (std::size_t i = 0; i < m; ++i) draw.p_values[i] = detail::clamp_p(special::normal_sf(y[i]));
    } else {
        const auto& cl = std::get<CauchyLocation>(alt);
        for (std::size_t i = 0; i < m; ++i) {
            const double mu = draw.hypotheses[i] ? detail::draw_shift(cl.shifts, rng) : 0.0;
            const double y = mu + std::tan(std::numbers::pi * (rng.uniform() - 0.5));
            draw.p_values[i] = detail::clamp_p(special::cauchy_sf(y));
        }
    }
    return draw;
}

// ---------------------------------------------------------------------------
// Scenarios

struct ProcedureSpec {
    enum class Kind { sl, bh, adaptive_sl, adaptive_bh, fixed, oracle };
    Kind kind = Kind::sl;
    double fixed_threshold = 0.0;
    std::string name = "sl";

    /// Procedures with a nominal level run once per q in the grid; a fixed
    /// threshold and the oracle run once.
    bool uses_q_grid() const { return kind != Kind::fixed && kind != Kind::oracle; }
};

/// "sl", "bh", "adaptive-sl", "adaptive-bh", "fixed:<t>" or "oracle".
inline ProcedureSpec parse_procedure(std::string_view text) {
    using K = ProcedureSpec::Kind;
    const std::string name(text);
    if (text == "sl") return {K::sl, 0.0, name};
    if (text == "bh") return {K::bh, 0.0, name};
    if (text == "adaptive-sl") return {K::adaptive_sl, 0.0, name};
    if (text == "adaptive-bh") return {K::adaptive_bh, 0.0, name};
    if (text == "oracle") return {K::oracle, 0.0, name};
    if (text.starts_with("fixed:")) {
        const double t = detail::parse_number(text.substr(6));
        if (!(t >= 0.0 && t <= 1.0)) throw ConfigError("fixed threshold must lie in [0,1]");
        return {K::fixed, t, name};
    }
    throw ConfigError("unknown procedure '" + name +
                      "' (expected sl, bh, adaptive-sl, adaptive-bh, fixed:<t>, oracle)");
}

struct ScenarioConfig {
    std::string name = "scenario";
    std::string model = "bh64";
    std::size_t m = 64;
    Dependence dependence;
    std::size_t replications = 1000;
    std::uint64_t seed = 1;
    std::vector<double> q_grid{0.2};
    std::vector<ProcedureSpec> procedures{parse_procedure("sl")};
    std::optional<double> zeta = 0.5;  ///< nullopt: zeta = 1 - m^{-1/5}
    double lambda = 4.0;               ///< loss weight; the oracle runs at 1/(1+lambda)
    unsigned threads = 1;              ///< 0 = hardware concurrency

    TwoGroupsSpec model_spec() const { return parse_model(model); }

    double zeta_value() const { return zeta ? *zeta : zeta_schedule(m); }

    void validate() const {
        const auto spec = model_spec();
        if (m < 1) throw ConfigError("m must be >= 1");
        if (replications < 1) throw ConfigError("reps must be >= 1");
        dependence.validate(m);
        if (dependence.kind != Dependence::Kind::independent &&
            !std::holds_alternative<NormalLocation>(spec.alternative())) {
            throw ConfigError("dependence is only available for the normal location model");
        }
        if (q_grid.empty()) throw ConfigError("q_grid is empty");
        for (const double q : q_grid) {
            if (!(q > 0.0 && q <= 1.0)) throw ConfigError("q_grid values must lie in (0,1]");
        }
        if (procedures.empty()) throw ConfigError("procedures is empty");
        if (zeta && !(*zeta > 0.0 && *zeta < 1.0)) throw ConfigError("zeta must lie in (0,1)");
        if (!zeta && m < 2) throw ConfigError("zeta schedule needs m >= 2");
        if (!(lambda > 0.0 && std::isfinite(lambda))) throw ConfigError("lambda must be positive");
    }
};

struct ReplicateRecord {
    std::uint64_t replicate = 0;
    std::string procedure;
    double q = 0.0;  ///< nominal level; the threshold for fixed:<t>, 1/(1+lambda) for the oracle
    std::size_t rejections = 0;
    std::size_t false_discoveries = 0;
    double fdp = 0.0;
    int last_null = 0;
    double realized_max_lfdr = 0.0;
    double loss = 0.0;
    double regret = 0.0;  ///< NaN when f1 is not monotone (no threshold oracle)
    double tau = 0.0;
    double pi0_hat = 0.0;  ///< NaN for non-adaptive procedures
};

namespace detail {

struct Evaluation {
    const ProcedureSpec* procedure;
    double q;
};

struct ScenarioPlan {
    TwoGroupsSpec model;
    std::vector<Evaluation> evaluations;
    double zeta;
    double alpha;
    double oracle_tau;
    bool regret_defined;
};

inline ScenarioPlan make_plan(const ScenarioConfig& config) {
    config.validate();
    auto model = config.model_spec();
    const double alpha = 1.0 / (1.0 + config.lambda);
    ScenarioPlan plan{model, {}, 0.0, alpha, oracle_threshold(model, alpha), model.monotone()};
    bool adaptive = false;
    for (const auto& p : config.procedures) {
        if (p.uses_q_grid()) {
            for (const double q : config.q_grid) plan.evaluations.push_back({&p, q});
        } else {
            plan.evaluations.push_back(
                {&p, p.kind == ProcedureSpec::Kind::fixed ? p.fixed_threshold : alpha});
        }
        adaptive = adaptive || p.kind == ProcedureSpec::Kind::adaptive_sl ||
                   p.kind == ProcedureSpec::Kind::adaptive_bh;
    }
    plan.zeta = adaptive ? config.zeta_value() : 0.5;
    return plan;
}

inline RejectionResult apply(const ScenarioPlan& plan, const Evaluation& ev,
                             const PValueSample& sample) {
    using K = ProcedureSpec::Kind;
    switch (ev.procedure->kind) {
        case K::sl: return sl_reject(sample, ev.q);
        case K::bh: return bh_reject(sample, ev.q);
        case K::adaptive_sl: return adaptive_sl_reject(sample, ev.q, plan.zeta);
        case K::adaptive_bh: return adaptive_bh_reject(sample, ev.q, plan.zeta);
        case K::fixed: return fixed_threshold_reject(sample, ev.procedure->fixed_threshold);
        case K::oracle: return fixed_threshold_reject(sample, plan.oracle_tau);
    }
    throw ConfigError("unknown procedure");
}

/// Runs replicate r and writes one record per evaluation into `out`.
inline void run_replicate(const ScenarioConfig& config, const ScenarioPlan& plan,
                          std::uint64_t replicate, std::span<ReplicateRecord> out) {
    auto rng = Rng::for_replicate(config.seed, replicate);
    const auto draw = sample_two_groups(plan.model, config.m, rng, config.dependence);
    const PValueSample sample(draw.p_values);

    double oracle_loss = 0.0;
    if (plan.regret_defined) {
        std::size_t r = 0, v = 0;
        for (std::size_t i = 0; i < config.m; ++i) {
            if (draw.p_values[i] <= plan.oracle_tau) {
                ++r;
                v += draw.hypotheses[i] == 0 ? 1 : 0;
            }
        }
        oracle_loss = weighted_loss(config.m, r, v, config.lambda);
    }

    for (std::size_t e = 0; e < plan.evaluations.size(); ++e) {
        const auto& ev = plan.evaluations[e];
        const auto result = apply(plan, ev, sample);
        const LabeledOutcome outcome(sample, draw.hypotheses, result, &plan.model);
        auto& rec = out[e];
        rec.replicate = replicate;
        rec.procedure = ev.procedure->name;
        rec.q = ev.q;
        rec.rejections = outcome.rejections();
        rec.false_discoveries = outcome.false_discoveries();
        rec.fdp = fdp(outcome);
        rec.last_null = last_rejection_null(outcome);
        rec.realized_max_lfdr = realized_max_lfdr(outcome);
        rec.loss = weighted_loss(outcome, config.lambda);
        rec.regret = plan.regret_defined ? rec.loss - oracle_loss
                                         : std::numeric_limits<double>::quiet_NaN();
        rec.tau = result.threshold;
        rec.pi0_hat = result.pi0_estimate.value_or(std::numeric_limits<double>::quiet_NaN());
    }
}

inline unsigned resolve_threads(unsigned requested, std::size_t work_units) {
    unsigned n = requested == 0 ? std::max(1u, std::thread::hardware_concurrency()) : requested;
    return static_cast<unsigned>(std::min<std::size_t>(n, std::max<std::size_t>(work_units, 1)));
}

/// Calls job(b) for b = 0..count-1 on up to `threads` workers; rethrows the
/// first exception.
template <class Job>
void parallel_for(std::size_t count, unsigned threads, Job&& job) {
    threads = resolve_threads(threads, count);
    if (threads <= 1) {
        for (std::size_t b = 0; b < count; ++b) job(b);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            try {
                for (std::size_t b = next++; b < count; b = next++) job(b);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
                next = count;
            }
        });
    }
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace detail

/// All replicate records, replicate-major, evaluations in config order
/// (each level-based procedure expanded over q_grid).
inline std::vector<ReplicateRecord> run_scenario(const ScenarioConfig& config) {
    const auto plan = detail::make_plan(config);
    const std::size_t e = plan.evaluations.size();
    std::vector<ReplicateRecord> records(config.replications * e);
    detail::parallel_for(config.replications, config.threads, [&](std::size_t r) {
        detail::run_replicate(config, plan, r,
                              std::span<ReplicateRecord>(records).subspan(r * e, e));
    });
    return records;
}

// ---------------------------------------------------------------------------
// Aggregation

struct SummaryRow {
    std::string scenario;
    std::string procedure;
    double q = 0.0;
    std::string metric;
    double mean = 0.0;
    double se = 0.0;  ///< sd / sqrt(n), sd with divisor n - 1; NaN for n = 1
    double q25 = 0.0;
    double q50 = 0.0;
    double q75 = 0.0;
    std::size_t n_reps = 0;
    std::uint64_t seed = 0;
};

/// Metric rows in output order. Quantiles are kept for the realized max-lfdr
/// and the threshold only; other rows carry NaN quantiles.
inline constexpr std::string_view kSummaryMetrics[] = {
    "fdp", "last_null", "realized_max_lfdr", "loss", "regret", "rejections", "tau", "pi0_hat"};
inline constexpr std::size_t kMetricCount = std::size(kSummaryMetrics);
inline constexpr std::size_t kAggregationBlock = 1024;

inline double metric_value(const ReplicateRecord& r, std::size_t metric) {
    switch (metric) {
        case 0: return r.fdp;
        case 1: return static_cast<double>(r.last_null);
        case 2: return r.realized_max_lfdr;
        case 3: return r.loss;
        case 4: return r.regret;
        case 5: return static_cast<double>(r.rejections);
        case 6: return r.tau;
        default: return r.pi0_hat;
    }
}

inline bool metric_has_quantiles(std::size_t metric) { return metric == 2 || metric == 6; }

/// Running mean and sum of squared deviations; merge() is the pairwise update.
struct MomentAccumulator {
    std::size_t n = 0;
    double mean = 0.0;
    double m2 = 0.0;

    void add(double x) {
        if (std::isnan(x)) return;
        ++n;
        const double d = x - mean;
        mean += d / static_cast<double>(n);
        m2 += d * (x - mean);
    }

    void merge(const MomentAccumulator& o) {
        if (o.n == 0) return;
        if (n == 0) {
            *this = o;
            return;
        }
        const double na = static_cast<double>(n), nb = static_cast<double>(o.n);
        const double total = na + nb;
        const double d = o.mean - mean;
        mean += d * nb / total;
        m2 += o.m2 + d * d * na * nb / total;
        n += o.n;
    }

    double standard_error() const {
        if (n < 2) return std::numeric_limits<double>::quiet_NaN();
        const double var = m2 / static_cast<double>(n - 1);
        return std::sqrt(std::max(var, 0.0) / static_cast<double>(n));
    }
};

/// Sample quantile with linear interpolation between order statistics
/// (Hyndman-Fan type 7). Sorts `values` in place.
inline double quantile_type7(std::vector<double>& values, double prob) {
    if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(values.begin(), values.end());
    const double h = (static_cast<double>(values.size()) - 1.0) * prob;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

namespace detail {

inline SummaryRow make_row(const std::string& scenario, std::uint64_t seed,
                           const std::string& procedure, double q, std::size_t metric,
                           const MomentAccumulator& acc, std::vector<double>* values) {
    SummaryRow row{scenario, procedure, q, std::string(kSummaryMetrics[metric]),
                   acc.mean, acc.standard_error(), 0.0, 0.0, 0.0, acc.n, seed};
    const double nan = std::numeric_limits<double>::quiet_NaN();
    if (values != nullptr) {
        std::erase_if(*values, [](double x) { return std::isnan(x); });
        row.q25 = quantile_type7(*values, 0.25);
        row.q50 = quantile_type7(*values, 0.50);
        row.q75 = quantile_type7(*values, 0.75);
    } else {
        row.q25 = row.q50 = row.q75 = nan;
    }
    return row;
}

}  // namespace detail

/// Per (procedure, q), in order of first appearance: mean, MC standard error
/// and (where kept) quartiles of each metric. Metrics with no finite value
/// (regret without a threshold oracle, pi0_hat for non-adaptive rules) are
/// omitted.
inline std::vector<SummaryRow> aggregate(const std::vector<ReplicateRecord>& records,
                                         const std::string& scenario = "scenario",
                                         std::uint64_t seed = 0) {
    if (records.empty()) throw DomainError("aggregate needs at least one record");
    std::vector<std::pair<std::string, double>> keys;
    std::vector<std::vector<const ReplicateRecord*>> groups;
    for (const auto& r : records) {
        std::size_t g = 0;
        while (g < keys.size() && !(keys[g].first == r.procedure && keys[g].second == r.q)) ++g;
        if (g == keys.size()) {
            keys.emplace_back(r.procedure, r.q);
            groups.emplace_back();
        }
        groups[g].push_back(&r);
    }

    std::vector<SummaryRow> rows;
    for (std::size_t g = 0; g < groups.size(); ++g) {
        auto& grp = groups[g];
        std::stable_sort(grp.begin(), grp.end(), [](const auto* a, const auto* b) {
            return a->replicate < b->replicate;
        });
        for (std::size_t metric = 0; metric < kMetricCount; ++metric) {
            MomentAccumulator total, block;
            std::uint64_t current = grp.front()->replicate / kAggregationBlock;
            std::vector<double> values;
            for (const auto* r : grp) {
                const std::uint64_t b = r->replicate / kAggregationBlock;
                if (b != current) {
                    total.merge(block);
                    block = {};
                    current = b;
                }
                const double x = metric_value(*r, metric);
                block.add(x);
                if (metric_has_quantiles(metric)) values.push_back(x);
            }
            total.merge(block);
            if (total.n == 0) continue;
            rows.push_back(detail::make_row(scenario, seed, keys[g].first, keys[g].second, metric,
                                            total,
                                            metric_has_quantiles(metric) ? &values : nullptr));
        }
    }
    return rows;
}

/// Runs a scenario and summarizes it without keeping every record; equal to
/// aggregate(run_scenario(config), config.name, config.seed).
inline std::vector<SummaryRow> simulate(const ScenarioConfig& config) {
    const auto plan = detail::make_plan(config);
    const std::size_t e_count = plan.evaluations.size();
    const std::size_t reps = config.replications;
    const std::size_t blocks = (reps + kAggregationBlock - 1) / kAggregationBlock;

    std::vector<MomentAccumulator> block_acc(blocks * e_count * kMetricCount);
    // quantile_values[(e * 2 + slot) * reps + r]
    std::vector<double> quantile_values(e_count * 2 * reps);
    const auto slot_of = [](std::size_t metric) { return metric == 2 ? 0 : 1; };

    detail::parallel_for(blocks, config.threads, [&](std::size_t b) {
        std::vector<ReplicateRecord> local(e_count);
        const std::size_t begin = b * kAggregationBlock;
        const std::size_t end = std::min(reps, begin + kAggregationBlock);
        for (std::size_t r = begin; r < end; ++r) {
            detail::run_replicate(config, plan, r, local);
            for (std::size_t e = 0; e < e_count; ++e) {
                for (std::size_t metric = 0; metric < kMetricCount; ++metric) {
                    const double x = metric_value(local[e], metric);
                    block_acc[(b * e_count + e) * kMetricCount + metric].add(x);
                    if (metric_has_quantiles(metric)) {
                        quantile_values[(e * 2 + slot_of(metric)) * reps + r] = x;
                    }
                }
            }
        }
    });

    std::vector<SummaryRow> rows;
    for (std::size_t e = 0; e < e_count; ++e) {
        const auto& ev = plan.evaluations[e];
        for (std::size_t metric = 0; metric < kMetricCount; ++metric) {
            MomentAccumulator total;
            for (std::size_t b = 0; b < blocks; ++b) {
                total.merge(block_acc[(b * e_count + e) * kMetricCount + metric]);
            }
            if (total.n == 0) continue;
            std::vector<double> values;
            if (metric_has_quantiles(metric)) {
                const auto first = quantile_values.begin() +
                                   static_cast<std::ptrdiff_t>((e * 2 + slot_of(metric)) * reps);
                values.assign(first, first + static_cast<std::ptrdiff_t>(reps));
            }
            rows.push_back(detail::make_row(config.name, config.seed, ev.procedure->name, ev.q,
                                            metric, total,
                                            metric_has_quantiles(metric) ? &values : nullptr));
        }
    }
    return rows;
}

/// Looks up one summary value; throws if absent.
inline const SummaryRow& find_row(const std::vector<SummaryRow>& rows, std::string_view procedure,
                                  double q, std::string_view metric) {
    for (const auto& row : rows) {
        if (row.procedure == procedure && row.metric == metric && std::fabs(row.q - q) < 1e-12) {
            return row;
        }
    }
    throw DomainError("no summary row for " + std::string(procedure) + " at q=" +
                      io::format_number(q) + ", metric " + std::string(metric));
}

// ---------------------------------------------------------------------------
// Config files and presets
//
//   # comment
//   name = fig6-eq
//   model = bh64                     bh64 | bh64-cauchy | global-null | lehmann(pi0,theta)
//   m = 64                           comma list sweeps
//   dependence = equicorrelated      independent | equicorrelated | autoregressive
//   rho = 0, 0.2, 0.5                comma list sweeps
//   reps = 100000
//   seed = 20240601
//   q_grid = 0.05, 0.1, 0.2
//   procedures = sl, bh, adaptive-sl, adaptive-bh, fixed:0.01, oracle
//   zeta = 0.5                       or "schedule" for 1 - m^{-1/5}
//   lambda = 4
//   threads = 1

namespace detail {

inline std::vector<std::string_view> split_list(std::string_view text) {
    std::vector<std::string_view> out;
    while (true) {
        const auto comma = text.find(',');
        out.push_back(io::trim(text.substr(0, comma)));
        if (comma == std::string_view::npos) break;
        text.remove_prefix(comma + 1);
    }
    return out;
}

template <class Int>
Int parse_integer(std::string_view key, std::string_view text) {
    Int value{};
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty()) {
        throw ConfigError("invalid integer for '" + std::string(key) + "': '" +
                          std::string(text) + "'");
    }
    return value;
}

inline double parse_config_number(std::string_view key, std::string_view text) {
    try {
        return parse_number(text);
    } catch (const ConfigError&) {
        throw ConfigError("invalid number for '" + std::string(key) + "': '" + std::string(text) +
                          "'");
    }
}

inline std::string join_numbers(const std::vector<double>& xs) {
    std::string s;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i) s += ",";
        s += io::format_number(xs[i]);
    }
    return s;
}

}  // namespace detail

inline constexpr std::string_view kConfigKeys[] = {
    "name", "model", "m", "dependence", "rho", "reps", "seed",
    "q_grid", "procedures", "zeta", "lambda", "threads"};

/// Parses a scenario file into one config per (m, rho) sweep point, m-major.
/// Sweep points share the seed and get names "<name>:m=<m>" / ":rho=<rho>"
/// when the corresponding list has more than one entry.
inline std::vector<ScenarioConfig> parse_scenario(std::string_view text,
                                                  std::string_view default_name = "scenario") {
    ScenarioConfig base;
    base.name = std::string(default_name);
    std::vector<std::size_t> ms{base.m};
    std::vector<double> rhos{0.0};
    std::vector<std::string> rho_tokens{"0"};
    std::vector<std::string> m_tokens{"64"};
    bool have_rho = false;
    std::map<std::string, std::size_t> seen;

    std::size_t line_no = 0;
    std::istringstream in{std::string(text)};
    std::string raw;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string_view line = raw;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) {
            line = line.substr(0, hash);
        }
        line = io::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
        }
        const std::string key(io::trim(line.substr(0, eq)));
        const auto value = io::trim(line.substr(eq + 1));
        if (std::find(std::begin(kConfigKeys), std::end(kConfigKeys), key) == std::end(kConfigKeys)) {
            std::string allowed;
            for (const auto k : kConfigKeys) allowed += (allowed.empty() ? "" : ", ") + std::string(k);
            throw ConfigError("line " + std::to_string(line_no) + ": unknown key '" + key +
                              "' (allowed: " + allowed + ")");
        }
        if (seen.count(key)) {
            throw ConfigError("line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
        }
        seen[key] = line_no;
        if (value.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty value");

        if (key == "name") {
            base.name = std::string(value);
        } else if (key == "model") {
            base.model = std::string(value);
            parse_model(value);
        } else if (key == "m") {
            ms.clear();
            m_tokens.clear();
            for (const auto tok : detail::split_list(value)) {
                ms.push_back(detail::parse_integer<std::size_t>("m", tok));
                m_tokens.emplace_back(tok);
            }
        } else if (key == "dependence") {
            if (value == "independent") {
                base.dependence.kind = Dependence::Kind::independent;
            } else if (value == "equicorrelated") {
                base.dependence.kind = Dependence::Kind::equicorrelated;
            } else if (value == "autoregressive") {
                base.dependence.kind = Dependence::Kind::autoregressive;
            } else {
                throw ConfigError("unknown dependence '" + std::string(value) +
                                  "' (expected independent, equicorrelated, autoregressive)");
            }
        } else if (key == "rho") {
            have_rho = true;
            rhos.clear();
            rho_tokens.clear();
            for (const auto tok : detail::split_list(value)) {
                rhos.push_back(detail::parse_config_number("rho", tok));
                rho_tokens.emplace_back(tok);
            }
        } else if (key == "reps") {
            base.replications = detail::parse_integer<std::size_t>("reps", value);
        } else if (key == "seed") {
            base.seed = detail::parse_integer<std::uint64_t>("seed", value);
        } else if (key == "q_grid") {
            base.q_grid.clear();
            for (const auto tok : detail::split_list(value)) {
                base.q_grid.push_back(detail::parse_config_number("q_grid", tok));
            }
        } else if (key == "procedures") {
            base.procedures.clear();
            for (const auto tok : detail::split_list(value)) {
                base.procedures.push_back(parse_procedure(tok));
            }
        } else if (key == "zeta") {
            if (value == "schedule") {
                base.zeta.reset();
            } else {
                base.zeta = detail::parse_config_number("zeta", value);
            }
        } else if (key == "lambda") {
            base.lambda = detail::parse_config_number("lambda", value);
        } else if (key == "threads") {
            base.threads = detail::parse_integer<unsigned>("threads", value);
        }
    }

    if (base.dependence.kind != Dependence::Kind::independent && !have_rho) {
        throw ConfigError("dependence '" + base.dependence.label() + "' needs rho");
    }
    if (base.dependence.kind == Dependence::Kind::independent && have_rho) {
        throw ConfigError("rho given but dependence is independent");
    }

    std::vector<ScenarioConfig> out;
    for (std::size_t i = 0; i < ms.size(); ++i) {
        for (std::size_t j = 0; j < rhos.size(); ++j) {
            ScenarioConfig c = base;
            c.m = ms[i];
            c.dependence.rho = rhos[j];
            if (ms.size() > 1) c.name += ":m=" + m_tokens[i];
            if (rhos.size() > 1) c.name += ":rho=" + rho_tokens[j];
            c.validate();
            out.push_back(std::move(c));
        }
    }
    return out;
}

inline constexpr std::string_view kPresetNames[] = {
    "fig3", "fig3-ci", "fig4", "fig4-ci", "fig5", "fig5-ci", "fig6-eq",
    "fig6-eq-ci", "fig6-ar", "fig6-ar-ci", "fig7", "fig7-ci"};

/// Config text of a named preset; "-ci" variants use fewer replicates.
inline std::string preset_text(std::string_view name) {
    const bool ci = name.ends_with("-ci");
    const std::string_view base = ci ? name.substr(0, name.size() - 3) : name;
    const std::string reps = ci ? "10000" : "100000";
    std::string t = "name = " + std::string(name) + "\nseed = 20240601\n";
    if (base == "fig3") {
        t += "model = bh64\nm = 64\nreps = " + reps +
             "\nq_grid = 0.05,0.1,0.2,0.3,0.4,0.5\nprocedures = sl,bh,adaptive-sl,adaptive-bh\n"
             "zeta = 0.5\n";
    } else if (base == "fig4") {
        t += std::string("model = bh64\nreps = ") + (ci ? "1000" : "10000") +
             (ci ? "\nm = 64,256,1024,4096" : "\nm = 64,128,256,512,1024,2048,4096,8192,16384") +
             "\nq_grid = 0.2,0.26666666666666666\nprocedures = sl,adaptive-sl,oracle\n"
             "zeta = schedule\nlambda = 4\n";
    } else if (base == "fig5") {
        t += "model = bh64\nm = 64,1024\nreps = " + reps +
             "\nq_grid = 0.05,0.1,0.15,0.2,0.25,0.3,0.35,0.4,0.45,0.5\nprocedures = sl,bh\n";
    } else if (base == "fig6-eq" || base == "fig6-ar") {
        t += std::string("model = bh64\nm = 64\ndependence = ") +
             (base == "fig6-eq" ? "equicorrelated" : "autoregressive") +
             "\nrho = 0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9\nreps = " + reps +
             "\nq_grid = 0.2\nprocedures = sl,bh,adaptive-sl,adaptive-bh\nzeta = 0.5\n";
    } else if (base == "fig7") {
        t += "model = bh64-cauchy\nm = 64\nreps = " + reps +
             "\nq_grid = 0.05,0.1,0.2,0.3,0.4,0.5\nprocedures = sl,bh,adaptive-sl,adaptive-bh\n"
             "zeta = 0.5\n";
    } else {
        std::string known;
        for (const auto p : kPresetNames) known += (known.empty() ? "" : ", ") + std::string(p);
        throw ConfigError("unknown preset '" + std::string(name) + "' (known: " + known + ")");
    }
    return t;
}

inline std::vector<ScenarioConfig> preset_scenarios(std::string_view name) {
    return parse_scenario(preset_text(name), name);
}

/// One-line description of a config, used as CSV provenance.
inline std::string describe(const ScenarioConfig& c) {
    std::string procs;
    for (const auto& p : c.procedures) procs += (procs.empty() ? "" : ",") + p.name;
    std::string s = "name=" + c.name + "; model=" + c.model + "; m=" + std::to_string(c.m) +
                    "; dependence=" + c.dependence.label();
    if (c.dependence.kind != Dependence::Kind::independent) {
        s += "; rho=" + io::format_number(c.dependence.rho);
    }
    s += "; reps=" + std::to_string(c.replications) + "; seed=" + std::to_string(c.seed) +
         "; q_grid=" + detail::join_numbers(c.q_grid) + "; procedures=" + procs +
         "; zeta=" + (c.zeta ? io::format_number(*c.zeta) : std::string("schedule")) +
         "; lambda=" + io::format_number(c.lambda) + "; rng=" + Rng::description;
    return s;
}

inline constexpr std::string_view kCsvColumns =
    "scenario,procedure,q,metric,mean,se,q25,q50,q75,n_reps,seed";

inline void write_summary_row(std::ostream& out, const SummaryRow& r) {
    out << r.scenario << ',' << r.procedure << ',' << io::format_number(r.q) << ',' << r.metric
        << ',' << io::format_number(r.mean) << ',' << io::format_number(r.se) << ','
        << io::format_number(r.q25) << ',' << io::format_number(r.q50) << ','
        << io::format_number(r.q75) << ',' << r.n_reps << ',' << r.seed << '\n';
}

/// "# config: ..." lines for each scenario, the column header, then rows.
inline void write_summary_csv(std::ostream& out, const std::vector<ScenarioConfig>& configs,
                              const std::vector<SummaryRow>& rows) {
    for (const auto& c : configs) out << "# config: " << describe(c) << '\n';
    out << kCsvColumns << '\n';
    for (const auto& r : rows) write_summary_row(out, r);
}

}  // namespace maxlfdr
