#pragma once

// Per-replicate error and loss metrics for a rejection set with known
// hypothesis labels.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>

#include "maxlfdr/errors.hpp"
#include "maxlfdr/models.hpp"
#include "maxlfdr/procedures.hpp"
#include "maxlfdr/sample.hpp"

namespace maxlfdr {

/// A rejection result together with the truth. hypotheses[i] is 1 for a
/// non-null and 0 for a null; its length must equal the sample size.
struct LabeledOutcome {
    const PValueSample& sample;
    std::span<const std::uint8_t> hypotheses;
    const RejectionResult& rejection;
    const TwoGroupsSpec* model = nullptr;

    LabeledOutcome(const PValueSample& s, std::span<const std::uint8_t> h,
                   const RejectionResult& r, const TwoGroupsSpec* mdl = nullptr)
        : sample(s), hypotheses(h), rejection(r), model(mdl) {
        if (hypotheses.size() != sample.size()) {
            throw DomainError("hypothesis labels and p-values differ in length");
        }
    }

    std::size_t rejections() const noexcept { return rejection.rejected_indices.size(); }

    /// False discoveries V.
    std::size_t false_discoveries() const noexcept {
        std::size_t v = 0;
        for (const auto i : rejection.rejected_indices) v += hypotheses[i] == 0 ? 1 : 0;
        return v;
    }
};

/// ((1 + lambda) V - R) / m. Rejecting nothing scores 0.
inline double weighted_loss(std::size_t m, std::size_t rejections, std::size_t false_discoveries,
                            double lambda) {
    return ((1.0 + lambda) * static_cast<double>(false_discoveries) -
            static_cast<double>(rejections)) /
           static_cast<double>(m);
}

inline double weighted_loss(const LabeledOutcome& outcome, double lambda) {
    if (!(lambda > 0.0)) throw DomainError("lambda must be positive");
    return weighted_loss(outcome.sample.size(), outcome.rejections(), outcome.false_discoveries(),
                         lambda);
}

/// V / R, or 0 when nothing is rejected.
inline double fdp(const LabeledOutcome& outcome) {
    const std::size_t r = outcome.rejections();
    return r == 0 ? 0.0 : static_cast<double>(outcome.false_discoveries()) / static_cast<double>(r);
}

/// Index of the last rejection: the rejected hypothesis with the largest
/// p-value, ties going to the highest input index. Requires R > 0.
inline std::uint32_t last_rejection_index(const LabeledOutcome& outcome) {
    const auto& rej = outcome.rejection.rejected_indices;
    const auto p = outcome.sample.values();
    return *std::max_element(rej.begin(), rej.end(), [&](std::uint32_t a, std::uint32_t b) {
        return p[a] < p[b] || (p[a] == p[b] && a < b);
    });
}

/// 1 if R > 0 and the last rejection is a null.
inline int last_rejection_null(const LabeledOutcome& outcome) {
    if (outcome.rejections() == 0) return 0;
    return outcome.hypotheses[last_rejection_index(outcome)] == 0 ? 1 : 0;
}

/// max over rejections of the true lfdr, 0 when nothing is rejected. For a
/// monotone model this is the lfdr at the largest rejected p-value.
inline double realized_max_lfdr(const LabeledOutcome& outcome) {
    if (outcome.model == nullptr) throw DomainError("realized max-lfdr needs a model");
    if (outcome.rejections() == 0) return 0.0;
    const auto& model = *outcome.model;
    const auto p = outcome.sample.values();
    if (model.monotone()) return true_lfdr(model, p[last_rejection_index(outcome)]);
    double best = 0.0;
    for (const auto i : outcome.rejection.rejected_indices) {
        best = std::max(best, true_lfdr(model, p[i]));
    }
    return best;
}

/// Loss minus the loss of the oracle fixed-threshold rule at oracle_tau on the
/// same data.
inline double regret_vs_oracle(const LabeledOutcome& outcome, double lambda, double oracle_tau) {
    const auto oracle = fixed_threshold_reject(outcome.sample, oracle_tau);
    const LabeledOutcome oracle_outcome(outcome.sample, outcome.hypotheses, oracle, outcome.model);
    return weighted_loss(outcome, lambda) - weighted_loss(oracle_outcome, lambda);
}

/// As above with tau* = oracle_threshold(model, 1 / (1 + lambda)). Requires a
/// monotone model, where the oracle is a threshold rule.
inline double regret_vs_oracle(const LabeledOutcome& outcome, double lambda) {
    if (outcome.model == nullptr) throw DomainError("regret needs a model");
    if (!outcome.model->monotone()) {
        throw AssumptionError("oracle is not a threshold rule for a non-monotone f1");
    }
    if (!(lambda > 0.0)) throw DomainError("lambda must be positive");
    return regret_vs_oracle(outcome, lambda, oracle_threshold(*outcome.model, 1.0 / (1.0 + lambda)));
}

}  // namespace maxlfdr
