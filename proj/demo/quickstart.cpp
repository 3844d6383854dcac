// Applies SL and BH to a simulated sample and prints the large-m lfdr band.

#include <cstdio>

#include "maxlfdr/maxlfdr.hpp"

int main() {
    using namespace maxlfdr;

    const auto model = bh64_model();
    Rng rng(7);
    const auto draw = sample_two_groups(model, 64, rng);
    const PValueSample sample(draw.p_values);

    for (const double q : {0.1, 0.2}) {
        const auto sl = sl_reject(sample, q);
        const auto bh = bh_reject(sample, q);
        const LabeledOutcome sl_out(sample, draw.hypotheses, sl, &model);
        const LabeledOutcome bh_out(sample, draw.hypotheses, bh, &model);
        std::printf("q=%.2f  SL: R=%zu tau=%.4g max-lfdr=%.3f   BH: R=%zu tau=%.4g max-lfdr=%.3f\n",
                    q, sl.rejection_count, sl.threshold, realized_max_lfdr(sl_out),
                    bh.rejection_count, bh.threshold, realized_max_lfdr(bh_out));
    }

    const double tau = sl_threshold_via_grenander(sample, 0.2);
    std::printf("SL threshold read off the Grenander fit at q=0.2: %.4g\n", tau);

    for (const double m : {64.0, 1024.0, 16384.0}) {
        const auto band = lfdr_limit(model, 0.2, m);
        std::printf("m=%6.0f  lfdr(tau) ~ %.3f, IQR %.3f\n", m, band.center, band.iqr());
    }
}
