#pragma once

// Command implementations behind the maxlfdr executable. Kept out of main()
// so tests can drive the CLI in-process.

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "maxlfdr/maxlfdr.hpp"

namespace maxlfdr::cli {

struct RejectOptions {
    std::string method = "sl";  ///< sl | bh | adaptive-sl | adaptive-bh
    double q = 0.1;
    std::optional<double> zeta;  ///< adaptive only; nullopt = 0.5, or schedule when requested
    bool zeta_schedule = false;
};

/// JSON report {method, q, zeta?, pi0_hat?, R, tau, rejected_indices, m};
/// indices are 1-based input positions in ascending order.
std::string reject_report(const std::vector<double>& p_values, const RejectOptions& options);

/// How lfdr_hat's numerator is chosen: a fixed value (1 is conservative) or a
/// Storey estimate at zeta.
struct Pi0Choice {
    double value = 1.0;
    std::optional<double> storey_zeta;
};

/// "1", "0.8", "storey:0.5".
Pi0Choice parse_pi0_choice(const std::string& text);

/// CSV rows index,p,f_hat,lfdr_hat in input order. A p-value of exactly 0
/// reports the slope of the first majorant segment.
std::string lfdr_table(const std::vector<double>& p_values, const Pi0Choice& pi0);

struct PredictOptions {
    std::optional<std::string> model;
    std::optional<double> f_prime;  ///< direct mode: f'(t_q) given, no model
    double pi0 = 1.0;               ///< direct mode only
    double q = 0.2;
    std::optional<double> alpha;  ///< regret level; default 1 / (1 + lambda)
    double lambda = 4.0;
    std::vector<double> m;
    std::string format = "json";
};

std::string predict_report(const PredictOptions& options);

/// Full command line. Returns the process exit status: 0 on success, 1 for
/// input / computation errors, 2 for usage errors. Errors are one line on err.
int run(int argc, const char* const* argv, std::istream& in, std::ostream& out, std::ostream& err);

}  // namespace maxlfdr::cli
