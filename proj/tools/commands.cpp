#include "commands.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"

namespace maxlfdr::cli {
namespace {

using io::format_number;

std::string json_number(double x) { return std::isfinite(x) ? format_number(x) : "null"; }

std::string json_string(const std::string& s) {
    std::string out = "\"";
    for (const char c : s) {
        if (c == '"' || c == '\\') out += '\\';
        out += c;
    }
    return out + "\"";
}

/// Ordered key/value pairs rendered as one JSON object.
class JsonObject {
public:
    JsonObject& raw(const std::string& key, const std::string& value) {
        fields_.emplace_back(key, value);
        return *this;
    }
    JsonObject& number(const std::string& key, double x) { return raw(key, json_number(x)); }
    JsonObject& integer(const std::string& key, std::size_t x) {
        return raw(key, std::to_string(x));
    }
    JsonObject& string(const std::string& key, const std::string& s) {
        return raw(key, json_string(s));
    }

    std::string str() const {
        std::string s = "{";
        for (std::size_t i = 0; i < fields_.size(); ++i) {
            if (i) s += ",";
            s += json_string(fields_[i].first) + ":" + fields_[i].second;
        }
        return s + "}";
    }

private:
    std::vector<std::pair<std::string, std::string>> fields_;
};

double parse_double(const std::string& what, const std::string& text) {
    try {
        return detail::parse_number(text);
    } catch (const ConfigError&) {
        throw ConfigError("invalid " + what + " '" + text + "'");
    }
}

std::vector<double> read_input(const std::string& path, std::istream& in) {
    if (path == "-") return io::parse_p_values(in);
    return io::read_p_values(path);
}

/// Evaluates f and returns NaN when a model assumption fails, so one missing
/// quantity does not suppress the rest of a prediction row.
double or_nan(const std::function<double()>& f) {
    try {
        return f();
    } catch (const AssumptionError&) {
        return std::numeric_limits<double>::quiet_NaN();
    }
}

}  // namespace

std::string reject_report(const std::vector<double>& p_values, const RejectOptions& options) {
    detail::check_level(options.q);
    const PValueSample sample(p_values);
    const bool adaptive = options.method == "adaptive-sl" || options.method == "adaptive-bh";
    double zeta = 0.5;
    if (adaptive) {
        zeta = options.zeta_schedule ? zeta_schedule(sample.size()) : options.zeta.value_or(0.5);
    }

    const RejectionResult result = [&] {
        if (options.method == "sl") return sl_reject(sample, options.q);
        if (options.method == "bh") return bh_reject(sample, options.q);
        if (options.method == "adaptive-sl") return adaptive_sl_reject(sample, options.q, zeta);
        if (options.method == "adaptive-bh") return adaptive_bh_reject(sample, options.q, zeta);
        throw ConfigError("unknown method '" + options.method + "'");
    }();

    auto indices = result.rejected_indices;
    std::sort(indices.begin(), indices.end());
    std::string list = "[";
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (i) list += ",";
        list += std::to_string(indices[i] + 1);
    }
    list += "]";

    JsonObject obj;
    obj.string("method", options.method).number("q", options.q);
    if (adaptive) obj.number("zeta", zeta).number("pi0_hat", *result.pi0_estimate);
    obj.integer("R", result.rejection_count)
        .number("tau", result.threshold)
        .raw("rejected_indices", list)
        .integer("m", sample.size());
    return obj.str() + "\n";
}

Pi0Choice parse_pi0_choice(const std::string& text) {
    Pi0Choice choice;
    if (text.rfind("storey:", 0) == 0) {
        choice.storey_zeta = parse_double("storey zeta", text.substr(7));
        detail::check_zeta(*choice.storey_zeta);
        return choice;
    }
    choice.value = parse_double("pi0", text);
    if (!(choice.value > 0.0 && std::isfinite(choice.value))) {
        throw DomainError("pi0 must be positive and finite");
    }
    return choice;
}

std::string lfdr_table(const std::vector<double>& p_values, const Pi0Choice& pi0) {
    const PValueSample sample(p_values);
    const auto fit = lcm_fit(sample);
    const double pi0_value = pi0.storey_zeta ? storey_pi0(sample, *pi0.storey_zeta) : pi0.value;
    std::ostringstream out;
    out << "index,p,f_hat,lfdr_hat\n";
    const auto values = sample.values();
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double p = values[i];
        const double f = p > 0.0 ? grenander_density(fit, p) : fit.slopes.front();
        const double l = f > 0.0 ? pi0_value / f : kNoDensity;
        out << (i + 1) << ',' << format_number(p) << ',' << format_number(f) << ','
            << format_number(l) << '\n';
    }
    return out.str();
}

std::string predict_report(const PredictOptions& o) {
    if (o.model.has_value() == o.f_prime.has_value()) {
        throw ConfigError("predict needs exactly one of --model or --fprime");
    }
    detail::check_level(o.q);
    if (!(o.lambda > 0.0)) throw DomainError("lambda must be positive");
    if (o.m.empty()) throw ConfigError("predict needs at least one --m");
    std::optional<TwoGroupsSpec> spec;
    if (o.model) spec = parse_model(*o.model);
    const double pi0 = spec ? spec->pi0() : o.pi0;
    if (!(pi0 > 0.0 && pi0 <= 1.0)) throw DomainError("pi0 must lie in (0,1]");

    // With a model the regret level is free; with a bare slope at t_q the
    // regret constant only makes sense at alpha = pi0 q, where tau* = t_q.
    const double alpha = o.alpha.value_or(spec ? 1.0 / (1.0 + o.lambda) : pi0 * o.q);
    if (!(alpha > 0.0 && alpha <= 1.0)) throw DomainError("alpha must lie in (0,1]");
    if (!spec && std::fabs(alpha - pi0 * o.q) > 1e-12) {
        throw ConfigError("with --fprime the regret level must be alpha = pi0 q");
    }

    // Quantities free of m.
    const double nan = std::numeric_limits<double>::quiet_NaN();
    double t_q = nan, f_prime = nan, regret_const = nan, null_limit = nan, null_bound = nan;
    if (spec) {
        if (spec->monotone()) {
            t_q = or_nan([&] { return population_threshold_tq(*spec, o.q); });
            if (t_q > 0.0 && t_q < 1.0) f_prime = mixture_f_prime(*spec, t_q);
            if (alpha < 1.0) regret_const = or_nan([&] { return regret_limit(*spec, alpha); });
        }
    } else {
        f_prime = *o.f_prime;
        if (alpha < 1.0) regret_const = or_nan([&] { return regret_limit(pi0, alpha, f_prime); });
    }
    if (pi0 == 1.0) {
        const auto g = global_null_limit(o.q, o.lambda);
        null_limit = g.value;
        null_bound = g.remainder_bound;
    }
    const double z95_published = ChernoffApprox::published_p95;
    const double z95_normal = chernoff_quantile(0.95);

    std::vector<std::vector<std::pair<std::string, double>>> rows;
    for (const double m : o.m) {
        detail::check_m(m);
        double t_scale = nan, center = nan, rel = nan, p95_pub = nan, p95_norm = nan, iqr = nan;
        if (f_prime < 0.0) {
            t_scale = threshold_scale(o.q, f_prime, m);
            const auto l = lfdr_limit(pi0, o.q, f_prime, m);
            center = l.center;
            rel = l.relative_scale;
            p95_pub = l.quantile_at(z95_published);
            p95_norm = l.quantile_at(z95_normal);
            iqr = l.iqr();
        }
        rows.push_back({{"m", m},
                        {"q", o.q},
                        {"t_q", t_q},
                        {"f_prime", f_prime},
                        {"threshold_scale", t_scale},
                        {"lfdr_center", center},
                        {"lfdr_relative_scale", rel},
                        {"lfdr_p95_published", p95_pub},
                        {"lfdr_p95_normal", p95_norm},
                        {"lfdr_iqr", iqr},
                        {"alpha", alpha},
                        {"regret_constant", regret_const},
                        {"regret_prediction",
                         std::isfinite(regret_const) ? regret_prediction(regret_const, m) : nan},
                        {"global_null_m_regret", null_limit},
                        {"global_null_remainder_bound", null_bound},
                        {"global_null_regret", null_limit / m}});
    }

    std::ostringstream out;
    if (o.format == "csv") {
        for (std::size_t j = 0; j < rows.front().size(); ++j) {
            out << (j ? "," : "") << rows.front()[j].first;
        }
        out << '\n';
        for (const auto& row : rows) {
            for (std::size_t j = 0; j < row.size(); ++j) {
                out << (j ? "," : "") << format_number(row[j].second);
            }
            out << '\n';
        }
    } else if (o.format == "json") {
        std::string list = "[";
        for (std::size_t i = 0; i < rows.size(); ++i) {
            JsonObject r;
            for (const auto& [k, v] : rows[i]) r.number(k, v);
            list += (i ? "," : "") + r.str();
        }
        list += "]";
        JsonObject top;
        if (o.model) {
            top.string("model", *o.model);
        } else {
            top.number("pi0", pi0);
        }
        top.raw("rows", list);
        out << top.str() << '\n';
    } else {
        throw ConfigError("unknown format '" + o.format + "' (expected json or csv)");
    }
    return out.str();
}

int run(int argc, const char* const* argv, std::istream& in, std::ostream& out, std::ostream& err) {
    CLI::App app{"maxlfdr: max-lfdr control with the support-line procedure"};
    app.require_subcommand(1);

    // reject
    auto* reject = app.add_subcommand("reject", "apply a procedure to a p-value file");
    std::string reject_input;
    RejectOptions ropt;
    std::string reject_zeta;
    reject->add_option("input", reject_input, "p-value file ('-' for stdin)")->required();
    reject->add_option("--method", ropt.method, "sl, bh, adaptive-sl or adaptive-bh")
        ->check(CLI::IsMember({"sl", "bh", "adaptive-sl", "adaptive-bh"}));
    reject->add_option("--q", ropt.q, "nominal level in (0,1]")->required();
    reject->add_option("--zeta", reject_zeta, "Storey cut in (0,1) or 'schedule' (adaptive only)");

    // lfdr
    auto* lfdr = app.add_subcommand("lfdr", "Grenander-based lfdr estimates per p-value");
    std::string lfdr_input;
    std::string pi0_text = "1";
    lfdr->add_option("input", lfdr_input, "p-value file ('-' for stdin)")->required();
    lfdr->add_option("--pi0", pi0_text, "1, a value, or storey:<zeta>");

    // simulate
    auto* sim = app.add_subcommand("simulate", "run a simulation scenario and write a summary CSV");
    std::string scenario_file, preset, out_path;
    std::optional<std::size_t> reps_override;
    std::optional<std::uint64_t> seed_override;
    std::optional<unsigned> threads_override;
    auto* scen_opt = sim->add_option("--scenario", scenario_file, "scenario config file");
    auto* preset_opt = sim->add_option("--preset", preset, "named preset (fig3, fig4, ...)");
    scen_opt->excludes(preset_opt);
    sim->add_option("--out", out_path,
                    "output CSV; default $MAXLFDR_OUTPUT_DIR/<name>.csv, else stdout");
    sim->add_option("--reps", reps_override, "override the replicate count");
    sim->add_option("--seed", seed_override, "override the seed");
    sim->add_option("--threads", threads_override, "worker threads (0 = all cores)");

    // predict
    auto* pred = app.add_subcommand("predict", "large-m predictions for the SL procedure");
    PredictOptions popt;
    std::optional<std::string> model;
    std::optional<double> fprime;
    std::optional<double> alpha;
    pred->add_option("--model", model, "bh64, bh64-cauchy, global-null or lehmann(pi0,theta)");
    pred->add_option("--fprime", fprime, "f'(t_q) given directly (no model)");
    pred->add_option("--pi0", popt.pi0, "null proportion for --fprime mode (default 1)");
    pred->add_option("--q", popt.q, "nominal level in (0,1]")->required();
    pred->add_option("--alpha", alpha, "regret level (default 1/(1+lambda))");
    pred->add_option("--lambda", popt.lambda, "loss weight (default 4)");
    pred->add_option("--m", popt.m, "one or more sample sizes")->required()->expected(1, -1);
    pred->add_option("--format", popt.format, "json or csv")
        ->check(CLI::IsMember({"json", "csv"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    }

    try {
        if (reject->parsed()) {
            if (reject_zeta == "schedule") {
                ropt.zeta_schedule = true;
            } else if (!reject_zeta.empty()) {
                ropt.zeta = parse_double("zeta", reject_zeta);
                detail::check_zeta(*ropt.zeta);
            }
            detail::check_level(ropt.q);
            out << reject_report(read_input(reject_input, in), ropt);
        } else if (lfdr->parsed()) {
            const auto choice = parse_pi0_choice(pi0_text);
            out << lfdr_table(read_input(lfdr_input, in), choice);
        } else if (sim->parsed()) {
            if (scenario_file.empty() == preset.empty()) {
                throw ConfigError("simulate needs exactly one of --scenario or --preset");
            }
            std::vector<ScenarioConfig> configs;
            std::string name;
            if (!preset.empty()) {
                configs = preset_scenarios(preset);
                name = preset;
            } else {
                std::ifstream f(scenario_file);
                if (!f) throw ParseError("cannot read file '" + scenario_file + "'");
                std::stringstream buf;
                buf << f.rdbuf();
                name = std::filesystem::path(scenario_file).stem().string();
                configs = parse_scenario(buf.str(), name);
            }
            for (auto& c : configs) {
                if (reps_override) c.replications = *reps_override;
                if (seed_override) c.seed = *seed_override;
                if (threads_override) c.threads = *threads_override;
                c.validate();
            }
            std::vector<SummaryRow> rows;
            for (const auto& c : configs) {
                auto part = simulate(c);
                rows.insert(rows.end(), part.begin(), part.end());
            }
            if (out_path.empty()) {
                if (const char* dir = std::getenv("MAXLFDR_OUTPUT_DIR"); dir && *dir) {
                    out_path = (std::filesystem::path(dir) / (name + ".csv")).string();
                }
            }
            if (out_path.empty()) {
                write_summary_csv(out, configs, rows);
            } else {
                std::ofstream f(out_path, std::ios::binary);
                if (!f) throw ParseError("cannot write file '" + out_path + "'");
                write_summary_csv(f, configs, rows);
            }
        } else if (pred->parsed()) {
            popt.model = model;
            popt.f_prime = fprime;
            popt.alpha = alpha;
            out << predict_report(popt);
        }
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

}  // namespace maxlfdr::cli
