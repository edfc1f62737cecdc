#include "enrt/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <memory>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "enrt/estimation.hpp"
#include "enrt/mcb.hpp"
#include "enrt/model.hpp"
#include "enrt/numerics.hpp"
#include "enrt/simulation.hpp"
#include "enrt/wald.hpp"

namespace enrt::cli {

namespace {

using nlohmann::json;

constexpr const char* kSchemaVersion = "1";

std::string num6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

std::string num1(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f", v);
    return buf;
}

// Writes either to the requested file or to the fallback stream.
class OutputSink {
  public:
    OutputSink(const std::string& path, std::ostream& fallback) {
        if (path.empty()) {
            stream_ = &fallback;
            return;
        }
        file_ = std::make_unique<std::ofstream>(path, std::ios::binary);
        if (!*file_)
            throw ValidationError("cannot open output file '" + path + "'");
        stream_ = file_.get();
    }
    std::ostream& stream() { return *stream_; }

  private:
    std::unique_ptr<std::ofstream> file_;
    std::ostream* stream_ = nullptr;
};

void require(bool ok, const std::string& message) {
    if (!ok) throw ValidationError(message);
}

std::string check_format(const RunConfig& c) {
    require(c.format == "json" || c.format == "csv",
            "unknown format '" + c.format + "' (expected json or csv)");
    return c.format;
}

std::vector<std::string> requested_tests(const RunConfig& c) {
    if (c.test == "wald") return {"Wald"};
    if (c.test == "mcb") return {"MCB"};
    require(c.test == "both", "unknown test '" + c.test +
                                  "' (expected wald, mcb or both)");
    return {"Wald", "MCB"};
}

DesignSpec make_design(const RunConfig& c) {
    require(!c.delta.empty(), "--delta is required for design commands");
    require(c.n >= 1, "--n (members per egonetwork) is required");
    DesignSpec d;
    d.H = c.H > 0 ? c.H : static_cast<int>(c.delta.size());
    require(d.H == static_cast<int>(c.delta.size()),
            "--H disagrees with the length of --delta");
    d.n = c.n;
    d.p = c.p;
    d.g = c.g.empty() ? std::vector<double>(d.H, 1.0 / d.H) : c.g;
    d.sigma2 = c.sigma2;
    d.rho_y = c.rho;
    d.delta = c.delta;
    d.alpha = c.alpha;
    d.beta = c.beta;
    d.direction = direction_from_string(c.direction);
    validate(d);
    return d;
}

SimScenario make_scenario(const RunConfig& c) {
    require(!c.delta.empty(), "--delta is required for simulate");
    require(c.K >= 1, "--K (number of egonetworks) is required");
    require(c.n >= 1, "--n (members per egonetwork) is required");
    require(c.rho >= 0.0 && c.rho < 1.0, "--rho must lie in [0, 1)");
    require(c.sigma2 > 0.0, "--sigma2 must be > 0");
    SimScenario s;
    s.H = c.H > 0 ? c.H : static_cast<int>(c.delta.size());
    require(s.H == static_cast<int>(c.delta.size()),
            "--H disagrees with the length of --delta");
    s.K = c.K;
    s.n = c.n;
    s.p = c.p;
    s.g = c.g.empty() ? std::vector<double>(s.H, 1.0 / s.H) : c.g;
    s.zeta = c.zeta.empty() ? std::vector<double>(s.H, 1.0) : c.zeta;
    require(s.zeta.size() == static_cast<std::size_t>(s.H),
            "--zeta must have one entry per subgroup");
    s.delta = c.delta;
    s.sigma_u2 = c.rho * c.sigma2;
    s.sigma_e2 = (1.0 - c.rho) * c.sigma2;
    s.alpha = c.alpha;
    s.n_reps = c.reps;
    s.master_seed = c.seed;
    s.direction = direction_from_string(c.direction);
    validate(s);
    return s;
}

EgoDataset load_input(const RunConfig& c) {
    require(!c.input_path.empty(), "--input is required for this command");
    EgoDataset data = load_csv(c.input_path);
    data.direction = direction_from_string(c.direction);
    return data;
}

// Best other subgroup by fitted estimate on the oriented scale; ties go to
// the largest label so reports always name the top subgroup.
int best_other_label(const FittedModel& fit, Direction dir, int h) {
    const double sign = dir == Direction::maximize ? 1.0 : -1.0;
    int arg = -1;
    double best = -std::numeric_limits<double>::infinity();
    const int H = static_cast<int>(fit.delta_hat.size());
    for (int j = 0; j < H; ++j) {
        if (j == h) continue;
        if (sign * fit.delta_hat[j] >= best) {
            best = sign * fit.delta_hat[j];
            arg = j;
        }
    }
    return arg;
}

// ---------------------------------------------------------------------------
// fit
// ---------------------------------------------------------------------------
int cmd_fit(const RunConfig& c, std::ostream& out) {
    const std::string format = check_format(c);
    const EgoDataset data = load_input(c);
    const FittedModel fit = fit_gee(data);
    const WaldResult zero = wald_zero_test(fit);
    const WaldResult het = wald_test(fit);
    const int H = static_cast<int>(fit.zeta.size());

    struct Row {
        std::string name;
        double est, se;
    };
    std::vector<Row> rows;
    for (int h = 0; h < H; ++h)
        rows.push_back({"zeta_" + std::to_string(h + 1), fit.zeta[h],
                        fit.se_zeta[h]});
    for (int h = 0; h < H; ++h)
        rows.push_back({"delta_" + std::to_string(h + 1), fit.delta_hat[h],
                        std::sqrt(fit.cov_delta(h, h))});

    OutputSink sink(c.output_path, out);
    std::ostream& os = sink.stream();
    if (format == "csv") {
        os << "coefficient,estimate,std.error,t value,p-value,Wald\n";
        for (int i = 0; i < 2 * H; ++i) {
            const Row& r = rows[i];
            const double t = r.est / r.se;
            const double p =
                2.0 * (1.0 - num::student_t_cdf(std::fabs(t), fit.dof));
            std::string wald_cell;
            if (i == 0) wald_cell = "---";
            if (i == H) wald_cell = num6(zero.p_value);
            os << r.name << ',' << num6(r.est) << ',' << num6(r.se) << ','
               << num6(t) << ',' << num6(p) << ',' << wald_cell << '\n';
        }
        return 0;
    }
    json coefficients = json::array();
    for (const Row& r : rows) {
        const double t = r.est / r.se;
        coefficients.push_back(
            {{"name", r.name},
             {"estimate", r.est},
             {"std_error", r.se},
             {"t_value", t},
             {"p_value",
              2.0 * (1.0 - num::student_t_cdf(std::fabs(t), fit.dof))}});
    }
    json doc{{"schema_version", kSchemaVersion},
             {"command", "fit"},
             {"H", H},
             {"n_networks", fit.n_networks},
             {"n_members", fit.n_members},
             {"direction", to_string(fit.direction)},
             {"sigma2_hat", fit.sigma2_hat},
             {"rho_hat", fit.rho_hat},
             {"rho_identifiable", fit.rho_identifiable},
             {"dof", fit.dof},
             {"iterations", fit.iterations},
             {"coefficients", coefficients},
             {"wald_zero",
              {{"statistic", zero.statistic},
               {"df", zero.df},
               {"p_value", zero.p_value}}},
             {"wald_heterogeneity",
              {{"statistic", het.statistic},
               {"df", het.df},
               {"p_value", het.p_value}}}};
    os << doc.dump(2) << '\n';
    return 0;
}

// ---------------------------------------------------------------------------
// mcb
// ---------------------------------------------------------------------------
int cmd_mcb(const RunConfig& c, std::ostream& out) {
    const std::string format = check_format(c);
    const EgoDataset data = load_input(c);
    const Direction dir = direction_from_string(c.direction);
    const FittedModel fit = fit_gee(data);
    const McbResult mcb = mcb_test(fit, c.alpha, dir);
    const WaldResult het = wald_test(fit);
    const int H = static_cast<int>(fit.delta_hat.size());
    const char* best_word = dir == Direction::maximize ? "max" : "min";

    OutputSink sink(c.output_path, out);
    std::ostream& os = sink.stream();
    if (format == "csv") {
        os << "contrast,estimate,std.error,t value,p-value,L_h,U_h,Wald\n";
        for (int h = 0; h < H; ++h) {
            const int j = best_other_label(fit, dir, h);
            const double se = std::sqrt(fit.cov_delta(h, h) +
                                        fit.cov_delta(j, j) -
                                        2.0 * fit.cov_delta(h, j));
            const double est = mcb.t_stats[h];
            os << "delta_" << h + 1 << " - " << best_word << "_{j!=" << h + 1
               << "} delta_j," << num6(est) << ',' << num6(se) << ','
               << num6(est / se) << ',' << num6(mcb.pairwise_p[h]) << ','
               << num6(mcb.sci[h].lower) << ',' << num6(mcb.sci[h].upper)
               << ',' << (h == 0 ? num6(het.p_value) : std::string()) << '\n';
        }
        return 0;
    }
    json rows = json::array();
    for (int h = 0; h < H; ++h) {
        const int j = best_other_label(fit, dir, h);
        const double se = std::sqrt(fit.cov_delta(h, h) + fit.cov_delta(j, j) -
                                    2.0 * fit.cov_delta(h, j));
        rows.push_back({{"subgroup", h + 1},
                        {"versus", j + 1},
                        {"estimate", mcb.t_stats[h]},
                        {"std_error", se},
                        {"t_value", mcb.t_stats[h] / se},
                        {"p_value", mcb.pairwise_p[h]},
                        {"lower", mcb.sci[h].lower},
                        {"upper", mcb.sci[h].upper},
                        {"critical_value", mcb.critical_values[h]}});
    }
    json doc{{"schema_version", kSchemaVersion},
             {"command", "mcb"},
             {"alpha", c.alpha},
             {"direction", to_string(dir)},
             {"best_set", mcb.best_set},
             {"overall_p", mcb.overall_p},
             {"wald_heterogeneity_p", het.p_value},
             {"contrasts", rows}};
    os << doc.dump(2) << '\n';
    return 0;
}

// ---------------------------------------------------------------------------
// wald
// ---------------------------------------------------------------------------
int cmd_wald(const RunConfig& c, std::ostream& out) {
    const std::string format = check_format(c);
    const EgoDataset data = load_input(c);
    const FittedModel fit = fit_gee(data);
    const WaldResult het = wald_test(fit);
    const WaldResult zero = wald_zero_test(fit);

    OutputSink sink(c.output_path, out);
    std::ostream& os = sink.stream();
    if (format == "csv") {
        os << "test,statistic,df,p-value\n";
        os << "heterogeneity," << num6(het.statistic) << ',' << het.df << ','
           << num6(het.p_value) << '\n';
        os << "zero," << num6(zero.statistic) << ',' << zero.df << ','
           << num6(zero.p_value) << '\n';
        return 0;
    }
    json doc{{"schema_version", kSchemaVersion},
             {"command", "wald"},
             {"heterogeneity",
              {{"statistic", het.statistic},
               {"df", het.df},
               {"p_value", het.p_value}}},
             {"zero",
              {{"statistic", zero.statistic},
               {"df", zero.df},
               {"p_value", zero.p_value}}}};
    os << doc.dump(2) << '\n';
    return 0;
}

// ---------------------------------------------------------------------------
// power / samplesize
// ---------------------------------------------------------------------------
double power_at(const std::string& test, const DesignSpec& d, int K) {
    return test == "Wald" ? wald_power(d, K) : mcb_power(d, K);
}

int cmd_power(const RunConfig& c, std::ostream& out) {
    const std::string format = check_format(c);
    const DesignSpec design = make_design(c);
    require(c.K >= 1, "--K (number of egonetworks) is required");
    const std::vector<std::string> tests = requested_tests(c);

    std::vector<std::pair<std::string, double>> results;
    for (const std::string& t : tests)
        results.emplace_back(t, power_at(t, design, c.K));

    OutputSink sink(c.output_path, out);
    std::ostream& os = sink.stream();
    if (format == "csv") {
        os << "test,K,power\n";
        for (const auto& [t, pw] : results)
            os << t << ',' << c.K << ',' << num6(pw) << '\n';
        return 0;
    }
    json rows = json::array();
    for (const auto& [t, pw] : results)
        rows.push_back({{"test", t}, {"power", pw}});
    json doc{{"schema_version", kSchemaVersion},
             {"command", "power"},
             {"K", c.K},
             {"alpha", design.alpha},
             {"tests", rows}};
    os << doc.dump(2) << '\n';
    return 0;
}

int cmd_samplesize(const RunConfig& c, std::ostream& out) {
    const std::string format = check_format(c);
    const DesignSpec design = make_design(c);
    const std::vector<std::string> tests = requested_tests(c);

    struct TestResult {
        std::string test;
        int k_min;
        std::vector<std::pair<int, double>> curve;
    };
    std::vector<TestResult> results;
    for (const std::string& t : tests) {
        TestResult r;
        r.test = t;
        r.k_min = t == "Wald" ? wald_min_k(design) : mcb_min_k(design).k_min;
        std::set<int> ks;
        for (double f : {0.5, 0.6, 0.7, 0.8, 0.9, 1.0, 1.1, 1.2, 1.3})
            ks.insert(std::max(1, static_cast<int>(std::llround(f * r.k_min))));
        for (int K : ks) r.curve.emplace_back(K, power_at(t, design, K));
        results.push_back(std::move(r));
    }

    OutputSink sink(c.output_path, out);
    std::ostream& os = sink.stream();
    if (format == "csv") {
        os << "test,K,power,K_min\n";
        for (const TestResult& r : results)
            for (const auto& [K, pw] : r.curve)
                os << r.test << ',' << K << ',' << num6(pw) << ',' << r.k_min
                   << '\n';
        return 0;
    }
    json rows = json::array();
    for (const TestResult& r : results) {
        json curve = json::array();
        for (const auto& [K, pw] : r.curve)
            curve.push_back({{"K", K}, {"power", pw}});
        rows.push_back({{"test", r.test}, {"k_min", r.k_min}, {"curve", curve}});
    }
    json doc{{"schema_version", kSchemaVersion},
             {"command", "samplesize"},
             {"alpha", design.alpha},
             {"beta", design.beta},
             {"tests", rows}};
    os << doc.dump(2) << '\n';
    return 0;
}

// ---------------------------------------------------------------------------
// simulate / curves
// ---------------------------------------------------------------------------
int cmd_simulate(const RunConfig& c, std::ostream& out) {
    const std::string format = check_format(c);
    const SimScenario scenario = make_scenario(c);
    const SimReport report = run_study(scenario);
    const int H = scenario.H;

    OutputSink sink(c.output_path, out);
    std::ostream& os = sink.stream();
    if (format == "csv") {
        os << "subgroup,delta,true,bias,stde,estde,c_alpha,compare,pval_star,"
              "pval,c_alpha_star,c_alpha_sim,power_mcb,power_wald\n";
        for (int h = 0; h < H; ++h) {
            os << h + 1 << ",delta_" << h + 1 << ','
               << num6(report.true_delta[h]) << ',' << num6(report.bias[h])
               << ',' << num6(report.stde[h]) << ',' << num6(report.estde[h])
               << ',' << num6(report.coverage[h]) << ",delta_" << h + 1
               << "-delta_" << report.compare_with[h] << ','
               << num6(report.mcb_pval_single[h]) << ','
               << (h == 0 ? num6(report.mcb_pval) : std::string()) << ','
               << num6(report.mcb_coverage_single[h]) << ','
               << (h == 0 ? num6(report.mcb_coverage_simultaneous)
                          : std::string())
               << ',' << (h == 0 ? num6(report.mcb_power) : std::string())
               << ','
               << (h == 0 ? (report.wald_power_defined
                                 ? num6(report.wald_power)
                                 : std::string("---"))
                          : std::string())
               << '\n';
        }
        return 0;
    }
    json doc{{"schema_version", kSchemaVersion},
             {"command", "simulate"},
             {"n_reps", report.n_reps},
             {"n_failures", report.n_failures},
             {"alpha", report.alpha},
             {"true_delta", report.true_delta},
             {"bias", report.bias},
             {"stde", report.stde},
             {"estde", report.estde},
             {"coverage", report.coverage},
             {"compare_with", report.compare_with},
             {"mcb_pval_single", report.mcb_pval_single},
             {"mcb_coverage_single", report.mcb_coverage_single},
             {"mcb_pval", report.mcb_pval},
             {"mcb_coverage_simultaneous", report.mcb_coverage_simultaneous},
             {"mcb_power", report.mcb_power},
             {"wald_power_defined", report.wald_power_defined},
             {"wald_power", report.wald_power}};
    os << doc.dump(2) << '\n';
    return 0;
}

int cmd_curves(const RunConfig& c, std::ostream& out) {
    const std::string format = check_format(c);
    CurveGrid grid;
    if (c.example != "both") {
        require(c.example == "unique_best" || c.example == "multiple_best",
                "unknown example '" + c.example +
                    "' (expected unique_best, multiple_best or both)");
        grid.examples = {c.example};
    }
    grid.alpha = c.alpha;
    grid.beta = c.beta;
    grid.sigma2 = c.sigma2;
    grid.p = c.p;
    const std::vector<CurveRow> rows = sample_size_curves(grid);

    OutputSink sink(c.output_path, out);
    std::ostream& os = sink.stream();
    if (format == "csv") {
        os << "test,example,H,n,rho,K_min\n";
        for (const CurveRow& r : rows)
            os << r.test << ',' << r.example << ',' << r.H << ',' << r.n << ','
               << num1(r.rho) << ',' << r.k_min << '\n';
        return 0;
    }
    json arr = json::array();
    for (const CurveRow& r : rows)
        arr.push_back({{"test", r.test},
                       {"example", r.example},
                       {"H", r.H},
                       {"n", r.n},
                       {"rho", r.rho},
                       {"K_min", r.k_min}});
    json doc{{"schema_version", kSchemaVersion},
             {"command", "curves"},
             {"alpha", grid.alpha},
             {"beta", grid.beta},
             {"rows", arr}};
    os << doc.dump(2) << '\n';
    return 0;
}

}  // namespace

int run_command(const RunConfig& config, std::ostream& out, std::ostream& err) {
    try {
        if (config.command == "fit") return cmd_fit(config, out);
        if (config.command == "mcb") return cmd_mcb(config, out);
        if (config.command == "wald") return cmd_wald(config, out);
        if (config.command == "power") return cmd_power(config, out);
        if (config.command == "samplesize") return cmd_samplesize(config, out);
        if (config.command == "simulate") return cmd_simulate(config, out);
        if (config.command == "curves") return cmd_curves(config, out);
        throw ValidationError("unknown command '" + config.command + "'");
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    } catch (const InfeasibleError& e) {
        err << "infeasible: " << e.what() << '\n';
        return 3;
    } catch (const NumericalError& e) {
        err << "numerical failure: " << e.what() << '\n';
        return 4;
    } catch (const std::exception& e) {
        err << "failure: " << e.what() << '\n';
        return 4;
    }
}

int cli_main(int argc, const char* const* argv, std::ostream& out,
             std::ostream& err) {
    RunConfig config;
    CLI::App app{
        "Heterogeneous spillover analysis for egocentric network trials: GEE "
        "estimation, best-subgroup identification, power and sample size"};
    app.require_subcommand(1);

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--output", config.output_path, "Output file (default: stdout)");
        sub->add_option("--format", config.format, "Output format: json|csv")
            ->capture_default_str();
        sub->add_option("--alpha", config.alpha, "Type-I error rate")
            ->capture_default_str();
        sub->add_option("--direction", config.direction,
                        "maximize|minimize (which end is best)")
            ->capture_default_str();
    };
    auto add_input = [&](CLI::App* sub) {
        sub->add_option("--input", config.input_path,
                        "Input CSV (network_id,role,subgroup,treated,outcome)");
    };
    auto add_design = [&](CLI::App* sub) {
        sub->add_option("--H", config.H, "Number of index subgroups");
        sub->add_option("--n", config.n, "Members per egonetwork");
        sub->add_option("--p", config.p, "Treatment probability")
            ->capture_default_str();
        sub->add_option("--g", config.g,
                        "Subgroup probabilities (comma list, default uniform)")
            ->delimiter(',');
        sub->add_option("--sigma2", config.sigma2, "Total outcome variance")
            ->capture_default_str();
        sub->add_option("--rho", config.rho, "Within-network ICC")
            ->capture_default_str();
        sub->add_option("--delta", config.delta,
                        "Spillover effects (comma list)")
            ->delimiter(',');
    };

    CLI::App* fit = app.add_subcommand("fit", "GEE coefficient report");
    add_common(fit);
    add_input(fit);

    CLI::App* mcb = app.add_subcommand(
        "mcb", "Comparison-with-the-best intervals and best-set report");
    add_common(mcb);
    add_input(mcb);

    CLI::App* wald = app.add_subcommand("wald", "Spillover Wald tests");
    add_common(wald);
    add_input(wald);

    CLI::App* power =
        app.add_subcommand("power", "Power at a given number of egonetworks");
    add_common(power);
    add_design(power);
    power->add_option("--K", config.K, "Number of egonetworks");
    power->add_option("--test", config.test, "wald|mcb|both")
        ->capture_default_str();

    CLI::App* samplesize = app.add_subcommand(
        "samplesize", "Minimal egonetwork count and power curve");
    add_common(samplesize);
    add_design(samplesize);
    samplesize->add_option("--beta", config.beta, "Type-II error rate")
        ->capture_default_str();
    samplesize->add_option("--test", config.test, "wald|mcb|both")
        ->capture_default_str();

    CLI::App* simulate =
        app.add_subcommand("simulate", "Monte Carlo study of one scenario");
    add_common(simulate);
    add_design(simulate);
    simulate->add_option("--K", config.K, "Number of egonetworks");
    simulate->add_option("--zeta", config.zeta,
                         "Member baseline means (comma list, default 1)")
        ->delimiter(',');
    simulate->add_option("--reps", config.reps, "Monte Carlo replicates")
        ->capture_default_str();
    simulate->add_option("--seed", config.seed, "Master seed")
        ->capture_default_str();

    CLI::App* curves = app.add_subcommand(
        "curves", "Minimal sample size over the (H, n, rho) grid");
    add_common(curves);
    curves->add_option("--beta", config.beta, "Type-II error rate")
        ->capture_default_str();
    curves->add_option("--example", config.example,
                       "unique_best|multiple_best|both")
        ->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return 2;
    }
    config.command = app.get_subcommands().front()->get_name();
    return run_command(config, out, err);
}

}  // namespace enrt::cli
