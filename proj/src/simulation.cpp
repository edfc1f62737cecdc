#include "enrt/simulation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <thread>

#include "enrt/numerics.hpp"
#include "enrt/rng.hpp"

namespace enrt {

int thread_budget() {
    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("ENRT_THREADS")) {
        const long requested = std::strtol(env, nullptr, 10);
        if (requested >= 1)
            return static_cast<int>(std::min<long>(requested, hw));
    }
    return static_cast<int>(hw);
}

void validate(const SimScenario& s) {
    if (s.K < 1) throw ValidationError("scenario: K must be >= 1");
    if (s.n < 1) throw ValidationError("scenario: n must be >= 1");
    if (s.H < 2) throw ValidationError("scenario: H must be >= 2");
    if (!(s.p >= 0.0 && s.p <= 1.0))
        throw ValidationError("scenario: p must lie in [0, 1]");
    if (static_cast<int>(s.g.size()) != s.H ||
        static_cast<int>(s.zeta.size()) != s.H ||
        static_cast<int>(s.delta.size()) != s.H)
        throw ValidationError("scenario: g, zeta, delta must each have H entries");
    double gsum = 0.0;
    for (double gh : s.g) {
        if (!(gh > 0.0)) throw ValidationError("scenario: g entries must be > 0");
        gsum += gh;
    }
    if (std::fabs(gsum - 1.0) > 1e-8)
        throw ValidationError("scenario: g must sum to 1");
    if (s.sigma_u2 < 0.0 || s.sigma_e2 < 0.0)
        throw ValidationError("scenario: variance components must be >= 0");
    if (!(s.sigma2() > 0.0))
        throw ValidationError("scenario: total variance must be > 0");
    if (s.n_reps < 1) throw ValidationError("scenario: n_reps must be >= 1");
}

EgoDataset generate_dataset(const SimScenario& s, int rep_index) {
    validate(s);
    rng::Xoshiro256pp gen =
        rng::Xoshiro256pp::for_replicate(s.master_seed, rep_index);

    const double sigma_u = std::sqrt(s.sigma_u2);
    const double sigma_e = std::sqrt(s.sigma_e2);
    const int width = static_cast<int>(std::to_string(s.K).size());

    EgoDataset data;
    data.n_subgroups = s.H;
    data.direction = s.direction;
    data.networks.reserve(s.K);
    for (int k = 0; k < s.K; ++k) {
        EgoNetwork net;
        std::string num = std::to_string(k + 1);
        net.network_id = "net" + std::string(width - num.size(), '0') + num;

        const double u_subgroup = gen.uniform();
        int h = 1;
        double cum = s.g[0];
        while (h < s.H && u_subgroup > cum) cum += s.g[h++];
        net.index_subgroup = h;

        net.index_treated = gen.uniform() < s.p;
        const double u_k = sigma_u * gen.normal();

        const double mean = s.zeta[h - 1] +
                            (net.index_treated ? s.delta[h - 1] : 0.0) + u_k;
        net.member_outcomes.resize(s.n);
        for (int i = 0; i < s.n; ++i)
            net.member_outcomes[i] = mean + sigma_e * gen.normal();
        data.networks.push_back(std::move(net));
    }
    return data;
}

namespace {

struct RepRecord {
    bool ok = false;
    std::vector<double> delta_hat;
    std::vector<double> se;
    std::vector<std::uint8_t> param_cover;
    std::vector<std::uint8_t> sci_cover;
    std::vector<double> pval_single;
    double overall_p = 1.0;
    bool simultaneous_cover = false;
    bool exact_set = false;
    bool wald_reject = false;
};

// True per-subgroup gap to the best of the others, on the reporting scale.
std::vector<double> true_gaps(const SimScenario& s) {
    const int H = s.H;
    std::vector<double> gap(H);
    for (int h = 0; h < H; ++h) {
        double best = s.direction == Direction::maximize
                          ? -std::numeric_limits<double>::infinity()
                          : std::numeric_limits<double>::infinity();
        for (int j = 0; j < H; ++j) {
            if (j == h) continue;
            best = s.direction == Direction::maximize
                       ? std::max(best, s.delta[j])
                       : std::min(best, s.delta[j]);
        }
        gap[h] = s.delta[h] - best;
    }
    return gap;
}

// Best-other labels for the report's contrast column (ties -> largest label,
// matching the convention of always naming the top subgroup).
std::vector<int> compare_labels(const SimScenario& s) {
    std::vector<int> out(s.H);
    const double sign = s.direction == Direction::maximize ? 1.0 : -1.0;
    for (int h = 0; h < s.H; ++h) {
        int arg = -1;
        double best = -std::numeric_limits<double>::infinity();
        for (int j = 0; j < s.H; ++j) {
            if (j == h) continue;
            if (sign * s.delta[j] >= best) {
                best = sign * s.delta[j];
                arg = j;
            }
        }
        out[h] = arg + 1;
    }
    return out;
}

}  // namespace

SimReport run_study(const SimScenario& scenario) {
    validate(scenario);
    if (scenario.n_reps < 100)
        throw ValidationError("run_study: n_reps must be >= 100");

    const int H = scenario.H;
    const int reps = scenario.n_reps;
    const double nu =
        static_cast<double>(scenario.K) * scenario.n - 2.0 * H;
    const double t_crit =
        num::student_t_quantile(1.0 - scenario.alpha / 2.0, nu);
    const std::vector<double> gaps = true_gaps(scenario);
    const BestStructure bs = best_structure(scenario.delta, scenario.direction);

    std::vector<RepRecord> records(reps);
    std::atomic<int> next{0};
    auto worker = [&]() {
        int rep;
        while ((rep = next.fetch_add(1)) < reps) {
            RepRecord& rec = records[rep];
            try {
                const EgoDataset data = generate_dataset(scenario, rep);
                const FittedModel fit = fit_gee(data);
                const McbResult mcb =
                    mcb_test(fit, scenario.alpha, scenario.direction);
                const WaldResult wald = wald_test(fit);

                rec.delta_hat = fit.delta_hat;
                rec.se.resize(H);
                rec.param_cover.resize(H);
                rec.sci_cover.resize(H);
                bool all_cover = true;
                for (int h = 0; h < H; ++h) {
                    rec.se[h] = std::sqrt(fit.cov_delta(h, h));
                    rec.param_cover[h] =
                        std::fabs(fit.delta_hat[h] - scenario.delta[h]) <=
                        t_crit * rec.se[h];
                    rec.sci_cover[h] = mcb.sci[h].lower <= gaps[h] &&
                                       gaps[h] <= mcb.sci[h].upper;
                    all_cover = all_cover && rec.sci_cover[h];
                }
                rec.pval_single = mcb.pairwise_p;
                rec.overall_p = mcb.overall_p;
                rec.simultaneous_cover = all_cover;
                rec.exact_set = mcb.best_set == bs.b0;
                rec.wald_reject = wald.p_value < scenario.alpha;
                rec.ok = true;
            } catch (const std::exception&) {
                rec.ok = false;
            }
        }
    };
    const int n_workers = std::min(thread_budget(), reps);
    std::vector<std::thread> pool;
    pool.reserve(n_workers);
    for (int w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();

    SimReport report;
    report.alpha = scenario.alpha;
    report.true_delta = scenario.delta;
    report.compare_with = compare_labels(scenario);
    report.wald_power_defined = !bs.b1.empty();
    report.mcb_pval = 0.0;
    report.bias.assign(H, 0.0);
    report.stde.assign(H, 0.0);
    report.estde.assign(H, 0.0);
    report.coverage.assign(H, 0.0);
    report.mcb_pval_single.assign(H, 0.0);
    report.mcb_coverage_single.assign(H, 0.0);

    std::vector<double> mean_delta(H, 0.0);
    int used = 0;
    for (const RepRecord& rec : records) {
        if (!rec.ok) continue;
        ++used;
        for (int h = 0; h < H; ++h) {
            mean_delta[h] += rec.delta_hat[h];
            report.stde[h] += rec.se[h];
            report.coverage[h] += rec.param_cover[h];
            report.mcb_pval_single[h] += rec.pval_single[h];
            report.mcb_coverage_single[h] += rec.sci_cover[h];
        }
        report.mcb_pval += rec.overall_p;
        report.mcb_coverage_simultaneous += rec.simultaneous_cover;
        report.mcb_power += rec.exact_set;
        report.wald_power += rec.wald_reject;
    }
    report.n_reps = used;
    report.n_failures = reps - used;
    if (used == 0) throw NumericalError("run_study: every replicate failed");

    for (int h = 0; h < H; ++h) {
        mean_delta[h] /= used;
        report.bias[h] = mean_delta[h] - scenario.delta[h];
        report.stde[h] /= used;
        report.coverage[h] /= used;
        report.mcb_pval_single[h] /= used;
        report.mcb_coverage_single[h] /= used;
    }
    report.mcb_pval /= used;
    report.mcb_coverage_simultaneous /= used;
    report.mcb_power /= used;
    report.wald_power /= used;

    for (const RepRecord& rec : records) {
        if (!rec.ok) continue;
        for (int h = 0; h < H; ++h) {
            const double dev = rec.delta_hat[h] - mean_delta[h];
            report.estde[h] += dev * dev;
        }
    }
    for (int h = 0; h < H; ++h)
        report.estde[h] = used > 1 ? std::sqrt(report.estde[h] / (used - 1)) : 0.0;
    return report;
}

std::vector<double> example_delta(const std::string& example, int H) {
    if (H < 2) throw ValidationError("example_delta: H must be >= 2");
    if (example == "unique_best") {
        std::vector<double> delta(H, -0.5);
        delta.back() = 0.0;
        return delta;
    }
    if (example == "multiple_best") {
        std::vector<double> delta(H, 0.0);
        delta.front() = -0.5;
        return delta;
    }
    throw ValidationError("example_delta: unknown example '" + example + "'");
}

std::vector<CurveRow> sample_size_curves(const CurveGrid& grid) {
    if (grid.rho.empty() || grid.n.empty() || grid.H.empty() ||
        grid.examples.empty())
        throw ValidationError("sample_size_curves: empty grid");

    std::vector<CurveRow> rows;
    for (const std::string& example : grid.examples)
        for (const std::string& test : {std::string("Wald"), std::string("MCB")})
            for (int H : grid.H)
                for (int n : grid.n)
                    for (double rho : grid.rho)
                        rows.push_back({test, example, H, n, rho, 0});

    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        std::size_t i;
        while ((i = next.fetch_add(1)) < rows.size()) {
            CurveRow& row = rows[i];
            DesignSpec design;
            design.H = row.H;
            design.n = row.n;
            design.p = grid.p;
            design.g.assign(row.H, 1.0 / row.H);
            design.sigma2 = grid.sigma2;
            design.rho_y = row.rho;
            design.delta = example_delta(row.example, row.H);
            design.alpha = grid.alpha;
            design.beta = grid.beta;
            try {
                row.k_min = row.test == "Wald" ? wald_min_k(design)
                                               : mcb_min_k(design).k_min;
            } catch (const InfeasibleError&) {
                row.k_min = -1;  // undefined-power cell, kept and marked
            }
        }
    };
    const int n_workers =
        std::min<std::size_t>(thread_budget(), rows.size());
    std::vector<std::thread> pool;
    pool.reserve(n_workers);
    for (int w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    return rows;
}

}  // namespace enrt
