#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "enrt/mcb.hpp"
#include "enrt/model.hpp"
#include "enrt/wald.hpp"

namespace enrt {

// Generator parameters for one Monte Carlo study.
struct SimScenario {
    int K = 0;                       // egonetworks per replicate
    int n = 0;                       // members per egonetwork
    int H = 0;                       // index subgroups
    double p = 0.5;                  // treatment probability
    std::vector<double> g;           // subgroup probabilities, sum 1
    std::vector<double> zeta;        // member baseline means, one per subgroup
    std::vector<double> delta;       // spillover effects, one per subgroup
    double sigma_u2 = 0.0;           // network random-effect variance
    double sigma_e2 = 1.0;           // residual variance
    double alpha = 0.05;
    int n_reps = 1000;
    std::uint64_t master_seed = 0;
    Direction direction = Direction::maximize;

    double sigma2() const { return sigma_u2 + sigma_e2; }
    double rho_y() const { return sigma_u2 / (sigma_u2 + sigma_e2); }
};

void validate(const SimScenario& scenario);

// One synthetic replicate, reproducible from (master_seed, rep_index) alone.
EgoDataset generate_dataset(const SimScenario& scenario, int rep_index);

// Monte Carlo summaries shaped like the per-scenario block of the study table.
struct SimReport {
    int n_reps = 0;                  // replicates contributing to aggregates
    int n_failures = 0;              // replicates dropped (estimability etc.)
    double alpha = 0.05;

    std::vector<double> true_delta;
    std::vector<double> bias;              // mean(delta_hat) - delta
    std::vector<double> stde;              // mean analytic std error
    std::vector<double> estde;             // empirical sd of delta_hat
    std::vector<double> coverage;          // per-parameter t-interval coverage

    std::vector<int> compare_with;         // j* per h: best other subgroup (1-based)
    std::vector<double> mcb_pval_single;   // mean BH-adjusted pairwise p per h
    std::vector<double> mcb_coverage_single;  // per-comparison SCI coverage
    double mcb_pval = 1.0;                 // mean overall p
    double mcb_coverage_simultaneous = 0.0;
    double mcb_power = 0.0;                // exact best-set identification rate

    bool wald_power_defined = false;       // false under a global null
    double wald_power = 0.0;               // heterogeneity rejection rate
};

// Runs n_reps replicates (parallel across ENRT_THREADS workers, default all
// cores) with a deterministic ordered reduction keyed by replicate index.
SimReport run_study(const SimScenario& scenario);

// One minimal-sample-size grid cell.
struct CurveRow {
    std::string test;     // "Wald" | "MCB"
    std::string example;  // "unique_best" | "multiple_best"
    int H = 0;
    int n = 0;
    double rho = 0.0;
    int k_min = 0;        // -1 marks an undefined-power cell
};

struct CurveGrid {
    std::vector<double> rho = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
    std::vector<int> n = {2, 3, 5, 10};
    std::vector<int> H = {3, 4, 5, 6};
    std::vector<std::string> examples = {"unique_best", "multiple_best"};
    double sigma2 = 1.0;
    double p = 0.5;
    double alpha = 0.05;
    double beta = 0.1;
};

// Effect pattern for a named example: the last subgroup is best; under
// unique_best all the others sit 0.5 below, under multiple_best only the
// first does.
std::vector<double> example_delta(const std::string& example, int H);

// Minimal K for both tests over the full grid, parallel across cells with a
// deterministic row order (example, test, H, n, rho).
std::vector<CurveRow> sample_size_curves(const CurveGrid& grid = {});

// Worker-count cap honoring the ENRT_THREADS environment variable.
int thread_budget();

}  // namespace enrt
