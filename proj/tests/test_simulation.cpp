#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "enrt/simulation.hpp"

using namespace enrt;
using doctest::Approx;

namespace {

SimScenario small_scenario() {
    SimScenario s;
    s.K = 200;
    s.n = 5;
    s.H = 3;
    s.p = 0.5;
    s.g = {1.0 / 3, 1.0 / 3, 1.0 / 3};
    s.zeta = {1.0, 1.0, 1.0};
    s.delta = {-0.5, -0.5, 0.0};
    s.sigma_u2 = 0.5;
    s.sigma_e2 = 0.5;
    s.n_reps = 120;
    s.master_seed = 42;
    return s;
}

bool same_dataset(const EgoDataset& a, const EgoDataset& b) {
    if (a.networks.size() != b.networks.size()) return false;
    for (size_t k = 0; k < a.networks.size(); ++k) {
        const EgoNetwork& x = a.networks[k];
        const EgoNetwork& y = b.networks[k];
        if (x.network_id != y.network_id) return false;
        if (x.index_subgroup != y.index_subgroup) return false;
        if (x.index_treated != y.index_treated) return false;
        if (x.member_outcomes != y.member_outcomes) return false;  // bitwise
    }
    return true;
}

struct ThreadsGuard {
    // Restores ENRT_THREADS on scope exit.
    std::string saved;
    bool had = false;
    ThreadsGuard() {
        if (const char* v = std::getenv("ENRT_THREADS")) {
            saved = v;
            had = true;
        }
    }
    ~ThreadsGuard() {
        if (had)
            setenv("ENRT_THREADS", saved.c_str(), 1);
        else
            unsetenv("ENRT_THREADS");
    }
};

}  // namespace

TEST_CASE("replicates are reproducible and distinct") {
    const SimScenario s = small_scenario();
    CHECK(same_dataset(generate_dataset(s, 3), generate_dataset(s, 3)));
    CHECK_FALSE(same_dataset(generate_dataset(s, 3), generate_dataset(s, 4)));
    SimScenario other = s;
    other.master_seed = 43;
    CHECK_FALSE(same_dataset(generate_dataset(s, 3), generate_dataset(other, 3)));
}

TEST_CASE("network ids are zero-padded, unique, and ordered") {
    SimScenario s = small_scenario();
    s.K = 120;
    const EgoDataset data = generate_dataset(s, 0);
    REQUIRE(data.networks.size() == 120);
    CHECK(data.networks.front().network_id == "net001");
    CHECK(data.networks.back().network_id == "net120");
    std::set<std::string> ids;
    for (const EgoNetwork& net : data.networks) {
        CHECK(net.network_id.size() == 6);
        ids.insert(net.network_id);
        CHECK(net.member_outcomes.size() == 5);
        CHECK(net.index_subgroup >= 1);
        CHECK(net.index_subgroup <= 3);
    }
    CHECK(ids.size() == 120);
}

TEST_CASE("outcomes follow the mean structure when noise vanishes") {
    SimScenario s = small_scenario();
    s.K = 100;
    s.zeta = {1.0, -2.0, 0.5};
    s.delta = {3.0, 0.25, -1.0};
    s.sigma_u2 = 0.0;
    s.sigma_e2 = 1e-12;
    const EgoDataset data = generate_dataset(s, 7);
    for (const EgoNetwork& net : data.networks) {
        const int h = net.index_subgroup - 1;
        const double mean =
            s.zeta[h] + (net.index_treated ? s.delta[h] : 0.0);
        for (double y : net.member_outcomes)
            CHECK(std::fabs(y - mean) < 1e-4);
    }
}

TEST_CASE("degenerate assignment probabilities") {
    SimScenario s = small_scenario();
    s.K = 50;
    s.p = 1.0;
    for (const EgoNetwork& net : generate_dataset(s, 0).networks)
        CHECK(net.index_treated);
    s.p = 0.0;
    for (const EgoNetwork& net : generate_dataset(s, 0).networks)
        CHECK_FALSE(net.index_treated);
}

TEST_CASE("subgroup and treatment frequencies match the design") {
    SimScenario s = small_scenario();
    s.K = 20000;
    s.H = 4;
    s.g = {0.1, 0.2, 0.3, 0.4};
    s.zeta = {0.0, 0.0, 0.0, 0.0};
    s.delta = {0.0, 0.0, 0.0, 0.0};
    s.p = 0.3;
    const EgoDataset data = generate_dataset(s, 11);
    std::vector<int> count(4, 0);
    int treated = 0;
    for (const EgoNetwork& net : data.networks) {
        ++count[net.index_subgroup - 1];
        treated += net.index_treated;
    }
    for (int h = 0; h < 4; ++h) {
        const double freq = count[h] / 20000.0;
        const double sd = std::sqrt(s.g[h] * (1.0 - s.g[h]) / 20000.0);
        CHECK(std::fabs(freq - s.g[h]) < 3.0 * sd);
    }
    const double psd = std::sqrt(0.3 * 0.7 / 20000.0);
    CHECK(std::fabs(treated / 20000.0 - 0.3) < 3.0 * psd);
}

TEST_CASE("scenario validation rejects malformed inputs") {
    SimScenario s = small_scenario();
    s.g = {0.5, 0.5, 0.5};
    CHECK_THROWS_AS(validate(s), ValidationError);
    s = small_scenario();
    s.sigma_u2 = 0.0;
    s.sigma_e2 = 0.0;
    CHECK_THROWS_AS(validate(s), ValidationError);
    s = small_scenario();
    s.p = 1.5;
    CHECK_THROWS_AS(validate(s), ValidationError);
    s = small_scenario();
    s.delta = {0.0, 0.0};
    CHECK_THROWS_AS(validate(s), ValidationError);
}

TEST_CASE("study reports are well-formed rates and counts") {
    const SimScenario s = small_scenario();
    const SimReport r = run_study(s);
    CHECK(r.n_reps + r.n_failures == s.n_reps);
    CHECK(r.n_reps > 0);
    REQUIRE(r.true_delta == s.delta);
    for (int h = 0; h < 3; ++h) {
        CHECK(r.stde[h] > 0.0);
        CHECK(r.estde[h] > 0.0);
        CHECK(r.coverage[h] >= 0.0);
        CHECK(r.coverage[h] <= 1.0);
        CHECK(r.mcb_pval_single[h] >= 0.0);
        CHECK(r.mcb_pval_single[h] <= 1.0);
        CHECK(r.mcb_coverage_single[h] >= 0.0);
        CHECK(r.mcb_coverage_single[h] <= 1.0);
        CHECK(std::fabs(r.bias[h]) < 0.2);
    }
    CHECK(r.mcb_pval >= 0.0);
    CHECK(r.mcb_pval <= 1.0);
    CHECK(r.mcb_coverage_simultaneous >= 0.0);
    CHECK(r.mcb_coverage_simultaneous <= 1.0);
    CHECK(r.mcb_power >= 0.0);
    CHECK(r.mcb_power <= 1.0);
    CHECK(r.wald_power >= 0.0);
    CHECK(r.wald_power <= 1.0);
    CHECK(r.wald_power_defined);
    // The best of the others for subgroups 1 and 2 is subgroup 3; for the
    // best subgroup the contrast names the largest tied rival.
    CHECK(r.compare_with == std::vector<int>{3, 3, 2});
}

TEST_CASE("reports do not depend on the worker count") {
    ThreadsGuard guard;
    SimScenario s = small_scenario();
    s.K = 100;
    setenv("ENRT_THREADS", "1", 1);
    const SimReport serial = run_study(s);
    setenv("ENRT_THREADS", "8", 1);
    const SimReport parallel = run_study(s);
    CHECK(serial.n_reps == parallel.n_reps);
    CHECK(serial.n_failures == parallel.n_failures);
    for (int h = 0; h < 3; ++h) {
        CHECK(serial.bias[h] == parallel.bias[h]);  // bitwise
        CHECK(serial.stde[h] == parallel.stde[h]);
        CHECK(serial.estde[h] == parallel.estde[h]);
        CHECK(serial.coverage[h] == parallel.coverage[h]);
        CHECK(serial.mcb_pval_single[h] == parallel.mcb_pval_single[h]);
        CHECK(serial.mcb_coverage_single[h] == parallel.mcb_coverage_single[h]);
    }
    CHECK(serial.mcb_pval == parallel.mcb_pval);
    CHECK(serial.mcb_coverage_simultaneous ==
          parallel.mcb_coverage_simultaneous);
    CHECK(serial.mcb_power == parallel.mcb_power);
    CHECK(serial.wald_power == parallel.wald_power);
}

TEST_CASE("heterogeneity rejection holds its nominal size") {
    SimScenario s = small_scenario();
    s.K = 300;
    s.delta = {0.25, 0.25, 0.25};  // global null for heterogeneity
    s.n_reps = 1000;
    const SimReport r = run_study(s);
    CHECK_FALSE(r.wald_power_defined);
    // 1000 replicates: 3 binomial sd of 0.05 is 0.021.
    CHECK(std::fabs(r.wald_power - 0.05) < 0.021);
    CHECK(r.mcb_coverage_simultaneous > 0.92);
}

TEST_CASE("replicate-count floor") {
    SimScenario s = small_scenario();
    s.n_reps = 99;
    CHECK_THROWS_AS(run_study(s), ValidationError);
}

TEST_CASE("example effect patterns") {
    CHECK(example_delta("unique_best", 4) ==
          std::vector<double>{-0.5, -0.5, -0.5, 0.0});
    CHECK(example_delta("multiple_best", 4) ==
          std::vector<double>{-0.5, 0.0, 0.0, 0.0});
    CHECK(example_delta("unique_best", 3) ==
          std::vector<double>{-0.5, -0.5, 0.0});
    CHECK_THROWS_AS(example_delta("mystery", 4), ValidationError);
}

TEST_CASE("sample size curves on a reduced grid") {
    CurveGrid grid;
    grid.rho = {0.0, 0.5};
    grid.n = {5};
    grid.H = {3};
    const std::vector<CurveRow> rows = sample_size_curves(grid);
    REQUIRE(rows.size() == 8);  // 2 examples x 2 tests x 2 rho
    // Deterministic row order: example, then test, then H, n, rho.
    CHECK(rows[0].example == "unique_best");
    CHECK(rows[0].test == "Wald");
    CHECK(rows[0].rho == 0.0);
    CHECK(rows[1].rho == 0.5);
    CHECK(rows[2].test == "MCB");
    CHECK(rows[4].example == "multiple_best");
    for (const CurveRow& row : rows) {
        CHECK(row.H == 3);
        CHECK(row.n == 5);
        CHECK(row.k_min > 0);
    }
    // Matched-cell comparisons: MCB needs at least as many networks.
    for (int i : {0, 1, 4, 5})
        CHECK(rows[i + 2].k_min >= rows[i].k_min);

    const std::vector<CurveRow> again = sample_size_curves(grid);
    REQUIRE(again.size() == rows.size());
    for (size_t i = 0; i < rows.size(); ++i) {
        CHECK(again[i].test == rows[i].test);
        CHECK(again[i].example == rows[i].example);
        CHECK(again[i].k_min == rows[i].k_min);
    }
}

TEST_CASE("thread budget honors the environment cap") {
    ThreadsGuard guard;
    setenv("ENRT_THREADS", "1", 1);
    CHECK(thread_budget() == 1);
    setenv("ENRT_THREADS", "2", 1);
    const int hw =
        std::max(1u, std::thread::hardware_concurrency());
    CHECK(thread_budget() == std::min(2, hw));
    unsetenv("ENRT_THREADS");
    CHECK(thread_budget() >= 1);
}
