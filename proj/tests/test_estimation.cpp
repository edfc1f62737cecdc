#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include "enrt/estimation.hpp"
#include "enrt/simulation.hpp"

using namespace enrt;
using doctest::Approx;

namespace {

SimScenario base_scenario() {
    SimScenario s;
    s.K = 5000;
    s.n = 5;
    s.H = 4;
    s.p = 0.5;
    s.g = {0.25, 0.25, 0.25, 0.25};
    s.zeta = {1.0, 1.0, 1.0, 1.0};
    s.delta = {1.0, 2.0, 3.0, 4.0};
    s.sigma_u2 = 4.0;
    s.sigma_e2 = 1.0;
    s.master_seed = 7;
    return s;
}

}  // namespace

TEST_CASE("noiseless data is recovered exactly") {
    const std::vector<double> zeta = {1.0, 1.5, -0.25, 2.0};
    const std::vector<double> delta = {1.0, 2.0, 3.0, 4.0};
    EgoDataset data;
    data.n_subgroups = 4;
    for (int h = 0; h < 4; ++h)
        for (int arm = 0; arm < 2; ++arm) {
            EgoNetwork net;
            net.network_id = "n" + std::to_string(2 * h + arm);
            net.index_subgroup = h + 1;
            net.index_treated = (arm == 1);
            net.member_outcomes.assign(
                5, zeta[h] + (arm == 1 ? delta[h] : 0.0));
            data.networks.push_back(net);
        }
    const FittedModel fit = fit_gee(data);
    for (int h = 0; h < 4; ++h) {
        CHECK(fit.zeta[h] == Approx(zeta[h]).epsilon(1e-12));
        CHECK(fit.delta_hat[h] == Approx(delta[h]).epsilon(1e-12));
    }
    CHECK(fit.sigma2_hat == Approx(0.0).scale(1.0).epsilon(1e-12));
}

TEST_CASE("iid residuals give sigma2 near 1 and rho near 0") {
    SimScenario s = base_scenario();
    s.K = 3000;
    s.sigma_u2 = 0.0;
    s.sigma_e2 = 1.0;
    const FittedModel fit = fit_gee(generate_dataset(s, 1));
    // 3 Monte Carlo standard errors: sd(sigma2_hat) ~ sqrt(2/N) = 0.0116.
    CHECK(std::fabs(fit.sigma2_hat - 1.0) < 3.0 * 0.0116);
    CHECK(fit.rho_hat >= 0.0);
    CHECK(fit.rho_hat < 0.02);
}

TEST_CASE("variance components recover the generating ICC") {
    const SimScenario s = base_scenario();  // rho_y = 0.8
    const FittedModel fit = fit_gee(generate_dataset(s, 2));
    CHECK(std::fabs(fit.rho_hat - 0.8) < 0.02);
    CHECK(std::fabs(fit.sigma2_hat - 5.0) < 0.15);
    CHECK(fit.rho_identifiable);
    CHECK(fit.dof == Approx(5000.0 * 5 - 8));
}

TEST_CASE("estimates do not depend on network order") {
    SimScenario s = base_scenario();
    s.K = 500;
    EgoDataset data = generate_dataset(s, 3);
    const FittedModel fit1 = fit_gee(data);
    std::reverse(data.networks.begin(), data.networks.end());
    const FittedModel fit2 = fit_gee(data);
    for (int h = 0; h < 4; ++h) {
        CHECK(fit1.zeta[h] == fit2.zeta[h]);            // bitwise
        CHECK(fit1.delta_hat[h] == fit2.delta_hat[h]);  // bitwise
    }
    CHECK(fit1.sigma2_hat == fit2.sigma2_hat);
    CHECK(fit1.rho_hat == fit2.rho_hat);
}

TEST_CASE("fixed rho is honored verbatim") {
    SimScenario s = base_scenario();
    s.K = 400;
    FitOptions opt;
    opt.fixed_rho = 0.8;
    const FittedModel fit = fit_gee(generate_dataset(s, 4), opt);
    CHECK(fit.rho_hat == 0.8);
}

TEST_CASE("empty treatment cells are named") {
    EgoDataset data;
    data.n_subgroups = 2;
    data.networks = {{"a", 1, true, {1.0, 2.0}},
                     {"b", 1, false, {1.5}},
                     {"c", 2, true, {0.5}}};
    try {
        fit_gee(data);
        FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("subgroup 2") != std::string::npos);
        CHECK(std::string(e.what()).find("control") != std::string::npos);
    }
}

TEST_CASE("non-convergence raises a numerical error") {
    SimScenario s = base_scenario();
    s.K = 200;
    FitOptions opt;
    opt.max_iter = 1;
    opt.tol = 1e-12;
    CHECK_THROWS_AS(fit_gee(generate_dataset(s, 5), opt), NumericalError);
}

TEST_CASE("single-member networks leave rho unidentifiable") {
    EgoDataset data;
    data.n_subgroups = 2;
    data.networks = {{"a", 1, true, {1.0}},
                     {"b", 1, false, {2.0}},
                     {"c", 2, true, {0.5}},
                     {"d", 2, false, {0.7}}};
    const FittedModel fit = fit_gee(data);
    CHECK_FALSE(fit.rho_identifiable);
    CHECK(fit.rho_hat == 0.0);
}

TEST_CASE("moment estimator on crafted residuals") {
    // Perfectly anti-correlated within network: rho clamps at 0.
    VarComponents anti = estimate_variance_components({{1.0, -1.0}, {1.0, -1.0}}, 0);
    CHECK(anti.sigma2 == Approx(1.0));
    CHECK(anti.rho == Approx(0.0));
    // Perfectly correlated: rho clamps just below 1.
    VarComponents corr = estimate_variance_components({{1.0, 1.0}, {-1.0, -1.0}}, 0);
    CHECK(corr.sigma2 == Approx(1.0));
    CHECK(corr.rho == Approx(1.0 - 1e-6));
    CHECK_THROWS_AS(estimate_variance_components({}, 0), ValidationError);
}

TEST_CASE("analytic design covariance matches the closed form") {
    DesignSpec d;
    d.H = 4;
    d.n = 5;
    d.p = 0.5;
    d.g = {0.25, 0.25, 0.25, 0.25};
    d.sigma2 = 5.0;
    d.rho_y = 0.8;
    d.delta = {1.0, 2.0, 3.0, 4.0};
    // Per-network information b = n / (1 + (n-1) rho) = 5 / 4.2.
    const double b = 5.0 / 4.2;
    CHECK(b == Approx(1.1904761904761905).epsilon(1e-14));
    const Eigen::MatrixXd cov = design_cov_delta(d, 5000);
    for (int h = 0; h < 4; ++h) {
        CHECK(cov(h, h) == Approx(0.01344).epsilon(1e-12));
        CHECK(std::sqrt(cov(h, h)) ==
              Approx(0.11593101396951551).epsilon(1e-12));
        for (int j = 0; j < 4; ++j)
            if (j != h) CHECK(cov(h, j) == 0.0);
    }
}

TEST_CASE("fitted covariance approaches the analytic covariance") {
    const SimScenario s = base_scenario();
    const FittedModel fit = fit_gee(generate_dataset(s, 6));
    DesignSpec d;
    d.H = 4;
    d.n = 5;
    d.p = 0.5;
    d.g = {0.25, 0.25, 0.25, 0.25};
    d.sigma2 = 5.0;
    d.rho_y = 0.8;
    d.delta = s.delta;
    const Eigen::MatrixXd expect = design_cov_delta(d, s.K);
    for (int h = 0; h < 4; ++h)
        CHECK(fit.cov_delta(h, h) ==
              Approx(expect(h, h)).epsilon(0.10));  // one random design draw
}
