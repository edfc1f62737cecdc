#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "enrt/wald.hpp"

using namespace enrt;
using doctest::Approx;

namespace {

FittedModel make_fit(std::vector<double> delta, const Eigen::MatrixXd& cov) {
    FittedModel fit;
    fit.delta_hat = std::move(delta);
    fit.cov_delta = cov;
    fit.dof = 1e6;
    return fit;
}

DesignSpec flat_design(int H, int n, double rho, std::vector<double> delta) {
    DesignSpec d;
    d.H = H;
    d.n = n;
    d.p = 0.5;
    d.g.assign(H, 1.0 / H);
    d.sigma2 = 1.0;
    d.rho_y = rho;
    d.delta = std::move(delta);
    return d;
}

}  // namespace

TEST_CASE("heterogeneity statistic matches the hand-worked quadratic form") {
    // delta = (0,0,1), cov = 0.01 I.  Contrasts against the last subgroup are
    // (-1,-1) with covariance 0.01*[[2,1],[1,2]]; the quadratic form is
    // 100 * (-1,-1) [[2,1],[1,2]]^-1 (-1,-1)' = 100 * 2/3.
    const WaldResult r =
        wald_test(make_fit({0.0, 0.0, 1.0}, 0.01 * Eigen::MatrixXd::Identity(3, 3)));
    CHECK(r.df == 2);
    CHECK(r.statistic == Approx(200.0 / 3.0).epsilon(1e-12));
    CHECK(r.p_value < 1e-10);
    CHECK(r.p_value >= 0.0);
}

TEST_CASE("constant effects give statistic zero and p one") {
    const WaldResult r = wald_test(
        make_fit({0.7, 0.7, 0.7, 0.7}, 0.02 * Eigen::MatrixXd::Identity(4, 4)));
    CHECK(r.statistic == Approx(0.0).scale(1.0).epsilon(1e-12));
    CHECK(r.p_value == Approx(1.0).epsilon(1e-12));
}

TEST_CASE("zero test uses all H degrees of freedom") {
    const WaldResult r = wald_zero_test(
        make_fit({0.0, 0.0, 1.0}, 0.01 * Eigen::MatrixXd::Identity(3, 3)));
    CHECK(r.df == 3);
    CHECK(r.statistic == Approx(100.0).epsilon(1e-12));
    CHECK(r.p_value < 1e-10);

    const WaldResult null_r = wald_zero_test(
        make_fit({0.0, 0.0, 0.0}, 0.01 * Eigen::MatrixXd::Identity(3, 3)));
    CHECK(null_r.statistic == Approx(0.0).scale(1.0));
    CHECK(null_r.p_value == Approx(1.0));
}

TEST_CASE("singular contrast covariance raises a numerical error") {
    Eigen::MatrixXd flat = Eigen::MatrixXd::Constant(3, 3, 0.01);
    CHECK_THROWS_AS(wald_test(make_fit({0.0, 0.0, 1.0}, flat)), NumericalError);
    Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(3, 3);
    CHECK_THROWS_AS(wald_zero_test(make_fit({0.0, 0.0, 1.0}, zero)),
                    NumericalError);
}

TEST_CASE("power equals the level under a constant effect") {
    const DesignSpec d = flat_design(4, 5, 0.5, {2.0, 2.0, 2.0, 2.0});
    CHECK(wald_power(d, 100) == Approx(0.05).epsilon(1e-10));
    CHECK(wald_power(d, 5000) == Approx(0.05).epsilon(1e-10));
}

TEST_CASE("power is monotone in K and reaches one") {
    const DesignSpec d = flat_design(3, 5, 0.5, {-0.5, -0.5, 0.0});
    double prev = 0.0;
    for (int K : {10, 50, 100, 300, 600, 1200, 3000}) {
        const double pw = wald_power(d, K);
        CHECK(pw >= prev);
        CHECK(pw <= 1.0);
        prev = pw;
    }
    CHECK(wald_power(d, 20000) == Approx(1.0).epsilon(1e-9));
    // Larger gaps can only help.
    const DesignSpec wide = flat_design(3, 5, 0.5, {-1.0, -1.0, 0.0});
    CHECK(wald_power(wide, 300) > wald_power(d, 300));
}

TEST_CASE("minimal K agrees with a brute-force scan") {
    const DesignSpec d = flat_design(3, 5, 0.5, {-0.5, -0.5, 0.0});
    const int k_min = wald_min_k(d);
    int scan = -1;
    for (int K = 1; K <= 2000; ++K)
        if (wald_power(d, K) >= 0.9) {
            scan = K;
            break;
        }
    REQUIRE(scan > 0);
    CHECK(k_min == scan);
    CHECK(wald_power(d, k_min) >= 0.9);
    CHECK(wald_power(d, k_min - 1) < 0.9);
}

TEST_CASE("minimal K responds to beta and rho") {
    DesignSpec d = flat_design(3, 5, 0.5, {-0.5, -0.5, 0.0});
    const int base = wald_min_k(d);
    d.beta = 0.2;  // weaker requirement
    CHECK(wald_min_k(d) < base);
    d.beta = 0.1;
    d.rho_y = 0.0;  // more information per member
    CHECK(wald_min_k(d) < base);
}

TEST_CASE("constant effects make the target power infeasible") {
    const DesignSpec d = flat_design(3, 5, 0.5, {1.0, 1.0, 1.0});
    CHECK_THROWS_AS(wald_min_k(d), InfeasibleError);
}
