#include "enrt/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace enrt {

namespace {

struct SubgroupAccum {
    double sb_treated = 0.0;   // sum of per-network information b_k
    double sb_control = 0.0;
    double sby_treated = 0.0;  // sum of b_k * weighted network mean
    double sby_control = 0.0;
};

}  // namespace

VarComponents estimate_variance_components(
    const std::vector<std::vector<double>>& residuals_by_network,
    long n_mean_params) {
    long n_total = 0;
    double ssr = 0.0;
    double cross = 0.0;   // sum over networks of (sum r)^2 - sum r^2
    double pairs = 0.0;   // sum of n_k (n_k - 1)
    for (const auto& r : residuals_by_network) {
        const long nk = static_cast<long>(r.size());
        n_total += nk;
        double s = 0.0, s2 = 0.0;
        for (double v : r) {
            s += v;
            s2 += v * v;
        }
        ssr += s2;
        cross += s * s - s2;
        pairs += static_cast<double>(nk) * (nk - 1);
    }
    if (n_total == 0)
        throw ValidationError("variance components: no residuals supplied");

    VarComponents vc;
    const long dof = n_total - n_mean_params;
    vc.sigma2 = ssr / static_cast<double>(dof > 0 ? dof : n_total);
    if (pairs <= 0.0) {
        vc.identifiable = false;  // every network has a single member
        vc.rho = 0.0;
        return vc;
    }
    if (vc.sigma2 > 0.0)
        vc.rho = std::clamp(cross / (vc.sigma2 * pairs), 0.0, 1.0 - 1e-6);
    return vc;
}

FittedModel fit_gee(const EgoDataset& data, const FitOptions& options) {
    validate(data);
    const int H = data.n_subgroups;

    // Canonical network order: sorted by id, so estimates do not depend on
    // the order networks were supplied in.
    std::vector<int> order(data.networks.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        return data.networks[a].network_id < data.networks[b].network_id;
    });

    std::vector<SubgroupCounts> counts(H);
    long n_members = 0;
    for (const auto& net : data.networks) {
        auto& c = counts[net.index_subgroup - 1];
        (net.index_treated ? c.treated : c.control) += 1;
        n_members += net.member_count();
    }
    for (int h = 0; h < H; ++h) {
        if (counts[h].treated == 0)
            throw ValidationError("subgroup " + std::to_string(h + 1) +
                                  " has no treated networks");
        if (counts[h].control == 0)
            throw ValidationError("subgroup " + std::to_string(h + 1) +
                                  " has no control networks");
    }

    FittedModel fit;
    fit.zeta.assign(H, 0.0);
    fit.delta_hat.assign(H, 0.0);
    fit.counts = counts;
    fit.n_networks = static_cast<int>(data.networks.size());
    fit.n_members = n_members;
    fit.dof = static_cast<double>(n_members - 2 * H);
    fit.direction = data.direction;

    double rho = options.fixed_rho.value_or(0.0);
    double sigma2 = 0.0;
    std::vector<SubgroupAccum> acc(H);
    std::vector<std::vector<double>> residuals;
    residuals.reserve(data.networks.size());

    double max_change = 0.0;
    int iter = 0;
    for (; iter < options.max_iter; ++iter) {
        std::fill(acc.begin(), acc.end(), SubgroupAccum{});
        for (int idx : order) {
            const auto& net = data.networks[idx];
            const double nk = net.member_count();
            const double w = 1.0 / (1.0 + (nk - 1.0) * rho);
            const double bk = nk * w;
            double sum_y = 0.0;
            for (double y : net.member_outcomes) sum_y += y;
            auto& a = acc[net.index_subgroup - 1];
            if (net.index_treated) {
                a.sb_treated += bk;
                a.sby_treated += w * sum_y;
            } else {
                a.sb_control += bk;
                a.sby_control += w * sum_y;
            }
        }

        max_change = 0.0;
        for (int h = 0; h < H; ++h) {
            const double zeta_new = acc[h].sby_control / acc[h].sb_control;
            const double delta_new =
                acc[h].sby_treated / acc[h].sb_treated - zeta_new;
            max_change = std::max(max_change, std::fabs(zeta_new - fit.zeta[h]));
            max_change = std::max(max_change, std::fabs(delta_new - fit.delta_hat[h]));
            fit.zeta[h] = zeta_new;
            fit.delta_hat[h] = delta_new;
        }

        residuals.clear();
        for (int idx : order) {
            const auto& net = data.networks[idx];
            const int h = net.index_subgroup - 1;
            const double mean =
                fit.zeta[h] + (net.index_treated ? fit.delta_hat[h] : 0.0);
            auto& r = residuals.emplace_back();
            r.reserve(net.member_outcomes.size());
            for (double y : net.member_outcomes) r.push_back(y - mean);
        }
        const VarComponents vc = estimate_variance_components(residuals, 2L * H);
        fit.rho_identifiable = vc.identifiable;
        max_change = std::max(max_change, std::fabs(vc.sigma2 - sigma2));
        sigma2 = vc.sigma2;
        if (!options.fixed_rho) {
            max_change = std::max(max_change, std::fabs(vc.rho - rho));
            rho = vc.rho;
        }
        if (max_change < options.tol) {
            ++iter;
            break;
        }
    }
    if (max_change >= options.tol)
        throw NumericalError(
            "GEE fit did not converge after " + std::to_string(options.max_iter) +
            " iterations (last max change " + std::to_string(max_change) + ")");

    fit.sigma2_hat = sigma2;
    fit.rho_hat = rho;
    fit.iterations = iter;
    fit.cov_delta = Eigen::MatrixXd::Zero(H, H);
    fit.se_zeta.assign(H, 0.0);
    for (int h = 0; h < H; ++h) {
        fit.cov_delta(h, h) =
            sigma2 * (1.0 / acc[h].sb_treated + 1.0 / acc[h].sb_control);
        fit.se_zeta[h] = std::sqrt(sigma2 / acc[h].sb_control);
    }
    return fit;
}

Eigen::MatrixXd design_cov_delta(const DesignSpec& design, int K) {
    validate(design);
    if (K < 1) throw ValidationError("design_cov_delta: K must be >= 1");
    const double b = design.n / (1.0 + (design.n - 1.0) * design.rho_y);
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(design.H, design.H);
    for (int h = 0; h < design.H; ++h)
        cov(h, h) = design.sigma2 /
                    (K * design.g[h] * b * design.p * (1.0 - design.p));
    return cov;
}

}  // namespace enrt
