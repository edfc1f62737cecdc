#include "enrt/model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

namespace enrt {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv_row(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    std::stringstream ss(line);
    while (std::getline(ss, cur, ',')) fields.push_back(trim(cur));
    if (!line.empty() && line.back() == ',') fields.push_back("");
    return fields;
}

[[noreturn]] void row_error(long row, const std::string& msg) {
    throw ValidationError("row " + std::to_string(row) + ": " + msg);
}

double parse_outcome(const std::string& s, long row) {
    double v = 0.0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last || !std::isfinite(v))
        row_error(row, "non-numeric outcome '" + s + "'");
    return v;
}

int parse_subgroup(const std::string& s, long row) {
    int v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || v < 1)
        row_error(row, "unknown subgroup label '" + s + "'");
    return v;
}

struct NetworkBuilder {
    long index_row = -1;
    int subgroup = 0;
    bool treated = false;
    std::vector<double> outcomes;
    long first_row = 0;
};

}  // namespace

void validate(const EgoDataset& data) {
    if (data.networks.empty()) throw ValidationError("dataset has no networks");
    if (data.n_subgroups < 1) throw ValidationError("dataset has no subgroups");
    std::set<std::string> ids;
    for (const auto& net : data.networks) {
        if (!ids.insert(net.network_id).second)
            throw ValidationError("duplicate network id '" + net.network_id + "'");
        if (net.index_subgroup < 1 || net.index_subgroup > data.n_subgroups)
            throw ValidationError("network '" + net.network_id +
                                  "': subgroup label out of range 1..H");
        if (net.member_outcomes.empty())
            throw ValidationError("network '" + net.network_id + "': no member rows");
        for (double y : net.member_outcomes)
            if (!std::isfinite(y))
                throw ValidationError("network '" + net.network_id +
                                      "': non-finite outcome");
    }
}

EgoDataset load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open input file '" + path + "'");

    std::map<std::string, NetworkBuilder> builders;
    std::string line;
    long row = 0;
    bool saw_header = false;
    while (std::getline(in, line)) {
        ++row;
        const std::string stripped = trim(line);
        if (stripped.empty() || stripped.front() == '#') continue;
        auto fields = split_csv_row(stripped);
        if (!saw_header) {
            const std::vector<std::string> expected = {"network_id", "role",
                                                       "subgroup", "treated",
                                                       "outcome"};
            if (fields != expected)
                row_error(row,
                          "expected header 'network_id,role,subgroup,treated,outcome'");
            saw_header = true;
            continue;
        }
        if (fields.size() != 5) row_error(row, "expected 5 fields");
        const std::string& id = fields[0];
        const std::string& role = fields[1];
        const std::string& subgroup = fields[2];
        const std::string& treated = fields[3];
        const std::string& outcome = fields[4];
        if (id.empty()) row_error(row, "empty network_id");
        auto& nb = builders[id];
        if (nb.first_row == 0) nb.first_row = row;

        if (role == "index") {
            if (nb.index_row >= 0)
                row_error(row, "multiple index rows for network '" + id + "'");
            nb.index_row = row;
            if (subgroup.empty()) row_error(row, "index row requires a subgroup");
            nb.subgroup = parse_subgroup(subgroup, row);
            if (treated == "0")
                nb.treated = false;
            else if (treated == "1")
                nb.treated = true;
            else
                row_error(row, "index treated flag must be 0 or 1");
            if (!outcome.empty()) parse_outcome(outcome, row);  // validated, unused
        } else if (role == "member") {
            if (!treated.empty() && treated != "0")
                row_error(row, "member rows cannot carry treatment");
            if (outcome.empty()) row_error(row, "member row requires an outcome");
            nb.outcomes.push_back(parse_outcome(outcome, row));
            if (!subgroup.empty()) {
                const int sg = parse_subgroup(subgroup, row);
                if (nb.index_row >= 0 && sg != nb.subgroup)
                    row_error(row, "member subgroup disagrees with index row");
                if (nb.index_row < 0 && nb.subgroup == 0) nb.subgroup = sg;
                else if (nb.index_row < 0 && sg != nb.subgroup)
                    row_error(row, "member subgroup disagrees with earlier rows");
            }
        } else {
            row_error(row, "unknown role '" + role + "' (expected index or member)");
        }
    }
    if (!saw_header) throw ValidationError("input file is empty or lacks a header");

    EgoDataset data;
    int max_subgroup = 0;
    for (auto& [id, nb] : builders) {  // std::map: canonical id-sorted order
        if (nb.index_row < 0)
            throw ValidationError("network '" + id + "': no index row");
        EgoNetwork net;
        net.network_id = id;
        net.index_subgroup = nb.subgroup;
        net.index_treated = nb.treated;
        net.member_outcomes = std::move(nb.outcomes);
        max_subgroup = std::max(max_subgroup, net.index_subgroup);
        data.networks.push_back(std::move(net));
    }
    data.n_subgroups = max_subgroup;
    validate(data);
    return data;
}

void write_csv(const EgoDataset& data, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot open output file '" + path + "'");
    out << "network_id,role,subgroup,treated,outcome\n";
    char buf[40];
    for (const auto& net : data.networks) {
        out << net.network_id << ",index," << net.index_subgroup << ','
            << (net.index_treated ? 1 : 0) << ",\n";
        for (double y : net.member_outcomes) {
            std::snprintf(buf, sizeof buf, "%.17g", y);
            out << net.network_id << ",member," << net.index_subgroup << ",0," << buf
                << '\n';
        }
    }
    if (!out) throw ValidationError("failed writing '" + path + "'");
}

void validate(const DesignSpec& d) {
    if (d.H < 2) throw ValidationError("design: H must be >= 2");
    if (d.n < 1) throw ValidationError("design: n must be >= 1");
    if (!(d.p > 0.0 && d.p < 1.0))
        throw ValidationError("design: p must lie in (0,1)");
    if (static_cast<int>(d.g.size()) != d.H)
        throw ValidationError("design: g must have H entries");
    double sum_g = 0.0;
    for (double gh : d.g) {
        if (!(gh > 0.0 && gh < 1.0))
            throw ValidationError("design: each g_h must lie in (0,1)");
        sum_g += gh;
    }
    if (std::fabs(sum_g - 1.0) > 1e-9)
        throw ValidationError("design: subgroup proportions must sum to 1");
    if (!(d.sigma2 > 0.0)) throw ValidationError("design: sigma2 must be positive");
    if (!(d.rho_y >= 0.0 && d.rho_y < 1.0))
        throw ValidationError("design: rho_y must lie in [0,1)");
    if (static_cast<int>(d.delta.size()) != d.H)
        throw ValidationError("design: delta must have H entries");
    for (double v : d.delta)
        if (!std::isfinite(v)) throw ValidationError("design: delta must be finite");
    if (!(d.alpha > 0.0 && d.alpha <= 0.5))
        throw ValidationError("design: alpha must lie in (0, 0.5]");
    if (!(d.beta > 0.0 && d.beta < 1.0))
        throw ValidationError("design: beta must lie in (0,1)");
}

BestStructure best_structure(std::span<const double> delta, Direction direction) {
    const int H = static_cast<int>(delta.size());
    if (H < 2) throw ValidationError("best_structure: need at least 2 subgroups");
    // Orientation-normalized gap: delta_diff_h >= 0 exactly on the best set.
    BestStructure bs;
    bs.delta_diff.resize(H);
    for (int h = 0; h < H; ++h) {
        double best_other = direction == Direction::maximize
                                ? -std::numeric_limits<double>::infinity()
                                : std::numeric_limits<double>::infinity();
        for (int j = 0; j < H; ++j) {
            if (j == h) continue;
            best_other = direction == Direction::maximize
                             ? std::max(best_other, delta[j])
                             : std::min(best_other, delta[j]);
        }
        bs.delta_diff[h] = direction == Direction::maximize
                               ? delta[h] - best_other
                               : best_other - delta[h];
        (bs.delta_diff[h] >= 0.0 ? bs.b0 : bs.b1).push_back(h + 1);
    }
    return bs;
}

}  // namespace enrt
