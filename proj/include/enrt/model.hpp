#pragma once

#include <span>
#include <string>
#include <vector>

#include "enrt/common.hpp"

namespace enrt {

// One egonetwork: a treated-or-control index participant in subgroup h plus
// the outcomes of their never-treated network members.  Only member outcomes
// enter the model; the index participant's own outcome is not modeled.
struct EgoNetwork {
    std::string network_id;
    int index_subgroup = 0;  // 1..H
    bool index_treated = false;
    std::vector<double> member_outcomes;

    int member_count() const { return static_cast<int>(member_outcomes.size()); }
};

struct EgoDataset {
    std::vector<EgoNetwork> networks;
    int n_subgroups = 0;  // H
    Direction direction = Direction::maximize;
};

// Structural checks: unique network ids, labels in 1..H, at least one member
// per network, and at least one treated and one control network per subgroup.
// Throws ValidationError with the offending network/cell named.
void validate(const EgoDataset& data);

// CSV schema (one row per participant, header required, '#' comments and
// blank lines skipped):
//   network_id, role (index|member), subgroup, treated, outcome
// Index rows carry subgroup and treated (0/1); their outcome may be blank.
// Member rows carry outcome; subgroup may be blank (taken from the index) and
// treated must be 0 or blank.  Errors cite the 1-based file row.
EgoDataset load_csv(const std::string& path);
void write_csv(const EgoDataset& data, const std::string& path);

// Design-time inputs for power and sample-size calculations (equal network
// size n across networks).
struct DesignSpec {
    int H = 0;
    int n = 0;
    double p = 0.5;          // treatment probability
    std::vector<double> g;   // subgroup proportions, sum 1
    double sigma2 = 1.0;     // total outcome variance
    double rho_y = 0.0;      // within-network ICC
    std::vector<double> delta;
    double alpha = 0.05;
    double beta = 0.1;
    Direction direction = Direction::maximize;
};

void validate(const DesignSpec& design);

// Partition of subgroups into the best set and its complement, plus each
// subgroup's gap to the best of the others.
struct BestStructure {
    std::vector<int> b0;            // best subgroups (1-based labels)
    std::vector<int> b1;            // complement
    std::vector<double> delta_diff; // delta_h - best_{j!=h} delta_j (signed so
                                    // that >= 0 on b0, < 0 on b1)
};

BestStructure best_structure(std::span<const double> delta, Direction direction);

}  // namespace enrt
