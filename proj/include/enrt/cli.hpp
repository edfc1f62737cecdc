#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace enrt::cli {

// Everything a command needs, collected before any computation starts so
// required-field validation happens up front.
struct RunConfig {
    std::string command;           // fit|mcb|wald|power|samplesize|simulate|curves
    std::string input_path;
    std::string output_path;       // empty -> standard output
    std::string format = "json";   // json|csv
    double alpha = 0.05;
    double beta = 0.1;
    std::string direction = "maximize";
    std::uint64_t seed = 0;
    int reps = 1000;
    int K = 0;
    int H = 0;
    int n = 0;
    double p = 0.5;
    std::vector<double> g;         // empty -> uniform 1/H
    double sigma2 = 1.0;
    double rho = 0.0;
    std::vector<double> delta;
    std::vector<double> zeta;      // empty -> all 1 (simulate only)
    std::string test = "both";     // wald|mcb|both (power, samplesize)
    std::string example = "both";  // unique_best|multiple_best|both (curves)
};

// Executes one command.  Returns the process exit code: 0 success, 2 input
// validation failure, 3 infeasible design, 4 numerical failure.  Output goes
// to output_path when set, otherwise to out; diagnostics go to err.
int run_command(const RunConfig& config, std::ostream& out, std::ostream& err);

// Full argv front end (parse + dispatch) with the same exit-code contract.
int cli_main(int argc, const char* const* argv, std::ostream& out,
             std::ostream& err);

}  // namespace enrt::cli
