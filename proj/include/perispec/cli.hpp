#pragma once

#include <cstdint>
#include <string>

namespace perispec {

// Command-line front end configuration. Identical configs produce
// byte-identical artifacts (no timestamps, fixed float formatting).
struct RunConfig {
    std::string command;     // decompose | certify | qsd | simulate | semigroup
    std::string model_path;  // --model
    std::string out_dir;     // --out
    int horizon = 30;        // --horizon
    long paths = 10000;      // --paths
    std::uint64_t seed = 1;  // --seed
    double tol = 1e-12;      // --tol
    std::string ek;          // --ek, comma-separated state indices
    std::string kind;        // --kind, certificate kind
    bool strict = false;     // --strict: exit 1 on invalid certificate
};

// Exit codes: 0 success, 1 invalid certificate under --strict, 2 input error.
// Errors are written to stderr as structured JSON.
int run(const RunConfig& config);

}  // namespace perispec
