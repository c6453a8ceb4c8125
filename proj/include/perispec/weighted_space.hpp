#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <vector>

namespace perispec {

// Error type used across the library. Messages name the offending field/state.
struct error : std::runtime_error {
    explicit error(const std::string& msg) : std::runtime_error(msg) {}
};

// Finite state space with a strictly positive weight function V.
// Functions are measured in the weighted supremum norm
//   ||f||_V = max_x |f(x)| / V(x),
// measures in the dual norm ||mu|| = sum_x |mu(x)| V(x).
struct WeightedSpace {
    std::vector<std::string> labels;  // unique, one per state
    Eigen::VectorXd weights;          // V, strictly positive

    WeightedSpace() = default;
    WeightedSpace(std::vector<std::string> labels_, Eigen::VectorXd weights_);

    // states "0".."n-1" with V given (or V == 1 when omitted)
    static WeightedSpace dense(Eigen::Index n);
    static WeightedSpace dense(const Eigen::VectorXd& v);

    Eigen::Index size() const { return weights.size(); }

    // ||f||_V
    double function_norm(const Eigen::VectorXd& f) const;
    // sum |mu| V (dual norm)
    double measure_norm(const Eigen::VectorXd& mu) const;

    bool same_as(const WeightedSpace& other) const;
};

// A function in the weighted space, |f(x)| <= ||f||_V * V(x).
struct FunctionV {
    Eigen::VectorXd values;
};

// A nonnegative measure with finite V-mass.
struct MeasureV {
    Eigen::VectorXd masses;
};

}  // namespace perispec
