#pragma once

#include <vector>

#include "perispec/decomposition.hpp"
#include "perispec/kernel.hpp"

namespace perispec {

// Generator of a sub-Markov semigroup: nonnegative off-diagonal rates, row
// sums <= 0 (deficit = killing rate). P_t = exp(tL).
struct SubMarkovGenerator {
    WeightedSpace space;
    Eigen::MatrixXd rates;

    SubMarkovGenerator() = default;
    SubMarkovGenerator(WeightedSpace space_, Eigen::MatrixXd rates_);
};

// P_t by uniformization: with lam = max |L_xx| and R = I + L/lam (nonnegative,
// sub-stochastic), P_t = sum_k exp(-lam t)(lam t)^k/k! R^k, truncated once the
// Poisson tail is below tol. Nonnegative and sub-Markov by construction.
Kernel transition(const SubMarkovGenerator& gen, double t, double tol = 1e-12);

// C_T = max over the grid {0, T/16, T/8, T/4, T/2, T} of ||P_t||_V.
double check_time_lyapunov(const SubMarkovGenerator& gen, double t_max);

// Continuous-time peripheral decomposition at horizon T: decomposes P_T,
// asserts d == 1 (guaranteed: exp(tL) has positive diagonal), and audits
//  - flow residuals max_i ||nu_i P_h - r(P_1)^h nu_i|| on a uniform 32-point
//    h-grid of [0, T],
//  - the error alpha_t of r(P_1)^{-t} (1+t)^{-j(x)} P_t f(x) vs the limit
//    sum_i eta_i(x) nu_i(f) on a t-grid of multiples of T/4.
struct SemigroupReport {
    double t_horizon = 0.0;
    double r1 = 0.0;  // r(P_1) = r(P_T)^(1/T)
    double c_t = 0.0;
    PeripheralDecomposition dec;
    std::vector<std::pair<double, double>> flow_residuals;  // (h, residual)
    std::vector<std::pair<double, double>> alpha_t;         // (t, alpha)
};
SemigroupReport continuous_decomposition(const SubMarkovGenerator& gen, double t_horizon,
                                         int alpha_steps = 160);

// Quasi-compactness seen at T1 propagates: checks r(P_T2) = r(P_T1)^(T2/T1)
// (relative 1e-9) and that both decompositions carry identical E_i partitions.
struct PropagationResult {
    bool consistent = false;
    double r_deviation = 0.0;   // |r(P_T2) - r(P_T1)^(T2/T1)| / r(P_T2)
    bool partitions_match = false;
    std::string note;
};
PropagationResult propagation_check(const SubMarkovGenerator& gen, double t1, double t2);

}  // namespace perispec
