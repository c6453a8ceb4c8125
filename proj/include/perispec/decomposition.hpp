#pragma once

#include <vector>

#include "perispec/class_structure.hpp"
#include "perispec/kernel.hpp"

namespace perispec {

// One peripheral limit pair. E is a cyclic class of a basic class with no
// basic class downstream; eta vanishes on every other item's E; nu is a left
// eigenvector of P^d at r^d supported by the closed set F.
struct DecompositionItem {
    Eigen::VectorXd eta;  // FunctionV: nonnegative, > 0 on E
    Eigen::VectorXd nu;   // MeasureV: nonnegative, supported by F
    std::vector<int> E;   // sorted state indices
    std::vector<int> F;   // sorted state indices; P^d 1_{F^c} = 0 on F
};

struct AlphaEntry {
    int n = 0;
    int k = 0;
    double alpha = 0.0;  // weighted-norm error of the limit at time n*d + k
};

// Peripheral spectral decomposition:
//   | r^{-(nd+k)} (nd+k)^{-j(x)} (P^{nd+k} f)(x) - sum_i eta_{i,k}(x) nu_{i,k}(f) |
//       <= alpha_{nd+k} V(x) ||f||_V,
// with eta_{i,k} = r^{-k} eta_i, nu_{i,k} = nu_i P^k, and alpha_n -> 0.
struct PeripheralDecomposition {
    double r = 0.0;                     // spectral radius
    int d = 1;                          // lcm of basic-class periods
    std::vector<int> j;                 // growth exponent per state
    std::vector<DecompositionItem> items;
    std::vector<AlphaEntry> alpha;      // filled by verify_decomposition
};

// Builds the decomposition by peeling basic classes in topological order.
// If min V >= 1 every nu_i is normalized to a probability measure, otherwise
// to nu_i(V) = 1 (eta rescaled so the products eta_i (x) nu_i are unchanged).
// Rejects kernels with r(P) = 0 and eigensolver residuals above 1e-8 * r(P).
PeripheralDecomposition peel_decomposition(const Kernel& p);

// Computes the alpha error curve for n = 1..n_max, k = 0..d-1, storing it in
// dec.alpha and returning it. The sup over the unit ball is evaluated in
// closed form (the error operator's weighted norm), not by sampling.
std::vector<AlphaEntry> verify_decomposition(const Kernel& p,
                                             PeripheralDecomposition& dec,
                                             int n_max);

// True iff every state can reach (in >= 1 steps) every state that any state
// can reach; equivalently the condensation has a unique set of reachable
// classes shared by all states.
bool is_totally_irreducible(const Kernel& p);

}  // namespace perispec
