#pragma once

#include <vector>

#include "perispec/kernel.hpp"

namespace perispec {

// Communicating-class decomposition of the support graph of a nonnegative
// kernel. Class ids follow a canonical topological order of the condensation
// (edges go from lower to higher id; ties broken by smallest state index).
struct ClassStructure {
    double r = 0.0;                         // spectral radius of the kernel
    std::vector<int> class_of;              // state -> class id
    std::vector<std::vector<int>> classes;  // class id -> sorted states
    std::vector<std::vector<int>> dag;      // condensation adjacency (sorted, no self-loops)
    std::vector<double> class_rho;          // spectral radius of each diagonal block
    std::vector<char> basic;                // |class_rho - r| <= 1e-9 * r
    std::vector<int> period;                // gcd of cycle lengths; 0 for cycle-free classes

    int num_classes() const { return static_cast<int>(classes.size()); }
    // True if a path of classes cfrom -> ... -> cto exists (reflexive).
    bool accesses(int cfrom, int cto) const;
};

ClassStructure class_structure(const Kernel& p);

// Polynomial growth exponent: j(x) = (length of the longest chain of basic
// classes accessible from x's class, counted in classes) - 1, floored at 0.
// r^{-n} P^n V(x) grows like n^{j(x)} up to constants.
std::vector<int> growth_exponent(const ClassStructure& cs);

}  // namespace perispec
