#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "perispec/weighted_space.hpp"

namespace perispec {

// Nonnegative kernel acting on the weighted space by row integration:
//   (Pf)(x) = sum_y P(x,y) f(y).
// Bounded on the weighted space iff max_x sum_y P(x,y)V(y)/V(x) < inf,
// which is automatic in finite dimension.
class Kernel {
  public:
    Kernel() = default;
    Kernel(WeightedSpace space, Eigen::MatrixXd entries);

    const WeightedSpace& space() const { return space_; }
    const Eigen::MatrixXd& entries() const { return entries_; }
    Eigen::Index size() const { return entries_.rows(); }

    // (Pf)(x)
    Eigen::VectorXd apply(const Eigen::VectorXd& f) const;
    // (mu P)(y)
    Eigen::VectorXd apply_left(const Eigen::VectorXd& mu) const;

  private:
    WeightedSpace space_;
    Eigen::MatrixXd entries_;  // square, >= 0
};

// Difference of nonnegative kernels; entries may have any sign.
struct SignedKernel {
    WeightedSpace space;
    Eigen::MatrixXd entries;
};

// Operator norm on the weighted space. For a nonnegative kernel this is
//   max_x sum_y P(x,y) V(y) / V(x)   ( = sup over ||f||_V <= 1, attained at f = V).
double weighted_norm(const Kernel& p);

// Same closed form with |entries|; exact for signed kernels because the sup
// over the unit ball is attained at f(y) = +-V(y) with the row's sign pattern.
double weighted_norm(const SignedKernel& r);

// Entrywise positive part (R)_+ = max(R, 0).
Kernel positive_part(const SignedKernel& r);

// Entrywise minimum of two nonnegative kernels (lattice meet).
// Satisfies P = positive_part(P - S) + meet(P, S) exactly.
Kernel meet(const Kernel& a, const Kernel& b);

// Spectral radius r(P) = lim ||P^n||_V^(1/n). Dense eigensolver for
// dimension <= 2000, shifted power iteration above.
double spectral_radius(const Kernel& p);
double spectral_radius_matrix(const Eigen::MatrixXd& m);

// Largest non-peripheral modulus divided by r: max{|lam| : |lam| <= r(1-1e-9)}/r.
// Returns 0 when the spectrum has no sub-peripheral part or r == 0.
double second_modulus_ratio(const Kernel& p);

// Doob transform restricted to the support of a nonnegative eigenfunction eta
// with P eta = lambda eta:  T(x,y) = P(x,y) eta(y)/(lambda eta(x)) on {eta > 0}.
// The restricted space carries weight V/eta. The result is Markov.
struct DoobTransform {
    Kernel kernel;            // on {eta > 0}
    std::vector<int> states;  // indices of {eta > 0} in the original space
};
DoobTransform doob_transform(const Kernel& p, const Eigen::VectorXd& eta,
                             double lambda, double tol = 1e-8);

// Conjugation onto the plain sup-norm space:
//   P'(x,y) = P(x,y) V(y) / (V(x) ||P||_V),
// a sub-Markov kernel with r(P') = r(P)/||P||_V.
Kernel v_transform(const Kernel& p);

// A countable-state model given by per-state one-step probabilities on
// {0,1,2,...}: up to x+1, down to x-1, stay at x; any remaining mass is
// killed. Moves below 0 or out of a truncation window are killed as well.
struct CountableModelSpec {
    std::function<double(long)> up;
    std::function<double(long)> down;
    std::function<double(long)> stay;
    std::function<double(long)> weight;  // V(x) > 0; nullptr means V == 1
    long min_states = 2;
};

// Killed lazy random walk: constant (p, q, laziness), kill on the down-move
// from 0 and on any move out of the window. The weight is the geometric
// V(x) = weight_ratio^{x/2} (so q/p gives the natural drift weight); the
// default 1 keeps V == 1.
CountableModelSpec killed_lazy_walk(double p_up, double q_down, double laziness,
                                    double weight_ratio = 1.0);

// Restriction to the window {0..N-1}; out-of-window mass is killed, never
// reflected, so the truncation is entrywise monotone in N.
Kernel truncate(const CountableModelSpec& model, long n_states);

}  // namespace perispec
