#pragma once

#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

#include "perispec/certify.hpp"
#include "perispec/decomposition.hpp"
#include "perispec/kernel.hpp"

namespace perispec {

// Lazy chain with explicit killing: from x, move by the row-stochastic R with
// probability rho_r(x), stay put with probability rho_stay(x), get absorbed
// with probability rho_kill(x); rho_r + rho_stay + rho_kill = 1 per state.
struct LazyChain {
    Eigen::MatrixXd r_matrix;  // row-stochastic
    Eigen::VectorXd rho_r;
    Eigen::VectorXd rho_stay;
    Eigen::VectorXd rho_kill;
};

// Birth-death chain with killing on {0..n-1}: up/down/explicit-kill per state,
// remaining mass stays. Down from 0 and up from n-1 are killed (no reflection).
struct BirthDeathKilling {
    Eigen::VectorXd p_up;
    Eigen::VectorXd p_down;
    Eigen::VectorXd p_kill;
};

// Kernel given by a density against a base measure: P(x,y) = p(x,y) nu(y).
struct DensityModel {
    Eigen::MatrixXd p;   // density values
    Eigen::VectorXd nu;  // base measure masses, > 0
};

// A sub-Markov model of an absorbed chain; V defaults to 1 when empty.
struct AbsorbedModel {
    std::variant<Kernel, LazyChain, BirthDeathKilling, DensityModel> variant;
    Eigen::VectorXd weights;  // optional V (size 0 = ones)
    std::vector<std::string> labels;  // optional state labels
};

// Explicit sub-Markov kernel for the model. LazyChain rows come out as
// rho_r(x) R(x,.) + rho_stay(x) delta_x with row sums 1 - rho_kill(x).
Kernel compile(const AbsorbedModel& model);

// Law of X_n conditioned on survival: masses = mu0 P^n / (mu0 P^n)(1).
struct ConditionedLaw {
    Eigen::VectorXd masses;  // probability vector over states
    double survival = 0.0;   // (mu0 P^n)(1) / mu0(1): survival chance of the run
    int n = 0;
};
// Throws a distinct error when the surviving mass vanishes entirely.
ConditionedLaw conditioned_law(const Eigen::VectorXd& mu0, const Kernel& p, int n);

// Quasi-stationary distributions extracted from the decomposition: one
// probability measure per terminal basic class, satisfying nu P = r nu
// (fixed point of the conditioned evolution for every horizon). Requires
// V >= 1 so that measures normalize to probabilities.
std::vector<Eigen::VectorXd> qsd_from_decomposition(const Kernel& p,
                                                    const PeripheralDecomposition& dec);

// Quasi-compactness certificate for a lazy chain whose R-rows are dominated
// by a * mu: K = a mu (rank one), S = diag(rho_stay); r_ess_upper = max rho_stay,
// r_lower = 1 - max rho_kill (test function phi == 1);
// valid iff max rho_stay + max rho_kill < 1. Throws, naming the worst atom,
// when some R(x,y) exceeds a*mu(y) so the density hypothesis fails.
Certificate lazy_chain_certificate(const LazyChain& chain, const Eigen::VectorXd& mu,
                                   double a);

// Monte Carlo of the absorbed chain by weighted (sequential importance)
// sampling: paths follow the survival-normalized rows P(x,.)/mass(x) and
// carry the product of row masses as a weight, so late checkpoints keep a
// full population of samples instead of the surviving remnant. masses is the
// weighted empirical law (estimates the conditioned law), survival the mean
// weight (estimates mu0 P^n mass), survivors the count of positive-weight
// paths. Paths use splittable per-path random streams derived from the
// master seed, so results do not depend on execution order or path-count
// growth; checkpoints are {1,2,5,10,20,30,50} capped at the horizon.
struct SimCheckpoint {
    int n = 0;
    Eigen::VectorXd masses;   // weighted empirical conditioned law (zero if extinct)
    double survival = 0.0;    // mean path weight
    long survivors = 0;       // paths with positive weight at this checkpoint
};
struct SimResult {
    std::vector<SimCheckpoint> checkpoints;
    bool all_extinct_before_first = false;
};
SimResult simulate_absorbed(const AbsorbedModel& model, int x0, int horizon,
                            long paths, std::uint64_t seed);

// Geometric convergence rate of the conditioned law toward its limit, fitted
// by least squares on log TV-distance over a window of multiples of d.
struct RateFit {
    double rate = 0.0;                 // fitted per-step factor
    double spectral_prediction = 0.0;  // second-modulus ratio of P
    bool below_resolution = false;     // distances hit numerical floor
    int window_lo = 5;
    int window_hi = 30;
};
RateFit convergence_rate(const Kernel& p, const PeripheralDecomposition& dec,
                         const Eigen::VectorXd& mu0, int window_lo = 5,
                         int window_hi = 30);

}  // namespace perispec
