#pragma once

#include <map>
#include <string>
#include <vector>

#include "perispec/kernel.hpp"

namespace perispec {

enum class CertificateKind {
    Domination,       // P <= K + S entrywise, r_ess(P) <= r(S)
    OrderDomination,  // 0 <= P <= Q entrywise, r_ess(P) <= r_ess(Q)
    Lyapunov,         // drift outside E_K + local domination on E_K
    LocalizedG,       // localized iterate bound with witness G
    LocalizedMoment,  // truncated-moment variant with level-A witness
    Density,          // density-threshold witness built from a base measure
    LowerBound,       // P phi >= theta phi  =>  r(P) >= theta
};

std::string to_string(CertificateKind kind);

// Machine-checkable certificate: named scalar parameters, a description of
// the witness objects, a validity verdict and the bound margin where defined
// (margin = r_lower - r_ess_upper when both sides are present).
struct Certificate {
    CertificateKind kind = CertificateKind::Domination;
    std::map<std::string, double> parameters;
    std::map<std::string, std::string> witness;
    bool valid = false;
    double margin = 0.0;
    std::string note;  // human-readable diagnostics (violations etc.)
};

// --- direct domination -----------------------------------------------------

// Verifies P <= K + S entrywise (relative tolerance 1e-12 scaled by the
// larger entry). Valid iff the inequality holds; parameters record
// r_ess_upper = r(S), r(P), the rank of K, and strict = (r(S) < r(P)).
Certificate check_domination(const Kernel& p, const Kernel& k, const Kernel& s);

// Verifies 0 <= P <= Q entrywise; r_ess(P) <= r_ess(Q) on the common space.
// On failure the worst offending entry is reported in the note.
Certificate check_order_domination(const Kernel& p, const Kernel& q);

// Expansion remainder bound behind the domination route: with A = (P-S)_+ and
// B = S /\ P (so P = A + B exactly), R_n = sum of words of (A+B)^n with >= 3
// A-factors, checks
//   ||P^n - R_n||_V <= ||S||^n + n ||A|| ||S||^(n-1) + C(n,2) ||A||^2 ||S||^(n-2).
// Returns the verdict and the (provably nonnegative) slack.
struct ExpansionBound {
    bool holds = false;
    double lhs = 0.0;
    double rhs = 0.0;
    double slack = 0.0;        // rhs - lhs
    Eigen::MatrixXd low_words;  // P^n - R_n: the words with <= 2 A-factors
};
ExpansionBound expansion_bound_check(const Kernel& p, const Kernel& s, int n);

// --- Lyapunov-type criteria ------------------------------------------------

// theta1 = max_{x not in E_K} (PV)(x)/V(x); 0 if the complement is empty.
double check_global_drift(const Kernel& p, const std::vector<int>& ek);

// theta2 = max_{x in E_K} ((P-K)_+ V)(x)/V(x); 0 if E_K is empty.
double check_local_domination(const Kernel& p, const std::vector<int>& ek,
                              const Kernel& k);

// Combined certificate: r_ess(P) <= theta1 v theta2, valid iff both
// theta1 < r(P) and theta2 < r(P). The recorded witness satisfies
// S = 1_{E_K^c} P + 1_{E_K} (P-K)_+ with ||S||_V <= theta1 v theta2 and
// P <= (row-masked K) + S entrywise.
Certificate lyapunov_certificate(const Kernel& p, const std::vector<int>& ek,
                                 const Kernel& k);

// P phi >= theta phi with phi >= 0, phi != 0 gives r(P) >= theta;
// theta = min over {phi > 0} of (P phi)(x)/phi(x). Rejects negative phi.
Certificate spectral_lower_bound(const Kernel& p, const Eigen::VectorXd& phi);

// Localized iterate criterion: verifies P(1_{E_K} f) <= G f + theta3 V ||f||_V
// on E_K (checked at f = V via the positive part), then
//   theta = (theta3 + theta1) * sum_{i=0}^{k-1} ||G^i|| ||P^{k-i}||.
// Valid iff theta < r(P)^{k+1}; r_ess_upper = theta1 v theta^{1/(k+1)}.
Certificate localized_g_certificate(const Kernel& p, const std::vector<int>& ek,
                                    const Kernel& g, int k, double theta3);

// Truncated-moment variant: tail = sup_{E_K} (1/V) P(V 1_{V>A}),
// theta2 = tail + theta4 where theta4 bounds P(f 1_{V<=A}) - K_A f on E_K.
// Valid iff theta2 < r(P); r_ess_upper = theta1 v theta2.
Certificate localized_moment_certificate(const Kernel& p, const std::vector<int>& ek,
                                         const Kernel& k_a, double level_a,
                                         double theta4);

// Density-threshold certificate. Requires P(x,y) = p(x,y) nu(y) on E_K rows
// (reconstruction check, tolerance 1e-12). T(B) = sup_{x in E_K} (1/V)
// sum_y p(x,y) 1_{p>B} V(y) nu(y) over the variant's column range (variant i:
// y in E_K; variant ii: y in {V <= A}). Finds the smallest B on a geometric
// grid with T(B) <= target, then delegates to the localized certificates with
// the rank-one witness G f = B nu(f 1_range) 1_{E_K}.
enum class DensityVariant { RestrictedColumns, TruncatedColumns };
Certificate density_certificate(const Kernel& p, const Eigen::MatrixXd& density,
                                const Eigen::VectorXd& nu, const std::vector<int>& ek,
                                DensityVariant variant, double target,
                                double level_a = 0.0);

}  // namespace perispec
