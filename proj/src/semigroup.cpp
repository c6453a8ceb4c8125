#include "perispec/semigroup.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace perispec {

namespace {

Eigen::MatrixXd kernel_power(Eigen::MatrixXd base, long e) {
    const Eigen::Index n = base.rows();
    Eigen::MatrixXd result = Eigen::MatrixXd::Identity(n, n);
    while (e > 0) {
        if (e & 1) result = result * base;
        base = base * base;
        e >>= 1;
    }
    return result;
}

}  // namespace

SubMarkovGenerator::SubMarkovGenerator(WeightedSpace space_, Eigen::MatrixXd rates_)
    : space(std::move(space_)), rates(std::move(rates_)) {
    const Eigen::Index n = space.size();
    if (rates.rows() != n || rates.cols() != n)
        throw error("generator: rate matrix shape does not match the space");
    for (Eigen::Index x = 0; x < n; ++x) {
        for (Eigen::Index y = 0; y < n; ++y) {
            if (!std::isfinite(rates(x, y)))
                throw error("generator: rate (" + std::to_string(x) + "," + std::to_string(y) +
                            ") is not finite");
            if (x != y && rates(x, y) < 0.0)
                throw error("generator: off-diagonal rate (" + std::to_string(x) + "," +
                            std::to_string(y) + ") is negative");
        }
        double row = rates.row(x).sum();
        double scale = std::max(1.0, rates.row(x).cwiseAbs().maxCoeff());
        if (row > 1e-12 * scale)
            throw error("generator: row " + std::to_string(x) + " sums to " +
                        std::to_string(row) + " > 0 (mass created)");
    }
}

Kernel transition(const SubMarkovGenerator& gen, double t, double tol) {
    const Eigen::Index n = gen.space.size();
    if (!(t >= 0.0)) throw error("transition: time must be >= 0");
    if (!(tol > 0.0) || tol >= 1.0) throw error("transition: tolerance must be in (0,1)");
    Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(n, n);
    if (t == 0.0) return Kernel(gen.space, identity);

    double lam = 0.0;
    for (Eigen::Index x = 0; x < n; ++x) lam = std::max(lam, -gen.rates(x, x));
    if (lam == 0.0) return Kernel(gen.space, identity);

    // Split long horizons into chunks so the Poisson weights never underflow.
    long chunks = static_cast<long>(std::ceil(lam * t / 64.0));
    chunks = std::max(chunks, 1L);
    double tc = t / static_cast<double>(chunks);
    double mean = lam * tc;
    double chunk_tol = tol / static_cast<double>(chunks);

    Eigen::MatrixXd r = identity + gen.rates / lam;
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(n, n);
    Eigen::MatrixXd rk = identity;
    double weight = std::exp(-mean);
    double cumulative = 0.0;
    const long k_cap = static_cast<long>(mean + 60.0 * std::sqrt(mean + 1.0) + 200.0);
    for (long k = 0;; ++k) {
        acc += weight * rk;
        cumulative += weight;
        if (1.0 - cumulative < chunk_tol) break;
        if (k >= k_cap) throw error("transition: series did not converge (internal)");
        weight *= mean / static_cast<double>(k + 1);
        rk = rk * r;
    }
    Eigen::MatrixXd result = chunks == 1 ? acc : kernel_power(acc, chunks);
    return Kernel(gen.space, result);
}

double check_time_lyapunov(const SubMarkovGenerator& gen, double t_max) {
    if (!(t_max > 0.0)) throw error("check_time_lyapunov: horizon must be > 0");
    double c_t = 0.0;
    for (double frac : {0.0, 1.0 / 16.0, 1.0 / 8.0, 1.0 / 4.0, 1.0 / 2.0, 1.0})
        c_t = std::max(c_t, weighted_norm(transition(gen, t_max * frac)));
    return c_t;
}

SemigroupReport continuous_decomposition(const SubMarkovGenerator& gen, double t_horizon,
                                         int alpha_steps) {
    if (!(t_horizon > 0.0)) throw error("continuous_decomposition: horizon must be > 0");
    if (alpha_steps < 4) throw error("continuous_decomposition: need at least 4 grid steps");
    const Eigen::Index n = gen.space.size();
    const Eigen::VectorXd& v = gen.space.weights;

    SemigroupReport report;
    report.t_horizon = t_horizon;
    Kernel p_t = transition(gen, t_horizon);
    report.dec = peel_decomposition(p_t);
    if (report.dec.d != 1)
        throw error("continuous_decomposition: transition kernel reported period > 1 "
                    "(impossible for exp(tL); numerical failure)");
    report.r1 = std::pow(report.dec.r, 1.0 / t_horizon);
    report.c_t = check_time_lyapunov(gen, t_horizon);

    // Flow equivariance of the limit measures along the semigroup.
    for (int i = 0; i < 32; ++i) {
        double h = t_horizon * static_cast<double>(i) / 31.0;
        Kernel p_h = transition(gen, h);
        double worst = 0.0;
        double rh = std::pow(report.r1, h);
        for (const DecompositionItem& item : report.dec.items) {
            Eigen::VectorXd pushed = p_h.entries().transpose() * item.nu;
            worst = std::max(worst, gen.space.measure_norm(pushed - rh * item.nu));
        }
        report.flow_residuals.emplace_back(h, worst);
    }

    // Error curve of the normalized semigroup against the peripheral limit on
    // the quarter-horizon grid.
    Eigen::MatrixXd limit = Eigen::MatrixXd::Zero(n, n);
    for (const DecompositionItem& item : report.dec.items)
        limit += item.eta * item.nu.transpose();
    Kernel base = transition(gen, t_horizon / 4.0);
    Eigen::MatrixXd z = Eigen::MatrixXd::Identity(n, n);
    for (int s = 1; s <= alpha_steps; ++s) {
        double t = t_horizon / 4.0 * static_cast<double>(s);
        z = z * base.entries();
        double rt = std::pow(report.r1, t);
        double alpha = 0.0;
        for (Eigen::Index x = 0; x < n; ++x) {
            double grow = std::pow(1.0 + t, report.dec.j[static_cast<size_t>(x)]);
            double row = 0.0;
            for (Eigen::Index y = 0; y < n; ++y)
                row += std::abs(z(x, y) / (rt * grow) - limit(x, y)) * v[y];
            alpha = std::max(alpha, row / v[x]);
        }
        report.alpha_t.emplace_back(t, alpha);
    }
    return report;
}

PropagationResult propagation_check(const SubMarkovGenerator& gen, double t1, double t2) {
    if (!(t1 > 0.0) || !(t2 > 0.0)) throw error("propagation_check: times must be > 0");
    Kernel p1 = transition(gen, t1);
    Kernel p2 = transition(gen, t2);
    PeripheralDecomposition d1 = peel_decomposition(p1);
    PeripheralDecomposition d2 = peel_decomposition(p2);

    PropagationResult out;
    double predicted = std::pow(d1.r, t2 / t1);
    out.r_deviation = std::abs(d2.r - predicted) / d2.r;

    std::vector<std::vector<int>> e1, e2;
    for (const DecompositionItem& item : d1.items) e1.push_back(item.E);
    for (const DecompositionItem& item : d2.items) e2.push_back(item.E);
    std::sort(e1.begin(), e1.end());
    std::sort(e2.begin(), e2.end());
    out.partitions_match = e1 == e2;
    out.consistent = out.partitions_match && out.r_deviation <= 1e-9;
    if (!out.consistent) {
        std::ostringstream os;
        if (!out.partitions_match)
            os << "item supports differ between t = " << t1 << " and t = " << t2 << "; ";
        if (out.r_deviation > 1e-9)
            os << "radius deviates by relative " << out.r_deviation;
        out.note = os.str();
    }
    return out;
}

}  // namespace perispec
