#include "perispec/absorbed.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "perispec/class_structure.hpp"

namespace perispec {

namespace {

constexpr double kRowTol = 1e-12;

WeightedSpace space_for(const AbsorbedModel& model, Eigen::Index n) {
    Eigen::VectorXd v;
    if (model.weights.size() == 0)
        v = Eigen::VectorXd::Ones(n);
    else if (model.weights.size() == n)
        v = model.weights;
    else
        throw error("compile: weight vector has size " + std::to_string(model.weights.size()) +
                    " but the model has " + std::to_string(n) + " states");
    if (model.labels.empty()) {
        WeightedSpace s = WeightedSpace::dense(v);
        return s;
    }
    if (static_cast<Eigen::Index>(model.labels.size()) != n)
        throw error("compile: label list has size " + std::to_string(model.labels.size()) +
                    " but the model has " + std::to_string(n) + " states");
    return WeightedSpace(model.labels, v);
}

std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

double uniform01(std::mt19937_64& eng) {
    return static_cast<double>(eng() >> 11) * 0x1.0p-53;
}

}  // namespace

Kernel compile(const AbsorbedModel& model) {
    if (std::holds_alternative<Kernel>(model.variant)) {
        const Kernel& k = std::get<Kernel>(model.variant);
        if (model.weights.size() == 0 && model.labels.empty()) return k;
        return Kernel(space_for(model, k.size()), k.entries());
    }
    if (std::holds_alternative<LazyChain>(model.variant)) {
        const LazyChain& c = std::get<LazyChain>(model.variant);
        const Eigen::Index n = c.r_matrix.rows();
        if (c.r_matrix.cols() != n) throw error("compile: lazy chain R matrix is not square");
        if (c.rho_r.size() != n || c.rho_stay.size() != n || c.rho_kill.size() != n)
            throw error("compile: lazy chain probability vectors do not match R");
        for (Eigen::Index x = 0; x < n; ++x) {
            for (Eigen::Index y = 0; y < n; ++y)
                if (!(c.r_matrix(x, y) >= 0.0))
                    throw error("compile: lazy chain R(" + std::to_string(x) + "," +
                                std::to_string(y) + ") is negative");
            double row = c.r_matrix.row(x).sum();
            if (std::abs(row - 1.0) > kRowTol)
                throw error("compile: lazy chain R row " + std::to_string(x) +
                            " sums to " + std::to_string(row) + ", expected 1");
            if (!(c.rho_r[x] >= 0.0) || !(c.rho_stay[x] >= 0.0) || !(c.rho_kill[x] >= 0.0))
                throw error("compile: lazy chain probabilities negative at state " +
                            std::to_string(x));
            double total = c.rho_r[x] + c.rho_stay[x] + c.rho_kill[x];
            if (std::abs(total - 1.0) > kRowTol)
                throw error("compile: lazy chain probabilities at state " + std::to_string(x) +
                            " sum to " + std::to_string(total) + ", expected 1");
        }
        Eigen::MatrixXd entries = c.rho_r.asDiagonal() * c.r_matrix;
        entries += Eigen::MatrixXd(c.rho_stay.asDiagonal());
        return Kernel(space_for(model, n), entries);
    }
    if (std::holds_alternative<BirthDeathKilling>(model.variant)) {
        const BirthDeathKilling& c = std::get<BirthDeathKilling>(model.variant);
        const Eigen::Index n = c.p_up.size();
        if (c.p_down.size() != n || c.p_kill.size() != n)
            throw error("compile: birth-death vectors have mismatched sizes");
        if (n < 1) throw error("compile: birth-death model needs at least one state");
        Eigen::MatrixXd entries = Eigen::MatrixXd::Zero(n, n);
        for (Eigen::Index x = 0; x < n; ++x) {
            if (!(c.p_up[x] >= 0.0) || !(c.p_down[x] >= 0.0) || !(c.p_kill[x] >= 0.0))
                throw error("compile: birth-death probabilities negative at state " +
                            std::to_string(x));
            double used = c.p_up[x] + c.p_down[x] + c.p_kill[x];
            if (used > 1.0 + kRowTol)
                throw error("compile: birth-death probabilities at state " + std::to_string(x) +
                            " sum to " + std::to_string(used) + " > 1");
            if (x + 1 < n) entries(x, x + 1) = c.p_up[x];
            if (x > 0) entries(x, x - 1) = c.p_down[x];
            entries(x, x) = std::max(0.0, 1.0 - used);
        }
        return Kernel(space_for(model, n), entries);
    }
    const DensityModel& c = std::get<DensityModel>(model.variant);
    const Eigen::Index n = c.p.rows();
    if (c.p.cols() != n) throw error("compile: density matrix is not square");
    if (c.nu.size() != n) throw error("compile: base measure does not match density matrix");
    for (Eigen::Index y = 0; y < n; ++y)
        if (!(c.nu[y] > 0.0))
            throw error("compile: base measure must be strictly positive (state " +
                        std::to_string(y) + ")");
    Eigen::MatrixXd entries = c.p * c.nu.asDiagonal();
    return Kernel(space_for(model, n), entries);
}

ConditionedLaw conditioned_law(const Eigen::VectorXd& mu0, const Kernel& p, int n) {
    if (mu0.size() != p.size()) throw error("conditioned_law: initial law has wrong size");
    if (n < 0) throw error("conditioned_law: horizon must be >= 0");
    double mass0 = 0.0;
    for (Eigen::Index x = 0; x < mu0.size(); ++x) {
        if (mu0[x] < 0.0)
            throw error("conditioned_law: initial law negative at state " + std::to_string(x));
        mass0 += mu0[x];
    }
    if (!(mass0 > 0.0)) throw error("conditioned_law: initial law has zero mass");
    Eigen::VectorXd mu = mu0;
    for (int i = 0; i < n; ++i) mu = p.entries().transpose() * mu;
    ConditionedLaw law;
    law.n = n;
    law.survival = mu.sum() / mass0;
    if (!(mu.sum() > 0.0))
        throw error("conditioned_law: the whole population is absorbed by step " +
                    std::to_string(n) + "; the conditioned law is undefined");
    law.masses = mu / mu.sum();
    return law;
}

std::vector<Eigen::VectorXd> qsd_from_decomposition(const Kernel& p,
                                                    const PeripheralDecomposition& dec) {
    const Eigen::Index n = p.size();
    if (p.space().weights.minCoeff() < 1.0 - 1e-12)
        throw error("qsd_from_decomposition: needs V >= 1 so measures normalize");
    const double r = dec.r;
    Eigen::MatrixXd phat = p.entries() / r;

    ClassStructure cs = class_structure(p);
    const int ncomp = cs.num_classes();
    std::vector<std::vector<char>> reach(static_cast<size_t>(ncomp),
                                         std::vector<char>(static_cast<size_t>(ncomp), 0));
    for (int c = ncomp - 1; c >= 0; --c) {
        reach[static_cast<size_t>(c)][static_cast<size_t>(c)] = 1;
        for (int b : cs.dag[static_cast<size_t>(c)])
            for (int t = 0; t < ncomp; ++t)
                if (reach[static_cast<size_t>(b)][static_cast<size_t>(t)])
                    reach[static_cast<size_t>(c)][static_cast<size_t>(t)] = 1;
    }

    std::vector<Eigen::VectorXd> out;
    for (int c = 0; c < ncomp; ++c) {
        if (!cs.basic[static_cast<size_t>(c)]) continue;
        bool terminal = true;
        for (int t = 0; t < ncomp && terminal; ++t)
            if (t != c && cs.basic[static_cast<size_t>(t)] &&
                reach[static_cast<size_t>(c)][static_cast<size_t>(t)])
                terminal = false;
        if (!terminal) continue;

        const std::vector<int>& st = cs.classes[static_cast<size_t>(c)];
        const Eigen::Index sz = static_cast<Eigen::Index>(st.size());
        Eigen::MatrixXd block(sz, sz);
        for (Eigen::Index i = 0; i < sz; ++i)
            for (Eigen::Index j = 0; j < sz; ++j)
                block(i, j) = phat(st[static_cast<size_t>(i)], st[static_cast<size_t>(j)]);

        // Left Perron vector of the (possibly periodic) block; averaging with
        // the identity makes the polish iteration converge without moving the
        // eigenvector.
        Eigen::VectorXd phi = Eigen::VectorXd::Ones(sz);
        if (sz > 1) {
            Eigen::MatrixXd half =
                0.5 * (Eigen::MatrixXd::Identity(sz, sz) + block.transpose());
            for (int it = 0; it < 5000; ++it) {
                Eigen::VectorXd next = half * phi;
                double top = next.maxCoeff();
                if (!(top > 0.0))
                    throw error("qsd_from_decomposition: degenerate class block");
                next /= top;
                double diff = (next - phi).cwiseAbs().maxCoeff();
                phi = next;
                if (diff < 1e-15 && it > 10) break;
            }
        }

        Eigen::VectorXd nu = Eigen::VectorXd::Zero(n);
        for (Eigen::Index i = 0; i < sz; ++i) nu[st[static_cast<size_t>(i)]] = phi[i];
        for (int b = c + 1; b < ncomp; ++b) {
            if (!reach[static_cast<size_t>(c)][static_cast<size_t>(b)]) continue;
            const std::vector<int>& bs = cs.classes[static_cast<size_t>(b)];
            const Eigen::Index bsz = static_cast<Eigen::Index>(bs.size());
            Eigen::VectorXd feed(bsz);
            for (Eigen::Index j = 0; j < bsz; ++j) {
                double acc = 0.0;
                for (Eigen::Index x = 0; x < n; ++x)
                    if (nu[x] != 0.0) acc += nu[x] * phat(x, bs[static_cast<size_t>(j)]);
                feed[j] = acc;
            }
            Eigen::MatrixXd bblock(bsz, bsz);
            for (Eigen::Index i = 0; i < bsz; ++i)
                for (Eigen::Index j = 0; j < bsz; ++j)
                    bblock(i, j) = phat(bs[static_cast<size_t>(i)], bs[static_cast<size_t>(j)]);
            Eigen::MatrixXd sys =
                (Eigen::MatrixXd::Identity(bsz, bsz) - bblock).transpose();
            Eigen::VectorXd sol = sys.partialPivLu().solve(feed);
            for (Eigen::Index j = 0; j < bsz; ++j)
                nu[bs[static_cast<size_t>(j)]] = std::max(0.0, sol[j]);
        }
        double mass = nu.sum();
        if (!(mass > 0.0)) throw error("qsd_from_decomposition: degenerate fixed measure");
        out.push_back(nu / mass);
    }

    // Each terminal basic class contributes one fixed measure but period-many
    // decomposition items, so the item list can only be at least as long.
    if (out.empty() || dec.items.size() < out.size())
        throw error("qsd_from_decomposition: decomposition inconsistent with class structure");
    return out;
}

Certificate lazy_chain_certificate(const LazyChain& chain, const Eigen::VectorXd& mu, double a) {
    AbsorbedModel model;
    model.variant = chain;
    Kernel p = compile(model);
    const Eigen::Index n = p.size();
    if (mu.size() != n) throw error("lazy_chain_certificate: measure has wrong size");
    if (mu.minCoeff() < 0.0)
        throw error("lazy_chain_certificate: dominating measure must be nonnegative");
    if (a < 0.0) throw error("lazy_chain_certificate: scale a must be >= 0");

    // The certificate hypothesis is a density bound on the jump matrix:
    // every row of R must be dominated by the measure a*mu.
    double worst_excess = 0.0;
    Eigen::Index worst_x = 0, worst_y = 0;
    for (Eigen::Index x = 0; x < n; ++x)
        for (Eigen::Index y = 0; y < n; ++y) {
            double excess = chain.r_matrix(x, y) - a * mu[y];
            if (excess > worst_excess) {
                worst_excess = excess;
                worst_x = x;
                worst_y = y;
            }
        }
    if (worst_excess > 1e-12) {
        std::ostringstream os;
        os << "lazy_chain_certificate: density bound violated: r(" << worst_x << ", "
           << worst_y << ") = " << chain.r_matrix(worst_x, worst_y) << " exceeds a*mu = "
           << a * mu[worst_y];
        throw error(os.str());
    }

    Eigen::MatrixXd k_entries(n, n);
    for (Eigen::Index x = 0; x < n; ++x)
        for (Eigen::Index y = 0; y < n; ++y) k_entries(x, y) = a * mu[y];
    Eigen::MatrixXd s_entries = Eigen::MatrixXd(chain.rho_stay.asDiagonal());
    Kernel k(p.space(), k_entries);
    Kernel s(p.space(), s_entries);

    Certificate cert = check_domination(p, k, s);
    double stay_max = chain.rho_stay.maxCoeff();
    double kill_max = chain.rho_kill.maxCoeff();
    double r_lower = 1.0 - kill_max;
    cert.parameters["r_ess_upper"] = stay_max;
    cert.parameters["r_lower"] = r_lower;
    cert.parameters["max_rho_stay"] = stay_max;
    cert.parameters["max_rho_kill"] = kill_max;
    cert.witness["phi"] = "constant test function for the lower bound";
    bool entrywise = cert.valid;
    cert.valid = entrywise && (stay_max + kill_max < 1.0);
    cert.margin = r_lower - stay_max;
    if (entrywise && !cert.valid) {
        std::ostringstream os;
        os << "need max rho_stay + max rho_kill < 1; got " << stay_max << " + " << kill_max;
        cert.note = os.str();
    }
    return cert;
}

SimResult simulate_absorbed(const AbsorbedModel& model, int x0, int horizon, long paths,
                            std::uint64_t seed) {
    Kernel p = compile(model);
    const Eigen::Index n = p.size();
    if (x0 < 0 || x0 >= n)
        throw error("simulate_absorbed: start state " + std::to_string(x0) +
                    " outside space of size " + std::to_string(n));
    if (horizon < 1) throw error("simulate_absorbed: horizon must be >= 1");
    if (paths < 1) throw error("simulate_absorbed: need at least one path");

    std::vector<int> marks;
    for (int m : {1, 2, 5, 10, 20, 30, 50})
        if (m <= horizon) marks.push_back(m);
    const int last = marks.back();

    // Row masses (survival probability of one step from each state).
    Eigen::VectorXd row_mass(n);
    for (Eigen::Index x = 0; x < n; ++x) row_mass[x] = p.entries().row(x).sum();

    std::vector<Eigen::VectorXd> counts(marks.size(), Eigen::VectorXd::Zero(n));
    std::vector<double> weight_sum(marks.size(), 0.0);
    std::vector<long> alive(marks.size(), 0);

    // Sequential importance sampling: instead of killing paths (which starves
    // late checkpoints of samples), each path moves according to the
    // normalized row P(x,.)/mass(x) and carries the product of the row masses
    // as its weight.  The weighted empirical law is then an estimate of the
    // conditioned law, and the mean weight estimates the survival probability
    // with no extra variance when the killing rate is state-independent.
    for (long path = 0; path < paths; ++path) {
        std::mt19937_64 eng(splitmix64(seed ^ (0x9E3779B97F4A7C15ULL *
                                               static_cast<std::uint64_t>(path + 1))));
        Eigen::Index x = x0;
        double w = 1.0;
        size_t mark = 0;
        for (int step = 1; step <= last && mark < marks.size(); ++step) {
            double mass = row_mass[x];
            if (!(mass > 0.0)) {
                w = 0.0;
                break;  // absorbing state: the path is dead beyond this point
            }
            w *= mass;
            if (w <= 1e-300) {
                w = 0.0;
                break;  // weight underflow: the path no longer contributes
            }
            double u = uniform01(eng) * mass;
            double acc = 0.0;
            Eigen::Index next = x;
            for (Eigen::Index y = 0; y < n; ++y) {
                acc += p.entries()(x, y);
                if (u < acc) {
                    next = y;
                    break;
                }
            }
            x = next;
            if (step == marks[mark]) {
                counts[mark][x] += w;
                weight_sum[mark] += w;
                ++alive[mark];
                ++mark;
            }
        }
    }

    SimResult out;
    for (size_t i = 0; i < marks.size(); ++i) {
        SimCheckpoint cp;
        cp.n = marks[i];
        cp.survivors = alive[i];
        cp.survival = weight_sum[i] / static_cast<double>(paths);
        cp.masses = weight_sum[i] > 0.0 ? Eigen::VectorXd(counts[i] / weight_sum[i])
                                        : Eigen::VectorXd(Eigen::VectorXd::Zero(n));
        out.checkpoints.push_back(std::move(cp));
    }
    out.all_extinct_before_first = !(out.checkpoints.front().survival > 0.0);
    return out;
}

RateFit convergence_rate(const Kernel& p, const PeripheralDecomposition& dec,
                         const Eigen::VectorXd& mu0, int window_lo, int window_hi) {
    if (window_lo < 1 || window_hi <= window_lo)
        throw error("convergence_rate: need 1 <= window_lo < window_hi");
    const Eigen::Index n = p.size();
    if (mu0.size() != n) throw error("convergence_rate: initial law has wrong size");

    // Limit of the conditioned law along multiples of d: items weighted by
    // mu0(eta_i), polynomial growth dominated by the largest exponent seen
    // from the support of mu0.
    int jmax_global = -1;
    std::vector<int> item_jmax(dec.items.size(), -1);
    for (size_t i = 0; i < dec.items.size(); ++i) {
        for (Eigen::Index x = 0; x < n; ++x)
            if (mu0[x] > 0.0 && dec.items[i].eta[x] > 0.0)
                item_jmax[i] = std::max(item_jmax[i], dec.j[static_cast<size_t>(x)]);
        jmax_global = std::max(jmax_global, item_jmax[i]);
    }
    if (jmax_global < 0)
        throw error("convergence_rate: the initial law never feeds any terminal class");
    Eigen::VectorXd target = Eigen::VectorXd::Zero(n);
    for (size_t i = 0; i < dec.items.size(); ++i) {
        if (item_jmax[i] != jmax_global) continue;
        double c = 0.0;
        for (Eigen::Index x = 0; x < n; ++x)
            if (dec.j[static_cast<size_t>(x)] == jmax_global)
                c += mu0[x] * dec.items[i].eta[x];
        target += c * dec.items[i].nu;
    }
    double mass = target.sum();
    if (!(mass > 0.0)) throw error("convergence_rate: degenerate limit law");
    target /= mass;

    RateFit fit;
    fit.window_lo = window_lo;
    fit.window_hi = window_hi;
    fit.spectral_prediction = second_modulus_ratio(p);

    std::vector<double> xs, ys;
    for (int m = window_lo; m <= window_hi; ++m) {
        ConditionedLaw law = conditioned_law(mu0, p, m * dec.d);
        double tv = 0.5 * (law.masses - target).cwiseAbs().sum();
        if (tv < 1e-14) {
            fit.below_resolution = true;
            continue;
        }
        xs.push_back(static_cast<double>(m * dec.d));
        ys.push_back(std::log(tv));
    }
    if (xs.size() < 2) {
        fit.below_resolution = true;
        fit.rate = 0.0;
        return fit;
    }
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (size_t i = 0; i < xs.size(); ++i) {
        sx += xs[i];
        sy += ys[i];
        sxx += xs[i] * xs[i];
        sxy += xs[i] * ys[i];
    }
    double denom = static_cast<double>(xs.size()) * sxx - sx * sx;
    double slope = (static_cast<double>(xs.size()) * sxy - sx * sy) / denom;
    fit.rate = std::exp(slope);
    return fit;
}

}  // namespace perispec
