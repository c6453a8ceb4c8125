#include "perispec/decomposition.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <unordered_map>

namespace perispec {

namespace {

// Exact support of A^e via boolean repeated squaring (0/1 matrices; counts are
// re-thresholded after every product, so doubles stay exact).
Eigen::MatrixXd bool_power(const Eigen::MatrixXd& a01, long e) {
    auto step = [](const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
        return ((x * y).array() > 0.0).cast<double>().matrix().eval();
    };
    const Eigen::Index n = a01.rows();
    Eigen::MatrixXd result = Eigen::MatrixXd::Identity(n, n);
    Eigen::MatrixXd base = a01;
    while (e > 0) {
        if (e & 1) result = step(result, base);
        base = step(base, base);
        e >>= 1;
    }
    return result;
}

Eigen::MatrixXd mat_power(const Eigen::MatrixXd& a, long e) {
    const Eigen::Index n = a.rows();
    Eigen::MatrixXd result = Eigen::MatrixXd::Identity(n, n);
    Eigen::MatrixXd base = a;
    while (e > 0) {
        if (e & 1) result = result * base;
        base = base * base;
        e >>= 1;
    }
    return result;
}

struct PerronData {
    Eigen::VectorXd w;    // right eigenvector, > 0, max entry 1
    Eigen::VectorXd phi;  // left eigenvector, > 0, phi . w = 1
    double rho = 0.0;
};

Eigen::VectorXd dominant_vector(const Eigen::MatrixXd& block, double rho, double resid_tol,
                                const char* side) {
    const Eigen::Index n = block.rows();
    Eigen::VectorXd w;
    if (n == 1) {
        w = Eigen::VectorXd::Ones(1);
    } else {
        Eigen::EigenSolver<Eigen::MatrixXd> es(block, true);
        if (es.info() != Eigen::Success)
            throw error(std::string("peel_decomposition: eigensolver failed (") + side + ")");
        Eigen::VectorXd mods = es.eigenvalues().cwiseAbs();
        double top = mods.maxCoeff();
        Eigen::Index pick = 0;
        double best_real = -1e300;
        for (Eigen::Index i = 0; i < n; ++i)
            if (mods[i] >= top * (1.0 - 1e-12) && es.eigenvalues()[i].real() > best_real) {
                best_real = es.eigenvalues()[i].real();
                pick = i;
            }
        w = es.eigenvectors().col(pick).real();
    }
    // Power-iteration polish; the block is irreducible and aperiodic, so this
    // converges and cleans both sign dust and solver residuals.
    double scale = w.cwiseAbs().maxCoeff();
    if (scale > 0) w /= scale;
    Eigen::Index imax;
    w.cwiseAbs().maxCoeff(&imax);
    if (w[imax] < 0) w = -w;
    w = w.cwiseMax(0.0);
    if (w.maxCoeff() <= 0.0) w = Eigen::VectorXd::Ones(n);
    for (int it = 0; it < 2000; ++it) {
        Eigen::VectorXd next = block * w;
        double top = next.maxCoeff();
        if (top <= 0.0)
            throw error(std::string("peel_decomposition: degenerate Perron block (") + side + ")");
        next /= top;
        double resid = ((block * next) - rho * next).cwiseAbs().maxCoeff();
        w = next;
        if (resid <= resid_tol * 0.25) break;
    }
    double resid = ((block * w) - rho * w).cwiseAbs().maxCoeff();
    if (resid > resid_tol)
        throw error(std::string("peel_decomposition: eigensolver residual ") +
                    std::to_string(resid) + " exceeds tolerance (" + side + ")");
    return w;
}

PerronData perron_pair(const Eigen::MatrixXd& block, double resid_tol) {
    PerronData out;
    if (block.rows() == 1) {
        out.rho = block(0, 0);
        out.w = Eigen::VectorXd::Ones(1);
        out.phi = Eigen::VectorXd::Ones(1);
        return out;
    }
    out.rho = spectral_radius_matrix(block);
    out.w = dominant_vector(block, out.rho, resid_tol, "right");
    out.phi = dominant_vector(block.transpose(), out.rho, resid_tol, "left");
    double inner = out.phi.dot(out.w);
    if (inner <= 0.0) throw error("peel_decomposition: degenerate Perron pair");
    out.phi /= inner;
    return out;
}

}  // namespace

PeripheralDecomposition peel_decomposition(const Kernel& p) {
    const Eigen::Index n = p.size();
    const Eigen::VectorXd& v = p.space().weights;

    double r = spectral_radius(p);
    if (!(r > 1e-300))
        throw error("peel_decomposition: spectral radius is zero (nilpotent kernel)");

    ClassStructure cs = class_structure(p);
    long d = 1;
    for (int c = 0; c < cs.num_classes(); ++c)
        if (cs.basic[static_cast<size_t>(c)]) {
            int per = cs.period[static_cast<size_t>(c)];
            if (per < 1) throw error("peel_decomposition: basic class without a cycle");
            d = std::lcm(d, static_cast<long>(per));
            if (d > 100000) throw error("peel_decomposition: combined period too large");
        }
    std::vector<int> jvec = growth_exponent(cs);

    Eigen::MatrixXd phat = p.entries() / r;
    Eigen::MatrixXd a01 = (p.entries().array() > 0.0).cast<double>().matrix();
    Eigen::MatrixXd ad = bool_power(a01, d);
    Eigen::MatrixXd mhat = mat_power(phat, d);

    // Communicating classes of the d-step support graph. Basic classes of the
    // kernel split into their cyclic classes here; ids are topological.
    Kernel step_kernel(WeightedSpace::dense(n), ad);
    ClassStructure mcs = class_structure(step_kernel);
    const int mc_count = mcs.num_classes();

    // A d-step class is basic iff its states belong to a basic class of P.
    std::vector<char> m_basic(static_cast<size_t>(mc_count), 0);
    for (int c = 0; c < mc_count; ++c) {
        int pc = cs.class_of[static_cast<size_t>(mcs.classes[static_cast<size_t>(c)][0])];
        for (int s : mcs.classes[static_cast<size_t>(c)])
            if (cs.class_of[static_cast<size_t>(s)] != pc)
                throw error("peel_decomposition: internal class-splitting inconsistency");
        m_basic[static_cast<size_t>(c)] = cs.basic[static_cast<size_t>(pc)];
    }

    // Reachability over the d-step condensation.
    std::vector<std::vector<char>> reach(static_cast<size_t>(mc_count),
                                         std::vector<char>(static_cast<size_t>(mc_count), 0));
    for (int c = mc_count - 1; c >= 0; --c) {
        reach[static_cast<size_t>(c)][static_cast<size_t>(c)] = 1;
        for (int b : mcs.dag[static_cast<size_t>(c)])
            for (int t = 0; t < mc_count; ++t)
                if (reach[static_cast<size_t>(b)][static_cast<size_t>(t)])
                    reach[static_cast<size_t>(c)][static_cast<size_t>(t)] = 1;
    }

    // Growth exponent on the d-step graph; must agree with the kernel-level one.
    std::vector<int> chain_m(static_cast<size_t>(mc_count), 0);
    for (int c = mc_count - 1; c >= 0; --c) {
        int best = 0;
        for (int b : mcs.dag[static_cast<size_t>(c)])
            best = std::max(best, chain_m[static_cast<size_t>(b)]);
        chain_m[static_cast<size_t>(c)] = best + (m_basic[static_cast<size_t>(c)] ? 1 : 0);
    }
    for (Eigen::Index x = 0; x < n; ++x) {
        int jm = std::max(0, chain_m[static_cast<size_t>(mcs.class_of[static_cast<size_t>(x)])] - 1);
        if (jm != jvec[static_cast<size_t>(x)])
            throw error("peel_decomposition: growth exponent mismatch at state " +
                        std::to_string(x));
    }

    // Item classes: basic with no other basic class reachable.
    std::vector<int> item_classes;
    for (int c = 0; c < mc_count; ++c) {
        if (!m_basic[static_cast<size_t>(c)]) continue;
        bool terminal = true;
        for (int t = 0; t < mc_count && terminal; ++t)
            if (t != c && m_basic[static_cast<size_t>(t)] && reach[static_cast<size_t>(c)][static_cast<size_t>(t)])
                terminal = false;
        if (terminal) item_classes.push_back(c);
    }
    if (item_classes.empty())
        throw error("peel_decomposition: no terminal basic class (internal inconsistency)");

    auto block_of = [&](int c) {
        const std::vector<int>& st = mcs.classes[static_cast<size_t>(c)];
        const Eigen::Index sz = static_cast<Eigen::Index>(st.size());
        Eigen::MatrixXd b(sz, sz);
        for (Eigen::Index i = 0; i < sz; ++i)
            for (Eigen::Index j = 0; j < sz; ++j)
                b(i, j) = mhat(st[static_cast<size_t>(i)], st[static_cast<size_t>(j)]);
        return b;
    };
    auto cross_block = [&](int cfrom, int cto) {
        const std::vector<int>& sf = mcs.classes[static_cast<size_t>(cfrom)];
        const std::vector<int>& st = mcs.classes[static_cast<size_t>(cto)];
        Eigen::MatrixXd b(static_cast<Eigen::Index>(sf.size()), static_cast<Eigen::Index>(st.size()));
        for (size_t i = 0; i < sf.size(); ++i)
            for (size_t j = 0; j < st.size(); ++j)
                b(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                    mhat(sf[i], st[j]);
        return b;
    };

    const double resid_tol = 1e-8;  // relative to r(P); mhat is normalized to radius 1
    std::unordered_map<int, PerronData> perron_cache;
    auto perron_of = [&](int c) -> const PerronData& {
        auto it = perron_cache.find(c);
        if (it == perron_cache.end())
            it = perron_cache.emplace(c, perron_pair(block_of(c), resid_tol)).first;
        return it->second;
    };

    PeripheralDecomposition dec;
    dec.r = r;
    dec.d = static_cast<int>(d);
    dec.j = jvec;

    const bool v_at_least_one = v.minCoeff() >= 1.0 - 1e-12;

    for (int c_item : item_classes) {
        const PerronData& pd = perron_of(c_item);
        const std::vector<int>& item_states = mcs.classes[static_cast<size_t>(c_item)];

        // nu: left Perron vector of the item block, extended over everything
        // reachable from the item by solving nu_b (rho I - M_b) = feed_b.
        Eigen::VectorXd nu = Eigen::VectorXd::Zero(n);
        for (size_t i = 0; i < item_states.size(); ++i)
            nu[item_states[i]] = pd.phi[static_cast<Eigen::Index>(i)];
        for (int b = c_item + 1; b < mc_count; ++b) {
            if (!reach[static_cast<size_t>(c_item)][static_cast<size_t>(b)] || b == c_item) continue;
            const std::vector<int>& bs = mcs.classes[static_cast<size_t>(b)];
            Eigen::VectorXd feed(static_cast<Eigen::Index>(bs.size()));
            for (size_t j = 0; j < bs.size(); ++j) {
                double acc = 0.0;
                for (Eigen::Index x = 0; x < n; ++x)
                    if (nu[x] != 0.0) acc += nu[x] * mhat(x, bs[j]);
                feed[static_cast<Eigen::Index>(j)] = acc;
            }
            Eigen::MatrixXd sys =
                (pd.rho * Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(bs.size()),
                                                    static_cast<Eigen::Index>(bs.size())) -
                 block_of(b))
                    .transpose();
            Eigen::VectorXd sol = sys.partialPivLu().solve(feed);
            for (size_t j = 0; j < bs.size(); ++j)
                nu[bs[j]] = std::max(0.0, sol[static_cast<Eigen::Index>(j)]);
        }

        // eta: top-degree coefficient of n^{-deg} rho^{-n} M^n w-tilde per class,
        // recursed upstream; blocks whose best chain misses the global growth
        // exponent are annihilated by the normalization and set to zero.
        std::unordered_map<int, Eigen::VectorXd> eta_block;
        std::unordered_map<int, int> deg;
        eta_block[c_item] = pd.w;
        deg[c_item] = 0;
        for (int c = c_item - 1; c >= 0; --c) {
            if (!reach[static_cast<size_t>(c)][static_cast<size_t>(c_item)] || c == c_item) continue;
            int q = -1;
            for (int b : mcs.dag[static_cast<size_t>(c)]) {
                auto it = deg.find(b);
                if (it != deg.end()) q = std::max(q, it->second);
            }
            if (q < 0) throw error("peel_decomposition: internal reachability inconsistency");
            const std::vector<int>& cst = mcs.classes[static_cast<size_t>(c)];
            Eigen::VectorXd g = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(cst.size()));
            for (int b : mcs.dag[static_cast<size_t>(c)]) {
                auto it = deg.find(b);
                if (it == deg.end() || it->second != q) continue;
                g += cross_block(c, b) * eta_block[b];
            }
            if (m_basic[static_cast<size_t>(c)]) {
                const PerronData& pc = perron_of(c);
                double alpha = pc.phi.dot(g) / (pd.rho * static_cast<double>(q + 1));
                deg[c] = q + 1;
                eta_block[c] = alpha * pc.w;
            } else {
                Eigen::MatrixXd sys =
                    pd.rho * Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(cst.size()),
                                                       static_cast<Eigen::Index>(cst.size())) -
                    block_of(c);
                deg[c] = q;
                eta_block[c] = sys.partialPivLu().solve(g);
            }
        }

        Eigen::VectorXd eta = Eigen::VectorXd::Zero(n);
        for (const auto& [c, blockvals] : eta_block) {
            int jm = std::max(0, chain_m[static_cast<size_t>(c)] - 1);
            if (deg[c] != jm) continue;
            const std::vector<int>& cst = mcs.classes[static_cast<size_t>(c)];
            for (size_t i = 0; i < cst.size(); ++i)
                eta[cst[i]] = std::max(0.0, blockvals[static_cast<Eigen::Index>(i)]);
        }
        // snap dust so E is read off support cleanly
        double emax = eta.maxCoeff();
        for (Eigen::Index x = 0; x < n; ++x)
            if (eta[x] < 1e-12 * emax) eta[x] = 0.0;

        DecompositionItem item;
        item.E = item_states;
        std::sort(item.E.begin(), item.E.end());
        for (Eigen::Index x = 0; x < n; ++x) {
            int cx = mcs.class_of[static_cast<size_t>(x)];
            if (cx == c_item || !reach[static_cast<size_t>(cx)][static_cast<size_t>(c_item)])
                item.F.push_back(static_cast<int>(x));
        }

        double scale = v_at_least_one ? nu.sum() : nu.dot(v);
        if (!(scale > 0.0)) throw error("peel_decomposition: degenerate limit measure");
        item.nu = nu / scale;
        item.eta = eta * scale;
        dec.items.push_back(std::move(item));
    }
    std::sort(dec.items.begin(), dec.items.end(),
              [](const DecompositionItem& a, const DecompositionItem& b) {
                  return a.E.front() < b.E.front();
              });
    return dec;
}

std::vector<AlphaEntry> verify_decomposition(const Kernel& p, PeripheralDecomposition& dec,
                                             int n_max) {
    if (n_max < 1) throw error("verify_decomposition: n_max must be >= 1");
    const Eigen::Index n = p.size();
    const Eigen::VectorXd& v = p.space().weights;
    const double r = dec.r;
    const int d = dec.d;
    Eigen::MatrixXd phat = p.entries() / r;

    // Limit operators L_k(x,y) = sum_i eta_i(x) (nu_i phat^k)(y).
    std::vector<Eigen::MatrixXd> limit(static_cast<size_t>(d));
    for (int k = 0; k < d; ++k) limit[static_cast<size_t>(k)] = Eigen::MatrixXd::Zero(n, n);
    for (const DecompositionItem& item : dec.items) {
        Eigen::VectorXd nuk = item.nu;
        for (int k = 0; k < d; ++k) {
            limit[static_cast<size_t>(k)] += item.eta * nuk.transpose();
            nuk = phat.transpose() * nuk;
        }
    }

    std::vector<AlphaEntry> out;
    Eigen::MatrixXd z = Eigen::MatrixXd::Identity(n, n);
    const long m_last = static_cast<long>(n_max) * d + (d - 1);
    for (long m = 1; m <= m_last; ++m) {
        z = z * phat;
        if (m < d) continue;
        int nn = static_cast<int>(m / d);
        int k = static_cast<int>(m % d);
        double alpha = 0.0;
        for (Eigen::Index x = 0; x < n; ++x) {
            double grow = std::pow(static_cast<double>(m), dec.j[static_cast<size_t>(x)]);
            double row = 0.0;
            for (Eigen::Index y = 0; y < n; ++y)
                row += std::abs(z(x, y) / grow - limit[static_cast<size_t>(k)](x, y)) * v[y];
            alpha = std::max(alpha, row / v[x]);
        }
        out.push_back(AlphaEntry{nn, k, alpha});
    }
    dec.alpha = out;
    return out;
}

bool is_totally_irreducible(const Kernel& p) {
    ClassStructure cs = class_structure(p);
    const int ncomp = cs.num_classes();
    // classes reachable (in >= 1 steps) from each class
    std::vector<std::vector<char>> creach(static_cast<size_t>(ncomp),
                                          std::vector<char>(static_cast<size_t>(ncomp), 0));
    for (int c = ncomp - 1; c >= 0; --c) {
        if (cs.period[static_cast<size_t>(c)] > 0)  // class carries a cycle
            creach[static_cast<size_t>(c)][static_cast<size_t>(c)] = 1;
        for (int b : cs.dag[static_cast<size_t>(c)]) {
            creach[static_cast<size_t>(c)][static_cast<size_t>(b)] = 1;
            for (int t = 0; t < ncomp; ++t)
                if (creach[static_cast<size_t>(b)][static_cast<size_t>(t)])
                    creach[static_cast<size_t>(c)][static_cast<size_t>(t)] = 1;
        }
    }
    std::vector<char> union_set(static_cast<size_t>(ncomp), 0),
        inter_set(static_cast<size_t>(ncomp), 1);
    for (size_t x = 0; x < cs.class_of.size(); ++x) {
        const auto& row = creach[static_cast<size_t>(cs.class_of[x])];
        for (int t = 0; t < ncomp; ++t) {
            union_set[static_cast<size_t>(t)] |= row[static_cast<size_t>(t)];
            inter_set[static_cast<size_t>(t)] &= row[static_cast<size_t>(t)];
        }
    }
    return union_set == inter_set;
}

}  // namespace perispec
