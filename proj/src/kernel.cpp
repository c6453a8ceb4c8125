#include "perispec/kernel.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

namespace perispec {

namespace {

void require_square(const Eigen::MatrixXd& m, const char* who) {
    if (m.rows() != m.cols())
        throw error(std::string(who) + ": matrix must be square, got " +
                    std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
}

}  // namespace

Kernel::Kernel(WeightedSpace space, Eigen::MatrixXd entries)
    : space_(std::move(space)), entries_(std::move(entries)) {
    require_square(entries_, "Kernel");
    if (entries_.rows() != space_.size())
        throw error("Kernel: matrix dimension " + std::to_string(entries_.rows()) +
                    " does not match space size " + std::to_string(space_.size()));
    for (Eigen::Index i = 0; i < entries_.rows(); ++i)
        for (Eigen::Index j = 0; j < entries_.cols(); ++j) {
            double v = entries_(i, j);
            if (v < 0.0 || !std::isfinite(v))
                throw error("Kernel: entry (" + std::to_string(i) + "," + std::to_string(j) +
                            ") must be nonnegative and finite, got " + std::to_string(v));
        }
}

Eigen::VectorXd Kernel::apply(const Eigen::VectorXd& f) const {
    if (f.size() != entries_.rows()) throw error("Kernel::apply: dimension mismatch");
    return entries_ * f;
}

Eigen::VectorXd Kernel::apply_left(const Eigen::VectorXd& mu) const {
    if (mu.size() != entries_.rows()) throw error("Kernel::apply_left: dimension mismatch");
    return entries_.transpose() * mu;
}

double weighted_norm(const Kernel& p) {
    const Eigen::VectorXd& v = p.space().weights;
    return ((p.entries() * v).cwiseQuotient(v)).maxCoeff();
}

double weighted_norm(const SignedKernel& r) {
    require_square(r.entries, "weighted_norm");
    if (r.entries.rows() != r.space.size()) throw error("weighted_norm: space mismatch");
    const Eigen::VectorXd& v = r.space.weights;
    return ((r.entries.cwiseAbs() * v).cwiseQuotient(v)).maxCoeff();
}

Kernel positive_part(const SignedKernel& r) {
    return Kernel(r.space, r.entries.cwiseMax(0.0));
}

Kernel meet(const Kernel& a, const Kernel& b) {
    if (!a.space().same_as(b.space())) throw error("meet: kernels live on different spaces");
    return Kernel(a.space(), a.entries().cwiseMin(b.entries()));
}

double spectral_radius_matrix(const Eigen::MatrixXd& m) {
    require_square(m, "spectral_radius");
    const Eigen::Index n = m.rows();
    if (n == 0) throw error("spectral_radius: empty matrix");
    if (n == 1) return std::abs(m(0, 0));
    if (n <= 2000) {
        Eigen::EigenSolver<Eigen::MatrixXd> es(m, /*computeEigenvectors=*/false);
        if (es.info() != Eigen::Success) throw error("spectral_radius: eigensolver failed");
        return es.eigenvalues().cwiseAbs().maxCoeff();
    }
    // Shifted power iteration: for nonnegative m, r(m + sI) = r(m) + s and the
    // shift removes rotating peripheral eigenvalues.
    double scale = m.cwiseAbs().rowwise().sum().maxCoeff();
    if (scale == 0.0) return 0.0;
    const double shift = scale;
    Eigen::VectorXd x = Eigen::VectorXd::Ones(n);
    double lambda = 0.0;
    for (int it = 0; it < 20000; ++it) {
        Eigen::VectorXd y = m * x + shift * x;
        double norm = y.norm();
        if (norm == 0.0) return 0.0;
        y /= norm;
        double next = y.dot(m * y + shift * y);
        if (std::abs(next - lambda) <= 1e-14 * std::abs(next) && it > 50) {
            lambda = next;
            break;
        }
        lambda = next;
        x = y;
    }
    return std::max(0.0, lambda - shift);
}

double spectral_radius(const Kernel& p) { return spectral_radius_matrix(p.entries()); }

double second_modulus_ratio(const Kernel& p) {
    const Eigen::Index n = p.size();
    if (n == 1) return 0.0;
    Eigen::EigenSolver<Eigen::MatrixXd> es(p.entries(), false);
    if (es.info() != Eigen::Success) throw error("second_modulus_ratio: eigensolver failed");
    Eigen::VectorXd mods = es.eigenvalues().cwiseAbs();
    double r = mods.maxCoeff();
    if (r <= 0.0) return 0.0;
    double second = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
        if (mods[i] <= r * (1.0 - 1e-9)) second = std::max(second, mods[i]);
    return second / r;
}

DoobTransform doob_transform(const Kernel& p, const Eigen::VectorXd& eta, double lambda,
                             double tol) {
    const Eigen::Index n = p.size();
    if (eta.size() != n) throw error("doob_transform: eta dimension mismatch");
    if (!(lambda > 0.0)) throw error("doob_transform: lambda must be positive");
    double etamax = eta.maxCoeff();
    if (eta.minCoeff() < -tol * std::max(1.0, etamax))
        throw error("doob_transform: eta has negative entries");
    if (etamax <= 0.0) throw error("doob_transform: eta vanishes everywhere");

    std::vector<int> support;
    for (Eigen::Index i = 0; i < n; ++i)
        if (eta[i] > 0.0) support.push_back(static_cast<int>(i));

    // eigen-relation check on the support
    Eigen::VectorXd resid = p.entries() * eta - lambda * eta;
    for (int idx : support) {
        if (std::abs(resid[idx]) > tol * lambda * std::max(etamax, eta[idx]))
            throw error("doob_transform: eigen-relation residual " +
                        std::to_string(std::abs(resid[idx])) + " at state " + std::to_string(idx) +
                        " exceeds tolerance");
    }

    const Eigen::Index m = static_cast<Eigen::Index>(support.size());
    Eigen::MatrixXd t(m, m);
    Eigen::VectorXd w(m);
    std::vector<std::string> labels(static_cast<size_t>(m));
    for (Eigen::Index a = 0; a < m; ++a) {
        int x = support[static_cast<size_t>(a)];
        w[a] = p.space().weights[x] / eta[x];
        labels[static_cast<size_t>(a)] = p.space().labels[static_cast<size_t>(x)];
        for (Eigen::Index b = 0; b < m; ++b) {
            int y = support[static_cast<size_t>(b)];
            t(a, b) = p.entries()(x, y) * eta[y] / (lambda * eta[x]);
        }
    }
    return DoobTransform{Kernel(WeightedSpace(std::move(labels), w), std::move(t)), support};
}

Kernel v_transform(const Kernel& p) {
    double norm = weighted_norm(p);
    if (norm <= 0.0) throw error("v_transform: zero kernel");
    const Eigen::VectorXd& v = p.space().weights;
    Eigen::MatrixXd out = p.entries();
    const Eigen::Index n = out.rows();
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < out.cols(); ++j) out(i, j) *= v[j] / (v[i] * norm);
    return Kernel(WeightedSpace::dense(n), std::move(out));
}

CountableModelSpec killed_lazy_walk(double p_up, double q_down, double laziness,
                                    double weight_ratio) {
    if (p_up < 0 || q_down < 0 || laziness < 0 || p_up + q_down + laziness > 1.0 + 1e-12)
        throw error("killed_lazy_walk: probabilities must be nonnegative with sum <= 1");
    CountableModelSpec model;
    model.up = [p_up](long) { return p_up; };
    model.down = [q_down](long) { return q_down; };
    model.stay = [laziness](long) { return laziness; };
    if (weight_ratio != 1.0)
        model.weight = [weight_ratio](long x) {
            return std::pow(weight_ratio, static_cast<double>(x) / 2.0);
        };
    return model;
}

Kernel truncate(const CountableModelSpec& model, long n_states) {
    if (n_states < 2) throw error("truncate: window must hold at least 2 states");
    if (n_states < model.min_states)
        throw error("truncate: window " + std::to_string(n_states) +
                    " below the model's minimal support " + std::to_string(model.min_states));
    const Eigen::Index n = static_cast<Eigen::Index>(n_states);
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
    Eigen::VectorXd v(n);
    for (long x = 0; x < n_states; ++x) {
        double up = model.up(x), down = model.down(x), stay = model.stay(x);
        if (up < 0 || down < 0 || stay < 0 || up + down + stay > 1.0 + 1e-12)
            throw error("truncate: row " + std::to_string(x) +
                        " has invalid probabilities (sum " + std::to_string(up + down + stay) +
                        ")");
        if (x + 1 < n_states) m(x, x + 1) = up;  // out-of-window mass is killed
        if (x - 1 >= 0) m(x, x - 1) = down;      // down from 0 is killed
        m(x, x) = stay;
        v[x] = model.weight ? model.weight(x) : 1.0;
        if (!(v[x] > 0.0) || !std::isfinite(v[x]))
            throw error("truncate: weight at state " + std::to_string(x) + " is not positive");
    }
    return Kernel(WeightedSpace::dense(v), std::move(m));
}

}  // namespace perispec
