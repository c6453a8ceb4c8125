#include "perispec/weighted_space.hpp"

#include <unordered_set>

namespace perispec {

WeightedSpace::WeightedSpace(std::vector<std::string> labels_, Eigen::VectorXd weights_)
    : labels(std::move(labels_)), weights(std::move(weights_)) {
    if (static_cast<Eigen::Index>(labels.size()) != weights.size())
        throw error("WeightedSpace: " + std::to_string(labels.size()) + " labels for " +
                    std::to_string(weights.size()) + " weights");
    if (weights.size() == 0) throw error("WeightedSpace: empty state space");
    for (Eigen::Index i = 0; i < weights.size(); ++i) {
        if (!(weights[i] > 0.0) || !std::isfinite(weights[i]))
            throw error("WeightedSpace: weight at state " + std::to_string(i) +
                        " must be positive and finite, got " + std::to_string(weights[i]));
    }
    std::unordered_set<std::string> seen;
    for (const auto& lab : labels) {
        if (!seen.insert(lab).second)
            throw error("WeightedSpace: duplicate state label '" + lab + "'");
    }
}

WeightedSpace WeightedSpace::dense(Eigen::Index n) {
    return dense(Eigen::VectorXd::Ones(n));
}

WeightedSpace WeightedSpace::dense(const Eigen::VectorXd& v) {
    std::vector<std::string> labels(static_cast<size_t>(v.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) labels[static_cast<size_t>(i)] = std::to_string(i);
    return WeightedSpace(std::move(labels), v);
}

double WeightedSpace::function_norm(const Eigen::VectorXd& f) const {
    if (f.size() != weights.size())
        throw error("function_norm: dimension mismatch (" + std::to_string(f.size()) + " vs " +
                    std::to_string(weights.size()) + ")");
    return (f.cwiseAbs().cwiseQuotient(weights)).maxCoeff();
}

double WeightedSpace::measure_norm(const Eigen::VectorXd& mu) const {
    if (mu.size() != weights.size())
        throw error("measure_norm: dimension mismatch (" + std::to_string(mu.size()) + " vs " +
                    std::to_string(weights.size()) + ")");
    return mu.cwiseAbs().dot(weights);
}

bool WeightedSpace::same_as(const WeightedSpace& other) const {
    return labels == other.labels && weights.size() == other.weights.size() &&
           weights == other.weights;
}

}  // namespace perispec
