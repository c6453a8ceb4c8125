#include <doctest.h>

#include <perispec/semigroup.hpp>

#include <random>

#include "oracles.hpp"

using namespace perispec;

namespace {

SubMarkovGenerator gen_of(const Eigen::MatrixXd& rates) {
    return SubMarkovGenerator(WeightedSpace::dense(rates.rows()), rates);
}

SubMarkovGenerator gen_of(const Eigen::MatrixXd& rates, const Eigen::VectorXd& v) {
    return SubMarkovGenerator(WeightedSpace::dense(v), rates);
}

// rates of a random sub-Markov generator, optionally with a reducible split
Eigen::MatrixXd random_rates(std::mt19937_64& eng, Eigen::Index n, bool reducible) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    Eigen::MatrixXd rates(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            rates(i, j) = i == j ? 0.0 : (unif(eng) < 0.6 ? unif(eng) : 0.0);
    if (reducible && n >= 4) rates.block(n / 2, 0, n - n / 2, n / 2).setZero();
    for (Eigen::Index i = 0; i < n; ++i)
        rates(i, i) = -rates.row(i).sum() - 0.3 * unif(eng);  // strict killing
    return rates;
}

}  // namespace

TEST_CASE("generator validation") {
    Eigen::MatrixXd bad(2, 2);
    bad << -1.0, -0.5, 1.0, -1.0;
    CHECK_THROWS_WITH_AS(gen_of(bad), doctest::Contains("(0,1)"), error);

    Eigen::MatrixXd grow(2, 2);
    grow << 0.5, 0.5, 1.0, -1.0;  // row 0 sums to +1: mass creation
    CHECK_THROWS_WITH_AS(gen_of(grow), doctest::Contains("row 0"), error);
}

TEST_CASE("transition operator from the generator") {
    SUBCASE("time zero and the zero generator give the identity") {
        Eigen::MatrixXd rates(2, 2);
        rates << -1.0, 1.0, 1.0, -1.0;
        Kernel p0 = transition(gen_of(rates), 0.0);
        CHECK((p0.entries() - Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() == 0.0);
        Kernel pz = transition(gen_of(Eigen::MatrixXd::Zero(3, 3)), 2.5);
        CHECK((pz.entries() - Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() <= 1e-14);
        CHECK_THROWS_AS(transition(gen_of(rates), -0.1), error);
    }
    SUBCASE("conservative two-state swap has the closed-form exponential") {
        Eigen::MatrixXd rates(2, 2);
        rates << -1.0, 1.0, 1.0, -1.0;
        Kernel p1 = transition(gen_of(rates), 1.0);
        double off = 0.5 * (1.0 - std::exp(-2.0));
        double diag = 0.5 * (1.0 + std::exp(-2.0));
        CHECK(p1.entries()(0, 0) == doctest::Approx(diag).epsilon(1e-10));
        CHECK(p1.entries()(0, 1) == doctest::Approx(off).epsilon(1e-10));
        CHECK(p1.entries()(1, 0) == doctest::Approx(off).epsilon(1e-10));
        CHECK(p1.entries()(1, 1) == doctest::Approx(diag).epsilon(1e-10));
    }
    SUBCASE("matches an independent matrix exponential on random generators") {
        std::mt19937_64 eng(31);
        for (int trial = 0; trial < 10; ++trial) {
            Eigen::Index n = 2 + static_cast<Eigen::Index>(eng() % 6);
            Eigen::MatrixXd rates = random_rates(eng, n, trial % 2 == 0);
            for (double t : {0.3, 1.0, 4.7}) {
                Kernel pt = transition(gen_of(rates), t);
                Eigen::MatrixXd oracle = oracles::expm(rates, t);
                CHECK((pt.entries() - oracle).cwiseAbs().maxCoeff() <= 1e-11);
                CHECK(pt.entries().minCoeff() >= 0.0);
                CHECK(pt.entries().rowwise().sum().maxCoeff() <= 1.0 + 1e-12);
            }
        }
    }
    SUBCASE("long horizons survive the series chunking") {
        Eigen::MatrixXd rates(2, 2);
        rates << -40.0, 40.0, 40.0, -40.0;  // lambda t = 4000 at t = 100
        Kernel pt = transition(gen_of(rates), 100.0);
        CHECK(pt.entries()(0, 0) == doctest::Approx(0.5).epsilon(1e-10));
        CHECK(pt.entries()(0, 1) == doctest::Approx(0.5).epsilon(1e-10));
    }
    SUBCASE("semigroup identity at sampled times") {
        std::mt19937_64 eng(37);
        Eigen::MatrixXd rates = random_rates(eng, 5, true);
        SubMarkovGenerator gen = gen_of(rates);
        const double tol = 1e-12;
        for (auto [s, t] : {std::pair{0.5, 0.5}, {0.3, 1.7}, {2.0, 2.0}}) {
            Kernel whole = transition(gen, s + t, tol);
            Kernel split(whole.space(),
                         transition(gen, s, tol).entries() * transition(gen, t, tol).entries());
            SignedKernel diff{whole.space(), whole.entries() - split.entries()};
            CHECK(weighted_norm(diff) <= 10.0 * tol);
        }
    }
}

TEST_CASE("time-uniform drift constant") {
    SUBCASE("zero generator holds the norm at one") {
        CHECK(check_time_lyapunov(gen_of(Eigen::MatrixXd::Zero(3, 3)), 2.0) ==
              doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("conservative generator with flat weights conserves mass") {
        Eigen::MatrixXd rates(3, 3);
        rates << -2.0, 1.5, 0.5, 1.0, -1.0, 0.0, 0.25, 0.25, -0.5;
        CHECK(check_time_lyapunov(gen_of(rates), 3.0) == doctest::Approx(1.0).epsilon(1e-10));
    }
    SUBCASE("killed birth-death with exponential weights: grid max vs dense refinement") {
        Eigen::Index n = 8;
        Eigen::MatrixXd rates = Eigen::MatrixXd::Zero(n, n);
        for (Eigen::Index x = 0; x < n; ++x) {
            if (x + 1 < n) rates(x, x + 1) = 0.4;
            if (x > 0) rates(x, x - 1) = 0.7;
            rates(x, x) = -(0.4 + 0.7 + 0.1);  // includes killing and edge losses
        }
        Eigen::VectorXd v(n);
        for (Eigen::Index x = 0; x < n; ++x) v[x] = std::pow(1.4, static_cast<double>(x));
        SubMarkovGenerator gen = gen_of(rates, v);
        double c_t = check_time_lyapunov(gen, 2.0);
        // dense refinement of the same supremum
        double dense = 0.0;
        for (int i = 0; i <= 512; ++i)
            dense = std::max(dense, weighted_norm(transition(gen, 2.0 * i / 512.0)));
        CHECK(c_t <= dense + 1e-12);
        CHECK(c_t >= 1.0);  // the grid includes t = 0
        CHECK(dense <= c_t * 1.05);
    }
}

TEST_CASE("continuous-time decomposition is aperiodic with invariant flow") {
    SUBCASE("uniformizable irreducible generator: one law, decreasing error") {
        Eigen::MatrixXd q(3, 3);
        q << 0.0, 0.7, 0.3, 0.5, 0.0, 0.5, 0.2, 0.8, 0.0;  // Markov jump matrix
        Eigen::MatrixXd rates = q - Eigen::MatrixXd::Identity(3, 3);
        SemigroupReport rep = continuous_decomposition(gen_of(rates), 2.0);
        CHECK(rep.dec.d == 1);
        REQUIRE(rep.dec.items.size() == 1);
        for (const auto& [h, res] : rep.flow_residuals) CHECK(res <= 1e-8);
        for (size_t i = 8; i + 1 < rep.alpha_t.size(); ++i)
            CHECK(rep.alpha_t[i + 1].second <= rep.alpha_t[i].second + 1e-9);
        // conservative generator: the single law is the stationary law
        CHECK(rep.r1 == doctest::Approx(1.0).epsilon(1e-10));
    }
    SUBCASE("zero generator decomposes trivially with zero error") {
        SemigroupReport rep = continuous_decomposition(gen_of(Eigen::MatrixXd::Zero(3, 3)), 1.0);
        CHECK(rep.dec.d == 1);
        CHECK(rep.dec.items.size() == 3);
        for (const auto& [t, a] : rep.alpha_t) CHECK(a <= 1e-11);
        for (const auto& [h, res] : rep.flow_residuals) CHECK(res <= 1e-11);
    }
    SUBCASE("two equal-decay blocks keep separate laws, same flow rate") {
        Eigen::MatrixXd rates = Eigen::MatrixXd::Zero(4, 4);
        rates.topLeftCorner(2, 2) << -1.2, 1.0, 1.0, -1.2;
        rates.bottomRightCorner(2, 2) << -1.2, 1.0, 1.0, -1.2;
        SemigroupReport rep = continuous_decomposition(gen_of(rates), 1.5);
        CHECK(rep.dec.d == 1);
        CHECK(rep.dec.items.size() == 2);
        for (const auto& [h, res] : rep.flow_residuals) CHECK(res <= 1e-8);
    }
    SUBCASE("no rotation: peripheral spectrum of P_T is real on random generators") {
        std::mt19937_64 eng(41);
        for (int trial = 0; trial < 10; ++trial) {
            Eigen::Index n = 2 + static_cast<Eigen::Index>(eng() % 6);
            Eigen::MatrixXd rates = random_rates(eng, n, trial % 3 == 0);
            Eigen::MatrixXd pt = transition(gen_of(rates), 1.3).entries();
            Eigen::EigenSolver<Eigen::MatrixXd> es(pt, false);
            double r = 0.0;
            for (Eigen::Index i = 0; i < n; ++i)
                r = std::max(r, std::abs(es.eigenvalues()[i]));
            for (Eigen::Index i = 0; i < n; ++i) {
                if (std::abs(es.eigenvalues()[i]) >= r * (1 - 1e-9))
                    CHECK(std::abs(es.eigenvalues()[i].imag()) <= 1e-9 * std::max(1.0, r));
            }
        }
    }
}

TEST_CASE("quasi-compact structure propagates across horizons") {
    SUBCASE("doubling the horizon is consistent by the semigroup law") {
        std::mt19937_64 eng(43);
        Eigen::MatrixXd rates = random_rates(eng, 5, true);
        PropagationResult res = propagation_check(gen_of(rates), 0.7, 1.4);
        CHECK(res.consistent);
        CHECK(res.r_deviation <= 1e-9);
        CHECK(res.partitions_match);
    }
    SUBCASE("zero generator is trivially consistent") {
        PropagationResult res = propagation_check(gen_of(Eigen::MatrixXd::Zero(3, 3)), 0.5, 1.7);
        CHECK(res.consistent);
    }
    SUBCASE("incommensurate horizons on random reducible generators") {
        std::mt19937_64 eng(47);
        for (int trial = 0; trial < 8; ++trial) {
            Eigen::Index n = 3 + static_cast<Eigen::Index>(eng() % 5);
            Eigen::MatrixXd rates = random_rates(eng, n, true);
            PropagationResult res = propagation_check(gen_of(rates), 0.5, 1.7);
            CAPTURE(trial);
            CHECK(res.consistent);
            // cross-check r(P_{1.7}) against the independent exponential
            double r17 = oracles::eigen_radius(oracles::expm(rates, 1.7));
            double r05 = oracles::eigen_radius(oracles::expm(rates, 0.5));
            CHECK(r17 == doctest::Approx(std::pow(r05, 1.7 / 0.5)).epsilon(1e-8));
        }
    }
    SUBCASE("horizons must be positive") {
        CHECK_THROWS_AS(propagation_check(gen_of(Eigen::MatrixXd::Zero(2, 2)), 0.0, 1.0), error);
    }
}
