#include <doctest.h>

#include <perispec/certify.hpp>

#include <random>

#include "oracles.hpp"

using namespace perispec;

namespace {

Kernel make(const Eigen::MatrixXd& m) { return Kernel(WeightedSpace::dense(m.rows()), m); }

Kernel make(const Eigen::MatrixXd& m, const Eigen::VectorXd& v) {
    return Kernel(WeightedSpace::dense(v), m);
}

Eigen::MatrixXd lazy_uniform(Eigen::Index n, double move, double stay) {
    return Eigen::MatrixXd::Constant(n, n, move / static_cast<double>(n)) +
           stay * Eigen::MatrixXd::Identity(n, n);
}

}  // namespace

TEST_CASE("entrywise domination certificate") {
    Eigen::MatrixXd id = Eigen::MatrixXd::Identity(3, 3);
    Kernel p = make(id);

    SUBCASE("P <= K + 0 with K = P: valid, residual radius zero") {
        Certificate cert = check_domination(p, p, make(Eigen::MatrixXd::Zero(3, 3)));
        CHECK(cert.valid);
        CHECK(cert.parameters.at("r_ess_upper") == 0.0);
        CHECK(cert.parameters.at("norm_s") == 0.0);
        CHECK(cert.margin == doctest::Approx(1.0));
    }
    SUBCASE("violated entry is named") {
        Kernel half = make(0.5 * id);
        Certificate cert = check_domination(p, half, make(Eigen::MatrixXd::Zero(3, 3)));
        CHECK_FALSE(cert.valid);
        CHECK(cert.note.find("violated at (0,0)") != std::string::npos);
    }
    SUBCASE("rank of the compact part is recorded") {
        Eigen::MatrixXd rank1 = Eigen::MatrixXd::Constant(3, 3, 0.4);
        Certificate cert =
            check_domination(make(Eigen::MatrixXd::Constant(3, 3, 0.3)), make(rank1),
                             make(Eigen::MatrixXd::Zero(3, 3)));
        CHECK(cert.valid);
        CHECK(cert.parameters.at("rank_k") == 1.0);
    }
}

TEST_CASE("order domination transfers bounds from the larger kernel") {
    // same chain with more killing is entrywise below the original
    Kernel p = make(lazy_uniform(6, 0.5, 0.25));
    Kernel q = make(lazy_uniform(6, 0.5, 0.3));
    Certificate cert = check_order_domination(p, q);
    CHECK(cert.valid);
    CHECK(cert.parameters.at("r_p") <= cert.parameters.at("r_q") + 1e-12);

    // the transferred bound is exactly the certificate bound of Q
    std::vector<int> all{0, 1, 2, 3, 4, 5};
    Certificate q_cert = lyapunov_certificate(q, all, q);
    CHECK(q_cert.valid);
    CHECK(q_cert.parameters.at("r_ess_upper") == 0.0);

    Certificate reversed = check_order_domination(q, p);
    CHECK_FALSE(reversed.valid);
    CHECK(reversed.note.find("violated") != std::string::npos);
}

TEST_CASE("expansion remainder bound matches the word-enumeration oracle") {
    std::mt19937_64 eng(211);
    for (int trial = 0; trial < 20; ++trial) {
        Eigen::Index dim = 2 + static_cast<Eigen::Index>(eng() % 5);
        Eigen::VectorXd v = Eigen::VectorXd::Ones(dim);
        Eigen::MatrixXd pm = oracles::random_nonnegative(eng, dim);
        Eigen::MatrixXd sm = oracles::random_nonnegative(eng, dim);
        Kernel p = make(pm, v);
        Kernel s = make(sm, v);
        Eigen::MatrixXd a = (pm - sm).cwiseMax(0.0);
        Eigen::MatrixXd b = pm.cwiseMin(sm);
        // exact split P = A + B underlies the expansion
        REQUIRE((a + b - pm).cwiseAbs().maxCoeff() <= 1e-15);

        for (int n = 3; n <= 6; ++n) {
            ExpansionBound out = expansion_bound_check(p, s, n);
            CHECK(out.holds);
            CHECK(out.slack >= -1e-10 * std::max(1.0, out.rhs));
            auto groups = oracles::word_groups(a, b, n);
            Eigen::MatrixXd low = groups[0] + groups[1] + groups[2];
            CHECK((low - out.low_words).cwiseAbs().maxCoeff() <= 1e-12);
            // the remainder words are exactly the complement within P^n
            Eigen::MatrixXd pn = Eigen::MatrixXd::Identity(dim, dim);
            for (int i = 0; i < n; ++i) pn = pn * pm;
            CHECK((low + groups[3] - pn).cwiseAbs().maxCoeff() <= 1e-10);
        }
        for (int n = 7; n <= 10; ++n) CHECK(expansion_bound_check(p, s, n).holds);
    }
}

TEST_CASE("drift constant over the window complement") {
    Eigen::VectorXd v(4);
    v << 1.0, 2.0, 4.0, 8.0;
    Eigen::MatrixXd m(4, 4);
    m << 0.1, 0.2, 0.0, 0.0,  //
        0.3, 0.1, 0.1, 0.0,   //
        0.0, 0.4, 0.1, 0.1,   //
        0.0, 0.0, 0.4, 0.2;
    Kernel p = make(m, v);

    SUBCASE("window covering everything leaves no drift to bound") {
        CHECK(check_global_drift(p, {0, 1, 2, 3}) == 0.0);
    }
    SUBCASE("empty window takes the sup over all states") {
        double best = 0.0;
        Eigen::VectorXd pv = m * v;
        for (int x = 0; x < 4; ++x) best = std::max(best, pv[x] / v[x]);
        CHECK(check_global_drift(p, {}) == doctest::Approx(best).epsilon(1e-15));
    }
    SUBCASE("enlarging the window never increases the constant") {
        double base = check_global_drift(p, {});
        double one = check_global_drift(p, {1});
        double two = check_global_drift(p, {1, 3});
        CHECK(one <= base + 1e-15);
        CHECK(two <= one + 1e-15);
    }
    SUBCASE("invalid window states are rejected by name") {
        CHECK_THROWS_WITH_AS(check_global_drift(p, {7}),
                             doctest::Contains("state 7"), error);
        CHECK_THROWS_AS(check_global_drift(p, {1, 1}), error);
    }
}

TEST_CASE("local domination constant on the window") {
    Eigen::VectorXd v(3);
    v << 1.0, 1.5, 2.0;
    Eigen::MatrixXd m(3, 3);
    m << 0.2, 0.3, 0.1, 0.1, 0.2, 0.3, 0.4, 0.1, 0.2;
    Kernel p = make(m, v);
    std::vector<int> ek{0, 2};

    CHECK(check_local_domination(p, ek, p) == 0.0);
    double expect = 0.0;
    Eigen::VectorXd pv = m * v;
    for (int x : ek) expect = std::max(expect, pv[x] / v[x]);
    CHECK(check_local_domination(p, ek, make(Eigen::MatrixXd::Zero(3, 3), v)) ==
          doctest::Approx(expect).epsilon(1e-15));

    // replacing K by a larger kernel never increases the constant
    std::mt19937_64 eng(223);
    for (int trial = 0; trial < 10; ++trial) {
        Eigen::MatrixXd k1 = oracles::random_nonnegative(eng, 3);
        Eigen::MatrixXd k2 = k1 + oracles::random_nonnegative(eng, 3, 0.5, 0.2);
        double t1 = check_local_domination(p, ek, make(k1, v));
        double t2 = check_local_domination(p, ek, make(k2, v));
        CHECK(t2 <= t1 + 1e-15);
    }
}

TEST_CASE("combined drift certificate records a faithful witness") {
    std::mt19937_64 eng(227);
    for (int trial = 0; trial < 25; ++trial) {
        Eigen::Index n = 3 + static_cast<Eigen::Index>(eng() % 5);
        Eigen::VectorXd v(n);
        std::uniform_real_distribution<double> unif(0.5, 3.0);
        for (Eigen::Index i = 0; i < n; ++i) v[i] = unif(eng);
        Kernel p = make(oracles::random_nonnegative(eng, n), v);
        std::vector<int> ek;
        for (Eigen::Index i = 0; i < n; ++i)
            if (eng() % 2) ek.push_back(static_cast<int>(i));
        // compact part: the window rows themselves, randomly thinned
        Eigen::MatrixXd k_entries = Eigen::MatrixXd::Zero(n, n);
        for (int x : ek) k_entries.row(x) = p.entries().row(x) * (eng() % 2 ? 1.0 : 0.5);
        Kernel k(p.space(), k_entries);

        Certificate cert = lyapunov_certificate(p, ek, k);
        double theta1 = cert.parameters.at("theta1");
        double theta2 = cert.parameters.at("theta2");
        double upper = cert.parameters.at("r_ess_upper");
        CHECK(upper == doctest::Approx(std::max(theta1, theta2)).epsilon(1e-15));

        // reconstruct the witness S = P off the window, (P-K)_+ on it
        Eigen::MatrixXd s = p.entries();
        for (int x : ek) s.row(x) = (p.entries().row(x) - k_entries.row(x)).cwiseMax(0.0);
        double norm_s = weighted_norm(Kernel(p.space(), s));
        CHECK(cert.parameters.at("norm_s") == doctest::Approx(norm_s).epsilon(1e-12));
        CHECK(norm_s <= upper * (1 + 1e-12));
        // P <= K_masked + S entrywise
        Eigen::MatrixXd k_masked = Eigen::MatrixXd::Zero(n, n);
        for (int x : ek) k_masked.row(x) = k_entries.row(x);
        CHECK(((k_masked + s - p.entries()).minCoeff()) >= -1e-15);
        // validity is exactly the strict comparison against r(P)
        double r_p = cert.parameters.at("r_p");
        CHECK(cert.valid == (theta1 < r_p && theta2 < r_p));
    }
}

TEST_CASE("vacuous drift certificate reports invalid instead of failing") {
    // K = 0 and full-space window: theta2 = ||P|| >= r(P)
    Kernel p = make(lazy_uniform(4, 0.5, 0.3));
    std::vector<int> all{0, 1, 2, 3};
    Certificate cert = lyapunov_certificate(p, all, make(Eigen::MatrixXd::Zero(4, 4)));
    CHECK_FALSE(cert.valid);
    CHECK(cert.note.find("need max(theta1, theta2)") != std::string::npos);
}

TEST_CASE("eigenvalue lower bound from a nonnegative test function") {
    SUBCASE("row-stochastic kernel with the constant function") {
        Eigen::MatrixXd m(3, 3);
        m << 0.2, 0.5, 0.3, 0.1, 0.1, 0.8, 0.4, 0.4, 0.2;
        Certificate cert = spectral_lower_bound(make(m), Eigen::VectorXd::Ones(3));
        CHECK(cert.parameters.at("r_lower") == doctest::Approx(1.0).epsilon(1e-15));
        CHECK(cert.valid);
    }
    SUBCASE("constant function on a killed chain bounds by the worst row mass") {
        Kernel p = make(lazy_uniform(5, 0.5, 0.3));  // row sums 0.8
        Certificate cert = spectral_lower_bound(p, Eigen::VectorXd::Ones(5));
        CHECK(cert.parameters.at("r_lower") == doctest::Approx(0.8).epsilon(1e-12));
    }
    SUBCASE("exact eigenfunction recovers the radius") {
        std::mt19937_64 eng(229);
        Eigen::MatrixXd m = oracles::random_nonnegative(eng, 5, 1.0, 0.9);
        // positive matrix: its dominant eigenvector is strictly positive
        Eigen::MatrixXd mm = m + Eigen::MatrixXd::Constant(5, 5, 0.05);
        Eigen::VectorXd phi = Eigen::VectorXd::Ones(5);
        for (int it = 0; it < 3000; ++it) {
            phi = mm * phi;
            phi /= phi.maxCoeff();
        }
        double r = oracles::eigen_radius(mm);
        Certificate cert = spectral_lower_bound(make(mm), phi);
        CHECK(cert.parameters.at("r_lower") == doctest::Approx(r).epsilon(1e-10));
        CHECK(cert.parameters.at("r_lower") <= r * (1 + 1e-12));
    }
    SUBCASE("negative test functions are rejected by state") {
        Eigen::VectorXd phi(3);
        phi << 1.0, -0.5, 1.0;
        CHECK_THROWS_WITH_AS(spectral_lower_bound(make(Eigen::MatrixXd::Identity(3, 3)), phi),
                             doctest::Contains("state 1"), error);
    }
}

TEST_CASE("localized iterate certificate") {
    Kernel p = make(lazy_uniform(6, 0.5, 0.3));
    std::vector<int> ek{0, 1, 2};
    const Eigen::Index n = 6;

    SUBCASE("window-masked kernel as its own localizer: theta = theta1 * |P|") {
        Eigen::MatrixXd g = p.entries();
        for (Eigen::Index y = 0; y < n; ++y)
            if (y > 2) g.col(y).setZero();
        Certificate cert = localized_g_certificate(p, ek, Kernel(p.space(), g), 1, 0.0);
        double theta1 = cert.parameters.at("theta1");
        double norm_p = weighted_norm(p);
        CHECK(cert.parameters.at("theta") == doctest::Approx(theta1 * norm_p).epsilon(1e-12));
        double r_p = cert.parameters.at("r_p");
        CHECK(cert.valid == (theta1 * norm_p < r_p * r_p));
    }
    SUBCASE("huge allowance never helps: the bound grows past the radius") {
        Certificate cert = localized_g_certificate(
            p, ek, Kernel(p.space(), Eigen::MatrixXd::Zero(n, n)), 1, 50.0);
        CHECK_FALSE(cert.valid);
    }
    SUBCASE("violated window bound is reported") {
        Certificate cert = localized_g_certificate(
            p, ek, Kernel(p.space(), Eigen::MatrixXd::Zero(n, n)), 1, 0.0);
        CHECK_FALSE(cert.valid);
        CHECK(cert.note.find("window bound fails") != std::string::npos);
    }
}

TEST_CASE("truncated-moment certificate") {
    // killed walk weighted by sqrt(3)^x on {0..11}
    CountableModelSpec model = killed_lazy_walk(0.2, 0.6, 0.2, 3.0);  // V(x) = 3^{x/2}
    Kernel p = truncate(model, 12);
    std::vector<int> ek{0, 1, 2, 3, 4};
    const Eigen::VectorXd& v = p.space().weights;

    SUBCASE("level above every weight kills the tail term") {
        Certificate cert = localized_moment_certificate(
            p, ek, Kernel(p.space(), p.entries()), v.maxCoeff() + 1.0, 0.0);
        CHECK(cert.parameters.at("tail") == 0.0);
        CHECK(cert.parameters.at("theta2") == cert.parameters.at("theta4"));
    }
    SUBCASE("level below every weight makes the tail the whole drift") {
        Eigen::VectorXd pv = p.entries() * v;
        double drift = 0.0;
        for (int x : ek) drift = std::max(drift, pv[x] / v[x]);
        Certificate cert = localized_moment_certificate(
            p, ek, Kernel(p.space(), Eigen::MatrixXd::Zero(12, 12)), 0.5 * v.minCoeff(), 0.0);
        CHECK(cert.parameters.at("tail") == doctest::Approx(drift).epsilon(1e-15));
    }
    SUBCASE("tail term matches the closed-form geometric value") {
        // level = V(3): within the window only states 3 and 4 see mass above
        // the level; the up-move contributes 0.2*sqrt(3), the stay at 4 adds 0.2
        double level = v[3];
        Certificate cert = localized_moment_certificate(
            p, ek, Kernel(p.space(), Eigen::MatrixXd::Zero(12, 12)), level, 1.0);
        double expect = 0.2 * std::sqrt(3.0) + 0.2;
        CHECK(cert.parameters.at("tail") == doctest::Approx(expect).epsilon(1e-10));
    }
}

TEST_CASE("density-threshold certificate") {
    const Eigen::Index n = 8;
    Kernel p = make(lazy_uniform(n, 0.5, 0.3));
    Eigen::VectorXd nu = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
    // density against the uniform base measure: p(x,y) = P(x,y) * n
    Eigen::MatrixXd density = p.entries() * static_cast<double>(n);
    std::vector<int> all;
    for (Eigen::Index i = 0; i < n; ++i) all.push_back(static_cast<int>(i));

    SUBCASE("bounded density reaches any positive target") {
        Certificate cert =
            density_certificate(p, density, nu, all, DensityVariant::RestrictedColumns, 1e-9);
        CHECK(cert.parameters.at("t_b") <= 1e-9);
        // full window: theta1 = 0, so the product form holds strictly
        CHECK(cert.valid);
        CHECK(cert.parameters.at("theta1_norm_p") == 0.0);
        CHECK(cert.parameters.at("iterate_form_valid") == 1.0);
    }
    SUBCASE("smallest sufficient threshold shrinks as the target relaxes") {
        Certificate tight =
            density_certificate(p, density, nu, all, DensityVariant::RestrictedColumns, 1e-9);
        Certificate loose =
            density_certificate(p, density, nu, all, DensityVariant::RestrictedColumns, 0.3);
        CHECK(loose.parameters.at("b") <= tight.parameters.at("b") + 1e-15);
    }
    SUBCASE("reconstruction mismatch is reported, not certified") {
        Eigen::MatrixXd wrong = density;
        wrong(2, 3) *= 1.5;
        Certificate cert =
            density_certificate(p, wrong, nu, all, DensityVariant::RestrictedColumns, 1e-6);
        CHECK_FALSE(cert.valid);
        CHECK(cert.note.find("reconstruction") != std::string::npos);
        CHECK(cert.note.find("(2,3)") != std::string::npos);
    }
    SUBCASE("truncated-columns variant delegates to the moment certificate") {
        Eigen::VectorXd v = Eigen::VectorXd::Ones(n);
        v.tail(3) << 4.0, 8.0, 16.0;
        Kernel pw = make(lazy_uniform(n, 0.5, 0.2), v);
        Eigen::MatrixXd dw = pw.entries() * static_cast<double>(n);
        std::vector<int> ek{0, 1, 2, 3, 4};
        Certificate cert = density_certificate(pw, dw, nu, ek,
                                               DensityVariant::TruncatedColumns, 0.05, 2.0);
        CHECK(cert.parameters.count("theta2") == 1);
        CHECK(cert.parameters.at("level_a") == 2.0);
        CHECK(cert.parameters.at("t_b") <= 0.05);
    }
}
