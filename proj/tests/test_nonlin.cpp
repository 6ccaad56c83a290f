#include <doctest.h>

#include <cmath>
#include <random>

#include "pkgain/nonlin.hpp"
#include "support.hpp"

using namespace testing;

namespace {

// Brute-force Euclidean projection on a grid.
Eigen::Vector2d grid_projection(const MatrixXd& L, const VectorXd& b, const Eigen::Vector2d& x, double lo, double hi,
                                double step) {
    Eigen::Vector2d best(0, 0);
    double dbest = 1e300;
    for (double v1 = lo; v1 <= hi; v1 += step)
        for (double v2 = lo; v2 <= hi; v2 += step) {
            const Eigen::Vector2d v(v1, v2);
            if (((L * v - b).array() > 1e-12).any()) continue;
            const double d = (v - x).squaredNorm();
            if (d < dbest) dbest = d, best = v;
        }
    return best;
}

bool same_point_set(const std::vector<VectorXd>& a, const std::vector<VectorXd>& b, double tol = 1e-9) {
    if (a.size() != b.size()) return false;
    for (const auto& x : a) {
        bool found = false;
        for (const auto& y : b) found = found || (x - y).cwiseAbs().maxCoeff() < tol;
        if (!found) return false;
    }
    return true;
}

std::vector<AffinePiece> clipping_pieces() {
    // For each coordinate: below -1, inside, above 1.
    std::vector<AffinePiece> out;
    for (int s1 = -1; s1 <= 1; ++s1)
        for (int s2 = -1; s2 <= 1; ++s2) {
            const int s[2] = {s1, s2};
            std::vector<std::pair<Eigen::RowVector2d, double>> rows;
            MatrixXd L = MatrixXd::Zero(2, 2);
            VectorXd b = VectorXd::Zero(2);
            for (int i = 0; i < 2; ++i) {
                Eigen::RowVector2d e = Eigen::RowVector2d::Zero();
                e(i) = 1;
                if (s[i] == 0) {
                    rows.push_back({e, 1});
                    rows.push_back({-e, 1});
                    L(i, i) = 1;
                } else {
                    rows.push_back({-s[i] * e, -1});
                    b(i) = s[i];
                }
            }
            MatrixXd H(rows.size(), 2);
            VectorXd h(rows.size());
            for (std::size_t r = 0; r < rows.size(); ++r) H.row(r) = rows[r].first, h(r) = rows[r].second;
            out.push_back({H, h, L, b});
        }
    return out;
}

}  // namespace

TEST_CASE("qp projection: interior points are fixed") {
    MatrixXd L;
    VectorXd b;
    example7_qp(L, b);
    const Eigen::Vector2d x(1.0, 0.5);
    const auto s = qp_projection(MatrixXd::Identity(2, 2), L, b, x);
    CHECK((s.v - x).norm() < 1e-12);
    CHECK(s.active.empty());
}

TEST_CASE("qp projection of (-1,-1) agrees with a grid search") {
    MatrixXd L;
    VectorXd b;
    example7_qp(L, b);
    const Eigen::Vector2d x(-1, -1);
    const auto s = qp_projection(MatrixXd::Identity(2, 2), L, b, x);
    const Eigen::Vector2d g = grid_projection(L, b, x, -2, 2, 2e-3);
    CHECK((s.v - g).cwiseAbs().maxCoeff() < 3e-3);
    CHECK(s.v.norm() < 1e-12);  // the nearest feasible point is the origin
    // (0, -0.5) violates x1 + x2 >= 0
    CHECK(((L * Eigen::Vector2d(0, -0.5) - b).array() > 0).any());
}

TEST_CASE("qp projection matches grid search at random points") {
    MatrixXd L;
    VectorXd b;
    example7_qp(L, b);
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> U(-4, 4);
    for (int k = 0; k < 5; ++k) {
        const Eigen::Vector2d x(U(rng), U(rng));
        const auto s = qp_projection(MatrixXd::Identity(2, 2), L, b, x);
        const Eigen::Vector2d g = grid_projection(L, b, x, -2, 6, 1e-2);
        CHECK((s.v - x).norm() <= (g - x).norm() + 1e-12);
        CHECK((s.v - g).cwiseAbs().maxCoeff() < 2e-2);
    }
}

TEST_CASE("qp projection: KKT and sector property on 10^4 samples") {
    MatrixXd L;
    VectorXd b;
    example7_qp(L, b);
    std::mt19937 rng(11);
    std::normal_distribution<double> N(0, 10);
    for (int trial = 0; trial < 4; ++trial) {
        const MatrixXd R = random_matrix(rng, 2, 2);
        const MatrixXd H = trial == 0 ? MatrixXd(MatrixXd::Identity(2, 2)) : MatrixXd(R * R.transpose() + 0.3 * MatrixXd::Identity(2, 2));
        double worst_kkt = 0, worst_sector = -1e300, worst_feas = -1e300;
        for (int k = 0; k < 2500; ++k) {
            const Eigen::Vector2d x(N(rng), N(rng));
            const auto s = qp_projection(H, L, b, x);
            worst_kkt = std::max(worst_kkt, kkt_residual(H, L, b, x, s));
            worst_sector = std::max(worst_sector, s.v.dot(H * s.v - x));
            worst_feas = std::max(worst_feas, (L * s.v - b).maxCoeff());
        }
        CHECK(worst_kkt < 1e-8);
        CHECK(worst_sector <= 1e-10);
        CHECK(worst_feas <= 1e-10);
    }
}

TEST_CASE("qp projection rejects bad data") {
    MatrixXd L;
    VectorXd b;
    example7_qp(L, b);
    CHECK_THROWS_AS(qp_projection(mat({{1, 0}, {0, -1}}), L, b, Eigen::Vector2d(1, 1)), NotPositiveDefiniteError);
    VectorXd bneg = b;
    bneg(0) = -1;
    CHECK_THROWS(qp_projection(MatrixXd::Identity(2, 2), L, bneg, Eigen::Vector2d(1, 1)));
}

TEST_CASE("face projections F1 and F2") {
    MatrixXd L;
    VectorXd b;
    example7_qp(L, b);
    const auto f1 = face_projection({0}, L, b, MatrixXd::Identity(2, 2));
    CHECK((f1.M - mat({{.5, .5}, {.5, .5}})).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((f1.c - Eigen::Vector2d(1.5, -1.5)).cwiseAbs().maxCoeff() < 1e-14);
    const auto f2 = face_projection({2}, L, b, MatrixXd::Identity(2, 2));
    CHECK((f2.M - mat({{0, 0}, {0, 1}})).cwiseAbs().maxCoeff() < 1e-14);
    CHECK(f2.c.cwiseAbs().maxCoeff() < 1e-14);
    // agreement with the QP where the face is optimal
    CHECK((f1(Eigen::Vector2d(5, -1)) - qp_projection(MatrixXd::Identity(2, 2), L, b, Eigen::Vector2d(5, -1)).v).norm() < 1e-12);
    CHECK((f2(Eigen::Vector2d(-3, 2)) - qp_projection(MatrixXd::Identity(2, 2), L, b, Eigen::Vector2d(-3, 2)).v).norm() < 1e-12);
    CHECK_THROWS_AS(face_projection({0, 0}, L, b, MatrixXd::Identity(2, 2)), DimensionError);
}

TEST_CASE("hand-derived pieces reproduce the QP everywhere") {
    MatrixXd L;
    VectorXd b;
    example7_qp(L, b);
    const auto pieces = example7_pieces();
    std::mt19937 rng(5);
    std::normal_distribution<double> N(0, 5);
    double worst = 0;
    for (int k = 0; k < 10000; ++k) {
        const Eigen::Vector2d x(N(rng), N(rng));
        worst = std::max(worst, (eval_pieces(pieces, x) - qp_projection(MatrixXd::Identity(2, 2), L, b, x).v).norm());
    }
    CHECK(worst < 1e-9);
}

TEST_CASE("polytope pipeline on the projection example") {
    const auto pb = pwa_polytope_bound(example7_pieces(), example7_S());
    CHECK_FALSE(pb.used_polytope_images);
    CHECK(same_point_set(pb.B_prime, {Eigen::Vector2d(0, 0), Eigen::Vector2d(0, 1), Eigen::Vector2d(1, 1)}));
    CHECK(same_point_set(pb.B_square, {Eigen::Vector2d(-1, -1), Eigen::Vector2d(0, 1), Eigen::Vector2d(1, 1),
                                       Eigen::Vector2d(0, -1)}));
    REQUIRE(pb.T.rows() == 2);
    CHECK((pb.T - mat({{2, -1}, {0, 1}})).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(pb.k > 0);
    CHECK(pb.k_total > 0);

    MatrixXd L;
    VectorXd b;
    example7_qp(L, b);
    const MatrixXd S = example7_S();
    std::mt19937 rng(17);
    std::normal_distribution<double> N(0, 1);
    std::uniform_real_distribution<double> E(-2, 6);
    double worst = -1e300;
    for (int k = 0; k < 10000; ++k) {
        Eigen::Vector2d x(N(rng), N(rng));
        x *= std::pow(10.0, E(rng));
        const VectorXd p = qp_projection(MatrixXd::Identity(2, 2), L, b, x).v;
        const double slack = (pb.T * p).cwiseAbs().maxCoeff() - (S * x).cwiseAbs().maxCoeff() - pb.k;
        worst = std::max(worst, slack / (1.0 + x.cwiseAbs().maxCoeff()));
    }
    CHECK(worst <= 1e-12);
}

TEST_CASE("polytope pipeline: identity and clipping") {
    const std::vector<AffinePiece> id{{MatrixXd(0, 2), VectorXd(0), MatrixXd::Identity(2, 2), VectorXd::Zero(2)}};
    const auto pi = pwa_polytope_bound(id, MatrixXd::Identity(2, 2));
    CHECK(same_point_set(pi.B_square, Polytope::box(2).vertices));
    CHECK(pi.k == doctest::Approx(0.0));

    const auto pc = pwa_polytope_bound(clipping_pieces(), MatrixXd::Identity(2, 2));
    CHECK(pc.used_polytope_images);
    CHECK(same_point_set(pc.B_prime, Polytope::box(2).vertices));
    CHECK((pc.T.cwiseAbs() - MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-12);

    const auto phi = clip(2);
    std::mt19937 rng(2);
    std::normal_distribution<double> N(0, 3);
    for (int k = 0; k < 1000; ++k) {
        const Eigen::Vector2d x(N(rng), N(rng));
        CHECK((eval_pieces(clipping_pieces(), x) - phi(x)).norm() < 1e-12);
    }
}

TEST_CASE("polytope pipeline rejects higher dimensions") {
    std::vector<AffinePiece> p{{MatrixXd(0, 4), VectorXd(0), MatrixXd::Identity(4, 4), VectorXd::Zero(4)}};
    CHECK_THROWS_AS(pwa_polytope_bound(p, MatrixXd::Identity(4, 4)), GeometryError);
}

TEST_CASE("gauge saturation") {
    const Polytope P = Polytope::from_norm_matrix(mat({{2, -1}, {0, 1}}));
    const auto sat = gauge_saturation_nonlinearity(P);
    std::mt19937 rng(8);
    std::normal_distribution<double> N(0, 4);
    for (int k = 0; k < 2000; ++k) {
        const Eigen::Vector2d x(N(rng), N(rng));
        const VectorXd y = sat(x);
        CHECK(P.gauge(y) <= 1 + 1e-12);
        if (P.gauge(x) <= 1) CHECK((y - x).norm() < 1e-14);
        else {
            CHECK(P.gauge(y) == doctest::Approx(1.0).epsilon(1e-12));
            CHECK(std::abs(x(0) * y(1) - x(1) * y(0)) < 1e-10 * (1 + x.squaredNorm()));
            CHECK(x.dot(y) > 0);
        }
    }
    CHECK(P.gauge(Eigen::Vector2d(1, 1)) == doctest::Approx(1.0));
    CHECK(P.gauge(Eigen::Vector2d(0.5, 0)) == doctest::Approx(1.0));
}

TEST_CASE("attractor nonlinearities") {
    const VectorXd z = VectorXd::Zero(3);
    CHECK(two_attractor()(z).norm() == 0.0);
    CHECK(chua()(z).norm() == 0.0);
    CHECK(mimo_attractor()(z).norm() == 0.0);

    // asymptotic slopes
    Eigen::Vector3d q(0, 0, 1e7);
    CHECK(two_attractor()(q)(0) / 1e7 == doctest::Approx(0.3).epsilon(1e-5));
    q = Eigen::Vector3d(1e7, 0, 0);
    CHECK(chua()(q)(0) / 1e7 == doctest::Approx(8.3 * 0.25).epsilon(1e-5));
    const VectorXd p = mimo_attractor()(Eigen::Vector3d(1e7, -1e7, 1e7));
    CHECK(p(0) / 1e7 == doctest::Approx(0.1).epsilon(1e-5));
    CHECK(p(1) / -1e7 == doctest::Approx(0.2).epsilon(1e-5));
    CHECK(p(2) / 1e7 == doctest::Approx(0.3).epsilon(1e-5));

    // odd symmetry
    const Eigen::Vector3d w(0.3, -0.7, 1.1);
    CHECK((mimo_attractor()(w) + mimo_attractor()(-w)).norm() < 1e-15);
}

TEST_CASE("mimo attractor: largest slope per component") {
    const auto phi = mimo_attractor();
    double peak[3] = {0, 0, 0};
    for (int k = 1; k <= 200000; ++k) {
        const double s = 1e-4 * k;
        const VectorXd p = phi(Eigen::Vector3d(s, s, s));
        for (int i = 0; i < 3; ++i) peak[i] = std::max(peak[i], p(i) / s);
    }
    // the common sector slope quoted for this system is 1.17
    CHECK(std::max({peak[0], peak[1], peak[2]}) == doctest::Approx(1.17).epsilon(0.005));
    CHECK(peak[0] == doctest::Approx(1.1692).epsilon(1e-3));
    CHECK(peak[1] == doctest::Approx(1.1430).epsilon(1e-3));
    CHECK(peak[2] == doctest::Approx(1.0662).epsilon(1e-3));
}

TEST_CASE("asymptotic sector verification") {
    const Nonlinearity phi{[](double, const VectorXd& q) {
                               return VectorXd::Constant(1, 10 * std::tanh(10 * q(0)) + 0.3 * q(0));
                           },
                           1, 1, "scalar"};
    const auto spec = SectorSpec::scalar(0.3 - 1.0 / 3.0, 0.3 + 1.0 / 3.0);
    CHECK_FALSE(verify_asymptotic(phi, spec, 30, 19).falsified());
    const auto low_M = verify_asymptotic(phi, spec, 20, 19);
    CHECK(low_M.falsified());
    CHECK_FALSE(low_M.violations.front().inside_threshold);
    const auto low_L = verify_asymptotic(phi, spec, 30, 15);
    CHECK(low_L.falsified());
    CHECK(low_L.samples == 10000);

    // the two-attractor map in its tight sector
    const auto two = two_attractor();
    const auto s3 = SectorSpec::scalar(0.0, 0.3 + 1.0 / 3.0);
    const Nonlinearity scalar_part = compose(mat({{1, 0, 0}}), two, mat({{0}, {0}, {1}}));
    CHECK_FALSE(verify_asymptotic(scalar_part, s3, 30, 19).falsified());
}

TEST_CASE("sector specs and centering") {
    const auto s = SectorSpec::scalar(-1, 3);
    CHECK(s.c()(0, 0) == 1);
    CHECK(s.radius() == 2);
    CHECK_THROWS(SectorSpec::scalar(2, 1));
    CHECK_THROWS(SectorSpec::matrix(MatrixXd::Identity(2, 2), MatrixXd::Identity(2, 2)));

    const auto spec = SectorSpec::scalar(0.3 - 1.0 / 3.0, 0.3 + 1.0 / 3.0);
    const Nonlinearity phi{[](double, const VectorXd& q) { return VectorXd((0.3 + 0.3 * q.array().sin()) * q.array()); },
                           2, 2, "wavy"};
    const auto c = center(spec, phi);
    const auto back = uncenter(c.psi, c.c);
    const auto scaled = center(spec, phi, true);
    std::mt19937 rng(4);
    std::normal_distribution<double> N(0, 10);
    for (int k = 0; k < 200; ++k) {
        const Eigen::Vector2d q(N(rng), N(rng));
        CHECK((back(q) - phi(q)).norm() < 1e-12 * (1 + q.norm()));
        CHECK(spec.satisfied(q, phi(q), 1e-12));
        // centred map lies in sect(-r, r), the scaled one is a contraction
        CHECK(c.psi(q).cwiseAbs().maxCoeff() <= (1.0 / 3.0) * q.cwiseAbs().maxCoeff() + 1e-12);
        CHECK(scaled.psi(q).cwiseAbs().maxCoeff() <= q.cwiseAbs().maxCoeff() + 1e-12);
    }

    const MatrixXd A = mat({{0, 0}, {0, 0}}), B = mat({{2, 0}, {0, 1}});
    const auto m = SectorSpec::matrix(A, B);
    CHECK(m.radius() == doctest::Approx(1.0));
    CHECK(m.satisfied(Eigen::Vector2d(1, 1), Eigen::Vector2d(1, 0.5)));
    CHECK_FALSE(m.satisfied(Eigen::Vector2d(1, 1), Eigen::Vector2d(3, 0.5)));
}

TEST_CASE("convex combination is a polyhedral nonlinearity") {
    std::mt19937 rng(21);
    std::normal_distribution<double> N(0, 5);
    for (int trial = 0; trial < 5; ++trial) {
        const auto phi = convex_combination(random_matrix(rng, 3, 3, 2.0));
        for (int k = 0; k < 2000; ++k) {
            const Eigen::Vector3d q(N(rng), N(rng), N(rng));
            CHECK(phi(q).cwiseAbs().sum() <= q.cwiseAbs().maxCoeff() + 1e-12);
        }
    }
}

TEST_CASE("nonlinearities from JSON") {
    const auto phi = make_nonlinearity(Json::parse(R"({"name": "two_attractor", "a": 5})"));
    CHECK(phi(Eigen::Vector3d(0, 0, 1))(0) == doctest::Approx(5 * std::tanh(10.0) + 0.3));
    CHECK_THROWS_AS(make_nonlinearity(Json::parse(R"({"name": "two_attractor", "b": 5})")), SchemaError);
    CHECK_THROWS_AS(make_nonlinearity(Json::parse(R"({"name": "nope"})")), SchemaError);

    const auto pieces = example7_pieces();
    const auto again = pieces_from_json(pieces_to_json(pieces));
    REQUIRE(again.size() == pieces.size());
    for (std::size_t i = 0; i < pieces.size(); ++i) {
        CHECK(again[i].Hr == pieces[i].Hr);
        CHECK(again[i].L == pieces[i].L);
        CHECK(again[i].b == pieces[i].b);
    }
    Json j{{"name", "pwa"}, {"pieces", pieces_to_json(pieces)}};
    CHECK((make_nonlinearity(j)(Eigen::Vector2d(-1, -1))).norm() < 1e-12);
    Json q{{"name", "qp"}, {"H", matrix_to_json(MatrixXd::Identity(2, 2))}, {"L", matrix_to_json(example7_pieces()[0].Hr)},
           {"b", vector_to_json(example7_pieces()[0].hr)}};
    CHECK((make_nonlinearity(q)(Eigen::Vector2d(5, -1)) - Eigen::Vector2d(3.5, 0.5)).norm() < 1e-12);
}
