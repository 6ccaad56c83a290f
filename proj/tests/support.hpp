#pragma once

#include <random>

#include "pkgain/lti.hpp"

namespace testing {

using namespace pkgain;

inline MatrixXd random_matrix(std::mt19937& rng, Index r, Index c, double scale = 1.0) {
    std::normal_distribution<double> N(0.0, scale);
    MatrixXd M(r, c);
    for (Index i = 0; i < r; ++i)
        for (Index j = 0; j < c; ++j) M(i, j) = N(rng);
    return M;
}

// Random A shifted so that its spectral abscissa equals -margin.
inline MatrixXd random_hurwitz(std::mt19937& rng, Index n, double margin = 0.2) {
    MatrixXd A = random_matrix(rng, n, n);
    const double a = spectral_abscissa(A);
    A.diagonal().array() -= a + margin;
    return A;
}

inline System random_stable(std::mt19937& rng, Index n, Index p, Index m, bool with_d = true,
                            double margin = 0.2) {
    return System(random_hurwitz(rng, n, margin), random_matrix(rng, n, m), random_matrix(rng, p, n),
                  with_d ? random_matrix(rng, p, m, 0.5) : MatrixXd::Zero(p, m));
}

inline System first_order(double pole, double gain = 1.0, double d = 0.0) {
    return System(MatrixXd::Constant(1, 1, -pole), MatrixXd::Constant(1, 1, gain),
                  MatrixXd::Ones(1, 1), MatrixXd::Constant(1, 1, d));
}

inline MatrixXd mat(std::initializer_list<std::initializer_list<double>> rows) {
    MatrixXd M(static_cast<Index>(rows.size()), static_cast<Index>(rows.begin()->size()));
    Index i = 0;
    for (const auto& r : rows) {
        Index j = 0;
        for (double v : r) M(i, j++) = v;
        ++i;
    }
    return M;
}

inline double max_abs_diff(const MatrixXcd& a, const MatrixXcd& b) {
    return (a - b).cwiseAbs().maxCoeff();
}

// The MIMO attractor plant with inputs (p, u) and outputs (q, y).
inline Plant mimo_attractor_plant() {
    MatrixXd A = mat({{-2, 8.8, 0}, {1, -1, 1}, {0, -15, 0}});
    MatrixXd B(3, 4);
    B << 5, 0, 0, 1, 0, 0.1, 0, 1, 0, 0, 0.3, 1;
    MatrixXd C(4, 3);
    C << MatrixXd::Identity(3, 3), MatrixXd::Ones(1, 3);
    return Plant(System(A, B, C, MatrixXd::Zero(4, 4)), make_groups({{"p", 3}, {"u", 1}}),
                 make_groups({{"q", 3}, {"y", 1}}));
}

// K*(s) = -0.796 + 0.000352/s + 0.097/(940 s + 1)
inline System kstar_fixture() {
    MatrixXd A = mat({{0, 0}, {0, -1.0 / 940.0}});
    MatrixXd B = mat({{1}, {1}});
    MatrixXd C = mat({{0.000352, 0.097 / 940.0}});
    return System(A, B, C, MatrixXd::Constant(1, 1, -0.796));
}

}  // namespace testing

#include <unsupported/Eigen/MatrixFunctions>

namespace testing {

// Trapezoid rule on |c_i e^{At} b_j| with a fixed step, summed over j, plus |d_ij|.
inline VectorXd trapezoid_row_l1(const System& G, double dt, double horizon) {
    const MatrixXd E = (G.A * dt).exp();
    VectorXd rows = G.D.cwiseAbs().rowwise().sum();
    const long steps = static_cast<long>(std::ceil(horizon / dt));
    for (Index j = 0; j < G.inputs(); ++j) {
        VectorXd x = G.B.col(j);
        VectorXd f = (G.C * x).cwiseAbs();
        VectorXd acc = 0.5 * f;
        for (long k = 1; k < steps; ++k) {
            x = E * x;
            acc += (G.C * x).cwiseAbs();
        }
        x = E * x;
        acc += 0.5 * (G.C * x).cwiseAbs();
        rows += dt * acc;
    }
    return rows;
}

inline double dense_grid_hinf(const System& G, int points, double wmin, double wmax) {
    double best = max_singular_value(G.D.cast<std::complex<double>>());
    for (int k = 0; k <= points; ++k) {
        const double w = wmin * std::pow(wmax / wmin, static_cast<double>(k) / points);
        best = std::max(best, max_singular_value(freq_response(G, w)));
    }
    return std::max(best, max_singular_value(freq_response(G, 0.0)));
}

}  // namespace testing

#include "pkgain/nonlin.hpp"

namespace testing {

// The projection example: x' = A x + B p, q = rho C x.
inline System example7_plant(double rho) {
    return System(mat({{-1, 2}, {0.001, -3}}), mat({{2, -1}, {0, 1}}), rho * mat({{1, 0}, {1, 1}}), MatrixXd::Zero(2, 2));
}

inline MatrixXd example7_T() { return mat({{2, -1}, {0, 1}}); }

// Pieces of the Euclidean projection onto {x1 - x2 <= 3, x1 + x2 >= 0, x1 >= 0, x2 >= -1},
// worked out by hand from the KKT conditions of each face.
inline std::vector<AffinePiece> example7_pieces() {
    MatrixXd L;
    VectorXd b;
    example7_qp(L, b);
    std::vector<AffinePiece> p;
    p.push_back({L, b, MatrixXd::Identity(2, 2), VectorXd::Zero(2)});
    p.push_back({mat({{-1, 1}, {-1, -1}}), Eigen::Vector2d(-3, -1), mat({{.5, .5}, {.5, .5}}), Eigen::Vector2d(1.5, -1.5)});
    p.push_back({mat({{1, 1}, {-1, 1}, {1, -1}}), Eigen::Vector3d(0, 0, 2), mat({{.5, -.5}, {-.5, .5}}), VectorXd::Zero(2)});
    p.push_back({mat({{1, 0}, {0, -1}}), Eigen::Vector2d(0, 0), mat({{0, 0}, {0, 1}}), VectorXd::Zero(2)});
    p.push_back({mat({{0, 1}, {-1, 0}, {1, 0}}), Eigen::Vector3d(-1, -1, 2), mat({{1, 0}, {0, 0}}), Eigen::Vector2d(0, -1)});
    p.push_back({mat({{0, 1}, {1, -1}}), Eigen::Vector2d(0, 0), MatrixXd::Zero(2, 2), VectorXd::Zero(2)});
    p.push_back({mat({{1, 0}, {-1, 1}}), Eigen::Vector2d(1, -2), MatrixXd::Zero(2, 2), Eigen::Vector2d(1, -1)});
    p.push_back({mat({{-1, 0}, {1, 1}}), Eigen::Vector2d(-2, 1), MatrixXd::Zero(2, 2), Eigen::Vector2d(2, -1)});
    return p;
}

inline MatrixXd example7_S() { return mat({{0, 1}, {.5, .5}, {.5, -.5}}); }

// (A, B T^-1, S C): the system measured in the polyhedral norms.
inline System example7_tilde(double rho) {
    const System G = example7_plant(rho);
    return System(G.A, G.B * example7_T().inverse(), example7_S() * G.C, MatrixXd::Zero(3, 2));
}

// Loop shifted to the centre 1/2 of the sector [0, 1].
inline System example7_hat(double rho) {
    const System G = example7_plant(rho);
    return System(G.A + 0.5 * G.B * G.C, 0.5 * G.B, G.C, MatrixXd::Zero(2, 2));
}

}  // namespace testing

namespace testing {

// Delta = (H, Phi) with z = x: inputs (p, w), outputs (q, z).
inline Plant delta_plant(const MatrixXd& A) {
    const Index n = A.rows();
    MatrixXd B(n, 2 * n), C(2 * n, n);
    B << MatrixXd::Identity(n, n), MatrixXd::Identity(n, n);
    C << MatrixXd::Identity(n, n), MatrixXd::Identity(n, n);
    return Plant(System(A, B, C, MatrixXd::Zero(2 * n, 2 * n)), make_groups({{"p", n}, {"w", n}}),
                 make_groups({{"q", n}, {"z", n}}));
}

inline MatrixXd attractor_A(double M = 10, double b1 = 2, double b2 = 3, double b3 = 5) {
    return mat({{-(b1 + b2 + b3), -(b1 * b2 + b1 * b3 + b2 * b3) / M, -b1 * b2 * b3 / M}, {M, 0, 0}, {0, 1, 0}});
}

inline MatrixXd chua_A(double alpha = 8.3, double beta = 16.5) {
    return mat({{-alpha, alpha, 0}, {1, -1, 1}, {0, -beta, 0}});
}

}  // namespace testing
