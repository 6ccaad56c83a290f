#pragma once

// Static (possibly time-varying) nonlinearities p = phi(t, q) and the sector
// machinery used to certify them.

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "pkgain/io.hpp"
#include "pkgain/polytope.hpp"
#include "pkgain/qp.hpp"

namespace pkgain {

struct Nonlinearity {
    std::function<VectorXd(double, const VectorXd&)> eval;
    Index nq = 0;
    Index np = 0;
    std::string tag;

    [[nodiscard]] VectorXd operator()(double t, const VectorXd& q) const { return eval(t, q); }
    [[nodiscard]] VectorXd operator()(const VectorXd& q) const { return eval(0.0, q); }
};

Nonlinearity zero_nonlinearity(Index nq, Index np);
Nonlinearity linear_nonlinearity(const MatrixXd& K);
/// q -> sum of the two maps (same dimensions).
Nonlinearity operator+(const Nonlinearity& a, const Nonlinearity& b);
/// q -> Post * phi(Pre * q)
Nonlinearity compose(const MatrixXd& Post, const Nonlinearity& phi, const MatrixXd& Pre);

/// Scalar sector (a, b) stored as 1x1 matrices, or a MIMO sector (A, B) with
/// symmetric A < B.
struct SectorSpec {
    MatrixXd a;
    MatrixXd b;

    static SectorSpec scalar(double a, double b);
    static SectorSpec matrix(const MatrixXd& A, const MatrixXd& B);

    [[nodiscard]] bool is_scalar() const { return a.rows() == 1 && a.cols() == 1; }
    [[nodiscard]] MatrixXd c() const { return 0.5 * (a + b); }
    [[nodiscard]] MatrixXd r() const { return 0.5 * (b - a); }
    /// c (scalar sectors) or C applied to dim-n signals.
    [[nodiscard]] MatrixXd center_matrix(Index n) const;
    /// Largest radius, i.e. the contraction constant of the centred map.
    [[nodiscard]] double radius() const;
    /// (phi - a q)'(phi - b q) <= 0
    [[nodiscard]] bool satisfied(const VectorXd& q, const VectorXd& p, double tol = 0.0) const;
};

struct AsymptoticCertificate {
    SectorSpec sector;
    double M = 0.0;
    double L = 0.0;
    double k = 0.0;
};

struct Centered {
    Nonlinearity psi;
    MatrixXd c;
    MatrixXd r;
};

/// psi(t, q) = phi(t, q) - C q. With `scale_by_r_inverse` the returned map is
/// (phi - C) o R^{-1}.
Centered center(const SectorSpec& spec, const Nonlinearity& phi, bool scale_by_r_inverse = false);
/// phi = psi + C q
Nonlinearity uncenter(const Nonlinearity& psi, const MatrixXd& C);

struct SectorViolation {
    VectorXd q;
    VectorXd p;
    bool inside_threshold = false;  // |q| <= M with |phi(q)| > L
};

/// Sampling-based falsification, not a proof: log-spaced magnitudes in
/// (M, factor * M] along random directions, uniform random points in the
/// same range, and samples with |q| <= M checked against L. Norms are
/// |.|_inf.
struct AsymptoticReport {
    std::size_t samples = 0;
    std::vector<SectorViolation> violations;
    [[nodiscard]] bool falsified() const { return !violations.empty(); }
};

AsymptoticReport verify_asymptotic(const Nonlinearity& phi, const SectorSpec& spec, double M, double L,
                                   std::size_t sample_budget = 10000, unsigned seed = 1, double range_factor = 100.0);

// --- Piecewise-affine maps ---------------------------------------------------

/// phi(x) = L x + b for x in {x : Hr x <= hr}.
struct AffinePiece {
    MatrixXd Hr;
    VectorXd hr;
    MatrixXd L;
    VectorXd b;
    [[nodiscard]] bool contains(const VectorXd& x, double tol = 1e-9) const;
};

/// First piece containing x; throws when none does.
VectorXd eval_pieces(const std::vector<AffinePiece>& pieces, const VectorXd& x);
Nonlinearity pwa_nonlinearity(std::vector<AffinePiece> pieces);

struct PolytopeBound {
    std::vector<VectorXd> B_prime;   // vertices of B'
    std::vector<VectorXd> B_square;  // vertices of co(B' u -B')
    MatrixXd T;                      // |y|_square = |T y|_inf
    double k = 0.0;                  // valid constant: |phi(x)|_square <= |Sx|_inf + k
    double k_total = 0.0;            // k2 + k3 + k1 k4 (stated in |.|_inf)
    double k1 = 0, k2 = 0, k3 = 0, k4 = 0;
    bool used_polytope_images = false;  // B' also holds b_i + L_i Q_i
};

/// B' = co(u_i L_i(B_tri n C_i)) where C_i is the recession cone of piece i
/// and B_tri = {|S x|_inf <= 1}. Requires dim <= 3. When that hull spans
/// less than the whole space (phi bounded in some direction) the images
/// b_i + L_i Q_i of the polytope parts are added.
PolytopeBound pwa_polytope_bound(const std::vector<AffinePiece>& pieces, const MatrixXd& S);

// --- Library ---------------------------------------------------------------

/// Builds a nonlinearity from {"name": ..., params...}.
Nonlinearity make_nonlinearity(const Json& spec);

Nonlinearity two_attractor(double a = 10.0, double k = 10.0, double rho = 0.3);
Nonlinearity chua(double alpha = 8.3, double rho = 0.25);
Nonlinearity mimo_attractor(const VectorXd& a = Eigen::Vector3d(0.1, 0.2, 0.3),
                            const VectorXd& rho = Eigen::Vector3d(0.1, 0.2, 0.3),
                            const VectorXd& c = Eigen::Vector3d(2.0, 3.0, 4.0));
/// Unit saturation on every channel: sign(q) min(|q|, level).
Nonlinearity clip(Index n, double level = 1.0);
Nonlinearity qp_nonlinearity(const MatrixXd& H, const MatrixXd& L, const VectorXd& b);
Nonlinearity gauge_saturation_nonlinearity(const Polytope& P);
/// p = sum_i mu_i(q) q_i with mu = softmax(W q).
Nonlinearity convex_combination(const MatrixXd& W);

/// The Example-7 projection data: L, b of the feasible polyhedron.
void example7_qp(MatrixXd& L, VectorXd& b);

std::vector<AffinePiece> pieces_from_json(const Json& j);
Json pieces_to_json(const std::vector<AffinePiece>& pieces);

}  // namespace pkgain
