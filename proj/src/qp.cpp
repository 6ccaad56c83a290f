#include "pkgain/qp.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>

namespace pkgain {

namespace {

Eigen::LLT<MatrixXd> factor_spd(const MatrixXd& H) {
    if (H.rows() != H.cols()) throw DimensionError("qp: H must be square");
    if ((H - H.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, H.cwiseAbs().maxCoeff()))
        throw NotPositiveDefiniteError("qp: H is not symmetric");
    Eigen::LLT<MatrixXd> llt(H);
    if (llt.info() != Eigen::Success) throw NotPositiveDefiniteError("qp: H is not positive definite");
    return llt;
}

// Solves the equality-constrained step problem
//   min 1/2 (v+p)'H(v+p) - (v+p)'x  s.t.  L_W p = 0
// returning p and the multipliers of W.
void eqp(const MatrixXd& H, const MatrixXd& LW, const VectorXd& g, VectorXd& p, VectorXd& mu) {
    const Index n = H.rows(), k = LW.rows();
    MatrixXd K = MatrixXd::Zero(n + k, n + k);
    K.topLeftCorner(n, n) = H;
    K.topRightCorner(n, k) = LW.transpose();
    K.bottomLeftCorner(k, n) = LW;
    VectorXd rhs = VectorXd::Zero(n + k);
    rhs.head(n) = -g;
    const VectorXd sol = K.fullPivLu().solve(rhs);
    p = sol.head(n);
    mu = sol.tail(k);
}

}  // namespace

QpSolution qp_projection(const MatrixXd& H, const MatrixXd& L, const VectorXd& b, const VectorXd& x) {
    const Index n = H.rows(), m = L.rows();
    factor_spd(H);
    if (L.cols() != n || b.size() != m || x.size() != n) throw DimensionError("qp: dimension mismatch");
    if ((b.array() < 0).any()) throw std::invalid_argument("qp: b must be nonnegative so that v = 0 is feasible");

    const double scale = std::max({1.0, x.cwiseAbs().maxCoeff(), b.size() ? b.cwiseAbs().maxCoeff() : 0.0});
    const double tol = 1e-12 * scale;
    QpSolution s;
    s.v = VectorXd::Zero(n);
    s.lambda = VectorXd::Zero(m);
    std::vector<Index>& W = s.active;

    const int max_iter = static_cast<int>(50 * (m + n + 1));
    for (s.iterations = 0; s.iterations < max_iter; ++s.iterations) {
        MatrixXd LW(static_cast<Index>(W.size()), n);
        for (std::size_t k = 0; k < W.size(); ++k) LW.row(static_cast<Index>(k)) = L.row(W[k]);
        VectorXd p, mu;
        eqp(H, LW, H * s.v - x, p, mu);

        if (p.cwiseAbs().maxCoeff() <= tol) {
            Index worst = -1;
            double most_negative = -1e-12 * scale;
            for (std::size_t k = 0; k < W.size(); ++k)
                if (mu(static_cast<Index>(k)) < most_negative) {
                    most_negative = mu(static_cast<Index>(k));
                    worst = static_cast<Index>(k);
                }
            if (worst < 0) {
                s.lambda.setZero();
                for (std::size_t k = 0; k < W.size(); ++k) s.lambda(W[k]) = std::max(0.0, mu(static_cast<Index>(k)));
                return s;
            }
            W.erase(W.begin() + worst);
            continue;
        }

        double alpha = 1.0;
        Index blocking = -1;
        for (Index i = 0; i < m; ++i) {
            if (std::find(W.begin(), W.end(), i) != W.end()) continue;
            const double lp = L.row(i).dot(p);
            if (lp <= tol) continue;
            const double step = std::max(0.0, (b(i) - L.row(i).dot(s.v)) / lp);
            if (step < alpha - 1e-15) {
                alpha = step;
                blocking = i;
            }
        }
        s.v += alpha * p;
        if (blocking >= 0) {
            W.push_back(blocking);
            std::sort(W.begin(), W.end());
        }
    }
    throw std::runtime_error("qp: active-set iteration did not terminate");
}

double kkt_residual(const MatrixXd& H, const MatrixXd& L, const VectorXd& b, const VectorXd& x, const QpSolution& s) {
    double r = (H * s.v - x + L.transpose() * s.lambda).cwiseAbs().maxCoeff();
    if (L.rows() > 0) {
        const VectorXd slack = L * s.v - b;
        r = std::max(r, slack.cwiseMax(0.0).maxCoeff());
        r = std::max(r, (-s.lambda).cwiseMax(0.0).maxCoeff());
        r = std::max(r, s.lambda.cwiseProduct(slack).cwiseAbs().maxCoeff());
    }
    return r;
}

AffineMap face_projection(const std::vector<Index>& I, const MatrixXd& L, const VectorXd& b, const MatrixXd& H) {
    const Index n = H.rows();
    const auto llt = factor_spd(H);
    const MatrixXd Hinv = llt.solve(MatrixXd::Identity(n, n));
    AffineMap a{Hinv, VectorXd::Zero(n)};
    if (I.empty()) return a;
    MatrixXd LI(static_cast<Index>(I.size()), n);
    VectorXd bI(static_cast<Index>(I.size()));
    for (std::size_t k = 0; k < I.size(); ++k) {
        LI.row(static_cast<Index>(k)) = L.row(I[k]);
        bI(static_cast<Index>(k)) = b(I[k]);
    }
    Eigen::FullPivLU<MatrixXd> rank(LI);
    if (rank.rank() < LI.rows()) throw DimensionError("face_projection: active rows are linearly dependent");
    const MatrixXd W = LI * Hinv * LI.transpose();
    const Eigen::LDLT<MatrixXd> Wf(W);
    a.M = Hinv - Hinv * LI.transpose() * Wf.solve(LI * Hinv);
    a.c = Hinv * LI.transpose() * Wf.solve(bI);
    return a;
}

}  // namespace pkgain
