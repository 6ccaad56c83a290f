#pragma once

// Small dense convex QPs  min 1/2 v'Hv - v'x  s.t.  L v <= b.

#include <vector>

#include "pkgain/lti.hpp"

namespace pkgain {

class NotPositiveDefiniteError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct QpSolution {
    VectorXd v;
    VectorXd lambda;            // one multiplier per constraint row
    std::vector<Index> active;  // working set at termination
    int iterations = 0;
};

/// Primal active-set method started from v = 0, which is feasible because
/// b >= 0. Ties are broken by the lowest constraint index.
QpSolution qp_projection(const MatrixXd& H, const MatrixXd& L, const VectorXd& b, const VectorXd& x);

/// max of stationarity, primal feasibility, dual feasibility and
/// complementarity violations.
double kkt_residual(const MatrixXd& H, const MatrixXd& L, const VectorXd& b, const VectorXd& x, const QpSolution& s);

/// phi(x) = M x + c on the region where the face {L_I v = b_I} is optimal.
struct AffineMap {
    MatrixXd M;
    VectorXd c;
    [[nodiscard]] VectorXd operator()(const VectorXd& x) const { return M * x + c; }
};

AffineMap face_projection(const std::vector<Index>& I, const MatrixXd& L, const VectorXd& b, const MatrixXd& H);

}  // namespace pkgain
