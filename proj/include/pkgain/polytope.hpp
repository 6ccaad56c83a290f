#pragma once

// Low-dimensional (n <= 3) polytopes: vertex/facet enumeration, hulls and
// gauge functions.

#include <vector>

#include "pkgain/lti.hpp"

namespace pkgain {

class GeometryError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr Index kMaxPolytopeDim = 3;

/// Bounded polytope {x : H x <= h} together with its vertex list.
struct Polytope {
    MatrixXd H;
    VectorXd h;
    std::vector<VectorXd> vertices;

    [[nodiscard]] Index dim() const { return H.cols(); }

    static Polytope from_halfspaces(const MatrixXd& H, const VectorXd& h);
    /// Convex hull; the hull must be full-dimensional.
    static Polytope from_vertices(const std::vector<VectorXd>& points);
    /// {x : |T x|_inf <= 1}
    static Polytope from_norm_matrix(const MatrixXd& T);
    static Polytope box(Index n);

    [[nodiscard]] bool contains(const VectorXd& x, double tol = 1e-10) const;
    /// Minkowski functional; needs 0 in the interior (all h > 0).
    [[nodiscard]] double gauge(const VectorXd& x) const;
    [[nodiscard]] bool has_interior_origin() const;
};

/// Vertices of {x : H x <= h} (bounded or not: only the extreme points).
std::vector<VectorXd> enumerate_vertices(const MatrixXd& H, const VectorXd& h, double tol = 1e-9);

/// Extreme points of a finite point set (full-dimensional hull required for facets).
std::vector<VectorXd> hull_vertices(const std::vector<VectorXd>& points, double tol = 1e-9);

/// Facets {a_i x <= c_i} of the convex hull, normalised with ||a_i||_inf = 1.
void hull_facets(const std::vector<VectorXd>& points, MatrixXd& A, VectorXd& c, double tol = 1e-9);

/// For a centrally symmetric polytope with 0 inside, returns T with
/// P = {x : |T x|_inf <= 1}: one row per facet pair, first nonzero entry
/// positive, rows sorted lexicographically in decreasing order.
MatrixXd symmetric_gauge_matrix(const std::vector<VectorXd>& points, double tol = 1e-9);

/// Extreme rays of the pointed cone {x : H x <= 0}.
std::vector<VectorXd> cone_rays(const MatrixXd& H, double tol = 1e-9);

/// x scaled back onto the boundary of P along its ray when outside.
VectorXd gauge_saturation(const Polytope& P, const VectorXd& x);

}  // namespace pkgain
