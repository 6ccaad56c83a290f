#include "pkgain/polytope.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

namespace pkgain {

namespace {

void check_dim(Index n) {
    if (n < 1 || n > kMaxPolytopeDim)
        throw GeometryError("polytope operations support dimensions 1 to 3, got " + std::to_string(n));
}

void add_unique(std::vector<VectorXd>& pts, const VectorXd& p, double tol) {
    for (const auto& q : pts)
        if ((q - p).cwiseAbs().maxCoeff() <= tol * std::max(1.0, p.cwiseAbs().maxCoeff())) return;
    pts.push_back(p);
}

// Calls f with every size-k subset of {0..n-1}.
void for_each_subset(Index n, Index k, const std::function<void(const std::vector<Index>&)>& f) {
    std::vector<Index> idx(static_cast<std::size_t>(k));
    std::function<void(Index, Index)> rec = [&](Index start, Index depth) {
        if (depth == k) {
            f(idx);
            return;
        }
        for (Index i = start; i < n; ++i) {
            idx[static_cast<std::size_t>(depth)] = i;
            rec(i + 1, depth + 1);
        }
    };
    rec(0, 0);
}

Index affine_rank(const std::vector<VectorXd>& pts, double tol) {
    if (pts.size() < 2) return 0;
    MatrixXd D(pts[0].size(), static_cast<Index>(pts.size() - 1));
    for (std::size_t i = 1; i < pts.size(); ++i) D.col(static_cast<Index>(i - 1)) = pts[i] - pts[0];
    Eigen::FullPivLU<MatrixXd> lu(D);
    lu.setThreshold(tol);
    return lu.rank();
}

}  // namespace

std::vector<VectorXd> enumerate_vertices(const MatrixXd& H, const VectorXd& h, double tol) {
    const Index n = H.cols();
    check_dim(n);
    std::vector<VectorXd> verts;
    for_each_subset(H.rows(), n, [&](const std::vector<Index>& rows) {
        MatrixXd M(n, n);
        VectorXd r(n);
        for (Index i = 0; i < n; ++i) {
            M.row(i) = H.row(rows[static_cast<std::size_t>(i)]);
            r(i) = h(rows[static_cast<std::size_t>(i)]);
        }
        Eigen::FullPivLU<MatrixXd> lu(M);
        if (lu.rank() < n) return;
        const VectorXd x = lu.solve(r);
        const double scale = std::max(1.0, x.cwiseAbs().maxCoeff());
        if (((H * x - h).array() <= tol * scale).all()) add_unique(verts, x, tol);
    });
    return verts;
}

void hull_facets(const std::vector<VectorXd>& points, MatrixXd& A, VectorXd& c, double tol) {
    if (points.empty()) throw GeometryError("hull of an empty point set");
    const Index n = points[0].size();
    check_dim(n);
    if (affine_rank(points, tol) < n) throw GeometryError("hull is not full-dimensional");
    std::vector<VectorXd> normals;
    std::vector<double> offsets;
    auto add_facet = [&](VectorXd a, double off) {
        const double s = a.cwiseAbs().maxCoeff();
        a /= s;
        off /= s;
        for (std::size_t k = 0; k < normals.size(); ++k)
            if ((normals[k] - a).cwiseAbs().maxCoeff() <= 1e-9 && std::abs(offsets[k] - off) <= 1e-9 * std::max(1.0, std::abs(off)))
                return;
        normals.push_back(a);
        offsets.push_back(off);
    };
    if (n == 1) {
        double mx = -std::numeric_limits<double>::infinity(), mn = std::numeric_limits<double>::infinity();
        for (const auto& p : points) {
            mx = std::max(mx, p(0));
            mn = std::min(mn, p(0));
        }
        add_facet(VectorXd::Ones(1), mx);
        add_facet(-VectorXd::Ones(1), -mn);
    } else {
        // Every facet is spanned by n affinely independent points with all
        // remaining points on one side.
        for_each_subset(static_cast<Index>(points.size()), n, [&](const std::vector<Index>& idx) {
            const VectorXd& p0 = points[static_cast<std::size_t>(idx[0])];
            MatrixXd D(n - 1, n);
            for (Index i = 1; i < n; ++i) D.row(i - 1) = points[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])] - p0;
            Eigen::FullPivLU<MatrixXd> lu(D);
            lu.setThreshold(tol);
            if (lu.rank() < n - 1) return;
            VectorXd a = lu.kernel().col(0);
            a /= a.cwiseAbs().maxCoeff();
            const double a0 = a.dot(p0);
            double mx = -std::numeric_limits<double>::infinity(), mn = std::numeric_limits<double>::infinity();
            double scale = 1.0;
            for (const auto& p : points) {
                const double v = a.dot(p) - a0;
                mx = std::max(mx, v);
                mn = std::min(mn, v);
                scale = std::max(scale, p.cwiseAbs().maxCoeff());
            }
            if (mx <= tol * scale) add_facet(a, a0);
            else if (mn >= -tol * scale) add_facet(-a, -a0);
        });
    }
    A.resize(static_cast<Index>(normals.size()), n);
    c.resize(static_cast<Index>(normals.size()));
    for (std::size_t k = 0; k < normals.size(); ++k) {
        A.row(static_cast<Index>(k)) = normals[k];
        c(static_cast<Index>(k)) = offsets[k];
    }
}

std::vector<VectorXd> hull_vertices(const std::vector<VectorXd>& points, double tol) {
    MatrixXd A;
    VectorXd c;
    hull_facets(points, A, c, tol);
    return enumerate_vertices(A, c, tol);
}

Polytope Polytope::from_halfspaces(const MatrixXd& H, const VectorXd& h) {
    if (H.rows() != h.size()) throw DimensionError("polytope: H and h disagree");
    Polytope P;
    P.H = H;
    P.h = h;
    P.vertices = enumerate_vertices(H, h);
    if (P.vertices.empty()) throw GeometryError("polytope: empty or unbounded halfspace system");
    // Boundedness: the recession cone {H d <= 0} must be trivial.
    if (!cone_rays(H).empty()) throw GeometryError("polytope: halfspace system is unbounded");
    return P;
}

Polytope Polytope::from_vertices(const std::vector<VectorXd>& points) {
    Polytope P;
    hull_facets(points, P.H, P.h);
    P.vertices = enumerate_vertices(P.H, P.h);
    return P;
}

Polytope Polytope::from_norm_matrix(const MatrixXd& T) {
    MatrixXd H(2 * T.rows(), T.cols());
    H << T, -T;
    return from_halfspaces(H, VectorXd::Ones(2 * T.rows()));
}

Polytope Polytope::box(Index n) { return from_norm_matrix(MatrixXd::Identity(n, n)); }

bool Polytope::contains(const VectorXd& x, double tol) const {
    return ((H * x - h).array() <= tol * (1.0 + h.array().abs())).all();
}

bool Polytope::has_interior_origin() const { return (h.array() > 0).all(); }

double Polytope::gauge(const VectorXd& x) const {
    if (!has_interior_origin()) throw GeometryError("gauge: origin is not interior to the polytope");
    return std::max(0.0, (H * x).cwiseQuotient(h).maxCoeff());
}

std::vector<VectorXd> cone_rays(const MatrixXd& H, double tol) {
    const Index n = H.cols();
    check_dim(n);
    std::vector<VectorXd> rays;
    auto try_ray = [&](VectorXd d) {
        const double s = d.cwiseAbs().maxCoeff();
        if (s <= tol) return;
        d /= s;
        for (VectorXd cand : {d, VectorXd(-d)})
            if (((H * cand).array() <= tol).all()) add_unique(rays, cand, 1e-9);
    };
    if (H.rows() == 0) {
        for (Index i = 0; i < n; ++i) {
            try_ray(VectorXd::Unit(n, i));
        }
        return rays;
    }
    if (n == 1) {
        try_ray(VectorXd::Ones(1));
        return rays;
    }
    // Rays lie on n-1 linearly independent active constraints.
    for_each_subset(H.rows(), n - 1, [&](const std::vector<Index>& rows) {
        MatrixXd M(n - 1, n);
        for (Index i = 0; i < n - 1; ++i) M.row(i) = H.row(rows[static_cast<std::size_t>(i)]);
        Eigen::FullPivLU<MatrixXd> lu(M);
        lu.setThreshold(tol);
        if (lu.rank() < n - 1) return;
        const MatrixXd K = lu.kernel();
        if (K.cols() == 1) try_ray(K.col(0));
    });
    return rays;
}

MatrixXd symmetric_gauge_matrix(const std::vector<VectorXd>& points, double tol) {
    std::vector<VectorXd> sym = points;
    for (const auto& p : points) sym.push_back(-p);
    MatrixXd A;
    VectorXd c;
    hull_facets(sym, A, c, tol);
    std::vector<VectorXd> rows;
    for (Index k = 0; k < A.rows(); ++k) {
        if (c(k) <= tol) throw GeometryError("gauge matrix: origin is not interior");
        VectorXd r = A.row(k).transpose() / c(k);
        Index first = 0;
        while (first < r.size() && std::abs(r(first)) <= tol) ++first;
        if (first < r.size() && r(first) < 0) r = -r;
        add_unique(rows, r, 1e-9);
    }
    std::sort(rows.begin(), rows.end(), [](const VectorXd& a, const VectorXd& b) {
        for (Index i = 0; i < a.size(); ++i) {
            if (std::abs(a(i) - b(i)) > 1e-12) return a(i) > b(i);
        }
        return false;
    });
    MatrixXd T(static_cast<Index>(rows.size()), points[0].size());
    for (std::size_t k = 0; k < rows.size(); ++k) T.row(static_cast<Index>(k)) = rows[k];
    return T;
}

VectorXd gauge_saturation(const Polytope& P, const VectorXd& x) {
    const double mu = P.gauge(x);
    return mu <= 1.0 ? x : VectorXd(x / mu);
}

}  // namespace pkgain
