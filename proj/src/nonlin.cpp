#include "pkgain/nonlin.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <random>

namespace pkgain {

Nonlinearity zero_nonlinearity(Index nq, Index np) {
    return {[np](double, const VectorXd&) { return VectorXd::Zero(np); }, nq, np, "zero"};
}

Nonlinearity linear_nonlinearity(const MatrixXd& K) {
    return {[K](double, const VectorXd& q) { return VectorXd(K * q); }, K.cols(), K.rows(), "linear"};
}

Nonlinearity operator+(const Nonlinearity& a, const Nonlinearity& b) {
    if (a.nq != b.nq || a.np != b.np) throw DimensionError("nonlinearity sum: dimension mismatch");
    auto fa = a.eval, fb = b.eval;
    return {[fa, fb](double t, const VectorXd& q) { return VectorXd(fa(t, q) + fb(t, q)); }, a.nq, a.np,
            a.tag + "+" + b.tag};
}

Nonlinearity compose(const MatrixXd& Post, const Nonlinearity& phi, const MatrixXd& Pre) {
    if (Post.cols() != phi.np || Pre.rows() != phi.nq) throw DimensionError("compose: dimension mismatch");
    auto f = phi.eval;
    return {[Post, f, Pre](double t, const VectorXd& q) { return VectorXd(Post * f(t, Pre * q)); }, Pre.cols(),
            Post.rows(), phi.tag};
}

// --- sectors -------------------------------------------------------------

SectorSpec SectorSpec::scalar(double a, double b) {
    if (!(a < b)) throw std::invalid_argument("sector: need a < b");
    return {MatrixXd::Constant(1, 1, a), MatrixXd::Constant(1, 1, b)};
}

SectorSpec SectorSpec::matrix(const MatrixXd& A, const MatrixXd& B) {
    if (A.rows() != A.cols() || B.rows() != B.cols() || A.rows() != B.rows())
        throw DimensionError("sector: A and B must be square of equal size");
    if ((A - A.transpose()).cwiseAbs().maxCoeff() > 1e-12 || (B - B.transpose()).cwiseAbs().maxCoeff() > 1e-12)
        throw std::invalid_argument("sector: A and B must be symmetric");
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(B - A);
    if (es.eigenvalues().minCoeff() <= 0) throw std::invalid_argument("sector: need B - A positive definite");
    return {A, B};
}

MatrixXd SectorSpec::center_matrix(Index n) const {
    if (is_scalar()) return c()(0, 0) * MatrixXd::Identity(n, n);
    if (a.rows() != n) throw DimensionError("sector: dimension mismatch");
    return c();
}

double SectorSpec::radius() const {
    if (is_scalar()) return r()(0, 0);
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(r());
    return es.eigenvalues().maxCoeff();
}

bool SectorSpec::satisfied(const VectorXd& q, const VectorXd& p, double tol) const {
    const MatrixXd A = center_matrix(q.size()) - (is_scalar() ? r()(0, 0) * MatrixXd::Identity(q.size(), q.size()) : r());
    const MatrixXd B = center_matrix(q.size()) + (is_scalar() ? r()(0, 0) * MatrixXd::Identity(q.size(), q.size()) : r());
    if (is_scalar() && q.size() > 1) {
        // componentwise scalar sector
        for (Index i = 0; i < q.size(); ++i)
            if ((p(i) - a(0, 0) * q(i)) * (p(i) - b(0, 0) * q(i)) > tol) return false;
        return true;
    }
    return (p - A * q).dot(p - B * q) <= tol;
}

Centered center(const SectorSpec& spec, const Nonlinearity& phi, bool scale_by_r_inverse) {
    const MatrixXd C = spec.center_matrix(phi.nq);
    if (phi.nq != phi.np) throw DimensionError("center: phi must be square");
    const MatrixXd R = spec.is_scalar() ? MatrixXd(spec.r()(0, 0) * MatrixXd::Identity(phi.nq, phi.nq)) : spec.r();
    auto f = phi.eval;
    Centered out{{}, C, R};
    if (scale_by_r_inverse) {
        const MatrixXd Ri = R.inverse();
        out.psi = {[f, C, Ri](double t, const VectorXd& q) {
                       const VectorXd x = Ri * q;
                       return VectorXd(f(t, x) - C * x);
                   },
                   phi.nq, phi.np, phi.tag + "-centered-scaled"};
    } else {
        out.psi = {[f, C](double t, const VectorXd& q) { return VectorXd(f(t, q) - C * q); }, phi.nq, phi.np,
                   phi.tag + "-centered"};
    }
    return out;
}

Nonlinearity uncenter(const Nonlinearity& psi, const MatrixXd& C) {
    auto f = psi.eval;
    return {[f, C](double t, const VectorXd& q) { return VectorXd(f(t, q) + C * q); }, psi.nq, psi.np, psi.tag};
}

AsymptoticReport verify_asymptotic(const Nonlinearity& phi, const SectorSpec& spec, double M, double L,
                                   std::size_t sample_budget, unsigned seed, double range_factor) {
    AsymptoticReport rep;
    std::mt19937 rng(seed);
    std::normal_distribution<double> N(0.0, 1.0);
    const Index n = phi.nq;
    auto direction = [&]() {
        VectorXd d(n);
        for (Index i = 0; i < n; ++i) d(i) = N(rng);
        return VectorXd(d / d.cwiseAbs().maxCoeff());
    };
    auto check = [&](const VectorXd& q) {
        ++rep.samples;
        const VectorXd p = phi(q);
        const double mag = q.cwiseAbs().maxCoeff();
        if (mag > M) {
            if (!spec.satisfied(q, p, 1e-12 * (1.0 + q.squaredNorm()))) rep.violations.push_back({q, p, false});
        } else if (p.cwiseAbs().maxCoeff() > L * (1 + 1e-12)) {
            rep.violations.push_back({q, p, true});
        }
    };
    const std::size_t log_count = sample_budget / 2;
    const std::size_t dirs = n == 1 ? 2 : std::max<std::size_t>(2, log_count / 50);
    const std::size_t per_dir = std::max<std::size_t>(1, log_count / dirs);
    for (std::size_t d = 0; d < dirs; ++d) {
        VectorXd u = n == 1 ? VectorXd::Constant(1, d % 2 ? -1.0 : 1.0) : direction();
        for (std::size_t k = 1; k <= per_dir; ++k) {
            const double mag = M * std::pow(range_factor, static_cast<double>(k) / per_dir);
            check(mag * u);
        }
    }
    std::uniform_real_distribution<double> U(M, range_factor * M);
    std::uniform_real_distribution<double> Inside(0.0, M);
    const std::size_t rest = sample_budget - std::min(sample_budget, rep.samples);
    for (std::size_t k = 0; k < rest; ++k) {
        const double mag = k % 5 == 0 ? Inside(rng) : U(rng);
        check(mag * direction());
    }
    return rep;
}

// --- piecewise affine ----------------------------------------------------

bool AffinePiece::contains(const VectorXd& x, double tol) const {
    return ((Hr * x - hr).array() <= tol * (1.0 + x.cwiseAbs().maxCoeff())).all();
}

VectorXd eval_pieces(const std::vector<AffinePiece>& pieces, const VectorXd& x) {
    for (const auto& p : pieces)
        if (p.contains(x)) return p.L * x + p.b;
    throw GeometryError("piecewise-affine map: no piece contains the point");
}

Nonlinearity pwa_nonlinearity(std::vector<AffinePiece> pieces) {
    if (pieces.empty()) throw GeometryError("piecewise-affine map without pieces");
    const Index n = pieces[0].L.cols(), m = pieces[0].L.rows();
    auto ps = std::make_shared<const std::vector<AffinePiece>>(std::move(pieces));
    return {[ps](double, const VectorXd& x) { return eval_pieces(*ps, x); }, n, m, "pwa"};
}

namespace {

// Extreme points of a finite set of any affine dimension <= 3.
std::vector<VectorXd> extreme_points(const std::vector<VectorXd>& pts) {
    const Index n = pts[0].size();
    MatrixXd D(n, static_cast<Index>(pts.size()));
    for (std::size_t i = 0; i < pts.size(); ++i) D.col(static_cast<Index>(i)) = pts[i] - pts[0];
    Eigen::JacobiSVD<MatrixXd> svd(D, Eigen::ComputeFullU);
    const double smax = std::max(1e-300, svd.singularValues().size() ? svd.singularValues()(0) : 0.0);
    Index r = 0;
    for (Index i = 0; i < svd.singularValues().size(); ++i)
        if (svd.singularValues()(i) > 1e-10 * std::max(1.0, smax)) ++r;
    if (r == 0) return {pts[0]};
    if (r == n) return hull_vertices(pts);
    const MatrixXd U = svd.matrixU().leftCols(r);
    std::vector<VectorXd> low;
    for (const auto& p : pts) low.push_back(U.transpose() * (p - pts[0]));
    std::vector<VectorXd> out;
    for (const auto& v : hull_vertices(low)) out.push_back(pts[0] + U * v);
    return out;
}

}  // namespace

PolytopeBound pwa_polytope_bound(const std::vector<AffinePiece>& pieces, const MatrixXd& S) {
    if (pieces.empty()) throw GeometryError("pwa_polytope_bound: no pieces");
    const Index n = S.cols();
    if (n > kMaxPolytopeDim) throw GeometryError("pwa_polytope_bound: dimension above 3");
    Polytope::from_norm_matrix(S);  // validates that S defines a bounded unit ball

    PolytopeBound out;
    std::vector<VectorXd> images{VectorXd::Zero(pieces[0].L.rows())};
    std::vector<std::vector<VectorXd>> Q(pieces.size());
    for (std::size_t i = 0; i < pieces.size(); ++i) {
        const AffinePiece& pc = pieces[i];
        if (pc.Hr.cols() != n || pc.L.cols() != n) throw DimensionError("pwa_polytope_bound: piece dimension mismatch");
        // Motzkin decomposition: the polytope part lives in the orthogonal
        // complement of the lineality space.
        const MatrixXd N = pc.Hr.rows() ? MatrixXd(Eigen::FullPivLU<MatrixXd>(pc.Hr).kernel()) : MatrixXd::Identity(n, n);
        const bool has_lineality = N.norm() > 0;  // Eigen returns a zero column for a trivial kernel
        MatrixXd Hq = pc.Hr;
        VectorXd hq = pc.hr;
        if (has_lineality) {
            Hq.resize(pc.Hr.rows() + 2 * N.cols(), n);
            Hq << pc.Hr, N.transpose(), -N.transpose();
            hq.resize(Hq.rows());
            hq << pc.hr, VectorXd::Zero(2 * N.cols());
        }
        Q[i] = enumerate_vertices(Hq, hq);
        if (Q[i].empty()) throw GeometryError("pwa_polytope_bound: piece " + std::to_string(i) + " is empty");
        MatrixXd H(2 * S.rows() + pc.Hr.rows(), n);
        VectorXd h(H.rows());
        H << S, -S, pc.Hr;
        h << VectorXd::Ones(2 * S.rows()), VectorXd::Zero(pc.Hr.rows());
        for (const auto& v : enumerate_vertices(H, h)) images.push_back(pc.L * v);
    }
    auto symmetric_full_dim = [n](const std::vector<VectorXd>& pts) {
        MatrixXd P(n, static_cast<Index>(pts.size()));
        for (std::size_t j = 0; j < pts.size(); ++j) P.col(static_cast<Index>(j)) = pts[j];
        return Eigen::FullPivLU<MatrixXd>(P).rank() == n;
    };
    if (!symmetric_full_dim(images)) {
        // phi is bounded along the missing directions. Adding the images of
        // the polytope parts keeps the bound valid and fills B' out (this is
        // what makes clipping give B_inf).
        for (std::size_t i = 0; i < pieces.size(); ++i)
            for (const auto& y : Q[i]) images.push_back(pieces[i].b + pieces[i].L * y);
        out.used_polytope_images = true;
        if (!symmetric_full_dim(images))
            throw GeometryError("pwa_polytope_bound: co(B' u -B') is degenerate, no polyhedral norm");
    }
    out.B_prime = extreme_points(images);
    std::vector<VectorXd> sym = out.B_prime;
    for (const auto& v : out.B_prime) sym.push_back(-v);
    out.B_square = hull_vertices(sym);
    out.T = symmetric_gauge_matrix(out.B_prime);

    for (const auto& v : out.B_prime) out.k1 = std::max(out.k1, v.cwiseAbs().maxCoeff());
    for (std::size_t i = 0; i < pieces.size(); ++i) {
        const AffinePiece& pc = pieces[i];
        out.k2 = std::max(out.k2, pc.b.size() ? pc.b.cwiseAbs().maxCoeff() : 0.0);
        for (const auto& y : Q[i]) {
            out.k3 = std::max(out.k3, (pc.L * y).cwiseAbs().maxCoeff());
            out.k4 = std::max(out.k4, y.cwiseAbs().maxCoeff());
            const double bound = (out.T * (pc.b + pc.L * y)).cwiseAbs().maxCoeff() + (S * y).cwiseAbs().maxCoeff();
            out.k = std::max(out.k, bound);
        }
    }
    out.k_total = out.k2 + out.k3 + out.k1 * out.k4;
    return out;
}

// --- library ---------------------------------------------------------------

Nonlinearity two_attractor(double a, double k, double rho) {
    return {[a, k, rho](double, const VectorXd& q) {
                VectorXd p = VectorXd::Zero(3);
                p(0) = a * std::tanh(k * q(2)) + rho * q(2);
                return p;
            },
            3, 3, "two_attractor"};
}

Nonlinearity chua(double alpha, double rho) {
    return {[alpha, rho](double, const VectorXd& q) {
                VectorXd p = VectorXd::Zero(3);
                p(0) = alpha * std::tanh(2.0 * q(0)) + alpha * rho * q(0);
                return p;
            },
            3, 3, "chua"};
}

Nonlinearity mimo_attractor(const VectorXd& a, const VectorXd& rho, const VectorXd& c) {
    if (a.size() != rho.size() || a.size() != c.size()) throw DimensionError("mimo_attractor: parameter sizes differ");
    const Index n = a.size();
    return {[a, rho, c, n](double, const VectorXd& q) {
                VectorXd p(n);
                for (Index i = 0; i < n; ++i) {
                    const double s = q(i) * q(i);
                    p(i) = s / (a(i) + s) * (std::tanh(c(i) * q(i)) + rho(i) * q(i));
                }
                return p;
            },
            n, n, "mimo_attractor"};
}

Nonlinearity clip(Index n, double level) {
    return {[level](double, const VectorXd& q) { return VectorXd(q.cwiseMax(-level).cwiseMin(level)); }, n, n, "clip"};
}

Nonlinearity qp_nonlinearity(const MatrixXd& H, const MatrixXd& L, const VectorXd& b) {
    qp_projection(H, L, b, VectorXd::Zero(H.rows()));  // validates the data
    return {[H, L, b](double, const VectorXd& x) { return qp_projection(H, L, b, x).v; }, H.rows(), H.rows(), "qp"};
}

Nonlinearity gauge_saturation_nonlinearity(const Polytope& P) {
    if (!P.has_interior_origin()) throw GeometryError("gauge saturation: origin must be interior");
    return {[P](double, const VectorXd& x) { return gauge_saturation(P, x); }, P.dim(), P.dim(), "gauge_saturation"};
}

Nonlinearity convex_combination(const MatrixXd& W) {
    if (W.rows() != W.cols()) throw DimensionError("convex_combination: W must be square");
    return {[W](double, const VectorXd& q) {
                VectorXd s = W * q;
                s.array() -= s.maxCoeff();
                VectorXd mu = s.array().exp();
                mu /= mu.sum();
                return VectorXd::Constant(1, mu.dot(q));
            },
            W.cols(), 1, "convex_combination"};
}

void example7_qp(MatrixXd& L, VectorXd& b) {
    L.resize(4, 2);
    L << 1, -1, -1, -1, -1, 0, 0, -1;
    b.resize(4);
    b << 3, 0, 0, 1;
}

std::vector<AffinePiece> pieces_from_json(const Json& j) {
    if (!j.is_array()) throw SchemaError("pieces: expected an array");
    std::vector<AffinePiece> out;
    for (const auto& p : j) {
        require_keys(p, {"region_H", "region_h", "L", "b"}, "piece");
        AffinePiece pc{matrix_from_json(p.at("region_H"), "region_H"), vector_from_json(p.at("region_h"), "region_h"),
                       matrix_from_json(p.at("L"), "L"), vector_from_json(p.at("b"), "b")};
        if (pc.Hr.rows() != pc.hr.size() || pc.L.rows() != pc.b.size() || pc.Hr.cols() != pc.L.cols())
            throw SchemaError("piece: inconsistent dimensions");
        out.push_back(std::move(pc));
    }
    return out;
}

Json pieces_to_json(const std::vector<AffinePiece>& pieces) {
    Json j = Json::array();
    for (const auto& p : pieces)
        j.push_back({{"region_H", matrix_to_json(p.Hr)},
                     {"region_h", vector_to_json(p.hr)},
                     {"L", matrix_to_json(p.L)},
                     {"b", vector_to_json(p.b)}});
    return j;
}

namespace {

double num(const Json& j, const char* key, double fallback) { return j.contains(key) ? j.at(key).get<double>() : fallback; }

VectorXd vec(const Json& j, const char* key, const VectorXd& fallback) {
    return j.contains(key) ? vector_from_json(j.at(key), key) : fallback;
}

}  // namespace

Nonlinearity make_nonlinearity(const Json& spec) {
    if (!spec.contains("name")) throw SchemaError("nonlinearity: missing \"name\"");
    const std::string name = spec.at("name").get<std::string>();
    if (name == "two_attractor") {
        require_keys(spec, {"name", "a", "k", "rho"}, "two_attractor");
        return two_attractor(num(spec, "a", 10.0), num(spec, "k", 10.0), num(spec, "rho", 0.3));
    }
    if (name == "chua") {
        require_keys(spec, {"name", "alpha", "rho"}, "chua");
        return chua(num(spec, "alpha", 8.3), num(spec, "rho", 0.25));
    }
    if (name == "mimo_attractor") {
        require_keys(spec, {"name", "a", "rho", "c"}, "mimo_attractor");
        return mimo_attractor(vec(spec, "a", Eigen::Vector3d(0.1, 0.2, 0.3)), vec(spec, "rho", Eigen::Vector3d(0.1, 0.2, 0.3)),
                              vec(spec, "c", Eigen::Vector3d(2, 3, 4)));
    }
    if (name == "zero") {
        require_keys(spec, {"name", "dim"}, "zero");
        const Index n = spec.at("dim").get<Index>();
        return zero_nonlinearity(n, n);
    }
    if (name == "linear") {
        require_keys(spec, {"name", "K"}, "linear");
        return linear_nonlinearity(matrix_from_json(spec.at("K"), "K"));
    }
    if (name == "clip") {
        require_keys(spec, {"name", "dim", "level"}, "clip");
        return clip(spec.at("dim").get<Index>(), num(spec, "level", 1.0));
    }
    if (name == "qp") {
        require_keys(spec, {"name", "H", "L", "b"}, "qp");
        return qp_nonlinearity(matrix_from_json(spec.at("H"), "H"), matrix_from_json(spec.at("L"), "L"),
                               vector_from_json(spec.at("b"), "b"));
    }
    if (name == "pwa") {
        require_keys(spec, {"name", "pieces"}, "pwa");
        return pwa_nonlinearity(pieces_from_json(spec.at("pieces")));
    }
    if (name == "gauge_saturation") {
        require_keys(spec, {"name", "T"}, "gauge_saturation");
        return gauge_saturation_nonlinearity(Polytope::from_norm_matrix(matrix_from_json(spec.at("T"), "T")));
    }
    if (name == "convex_combination") {
        require_keys(spec, {"name", "W"}, "convex_combination");
        return convex_combination(matrix_from_json(spec.at("W"), "W"));
    }
    throw SchemaError("unknown nonlinearity '" + name + "'");
}

}  // namespace pkgain
