#include <boost/math/tools/toms748_solve.hpp>

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <map>

#include "pkgain/norms.hpp"

namespace pkgain {

namespace {

constexpr std::size_t kNodeBudget = 2'000'000;
constexpr double kModalConditionLimit = 1e8;

int sgn(double v) { return (v > 0) - (v < 0); }

// Rigorous a-priori bounds on |c_i e^{As} x| and its first two derivatives
// for s >= 0, plus a bound on the remaining L1 mass.
class DecayBounds {
public:
    DecayBounds(const MatrixXd& A, const MatrixXd& C) {
        const Index n = A.rows();
        Eigen::EigenSolver<MatrixXd> es(A);
        const MatrixXcd V = es.eigenvectors();
        Eigen::JacobiSVD<MatrixXcd> svd(V);
        const auto& s = svd.singularValues();
        const double cond = s(n - 1) > 0 ? s(0) / s(n - 1) : std::numeric_limits<double>::infinity();
        modal_ = cond < kModalConditionLimit;
        if (modal_) {
            lambda_ = es.eigenvalues();
            Vinv_ = V.inverse();
            CV_ = (C.cast<std::complex<double>>() * V).cwiseAbs();
            safety_ = 1.0 + 1e-12 * cond * n;
            return;
        }
        // A^T P + P A = -I
        const MatrixXd I = MatrixXd::Identity(n, n);
        MatrixXd K = MatrixXd::Zero(n * n, n * n);
        for (Index c = 0; c < n; ++c)
            for (Index r = 0; r < n; ++r) {
                const Index row = c * n + r;  // entry (r, c)
                for (Index k = 0; k < n; ++k) {
                    K(row, c * n + k) += A(k, r);  // (A^T P)(r,c) = sum_k A(k,r) P(k,c)
                    K(row, k * n + r) += A(k, c);  // (P A)(r,c) = sum_k P(r,k) A(k,c)
                }
            }
        VectorXd rhs = -Eigen::Map<const VectorXd>(I.data(), n * n);
        VectorXd p = K.fullPivLu().solve(rhs);
        P_ = Eigen::Map<MatrixXd>(p.data(), n, n);
        P_ = 0.5 * (P_ + P_.transpose());
        Eigen::SelfAdjointEigenSolver<MatrixXd> pe(P_);
        lmax_ = pe.eigenvalues().maxCoeff();
        const MatrixXd Pinv = P_.inverse();
        auto dual = [&](const MatrixXd& M) {
            VectorXd out(M.rows());
            for (Index i = 0; i < M.rows(); ++i) out(i) = std::sqrt(std::max(0.0, (M.row(i) * Pinv * M.row(i).transpose())(0, 0)));
            return out;
        };
        c0_ = dual(C);
        c1_ = dual(C * A);
        c2_ = dual(C * A * A);
        safety_ = 1.0 + 1e-8;
    }

    // out = {B0, B1, B2, tail} for row i at state x.
    void evaluate(const VectorXd& x, const std::vector<Index>& rows, MatrixXd& out) const {
        out.resize(static_cast<Index>(rows.size()), 4);
        if (modal_) {
            const VectorXd w = (Vinv_ * x.cast<std::complex<double>>()).cwiseAbs();
            for (std::size_t r = 0; r < rows.size(); ++r) {
                double b0 = 0, b1 = 0, b2 = 0, tail = 0;
                for (Index k = 0; k < w.size(); ++k) {
                    const double a = CV_(rows[r], k) * w(k);
                    const double mag = std::abs(lambda_(k));
                    b0 += a;
                    b1 += a * mag;
                    b2 += a * mag * mag;
                    tail += a / std::abs(lambda_(k).real());
                }
                out.row(static_cast<Index>(r)) << b0, b1, b2, tail;
            }
        } else {
            const double xp = std::sqrt(std::max(0.0, x.dot(P_ * x)));
            for (std::size_t r = 0; r < rows.size(); ++r) {
                const Index i = rows[r];
                out.row(static_cast<Index>(r)) << c0_(i) * xp, c1_(i) * xp, c2_(i) * xp, c0_(i) * xp * 2.0 * lmax_;
            }
        }
        out *= safety_;
    }

    // Time after which the tail bound from state x drops below `level`.
    double horizon_estimate(const VectorXd& x, const std::vector<Index>& rows, double level) const {
        double T = 0.0;
        if (modal_) {
            const VectorXd w = (Vinv_ * x.cast<std::complex<double>>()).cwiseAbs();
            const double n = static_cast<double>(w.size());
            for (Index i : rows)
                for (Index k = 0; k < w.size(); ++k) {
                    const double decay = std::abs(lambda_(k).real());
                    const double a = CV_(i, k) * w(k) / decay;
                    if (a > 0) T = std::max(T, std::log(std::max(1.0, a * n / level)) / decay);
                }
        } else {
            MatrixXd b;
            evaluate(x, rows, b);
            const double tail = b.col(3).maxCoeff();
            T = 2.0 * lmax_ * std::log(std::max(1.0, tail / level));
        }
        return T;
    }

private:
    bool modal_ = true;
    double safety_ = 1.0;
    VectorXcd lambda_;
    MatrixXcd Vinv_;
    MatrixXd CV_;
    MatrixXd P_;
    double lmax_ = 0.0;
    VectorXd c0_, c1_, c2_;
};

class ExpCache {
public:
    explicit ExpCache(const MatrixXd& A) : A_(A) {}
    const MatrixXd& dyadic(int k) {
        auto it = cache_.find(k);
        if (it != cache_.end()) return it->second;
        MatrixXd E = (A_ * std::ldexp(1.0, k)).exp();
        return cache_.emplace(k, std::move(E)).first->second;
    }
    MatrixXd at(double s) const { return (A_ * s).exp(); }

private:
    MatrixXd A_;
    std::map<int, MatrixXd> cache_;
};

struct RowState {
    double sum = 0.0;
    double G_last = 0.0;
    double lobe = 0.0;
    int sign = 0;
    EntryL1 entry;
};

struct ColumnResult {
    std::vector<EntryL1> entries;  // indexed like `rows`
    double horizon = 0.0;
    std::size_t nodes = 0;
    std::vector<double> grid;
};

// L1 masses of c_i e^{At} b for all tracked rows.
ColumnResult march_column(const MatrixXd& A, const MatrixXd& C, const MatrixXd& W, const VectorXd& b,
                          const std::vector<Index>& rows, const DecayBounds& bounds, ExpCache& cache,
                          double tol_entry, double eta_scale, std::size_t& budget) {
    const std::size_t nr = rows.size();
    MatrixXd Cr(static_cast<Index>(nr), A.cols()), Wr(static_cast<Index>(nr), A.cols());
    for (std::size_t r = 0; r < nr; ++r) {
        Cr.row(static_cast<Index>(r)) = C.row(rows[r]);
        Wr.row(static_cast<Index>(r)) = W.row(rows[r]);
    }

    ColumnResult res;
    std::vector<RowState> st(nr);
    VectorXd x = b;
    VectorXd f = Cr * x, G = Wr * x;
    for (std::size_t r = 0; r < nr; ++r) {
        st[r].G_last = G(static_cast<Index>(r));
        st[r].sign = sgn(f(static_cast<Index>(r)));
        st[r].entry.first_sign = st[r].sign;
    }

    const double tail_target = 0.25 * tol_entry;
    const double T_est = std::max(1e-3, bounds.horizon_estimate(x, rows, tail_target));
    const double eta = eta_scale * 0.5 * tol_entry / T_est;
    const double rho = std::max(1e-12, A.cwiseAbs().rowwise().sum().maxCoeff());
    int k = static_cast<int>(std::floor(std::log2(0.25 / rho)));

    MatrixXd bd;
    double t = 0.0;
    res.grid.push_back(0.0);
    for (;;) {
        bounds.evaluate(x, rows, bd);
        if (bd.col(3).maxCoeff() <= tail_target) break;
        if (++res.nodes > budget) throw QuadratureError("peak_gain_norm: node budget exhausted");

        // Find an acceptable dyadic step.
        VectorXd xn, fn;
        double h = 0.0;
        for (;;) {
            h = std::ldexp(1.0, k);
            xn = cache.dyadic(k) * x;
            fn = Cr * xn;
            bool ok = true;
            for (std::size_t r = 0; r < nr && ok; ++r) {
                const Index i = static_cast<Index>(r);
                const double endpoints = std::abs(f(i)) + std::abs(fn(i));
                const double err = endpoints <= bd(i, 1) * h ? bd(i, 2) * h * h * h / 6.0 : 0.0;
                ok = err <= eta * h;
            }
            if (ok || h <= 1e-12 * std::max(1.0, t)) break;
            --k;
        }

        const VectorXd Gn = Wr * xn;
        for (std::size_t r = 0; r < nr; ++r) {
            const Index i = static_cast<Index>(r);
            RowState& s = st[r];
            const double endpoints = std::abs(f(i)) + std::abs(fn(i));
            if (endpoints <= bd(i, 1) * h) s.lobe += bd(i, 2) * h * h * h / 6.0;

            const int sn = sgn(fn(i));
            if (s.sign == 0) {
                s.sign = sn;
                s.entry.first_sign = sn;
                continue;
            }
            if (sn != -s.sign) continue;
            double root_s = 0.0;
            double G_root = 0.0;
            if (f(i) == 0.0) {
                root_s = 0.0;
                G_root = G(i);
            } else {
                const Eigen::RowVectorXd c = Cr.row(i);
                auto fun = [&](double s_) { return (c * (cache.at(s_) * x))(0, 0); };
                boost::math::tools::eps_tolerance<double> tolerance(45);
                std::uintmax_t iters = 80;
                const auto br = boost::math::tools::toms748_solve(fun, 0.0, h, f(i), fn(i), tolerance, iters);
                root_s = 0.5 * (br.first + br.second);
                G_root = (Wr.row(i) * (cache.at(root_s) * x))(0, 0);
            }
            s.sum += std::abs(G_root - s.G_last);
            s.G_last = G_root;
            s.sign = sn;
            s.entry.roots.push_back(t + root_s);
        }

        x = xn;
        f = fn;
        G = Gn;
        t += h;
        res.grid.push_back(t);
        ++k;
    }
    budget -= std::min(budget, res.nodes);

    bounds.evaluate(x, rows, bd);
    res.horizon = t;
    for (std::size_t r = 0; r < nr; ++r) {
        RowState& s = st[r];
        const double tail = bd(static_cast<Index>(r), 3);
        const double computed = s.sum + std::abs(s.G_last);  // last segment extended to infinity
        s.entry.value = computed + tail + 0.5 * s.lobe;
        s.entry.error = tail + 0.5 * s.lobe + 1e-14 * (1.0 + computed);
        res.entries.push_back(std::move(s.entry));
    }
    return res;
}

}  // namespace

double max_row_sum(const MatrixXd& D) {
    if (D.size() == 0) return 0.0;
    return D.cwiseAbs().rowwise().sum().maxCoeff();
}

PeakGainAnalysis peak_gain_analysis(const System& G, double tol, const std::vector<Index>& rows_in) {
    if (!(tol > 0)) throw std::invalid_argument("peak_gain_norm: tolerance must be positive");
    std::vector<Index> rows = rows_in;
    if (rows.empty())
        for (Index i = 0; i < G.outputs(); ++i) rows.push_back(i);
    for (Index i : rows)
        if (i < 0 || i >= G.outputs()) throw DimensionError("peak_gain_norm: row index out of range");

    const Index m = G.inputs();
    PeakGainAnalysis out;
    out.entries.assign(static_cast<std::size_t>(G.outputs()), std::vector<EntryL1>(static_cast<std::size_t>(m)));
    out.row_values = VectorXd::Zero(G.outputs());
    out.row_errors = VectorXd::Zero(G.outputs());
    for (Index i : rows) out.row_values(i) = G.D.row(i).cwiseAbs().sum();
    if (G.is_static() || m == 0) return out;

    const auto h = is_hurwitz(G.A);
    if (!h.stable) throw NotHurwitzError("peak_gain_norm: A is not Hurwitz", h.abscissa);

    const MatrixXd W = G.A.transpose().partialPivLu().solve(G.C.transpose()).transpose();  // C A^-1
    const DecayBounds bounds(G.A, G.C);
    ExpCache cache(G.A);
    const double tol_entry = tol / static_cast<double>(m);

    double eta_scale = 1.0;
    for (int attempt = 0; attempt < 5; ++attempt, eta_scale *= 0.25) {
        std::size_t budget = kNodeBudget;
        PeakGainAnalysis a = out;
        a.grid.clear();
        for (Index j = 0; j < m; ++j) {
            ColumnResult col = march_column(G.A, G.C, W, G.B.col(j), rows, bounds, cache, tol_entry, eta_scale, budget);
            a.horizon_T = std::max(a.horizon_T, col.horizon);
            a.nodes += col.nodes;
            a.grid.insert(a.grid.end(), col.grid.begin(), col.grid.end());
            for (std::size_t r = 0; r < rows.size(); ++r) {
                const Index i = rows[r];
                a.row_values(i) += col.entries[r].value;
                a.row_errors(i) += col.entries[r].error;
                a.entries[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = std::move(col.entries[r]);
            }
        }
        std::sort(a.grid.begin(), a.grid.end());
        a.grid.erase(std::unique(a.grid.begin(), a.grid.end()), a.grid.end());
        if (a.row_errors.maxCoeff() <= tol) return a;
        if (attempt == 4) throw QuadratureError("peak_gain_norm: tolerance not reached");
    }
    return out;
}

NormCertificate peak_gain_norm(const System& G, double tol) {
    const PeakGainAnalysis a = peak_gain_analysis(G, tol);
    NormCertificate cert;
    cert.kind = NormKind::pk_gn;
    if (G.outputs() == 0) return cert;
    Index imax = 0;
    cert.value = a.row_values.maxCoeff(&imax);
    cert.row = imax;
    // max of intervals: the norm lies within [max(v_i - e_i), max(v_i + e_i)].
    const double lo = (a.row_values - a.row_errors).maxCoeff();
    const double hi = (a.row_values + a.row_errors).maxCoeff();
    cert.value = 0.5 * (lo + hi);
    cert.abs_error_bound = 0.5 * (hi - lo);
    cert.horizon_T = a.horizon_T;
    cert.nodes = a.nodes;
    cert.grid = a.grid;
    cert.row_values.assign(a.row_values.data(), a.row_values.data() + a.row_values.size());
    return cert;
}

NormCertificate row_l1(const System& G, Index i, double tol) {
    const PeakGainAnalysis a = peak_gain_analysis(G, tol, {i});
    NormCertificate cert;
    cert.kind = NormKind::row_l1;
    cert.value = a.row_values(i);
    cert.abs_error_bound = a.row_errors(i);
    cert.horizon_T = a.horizon_T;
    cert.nodes = a.nodes;
    cert.grid = a.grid;
    cert.row = i;
    return cert;
}

}  // namespace pkgain
