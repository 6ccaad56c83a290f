#include "pkgain/synth.hpp"

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>

namespace pkgain {

namespace {

using cplx = std::complex<double>;
constexpr double kComplexStep = 1e-30;

}  // namespace

std::string to_string(ControllerKind k) {
    switch (k) {
        case ControllerKind::none: return "none";
        case ControllerKind::static_gain: return "static";
        case ControllerKind::pid: return "pid";
        case ControllerKind::fixed_order: return "fixed_order";
    }
    return "?";
}

ControllerStructure ControllerStructure::none(Index ny, Index nu) { return {ControllerKind::none, ny, nu, 0, false}; }

ControllerStructure ControllerStructure::static_gain(Index ny, Index nu) {
    return {ControllerKind::static_gain, ny, nu, 0, false};
}

ControllerStructure ControllerStructure::pid() { return {ControllerKind::pid, 1, 1, 2, false}; }

ControllerStructure ControllerStructure::fixed_order(Index order, Index ny, Index nu, bool strictly_proper) {
    if (order < 0) throw std::invalid_argument("fixed-order controller: negative order");
    return {ControllerKind::fixed_order, ny, nu, order, strictly_proper};
}

Index ControllerStructure::parameter_count() const {
    switch (kind) {
        case ControllerKind::none: return 0;
        case ControllerKind::static_gain: return nu * ny;
        case ControllerKind::pid: return 4;
        case ControllerKind::fixed_order:
            return order * order + order * ny + nu * order + (strictly_proper ? 0 : nu * ny);
    }
    return 0;
}

bool ControllerStructure::admissible(const VectorXd& x) const {
    if (x.size() != parameter_count() || !x.allFinite()) return false;
    if (kind == ControllerKind::pid) return x(3) > 0;
    return true;
}

VectorXd pid_from_lag_form(double kp, double ki, double lag_gain, double tf) {
    VectorXd x(4);
    x << kp + lag_gain, ki, -lag_gain * tf, tf;
    return x;
}

ControllerStructure controller_structure_from_json(const Json& j) {
    require_keys(j, {"kind", "ny", "nu", "order", "strictly_proper"}, "controller");
    const std::string kind = j.at("kind").get<std::string>();
    const Index ny = j.value("ny", Index{1}), nu = j.value("nu", Index{1});
    if (kind == "none") return ControllerStructure::none(ny, nu);
    if (kind == "static") return ControllerStructure::static_gain(ny, nu);
    if (kind == "pid") {
        if (ny != 1 || nu != 1) throw SchemaError("controller: PID is SISO");
        return ControllerStructure::pid();
    }
    if (kind == "fixed_order")
        return ControllerStructure::fixed_order(j.at("order").get<Index>(), ny, nu, j.value("strictly_proper", false));
    throw SchemaError("controller: unknown kind '" + kind + "'");
}

Json controller_structure_to_json(const ControllerStructure& cs) {
    Json j{{"kind", to_string(cs.kind)}, {"ny", cs.ny}, {"nu", cs.nu}};
    if (cs.kind == ControllerKind::fixed_order) {
        j["order"] = cs.order;
        j["strictly_proper"] = cs.strictly_proper;
    }
    return j;
}

// --- closed loops ------------------------------------------------------------

System closed_loop(const Plant& P, const ChannelSelector& sel, const ControllerStructure& cs, const VectorXd& x) {
    return channel(feedback_lft(P, cs.realize(x)), sel);
}

namespace {

// Whole closed loop (all remaining channels) and derivatives.
struct LoopDerivative {
    PartitionedPlant<double> loop;
    std::vector<System> d;
};

LoopDerivative loop_derivative(const Plant& P, const ControllerStructure& cs, const VectorXd& x) {
    LoopDerivative out{feedback_lft(P, cs.realize(x)), {}};
    const PartitionedPlant<cplx> Pc = P.cast<cplx>();
    const Index np = cs.parameter_count();
    for (Index k = 0; k < np; ++k) {
        VectorXcd xc = x.cast<cplx>();
        xc(k) += cplx(0.0, kComplexStep);
        const StateSpace<cplx> L = feedback_lft(Pc, cs.realize<cplx>(xc)).sys;
        out.d.emplace_back(MatrixXd(L.A.imag() / kComplexStep), MatrixXd(L.B.imag() / kComplexStep),
                           MatrixXd(L.C.imag() / kComplexStep), MatrixXd(L.D.imag() / kComplexStep));
    }
    return out;
}

}  // namespace

ClosedLoopDerivative closed_loop_derivative(const Plant& P, const ChannelSelector& sel, const ControllerStructure& cs,
                                            const VectorXd& x) {
    const LoopDerivative L = loop_derivative(P, cs, x);
    ClosedLoopDerivative out;
    out.T = channel(L.loop, sel);
    const Group& gi = L.loop.input(sel.from);
    const Group& go = L.loop.output(sel.to);
    for (const System& d : L.d)
        out.dT.emplace_back(d.A, MatrixXd(d.B.middleCols(gi.begin, gi.size)), MatrixXd(d.C.middleRows(go.begin, go.size)),
                            MatrixXd(d.D.block(go.begin, gi.begin, go.size, gi.size)));
    return out;
}

std::vector<Branch> abscissa_branches(const MatrixXd& A, const std::vector<MatrixXd>& dA, double window) {
    std::vector<Branch> out;
    if (A.rows() == 0) {
        Branch b;
        b.value = -std::numeric_limits<double>::infinity();
        b.gradient = VectorXd::Zero(static_cast<Index>(dA.size()));
        return {b};
    }
    Eigen::EigenSolver<MatrixXd> es(A);
    const VectorXcd lam = es.eigenvalues();
    const MatrixXcd V = es.eigenvectors();
    const MatrixXcd W = Eigen::PartialPivLU<MatrixXcd>(V).solve(MatrixXcd::Identity(A.rows(), A.rows()));
    const double top = lam.real().maxCoeff();
    for (Index i = 0; i < lam.size(); ++i) {
        if (lam(i).real() < top - window || lam(i).imag() < 0) continue;
        Branch b;
        b.value = lam(i).real();
        b.where = lam(i).imag();
        b.gradient = VectorXd::Zero(static_cast<Index>(dA.size()));
        for (std::size_t k = 0; k < dA.size(); ++k)
            b.gradient(static_cast<Index>(k)) = (W.row(i) * dA[k].cast<cplx>() * V.col(i))(0, 0).real();
        out.push_back(std::move(b));
    }
    std::sort(out.begin(), out.end(), [](const Branch& a, const Branch& b) { return a.value > b.value; });
    return out;
}

Branch abscissa_branch(const MatrixXd& A, const std::vector<MatrixXd>& dA) {
    return abscissa_branches(A, dA, 0.0).front();
}

namespace {

NormEvaluation unstable_evaluation(NormKind kind, const System& T, const std::vector<System>& dT) {
    NormEvaluation ev;
    ev.kind = kind;
    ev.stable = false;
    ev.value = std::numeric_limits<double>::infinity();
    std::vector<MatrixXd> dA;
    for (const auto& d : dT) dA.push_back(d.A);
    const Branch b = abscissa_branch(T.A, dA);
    ev.abscissa = b.value;
    ev.gradient = b.gradient;
    return ev;
}

VectorXd hinf_gradient(const System& T, const std::vector<System>& dT, double omega) {
    VectorXd g(static_cast<Index>(dT.size()));
    if (std::isinf(omega) || T.is_static()) {
        Eigen::JacobiSVD<MatrixXd> svd(T.D, Eigen::ComputeFullU | Eigen::ComputeFullV);
        const VectorXd u = svd.matrixU().col(0), v = svd.matrixV().col(0);
        for (std::size_t k = 0; k < dT.size(); ++k) g(static_cast<Index>(k)) = u.dot(dT[k].D * v);
        return g;
    }
    const Index n = T.states();
    const MatrixXcd R = (cplx(0.0, omega) * MatrixXcd::Identity(n, n) - T.A.cast<cplx>()).inverse();
    const MatrixXcd RB = R * T.B.cast<cplx>(), CR = T.C.cast<cplx>() * R;
    const MatrixXcd H = T.C.cast<cplx>() * RB + T.D.cast<cplx>();
    Eigen::JacobiSVD<MatrixXcd> svd(H, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const VectorXcd u = svd.matrixU().col(0), v = svd.matrixV().col(0);
    for (std::size_t k = 0; k < dT.size(); ++k) {
        const System& d = dT[k];
        const MatrixXcd dH = d.C.cast<cplx>() * RB + CR * d.A.cast<cplx>() * RB + CR * d.B.cast<cplx>() + d.D.cast<cplx>();
        g(static_cast<Index>(k)) = (u.adjoint() * dH * v)(0, 0).real();
    }
    return g;
}

}  // namespace

NormEvaluation eval_hinf_subgrad(const Plant& P, const ChannelSelector& sel, const ControllerStructure& cs,
                                 const VectorXd& x, double tol, double near) {
    const ClosedLoopDerivative cl = closed_loop_derivative(P, sel, cs, x);
    const System& T = cl.T;
    if (!T.is_static() && !is_hurwitz(T.A).stable) return unstable_evaluation(NormKind::hinf, T, cl.dT);
    NormEvaluation ev;
    ev.kind = NormKind::hinf;
    ev.abscissa = T.is_static() ? -std::numeric_limits<double>::infinity() : spectral_abscissa(T.A);
    const NormCertificate cert = hinf_norm(T, tol);
    ev.value = cert.value;
    ev.error = 0.5 * (cert.upper - cert.lower);
    std::vector<std::pair<double, double>> peaks;
    if (T.is_static()) peaks.push_back({std::numeric_limits<double>::infinity(), ev.value});
    else peaks = hinf_near_active(T, cert.upper, near);
    if (peaks.empty()) peaks.push_back({cert.peak_frequency, ev.value});
    for (const auto& [w, gain] : peaks) ev.branches.push_back({gain, hinf_gradient(T, cl.dT, w), w});
    std::sort(ev.branches.begin(), ev.branches.end(), [](const Branch& a, const Branch& b) { return a.value > b.value; });
    ev.gradient = ev.branches.front().gradient;
    return ev;
}

namespace {

// Integral over [0, t] of d/dtheta (c_i e^{As} b_j) for all i, j at once:
// exp of [[A, dA, 0, 0], [0, A, B, dB], [0, 0, 0, 0], [0, 0, 0, 0]].
class DerivativeIntegral {
public:
    DerivativeIntegral(const System& T, const System& dT) : T_(T), dT_(dT) {
        n_ = T.states();
        m_ = T.inputs();
        M_ = MatrixXd::Zero(2 * n_ + 2 * m_, 2 * n_ + 2 * m_);
        M_.topLeftCorner(n_, n_) = T.A;
        M_.block(0, n_, n_, n_) = dT.A;
        M_.block(n_, n_, n_, n_) = T.A;
        M_.block(n_, 2 * n_, n_, m_) = T.B;
        M_.block(n_, 2 * n_ + m_, n_, m_) = dT.B;
        const Eigen::PartialPivLU<MatrixXd> lu(T.A);
        const MatrixXd AiB = lu.solve(T.B), AidB = lu.solve(dT.B);
        // Z0(inf) = -A^-1, Y(inf) = A^-1 dA A^-1 B
        inf_ = -dT.C * AiB - T.C * AidB + T.C * lu.solve(dT.A * AiB);
    }

    // Entry (i, j) of F(t) for every i, j.
    [[nodiscard]] MatrixXd at(double t) const {
        if (std::isinf(t)) return inf_;
        if (t == 0.0) return MatrixXd::Zero(T_.outputs(), m_);
        const MatrixXd E = (M_ * t).exp();
        const MatrixXd Y = E.block(0, 2 * n_, n_, m_);
        const MatrixXd Z0B = E.block(n_, 2 * n_, n_, m_);
        const MatrixXd Z0dB = E.block(n_, 2 * n_ + m_, n_, m_);
        return dT_.C * Z0B + T_.C * Z0dB + T_.C * Y;
    }

private:
    const System& T_;
    const System& dT_;
    Index n_ = 0, m_ = 0;
    MatrixXd M_;
    MatrixXd inf_;
};

}  // namespace

NormEvaluation eval_pkgn_subgrad(const Plant& P, const ChannelSelector& sel, const ControllerStructure& cs,
                                 const VectorXd& x, double tol, double near) {
    const ClosedLoopDerivative cl = closed_loop_derivative(P, sel, cs, x);
    const System& T = cl.T;
    if (!T.is_static() && !is_hurwitz(T.A).stable) return unstable_evaluation(NormKind::pk_gn, T, cl.dT);
    NormEvaluation ev;
    ev.kind = NormKind::pk_gn;
    ev.abscissa = T.is_static() ? -std::numeric_limits<double>::infinity() : spectral_abscissa(T.A);
    const PeakGainAnalysis an = peak_gain_analysis(T, tol);
    Index imax = 0;
    ev.value = an.row_values.maxCoeff(&imax);
    ev.error = an.row_errors(imax);
    const Index np = static_cast<Index>(cl.dT.size());

    std::vector<Index> rows;
    for (Index i = 0; i < T.outputs(); ++i)
        if (an.row_values(i) >= near * ev.value) rows.push_back(i);

    for (Index i : rows) {
        Branch b{an.row_values(i), VectorXd::Zero(np), static_cast<double>(i)};
        for (Index j = 0; j < T.inputs(); ++j) {
            const double d = T.D(i, j);
            if (d != 0.0)
                for (Index k = 0; k < np; ++k) b.gradient(k) += (d > 0 ? 1.0 : -1.0) * cl.dT[static_cast<std::size_t>(k)].D(i, j);
        }
        if (!T.is_static()) {
            for (Index k = 0; k < np; ++k) {
                const DerivativeIntegral F(T, cl.dT[static_cast<std::size_t>(k)]);
                for (Index j = 0; j < T.inputs(); ++j) {
                    const EntryL1& e = an.entries[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
                    if (e.first_sign == 0) continue;
                    double s = e.first_sign, total = 0.0, prev = 0.0;
                    for (double r : e.roots) {
                        const double Fr = F.at(r)(i, j);
                        total += s * (Fr - prev);
                        prev = Fr;
                        s = -s;
                    }
                    total += s * (F.at(std::numeric_limits<double>::infinity())(i, j) - prev);
                    b.gradient(k) += total;
                }
            }
        }
        ev.branches.push_back(std::move(b));
    }
    std::sort(ev.branches.begin(), ev.branches.end(), [](const Branch& a, const Branch& b) { return a.value > b.value; });
    ev.gradient = ev.branches.front().gradient;
    return ev;
}

NormEvaluation eval_subgrad(NormKind kind, const Plant& P, const ChannelSelector& sel, const ControllerStructure& cs,
                            const VectorXd& x) {
    switch (kind) {
        case NormKind::hinf: return eval_hinf_subgrad(P, sel, cs, x);
        case NormKind::pk_gn: return eval_pkgn_subgrad(P, sel, cs, x);
        case NormKind::row_l1: break;
    }
    throw std::invalid_argument("eval_subgrad: unsupported norm kind");
}

// --- certificates ----------------------------------------------------------------

Certificate certify(CertificateKind kind, double value, double error, double r_inverse, double constraint_slack,
                    const std::vector<double>& abscissae) {
    Certificate c;
    c.kind = kind;
    c.value = value;
    c.error = error;
    c.threshold = r_inverse;
    c.margin = r_inverse - value - error;
    c.constraint_slack = constraint_slack;
    c.abscissae = abscissae;
    c.hurwitz = std::all_of(abscissae.begin(), abscissae.end(), [](double a) { return a < 0; });
    c.pass = std::isfinite(value) && c.margin > 0 && c.hurwitz && !(constraint_slack < 0);
    return c;
}

Json certificate_to_json(const Certificate& c) {
    Json j{{"kind", c.kind == CertificateKind::BIBO ? "BIBO" : "L2"},
           {"value", c.value},
           {"error_bound", c.error},
           {"threshold", c.threshold},
           {"margin", c.margin},
           {"hurwitz", c.hurwitz},
           {"abscissae", c.abscissae},
           {"verdict", c.pass ? "PASS" : "FAIL"}};
    if (std::isfinite(c.constraint_slack)) j["constraint_slack"] = c.constraint_slack;
    return j;
}

}  // namespace pkgain
