#include "pkgain/transforms.hpp"

#include <cmath>

namespace pkgain {

bool is_bistable(const System& Psi) {
    if (Psi.inputs() != Psi.outputs()) return false;
    if (detail::condition_number(Psi.D) > kLoopConditionLimit) return false;
    if (Psi.is_static()) return true;
    if (!is_hurwitz(Psi.A).stable) return false;
    return is_hurwitz(inverse(Psi).A).stable;
}

void require_bistable(const System& Psi, const std::string& what) {
    if (Psi.inputs() != Psi.outputs()) throw DimensionError(what + ": factor must be square");
    if (!is_bistable(Psi)) throw NotBistableError(what + ": factor or its inverse is not stable");
}

FactorizedMultiplier::FactorizedMultiplier(System psi, MatrixXd p) : Psi(std::move(psi)), P(std::move(p)) {
    require_bistable(Psi, "multiplier");
    if (P.rows() != P.cols() || P.rows() != Psi.outputs()) throw DimensionError("multiplier: P has the wrong size");
    if ((P - P.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1 + P.cwiseAbs().maxCoeff()))
        throw std::invalid_argument("multiplier: P must be symmetric");
    if (detail::condition_number(P) > kLoopConditionLimit) throw std::invalid_argument("multiplier: P is singular");
}

TriangularFactor TriangularFactor::lower(System psi11, System psi21, System psi22) {
    require_bistable(psi11, "Psi11");
    require_bistable(psi22, "Psi22");
    if (!psi21.is_static() && !is_hurwitz(psi21.A).stable) throw NotBistableError("Psi21 is not stable");
    if (psi21.inputs() != psi11.outputs() || psi21.outputs() != psi22.outputs())
        throw DimensionError("lower factor: Psi21 must be dim(p) x dim(q)");
    return {Kind::lower, std::move(psi11), std::move(psi21), std::move(psi22)};
}

TriangularFactor TriangularFactor::upper(System psi11, System psi12, System psi22) {
    require_bistable(psi11, "Psi11");
    require_bistable(psi22, "Psi22");
    if (!psi12.is_static() && !is_hurwitz(psi12.A).stable) throw NotBistableError("Psi12 is not stable");
    if (psi12.outputs() != psi11.outputs() || psi12.inputs() != psi22.inputs())
        throw DimensionError("upper factor: Psi12 must be dim(q) x dim(p)");
    return {Kind::upper, std::move(psi11), std::move(psi12), std::move(psi22)};
}

namespace {

MatrixXd left_inverse(const MatrixXd& M, const char* what) {
    const MatrixXd N = M.transpose() * M;
    if (M.rows() < M.cols() || detail::condition_number(N) > kLoopConditionLimit)
        throw DimensionError(std::string(what) + " is not left invertible");
    return N.ldlt().solve(M.transpose());
}

}  // namespace

PolyhedralChange::PolyhedralChange(MatrixXd t, MatrixXd s)
    : T(std::move(t)), S(std::move(s)), T_pinv(left_inverse(T, "T")), S_pinv(left_inverse(S, "S")) {}

PolyhedralChange PolyhedralChange::identity(Index np, Index nq) {
    return {MatrixXd::Identity(np, np), MatrixXd::Identity(nq, nq)};
}

System augment_Ga(const System& G, const FactorizedMultiplier& F) {
    const Index nq = G.outputs(), np = G.inputs();
    if (F.Psi.inputs() != nq + np) throw DimensionError("augment_Ga: Psi must act on (q, p)");
    const System mid = block(System::gain(-MatrixXd::Identity(nq, nq)), 2.0 * G, System::gain(MatrixXd::Zero(np, nq)),
                             System::gain(MatrixXd::Identity(np, np)));
    return F.Psi * mid * inverse(F.Psi);
}

System mobius_Ge(const System& Ga, const MatrixXd& P) {
    if (P.rows() != Ga.inputs() || P.cols() != Ga.inputs() || Ga.inputs() != Ga.outputs())
        throw DimensionError("mobius_Ge: G_a must be square and match P");
    const Index n = Ga.inputs();
    const double s2 = std::sqrt(2.0);
    const MatrixXd I = MatrixXd::Identity(n, n);
    MatrixXd Bm(2 * n, 2 * n);
    Bm << -I, s2 * I, -s2 * I, I;
    const Plant B(System::gain(Bm), make_groups({{"w", n}, {"u", n}}), make_groups({{"z", n}, {"y", n}}));
    const MatrixXd Pi = detail::loop_inverse<double>(P, "mobius_Ge");
    try {
        return feedback_lft(B, Ga * Pi).sys;
    } catch (const SingularLoopError&) {
        throw SingularLoopError("mobius_Ge: G_a P^-1 - I is not invertible");
    }
}

System triangular_lower(const System& G, const TriangularFactor& F) {
    if (F.kind != TriangularFactor::Kind::lower) throw std::invalid_argument("triangular_lower: needs a lower factor");
    if (F.Psi11.inputs() != G.outputs() || F.Psi22.inputs() != G.inputs())
        throw DimensionError("triangular_lower: factor does not match G");
    const System M = F.Psi22 + F.off * G;
    try {
        return F.Psi11 * G * inverse(M);
    } catch (const SingularLoopError&) {
        throw SingularLoopError("triangular_lower: Psi22 + Psi21 G is not invertible");
    }
}

System triangular_upper(const System& G, const TriangularFactor& F) {
    if (F.kind != TriangularFactor::Kind::upper) throw std::invalid_argument("triangular_upper: needs an upper factor");
    if (F.Psi11.inputs() != G.outputs() || F.Psi22.inputs() != G.inputs())
        throw DimensionError("triangular_upper: factor does not match G");
    return (F.Psi11 * G + F.off) * inverse(F.Psi22);
}

System polyhedral_transform(const System& G, const PolyhedralChange& X) {
    if (X.T.cols() != G.inputs() || X.S.cols() != G.outputs())
        throw DimensionError("polyhedral_transform: T must act on p and S on q");
    return {G.A, G.B * X.T_pinv, X.S * G.C, X.S * G.D * X.T_pinv};
}

Plant polyhedral_transform(const Plant& P, const PolyhedralChange& X, const std::string& p_group,
                           const std::string& q_group) {
    const Group& gp = P.input(p_group);
    const Group& gq = P.output(q_group);
    if (X.T.cols() != gp.size || X.S.cols() != gq.size)
        throw DimensionError("polyhedral_transform: T must act on p and S on q");
    const System& S = P.sys;
    const Index mi = S.inputs() - gp.size + X.T.rows();
    const Index mo = S.outputs() - gq.size + X.S.rows();
    // Input map: new inputs -> old inputs; output map: old outputs -> new outputs.
    MatrixXd Rin = MatrixXd::Zero(S.inputs(), mi);
    MatrixXd Rout = MatrixXd::Zero(mo, S.outputs());
    std::vector<std::pair<std::string, Index>> in, out;
    Index col = 0;
    for (const auto& g : P.inputs) {
        if (g.name == p_group) {
            Rin.block(g.begin, col, g.size, X.T.rows()) = X.T_pinv;
            in.push_back({g.name, X.T.rows()});
            col += X.T.rows();
        } else {
            Rin.block(g.begin, col, g.size, g.size).setIdentity();
            in.push_back({g.name, g.size});
            col += g.size;
        }
    }
    Index row = 0;
    for (const auto& g : P.outputs) {
        if (g.name == q_group) {
            Rout.block(row, g.begin, X.S.rows(), g.size) = X.S;
            out.push_back({g.name, X.S.rows()});
            row += X.S.rows();
        } else {
            Rout.block(row, g.begin, g.size, g.size).setIdentity();
            out.push_back({g.name, g.size});
            row += g.size;
        }
    }
    return Plant(System(S.A, S.B * Rin, Rout * S.C, Rout * S.D * Rin), make_groups(in), make_groups(out));
}

Nonlinearity transform_nonlinearity(const Nonlinearity& delta, const PolyhedralChange& X) {
    if (X.T.cols() != delta.np || X.S.cols() != delta.nq)
        throw DimensionError("transform_nonlinearity: T must act on p and S on q");
    return compose(X.T, delta, X.S_pinv);
}

Nonlinearity transform_nonlinearity(const Nonlinearity& delta, const TriangularFactor& F) {
    if (!F.is_static())
        throw std::invalid_argument("transform_nonlinearity: dynamic factors need transform_dynamic");
    if (F.Psi11.inputs() != delta.nq || F.Psi22.inputs() != delta.np)
        throw DimensionError("transform_nonlinearity: factor does not match the nonlinearity");
    const MatrixXd P11 = F.Psi11.D, Poff = F.off.D, P22 = F.Psi22.D;
    const MatrixXd P11i = detail::loop_inverse<double>(P11, "Psi11");
    auto f = delta.eval;
    if (F.kind == TriangularFactor::Kind::lower) {
        return {[f, P11i, Poff, P22](double t, const VectorXd& q1) {
                    const VectorXd q = P11i * q1;
                    return VectorXd(Poff * q + P22 * f(t, q));
                },
                delta.nq, delta.np, delta.tag + "-lower"};
    }
    return {[f, P11, P11i, Poff, P22](double t, const VectorXd& q1) {
                // q1 = P11 q + P12 f(q)
                VectorXd q = P11i * q1;
                const Index n = q.size();
                for (int it = 0; it < 50; ++it) {
                    const VectorXd r = P11 * q + Poff * f(t, q) - q1;
                    if (r.cwiseAbs().maxCoeff() <= 1e-13 * (1 + q1.cwiseAbs().maxCoeff())) break;
                    MatrixXd J(n, n);
                    for (Index j = 0; j < n; ++j) {
                        const double h = 1e-7 * (1 + std::abs(q(j)));
                        VectorXd qh = q;
                        qh(j) += h;
                        J.col(j) = (P11 * qh + Poff * f(t, qh) - q1 - r) / h;
                    }
                    q -= J.fullPivLu().solve(r);
                    if (it == 49) throw SingularLoopError("upper transform: implicit loop did not converge");
                }
                return VectorXd(P22 * f(t, q));
            },
            delta.nq, delta.np, delta.tag + "-upper"};
}

DynamicOperator as_operator(const Nonlinearity& delta) {
    auto f = delta.eval;
    return {0, delta.nq, delta.np, [f](double t, const VectorXd&, const VectorXd& q) { return f(t, q); },
            [](double, const VectorXd&, const VectorXd&) { return VectorXd(0); }};
}

DynamicOperator transform_dynamic(const Nonlinearity& delta, const TriangularFactor& F) {
    if (F.kind != TriangularFactor::Kind::lower) throw std::invalid_argument("transform_dynamic: needs a lower factor");
    if (F.Psi11.inputs() != delta.nq || F.Psi22.inputs() != delta.np)
        throw DimensionError("transform_dynamic: factor does not match the nonlinearity");
    const System inv11 = inverse(F.Psi11), P21 = F.off, P22 = F.Psi22;
    const Index n1 = inv11.states(), n2 = P21.states(), n3 = P22.states();
    auto f = delta.eval;
    // q = C1 x1 + D1 q1, p = f(q), p1 = C2 x2 + D2 q + C3 x3 + D3 p
    auto signals = [=](double t, const VectorXd& x, const VectorXd& q1) {
        const VectorXd q = inv11.C * x.head(n1) + inv11.D * q1;
        return std::pair<VectorXd, VectorXd>(q, f(t, q));
    };
    DynamicOperator op;
    op.nx = n1 + n2 + n3;
    op.nq = delta.nq;
    op.np = delta.np;
    op.output = [=](double t, const VectorXd& x, const VectorXd& q1) {
        const auto [q, p] = signals(t, x, q1);
        return VectorXd(P21.C * x.segment(n1, n2) + P21.D * q + P22.C * x.tail(n3) + P22.D * p);
    };
    op.derivative = [=](double t, const VectorXd& x, const VectorXd& q1) {
        const auto [q, p] = signals(t, x, q1);
        VectorXd dx(n1 + n2 + n3);
        dx << inv11.A * x.head(n1) + inv11.B * q1, P21.A * x.segment(n1, n2) + P21.B * q, P22.A * x.tail(n3) + P22.B * p;
        return dx;
    };
    return op;
}

}  // namespace pkgain
