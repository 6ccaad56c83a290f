#pragma once

// State-space algebra for finite-dimensional continuous-time LTI systems.
//
// Every type here is templated on the scalar so the same interconnection code
// runs on double (evaluation) and std::complex<double> (complex-step
// derivatives of closed loops with respect to controller parameters).

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>
#include <utility>
#include <vector>

#include "pkgain/errors.hpp"

namespace pkgain {

using Index = Eigen::Index;

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXcd;
using Eigen::VectorXd;

// Condition number beyond which an algebraic loop counts as ill-posed.
inline constexpr double kLoopConditionLimit = 1e12;

namespace detail {

template <typename Scalar>
double real_value(const Scalar& s) {
    if constexpr (std::is_same_v<Scalar, std::complex<double>>) {
        return s.real();
    } else {
        return static_cast<double>(s);
    }
}

template <typename Derived>
MatrixXd real_part(const Eigen::MatrixBase<Derived>& M) {
    MatrixXd R(M.rows(), M.cols());
    for (Index i = 0; i < M.rows(); ++i)
        for (Index j = 0; j < M.cols(); ++j) R(i, j) = real_value(M(i, j));
    return R;
}

inline double condition_number(const MatrixXd& M) {
    if (M.size() == 0) return 1.0;
    Eigen::JacobiSVD<MatrixXd> svd(M);
    const auto& s = svd.singularValues();
    const double smin = s(s.size() - 1);
    if (smin == 0.0) return std::numeric_limits<double>::infinity();
    return s(0) / smin;
}

// Inverse of a square loop matrix; throws when numerically singular.
template <typename Scalar>
MatrixX<Scalar> loop_inverse(const MatrixX<Scalar>& M, const char* what) {
    if (M.size() == 0) return M;
    if (condition_number(real_part(M)) > kLoopConditionLimit)
        throw SingularLoopError(std::string(what) + ": algebraic loop is singular");
    return M.partialPivLu().inverse();
}

}  // namespace detail

/// Realization (A, B, C, D) of x' = Ax + Bu, y = Cx + Du.
/// A state dimension of zero encodes a static gain D.
template <typename Scalar = double>
struct StateSpace {
    using Matrix = MatrixX<Scalar>;

    Matrix A, B, C, D;

    StateSpace() = default;
    StateSpace(Matrix a, Matrix b, Matrix c, Matrix d)
        : A(std::move(a)), B(std::move(b)), C(std::move(c)), D(std::move(d)) {
        validate();
    }

    static StateSpace gain(Matrix d) {
        const Index p = d.rows(), m = d.cols();
        return StateSpace(Matrix(0, 0), Matrix(0, m), Matrix(p, 0), std::move(d));
    }
    static StateSpace identity(Index m) { return gain(Matrix::Identity(m, m)); }
    static StateSpace zero(Index outputs, Index inputs) { return gain(Matrix::Zero(outputs, inputs)); }

    [[nodiscard]] Index states() const { return A.rows(); }
    [[nodiscard]] Index inputs() const { return D.cols(); }
    [[nodiscard]] Index outputs() const { return D.rows(); }
    [[nodiscard]] bool is_static() const { return A.rows() == 0; }

    void validate() const {
        const Index n = A.rows();
        if (A.cols() != n || B.rows() != n || C.cols() != n || D.rows() != C.rows() ||
            D.cols() != B.cols())
            throw DimensionError("StateSpace: inconsistent dimensions A " + shape(A) + ", B " +
                                 shape(B) + ", C " + shape(C) + ", D " + shape(D));
    }

    template <typename To>
    [[nodiscard]] StateSpace<To> cast() const {
        return StateSpace<To>(A.template cast<To>(), B.template cast<To>(), C.template cast<To>(),
                              D.template cast<To>());
    }

private:
    static std::string shape(const Matrix& M) {
        return std::to_string(M.rows()) + "x" + std::to_string(M.cols());
    }
};

using System = StateSpace<double>;

// ---------------------------------------------------------------------------
// Elementary interconnections
// ---------------------------------------------------------------------------

/// Product G(s)H(s): H acts first.
template <typename Scalar>
StateSpace<Scalar> operator*(const StateSpace<Scalar>& G, const StateSpace<Scalar>& H) {
    if (G.inputs() != H.outputs()) throw DimensionError("series: G.inputs != H.outputs");
    using M = MatrixX<Scalar>;
    const Index nh = H.states(), ng = G.states();
    M A = M::Zero(nh + ng, nh + ng);
    A.topLeftCorner(nh, nh) = H.A;
    A.bottomLeftCorner(ng, nh) = G.B * H.C;
    A.bottomRightCorner(ng, ng) = G.A;
    M B(nh + ng, H.inputs());
    B << H.B, G.B * H.D;
    M C(G.outputs(), nh + ng);
    C << G.D * H.C, G.C;
    return {std::move(A), std::move(B), std::move(C), G.D * H.D};
}

template <typename Scalar>
StateSpace<Scalar> operator*(const Scalar& k, const StateSpace<Scalar>& G) {
    return {G.A, G.B, k * G.C, k * G.D};
}

template <typename Scalar>
StateSpace<Scalar> operator*(const MatrixX<Scalar>& K, const StateSpace<Scalar>& G) {
    return {G.A, G.B, K * G.C, K * G.D};
}

template <typename Scalar>
StateSpace<Scalar> operator*(const StateSpace<Scalar>& G, const MatrixX<Scalar>& K) {
    return {G.A, G.B * K, G.C, G.D * K};
}

/// Block diagonal system diag(G, H).
template <typename Scalar>
StateSpace<Scalar> append(const StateSpace<Scalar>& G, const StateSpace<Scalar>& H) {
    using M = MatrixX<Scalar>;
    auto blk = [](const M& X, const M& Y) {
        M Z = M::Zero(X.rows() + Y.rows(), X.cols() + Y.cols());
        Z.topLeftCorner(X.rows(), X.cols()) = X;
        Z.bottomRightCorner(Y.rows(), Y.cols()) = Y;
        return Z;
    };
    return {blk(G.A, H.A), blk(G.B, H.B), blk(G.C, H.C), blk(G.D, H.D)};
}

template <typename Scalar>
StateSpace<Scalar> operator+(const StateSpace<Scalar>& G, const StateSpace<Scalar>& H) {
    if (G.inputs() != H.inputs() || G.outputs() != H.outputs())
        throw DimensionError("parallel: dimension mismatch");
    StateSpace<Scalar> S = append(G, H);
    using M = MatrixX<Scalar>;
    M B(S.states(), G.inputs());
    B << G.B, H.B;
    M C(G.outputs(), S.states());
    C << G.C, H.C;
    return {S.A, std::move(B), std::move(C), G.D + H.D};
}

template <typename Scalar>
StateSpace<Scalar> operator-(const StateSpace<Scalar>& G) {
    return {G.A, G.B, -G.C, -G.D};
}

template <typename Scalar>
StateSpace<Scalar> operator-(const StateSpace<Scalar>& G, const StateSpace<Scalar>& H) {
    return G + (-H);
}

/// [G1 G2]: inputs stacked, outputs summed.
template <typename Scalar>
StateSpace<Scalar> hstack(const StateSpace<Scalar>& G1, const StateSpace<Scalar>& G2) {
    if (G1.outputs() != G2.outputs()) throw DimensionError("hstack: output mismatch");
    StateSpace<Scalar> S = append(G1, G2);
    using M = MatrixX<Scalar>;
    M C(G1.outputs(), S.states());
    C << G1.C, G2.C;
    M D(G1.outputs(), G1.inputs() + G2.inputs());
    D << G1.D, G2.D;
    return {S.A, S.B, std::move(C), std::move(D)};
}

/// [G1; G2]: shared input, outputs stacked.
template <typename Scalar>
StateSpace<Scalar> vstack(const StateSpace<Scalar>& G1, const StateSpace<Scalar>& G2) {
    if (G1.inputs() != G2.inputs()) throw DimensionError("vstack: input mismatch");
    StateSpace<Scalar> S = append(G1, G2);
    using M = MatrixX<Scalar>;
    M B(S.states(), G1.inputs());
    B << G1.B, G2.B;
    M D(G1.outputs() + G2.outputs(), G1.inputs());
    D << G1.D, G2.D;
    return {S.A, std::move(B), S.C, std::move(D)};
}

template <typename Scalar>
StateSpace<Scalar> block(const StateSpace<Scalar>& G11, const StateSpace<Scalar>& G12,
                         const StateSpace<Scalar>& G21, const StateSpace<Scalar>& G22) {
    return vstack(hstack(G11, G12), hstack(G21, G22));
}

/// System inverse; needs an invertible feedthrough.
template <typename Scalar>
StateSpace<Scalar> inverse(const StateSpace<Scalar>& G) {
    if (G.inputs() != G.outputs()) throw DimensionError("inverse: system is not square");
    const MatrixX<Scalar> Di = detail::loop_inverse<Scalar>(G.D, "inverse");
    return {G.A - G.B * Di * G.C, G.B * Di, -Di * G.C, Di};
}

/// Closes a static interconnection: inputs `feed_in[k]` receive outputs
/// `feed_out[k]`. Fed inputs and fed outputs are removed from the result.
template <typename Scalar>
StateSpace<Scalar> connect(const StateSpace<Scalar>& S, const std::vector<Index>& feed_in,
                           const std::vector<Index>& feed_out) {
    if (feed_in.size() != feed_out.size()) throw DimensionError("connect: size mismatch");
    using M = MatrixX<Scalar>;
    const Index k = static_cast<Index>(feed_in.size());
    auto complement = [](Index total, const std::vector<Index>& used) {
        std::vector<Index> keep;
        for (Index i = 0; i < total; ++i)
            if (std::find(used.begin(), used.end(), i) == used.end()) keep.push_back(i);
        return keep;
    };
    const auto ext_in = complement(S.inputs(), feed_in);
    const auto ext_out = complement(S.outputs(), feed_out);
    auto cols = [](const M& X, const std::vector<Index>& idx) {
        M Y(X.rows(), static_cast<Index>(idx.size()));
        for (std::size_t j = 0; j < idx.size(); ++j) Y.col(static_cast<Index>(j)) = X.col(idx[j]);
        return Y;
    };
    auto rows = [](const M& X, const std::vector<Index>& idx) {
        M Y(static_cast<Index>(idx.size()), X.cols());
        for (std::size_t i = 0; i < idx.size(); ++i) Y.row(static_cast<Index>(i)) = X.row(idx[i]);
        return Y;
    };
    const M Bf = cols(S.B, feed_in), Be = cols(S.B, ext_in);
    const M Cg = rows(S.C, feed_out), Co = rows(S.C, ext_out);
    const M Dgf = rows(cols(S.D, feed_in), feed_out);
    const M Dge = rows(cols(S.D, ext_in), feed_out);
    const M Dof = rows(cols(S.D, feed_in), ext_out);
    const M Doe = rows(cols(S.D, ext_in), ext_out);
    // f = Cg x + Dge e + Dgf f
    const M L = detail::loop_inverse<Scalar>(M(M::Identity(k, k) - Dgf), "connect");
    return {S.A + Bf * L * Cg, Be + Bf * L * Dge, Co + Dof * L * Cg, Doe + Dof * L * Dge};
}

// ---------------------------------------------------------------------------
// Partitioned plants
// ---------------------------------------------------------------------------

/// Contiguous named index range over the inputs or outputs of a system.
struct Group {
    std::string name;
    Index begin = 0;
    Index size = 0;
    [[nodiscard]] Index end() const { return begin + size; }
};

struct ChannelSelector {
    std::string from;  // input group
    std::string to;    // output group
};

namespace detail {

inline void check_partition(const std::vector<Group>& groups, Index total, const char* axis) {
    Index next = 0;
    for (const auto& g : groups) {
        if (g.begin != next || g.size < 0)
            throw DimensionError(std::string("groups over ") + axis +
                                 " must be contiguous, ordered and disjoint");
        for (const auto& h : groups)
            if (&h != &g && h.name == g.name)
                throw DimensionError(std::string("duplicate group name '") + g.name + "'");
        next = g.end();
    }
    if (next != total)
        throw DimensionError(std::string("groups over ") + axis + " do not cover all indices");
}

inline const Group& find_group(const std::vector<Group>& groups, const std::string& name) {
    for (const auto& g : groups)
        if (g.name == name) return g;
    throw UnknownGroupError("unknown group '" + name + "'");
}

inline std::vector<Group> pack(const std::vector<Group>& groups, const std::string& drop) {
    std::vector<Group> out;
    Index next = 0;
    for (const auto& g : groups) {
        if (g.name == drop) continue;
        out.push_back({g.name, next, g.size});
        next += g.size;
    }
    return out;
}

}  // namespace detail

/// A StateSpace whose inputs and outputs are split into named groups,
/// e.g. inputs (p, w, u) and outputs (q, z, y).
template <typename Scalar = double>
struct PartitionedPlant {
    StateSpace<Scalar> sys;
    std::vector<Group> inputs;
    std::vector<Group> outputs;

    PartitionedPlant() = default;
    PartitionedPlant(StateSpace<Scalar> s, std::vector<Group> in, std::vector<Group> out)
        : sys(std::move(s)), inputs(std::move(in)), outputs(std::move(out)) {
        validate();
    }

    void validate() const {
        sys.validate();
        detail::check_partition(inputs, sys.inputs(), "inputs");
        detail::check_partition(outputs, sys.outputs(), "outputs");
    }

    [[nodiscard]] const Group& input(const std::string& name) const {
        return detail::find_group(inputs, name);
    }
    [[nodiscard]] const Group& output(const std::string& name) const {
        return detail::find_group(outputs, name);
    }
    [[nodiscard]] bool has_input(const std::string& name) const {
        return std::any_of(inputs.begin(), inputs.end(), [&](const Group& g) { return g.name == name; });
    }
    [[nodiscard]] bool has_output(const std::string& name) const {
        return std::any_of(outputs.begin(), outputs.end(), [&](const Group& g) { return g.name == name; });
    }

    template <typename To>
    [[nodiscard]] PartitionedPlant<To> cast() const {
        return PartitionedPlant<To>(sys.template cast<To>(), inputs, outputs);
    }
};

using Plant = PartitionedPlant<double>;

/// Builds groups from (name, size) pairs laid out in order.
inline std::vector<Group> make_groups(const std::vector<std::pair<std::string, Index>>& sizes) {
    std::vector<Group> groups;
    Index next = 0;
    for (const auto& [name, size] : sizes) {
        groups.push_back({name, next, size});
        next += size;
    }
    return groups;
}

/// Sub-system from input group `sel.from` to output group `sel.to`.
template <typename Scalar>
StateSpace<Scalar> channel(const PartitionedPlant<Scalar>& P, const ChannelSelector& sel) {
    const Group& gi = P.input(sel.from);
    const Group& go = P.output(sel.to);
    const auto& S = P.sys;
    return {S.A, S.B.middleCols(gi.begin, gi.size), S.C.middleRows(go.begin, go.size),
            S.D.block(go.begin, gi.begin, go.size, gi.size)};
}

/// Lower LFT F_l(P, K): closes u = K y. The result keeps the remaining
/// groups in their original order; states are (plant, controller).
template <typename Scalar>
PartitionedPlant<Scalar> feedback_lft(const PartitionedPlant<Scalar>& P, const StateSpace<Scalar>& K,
                                      const std::string& u_group = "u",
                                      const std::string& y_group = "y") {
    using M = MatrixX<Scalar>;
    const Group& gu = P.input(u_group);
    const Group& gy = P.output(y_group);
    if (K.inputs() != gy.size || K.outputs() != gu.size)
        throw DimensionError("feedback_lft: controller is " + std::to_string(K.outputs()) + "x" +
                             std::to_string(K.inputs()) + ", loop needs " +
                             std::to_string(gu.size) + "x" + std::to_string(gy.size));
    const auto& S = P.sys;
    const Index n = S.states(), nk = K.states();
    const Index mu = gu.size, py = gy.size;

    auto drop_cols = [](const M& X, const Group& g) {
        M Y(X.rows(), X.cols() - g.size);
        Y << X.leftCols(g.begin), X.rightCols(X.cols() - g.end());
        return Y;
    };
    auto drop_rows = [](const M& X, const Group& g) {
        M Y(X.rows() - g.size, X.cols());
        Y << X.topRows(g.begin), X.bottomRows(X.rows() - g.end());
        return Y;
    };

    const M B1 = drop_cols(S.B, gu);
    const M B2 = S.B.middleCols(gu.begin, mu);
    const M C1 = drop_rows(S.C, gy);
    const M C2 = S.C.middleRows(gy.begin, py);
    const M Dr = drop_rows(S.D, gy);
    const M Dy = S.D.middleRows(gy.begin, py);
    const M D11 = drop_cols(Dr, gu);
    const M D12 = Dr.middleCols(gu.begin, mu);
    const M D21 = drop_cols(Dy, gu);
    const M D22 = Dy.middleCols(gu.begin, mu);

    // u = Q (DK C2 x + CK xk + DK D21 w),  Q = (I - DK D22)^-1
    const M Q = detail::loop_inverse<Scalar>(M(M::Identity(mu, mu) - K.D * D22), "feedback_lft");
    const M Ux = Q * K.D * C2, Uk = Q * K.C, Uw = Q * K.D * D21;

    M A(n + nk, n + nk);
    A << S.A + B2 * Ux, B2 * Uk, K.B * (C2 + D22 * Ux), K.A + K.B * D22 * Uk;
    M B(n + nk, B1.cols());
    B << B1 + B2 * Uw, K.B * (D21 + D22 * Uw);
    M C(C1.rows(), n + nk);
    C << C1 + D12 * Ux, D12 * Uk;
    M D = D11 + D12 * Uw;

    return PartitionedPlant<Scalar>({std::move(A), std::move(B), std::move(C), std::move(D)},
                                    detail::pack(P.inputs, u_group), detail::pack(P.outputs, y_group));
}

/// Redheffer star product M * N. M has input groups (w, u) and output groups
/// (z, y); N has input groups (y', w') and output groups (u', z'). The inner
/// channels y -> y' and u' -> u are closed. Result groups: (w, w') / (z, z').
template <typename Scalar>
PartitionedPlant<Scalar> star_product(const PartitionedPlant<Scalar>& M, const PartitionedPlant<Scalar>& N) {
    if (M.inputs.size() != 2 || M.outputs.size() != 2 || N.inputs.size() != 2 || N.outputs.size() != 2)
        throw DimensionError("star_product: both operands need exactly two input and output groups");
    const Group& mu = M.inputs[1];
    const Group& my = M.outputs[1];
    const Group& ny = N.inputs[0];
    const Group& nu = N.outputs[0];
    if (my.size != ny.size || nu.size != mu.size)
        throw DimensionError("star_product: inner channel dimensions differ");

    const StateSpace<Scalar> S = append(M.sys, N.sys);
    const Index mi = M.sys.inputs(), mo = M.sys.outputs();
    std::vector<Index> feed_in, feed_out;
    for (Index k = 0; k < mu.size; ++k) {  // M.u <- N.u'
        feed_in.push_back(mu.begin + k);
        feed_out.push_back(mo + nu.begin + k);
    }
    for (Index k = 0; k < ny.size; ++k) {  // N.y' <- M.y
        feed_in.push_back(mi + ny.begin + k);
        feed_out.push_back(my.begin + k);
    }
    StateSpace<Scalar> R;
    try {
        R = connect(S, feed_in, feed_out);
    } catch (const SingularLoopError&) {
        throw SingularLoopError("star_product: inner loop is ill-posed");
    }
    auto outer_name = [](const std::string& a, const std::string& b) {
        return a == b ? b + "'" : b;
    };
    auto in = make_groups({{M.inputs[0].name, M.inputs[0].size},
                           {outer_name(M.inputs[0].name, N.inputs[1].name), N.inputs[1].size}});
    auto out = make_groups({{M.outputs[0].name, M.outputs[0].size},
                            {outer_name(M.outputs[0].name, N.outputs[1].name), N.outputs[1].size}});
    return PartitionedPlant<Scalar>(std::move(R), std::move(in), std::move(out));
}

/// Loop shift that absorbs p = Gamma q + psi into the plant:
/// A <- A + Bp Gamma Cq. Requires Dqp = 0 and Dqu handled by leaving D intact.
template <typename Scalar>
PartitionedPlant<Scalar> sector_shift(const PartitionedPlant<Scalar>& P, const MatrixX<Scalar>& Gamma,
                                      const std::string& p_group = "p", const std::string& q_group = "q") {
    const Group& gp = P.input(p_group);
    const Group& gq = P.output(q_group);
    if (Gamma.rows() != gp.size || Gamma.cols() != gq.size)
        throw DimensionError("sector_shift: Gamma must be dim(p) x dim(q)");
    const auto& S = P.sys;
    const MatrixX<Scalar> Bp = S.B.middleCols(gp.begin, gp.size);
    const MatrixX<Scalar> Cq = S.C.middleRows(gq.begin, gq.size);
    const MatrixX<Scalar> Dqp = S.D.block(gq.begin, gp.begin, gq.size, gp.size);
    if (detail::real_part(Dqp).cwiseAbs().maxCoeff() != 0.0 && Dqp.size() > 0)
        throw DimensionError("sector_shift: requires zero feedthrough p -> q");
    // Full generality: every signal driven by q picks up Bp Gamma (C_q x + D_q* v).
    StateSpace<Scalar> R = S;
    R.A = S.A + Bp * Gamma * Cq;
    const MatrixX<Scalar> Dq = S.D.middleRows(gq.begin, gq.size);
    R.B = S.B + Bp * Gamma * Dq;
    R.C = S.C + S.D.middleCols(gp.begin, gp.size) * Gamma * Cq;
    R.D = S.D + S.D.middleCols(gp.begin, gp.size) * Gamma * Dq;
    return PartitionedPlant<Scalar>(std::move(R), P.inputs, P.outputs);
}

template <typename Scalar>
PartitionedPlant<Scalar> sector_shift(const PartitionedPlant<Scalar>& P, double c,
                                      const std::string& p_group = "p", const std::string& q_group = "q") {
    const Index np = P.input(p_group).size, nq = P.output(q_group).size;
    if (np != nq) throw DimensionError("sector_shift: scalar shift needs dim p == dim q");
    return sector_shift(P, MatrixX<Scalar>(Scalar(c) * MatrixX<Scalar>::Identity(np, nq)), p_group, q_group);
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

struct HurwitzTest {
    bool stable = true;
    double abscissa = -std::numeric_limits<double>::infinity();
};

/// max Re(lambda(A)); -inf for the empty matrix.
inline double spectral_abscissa(const MatrixXd& A) {
    if (A.rows() == 0) return -std::numeric_limits<double>::infinity();
    Eigen::EigenSolver<MatrixXd> es(A, false);
    return es.eigenvalues().real().maxCoeff();
}

inline HurwitzTest is_hurwitz(const MatrixXd& A) {
    if (A.rows() != A.cols()) throw DimensionError("is_hurwitz: A must be square");
    const double a = spectral_abscissa(A);
    return {a < 0.0, a};
}

/// C (jw I - A)^-1 B + D.
inline MatrixXcd freq_response(const System& G, double omega) {
    const Index n = G.states();
    MatrixXcd R = G.D.cast<std::complex<double>>();
    if (n == 0) return R;
    MatrixXcd M = -G.A.cast<std::complex<double>>();
    M.diagonal().array() += std::complex<double>(0.0, omega);
    Eigen::PartialPivLU<MatrixXcd> lu(M);
    const double scale = std::max(1.0, M.cwiseAbs().maxCoeff());
    if (std::abs(lu.determinant()) == 0.0 || lu.rcond() < 1e-15 * 1.0 / scale * scale)
        throw ResonanceError("freq_response: jw is an eigenvalue of A");
    R += G.C.cast<std::complex<double>>() * lu.solve(G.B.cast<std::complex<double>>());
    return R;
}

inline double max_singular_value(const MatrixXcd& M) {
    if (M.size() == 0) return 0.0;
    Eigen::JacobiSVD<MatrixXcd> svd(M);
    return svd.singularValues()(0);
}

}  // namespace pkgain
