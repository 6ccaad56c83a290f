#pragma once

// Loop transformations. The loop system G maps p to q and the nonlinearity
// Delta maps q back to p.

#include "pkgain/nonlin.hpp"

namespace pkgain {

class NotBistableError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Psi and Psi^{-1} both stable (static Psi: invertible D).
bool is_bistable(const System& Psi);
void require_bistable(const System& Psi, const std::string& what);

/// Pi = Psi^* P Psi with a bistable Psi and symmetric invertible P.
struct FactorizedMultiplier {
    System Psi;
    MatrixXd P;

    FactorizedMultiplier(System psi, MatrixXd p);
};

/// Lower: [Psi11 0; Psi21 Psi22] acting on (q, p). Upper: [Psi11 Psi12; 0 Psi22].
/// P is fixed to diag(I, -I).
struct TriangularFactor {
    enum class Kind { lower, upper };
    Kind kind;
    System Psi11;
    System off;  // Psi21 (lower) or Psi12 (upper)
    System Psi22;

    static TriangularFactor lower(System psi11, System psi21, System psi22);
    static TriangularFactor upper(System psi11, System psi12, System psi22);
    [[nodiscard]] bool is_static() const { return Psi11.is_static() && off.is_static() && Psi22.is_static(); }
};

/// p1 = T p, q1 = S q with left inverses from the normal equations.
struct PolyhedralChange {
    MatrixXd T, S, T_pinv, S_pinv;

    PolyhedralChange(MatrixXd t, MatrixXd s);
    static PolyhedralChange identity(Index np, Index nq);
};

/// G_a = Psi [-I 2G; 0 I] Psi^{-1}
System augment_Ga(const System& G, const FactorizedMultiplier& F);
/// (G_a P^-1 - I)^-1 (G_a P^-1 + I), realized as a lower LFT with
/// B = [-I sqrt2 I; -sqrt2 I I].
System mobius_Ge(const System& Ga, const MatrixXd& P);

/// Psi11 G (Psi22 + Psi21 G)^-1
System triangular_lower(const System& G, const TriangularFactor& F);
/// (Psi11 G + Psi12) Psi22^-1
System triangular_upper(const System& G, const TriangularFactor& F);

/// (A, B T+, S C, S D T+)
System polyhedral_transform(const System& G, const PolyhedralChange& X);
/// Same change applied to the p/q channels of a partitioned plant; the
/// other channels are left alone.
Plant polyhedral_transform(const Plant& P, const PolyhedralChange& X, const std::string& p_group = "p",
                           const std::string& q_group = "q");

/// T o Delta o S+
Nonlinearity transform_nonlinearity(const Nonlinearity& delta, const PolyhedralChange& X);
/// Static triangular factors only. Lower: Psi21 Psi11^-1 + Psi22 Delta Psi11^-1.
/// Upper: q is recovered from q1 = Psi11 q + Psi12 Delta(q) by Newton's method.
Nonlinearity transform_nonlinearity(const Nonlinearity& delta, const TriangularFactor& F);

/// A nonlinearity with internal dynamics, used by the simulator:
/// p = output(t, x, q), x' = derivative(t, x, q).
struct DynamicOperator {
    Index nx = 0, nq = 0, np = 0;
    std::function<VectorXd(double, const VectorXd&, const VectorXd&)> output;
    std::function<VectorXd(double, const VectorXd&, const VectorXd&)> derivative;
};

DynamicOperator as_operator(const Nonlinearity& delta);
/// Experimental: Delta transformed by dynamic lower-triangular factors,
/// with the states of Psi11^-1, Psi21 and Psi22 carried along.
DynamicOperator transform_dynamic(const Nonlinearity& delta, const TriangularFactor& F);

}  // namespace pkgain
