#pragma once

// Structured controller tuning: parametrizations, norm subgradients, a
// proximal bundle method and the mixed peak-gain / H-infinity programs.

#include <complex>
#include <functional>
#include <optional>
#include <random>

#include "pkgain/norms.hpp"

namespace pkgain {

enum class ControllerKind { none, static_gain, pid, fixed_order };

std::string to_string(ControllerKind k);

struct ControllerStructure {
    ControllerKind kind = ControllerKind::static_gain;
    Index ny = 1;
    Index nu = 1;
    Index order = 0;
    bool strictly_proper = false;

    static ControllerStructure none(Index ny, Index nu);
    static ControllerStructure static_gain(Index ny, Index nu);
    /// SISO Kp + Ki/s + Kd s/(Tf s + 1); x = (Kp, Ki, Kd, Tf).
    static ControllerStructure pid();
    /// x = (vec A_K, vec B_K, vec C_K, vec D_K), column-major; D_K omitted
    /// when strictly proper.
    static ControllerStructure fixed_order(Index order, Index ny, Index nu, bool strictly_proper = false);

    [[nodiscard]] Index parameter_count() const;
    /// Tf <= 0 and wrong lengths throw.
    [[nodiscard]] bool admissible(const VectorXd& x) const;

    template <typename Scalar>
    [[nodiscard]] StateSpace<Scalar> realize(const VectorX<Scalar>& x) const;
    [[nodiscard]] System realize(const VectorXd& x) const { return realize<double>(x); }
};

ControllerStructure controller_structure_from_json(const Json& j);
Json controller_structure_to_json(const ControllerStructure& cs);

/// The (Kp, Ki, Kd, Tf) parameters of a PID whose derivative slot carries a lag:
/// Kp + Ki/s + g/(Tf s + 1) equals (Kp + g) + Ki/s - g Tf s/(Tf s + 1).
VectorXd pid_from_lag_form(double kp, double ki, double lag_gain, double tf);

template <typename Scalar>
StateSpace<Scalar> ControllerStructure::realize(const VectorX<Scalar>& x) const {
    using M = MatrixX<Scalar>;
    if (x.size() != parameter_count())
        throw DimensionError("realize: expected " + std::to_string(parameter_count()) + " parameters, got " +
                             std::to_string(x.size()));
    switch (kind) {
        case ControllerKind::none:
            return StateSpace<Scalar>::gain(M::Zero(nu, ny));
        case ControllerKind::static_gain:
            return StateSpace<Scalar>::gain(Eigen::Map<const M>(x.data(), nu, ny));
        case ControllerKind::pid: {
            const Scalar kp = x(0), ki = x(1), kd = x(2), tf = x(3);
            if (!(detail::real_value(tf) > 0)) throw std::invalid_argument("realize: PID filter constant must be positive");
            M A = M::Zero(2, 2), B(2, 1), C(1, 2), D(1, 1);
            A(1, 1) = -Scalar(1) / tf;
            B << Scalar(1), Scalar(1);
            C << ki, -kd / (tf * tf);
            D << kp + kd / tf;
            return {std::move(A), std::move(B), std::move(C), std::move(D)};
        }
        case ControllerKind::fixed_order: {
            const Index n = order;
            Index at = 0;
            auto take = [&](Index r, Index c) {
                M out = Eigen::Map<const M>(x.data() + at, r, c);
                at += r * c;
                return out;
            };
            M A = take(n, n), B = take(n, ny), C = take(nu, n);
            M D = strictly_proper ? M(M::Zero(nu, ny)) : take(nu, ny);
            return {std::move(A), std::move(B), std::move(C), std::move(D)};
        }
    }
    throw std::logic_error("realize: unknown controller kind");
}

// --- closed-loop evaluation ------------------------------------------------

/// Channel `sel` of F_l(P, K(x)), closing u = K y.
System closed_loop(const Plant& P, const ChannelSelector& sel, const ControllerStructure& cs, const VectorXd& x);

/// Closed loop together with its parameter derivatives (complex step).
struct ClosedLoopDerivative {
    System T;
    std::vector<System> dT;  // same shape as T, matrices hold derivatives
};
ClosedLoopDerivative closed_loop_derivative(const Plant& P, const ChannelSelector& sel, const ControllerStructure& cs,
                                            const VectorXd& x);

/// One smooth piece of a max-type function: value and gradient at x.
struct Branch {
    double value = 0.0;
    VectorXd gradient;
    double where = 0.0;  // frequency (H-infinity) or row (peak gain)
};

struct NormEvaluation {
    NormKind kind = NormKind::hinf;
    bool stable = true;
    double value = 0.0;     // +inf when unstable
    double error = 0.0;
    VectorXd gradient;      // subgradient; abscissa gradient when unstable
    double abscissa = 0.0;
    std::vector<Branch> branches;  // near-active pieces (within `near` of the peak)
};

/// Spectral abscissa of A(x) and its gradient (simple eigenvalue assumed).
Branch abscissa_branch(const MatrixXd& A, const std::vector<MatrixXd>& dA);
/// Every eigenvalue with real part within `window` of the abscissa (one per
/// conjugate pair), largest first.
std::vector<Branch> abscissa_branches(const MatrixXd& A, const std::vector<MatrixXd>& dA, double window);

NormEvaluation eval_hinf_subgrad(const Plant& P, const ChannelSelector& sel, const ControllerStructure& cs,
                                 const VectorXd& x, double tol = 1e-9, double near = 0.99);
NormEvaluation eval_pkgn_subgrad(const Plant& P, const ChannelSelector& sel, const ControllerStructure& cs,
                                 const VectorXd& x, double tol = 1e-5, double near = 0.99);
NormEvaluation eval_subgrad(NormKind kind, const Plant& P, const ChannelSelector& sel, const ControllerStructure& cs,
                            const VectorXd& x);

// --- bundle method ---------------------------------------------------------

/// Oracle output at a point: merit value (+inf for inadmissible points) and
/// linearizations (value at the point, gradient). The first plane should be
/// the active one.
struct OracleResult {
    double value = std::numeric_limits<double>::infinity();
    std::vector<std::pair<double, VectorXd>> planes;
};
using Oracle = std::function<OracleResult(const VectorXd&)>;

struct BundleOptions {
    int max_iterations = 500;
    double tol = 1e-7;           // stop when predicted decrease < tol (1 + |f|)
    double tau0 = 1.0;           // initial proximity parameter
    double gamma_accept = 0.1;   // serious step threshold
    double gamma_good = 0.6;     // tau is relaxed above this ratio
    double downshift = 1e-4;     // nonconvexity downshift constant
    std::size_t max_planes = 60;
    /// Optional early stop once the merit drops below this value.
    double target = -std::numeric_limits<double>::infinity();
};

struct BundleStep {
    int iteration = 0;
    double value = 0.0;
    double tau = 0.0;
    bool serious = false;
};

struct BundleResult {
    VectorXd x;
    double value = std::numeric_limits<double>::infinity();
    int iterations = 0;
    int evaluations = 0;
    bool converged = false;
    bool reached_target = false;
    std::vector<BundleStep> trace;  // one entry per serious step
};

BundleResult bundle_minimize(const Oracle& f, VectorXd x0, const BundleOptions& opt);

/// min 1/2 |sum l_i g_i|^2 / tau - sum l_i e_i over the unit simplex.
VectorXd simplex_qp(const MatrixXd& G, const VectorXd& e, double tau);

// --- mixed programs ----------------------------------------------------------

struct ProgramChannel {
    Plant plant;
    ChannelSelector sel;
    NormKind kind = NormKind::pk_gn;
};

struct MixedProgramSpec {
    ProgramChannel objective;
    std::optional<ProgramChannel> constraint;  // ||.|| <= (1 + tau) gamma_inf
    double tau = 0.1;
    std::optional<double> gamma_inf;
    std::vector<Plant> stabilize;  // closed loops that must be Hurwitz (objective and constraint plants are added)
    double threshold = std::numeric_limits<double>::infinity();  // r^{-1}; certificate needs value + error < threshold
};

struct SynthesisOptions {
    int restarts = 5;
    int max_iterations = 500;
    unsigned seed = 1;
    double stability_margin = 0.01;
    double spread = 0.3;   // relative perturbation of restart points
    VectorXd scale;        // parameter scaling; |x0| entries (or 1) when empty
    bool stop_at_certificate = false;
};

struct TraceEntry {
    int restart = 0;
    int iteration = 0;
    double merit = 0.0;
    double alpha = 0.0;  // constraint penalty weight
};

enum class SynthesisStatus { ok, stabilization_failed, budget_exhausted };
std::string to_string(SynthesisStatus s);

struct SynthesisResult {
    VectorXd x;
    System K;
    double objective = std::numeric_limits<double>::infinity();
    double objective_error = 0.0;
    double constraint = std::numeric_limits<double>::quiet_NaN();
    double bound = std::numeric_limits<double>::infinity();
    double gamma_inf = std::numeric_limits<double>::quiet_NaN();
    bool constraint_met = true;
    bool all_hurwitz = false;
    std::vector<double> abscissae;
    bool certified = false;  // objective + error < threshold and the rest holds
    double threshold = std::numeric_limits<double>::infinity();
    SynthesisStatus status = SynthesisStatus::ok;
    int best_restart = -1;
    int iterations = 0;
    std::vector<TraceEntry> trace;
};

/// Unconstrained minimization of one channel norm (nominal synthesis).
SynthesisResult solve_single(const ProgramChannel& ch, const std::vector<Plant>& stabilize,
                             const ControllerStructure& cs, const VectorXd& x0, const SynthesisOptions& opt);

/// minimize objective subject to constraint <= (1 + tau) gamma_inf with K
/// stabilizing every plant involved. gamma_inf, when absent, comes from a
/// nominal solve of the constraint channel.
SynthesisResult solve_mixed(const MixedProgramSpec& spec, const ControllerStructure& cs, const VectorXd& x0,
                            const SynthesisOptions& opt);

Json synthesis_result_to_json(const SynthesisResult& r, const ControllerStructure& cs);

// --- certificates ------------------------------------------------------------

enum class CertificateKind { L2, BIBO };

struct Certificate {
    CertificateKind kind = CertificateKind::BIBO;
    double value = 0.0;
    double error = 0.0;
    double threshold = 0.0;  // r^{-1}
    double margin = 0.0;     // threshold - value - error
    double constraint_slack = std::numeric_limits<double>::infinity();
    std::vector<double> abscissae;
    bool hurwitz = true;
    bool pass = false;
};

Certificate certify(CertificateKind kind, double value, double error, double r_inverse,
                    double constraint_slack = std::numeric_limits<double>::infinity(),
                    const std::vector<double>& abscissae = {});
Certificate certify(const SynthesisResult& r, double r_inverse);
Json certificate_to_json(const Certificate& c);

// --- best asymptotic sector --------------------------------------------------

struct SweepRow {
    double c = 0.0;
    double norm = std::numeric_limits<double>::infinity();
    double r = 0.0;
    double a = 0.0;
    double b = 0.0;
    bool solved = false;
    bool works = false;  // c - r < q_inf < c + r
    VectorXd x;
};

struct SweepResult {
    std::vector<SweepRow> rows;
    std::vector<std::pair<double, double>> works_intervals;  // maximal runs of grid points that work
};

/// `family(c)` is the plant with the nonlinearity centred at c. With a
/// controller class other than `none`, each c is tuned (warm-started from the
/// previous solution) to minimize the peak gain of `sel`.
SweepResult sweep_best_sector(const std::function<Plant(double)>& family, const ChannelSelector& sel,
                              const ControllerStructure& cs, const VectorXd& x0, const std::vector<double>& c_grid,
                              double q_inf, const SynthesisOptions& opt);

}  // namespace pkgain
