#pragma once

// Simulation of Lur'e loops x' = A x + Bp phi(t, q) + Bw w, q = Cq x + Dqw w.

#include <iosfwd>
#include <optional>

#include "pkgain/nonlin.hpp"
#include "pkgain/transforms.hpp"

namespace pkgain {

class SimulationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class AlgebraicLoopError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

using Signal = std::function<VectorXd(double)>;

struct LureLoop {
    Plant plant;
    Nonlinearity phi;
    /// When set, replaces phi by a nonlinearity with internal states.
    std::optional<DynamicOperator> op;
    /// Closes u = K y before simulating.
    std::optional<System> controller;
    /// Stacked exogenous inputs (every input group except p, in order). Zero when empty.
    Signal w;
    VectorXd x0;
    std::string p_group = "p";
    std::string q_group = "q";
};

/// The loop with the controller closed: plant states first, then controller
/// states, then operator states.
struct ClosedLure {
    Plant plant;          // after closing u = K y
    MatrixXd Bp, Bw, Cq, Dqw;
    Index nx = 0;         // plant plus controller states
    Index nw = 0;
    std::vector<Group> exo_inputs;
    std::vector<Group> outputs;  // every output group except q
};

ClosedLure close_loop(const LureLoop& loop);

struct SimOptions {
    double tol = 1e-8;
    double max_step = 0.0;     // 0: unlimited
    double min_step = 1e-10;
    double divergence = 1e9;
    std::size_t max_points = 100000;
    double dt_out = 0.0;       // > 0: sample on a uniform grid, else record accepted steps
};

struct Trajectory {
    std::vector<double> t;
    std::vector<VectorXd> x;
    std::vector<VectorXd> q;
    std::vector<VectorXd> z;  // every output group other than q, stacked
    std::vector<std::string> z_names;
    double sup_x = 0.0;       // running max of |x|_inf
    double sup_z = 0.0;
    bool diverged = false;
    double t_diverged = std::numeric_limits<double>::quiet_NaN();
    std::size_t steps = 0;
};

Trajectory simulate(const LureLoop& loop, double t_end, const SimOptions& opt = {});

struct Settling {
    bool settled = false;
    VectorXd x_end;
    double spread = 0.0;  // max |x(t) - x_end|_inf over the final window
};
/// Whether the trajectory is at rest over the last `fraction` of its time span.
Settling settling(const Trajectory& tr, double fraction = 0.1, double tol = 1e-5);

/// Columns t, x1.., q1.., then the remaining output groups.
void write_csv(std::ostream& os, const Trajectory& tr);

struct Equilibrium {
    VectorXd x;
    double residual = 0.0;
    VectorXcd eigenvalues;
    double abscissa = 0.0;
    bool stable = false;
};

struct EquilibriumOptions {
    double box = 10.0;       // seeds in [-box, box]^n
    int seeds = 200;
    unsigned seed = 1;
    double tol = 1e-12;      // Newton stops below this residual
    double accept = 1e-10;   // residual needed to report a point
    double dedup = 1e-6;
    int max_newton = 100;
};

struct EquilibriumReport {
    std::vector<Equilibrium> equilibria;  // sorted by the first coordinate that differs
    int seeds = 0;
    int failed = 0;                       // seeds where Newton did not converge
};

EquilibriumReport find_equilibria(const LureLoop& loop, const EquilibriumOptions& opt = {});

/// Jacobian of phi by central differences, h = 1e-6 (1 + |q_j|).
MatrixXd nonlinearity_jacobian(const Nonlinearity& phi, double t, const VectorXd& q);

/// A_lin = A_cl + Bp Dphi(Cq x*) Cq, with the exogenous inputs and the
/// non-q outputs of the closed loop.
System linearize(const LureLoop& loop, const VectorXd& x_star);

struct ProbeInput {
    std::string name;
    Signal w;
    double sup = 0.0;  // |w|_inf
};

/// Steps, pulses, sinusoids and bounded piecewise-constant noise of
/// amplitude `amplitude` on each channel.
std::vector<ProbeInput> default_input_bank(Index nw, int count, double amplitude, unsigned seed = 1);

struct ProbeRow {
    std::string name;
    double input_sup = 0.0;
    double output_sup = 0.0;
    bool diverged = false;
};

struct ProbeReport {
    std::vector<ProbeRow> rows;
    double k1 = 0.0;  // least-squares slope of output_sup against input_sup
    double k2 = 0.0;  // smallest offset with every row under k1 in + k2
    bool any_divergence = false;
};

/// Runs the loop from its x0 with each input and records sup-norms of the
/// non-q outputs (of the state when there are none).
ProbeReport bibo_probe(const LureLoop& loop, const std::vector<ProbeInput>& bank, double t_end,
                       const SimOptions& opt = {});

Json probe_report_to_json(const ProbeReport& r);
Json equilibria_to_json(const EquilibriumReport& r);

}  // namespace pkgain
