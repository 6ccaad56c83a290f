#include "pkgain/sim.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <random>

#include <boost/numeric/odeint.hpp>

namespace pkgain {

namespace {

namespace odeint = boost::numeric::odeint;
using State = std::vector<double>;

MatrixXd gather_cols(const MatrixXd& M, const std::vector<Group>& gs) {
    Index n = 0;
    for (const Group& g : gs) n += g.size;
    MatrixXd out(M.rows(), n);
    Index at = 0;
    for (const Group& g : gs) {
        out.middleCols(at, g.size) = M.middleCols(g.begin, g.size);
        at += g.size;
    }
    return out;
}

MatrixXd gather_rows(const MatrixXd& M, const std::vector<Group>& gs) {
    return gather_cols(M.transpose(), gs).transpose();
}

double inf_norm(const VectorXd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace

ClosedLure close_loop(const LureLoop& loop) {
    ClosedLure c;
    c.plant = loop.controller ? feedback_lft(loop.plant, *loop.controller) : loop.plant;
    const Plant& P = c.plant;
    const Group& gp = P.input(loop.p_group);
    const Group& gq = P.output(loop.q_group);
    if (loop.phi.eval && (loop.phi.nq != gq.size || loop.phi.np != gp.size))
        throw DimensionError("simulate: nonlinearity does not match the p/q channels");
    if (loop.op && (loop.op->nq != gq.size || loop.op->np != gp.size))
        throw DimensionError("simulate: operator does not match the p/q channels");
    const MatrixXd Dqp = P.sys.D.block(gq.begin, gp.begin, gq.size, gp.size);
    if (Dqp.size() > 0 && Dqp.cwiseAbs().maxCoeff() != 0.0)
        throw AlgebraicLoopError("simulate: feedthrough from p to q closes an algebraic loop through the nonlinearity");
    for (const Group& g : P.inputs)
        if (g.name != loop.p_group) c.exo_inputs.push_back(g);
    for (const Group& g : P.outputs)
        if (g.name != loop.q_group) c.outputs.push_back(g);
    c.nx = P.sys.states();
    c.Bp = P.sys.B.middleCols(gp.begin, gp.size);
    c.Cq = P.sys.C.middleRows(gq.begin, gq.size);
    c.Bw = gather_cols(P.sys.B, c.exo_inputs);
    c.Dqw = gather_cols(MatrixXd(P.sys.D.middleRows(gq.begin, gq.size)), c.exo_inputs);
    c.nw = c.Bw.cols();
    return c;
}

namespace {

struct Rhs {
    const ClosedLure& c;
    const LureLoop& loop;
    Index nxi = 0;

    [[nodiscard]] VectorXd input(double t) const {
        if (c.nw == 0) return VectorXd();
        if (!loop.w) return VectorXd::Zero(c.nw);
        VectorXd w = loop.w(t);
        if (w.size() != c.nw) throw DimensionError("simulate: input signal has the wrong length");
        return w;
    }

    // q and p at (t, state)
    void signals(double t, const VectorXd& s, const VectorXd& w, VectorXd& q, VectorXd& p) const {
        q = c.Cq * s.head(c.nx);
        if (c.nw) q += c.Dqw * w;
        p = loop.op ? loop.op->output(t, s.tail(nxi), q) : loop.phi.eval(t, q);
    }

    void operator()(const State& sv, State& dv, double t) const {
        const Eigen::Map<const VectorXd> s(sv.data(), static_cast<Index>(sv.size()));
        Eigen::Map<VectorXd> ds(dv.data(), static_cast<Index>(dv.size()));
        const VectorXd w = input(t);
        VectorXd q, p;
        signals(t, s, w, q, p);
        ds.head(c.nx) = c.plant.sys.A * s.head(c.nx) + c.Bp * p;
        if (c.nw) ds.head(c.nx) += c.Bw * w;
        if (loop.op) ds.tail(nxi) = loop.op->derivative(t, s.tail(nxi), q);
    }
};

}  // namespace

Trajectory simulate(const LureLoop& loop, double t_end, const SimOptions& opt) {
    if (!loop.phi.eval && !loop.op) throw std::invalid_argument("simulate: loop has no nonlinearity");
    if (!(t_end > 0)) throw std::invalid_argument("simulate: end time must be positive");
    const ClosedLure c = close_loop(loop);
    Rhs rhs{c, loop, loop.op ? loop.op->nx : 0};
    const Index n = c.nx + rhs.nxi;

    VectorXd s0 = VectorXd::Zero(n);
    if (loop.x0.size() == n) {
        s0 = loop.x0;
    } else if (loop.x0.size() == c.plant.sys.states() - (loop.controller ? loop.controller->states() : 0) &&
               loop.x0.size() > 0) {
        s0.head(loop.x0.size()) = loop.x0;  // controller and operator states start at rest
    } else if (loop.x0.size() != 0) {
        throw DimensionError("simulate: initial state has length " + std::to_string(loop.x0.size()) + ", expected " +
                             std::to_string(n));
    }

    Trajectory tr;
    for (const Group& g : c.outputs)
        for (Index i = 0; i < g.size; ++i) tr.z_names.push_back(g.name + std::to_string(i + 1));
    const MatrixXd Cz = gather_rows(c.plant.sys.C, c.outputs);
    const MatrixXd Dz = gather_rows(c.plant.sys.D, c.outputs);
    const MatrixXd Dzw = gather_cols(Dz, c.exo_inputs);
    const MatrixXd Dzp = Dz.middleCols(c.plant.input(loop.p_group).begin, c.plant.input(loop.p_group).size);

    auto record = [&](double t, const VectorXd& s) {
        const VectorXd w = rhs.input(t);
        VectorXd q, p;
        rhs.signals(t, s, w, q, p);
        VectorXd z = Cz * s.head(c.nx) + Dzp * p;
        if (c.nw) z += Dzw * w;
        tr.t.push_back(t);
        tr.x.push_back(s);
        tr.q.push_back(q);
        tr.z.push_back(z);
        tr.sup_z = std::max(tr.sup_z, inf_norm(z));
    };

    State x(s0.data(), s0.data() + n);
    auto stepper = odeint::make_dense_output(opt.tol, opt.tol, odeint::runge_kutta_dopri5<State>());
    double dt0 = std::min(1e-3, t_end / 10);
    stepper.initialize(x, 0.0, dt0);
    record(0.0, s0);
    tr.sup_x = inf_norm(s0);
    double next_out = opt.dt_out;
    State tmp(n);
    while (stepper.current_time() < t_end) {
        if (opt.max_step > 0 && stepper.current_time_step() > opt.max_step)
            stepper.initialize(stepper.current_state(), stepper.current_time(), opt.max_step);
        try {
            stepper.do_step(rhs);
        } catch (const odeint::step_adjustment_error& e) {
            throw SimulationError(std::string("simulate: step size collapsed: ") + e.what());
        }
        ++tr.steps;
        const double t1 = stepper.current_time();
        const Eigen::Map<const VectorXd> s(stepper.current_state().data(), n);
        if (!s.allFinite() || inf_norm(s) > opt.divergence) {
            tr.diverged = true;
            tr.t_diverged = t1;
            if (s.allFinite()) {
                tr.sup_x = std::max(tr.sup_x, inf_norm(s));
                record(t1, s);
            } else {
                tr.sup_x = std::numeric_limits<double>::infinity();
            }
            break;
        }
        tr.sup_x = std::max(tr.sup_x, inf_norm(s));
        const double dt = t1 - stepper.previous_time();
        if (dt < opt.min_step && t1 < t_end) throw SimulationError("simulate: step size fell below the floor");
        if (opt.dt_out > 0) {
            while (next_out <= std::min(t1, t_end) + 1e-12 * t_end) {
                stepper.calc_state(next_out, tmp);
                record(next_out, Eigen::Map<const VectorXd>(tmp.data(), n));
                next_out += opt.dt_out;
            }
        } else if (t1 <= t_end) {
            record(t1, s);
        } else {
            stepper.calc_state(t_end, tmp);
            record(t_end, Eigen::Map<const VectorXd>(tmp.data(), n));
        }
    }

    if (tr.t.size() > opt.max_points && opt.max_points >= 2) {
        const std::size_t stride = (tr.t.size() + opt.max_points - 2) / (opt.max_points - 1);
        Trajectory d = tr;
        d.t.clear(), d.x.clear(), d.q.clear(), d.z.clear();
        for (std::size_t i = 0; i < tr.t.size(); i += stride) {
            d.t.push_back(tr.t[i]), d.x.push_back(tr.x[i]), d.q.push_back(tr.q[i]), d.z.push_back(tr.z[i]);
        }
        if (d.t.back() != tr.t.back()) {
            d.t.push_back(tr.t.back()), d.x.push_back(tr.x.back()), d.q.push_back(tr.q.back()), d.z.push_back(tr.z.back());
        }
        tr = std::move(d);
    }
    return tr;
}

Settling settling(const Trajectory& tr, double fraction, double tol) {
    Settling s;
    if (tr.t.empty()) return s;
    s.x_end = tr.x.back();
    const double t0 = tr.t.back() - fraction * (tr.t.back() - tr.t.front());
    for (std::size_t k = 0; k < tr.t.size(); ++k)
        if (tr.t[k] >= t0) s.spread = std::max(s.spread, inf_norm(tr.x[k] - s.x_end));
    s.settled = !tr.diverged && s.spread <= tol * (1.0 + inf_norm(s.x_end));
    return s;
}

void write_csv(std::ostream& os, const Trajectory& tr) {
    os << "t";
    if (!tr.x.empty())
        for (Index i = 0; i < tr.x.front().size(); ++i) os << ",x" << i + 1;
    if (!tr.q.empty())
        for (Index i = 0; i < tr.q.front().size(); ++i) os << ",q" << i + 1;
    for (const auto& name : tr.z_names) os << "," << name;
    os << "\n";
    os.precision(12);
    for (std::size_t k = 0; k < tr.t.size(); ++k) {
        os << tr.t[k];
        for (const VectorXd* v : {&tr.x[k], &tr.q[k], &tr.z[k]})
            for (Index i = 0; i < v->size(); ++i) os << "," << (*v)(i);
        os << "\n";
    }
}

MatrixXd nonlinearity_jacobian(const Nonlinearity& phi, double t, const VectorXd& q) {
    MatrixXd J(phi.np, q.size());
    for (Index j = 0; j < q.size(); ++j) {
        const double h = 1e-6 * (1.0 + std::abs(q(j)));
        VectorXd a = q, b = q;
        a(j) += h;
        b(j) -= h;
        J.col(j) = (phi.eval(t, a) - phi.eval(t, b)) / (2 * h);
    }
    return J;
}

namespace {

void require_static(const LureLoop& loop, const char* what) {
    if (loop.op) throw std::invalid_argument(std::string(what) + ": loops with operator states are not supported");
    if (!loop.phi.eval) throw std::invalid_argument(std::string(what) + ": loop has no nonlinearity");
}

}  // namespace

System linearize(const LureLoop& loop, const VectorXd& x_star) {
    require_static(loop, "linearize");
    const ClosedLure c = close_loop(loop);
    if (x_star.size() != c.nx) throw DimensionError("linearize: state has the wrong length");
    const MatrixXd J = nonlinearity_jacobian(loop.phi, 0.0, c.Cq * x_star);
    const MatrixXd Cz = gather_rows(c.plant.sys.C, c.outputs);
    const MatrixXd Dz = gather_rows(c.plant.sys.D, c.outputs);
    return System(c.plant.sys.A + c.Bp * J * c.Cq, c.Bw, Cz, gather_cols(Dz, c.exo_inputs));
}

EquilibriumReport find_equilibria(const LureLoop& loop, const EquilibriumOptions& opt) {
    require_static(loop, "find_equilibria");
    const ClosedLure c = close_loop(loop);
    const Index n = c.nx;
    const MatrixXd& A = c.plant.sys.A;
    auto F = [&](const VectorXd& x) -> VectorXd { return A * x + c.Bp * loop.phi.eval(0.0, c.Cq * x); };
    auto jac = [&](const VectorXd& x) -> MatrixXd {
        return A + c.Bp * nonlinearity_jacobian(loop.phi, 0.0, c.Cq * x) * c.Cq;
    };

    // Latin hypercube seeds plus the origin.
    std::mt19937 rng(opt.seed);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    const int m = std::max(1, opt.seeds);
    MatrixXd seeds(n, m + 1);
    for (Index i = 0; i < n; ++i) {
        std::vector<int> perm(static_cast<std::size_t>(m));
        for (int k = 0; k < m; ++k) perm[static_cast<std::size_t>(k)] = k;
        std::shuffle(perm.begin(), perm.end(), rng);
        for (int k = 0; k < m; ++k)
            seeds(i, k) = opt.box * (2.0 * (perm[static_cast<std::size_t>(k)] + U(rng)) / m - 1.0);
    }
    seeds.col(m).setZero();

    EquilibriumReport rep;
    rep.seeds = m + 1;
    for (Index k = 0; k <= m; ++k) {
        VectorXd x = seeds.col(k);
        VectorXd f = F(x);
        double r = f.norm();
        for (int it = 0; it < opt.max_newton && r > opt.tol; ++it) {
            const VectorXd dx = jac(x).completeOrthogonalDecomposition().solve(f);
            double step = 1.0;
            bool moved = false;
            while (step > 1e-10) {
                const VectorXd xn = x - step * dx;
                const VectorXd fn = F(xn);
                if (fn.allFinite() && fn.norm() < (1.0 - 1e-4 * step) * r) {
                    x = xn, f = fn, r = fn.norm();
                    moved = true;
                    break;
                }
                step *= 0.5;
            }
            if (!moved) break;
        }
        if (!(f.cwiseAbs().maxCoeff() < opt.accept)) {
            ++rep.failed;
            continue;
        }
        const bool known = std::any_of(rep.equilibria.begin(), rep.equilibria.end(), [&](const Equilibrium& e) {
            return (e.x - x).norm() < opt.dedup * (1.0 + x.norm());
        });
        if (known) continue;
        Equilibrium e;
        e.x = x;
        e.residual = f.cwiseAbs().maxCoeff();
        e.eigenvalues = jac(x).eigenvalues();
        e.abscissa = e.eigenvalues.real().maxCoeff();
        e.stable = e.abscissa < 0;
        rep.equilibria.push_back(std::move(e));
    }
    std::sort(rep.equilibria.begin(), rep.equilibria.end(), [](const Equilibrium& a, const Equilibrium& b) {
        for (Index i = 0; i < a.x.size(); ++i)
            if (std::abs(a.x(i) - b.x(i)) > 1e-9 * (1.0 + std::abs(a.x(i)))) return a.x(i) < b.x(i);
        return false;
    });
    return rep;
}

std::vector<ProbeInput> default_input_bank(Index nw, int count, double amplitude, unsigned seed) {
    std::vector<ProbeInput> bank;
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    for (int k = 0; bank.size() < static_cast<std::size_t>(count); ++k) {
        VectorXd dir(nw);
        for (Index i = 0; i < nw; ++i) dir(i) = U(rng);
        if (nw > 0) dir /= dir.cwiseAbs().maxCoeff();
        const double A = amplitude;
        switch (k % 4) {
            case 0:
                bank.push_back({"step" + std::to_string(k / 4), [dir, A](double) { return VectorXd(A * dir); }, A});
                break;
            case 1: {
                const double width = 1.0 + 4.0 * std::abs(U(rng));
                bank.push_back({"pulse" + std::to_string(k / 4),
                                [dir, A, width](double t) { return VectorXd((t < width ? A : 0.0) * dir); }, A});
                break;
            }
            case 2: {
                const double w = std::exp(2.0 * U(rng));
                VectorXd phase(nw);
                for (Index i = 0; i < nw; ++i) phase(i) = 3.14159265358979 * U(rng);
                bank.push_back({"sine" + std::to_string(k / 4),
                                [A, w, phase](double t) {
                                    return VectorXd(A * (w * t + phase.array()).sin().matrix());
                                },
                                A});
                break;
            }
            default: {
                // piecewise constant noise on a 0.5 grid, values drawn up front
                constexpr int kSegments = 4096;
                MatrixXd levels(nw, kSegments);
                for (Index i = 0; i < nw; ++i)
                    for (int j = 0; j < kSegments; ++j) levels(i, j) = A * U(rng);
                bank.push_back({"noise" + std::to_string(k / 4),
                                [levels](double t) {
                                    const auto j = static_cast<Index>(std::max(0.0, t) / 0.5) % kSegments;
                                    return VectorXd(levels.col(j));
                                },
                                A});
            }
        }
    }
    return bank;
}

ProbeReport bibo_probe(const LureLoop& loop, const std::vector<ProbeInput>& bank, double t_end, const SimOptions& opt) {
    ProbeReport rep;
    for (const ProbeInput& in : bank) {
        LureLoop l = loop;
        l.w = in.w;
        const Trajectory tr = simulate(l, t_end, opt);
        ProbeRow row{in.name, in.sup, tr.z_names.empty() ? tr.sup_x : tr.sup_z, tr.diverged};
        if (tr.diverged) row.output_sup = std::numeric_limits<double>::infinity();
        rep.any_divergence = rep.any_divergence || tr.diverged;
        rep.rows.push_back(row);
    }
    std::vector<const ProbeRow*> ok;
    for (const auto& r : rep.rows)
        if (!r.diverged) ok.push_back(&r);
    if (!ok.empty()) {
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        const double m = static_cast<double>(ok.size());
        for (const ProbeRow* r : ok) {
            sx += r->input_sup, sy += r->output_sup;
            sxx += r->input_sup * r->input_sup, sxy += r->input_sup * r->output_sup;
        }
        const double den = m * sxx - sx * sx;
        rep.k1 = den > 1e-12 * (1.0 + sxx) ? (m * sxy - sx * sy) / den : (sxx > 0 ? sxy / sxx : 0.0);
        rep.k2 = -std::numeric_limits<double>::infinity();
        for (const ProbeRow* r : ok) rep.k2 = std::max(rep.k2, r->output_sup - rep.k1 * r->input_sup);
    }
    return rep;
}

Json probe_report_to_json(const ProbeReport& r) {
    Json rows = Json::array();
    for (const auto& row : r.rows)
        rows.push_back({{"input", row.name},
                        {"input_sup", row.input_sup},
                        {"output_sup", std::isfinite(row.output_sup) ? Json(row.output_sup) : Json()},
                        {"diverged", row.diverged}});
    return {{"rows", rows}, {"k1", r.k1}, {"k2", r.k2}, {"any_divergence", r.any_divergence}};
}

Json equilibria_to_json(const EquilibriumReport& r) {
    Json eq = Json::array();
    for (const auto& e : r.equilibria) {
        Json ev = Json::array();
        for (Index i = 0; i < e.eigenvalues.size(); ++i) ev.push_back({e.eigenvalues(i).real(), e.eigenvalues(i).imag()});
        eq.push_back({{"x", vector_to_json(e.x)},
                      {"residual", e.residual},
                      {"abscissa", e.abscissa},
                      {"stable", e.stable},
                      {"eigenvalues", ev}});
    }
    return {{"equilibria", eq}, {"seeds", r.seeds}, {"failed", r.failed}};
}

}  // namespace pkgain
