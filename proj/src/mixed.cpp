#include <algorithm>
#include <cmath>

#include "pkgain/synth.hpp"

namespace pkgain {

std::string to_string(SynthesisStatus s) {
    switch (s) {
        case SynthesisStatus::ok: return "ok";
        case SynthesisStatus::stabilization_failed: return "stabilization_failed";
        case SynthesisStatus::budget_exhausted: return "budget_exhausted";
    }
    return "?";
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kPenaltyChunk = 50;
constexpr double kAbscissaWindow = 0.25;

struct Problem {
    ProgramChannel objective;
    std::optional<ProgramChannel> constraint;
    double bound = kInf;
    std::vector<Plant> loops;  // every plant that must be stabilized
    ControllerStructure cs;
    VectorXd origin, scale;

    [[nodiscard]] VectorXd to_x(const VectorXd& z) const { return origin + scale.cwiseProduct(z); }
};

std::vector<Plant> all_loops(const ProgramChannel& obj, const std::optional<ProgramChannel>& con,
                             const std::vector<Plant>& extra) {
    std::vector<Plant> loops = extra;
    loops.push_back(obj.plant);
    if (con) loops.push_back(con->plant);
    return loops;
}

// Any channel of the closed loop; only its A matrix is used.
ChannelSelector exogenous_channel(const Plant& P) {
    auto pick = [](const std::vector<Group>& gs, const char* skip) {
        for (const Group& g : gs)
            if (g.name != skip) return g.name;
        throw DimensionError("plant has no exogenous channel");
    };
    return {pick(P.inputs, "u"), pick(P.outputs, "y")};
}

std::vector<Branch> abscissae(const Problem& pb, const VectorXd& x) {
    std::vector<Branch> out;
    for (const Plant& P : pb.loops) {
        ClosedLoopDerivative d = closed_loop_derivative(P, exogenous_channel(P), pb.cs, x);
        std::vector<MatrixXd> dA;
        for (const auto& s : d.dT) dA.push_back(s.A);
        // Eigenvalues close to the rightmost one enter the model as well; with
        // the top pair alone the method stalls where eigenvalues collide.
        const double top = spectral_abscissa(d.T.A);
        for (Branch& b : abscissa_branches(d.T.A, dA, kAbscissaWindow * (1.0 + std::abs(top)))) out.push_back(std::move(b));
    }
    return out;
}

double max_abscissa(const Problem& pb, const VectorXd& x) {
    double a = -kInf;
    for (const Plant& P : pb.loops) {
        const System L = feedback_lft(P, pb.cs.realize(x)).sys;
        if (L.states() > 0) a = std::max(a, spectral_abscissa(L.A));
    }
    return a;
}

// Stabilization pre-phase: drive max abscissa + margin below zero.
std::optional<VectorXd> stabilize(const Problem& pb, const VectorXd& z0, double margin, int budget) {
    if (max_abscissa(pb, pb.to_x(z0)) < -margin) return z0;
    Oracle f = [&](const VectorXd& z) {
        OracleResult r;
        const VectorXd x = pb.to_x(z);
        if (!pb.cs.admissible(x)) return r;
        const auto br = abscissae(pb, x);
        r.value = -kInf;
        for (const auto& b : br) r.value = std::max(r.value, b.value + margin);
        for (const auto& b : br) r.planes.push_back({b.value + margin, VectorXd(b.gradient.cwiseProduct(pb.scale))});
        std::sort(r.planes.begin(), r.planes.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
        return r;
    };
    BundleOptions opt;
    opt.max_iterations = budget;
    opt.target = 0.0;
    opt.tol = 1e-12;
    const BundleResult res = bundle_minimize(f, z0, opt);
    if (res.reached_target) return res.x;
    return std::nullopt;
}

struct Evaluation {
    bool ok = false;
    NormEvaluation obj, con;
};

Evaluation evaluate(const Problem& pb, const VectorXd& x) {
    Evaluation ev;
    if (!pb.cs.admissible(x)) return ev;
    if (max_abscissa(pb, x) >= 0) return ev;
    try {
        ev.obj = eval_subgrad(pb.objective.kind, pb.objective.plant, pb.objective.sel, pb.cs, x);
        if (pb.constraint) ev.con = eval_subgrad(pb.constraint->kind, pb.constraint->plant, pb.constraint->sel, pb.cs, x);
    } catch (const QuadratureError&) {
        return ev;
    } catch (const SingularLoopError&) {
        return ev;
    } catch (const ResonanceError&) {
        return ev;
    } catch (const NotHurwitzError&) {
        return ev;
    }
    ev.ok = ev.obj.stable && (!pb.constraint || ev.con.stable);
    return ev;
}

// merit = objective + alpha max(0, constraint - bound)
OracleResult merit(const Problem& pb, const VectorXd& z, double alpha) {
    OracleResult r;
    const VectorXd x = pb.to_x(z);
    const Evaluation ev = evaluate(pb, x);
    if (!ev.ok) return r;
    const double excess = pb.constraint ? ev.con.value - pb.bound : -kInf;
    r.value = ev.obj.value + alpha * std::max(0.0, excess);
    const Branch& top = ev.obj.branches.front();
    if (pb.constraint) {
        const Branch& ctop = ev.con.branches.front();
        r.planes.push_back({top.value + alpha * (ctop.value - pb.bound), VectorXd((top.gradient + alpha * ctop.gradient).cwiseProduct(pb.scale))});
        for (std::size_t i = 1; i < ev.con.branches.size(); ++i) {
            const Branch& c = ev.con.branches[i];
            r.planes.push_back({top.value + alpha * (c.value - pb.bound), VectorXd((top.gradient + alpha * c.gradient).cwiseProduct(pb.scale))});
        }
    }
    for (const Branch& b : ev.obj.branches) r.planes.push_back({b.value, VectorXd(b.gradient.cwiseProduct(pb.scale))});
    std::stable_sort(r.planes.begin(), r.planes.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    return r;
}

struct RestartOutcome {
    bool stabilized = false;
    bool converged = false;
    VectorXd x;
    int iterations = 0;
};

RestartOutcome run_restart(const Problem& pb, const VectorXd& z0, const SynthesisOptions& opt, int restart,
                           std::vector<TraceEntry>& trace) {
    RestartOutcome out;
    const auto zs = stabilize(pb, z0, opt.stability_margin, opt.max_iterations);
    if (!zs) return out;
    out.stabilized = true;
    VectorXd z = *zs;
    double alpha = 1.0;
    int used = 0;
    while (used < opt.max_iterations) {
        BundleOptions bo;
        bo.max_iterations = pb.constraint ? std::min(kPenaltyChunk, opt.max_iterations - used) : opt.max_iterations - used;
        const BundleResult br = bundle_minimize([&](const VectorXd& v) { return merit(pb, v, alpha); }, z, bo);
        used += std::max(1, br.iterations);
        for (const auto& s : br.trace) trace.push_back({restart, s.iteration + used - br.iterations, s.value, alpha});
        if (!std::isfinite(br.value)) break;
        z = br.x;
        bool feasible = true;
        if (pb.constraint) {
            const Evaluation ev = evaluate(pb, pb.to_x(z));
            feasible = ev.ok && ev.con.value <= pb.bound;
        }
        if (!feasible) {
            alpha *= 2.0;
            continue;
        }
        if (br.converged) {
            out.converged = true;
            break;
        }
    }
    out.x = pb.to_x(z);
    out.iterations = used;
    return out;
}

void measure(const Problem& pb, const VectorXd& x, SynthesisResult& r);

// Values recomputed at full accuracy.
SynthesisResult finalize(const Problem& pb, const VectorXd& x, double threshold) {
    SynthesisResult r;
    r.x = x;
    r.K = pb.cs.realize(x);
    r.threshold = threshold;
    r.bound = pb.bound;
    for (const Plant& P : pb.loops) {
        const System L = feedback_lft(P, r.K).sys;
        r.abscissae.push_back(L.states() ? spectral_abscissa(L.A) : -kInf);
    }
    r.all_hurwitz = std::all_of(r.abscissae.begin(), r.abscissae.end(), [](double a) { return a < 0; });
    if (!r.all_hurwitz) return r;
    try {
        measure(pb, x, r);
    } catch (const ResonanceError&) {
        r.all_hurwitz = false;
    } catch (const NotHurwitzError&) {
        r.all_hurwitz = false;
    }
    r.certified = r.all_hurwitz && r.objective + r.objective_error < threshold && r.constraint_met;
    return r;
}

void measure(const Problem& pb, const VectorXd& x, SynthesisResult& r) {
    const System T = closed_loop(pb.objective.plant, pb.objective.sel, pb.cs, x);
    NormCertificate c = pb.objective.kind == NormKind::hinf ? hinf_norm(T, 1e-9) : peak_gain_norm(T, 1e-5);
    r.objective = c.value;
    r.objective_error = c.abs_error_bound;
    if (pb.constraint) {
        const System W = closed_loop(pb.constraint->plant, pb.constraint->sel, pb.cs, x);
        NormCertificate cc = pb.constraint->kind == NormKind::hinf ? hinf_norm(W, 1e-9) : peak_gain_norm(W, 1e-5);
        r.constraint = cc.value;
        r.constraint_met = cc.value <= pb.bound * (1.0 + 1e-6);
    }
}

bool better(const SynthesisResult& a, const SynthesisResult& b) {
    auto rank = [](const SynthesisResult& r) { return r.certified ? 0 : (r.all_hurwitz && r.constraint_met) ? 1 : r.all_hurwitz ? 2 : 3; };
    if (rank(a) != rank(b)) return rank(a) < rank(b);
    return a.objective < b.objective;
}

SynthesisResult solve(Problem pb, const VectorXd& x0, const SynthesisOptions& opt, double threshold) {
    const Index np = pb.cs.parameter_count();
    if (x0.size() != np) throw DimensionError("synthesis: initial point has the wrong length");
    pb.origin = x0;
    pb.scale = opt.scale.size() == np ? opt.scale : VectorXd(x0.cwiseAbs());
    for (Index i = 0; i < np; ++i)
        if (!(pb.scale(i) > 0)) pb.scale(i) = 1.0;

    std::mt19937 rng(opt.seed);
    std::normal_distribution<double> N(0.0, 1.0);
    SynthesisResult best;
    best.status = SynthesisStatus::stabilization_failed;
    bool any_stabilized = false, any_converged = false;
    std::vector<TraceEntry> trace;
    int total_iterations = 0;
    for (int k = 0; k < std::max(1, opt.restarts); ++k) {
        VectorXd z0 = VectorXd::Zero(np);
        if (k > 0)
            for (Index i = 0; i < np; ++i) {
                const double g = N(rng);
                // multiplicative for nonzero entries keeps signs (and PID Tf > 0)
                z0(i) = x0(i) != 0.0 ? (std::exp(opt.spread * g) - 1.0) * x0(i) / pb.scale(i) : opt.spread * g;
            }
        if (np == 0) {
            best = finalize(pb, x0, threshold);
            best.best_restart = 0;
            best.status = SynthesisStatus::ok;
            return best;
        }
        const RestartOutcome out = run_restart(pb, z0, opt, k, trace);
        total_iterations += out.iterations;
        if (!out.stabilized) continue;
        any_stabilized = true;
        any_converged = any_converged || out.converged;
        SynthesisResult r = finalize(pb, out.x, threshold);
        r.best_restart = k;
        if (best.best_restart < 0 || better(r, best)) best = std::move(r);
        if (opt.stop_at_certificate && best.certified) break;
    }
    best.trace = std::move(trace);
    best.iterations = total_iterations;
    best.threshold = threshold;
    if (!any_stabilized) best.status = SynthesisStatus::stabilization_failed;
    else if (!any_converged) best.status = SynthesisStatus::budget_exhausted;
    else best.status = SynthesisStatus::ok;
    return best;
}

}  // namespace

SynthesisResult solve_single(const ProgramChannel& ch, const std::vector<Plant>& stabilize_list,
                             const ControllerStructure& cs, const VectorXd& x0, const SynthesisOptions& opt) {
    Problem pb{ch, std::nullopt, kInf, all_loops(ch, std::nullopt, stabilize_list), cs, {}, {}};
    return solve(std::move(pb), x0, opt, kInf);
}

SynthesisResult solve_mixed(const MixedProgramSpec& spec, const ControllerStructure& cs, const VectorXd& x0,
                            const SynthesisOptions& opt) {
    if (spec.tau < 0) throw std::invalid_argument("solve_mixed: tau must be nonnegative");
    double gamma = kInf;
    if (spec.constraint) {
        if (spec.gamma_inf) {
            gamma = *spec.gamma_inf;
        } else {
            // nominal synthesis treats the nonlinearity as a disturbance: only
            // the constraint loop and the listed plants must be stable
            const SynthesisResult nominal = solve_single(*spec.constraint, spec.stabilize, cs, x0, opt);
            if (!nominal.all_hurwitz) {
                SynthesisResult r = nominal;
                r.status = SynthesisStatus::stabilization_failed;
                r.certified = false;
                return r;
            }
            gamma = nominal.objective;
        }
        if (!(gamma > 0)) throw std::invalid_argument("solve_mixed: gamma_inf must be positive");
    }
    const double bound = spec.constraint ? (1.0 + spec.tau) * gamma : kInf;
    Problem pb{spec.objective, spec.constraint, bound, all_loops(spec.objective, spec.constraint, spec.stabilize), cs, {}, {}};
    SynthesisResult r = solve(std::move(pb), x0, opt, spec.threshold);
    r.gamma_inf = gamma;
    r.bound = bound;
    return r;
}

Certificate certify(const SynthesisResult& r, double r_inverse) {
    const double slack = std::isnan(r.constraint) ? kInf : r.bound * (1.0 + 1e-6) - r.constraint;
    return certify(CertificateKind::BIBO, r.objective, r.objective_error, r_inverse, slack, r.abscissae);
}

Json synthesis_result_to_json(const SynthesisResult& r, const ControllerStructure& cs) {
    Json j{{"controller", controller_structure_to_json(cs)},
           {"parameters", vector_to_json(r.x)},
           {"K", system_to_json(r.K)},
           {"objective", r.objective},
           {"objective_error", r.objective_error},
           {"threshold", std::isfinite(r.threshold) ? Json(r.threshold) : Json()},
           {"all_hurwitz", r.all_hurwitz},
           {"abscissae", r.abscissae},
           {"certified", r.certified},
           {"status", to_string(r.status)},
           {"best_restart", r.best_restart},
           {"iterations", r.iterations}};
    if (!std::isnan(r.constraint)) {
        j["constraint"] = r.constraint;
        j["bound"] = r.bound;
        j["gamma_inf"] = r.gamma_inf;
        j["constraint_met"] = r.constraint_met;
    }
    Json trace = Json::array();
    for (const auto& t : r.trace) trace.push_back({t.restart, t.iteration, t.merit, t.alpha});
    j["trace"] = trace;
    return j;
}

SweepResult sweep_best_sector(const std::function<Plant(double)>& family, const ChannelSelector& sel,
                              const ControllerStructure& cs, const VectorXd& x0, const std::vector<double>& c_grid,
                              double q_inf, const SynthesisOptions& opt) {
    SweepResult out;
    VectorXd x = x0;
    SynthesisOptions single = opt;
    single.restarts = 1;
    for (double c : c_grid) {
        SweepRow row;
        row.c = c;
        const Plant P = family(c);
        try {
            if (cs.kind == ControllerKind::none || cs.parameter_count() == 0) {
                const bool open = std::none_of(P.inputs.begin(), P.inputs.end(), [](const Group& g) { return g.name == "u"; });
                const System T = open ? channel(P, sel) : closed_loop(P, sel, cs, VectorXd::Zero(cs.parameter_count()));
                if (T.is_static() || is_hurwitz(T.A).stable) {
                    const NormCertificate n = peak_gain_norm(T, 1e-5);
                    row.norm = n.value + n.abs_error_bound;
                    row.solved = true;
                }
            } else {
                const SynthesisResult r = solve_single({P, sel, NormKind::pk_gn}, {}, cs, x, single);
                if (r.all_hurwitz) {
                    row.norm = r.objective + r.objective_error;
                    row.solved = true;
                    row.x = r.x;
                    x = r.x;
                }
            }
        } catch (const std::exception&) {
            row.solved = false;
        }
        if (row.solved) {
            row.r = row.norm > 0 ? 1.0 / row.norm : kInf;
            row.a = c - row.r;
            row.b = c + row.r;
            row.works = row.a < q_inf && q_inf < row.b;
        }
        out.rows.push_back(row);
    }
    for (std::size_t i = 0; i < out.rows.size();) {
        if (!out.rows[i].works) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j + 1 < out.rows.size() && out.rows[j + 1].works) ++j;
        out.works_intervals.push_back({out.rows[i].c, out.rows[j].c});
        i = j + 1;
    }
    return out;
}

}  // namespace pkgain
