// pkgain: norms, synthesis and simulation of Lur'e loops from scenario files.
//
// Exit codes: 0 success / PASS, 1 FAIL, 2 unstable system, 3 stabilization
// failed, 4 iteration budget exhausted, 5 simulation error, 6 invalid input.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>

#include "pkgain/norms.hpp"
#include "pkgain/scenario.hpp"

using namespace pkgain;

namespace {

enum Exit { kOk = 0, kFail = 1, kUnstable = 2, kStabilization = 3, kBudget = 4, kSimulation = 5, kInvalid = 6 };

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

void write_json(const std::string& path, const Json& j) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << j.dump(2) << "\n";
    std::cout << "wrote " << path << "\n";
}

void apply_params(Scenario& sc, const std::vector<std::string>& params) {
    for (const auto& p : params) {
        const auto eq = p.find('=');
        if (eq == std::string::npos) throw SchemaError("--param expects name=value, got '" + p + "'");
        sc.set_parameter(p.substr(0, eq), std::stod(p.substr(eq + 1)));
    }
}

VectorXd parse_vector(const std::string& s) {
    std::vector<double> v;
    std::size_t at = 0;
    while (at < s.size()) {
        const std::size_t end = s.find(',', at);
        v.push_back(std::stod(s.substr(at, end == std::string::npos ? std::string::npos : end - at)));
        if (end == std::string::npos) break;
        at = end + 1;
    }
    return Eigen::Map<VectorXd>(v.data(), static_cast<Index>(v.size()));
}

// --- norm ---------------------------------------------------------------------

struct NormArgs {
    std::string file;
    std::string kind = "both";
    double tol = 0.0;
    std::vector<std::string> params;
    bool sweep = false;
    std::string out;
};

struct NormLine {
    std::string label;
    Json json;
};

// Evaluates one norm; throws NotHurwitzError for unstable systems.
NormLine one_norm(const std::string& kind, const System& G, const std::string& label, double tol) {
    if (kind == "chain") {
        const auto [lo, hi] = chain_bounds(G, tol > 0 ? tol : kHinfDefaultTol);
        return {"chain bounds(" + label + ") = [" + fmt("%.6g", lo) + ", " + fmt("%.6g", hi) + "]",
                Json{{"kind", "chain"}, {"system", label}, {"lower", lo}, {"upper", hi}}};
    }
    const NormCertificate c = kind == "hinf" ? hinf_norm(G, tol > 0 ? tol : 1e-8) : peak_gain_norm(G, tol > 0 ? tol : 1e-6);
    Json j = certificate_to_json(c);
    j["system"] = label;
    return {(kind == "hinf" ? "hinf(" : "pk_gn(") + label + ") = " + fmt("%.6f", c.value) + " +- " +
                fmt("%.2g", c.abs_error_bound),
            j};
}

std::vector<std::string> kinds_for(const std::string& kind) {
    if (kind == "both") return {"pkgn", "hinf"};
    if (kind == "hinf" || kind == "pkgn" || kind == "chain") return {kind};
    throw SchemaError("--kind must be hinf, pkgn, both or chain");
}

int cmd_norm(const NormArgs& a) {
    const Json doc = read_json_file(a.file);
    const auto kinds = kinds_for(a.kind);
    Json report = Json::array();
    auto run = [&](const std::string& kind, const System& G, const std::string& label) {
        const NormLine l = one_norm(kind, G, label, a.tol);
        std::cout << l.label << "\n";
        report.push_back(l.json);
    };
    try {
        if (!doc.contains("schema_version")) {
            const System G = doc.contains("inputs") || doc.contains("outputs") ? plant_from_json(doc).sys : system_from_json(doc);
            for (const auto& k : kinds) run(k, G, a.file);
        } else {
            Scenario sc(doc);
            apply_params(sc, a.params);
            const auto queries = sc.norm_queries();
            auto query = [&](const std::string& k) -> const NormQuery& {
                auto it = queries.find(k);
                if (it == queries.end() && k == "chain") it = queries.find("pkgn");
                if (it == queries.end()) throw SchemaError("scenario has no norm query for '" + k + "'");
                return it->second;
            };
            auto evaluate_all = [&](const std::string& prefix) {
                for (const auto& k : kinds) {
                    const NormQuery& q = query(k);
                    run(k, channel(sc.plant(q.plant), q.sel), prefix + q.plant + ": " + q.sel.from + "->" + q.sel.to);
                }
            };
            const auto sweep = sc.parameter_sweep();
            if (a.sweep && sweep) {
                for (double v : sweep->second) {
                    sc.set_parameter(sweep->first, v);
                    evaluate_all(sweep->first + "=" + fmt("%g", v) + ", ");
                }
            } else {
                if (a.sweep) std::cout << "scenario has no parameter sweep; evaluating once\n";
                evaluate_all("");
            }
        }
    } catch (const NotHurwitzError& e) {
        std::cout << "unstable: " << e.what() << " (spectral abscissa " << fmt("%.6g", e.abscissa()) << ")\n";
        return kUnstable;
    }
    if (!a.out.empty()) write_json(a.out, report);
    return kOk;
}

// --- synth --------------------------------------------------------------------

struct SynthArgs {
    std::string file;
    std::string program;
    int seed = -1;
    int budget = -1;
    int restarts = -1;
    std::vector<std::string> params;
    std::string out;
    bool no_fallback = false;
    int jobs = 1;
};

int exit_for(const SynthesisResult& r, const Certificate& c) {
    if (c.pass) return kOk;
    if (r.status == SynthesisStatus::stabilization_failed) return kStabilization;
    if (r.status == SynthesisStatus::budget_exhausted) return kBudget;
    return kFail;
}

void print_result(const std::string& program, const SynthesisResult& r, const Certificate& c) {
    std::cout << "program " << program << ": status " << to_string(r.status) << ", best restart " << r.best_restart
              << ", iterations " << r.iterations << "\n";
    if (!r.all_hurwitz) {
        std::cout << "  no controller found that makes every loop Hurwitz\n";
    } else {
        std::cout << "  parameters " << r.x.transpose() << "\n";
        std::cout << "  objective " << fmt("%.6f", r.objective) << " +- " << fmt("%.2g", r.objective_error) << "\n";
        if (!std::isnan(r.constraint))
            std::cout << "  constraint " << fmt("%.6f", r.constraint) << " <= " << fmt("%.6f", r.bound) << " (gamma_inf "
                      << fmt("%.6f", r.gamma_inf) << "): " << (r.constraint_met ? "met" : "violated") << "\n";
    }
    std::cout << "  " << (c.kind == CertificateKind::L2 ? "L2" : "BIBO") << " certificate: value + error "
              << fmt("%.6f", c.value + c.error) << " vs threshold " << fmt("%.6f", c.threshold) << ", margin "
              << fmt("%.6f", c.margin) << " -> " << (c.pass ? "PASS" : "FAIL") << "\n";
}

std::pair<SynthesisResult, Certificate> run_program(const Scenario& sc, const std::string& name, const SynthArgs& a) {
    ProgramSettings ps = sc.program(name);
    if (a.seed >= 0) ps.options.seed = static_cast<unsigned>(a.seed);
    if (a.budget > 0) ps.options.max_iterations = a.budget;
    if (a.restarts > 0) ps.options.restarts = a.restarts;
    const SynthesisResult r = solve_mixed(ps.spec, sc.controller_structure(), sc.controller_initial(), ps.options);
    const double slack = std::isnan(r.constraint) ? std::numeric_limits<double>::infinity()
                                                  : r.bound * (1.0 + 1e-6) - r.constraint;
    const Certificate c = certify(ps.kind, r.objective, r.objective_error, ps.spec.threshold, slack, r.abscissae);
    print_result(name, r, c);
    return {r, c};
}

int cmd_sweep(const Scenario& sc, const SynthArgs& a, Json& report) {
    SweepSettings s = sc.sweep();
    if (a.seed >= 0) s.options.seed = static_cast<unsigned>(a.seed);
    if (a.budget > 0) s.options.max_iterations = a.budget;
    const Plant base = sc.plant(s.plant);
    const ControllerStructure cs = sc.has_controller() ? sc.controller_structure() : ControllerStructure::none(1, 1);
    const VectorXd x0 = sc.has_controller() ? sc.controller_initial() : VectorXd();
    const auto res = sweep_best_sector([&](double c) { return sector_shift(base, MatrixXd(c * s.gamma)); }, s.sel, cs, x0,
                                       s.c_grid, s.q_inf, s.options);
    std::printf("%10s %12s %12s %12s %12s %6s\n", "c", "norm", "r(c)", "a", "b", "works");
    Json rows = Json::array();
    for (const auto& row : res.rows) {
        if (row.solved)
            std::printf("%10.4f %12.6f %12.6f %12.6f %12.6f %6s\n", row.c, row.norm, row.r, row.a, row.b,
                        row.works ? "yes" : "no");
        else
            std::printf("%10.4f %12s %12s %12s %12s %6s\n", row.c, "-", "-", "-", "-", "gap");
        Json jr{{"c", row.c}, {"solved", row.solved}, {"works", row.works}};
        if (row.solved) {
            jr["norm"] = row.norm, jr["r"] = row.r, jr["a"] = row.a, jr["b"] = row.b;
            if (row.x.size()) jr["parameters"] = vector_to_json(row.x);
        }
        rows.push_back(jr);
    }
    Json intervals = Json::array();
    for (const auto& [lo, hi] : res.works_intervals) {
        std::printf("works for c in [%g, %g] (q_inf = %g)\n", lo, hi, s.q_inf);
        intervals.push_back({lo, hi});
    }
    if (res.works_intervals.empty()) std::printf("no grid point satisfies c - r(c) < q_inf < c + r(c)\n");
    report["sweep"] = {{"q_inf", s.q_inf}, {"rows", rows}, {"works_intervals", intervals}};
    return res.works_intervals.empty() ? kFail : kOk;
}

int cmd_synth(const SynthArgs& a) {
    Scenario sc = read_scenario(a.file);
    apply_params(sc, a.params);
    Json report{{"scenario", sc.name()}, {"program", a.program}};
    int code = kOk;
    if (a.program == "sweep") {
        code = cmd_sweep(sc, a, report);
    } else {
        auto [r, c] = run_program(sc, a.program, a);
        report["result"] = synthesis_result_to_json(r, sc.controller_structure());
        report["certificate"] = certificate_to_json(c);
        code = exit_for(r, c);
        if (!c.pass && a.program == "h2h" && !a.no_fallback && sc.has_program("pk-h")) {
            std::cout << "complementary sector failed; continuing with the asymptotic sector program pk-h\n";
            auto [r2, c2] = run_program(sc, "pk-h", a);
            report["fallback"] = {{"program", "pk-h"},
                                  {"result", synthesis_result_to_json(r2, sc.controller_structure())},
                                  {"certificate", certificate_to_json(c2)}};
            code = exit_for(r2, c2);
        }
    }
    write_json(a.out.empty() ? sc.name() + "." + a.program + ".json" : a.out, report);
    return code;
}

// --- simulate -----------------------------------------------------------------

struct SimArgs {
    std::string file;
    std::string x0;
    double tend = -1;
    bool probe = false;
    bool equilibria = false;
    std::string controller;
    std::vector<std::string> params;
    std::string out;
};

std::optional<System> controller_from_file(const std::string& path) {
    const Json j = read_json_file(path);
    if (j.contains("fallback")) return system_from_json(j["fallback"]["result"]["K"]);
    if (j.contains("result")) return system_from_json(j["result"]["K"]);
    if (j.contains("K")) return system_from_json(j["K"]);
    return system_from_json(j);
}

int cmd_simulate(const SimArgs& a) {
    Scenario sc = read_scenario(a.file);
    apply_params(sc, a.params);
    if (!sc.has_simulation()) throw SchemaError("scenario has no simulation section");
    SimulationSettings s = sc.simulation();
    std::optional<System> K;
    if (!a.controller.empty()) {
        if (a.controller == "none" || a.controller == "fixed" || a.controller == "initial") s.controller = a.controller;
        else K = controller_from_file(a.controller);
        if (s.controller == "fixed" && !sc.fixed_controller()) throw SchemaError("scenario has no fixed controller");
    }
    if (!a.x0.empty()) s.x0 = parse_vector(a.x0);
    if (a.tend > 0) s.t_end = a.tend;
    const LureLoop loop = sc.loop(s, K);

    try {
        const Trajectory tr = simulate(loop, s.t_end, s.options);
        const std::string path = a.out.empty() ? sc.name() + ".trajectory.csv" : a.out;
        std::ofstream os(path);
        if (!os) throw std::runtime_error("cannot write '" + path + "'");
        write_csv(os, tr);
        std::cout << "wrote " << path << " (" << tr.t.size() << " samples, " << tr.steps << " steps)\n";
        if (tr.diverged) {
            std::cout << "diverged at t = " << fmt("%.6g", tr.t_diverged) << "\n";
        } else {
            const Settling st = settling(tr);
            std::cout << "sup |x| = " << fmt("%.6g", tr.sup_x) << "\n";
            if (st.settled)
                std::cout << "converged to equilibrium " << st.x_end.transpose() << "\n";
            else
                std::cout << "no equilibrium reached (bounded, final-window spread " << fmt("%.4g", st.spread) << ")\n";
        }
        if (a.equilibria) {
            const auto rep = find_equilibria(loop, s.equilibria);
            std::cout << rep.equilibria.size() << " equilibria from " << rep.seeds << " seeds (" << rep.failed
                      << " seeds did not converge)\n";
            for (const auto& e : rep.equilibria)
                std::cout << "  x* = " << e.x.transpose() << "  " << (e.stable ? "stable" : "unstable") << " (abscissa "
                          << fmt("%.4g", e.abscissa) << ")\n";
        }
        if (a.probe) {
            const ClosedLure c = close_loop(loop);
            if (c.nw == 0) {
                std::cout << "loop has no exogenous input; probe skipped\n";
            } else {
                const auto bank = default_input_bank(c.nw, s.probe.count, s.probe.amplitude, s.probe.seed);
                const ProbeReport rep = bibo_probe(loop, bank, s.probe.t_end, s.options);
                for (const auto& row : rep.rows)
                    std::cout << "  " << row.name << ": |w| = " << fmt("%.4g", row.input_sup) << ", |z| = "
                              << (row.diverged ? std::string("diverged") : fmt("%.6g", row.output_sup)) << "\n";
                std::cout << "envelope |z| <= " << fmt("%.4g", rep.k1) << " |w| + " << fmt("%.4g", rep.k2) << "; "
                          << (rep.any_divergence ? "divergence observed" : "no divergence") << "\n";
            }
        }
    } catch (const SimulationError& e) {
        std::cerr << "simulation error: " << e.what() << "\n";
        return kSimulation;
    }
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Peak-gain and H-infinity analysis and synthesis for Lur'e systems"};
    app.require_subcommand(1);

    NormArgs na;
    auto* norm = app.add_subcommand("norm", "Norms of a system file or of a scenario's norm queries");
    norm->add_option("file", na.file, "System or scenario file")->required()->check(CLI::ExistingFile);
    norm->add_option("--kind", na.kind, "hinf | pkgn | both | chain");
    norm->add_option("--tol", na.tol, "Tolerance (default 1e-6 peak gain, 1e-8 H-infinity)");
    norm->add_option("--param", na.params, "Override a scenario parameter, name=value");
    norm->add_flag("--sweep", na.sweep, "Evaluate over the scenario's parameter sweep");
    norm->add_option("--out", na.out, "Write the certificates as JSON");

    SynthArgs sa;
    auto* synth = app.add_subcommand("synth", "Run a synthesis program from a scenario");
    synth->add_option("file", sa.file, "Scenario file")->required()->check(CLI::ExistingFile);
    synth->add_option("--program", sa.program, "h2h | pk-h | sweep")->required()->check(CLI::IsMember({"h2h", "pk-h", "sweep"}));
    synth->add_option("--seed", sa.seed, "Random seed for restarts");
    synth->add_option("--budget", sa.budget, "Iterations per restart");
    synth->add_option("--restarts", sa.restarts, "Number of restarts");
    synth->add_option("--param", sa.params, "Override a scenario parameter, name=value");
    synth->add_option("--out", sa.out, "Result file (default <scenario>.<program>.json)");
    synth->add_flag("--no-fallback", sa.no_fallback, "Do not continue with pk-h when h2h fails");
    synth->add_option("--jobs", sa.jobs, "Concurrency cap (computations run sequentially)");

    SimArgs ma;
    auto* sim = app.add_subcommand("simulate", "Simulate a scenario's loop");
    sim->add_option("file", ma.file, "Scenario file")->required()->check(CLI::ExistingFile);
    sim->add_option("--x0", ma.x0, "Initial state, comma separated");
    sim->add_option("--tend", ma.tend, "Final time");
    sim->add_flag("--probe", ma.probe, "Run the bounded-input probe bank");
    sim->add_flag("--equilibria", ma.equilibria, "Locate equilibria and classify them");
    sim->add_option("--controller", ma.controller, "none | fixed | initial | result or system file");
    sim->add_option("--param", ma.params, "Override a scenario parameter, name=value");
    sim->add_option("--out", ma.out, "Trajectory CSV (default <scenario>.trajectory.csv)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kInvalid;
    }
    try {
        if (norm->parsed()) return cmd_norm(na);
        if (synth->parsed()) return cmd_synth(sa);
        if (sim->parsed()) return cmd_simulate(ma);
    } catch (const SchemaError& e) {
        std::cerr << "invalid input: " << e.what() << "\n";
        return kInvalid;
    } catch (const DimensionError& e) {
        std::cerr << "invalid input: " << e.what() << "\n";
        return kInvalid;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kFail;
    }
    return kInvalid;
}
