#include "pkgain/scenario.hpp"

#include <set>

namespace pkgain {

namespace {

ChannelSelector channel_from_json(const Json& j, const std::string& where) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_string() || !j[1].is_string())
        throw SchemaError(where + ": channel must be [input group, output group]");
    return {j[0].get<std::string>(), j[1].get<std::string>()};
}

template <typename T>
T get_or(const Json& j, const char* key, T fallback) {
    return j.contains(key) ? j.at(key).get<T>() : fallback;
}

std::vector<double> grid_from_json(const Json& j, const std::string& where) {
    std::vector<double> out;
    if (j.is_array()) {
        for (const auto& v : j) out.push_back(v.get<double>());
    } else {
        require_keys(j, {"from", "to", "count"}, where);
        const double a = j.at("from").get<double>(), b = j.at("to").get<double>();
        const int n = j.at("count").get<int>();
        if (n < 2) throw SchemaError(where + ": count must be at least 2");
        for (int i = 0; i < n; ++i) out.push_back(a + (b - a) * i / (n - 1));
    }
    if (out.empty()) throw SchemaError(where + ": empty grid");
    return out;
}

}  // namespace

Scenario::Scenario(Json j) : raw_(std::move(j)) {
    require_keys(raw_, {"schema_version", "name", "description", "parameters", "parameter_sweep", "plants",
                        "nonlinearity", "controller", "norm", "programs", "simulation"},
                 "scenario");
    if (!raw_.contains("schema_version") || raw_["schema_version"] != kScenarioSchemaVersion)
        throw SchemaError("scenario: schema_version must be " + std::to_string(kScenarioSchemaVersion));
    if (!raw_.contains("plants") || !raw_["plants"].is_object() || raw_["plants"].empty())
        throw SchemaError("scenario: needs at least one plant");
    name_ = get_or<std::string>(raw_, "name", "scenario");
    description_ = get_or<std::string>(raw_, "description", "");
    if (raw_.contains("parameters"))
        for (const auto& [k, v] : raw_["parameters"].items()) params_[k] = v.get<double>();
    if (raw_.contains("parameter_sweep")) {
        const Json& s = raw_["parameter_sweep"];
        require_keys(s, {"name", "values"}, "parameter_sweep");
        if (!params_.count(s.at("name").get<std::string>()))
            throw SchemaError("parameter_sweep: unknown parameter '" + s.at("name").get<std::string>() + "'");
        grid_from_json(s.at("values"), "parameter_sweep");
    }
    if (raw_.contains("nonlinearity")) nonlin_ = raw_["nonlinearity"];

    if (raw_.contains("controller")) {
        const Json& c = raw_["controller"];
        require_keys(c, {"structure", "initial", "fixed"}, "controller");
        if (!c.contains("structure")) throw SchemaError("controller: missing \"structure\"");
        cs_ = controller_structure_from_json(c["structure"]);
        has_controller_ = true;
        x_init_ = c.contains("initial") ? vector_from_json(c["initial"], "controller.initial")
                                        : VectorXd(VectorXd::Zero(cs_.parameter_count()));
        if (x_init_.size() != cs_.parameter_count())
            throw SchemaError("controller.initial: expected " + std::to_string(cs_.parameter_count()) + " parameters");
        if (c.contains("fixed")) {
            const Json& f = c["fixed"];
            require_keys(f, {"parameters", "lag_form", "system"}, "controller.fixed");
            if (f.contains("system")) {
                fixed_ = system_from_json(f["system"]);
            } else if (f.contains("lag_form")) {
                const VectorXd v = vector_from_json(f["lag_form"], "controller.fixed.lag_form");
                if (v.size() != 4 || cs_.kind != ControllerKind::pid)
                    throw SchemaError("controller.fixed.lag_form: needs a PID structure and [Kp, Ki, gain, Tf]");
                fixed_ = cs_.realize(pid_from_lag_form(v(0), v(1), v(2), v(3)));
            } else if (f.contains("parameters")) {
                fixed_ = cs_.realize(vector_from_json(f["parameters"], "controller.fixed.parameters"));
            }
        }
    }

    // Resolve everything once so that schema errors surface before any computation.
    for (const auto& n : plant_names()) (void)plant(n);
    if (has_nonlinearity()) (void)nonlinearity();
    (void)norm_queries();
    if (raw_.contains("programs")) {
        require_keys(raw_["programs"], {"h2h", "pk-h", "sweep"}, "programs");
        for (const char* p : {"h2h", "pk-h"})
            if (has_program(p)) (void)program(p);
        if (has_sweep()) (void)sweep();
    }
    if (has_simulation()) (void)simulation();
}

std::vector<std::string> Scenario::plant_names() const {
    std::vector<std::string> out;
    for (const auto& item : raw_["plants"].items()) out.push_back(item.key());
    return out;
}

double Scenario::number(const Json& v, const std::string& where) const {
    if (v.is_number()) return v.get<double>();
    if (v.is_string()) {
        const auto it = params_.find(v.get<std::string>());
        if (it == params_.end()) throw SchemaError(where + ": unknown parameter '" + v.get<std::string>() + "'");
        return it->second;
    }
    throw SchemaError(where + ": expected a number or a parameter name");
}

MatrixXd Scenario::matrix_or_scalar(const Json& v, Index n, const std::string& where) const {
    if (v.is_array()) return matrix_from_json(v, where);
    return number(v, where) * MatrixXd::Identity(n, n);
}

Plant Scenario::plant(const std::string& name) const {
    return plant_impl(name, 0);
}

Plant Scenario::plant_impl(const std::string& name, int depth) const {
    const Json& plants = raw_["plants"];
    if (!plants.contains(name)) throw SchemaError("unknown plant '" + name + "'");
    if (depth > 16) throw SchemaError("plant '" + name + "': derivation chain too deep or cyclic");
    const Json& j = plants[name];
    if (!j.contains("from")) return plant_from_json(j);
    const std::string where = "plant '" + name + "'";
    require_keys(j, {"from", "ops"}, where);
    Plant P = plant_impl(j["from"].get<std::string>(), depth + 1);
    if (!j.contains("ops")) return P;
    for (const Json& op : j["ops"]) {
        if (op.contains("scale_output") || op.contains("scale_input")) {
            require_keys(op, {"scale_output", "scale_input", "by"}, where);
            if (!op.contains("by")) throw SchemaError(where + ": scale op needs \"by\"");
            for (const char* key : {"scale_output", "scale_input"})
                if (op.contains(key) && !op[key].is_string()) throw SchemaError(where + ": " + key + " names a group");
            const double k = number(op.at("by"), where);
            if (op.contains("scale_output")) {
                const Group& g = P.output(op["scale_output"].get<std::string>());
                P.sys.C.middleRows(g.begin, g.size) *= k;
                P.sys.D.middleRows(g.begin, g.size) *= k;
            }
            if (op.contains("scale_input")) {
                const Group& g = P.input(op["scale_input"].get<std::string>());
                P.sys.B.middleCols(g.begin, g.size) *= k;
                P.sys.D.middleCols(g.begin, g.size) *= k;
            }
        } else if (op.contains("sector_shift")) {
            require_keys(op, {"sector_shift", "p", "q"}, where);
            const std::string p = get_or<std::string>(op, "p", "p"), q = get_or<std::string>(op, "q", "q");
            const Index np = P.input(p).size, nq = P.output(q).size;
            MatrixXd G = op["sector_shift"].is_array() ? matrix_from_json(op["sector_shift"], where)
                                                       : MatrixXd(number(op["sector_shift"], where) * MatrixXd::Identity(np, nq));
            P = sector_shift(P, G, p, q);
        } else if (op.contains("feedback")) {
            require_keys(op, {"feedback"}, where);
            const std::string k = op["feedback"].get<std::string>();
            if (k == "fixed" && fixed_) P = feedback_lft(P, *fixed_);
            else if (k == "initial" && has_controller_) P = feedback_lft(P, cs_.realize(x_init_));
            else throw SchemaError(where + ": feedback needs \"fixed\" or \"initial\" with a matching controller");
        } else if (op.contains("polyhedral")) {
            require_keys(op, {"polyhedral", "p", "q"}, where);
            const Json& t = op["polyhedral"];
            require_keys(t, {"T", "S"}, where + " polyhedral");
            P = polyhedral_transform(P, PolyhedralChange(matrix_from_json(t.at("T"), "T"), matrix_from_json(t.at("S"), "S")),
                                     get_or<std::string>(op, "p", "p"), get_or<std::string>(op, "q", "q"));
        } else {
            throw SchemaError(where + ": unknown op " + op.dump());
        }
    }
    return P;
}

void Scenario::set_parameter(const std::string& name, double value) {
    if (!params_.count(name)) throw SchemaError("unknown parameter '" + name + "'");
    params_[name] = value;
}

std::optional<std::pair<std::string, std::vector<double>>> Scenario::parameter_sweep() const {
    if (!raw_.contains("parameter_sweep")) return std::nullopt;
    const Json& s = raw_["parameter_sweep"];
    return std::make_pair(s.at("name").get<std::string>(), grid_from_json(s.at("values"), "parameter_sweep"));
}

Nonlinearity Scenario::nonlinearity() const {
    if (!has_nonlinearity()) throw SchemaError("scenario has no nonlinearity");
    return make_nonlinearity(nonlin_);
}

std::map<std::string, NormQuery> Scenario::norm_queries() const {
    std::map<std::string, NormQuery> out;
    if (!raw_.contains("norm")) return out;
    const Json& n = raw_["norm"];
    require_keys(n, {"pkgn", "hinf", "chain"}, "norm");
    for (const auto& [k, v] : n.items()) {
        require_keys(v, {"plant", "channel"}, "norm." + k);
        NormQuery q{v.at("plant").get<std::string>(), channel_from_json(v.at("channel"), "norm." + k)};
        (void)channel(plant(q.plant), q.sel);
        out[k] = q;
    }
    return out;
}

bool Scenario::has_program(const std::string& name) const {
    return raw_.contains("programs") && raw_["programs"].contains(name);
}

ProgramSettings Scenario::program(const std::string& name) const {
    if (!has_program(name)) throw SchemaError("scenario has no program '" + name + "'");
    const Json& j = raw_["programs"][name];
    const std::string where = "programs." + name;
    require_keys(j, {"objective", "constraint", "tau", "gamma_inf", "stabilize", "threshold", "certificate", "restarts",
                     "max_iterations", "seed", "spread", "stability_margin"},
                 where);
    if (!has_controller_) throw SchemaError(where + ": scenario has no controller structure");
    auto chan = [&](const Json& c, const std::string& w) {
        require_keys(c, {"plant", "channel", "kind"}, w);
        ProgramChannel pc{plant(c.at("plant").get<std::string>()), channel_from_json(c.at("channel"), w),
                          norm_kind_from_string(c.at("kind").get<std::string>())};
        (void)channel(pc.plant, pc.sel);
        return pc;
    };
    ProgramSettings s;
    if (!j.contains("objective")) throw SchemaError(where + ": missing objective");
    s.spec.objective = chan(j["objective"], where + ".objective");
    if (j.contains("constraint")) s.spec.constraint = chan(j["constraint"], where + ".constraint");
    s.spec.tau = get_or(j, "tau", 0.1);
    if (j.contains("gamma_inf") && !j["gamma_inf"].is_null()) s.spec.gamma_inf = j["gamma_inf"].get<double>();
    if (j.contains("stabilize"))
        for (const auto& p : j["stabilize"]) s.spec.stabilize.push_back(plant(p.get<std::string>()));
    if (j.contains("threshold")) s.spec.threshold = number(j["threshold"], where + ".threshold");
    const std::string kind = get_or<std::string>(j, "certificate", name == "h2h" ? "L2" : "BIBO");
    if (kind != "L2" && kind != "BIBO") throw SchemaError(where + ": certificate must be L2 or BIBO");
    s.kind = kind == "L2" ? CertificateKind::L2 : CertificateKind::BIBO;
    s.options.restarts = get_or(j, "restarts", 5);
    s.options.max_iterations = get_or(j, "max_iterations", 500);
    s.options.seed = get_or(j, "seed", 1u);
    s.options.spread = get_or(j, "spread", 0.3);
    s.options.stability_margin = get_or(j, "stability_margin", 0.01);
    if (s.spec.tau < 0) throw SchemaError(where + ": tau must be nonnegative");
    return s;
}

SweepSettings Scenario::sweep() const {
    const Json& j = raw_["programs"]["sweep"];
    require_keys(j, {"plant", "channel", "gamma", "c_grid", "q_inf", "restarts", "max_iterations", "seed"}, "programs.sweep");
    SweepSettings s;
    s.plant = j.at("plant").get<std::string>();
    s.sel = channel_from_json(j.at("channel"), "programs.sweep");
    const Plant P = plant(s.plant);
    s.gamma = j.contains("gamma") ? matrix_or_scalar(j["gamma"], P.input("p").size, "programs.sweep.gamma")
                                  : MatrixXd(MatrixXd::Identity(P.input("p").size, P.output("q").size));
    s.c_grid = grid_from_json(j.at("c_grid"), "programs.sweep.c_grid");
    s.q_inf = number(j.at("q_inf"), "programs.sweep.q_inf");
    s.options.restarts = get_or(j, "restarts", 1);
    s.options.max_iterations = get_or(j, "max_iterations", 500);
    s.options.seed = get_or(j, "seed", 1u);
    (void)sector_shift(P, s.gamma);
    return s;
}

SimulationSettings Scenario::simulation() const {
    const Json& j = raw_["simulation"];
    require_keys(j, {"plant", "p", "q", "controller", "x0", "t_end", "tol", "dt_out", "max_points", "probe", "equilibria"},
                 "simulation");
    SimulationSettings s;
    s.plant = j.at("plant").get<std::string>();
    s.p_group = get_or<std::string>(j, "p", "p");
    s.q_group = get_or<std::string>(j, "q", "q");
    s.controller = get_or<std::string>(j, "controller", "none");
    if (s.controller != "none" && s.controller != "fixed" && s.controller != "initial")
        throw SchemaError("simulation.controller must be none, fixed or initial");
    if (s.controller == "fixed" && !fixed_) throw SchemaError("simulation: no fixed controller in the scenario");
    if (j.contains("x0")) s.x0 = vector_from_json(j["x0"], "simulation.x0");
    s.t_end = get_or(j, "t_end", 100.0);
    s.options.tol = get_or(j, "tol", 1e-8);
    s.options.dt_out = get_or(j, "dt_out", 0.0);
    s.options.max_points = get_or<std::size_t>(j, "max_points", 100000);
    if (j.contains("probe")) {
        const Json& p = j["probe"];
        require_keys(p, {"count", "amplitude", "seed", "t_end"}, "simulation.probe");
        s.probe.count = get_or(p, "count", 20);
        s.probe.amplitude = get_or(p, "amplitude", 1.0);
        s.probe.seed = get_or(p, "seed", 1u);
        s.probe.t_end = get_or(p, "t_end", 200.0);
    }
    if (j.contains("equilibria")) {
        const Json& e = j["equilibria"];
        require_keys(e, {"box", "seeds", "seed"}, "simulation.equilibria");
        s.equilibria.box = get_or(e, "box", 10.0);
        s.equilibria.seeds = get_or(e, "seeds", 200);
        s.equilibria.seed = get_or(e, "seed", 1u);
    }
    if (!has_nonlinearity()) throw SchemaError("simulation: scenario has no nonlinearity");
    (void)close_loop(loop(s, s.controller == "fixed" ? fixed_ : std::nullopt));
    return s;
}

LureLoop Scenario::loop(const SimulationSettings& s, const std::optional<System>& K) const {
    LureLoop L;
    L.plant = plant(s.plant);
    L.phi = nonlinearity();
    L.p_group = s.p_group;
    L.q_group = s.q_group;
    L.x0 = s.x0;
    if (K) {
        L.controller = *K;
    } else if (s.controller == "fixed") {
        L.controller = fixed_;
    } else if (s.controller == "initial") {
        L.controller = cs_.realize(x_init_);
    }
    return L;
}

Scenario read_scenario(const std::string& path) { return Scenario(read_json_file(path)); }

}  // namespace pkgain
