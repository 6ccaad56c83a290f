#pragma once

// Scenario files: plants, nonlinearity, controller, programs and simulation
// settings in one JSON document (schema_version 1, unknown keys rejected).

#include <map>

#include "pkgain/sim.hpp"
#include "pkgain/synth.hpp"

namespace pkgain {

constexpr int kScenarioSchemaVersion = 1;

struct NormQuery {
    std::string plant;
    ChannelSelector sel;
};

struct ProgramSettings {
    MixedProgramSpec spec;
    SynthesisOptions options;
    CertificateKind kind = CertificateKind::BIBO;
};

struct SweepSettings {
    std::string plant;
    ChannelSelector sel;
    MatrixXd gamma;            // family(c) = sector_shift(plant, c gamma)
    std::vector<double> c_grid;
    double q_inf = 0.0;
    SynthesisOptions options;
};

struct ProbeSettings {
    int count = 20;
    double amplitude = 1.0;
    unsigned seed = 1;
    double t_end = 200.0;
};

struct SimulationSettings {
    std::string plant;
    std::string p_group = "p";
    std::string q_group = "q";
    std::string controller = "none";  // none | fixed | initial
    VectorXd x0;
    double t_end = 100.0;
    SimOptions options;
    ProbeSettings probe;
    EquilibriumOptions equilibria;
};

class Scenario {
public:
    explicit Scenario(Json j);

    [[nodiscard]] const std::string& name() const { return name_; }
    [[nodiscard]] const std::string& description() const { return description_; }

    [[nodiscard]] std::vector<std::string> plant_names() const;
    /// Base plants as written; derived plants with every op applied under the
    /// current parameter values.
    [[nodiscard]] Plant plant(const std::string& name) const;

    [[nodiscard]] const std::map<std::string, double>& parameters() const { return params_; }
    void set_parameter(const std::string& name, double value);
    [[nodiscard]] std::optional<std::pair<std::string, std::vector<double>>> parameter_sweep() const;

    [[nodiscard]] bool has_nonlinearity() const { return !nonlin_.is_null(); }
    [[nodiscard]] Nonlinearity nonlinearity() const;

    [[nodiscard]] bool has_controller() const { return has_controller_; }
    [[nodiscard]] const ControllerStructure& controller_structure() const { return cs_; }
    [[nodiscard]] const VectorXd& controller_initial() const { return x_init_; }
    [[nodiscard]] std::optional<System> fixed_controller() const { return fixed_; }

    [[nodiscard]] std::map<std::string, NormQuery> norm_queries() const;  // keys: pkgn, hinf, chain
    [[nodiscard]] bool has_program(const std::string& name) const;
    [[nodiscard]] ProgramSettings program(const std::string& name) const;  // h2h | pk-h
    [[nodiscard]] bool has_sweep() const { return raw_.contains("programs") && raw_["programs"].contains("sweep"); }
    [[nodiscard]] SweepSettings sweep() const;

    [[nodiscard]] bool has_simulation() const { return raw_.contains("simulation"); }
    [[nodiscard]] SimulationSettings simulation() const;
    /// The simulation loop with the chosen controller ("none", "fixed",
    /// "initial", or an explicit realization).
    [[nodiscard]] LureLoop loop(const SimulationSettings& s, const std::optional<System>& K) const;

    [[nodiscard]] const Json& raw() const { return raw_; }

private:
    [[nodiscard]] Plant plant_impl(const std::string& name, int depth) const;
    [[nodiscard]] double number(const Json& v, const std::string& where) const;
    [[nodiscard]] MatrixXd matrix_or_scalar(const Json& v, Index n, const std::string& where) const;

    Json raw_;
    std::string name_, description_;
    std::map<std::string, double> params_;
    Json nonlin_;
    bool has_controller_ = false;
    ControllerStructure cs_;
    VectorXd x_init_;
    std::optional<System> fixed_;
};

Scenario read_scenario(const std::string& path);

}  // namespace pkgain
