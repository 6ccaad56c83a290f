#include "pkgain/norms.hpp"

namespace pkgain {

std::string to_string(NormKind k) {
    switch (k) {
        case NormKind::hinf: return "hinf";
        case NormKind::pk_gn: return "pk_gn";
        case NormKind::row_l1: return "row_l1";
    }
    return "?";
}

NormKind norm_kind_from_string(const std::string& s) {
    if (s == "hinf") return NormKind::hinf;
    if (s == "pk_gn" || s == "pkgn") return NormKind::pk_gn;
    if (s == "row_l1") return NormKind::row_l1;
    throw SchemaError("unknown norm kind '" + s + "'");
}

Json certificate_to_json(const NormCertificate& c, bool with_grid) {
    Json j{{"kind", to_string(c.kind)}, {"value", c.value}, {"abs_error_bound", c.abs_error_bound}};
    if (c.kind == NormKind::hinf) {
        j["bracket"] = {c.lower, c.upper};
        j["peak_frequency"] = std::isinf(c.peak_frequency) ? Json("inf") : Json(c.peak_frequency);
    } else {
        j["horizon_T"] = c.horizon_T;
        j["row"] = c.row;
        if (!c.row_values.empty()) j["row_values"] = c.row_values;
    }
    j["nodes"] = c.nodes;
    if (with_grid) j["grid"] = c.grid;
    return j;
}

std::pair<double, double> chain_bounds(const System& G, double tol) {
    const double hinf = hinf_norm(G, tol).value;
    const double m = static_cast<double>(G.outputs()), p = static_cast<double>(G.inputs());
    const double n = static_cast<double>(G.states());
    const bool strictly_proper = G.D.size() == 0 || G.D.cwiseAbs().maxCoeff() == 0.0;
    const double factor = strictly_proper && n > 0 ? 2.0 * n : 2.0 * n + 1.0;
    return {hinf / std::sqrt(std::max(1.0, m)), factor * std::sqrt(p) * hinf};
}

}  // namespace pkgain
