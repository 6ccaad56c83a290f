#include "pkgain/io.hpp"

#include <fstream>
#include <sstream>

namespace pkgain {

MatrixXd matrix_from_json(const Json& j, const std::string& what) {
    if (j.is_number()) return MatrixXd::Constant(1, 1, j.get<double>());
    if (!j.is_array()) throw SchemaError(what + ": expected an array of rows");
    if (j.empty()) return MatrixXd(0, 0);
    const Index rows = static_cast<Index>(j.size());
    if (!j[0].is_array()) throw SchemaError(what + ": expected an array of rows");
    const Index cols = static_cast<Index>(j[0].size());
    MatrixXd M(rows, cols);
    for (Index i = 0; i < rows; ++i) {
        const auto& row = j[static_cast<std::size_t>(i)];
        if (!row.is_array() || static_cast<Index>(row.size()) != cols)
            throw SchemaError(what + ": ragged rows");
        for (Index k = 0; k < cols; ++k) {
            const auto& v = row[static_cast<std::size_t>(k)];
            if (!v.is_number()) throw SchemaError(what + ": non-numeric entry");
            M(i, k) = v.get<double>();
        }
    }
    return M;
}

Json matrix_to_json(const MatrixXd& M) {
    Json j = Json::array();
    for (Index i = 0; i < M.rows(); ++i) {
        Json row = Json::array();
        for (Index k = 0; k < M.cols(); ++k) row.push_back(M(i, k));
        j.push_back(row);
    }
    return j;
}

VectorXd vector_from_json(const Json& j, const std::string& what) {
    if (j.is_number()) return VectorXd::Constant(1, j.get<double>());
    if (!j.is_array()) throw SchemaError(what + ": expected an array");
    VectorXd v(static_cast<Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) throw SchemaError(what + ": non-numeric entry");
        v(static_cast<Index>(i)) = j[i].get<double>();
    }
    return v;
}

Json vector_to_json(const VectorXd& v) {
    Json j = Json::array();
    for (Index i = 0; i < v.size(); ++i) j.push_back(v(i));
    return j;
}

void require_keys(const Json& j, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!j.is_object()) throw SchemaError(where + ": expected an object");
    for (const auto& item : j.items()) {
        bool ok = false;
        for (const char* a : allowed) ok = ok || item.key() == a;
        if (!ok) throw SchemaError(where + ": unknown key '" + item.key() + "'");
    }
}

System system_from_json(const Json& j) {
    if (!j.contains("D")) throw SchemaError("system: missing \"D\"");
    MatrixXd D = matrix_from_json(j["D"], "D");
    MatrixXd A = j.contains("A") ? matrix_from_json(j["A"], "A") : MatrixXd(0, 0);
    const Index n = A.rows();
    MatrixXd B = j.contains("B") ? matrix_from_json(j["B"], "B") : MatrixXd(0, 0);
    MatrixXd C = j.contains("C") ? matrix_from_json(j["C"], "C") : MatrixXd(0, 0);
    if (n == 0) {
        B.resize(0, D.cols());
        C.resize(D.rows(), 0);
    }
    if (D.size() == 0 && n > 0) D = MatrixXd::Zero(C.rows(), B.cols());
    return System(std::move(A), std::move(B), std::move(C), std::move(D));
}

Json system_to_json(const System& G) {
    return Json{{"A", matrix_to_json(G.A)},
                {"B", matrix_to_json(G.B)},
                {"C", matrix_to_json(G.C)},
                {"D", matrix_to_json(G.D)}};
}

namespace {

std::vector<Group> groups_from_json(const Json& j, const char* range_key, const std::string& where) {
    if (!j.is_array()) throw SchemaError(where + ": expected an array of groups");
    std::vector<Group> groups;
    for (const auto& g : j) {
        require_keys(g, {"name", range_key}, where);
        if (!g.contains("name") || !g.contains(range_key))
            throw SchemaError(where + ": group needs \"name\" and \"" + range_key + "\"");
        const auto& r = g[range_key];
        if (!r.is_array() || r.size() != 2) throw SchemaError(where + ": range must be [begin, end)");
        const Index b = r[0].get<Index>(), e = r[1].get<Index>();
        groups.push_back({g["name"].get<std::string>(), b, e - b});
    }
    return groups;
}

Json groups_to_json(const std::vector<Group>& groups, const char* range_key) {
    Json j = Json::array();
    for (const auto& g : groups) j.push_back({{"name", g.name}, {range_key, {g.begin, g.end()}}});
    return j;
}

}  // namespace

Plant plant_from_json(const Json& j) {
    require_keys(j, {"A", "B", "C", "D", "inputs", "outputs"}, "plant");
    System sys = system_from_json(j);
    std::vector<Group> in = j.contains("inputs") ? groups_from_json(j["inputs"], "cols", "inputs")
                                                 : make_groups({{"in", sys.inputs()}});
    std::vector<Group> out = j.contains("outputs") ? groups_from_json(j["outputs"], "rows", "outputs")
                                                   : make_groups({{"out", sys.outputs()}});
    return Plant(std::move(sys), std::move(in), std::move(out));
}

Json plant_to_json(const Plant& P) {
    Json j = system_to_json(P.sys);
    j["inputs"] = groups_to_json(P.inputs, "cols");
    j["outputs"] = groups_to_json(P.outputs, "rows");
    return j;
}

Json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    try {
        return Json::parse(in, nullptr, true, true);
    } catch (const Json::parse_error& e) {
        throw SchemaError(path + ": " + e.what());
    }
}

}  // namespace pkgain
