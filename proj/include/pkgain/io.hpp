#pragma once

// JSON (de)serialization of matrices, systems and plants.

#include <json.hpp>

#include <string>

#include "pkgain/lti.hpp"

namespace pkgain {

using Json = nlohmann::json;

class SchemaError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Nested row arrays; [] is the empty matrix. A bare number is a 1x1 matrix.
MatrixXd matrix_from_json(const Json& j, const std::string& what = "matrix");
Json matrix_to_json(const MatrixXd& M);
VectorXd vector_from_json(const Json& j, const std::string& what = "vector");
Json vector_to_json(const VectorXd& v);

/// {"A","B","C","D"}. A, B and C may be omitted for a static gain.
System system_from_json(const Json& j);
Json system_to_json(const System& G);

/// System fields plus "inputs"/"outputs": [{"name": .., "cols"/"rows": [begin, end)}].
Plant plant_from_json(const Json& j);
Json plant_to_json(const Plant& P);

/// Throws SchemaError naming the first key of `j` that is not in `allowed`.
void require_keys(const Json& j, std::initializer_list<const char*> allowed, const std::string& where);

Json read_json_file(const std::string& path);

}  // namespace pkgain
