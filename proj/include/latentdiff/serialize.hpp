#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "latentdiff/binning.hpp"
#include "latentdiff/dataset.hpp"
#include "latentdiff/tensor.hpp"

namespace latentdiff {

using Json = nlohmann::json;

/// {"rows": r, "cols": c, "data": [row-major values]}
Json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const Json& j);

Json standardizer_to_json(const Standardizer& s);
Standardizer standardizer_from_json(const Json& j);

Json binspec_to_json(const BinSpec& b);
BinSpec binspec_from_json(const Json& j);

/// Writes `j` plus a trailing newline; indent < 0 gives the compact form.
void write_json(const std::filesystem::path& path, const Json& j, int indent = 2);
Json read_json(const std::filesystem::path& path);

/// FNV-1a of the compact dump, as 16 hex digits.
std::string json_hash(const Json& j);

}  // namespace latentdiff
