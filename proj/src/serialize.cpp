#include "latentdiff/serialize.hpp"

#include <cstdio>
#include <fstream>

#include "latentdiff/errors.hpp"
#include "latentdiff/rng.hpp"

namespace latentdiff {

Json matrix_to_json(const Matrix& m) {
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(m.size()));
  for (Index r = 0; r < m.rows(); ++r)
    for (Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  return Json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

Matrix matrix_from_json(const Json& j) {
  const Index rows = j.at("rows").get<Index>();
  const Index cols = j.at("cols").get<Index>();
  const Json& data = j.at("data");
  if (rows < 0 || cols < 0 || static_cast<Index>(data.size()) != rows * cols)
    throw ParseError("matrix json: data length does not match rows x cols");
  Matrix m(rows, cols);
  std::size_t k = 0;
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) m(r, c) = data[k++].get<double>();
  return m;
}

Json standardizer_to_json(const Standardizer& s) {
  return Json{{"mean", matrix_to_json(s.mean())},
              {"stddev", matrix_to_json(s.stddev())},
              {"constant", s.constant()}};
}

Standardizer standardizer_from_json(const Json& j) {
  RowVector mean = matrix_from_json(j.at("mean"));
  RowVector sd = matrix_from_json(j.at("stddev"));
  return Standardizer(std::move(mean), std::move(sd), j.at("constant").get<std::vector<bool>>());
}

Json binspec_to_json(const BinSpec& b) {
  return Json{{"y_min", b.y_min()}, {"y_max", b.y_max()}, {"bins", b.bins()}};
}

BinSpec binspec_from_json(const Json& j) {
  return BinSpec(j.at("y_min").get<double>(), j.at("y_max").get<double>(), j.at("bins").get<int>());
}

void write_json(const std::filesystem::path& path, const Json& j, int indent) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(path.string() + ": cannot open for writing");
  out << j.dump(indent) << '\n';
  if (!out) throw Error(path.string() + ": write failed");
}

Json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw PrerequisiteError("missing file: " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

std::string json_hash(const Json& j) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a64(j.dump())));
  return buf;
}

}  // namespace latentdiff
