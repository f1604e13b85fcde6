#include <fstream>

#include "mmtl/experiment.hpp"

namespace mmtl {

using nlohmann::json;

json checkpoint_json(const ModelParams& model) {
  const std::size_t T = num_tasks(model), d = input_dim(model);
  json doc;
  if (const auto* ep = std::get_if<EpParams>(&model)) {
    doc["kind"] = "ep";
    doc["T"] = T;
    doc["d"] = d;
    doc["v0"] = ep->v0;
    doc["vt"] = ep->vt;
  } else {
    const Matrix& W = std::get<AepParams>(model).W;
    doc["kind"] = "aep";
    doc["T"] = T;
    doc["d"] = d;
    json rows = json::array();
    for (std::size_t t = 0; t < T; ++t) rows.push_back(Vector(W.row(t).begin(), W.row(t).end()));
    doc["W"] = std::move(rows);
  }
  return doc;
}

ModelParams checkpoint_from_json(const json& doc) {
  try {
    const std::string kind = doc.at("kind").get<std::string>();
    const auto T = doc.at("T").get<std::size_t>();
    const auto d = doc.at("d").get<std::size_t>();
    auto check_row = [d](const Vector& v) {
      if (v.size() != d) throw DataError("checkpoint row length differs from d");
    };
    if (kind == "ep") {
      EpParams p;
      p.v0 = doc.at("v0").get<Vector>();
      p.vt = doc.at("vt").get<std::vector<Vector>>();
      check_row(p.v0);
      if (p.vt.size() != T) throw DataError("checkpoint vt has the wrong task count");
      for (const auto& v : p.vt) check_row(v);
      return p;
    }
    if (kind == "aep") {
      const auto rows = doc.at("W").get<std::vector<Vector>>();
      if (rows.size() != T) throw DataError("checkpoint W has the wrong task count");
      for (const auto& v : rows) check_row(v);
      return AepParams{rows.empty() ? Matrix(0, d) : Matrix::from_rows(rows)};
    }
    throw DataError("unknown checkpoint kind '" + kind + "'");
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const ModelParams& model) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  out << checkpoint_json(model).dump() << '\n';
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  try {
    return checkpoint_from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw DataError("checkpoint " + path.string() + " is not valid JSON: " + e.what());
  }
}

}  // namespace mmtl
