#include "qsme/model_io.hpp"

#include <fstream>
#include <sstream>

#include "qsme/errors.hpp"

namespace qsme {

namespace {

using nlohmann::json;

Matrix parse_matrix(const json& j, Eigen::Index d, const char* name) {
  if (!j.is_array() || j.size() != static_cast<std::size_t>(d))
    throw ValidationError(std::string(name) + ": expected " + std::to_string(d) + " rows");
  Matrix m(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    const json& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || row.size() != static_cast<std::size_t>(d))
      throw ValidationError(std::string(name) + ": row " + std::to_string(i) +
                            " must have " + std::to_string(d) + " entries");
    for (Eigen::Index k = 0; k < d; ++k) {
      const json& e = row[static_cast<std::size_t>(k)];
      if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number())
        throw ValidationError(std::string(name) + ": entries must be [re, im] pairs");
      m(i, k) = Complex(e[0].get<double>(), e[1].get<double>());
    }
  }
  if (!all_finite(m)) throw ValidationError(std::string(name) + ": non-finite entry");
  return m;
}

}  // namespace

nlohmann::json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index k = 0; k < m.cols(); ++k)
      row.push_back({m(i, k).real(), m(i, k).imag()});
    rows.push_back(std::move(row));
  }
  return rows;
}

std::pair<SmeModel, SubspaceSplit> parse_model(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("model file is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ValidationError("model file must be a JSON object");
  if (!j.contains("dim") || !j["dim"].is_number_integer())
    throw ValidationError("missing integer field \"dim\"");
  if (!j.contains("d_S") || !j["d_S"].is_number_integer())
    throw ValidationError("missing integer field \"d_S\"");
  const auto d = j["dim"].get<Eigen::Index>();
  const auto d_s = j["d_S"].get<Eigen::Index>();
  if (d < 2) throw ValidationError("\"dim\" must be at least 2");
  if (d_s < 1 || d_s >= d) throw ValidationError("\"d_S\" must lie in [1, dim-1]");

  Matrix basis = Matrix::Identity(d, d);
  if (j.contains("basis")) basis = parse_matrix(j["basis"], d, "basis");

  if (!j.contains("H")) throw ValidationError("missing field \"H\"");
  Matrix h = parse_matrix(j["H"], d, "H");

  if (!j.contains("channels") || !j["channels"].is_array() || j["channels"].empty())
    throw ValidationError("\"channels\" must be a non-empty array");
  std::vector<Channel> channels;
  for (const json& cj : j["channels"]) {
    if (!cj.is_object() || !cj.contains("matrix") || !cj.contains("kind"))
      throw ValidationError("each channel needs \"matrix\" and \"kind\"");
    const std::string kind = cj["kind"].get<std::string>();
    ChannelKind k;
    if (kind == "diffusive")
      k = ChannelKind::Diffusive;
    else if (kind == "jump")
      k = ChannelKind::Jump;
    else
      throw ValidationError("channel kind must be \"diffusive\" or \"jump\"");
    channels.push_back({parse_matrix(cj["matrix"], d, "channel matrix"), k});
  }

  SmeModel model = make_model(std::move(h), std::move(channels));
  SubspaceSplit split = make_split(d, d_s, std::move(basis));
  return to_adapted_basis(model, split);
}

std::pair<SmeModel, SubspaceSplit> load_model_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open model file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_model(buf.str());
}

nlohmann::json model_to_json(const SmeModel& model, const SubspaceSplit& split) {
  nlohmann::json j;
  j["dim"] = model.dim();
  j["d_S"] = split.dim_s;
  if (!split.is_standard_basis()) j["basis"] = matrix_to_json(split.basis);
  j["H"] = matrix_to_json(model.hamiltonian);
  nlohmann::json chans = nlohmann::json::array();
  for (const Channel& c : model.channels) {
    chans.push_back({{"matrix", matrix_to_json(c.op)},
                     {"kind", c.kind == ChannelKind::Diffusive ? "diffusive" : "jump"}});
  }
  j["channels"] = std::move(chans);
  return j;
}

}  // namespace qsme
