#pragma once

#include <string>
#include <utility>

#include <json.hpp>

#include "qsme/model.hpp"

namespace qsme {

/// Parses a model file (JSON) and rotates everything into the adapted basis,
/// so the returned split always carries the standard basis. Schema:
///   { "dim": d, "d_S": k, "basis": optional d x d of [re, im],
///     "H": d x d of [re, im],
///     "channels": [ { "matrix": d x d of [re, im],
///                     "kind": "diffusive" | "jump" } ] }
/// Throws ValidationError on schema violations or invariant failures.
std::pair<SmeModel, SubspaceSplit> parse_model(const std::string& text);

std::pair<SmeModel, SubspaceSplit> load_model_file(const std::string& path);

nlohmann::json model_to_json(const SmeModel& model, const SubspaceSplit& split);

/// Row-major array of [re, im] pairs, the same encoding the model file uses.
nlohmann::json matrix_to_json(const Matrix& m);

}  // namespace qsme
