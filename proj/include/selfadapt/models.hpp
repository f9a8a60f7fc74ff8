#pragma once

#include <map>
#include <string>

namespace selfadapt {

/// Bundled model sources keyed by file name (e.g. "packet_loss.anm").
const std::map<std::string, std::string>& embedded_models();

/// Text of a bundled model; throws std::out_of_range for unknown names.
inline const std::string& embedded_model(const std::string& name) { return embedded_models().at(name); }

}  // namespace selfadapt
