#pragma once

#include <string>

#include "opcert/core/binary_io.hpp"
#include "opcert/neuralop/wno.hpp"

namespace opcert::neuralop {

/// Model checkpoint: "OPCERT01", version, config block, named parameter records.
void save_model(const std::string& path, const WnoModel& model);
WnoModel load_model(const std::string& path);

void write_config(BinaryWriter& w, const WnoConfig& config);
WnoConfig read_config(BinaryReader& r);

}  // namespace opcert::neuralop
