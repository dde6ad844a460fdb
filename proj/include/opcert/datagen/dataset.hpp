#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "opcert/core/grid.hpp"
#include "opcert/core/keyvalue.hpp"
#include "opcert/core/tensor.hpp"
#include "opcert/datagen/burgers.hpp"
#include "opcert/datagen/darcy.hpp"
#include "opcert/datagen/grf.hpp"

namespace opcert::datagen {

enum class DatasetKind { burgers = 1, darcy = 2 };

DatasetKind parse_kind(const std::string& name);
std::string kind_name(DatasetKind kind);

/// Paired input/output fields on one grid: inputs and outputs are [S, spatial...].
struct Dataset {
  DatasetKind kind = DatasetKind::burgers;
  GridSpec grid;
  Tensor inputs;
  Tensor outputs;

  std::size_t size() const { return inputs.dim(0); }
  /// First `count` samples.
  Dataset head(std::size_t count) const;
};

/// "OPDATA01", version, kind, grid, count, then per-sample input and output.
void save_dataset(const std::string& path, const Dataset& data);
Dataset load_dataset(const std::string& path);

enum class Split : std::uint64_t { train = 1, calibration = 2, test = 3 };

const char* split_name(Split split);

struct GenerationConfig {
  DatasetKind kind = DatasetKind::burgers;
  std::uint64_t seed = 0;
  std::size_t train = 200;
  std::size_t calibration = 50;
  std::size_t test = 100;
  std::size_t resolution = 128;
  /// Resolution of an extra copy of the test split; 0 disables it.
  std::size_t hi_resolution = 256;
  BurgersConfig burgers;
  DarcyConfig darcy;
  GrfSpec grf = GrfSpec::burgers();

  static GenerationConfig burgers_desk();
  static GenerationConfig darcy_desk();
  void validate() const;
  KeyValues describe() const;
};

/// One sample of a split at a given output resolution; a pure function of
/// (seed, split, index), so resolutions of the same index agree.
std::pair<Tensor, Tensor> generate_sample(const GenerationConfig& config, Split split, std::size_t index,
                                          std::size_t resolution);
GridSpec dataset_grid(DatasetKind kind, std::size_t resolution);

Dataset generate_split(const GenerationConfig& config, Split split, std::size_t count, std::size_t resolution,
                       std::size_t workers);

/// Writes train/calibration/test (and test_hi) dataset files plus
/// manifest.txt into `dir`, creating it if needed.
void make_dataset(const GenerationConfig& config, const std::string& dir, std::size_t workers);

}  // namespace opcert::datagen
