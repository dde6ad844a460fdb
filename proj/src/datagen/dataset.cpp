#include "opcert/datagen/dataset.hpp"

#include <filesystem>

#include "opcert/core/binary_io.hpp"
#include "opcert/core/error.hpp"
#include "opcert/core/parallel.hpp"
#include "opcert/core/rng.hpp"

namespace opcert::datagen {
namespace {

constexpr const char* kMagic = "OPDATA01";
constexpr std::uint32_t kVersion = 1;

Shape sample_shape(std::size_t count, const GridSpec& grid) {
  Shape s{count};
  for (std::size_t n : grid.resolution) s.push_back(n);
  return s;
}

}  // namespace

DatasetKind parse_kind(const std::string& name) {
  if (name == "burgers") return DatasetKind::burgers;
  if (name == "darcy") return DatasetKind::darcy;
  fail(ErrorCode::config, "unknown experiment '" + name + "' (expected burgers or darcy)");
}

std::string kind_name(DatasetKind kind) { return kind == DatasetKind::burgers ? "burgers" : "darcy"; }

const char* split_name(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::calibration: return "calibration";
    case Split::test: return "test";
  }
  return "unknown";
}

Dataset Dataset::head(std::size_t count) const {
  require(count >= 1 && count <= size(), ErrorCode::invalid_argument, "head count out of range");
  Dataset d{kind, grid, Tensor(sample_shape(count, grid)), Tensor(sample_shape(count, grid))};
  const std::size_t stride = grid.points();
  std::copy_n(inputs.raw(), count * stride, d.inputs.raw());
  std::copy_n(outputs.raw(), count * stride, d.outputs.raw());
  return d;
}

void save_dataset(const std::string& path, const Dataset& data) {
  const Shape expect = sample_shape(data.size(), data.grid);
  require(data.inputs.shape() == expect && data.outputs.shape() == expect, ErrorCode::shape_mismatch,
          "dataset fields do not match the grid");
  BinaryWriter w(path);
  w.magic(kMagic);
  w.u32(kVersion);
  w.u32(static_cast<std::uint32_t>(data.kind));
  write_grid(w, data.grid);
  w.u64(data.size());
  const std::size_t p = data.grid.points();
  for (std::size_t s = 0; s < data.size(); ++s) {
    w.f64_array(data.inputs.raw() + s * p, p);
    w.f64_array(data.outputs.raw() + s * p, p);
  }
  w.close();
}

Dataset load_dataset(const std::string& path) {
  BinaryReader r(path);
  r.expect_magic(kMagic);
  require(r.u32() == kVersion, ErrorCode::io, "unsupported dataset version in '" + path + "'");
  const std::uint32_t kind = r.u32();
  require(kind == 1 || kind == 2, ErrorCode::io, "unknown dataset kind in '" + path + "'");
  Dataset d;
  d.kind = static_cast<DatasetKind>(kind);
  d.grid = read_grid(r);
  const std::uint64_t count = r.u64();
  require(count >= 1 && count < (1u << 24), ErrorCode::io, "corrupt sample count in '" + path + "'");
  d.inputs = Tensor(sample_shape(count, d.grid));
  d.outputs = Tensor(sample_shape(count, d.grid));
  const std::size_t p = d.grid.points();
  for (std::size_t s = 0; s < count; ++s) {
    r.f64_array(d.inputs.raw() + s * p, p);
    r.f64_array(d.outputs.raw() + s * p, p);
  }
  require(r.at_end(), ErrorCode::io, "trailing bytes in '" + path + "'");
  return d;
}

GenerationConfig GenerationConfig::burgers_desk() { return {}; }

GenerationConfig GenerationConfig::darcy_desk() {
  GenerationConfig c;
  c.kind = DatasetKind::darcy;
  c.resolution = 32;
  c.hi_resolution = 64;
  c.grf = GrfSpec::darcy();
  return c;
}

void GenerationConfig::validate() const {
  require(train >= 1 && calibration >= 1 && test >= 1, ErrorCode::config, "split counts must be >= 1");
  require(resolution >= 4, ErrorCode::config, "resolution must be >= 4");
  if (kind == DatasetKind::burgers) {
    require(grf.boundary == GrfBoundary::periodic, ErrorCode::config, "Burgers needs a periodic GRF");
    for (std::size_t r : {resolution, hi_resolution}) {
      if (r == 0) continue;
      require(r <= burgers.solver_resolution && burgers.solver_resolution % r == 0, ErrorCode::config,
              "resolution " + std::to_string(r) + " must divide the solver resolution " +
                  std::to_string(burgers.solver_resolution));
    }
  } else {
    require(grf.boundary == GrfBoundary::neumann, ErrorCode::config, "Darcy needs a Neumann GRF");
  }
}

KeyValues GenerationConfig::describe() const {
  KeyValues kv;
  kv.set("experiment", kind_name(kind));
  kv.set("seed", seed);
  kv.set("train", static_cast<std::uint64_t>(train));
  kv.set("calibration", static_cast<std::uint64_t>(calibration));
  kv.set("test", static_cast<std::uint64_t>(test));
  kv.set("resolution", static_cast<std::uint64_t>(resolution));
  kv.set("hi_resolution", static_cast<std::uint64_t>(hi_resolution));
  kv.set("grf.shift", grf.shift);
  kv.set("grf.scale", grf.scale);
  kv.set("grf.power", grf.power);
  kv.set("grf.modes", static_cast<std::uint64_t>(grf.modes));
  kv.set("grf.boundary", std::string(grf.boundary == GrfBoundary::periodic ? "periodic" : "neumann"));
  if (kind == DatasetKind::burgers) {
    kv.set("burgers.viscosity", burgers.viscosity);
    kv.set("burgers.dt", burgers.dt);
    kv.set("burgers.t_final", burgers.t_final);
    kv.set("burgers.solver_resolution", static_cast<std::uint64_t>(burgers.solver_resolution));
    kv.set("scale_note", std::string("paper: 1000/50/100 samples at 1024 points from an 8192-point solve; "
                                     "desk: counts above, solved at solver_resolution and subsampled"));
  } else {
    kv.set("darcy.low", darcy.low);
    kv.set("darcy.high", darcy.high);
    kv.set("darcy.forcing", darcy.forcing);
    kv.set("darcy.tolerance", darcy.tolerance);
    kv.set("scale_note", std::string("paper: 800/100/100 samples on 85x85, super-resolution 141x141; "
                                     "desk: counts and resolutions above"));
  }
  return kv;
}

GridSpec dataset_grid(DatasetKind kind, std::size_t resolution) {
  return kind == DatasetKind::burgers ? GridSpec::line(resolution, true) : GridSpec::square(resolution, false);
}

std::pair<Tensor, Tensor> generate_sample(const GenerationConfig& config, Split split, std::size_t index,
                                          std::size_t resolution) {
  SeededRng rng = SeededRng(config.seed, static_cast<std::uint64_t>(split)).derive(index);
  if (config.kind == DatasetKind::burgers) {
    const GridSpec solver = GridSpec::line(config.burgers.solver_resolution, true);
    const Tensor u0 = sample_grf(config.grf, solver, rng);
    const Tensor u1 = solve_burgers(u0, config.burgers);
    return {subsample_periodic(u0, resolution), subsample_periodic(u1, resolution)};
  }
  const GrfSample latent = draw_grf(config.grf, 2, rng);
  const Tensor a = threshold_permeability(evaluate_grf(latent, GridSpec::square(resolution, false)), config.darcy);
  return {a, solve_darcy_fd(a, config.darcy)};
}

Dataset generate_split(const GenerationConfig& config, Split split, std::size_t count, std::size_t resolution,
                       std::size_t workers) {
  config.validate();
  Dataset d;
  d.kind = config.kind;
  d.grid = dataset_grid(config.kind, resolution);
  d.inputs = Tensor(sample_shape(count, d.grid));
  d.outputs = Tensor(sample_shape(count, d.grid));
  const std::size_t p = d.grid.points();
  parallel_for(count, workers, [&](std::size_t i) {
    auto [u, y] = generate_sample(config, split, i, resolution);
    std::copy_n(u.raw(), p, d.inputs.raw() + i * p);
    std::copy_n(y.raw(), p, d.outputs.raw() + i * p);
  });
  return d;
}

void make_dataset(const GenerationConfig& config, const std::string& dir, std::size_t workers) {
  config.validate();
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  require(!ec, ErrorCode::io, "cannot create directory '" + dir + "': " + ec.message());
  const std::filesystem::path root(dir);
  KeyValues manifest = config.describe();
  for (Split s : {Split::train, Split::calibration, Split::test}) {
    const std::size_t count = s == Split::train ? config.train : s == Split::calibration ? config.calibration : config.test;
    const std::string file = std::string(split_name(s)) + ".opd";
    save_dataset((root / file).string(), generate_split(config, s, count, config.resolution, workers));
    manifest.set(std::string("file.") + split_name(s), file);
    manifest.set(std::string("stream.") + split_name(s), static_cast<std::uint64_t>(s));
  }
  if (config.hi_resolution > 0) {
    save_dataset((root / "test_hi.opd").string(),
                 generate_split(config, Split::test, config.test, config.hi_resolution, workers));
    manifest.set("file.test_hi", std::string("test_hi.opd"));
  }
  manifest.save((root / "manifest.txt").string());
}

}  // namespace opcert::datagen
