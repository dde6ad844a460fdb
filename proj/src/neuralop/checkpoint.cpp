#include "opcert/neuralop/checkpoint.hpp"

#include "opcert/core/error.hpp"

namespace opcert::neuralop {
namespace {

constexpr const char* kMagic = "OPCERT01";
constexpr std::uint32_t kVersion = 1;
constexpr std::uint32_t kWnoBlock = 1;

}  // namespace

void write_config(BinaryWriter& w, const WnoConfig& c) {
  w.u32(kWnoBlock);
  w.u32(static_cast<std::uint32_t>(c.width));
  w.u32(static_cast<std::uint32_t>(c.layers));
  w.u32(static_cast<std::uint32_t>(c.levels));
  w.u32(static_cast<std::uint32_t>(c.family));
  w.u32(static_cast<std::uint32_t>(c.activation));
  w.u32(static_cast<std::uint32_t>(c.in_channels()));
  w.u32(static_cast<std::uint32_t>(c.proj_hidden));
  write_grid(w, c.grid);
  w.u32(static_cast<std::uint32_t>(c.vsn.steps));
  w.f64(c.vsn.slope);
  w.f64(c.vsn.leak_init);
  w.f64(c.vsn.threshold_init);
  w.u32(static_cast<std::uint32_t>(c.vsn.mode));
  w.u8(c.normalize ? 1 : 0);
}

WnoConfig read_config(BinaryReader& r) {
  require(r.u32() == kWnoBlock, ErrorCode::io, "'" + r.path() + "' does not hold a WNO model block");
  WnoConfig c;
  c.width = r.u32();
  c.layers = r.u32();
  c.levels = r.u32();
  const std::uint32_t family = r.u32();
  const std::uint32_t activation = r.u32();
  require(family <= 1 && activation <= 2, ErrorCode::io, "corrupt config block in '" + r.path() + "'");
  c.family = static_cast<wavelet::Family>(family);
  c.activation = static_cast<Activation>(activation);
  const std::uint32_t in_channels = r.u32();
  c.proj_hidden = r.u32();
  c.grid = read_grid(r);
  require(in_channels == c.in_channels(), ErrorCode::io, "inconsistent input channels in '" + r.path() + "'");
  c.vsn.steps = r.u32();
  c.vsn.slope = r.f64();
  c.vsn.leak_init = r.f64();
  c.vsn.threshold_init = r.f64();
  const std::uint32_t mode = r.u32();
  require(mode <= 1, ErrorCode::io, "corrupt spike mode in '" + r.path() + "'");
  c.vsn.mode = static_cast<ad::SpikeMode>(mode);
  c.normalize = r.u8() != 0;
  c.validate();
  return c;
}

void save_model(const std::string& path, const WnoModel& model) {
  BinaryWriter w(path);
  w.magic(kMagic);
  w.u32(kVersion);
  write_config(w, model.config());
  const Normalization& n = model.normalization();
  w.record("normalization", Tensor({4}, {n.in_mean, n.in_std, n.out_mean, n.out_std}));
  w.u32(static_cast<std::uint32_t>(model.parameters().size()));
  for (const auto& p : model.parameters()) w.record(p.name, p.value);
  w.close();
}

WnoModel load_model(const std::string& path) {
  BinaryReader r(path);
  r.expect_magic(kMagic);
  const std::uint32_t version = r.u32();
  require(version == kVersion, ErrorCode::io, "unsupported checkpoint version " + std::to_string(version));
  WnoModel model(read_config(r));
  const Tensor n = r.record("normalization");
  require(n.size() == 4, ErrorCode::io, "corrupt normalization record in '" + path + "'");
  model.normalization() = {n[0], n[1], n[2], n[3]};
  const std::uint32_t count = r.u32();
  require(count == model.parameters().size(), ErrorCode::io, "parameter count mismatch in '" + path + "'");
  for (auto& p : model.parameters()) {
    Tensor value = r.record(p.name);
    require(value.shape() == p.value.shape(), ErrorCode::io,
            "'" + path + "': parameter '" + p.name + "' has shape " + shape_string(value.shape()));
    p.value = std::move(value);
  }
  require(r.at_end(), ErrorCode::io, "trailing bytes in '" + path + "'");
  return model;
}

}  // namespace opcert::neuralop
