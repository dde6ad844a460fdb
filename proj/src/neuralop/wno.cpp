#include "opcert/neuralop/wno.hpp"

#include <algorithm>
#include <cmath>

#include "opcert/core/error.hpp"

namespace opcert::neuralop {
namespace {

constexpr std::size_t kPredictChunk = 16;

std::string layer_name(std::size_t i, const char* part) { return "layer" + std::to_string(i) + "." + part; }

Shape padded_shape(const GridSpec& grid, std::size_t levels) {
  Shape s = grid.shape();
  for (auto& n : s) n = wavelet::padded_extent(n, levels);
  return s;
}

}  // namespace

Activation parse_activation(const std::string& name) {
  if (name == "gelu") return Activation::gelu;
  if (name == "vsn") return Activation::vsn;
  if (name == "identity") return Activation::identity;
  fail(ErrorCode::config, "unknown activation '" + name + "' (expected gelu, vsn or identity)");
}

std::string activation_name(Activation a) {
  switch (a) {
    case Activation::gelu: return "gelu";
    case Activation::vsn: return "vsn";
    case Activation::identity: return "identity";
  }
  return "unknown";
}

std::size_t WnoConfig::default_levels(std::size_t n) {
  std::size_t log2n = 0;
  while ((std::size_t{1} << (log2n + 1)) <= n) ++log2n;
  return log2n > 4 ? log2n - 4 : 1;
}

void WnoConfig::validate() const {
  grid.validate();
  require(width >= 1, ErrorCode::config, "width must be >= 1");
  require(layers >= 1, ErrorCode::config, "layers must be >= 1");
  require(levels >= 1, ErrorCode::config, "levels must be >= 1");
  require(proj_hidden >= 1, ErrorCode::config, "proj_hidden must be >= 1");
  require(vsn.steps >= 1, ErrorCode::config, "vsn steps must be >= 1");
  require(vsn.slope > 0.0, ErrorCode::config, "vsn slope must be positive");
  for (std::size_t n : grid.resolution) {
    require((wavelet::padded_extent(n, levels) >> levels) >= 1, ErrorCode::decomposition_depth,
            "grid resolution " + std::to_string(n) + " cannot support " + std::to_string(levels) + " levels");
  }
}

namespace {

Tensor affine_map(Tensor t, double shift, double factor) {
  for (auto& v : t.data()) v = (v + shift) * factor;
  return t;
}

}  // namespace

Tensor Normalization::encode_input(const Tensor& u) const { return affine_map(u, -in_mean, 1.0 / in_std); }
Tensor Normalization::encode_output(const Tensor& y) const { return affine_map(y, -out_mean, 1.0 / out_std); }
Tensor Normalization::decode_output(const Tensor& y) const {
  Tensor out = y;
  for (auto& v : out.data()) v = v * out_std + out_mean;
  return out;
}

namespace {

std::pair<double, double> moments(const Tensor& t) {
  const double n = static_cast<double>(t.size());
  const double mean = opcert::sum(t) / n;
  double var = 0.0;
  for (double v : t.data()) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / n);
  return {mean, sd > 0.0 ? sd : 1.0};
}

}  // namespace

Normalization fit_normalization(const Tensor& inputs, const Tensor& outputs) {
  Normalization n;
  std::tie(n.in_mean, n.in_std) = moments(inputs);
  std::tie(n.out_mean, n.out_std) = moments(outputs);
  return n;
}

WnoModel::WnoModel(WnoConfig config) : config_(std::move(config)) {
  config_.validate();
  const std::size_t W = config_.width, H = config_.proj_hidden;
  const std::size_t A = shape_size(ad::approximation_extent(padded_shape(config_.grid, config_.levels), config_.levels));
  add_parameter("uplift.weight", {W, config_.in_channels()});
  add_parameter("uplift.bias", {W});
  for (std::size_t i = 0; i < config_.layers; ++i) {
    add_parameter(layer_name(i, "spectral"), {W, W, A});
    add_parameter(layer_name(i, "weight"), {W, W});
    add_parameter(layer_name(i, "bias"), {W});
    if (config_.activation == Activation::vsn) {
      add_parameter(layer_name(i, "leak"), {W});
      add_parameter(layer_name(i, "threshold"), {W});
    }
  }
  add_parameter("proj1.weight", {H, W});
  add_parameter("proj1.bias", {H});
  add_parameter("proj2.weight", {1, H});
  add_parameter("proj2.bias", {1});
}

WnoModel::WnoModel(WnoConfig config, SeededRng rng) : WnoModel(std::move(config)) {
  // Fan-in uniform init for dense maps; spectral weights follow the usual
  // WNO scaling 1/(in*out) times U[0,1).
  auto fill_uniform = [&rng](Tensor& t, double bound) {
    for (auto& v : t.data()) v = rng.uniform(-bound, bound);
  };
  for (auto& p : params_) {
    const std::string& n = p.name;
    if (n.ends_with(".spectral")) {
      const double s = 1.0 / static_cast<double>(p.value.dim(0) * p.value.dim(1));
      for (auto& v : p.value.data()) v = s * rng.uniform();
    } else if (n.ends_with(".leak")) {
      p.value.fill(config_.vsn.leak_init);
    } else if (n.ends_with(".threshold")) {
      p.value.fill(config_.vsn.threshold_init);
    } else {
      const std::string stem = n.substr(0, n.rfind('.'));
      const Tensor& w = parameter(stem + ".weight").value;
      fill_uniform(p.value, 1.0 / std::sqrt(static_cast<double>(w.dim(1))));
    }
  }
}

void WnoModel::add_parameter(std::string name, Shape shape) { params_.emplace_back(std::move(name), Tensor(std::move(shape))); }

std::vector<ad::Parameter*> WnoModel::parameter_pointers() {
  std::vector<ad::Parameter*> out;
  for (auto& p : params_) out.push_back(&p);
  return out;
}

ad::Parameter& WnoModel::parameter(const std::string& name) {
  for (auto& p : params_)
    if (p.name == name) return p;
  fail(ErrorCode::invalid_argument, "no parameter named '" + name + "'");
}

const ad::Parameter& WnoModel::parameter(const std::string& name) const {
  return const_cast<WnoModel*>(this)->parameter(name);
}

std::size_t WnoModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

std::size_t WnoModel::levels_for(const GridSpec& grid) const {
  grid.validate();
  const GridSpec& base = config_.grid;
  require(grid.dims() == base.dims() && grid.periodic == base.periodic, ErrorCode::grid_mismatch,
          "grid " + grid.describe() + " is incompatible with trained grid " + base.describe());
  if (grid.resolution == base.resolution) return config_.levels;
  const Shape target = ad::approximation_extent(padded_shape(base, config_.levels), config_.levels);
  for (std::size_t m = 1; m < 24; ++m) {
    if (ad::approximation_extent(padded_shape(grid, m), m) == target) return m;
  }
  fail(ErrorCode::grid_mismatch, "grid " + grid.describe() + " cannot reproduce the approximation block " +
                                     shape_string(target) + " of trained grid " + base.describe());
}

void WnoModel::check_inputs(const Tensor& inputs, const GridSpec& grid) const {
  const Shape spatial = grid.shape();
  const Shape& s = inputs.shape();
  const bool ok = s.size() == spatial.size() + 1 && std::equal(spatial.begin(), spatial.end(), s.begin() + 1);
  require(ok, ErrorCode::grid_mismatch,
          "input shape " + shape_string(s) + " does not match [batch] x grid " + grid.describe());
}

WnoModel::Graph WnoModel::build_impl(ad::Tape& tape, const Tensor& inputs, const GridSpec& grid,
                                     const std::function<ad::Var(std::size_t)>& param) const {
  check_inputs(inputs, grid);
  const std::size_t levels = levels_for(grid);
  const std::size_t B = inputs.dim(0);
  const std::size_t P = grid.points();
  const std::size_t dims = grid.dims();
  const Shape spatial = grid.shape();

  Shape feature_shape{config_.in_channels(), B};
  feature_shape.insert(feature_shape.end(), spatial.begin(), spatial.end());
  Tensor features(feature_shape);
  const Tensor u = norm_.encode_input(inputs);
  std::copy_n(u.raw(), u.size(), features.raw());
  const Tensor coords = normalized_coordinates(grid);
  for (std::size_t d = 0; d < dims; ++d) {
    double* dst = features.raw() + (d + 1) * B * P;
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t p = 0; p < P; ++p) dst[b * P + p] = coords[p * dims + d];
  }

  std::size_t k = 0;
  auto next = [&]() { return param(k++); };
  const ad::WaveletSpec spec{config_.family, levels, dims};

  Graph g;
  ad::Var uw = next(), ub = next();
  ad::Var v = ad::affine(tape.constant(std::move(features)), uw, ub);
  for (std::size_t i = 0; i < config_.layers; ++i) {
    ad::Var r = next(), w = next(), b = next();
    ad::Var kernel = ad::idwt(ad::wavelet_scale(ad::dwt(v, spec), r, spec), spec, spatial);
    ad::Var h = ad::add(ad::affine(v, w, b), kernel);
    switch (config_.activation) {
      case Activation::gelu:
        v = ad::gelu(h);
        break;
      case Activation::identity:
        v = h;
        break;
      case Activation::vsn: {
        ad::Var leak = next(), th = next();
        const ad::VsnOptions opt{config_.vsn.steps, config_.vsn.slope, config_.vsn.mode};
        ad::VsnResult res = ad::vsn(h, leak, th, opt);
        v = res.output;
        g.spikes.push_back(res.spikes);
        break;
      }
    }
  }
  ad::Var p1w = next(), p1b = next(), p2w = next(), p2b = next();
  ad::Var hidden = ad::affine(v, p1w, p1b);
  if (config_.activation != Activation::identity) hidden = ad::gelu(hidden);
  ad::Var out = ad::affine(hidden, p2w, p2b);
  Shape out_shape{B};
  out_shape.insert(out_shape.end(), spatial.begin(), spatial.end());
  g.output = ad::reshape(out, std::move(out_shape));
  return g;
}

WnoModel::Graph WnoModel::build(ad::Tape& tape, const Tensor& inputs, const GridSpec& grid) {
  return build_impl(tape, inputs, grid, [&](std::size_t i) { return tape.parameter(params_.at(i)); });
}

WnoModel::Graph WnoModel::build_constant(ad::Tape& tape, const Tensor& inputs, const GridSpec& grid) const {
  return build_impl(tape, inputs, grid, [&](std::size_t i) { return tape.constant(params_.at(i).value); });
}

namespace {

Tensor slice_batch(const Tensor& x, std::size_t begin, std::size_t count) {
  Shape s = x.shape();
  const std::size_t stride = x.size() / s[0];
  s[0] = count;
  Tensor out(s);
  std::copy_n(x.raw() + begin * stride, count * stride, out.raw());
  return out;
}

}  // namespace

Tensor WnoModel::predict_normalized(const Tensor& inputs, const GridSpec& grid) const {
  check_inputs(inputs, grid);
  Tensor out(inputs.shape());
  const std::size_t n = inputs.dim(0);
  const std::size_t stride = inputs.size() / n;
  for (std::size_t begin = 0; begin < n; begin += kPredictChunk) {
    const std::size_t count = std::min(kPredictChunk, n - begin);
    ad::Tape tape;
    const Graph g = build_constant(tape, slice_batch(inputs, begin, count), grid);
    std::copy_n(g.output.value().raw(), count * stride, out.raw() + begin * stride);
  }
  return out;
}

Tensor WnoModel::predict(const Tensor& inputs, const GridSpec& grid) const {
  return norm_.decode_output(predict_normalized(inputs, grid));
}

std::vector<double> spiking_activity(const WnoModel& model, const Tensor& inputs, const GridSpec& grid) {
  require(model.vsn_sites() > 0, ErrorCode::not_spiking, "model does not use spiking activations");
  const std::size_t sites = model.vsn_sites();
  std::vector<double> spikes(sites, 0.0), possible(sites, 0.0);
  const std::size_t n = inputs.dim(0);
  for (std::size_t begin = 0; begin < n; begin += kPredictChunk) {
    const std::size_t count = std::min(kPredictChunk, n - begin);
    ad::Tape tape;
    const auto g = model.build_constant(tape, slice_batch(inputs, begin, count), grid);
    for (std::size_t s = 0; s < sites; ++s) {
      const Tensor& rate = g.spikes[s].value();
      spikes[s] += opcert::sum(rate);
      possible[s] += static_cast<double>(rate.size());
    }
  }
  std::vector<double> percent(sites);
  for (std::size_t s = 0; s < sites; ++s) percent[s] = 100.0 * spikes[s] / possible[s];
  return percent;
}

}  // namespace opcert::neuralop
