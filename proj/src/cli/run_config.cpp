#include "opcert/cli/run_config.hpp"

#include <cmath>
#include <set>

#include "opcert/core/error.hpp"
#include "opcert/core/parallel.hpp"

namespace opcert::cli {

ModelKind parse_model_kind(const std::string& name) {
  if (name == "rp-wno") return ModelKind::rp_wno;
  if (name == "rp-vswno") return ModelKind::rp_vswno;
  if (name == "q-wno") return ModelKind::q_wno;
  fail(ErrorCode::config, "unknown model '" + name + "' (expected rp-wno, rp-vswno or q-wno)");
}

std::string model_kind_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::rp_wno: return "rp-wno";
    case ModelKind::rp_vswno: return "rp-vswno";
    case ModelKind::q_wno: return "q-wno";
  }
  return "unknown";
}

std::string model_label(ModelKind kind) {
  switch (kind) {
    case ModelKind::rp_wno: return "RP-WNO";
    case ModelKind::rp_vswno: return "RP-VSWNO";
    case ModelKind::q_wno: return "Q-WNO";
  }
  return "unknown";
}

std::string calibrated_label(ModelKind kind) {
  switch (kind) {
    case ModelKind::rp_wno: return "CRP-WNO";
    case ModelKind::rp_vswno: return "CRP-VSWNO";
    case ModelKind::q_wno: return "CQ-WNO";
  }
  return "unknown";
}

void RunConfig::set_seed(std::uint64_t s) {
  seed = s;
  data.seed = s;
}

namespace {

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "experiment", "seed", "train", "calibration", "test", "resolution", "hi_resolution",
      "grf.shift", "grf.scale", "grf.power", "grf.modes", "grf.boundary",
      "burgers.viscosity", "burgers.dt", "burgers.t_final", "burgers.solver_resolution",
      "darcy.low", "darcy.high", "darcy.forcing", "darcy.tolerance", "scale_note",
      "model", "members", "prior_weight", "prior_layers",
      "width", "layers", "levels", "wavelet", "proj_hidden", "normalize",
      "vsn.steps", "vsn.slope", "vsn.leak", "vsn.threshold",
      "epochs", "batch", "lr", "lr_step", "lr_gamma", "loss", "slf.alpha", "slf.beta",
      "alpha", "z_initial", "jitter",
      "gp.variance", "gp.length", "gp.shape", "gp.restarts", "gp.max_iters", "gp.tolerance", "gp.max_points",
      "gp.jitter", "threads"};
  return keys;
}

}  // namespace

RunConfig RunConfig::from_keyvalues(const KeyValues& kv) {
  kv.reject_unknown(known_keys());
  RunConfig c;
  if (kv.has("experiment")) {
    const datagen::DatasetKind k = datagen::parse_kind(kv.get("experiment"));
    c.data = k == datagen::DatasetKind::darcy ? datagen::GenerationConfig::darcy_desk()
                                              : datagen::GenerationConfig::burgers_desk();
  }
  auto& d = c.data;
  auto uint_or = [&](const char* key, std::size_t& dst) {
    if (kv.has(key)) dst = kv.get_uint(key);
  };
  auto dbl_or = [&](const char* key, double& dst) {
    if (kv.has(key)) dst = kv.get_double(key);
  };
  if (kv.has("seed")) c.seed = kv.get_uint("seed");
  d.seed = c.seed;
  uint_or("train", d.train);
  uint_or("calibration", d.calibration);
  uint_or("test", d.test);
  uint_or("resolution", d.resolution);
  uint_or("hi_resolution", d.hi_resolution);
  dbl_or("grf.shift", d.grf.shift);
  dbl_or("grf.scale", d.grf.scale);
  dbl_or("grf.power", d.grf.power);
  uint_or("grf.modes", d.grf.modes);
  if (kv.has("grf.boundary")) {
    const std::string& b = kv.get("grf.boundary");
    require(b == "periodic" || b == "neumann", ErrorCode::config, "grf.boundary must be periodic or neumann");
    d.grf.boundary = b == "periodic" ? datagen::GrfBoundary::periodic : datagen::GrfBoundary::neumann;
  }
  dbl_or("burgers.viscosity", d.burgers.viscosity);
  dbl_or("burgers.dt", d.burgers.dt);
  dbl_or("burgers.t_final", d.burgers.t_final);
  uint_or("burgers.solver_resolution", d.burgers.solver_resolution);
  dbl_or("darcy.low", d.darcy.low);
  dbl_or("darcy.high", d.darcy.high);
  dbl_or("darcy.forcing", d.darcy.forcing);
  dbl_or("darcy.tolerance", d.darcy.tolerance);

  if (kv.has("model")) c.model = parse_model_kind(kv.get("model"));
  uint_or("members", c.members);
  dbl_or("prior_weight", c.prior_weight);
  uint_or("prior_layers", c.prior_layers);
  uint_or("width", c.width);
  uint_or("layers", c.layers);
  uint_or("levels", c.levels);
  if (kv.has("wavelet")) c.family = wavelet::parse_family(kv.get("wavelet"));
  uint_or("proj_hidden", c.proj_hidden);
  if (kv.has("normalize")) c.normalize = kv.get_bool("normalize");
  uint_or("vsn.steps", c.vsn.steps);
  dbl_or("vsn.slope", c.vsn.slope);
  dbl_or("vsn.leak", c.vsn.leak_init);
  dbl_or("vsn.threshold", c.vsn.threshold_init);
  uint_or("epochs", c.train.epochs);
  uint_or("batch", c.train.batch);
  dbl_or("lr", c.train.lr);
  uint_or("lr_step", c.train.lr_step);
  dbl_or("lr_gamma", c.train.lr_gamma);
  if (kv.has("loss")) {
    c.loss = neuralop::parse_loss_kind(kv.get("loss"));
    require(c.loss != neuralop::LossKind::pinball, ErrorCode::config,
            "loss = pinball is implied by model = q-wno; use l2 or slf");
  }
  dbl_or("slf.alpha", c.slf_alpha);
  dbl_or("slf.beta", c.slf_beta);
  dbl_or("alpha", c.alpha);
  dbl_or("z_initial", c.z_initial);
  dbl_or("jitter", c.jitter);
  dbl_or("gp.variance", c.gp.init.variance);
  dbl_or("gp.length", c.gp.init.length);
  dbl_or("gp.shape", c.gp.init.shape);
  uint_or("gp.restarts", c.gp.restarts);
  uint_or("gp.max_iters", c.gp.max_iters);
  dbl_or("gp.tolerance", c.gp.tolerance);
  uint_or("gp.max_points", c.gp.max_points);
  dbl_or("gp.jitter", c.gp.jitter);
  uint_or("threads", c.threads);
  c.validate();
  return c;
}

RunConfig RunConfig::load(const std::string& path) { return from_keyvalues(KeyValues::load(path)); }

void RunConfig::validate() const {
  data.validate();
  require(members >= 1, ErrorCode::config, "members must be >= 1");
  require(prior_weight >= 0.0, ErrorCode::config, "prior_weight must be >= 0");
  require(prior_layers >= 1, ErrorCode::config, "prior_layers must be >= 1");
  require(train.batch >= 1, ErrorCode::config, "batch must be >= 1");
  require(train.lr > 0.0, ErrorCode::config, "lr must be positive");
  require(train.lr_gamma > 0.0, ErrorCode::config, "lr_gamma must be positive");
  require(alpha > 0.0 && alpha < 1.0, ErrorCode::config, "alpha must lie in (0, 1)");
  require(z_initial > 0.0, ErrorCode::config, "z_initial must be positive");
  require(jitter >= 0.0, ErrorCode::config, "jitter must be >= 0");
  require(slf_alpha >= 0.0 && slf_beta >= 0.0, ErrorCode::config, "SLF weights must be >= 0");
  require(loss != neuralop::LossKind::slf || model == ModelKind::rp_vswno, ErrorCode::config,
          "loss = slf needs model = rp-vswno");
  require(gp.restarts >= 1, ErrorCode::config, "gp.restarts must be >= 1");
  require(gp.jitter > 0.0 && gp.jitter <= gp.max_jitter, ErrorCode::config, "gp.jitter must lie in (0, 1e-6]");
  try {
    gp.init.validate();
    network(datagen::dataset_grid(data.kind, data.resolution)).validate();
  } catch (const Error& e) {
    fail(ErrorCode::config, e.what());
  }
}

KeyValues RunConfig::describe() const {
  KeyValues kv = data.describe();
  kv.set("model", model_kind_name(model));
  kv.set("members", static_cast<std::uint64_t>(members));
  kv.set("prior_weight", prior_weight);
  kv.set("prior_layers", static_cast<std::uint64_t>(prior_layers));
  kv.set("width", static_cast<std::uint64_t>(width));
  kv.set("layers", static_cast<std::uint64_t>(layers));
  kv.set("levels", static_cast<std::uint64_t>(levels));
  kv.set("wavelet", wavelet::family_name(family));
  kv.set("proj_hidden", static_cast<std::uint64_t>(proj_hidden));
  kv.set_bool("normalize", normalize);
  kv.set("vsn.steps", static_cast<std::uint64_t>(vsn.steps));
  kv.set("vsn.slope", vsn.slope);
  kv.set("vsn.leak", vsn.leak_init);
  kv.set("vsn.threshold", vsn.threshold_init);
  kv.set("epochs", static_cast<std::uint64_t>(train.epochs));
  kv.set("batch", static_cast<std::uint64_t>(train.batch));
  kv.set("lr", train.lr);
  kv.set("lr_step", static_cast<std::uint64_t>(train.lr_step));
  kv.set("lr_gamma", train.lr_gamma);
  kv.set("loss", std::string(loss == neuralop::LossKind::slf ? "slf" : "l2"));
  kv.set("slf.alpha", slf_alpha);
  kv.set("slf.beta", slf_beta);
  kv.set("alpha", alpha);
  kv.set("z_initial", z_initial);
  kv.set("jitter", jitter);
  kv.set("gp.variance", gp.init.variance);
  kv.set("gp.length", gp.init.length);
  kv.set("gp.shape", gp.init.shape);
  kv.set("gp.restarts", static_cast<std::uint64_t>(gp.restarts));
  kv.set("gp.max_iters", static_cast<std::uint64_t>(gp.max_iters));
  kv.set("gp.tolerance", gp.tolerance);
  kv.set("gp.max_points", static_cast<std::uint64_t>(gp.max_points));
  kv.set("gp.jitter", gp.jitter);
  kv.set("threads", static_cast<std::uint64_t>(threads));
  return kv;
}

std::size_t RunConfig::workers() const { return threads > 0 ? threads : default_worker_count(); }

neuralop::WnoConfig RunConfig::network(const GridSpec& grid) const {
  neuralop::WnoConfig w;
  w.width = width;
  w.layers = layers;
  w.levels = levels > 0 ? levels : neuralop::WnoConfig::default_levels(grid.resolution.at(0));
  w.family = family;
  w.activation = model == ModelKind::rp_vswno ? neuralop::Activation::vsn : neuralop::Activation::gelu;
  w.grid = grid;
  w.proj_hidden = proj_hidden;
  w.vsn = vsn;
  w.normalize = normalize;
  return w;
}

ensemble::RpConfig RunConfig::rp(const GridSpec& grid) const {
  ensemble::RpConfig r;
  r.model = network(grid);
  r.prior_layers = prior_layers;
  r.loss.kind = loss;
  r.loss.alpha_w = slf_alpha;
  r.loss.beta_w = slf_beta;
  r.train = train;
  r.members = members;
  r.prior_weight = prior_weight;
  r.seed = seed;
  r.workers = workers();
  return r;
}

ensemble::QuantileConfig RunConfig::quantile(const GridSpec& grid) const {
  ensemble::QuantileConfig q;
  q.model = network(grid);
  q.model.activation = neuralop::Activation::gelu;
  q.train = train;
  q.alpha = alpha;
  q.seed = seed;
  q.workers = workers();
  return q;
}

conformal::ConformalConfig RunConfig::conformal() const {
  conformal::ConformalConfig c;
  c.alpha = alpha;
  c.z = 1.0;
  c.jitter = jitter;
  c.seed = seed;
  c.workers = workers();
  return c;
}

}  // namespace opcert::cli
