#include "opcert/ensemble/rp.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>

#include "opcert/core/error.hpp"
#include "opcert/core/keyvalue.hpp"
#include "opcert/core/parallel.hpp"
#include "opcert/neuralop/checkpoint.hpp"

namespace opcert::ensemble {

namespace fs = std::filesystem;
using neuralop::WnoModel;

void RpConfig::validate() const {
  model.validate();
  loss.validate();
  require(members >= 1, ErrorCode::invalid_argument, "ensemble needs at least one member");
  require(prior_layers >= 1, ErrorCode::invalid_argument, "prior needs at least one layer");
  require(prior_weight >= 0.0 && std::isfinite(prior_weight), ErrorCode::invalid_argument,
          "prior weight must be finite and >= 0");
}

neuralop::WnoConfig RpConfig::prior_config() const {
  neuralop::WnoConfig c = model;
  c.layers = prior_layers;
  if (c.activation != neuralop::Activation::identity) c.activation = neuralop::Activation::gelu;
  return c;
}

Tensor RpMember::predict(const Tensor& inputs, const GridSpec& grid) const {
  Tensor out = trainable.predict_normalized(inputs, grid);
  if (prior_weight != 0.0) out += prior.predict_normalized(inputs, grid) * prior_weight;
  return trainable.normalization().decode_output(out);
}

std::uint64_t member_seed(std::uint64_t ensemble_seed, std::size_t index) {
  return SeededRng(ensemble_seed, 0x6d656d626572).derive(index).next_u64();
}

std::uint64_t parameter_hash(const WnoModel& model) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& p : model.parameters()) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(p.value.raw());
    for (std::size_t i = 0; i < p.value.size() * sizeof(double); ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

RpMember train_member(const Tensor& inputs, const Tensor& targets, const RpConfig& config, std::size_t index,
                      const MemberEpochCallback& on_epoch) {
  config.validate();
  require(inputs.rank() >= 2 && inputs.dim(0) >= 1, ErrorCode::invalid_argument, "training set is empty");
  const std::uint64_t seed = member_seed(config.seed, index);
  RpMember m{WnoModel(config.model, SeededRng(seed, 1)), WnoModel(config.prior_config(), SeededRng(seed, 2)),
             config.prior_weight, seed, {}};
  if (config.model.normalize) {
    m.trainable.normalization() = neuralop::fit_normalization(inputs, targets);
    m.prior.normalization() = m.trainable.normalization();
  }
  Tensor offset;
  if (config.prior_weight != 0.0) offset = m.prior.predict_normalized(inputs, config.model.grid) * config.prior_weight;

  neuralop::TrainConfig tc = config.train;
  tc.seed = seed;
  neuralop::EpochCallback cb;
  if (on_epoch) cb = [&](std::size_t epoch, double loss) { on_epoch(index, epoch, loss); };
  try {
    m.loss_trace =
        neuralop::train(m.trainable, inputs, targets, config.loss, tc, offset.empty() ? nullptr : &offset, cb)
            .loss_trace;
  } catch (const Error& e) {
    throw Error(e.code(), "member " + std::to_string(index) + ": " + e.what());
  }
  return m;
}

RpEnsemble rp_train(const Tensor& inputs, const Tensor& targets, const RpConfig& config,
                    const MemberEpochCallback& on_epoch) {
  config.validate();
  std::vector<std::uint64_t> seeds(config.members);
  for (std::size_t k = 0; k < config.members; ++k) seeds[k] = member_seed(config.seed, k);
  std::sort(seeds.begin(), seeds.end());
  require(std::adjacent_find(seeds.begin(), seeds.end()) == seeds.end(), ErrorCode::invalid_argument,
          "member seeds collide");

  std::vector<std::optional<RpMember>> slots(config.members);
  parallel_for(config.members, std::max<std::size_t>(1, config.workers),
               [&](std::size_t k) { slots[k].emplace(train_member(inputs, targets, config, k, on_epoch)); });
  RpEnsemble e;
  for (auto& s : slots) e.members.push_back(std::move(*s));
  return e;
}

Prediction member_moments(std::span<const Tensor> outputs) {
  require(!outputs.empty(), ErrorCode::invalid_argument, "no member outputs");
  for (const auto& o : outputs) check_same_shape(o, outputs[0], "member_moments");
  const std::size_t n = outputs.size();
  Prediction p{Tensor(outputs[0].shape()), Tensor(outputs[0].shape())};
  for (std::size_t i = 0; i < p.mean.size(); ++i) {
    double lo = outputs[0][i], hi = lo, total = 0.0;
    for (const auto& o : outputs) {
      lo = std::min(lo, o[i]);
      hi = std::max(hi, o[i]);
      total += o[i];
    }
    if (lo == hi) {
      p.mean[i] = lo;
      p.spread[i] = 0.0;
      continue;
    }
    const double mean = total / static_cast<double>(n);
    double var = 0.0;
    for (const auto& o : outputs) var += (o[i] - mean) * (o[i] - mean);
    p.mean[i] = mean;
    p.spread[i] = std::sqrt(var / static_cast<double>(n));
  }
  return p;
}

Prediction rp_predict(const RpEnsemble& ensemble, const Tensor& inputs, const GridSpec& grid) {
  require(ensemble.size() >= 1, ErrorCode::invalid_argument, "empty ensemble");
  std::vector<Tensor> outputs;
  outputs.reserve(ensemble.size());
  for (const auto& m : ensemble.members) outputs.push_back(m.predict(inputs, grid));
  return member_moments(outputs);
}

Prediction rp_predict(const RpEnsemble& ensemble, const Tensor& inputs) {
  require(ensemble.size() >= 1, ErrorCode::invalid_argument, "empty ensemble");
  return rp_predict(ensemble, inputs, ensemble.members[0].trainable.config().grid);
}

Band initial_band(const Tensor& mean, const Tensor& spread, double z) {
  check_same_shape(mean, spread, "initial_band");
  require(z >= 0.0, ErrorCode::invalid_argument, "z must be >= 0");
  Band b{mean, mean};
  for (std::size_t i = 0; i < mean.size(); ++i) {
    require(spread[i] >= 0.0, ErrorCode::invalid_argument, "negative spread at index " + std::to_string(i));
    b.lower[i] = mean[i] - z * spread[i];
    b.upper[i] = mean[i] + z * spread[i];
  }
  return b;
}

RpEnsemble select_best(const RpEnsemble& ensemble, const Tensor& inputs, const Tensor& targets, std::size_t keep) {
  require(keep >= 1 && keep <= ensemble.size(), ErrorCode::invalid_argument, "invalid number of members to keep");
  std::vector<double> loss(ensemble.size());
  for (std::size_t k = 0; k < ensemble.size(); ++k)
    loss[k] = neuralop::l2_value(ensemble.members[k].predict(inputs), targets);
  std::vector<std::size_t> order(ensemble.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return loss[a] < loss[b]; });
  RpEnsemble out;
  for (std::size_t i = 0; i < keep; ++i) out.members.push_back(ensemble.members[order[i]]);
  return out;
}

void save_ensemble(const std::string& dir, const RpEnsemble& ensemble) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  require(!ec, ErrorCode::io, "cannot create " + dir + ": " + ec.message());
  KeyValues m;
  m.set("kind", std::string("rp"));
  m.set("members", static_cast<std::uint64_t>(ensemble.size()));
  for (std::size_t k = 0; k < ensemble.size(); ++k) {
    const RpMember& mem = ensemble.members[k];
    const std::string id = std::to_string(k);
    m.set("seed_" + id, mem.seed);
    m.set("prior_weight_" + id, mem.prior_weight);
    neuralop::save_model((fs::path(dir) / ("member_" + id + ".opm")).string(), mem.trainable);
    neuralop::save_model((fs::path(dir) / ("prior_" + id + ".opm")).string(), mem.prior);
    std::ofstream csv(fs::path(dir) / ("loss_" + id + ".csv"));
    require(bool(csv), ErrorCode::io, "cannot write loss trace in " + dir);
    csv << "epoch,loss\n";
    for (std::size_t e = 0; e < mem.loss_trace.size(); ++e) csv << e << ',' << format_double(mem.loss_trace[e]) << '\n';
  }
  m.save((fs::path(dir) / "manifest.txt").string());
}

RpEnsemble load_ensemble(const std::string& dir) {
  const KeyValues m = KeyValues::load((fs::path(dir) / "manifest.txt").string());
  require(m.get("kind") == "rp", ErrorCode::io, dir + " does not hold a randomized-prior ensemble");
  RpEnsemble e;
  const std::size_t n = m.get_uint("members");
  for (std::size_t k = 0; k < n; ++k) {
    const std::string id = std::to_string(k);
    e.members.push_back(RpMember{neuralop::load_model((fs::path(dir) / ("member_" + id + ".opm")).string()),
                                 neuralop::load_model((fs::path(dir) / ("prior_" + id + ".opm")).string()),
                                 m.get_double("prior_weight_" + id), m.get_uint("seed_" + id), {}});
  }
  require(!e.members.empty(), ErrorCode::io, "ensemble in " + dir + " has no members");
  return e;
}

}  // namespace opcert::ensemble
