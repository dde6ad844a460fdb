#include "opcert/ensemble/quantile.hpp"

#include <filesystem>
#include <optional>

#include "opcert/core/error.hpp"
#include "opcert/core/keyvalue.hpp"
#include "opcert/core/parallel.hpp"
#include "opcert/neuralop/checkpoint.hpp"

namespace opcert::ensemble {

namespace fs = std::filesystem;

QuantilePair train_quantile_pair(const Tensor& inputs, const Tensor& targets, const QuantileConfig& config,
                                 const MemberEpochCallback& on_epoch) {
  require(config.alpha > 0.0 && config.alpha < 1.0, ErrorCode::invalid_argument, "alpha must lie in (0,1)");
  const double eta[2] = {config.alpha / 2.0, 1.0 - config.alpha / 2.0};
  std::optional<neuralop::WnoModel> models[2];
  parallel_for(2, std::max<std::size_t>(1, config.workers), [&](std::size_t k) {
    const std::uint64_t seed = member_seed(config.seed, k);
    neuralop::WnoModel model(config.model, SeededRng(seed, 1));
    if (config.model.normalize) model.normalization() = neuralop::fit_normalization(inputs, targets);
    neuralop::LossConfig loss;
    loss.kind = neuralop::LossKind::pinball;
    loss.eta = eta[k];
    neuralop::TrainConfig tc = config.train;
    tc.seed = seed;
    neuralop::EpochCallback cb;
    if (on_epoch) cb = [&](std::size_t epoch, double l) { on_epoch(k, epoch, l); };
    try {
      neuralop::train(model, inputs, targets, loss, tc, nullptr, cb);
    } catch (const Error& e) {
      throw Error(e.code(), std::string(k == 0 ? "lo" : "hi") + " quantile model: " + e.what());
    }
    models[k].emplace(std::move(model));
  });
  return QuantilePair{std::move(*models[0]), std::move(*models[1]), config.alpha};
}

void save_quantile_pair(const std::string& dir, const QuantilePair& pair) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  require(!ec, ErrorCode::io, "cannot create " + dir + ": " + ec.message());
  neuralop::save_model((fs::path(dir) / "lo.opm").string(), pair.lo);
  neuralop::save_model((fs::path(dir) / "hi.opm").string(), pair.hi);
  KeyValues m;
  m.set("kind", std::string("quantile"));
  m.set("alpha", pair.alpha);
  m.set("eta_lo", pair.alpha / 2.0);
  m.set("eta_hi", 1.0 - pair.alpha / 2.0);
  m.save((fs::path(dir) / "manifest.txt").string());
}

QuantilePair load_quantile_pair(const std::string& dir) {
  const KeyValues m = KeyValues::load((fs::path(dir) / "manifest.txt").string());
  require(m.get("kind") == "quantile", ErrorCode::io, dir + " does not hold a quantile pair");
  return QuantilePair{neuralop::load_model((fs::path(dir) / "lo.opm").string()),
                      neuralop::load_model((fs::path(dir) / "hi.opm").string()), m.get_double("alpha")};
}

}  // namespace opcert::ensemble
