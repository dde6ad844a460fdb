#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numbers>

#include "opcert/core/error.hpp"
#include "opcert/ensemble/quantile.hpp"
#include "opcert/ensemble/rp.hpp"

using namespace opcert;
using namespace opcert::ensemble;
using neuralop::WnoModel;

namespace {

RpConfig small_config(std::size_t n, std::size_t members) {
  RpConfig c;
  c.model.width = 8;
  c.model.layers = 2;
  c.model.levels = neuralop::WnoConfig::default_levels(n);
  c.model.grid = GridSpec::line(n, true);
  c.model.proj_hidden = 16;
  c.members = members;
  c.train.epochs = 3;
  c.train.batch = 4;
  c.seed = 17;
  return c;
}

void make_data(std::size_t batch, std::size_t n, std::uint64_t seed, Tensor& u, Tensor& y) {
  SeededRng rng(seed);
  u = Tensor({batch, n});
  y = Tensor({batch, n});
  for (std::size_t b = 0; b < batch; ++b) {
    const double a = rng.normal(), ph = rng.uniform(0, 6.28);
    for (std::size_t i = 0; i < n; ++i) {
      const double x = 2 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n);
      u.at({b, i}) = a * std::sin(x + ph);
      y.at({b, i}) = 0.5 * a * std::sin(x + ph) + 0.1 * std::cos(x);
    }
  }
}

}  // namespace

TEST_CASE("member moments") {
  const Tensor ones({2}, 1.0), threes({2}, 3.0);
  const Tensor pair[] = {ones, threes};
  Prediction p = member_moments(pair);
  CHECK(p.mean[0] == 2.0);
  CHECK(p.spread[1] == 1.0);

  const Tensor same({5}, 0.1);
  const Tensor trio[] = {same, same, same};
  p = member_moments(trio);
  CHECK(p.mean == same);
  CHECK(max_abs(p.spread) == 0.0);

  SeededRng rng(3);
  std::vector<Tensor> outs;
  for (int k = 0; k < 10; ++k) outs.push_back(gaussian_draws(rng, 50));
  p = member_moments(outs);
  for (std::size_t i = 0; i < 50; ++i) {
    double m1 = 0, m2 = 0;
    for (const auto& o : outs) {
      m1 += o[i] / 10;
      m2 += o[i] * o[i] / 10;
    }
    CHECK(std::abs(p.mean[i] - m1) < 1e-12);
    CHECK(std::abs(p.spread[i] - std::sqrt(m2 - m1 * m1)) < 1e-12);
  }

  std::vector<Tensor> shifted = outs;
  for (auto& o : shifted) o += 4.0;
  const Prediction q = member_moments(shifted);
  CHECK(max_abs_diff(q.spread, p.spread) < 1e-12);
  CHECK(max_abs_diff(q.mean, p.mean + Tensor({50}, 4.0)) < 1e-12);
  CHECK_THROWS_AS(member_moments(std::span<const Tensor>{}), Error);
}

TEST_CASE("initial band") {
  const Tensor mu({3}, {0.0, 1.0, -2.0});
  Band b = initial_band(mu, Tensor({3}, 0.0));
  CHECK(b.lower == mu);
  CHECK(b.upper == mu);
  b = initial_band(Tensor({1}, 0.0), Tensor({1}, 1.0));
  CHECK(b.lower[0] == -1.96);
  CHECK(b.upper[0] == 1.96);

  SeededRng rng(4);
  Tensor s = gaussian_draws(rng, 40);
  for (auto& v : s.data()) v = std::abs(v);
  const Tensor m = gaussian_draws(rng, 40);
  b = initial_band(m, s, 1.5);
  for (std::size_t i = 0; i < 40; ++i) CHECK(std::abs((b.upper[i] - b.lower[i]) / 2 - 1.5 * s[i]) < 1e-14);
  s[7] = -1e-3;
  CHECK_THROWS_AS(initial_band(m, s), Error);
}

TEST_CASE("member seeds are distinct and members train independently") {
  for (std::size_t i = 0; i < 50; ++i)
    for (std::size_t j = 0; j < i; ++j) CHECK(member_seed(9, i) != member_seed(9, j));

  Tensor u, y;
  make_data(8, 32, 1, u, y);
  RpConfig c = small_config(32, 3);
  c.workers = 2;
  const RpEnsemble e = rp_train(u, y, c);
  REQUIRE(e.size() == 3);
  const RpMember alone = train_member(u, y, c, 1);
  for (std::size_t p = 0; p < alone.trainable.parameters().size(); ++p)
    CHECK(alone.trainable.parameters()[p].value == e.members[1].trainable.parameters()[p].value);
  CHECK(alone.loss_trace == e.members[1].loss_trace);

  for (std::size_t k = 0; k < e.size(); ++k) {
    const WnoModel fresh(c.prior_config(), SeededRng(member_seed(c.seed, k), 2));
    CHECK(parameter_hash(fresh) == parameter_hash(e.members[k].prior));
    CHECK(parameter_hash(e.members[k].trainable) != parameter_hash(WnoModel(c.model, SeededRng(member_seed(c.seed, k), 1))));
  }
  CHECK(e.members[0].prior.config().layers == 2);
  CHECK(e.members[0].prior.config().activation == neuralop::Activation::gelu);
}

TEST_CASE("prior weight zero and single-member spread") {
  Tensor u, y;
  make_data(6, 32, 2, u, y);
  RpConfig c = small_config(32, 1);
  c.prior_weight = 0.0;
  const RpEnsemble e = rp_train(u, y, c);
  CHECK(e.members[0].predict(u) == e.members[0].trainable.predict(u));
  const Prediction p = rp_predict(e, u);
  CHECK(max_abs(p.spread) == 0.0);
  CHECK(p.mean == e.members[0].trainable.predict(u));
}

TEST_CASE("two members overfit one repeated sample") {
  Tensor u1, y1;
  make_data(1, 32, 5, u1, y1);
  Tensor u({4, 32}), y({4, 32});
  for (std::size_t b = 0; b < 4; ++b)
    for (std::size_t i = 0; i < 32; ++i) {
      u.at({b, i}) = u1[i];
      y.at({b, i}) = y1[i];
    }
  RpConfig c = small_config(32, 2);
  c.train.epochs = 500;
  const RpEnsemble e = rp_train(u, y, c);
  for (const auto& m : e.members) {
    CHECK(m.loss_trace.back() < 1e-4);
    CHECK(neuralop::l2_value(m.predict(u), y) < 1e-3);
  }
  const Prediction p = rp_predict(e, u);
  CHECK(neuralop::l2_value(p.mean, y) < 1e-3);
}

TEST_CASE("NaN in one member aborts with its id") {
  Tensor u, y;
  make_data(4, 32, 3, u, y);
  y[5] = std::nan("");
  RpConfig c = small_config(32, 2);
  try {
    rp_train(u, y, c);
    FAIL("expected abort");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::numerical);
    CHECK(std::string(e.what()).find("member 0") != std::string::npos);
  }
}

TEST_CASE("selection, checkpoint round trip and normalization") {
  Tensor u, y;
  make_data(8, 32, 6, u, y);
  RpConfig c = small_config(32, 4);
  c.model.normalize = true;
  c.train.epochs = 5;
  const RpEnsemble e = rp_train(u, y, c);
  CHECK(e.members[2].prior.normalization() == e.members[2].trainable.normalization());
  CHECK(e.members[2].trainable.normalization().out_std != 1.0);

  const RpEnsemble best = select_best(e, u, y, 2);
  REQUIRE(best.size() == 2);
  double worst_kept = 0.0, best_dropped = 1e300;
  for (const auto& m : best.members) worst_kept = std::max(worst_kept, neuralop::l2_value(m.predict(u), y));
  for (const auto& m : e.members) {
    bool kept = false;
    for (const auto& b : best.members) kept = kept || b.seed == m.seed;
    if (!kept) best_dropped = std::min(best_dropped, neuralop::l2_value(m.predict(u), y));
  }
  CHECK(worst_kept <= best_dropped);
  CHECK_THROWS_AS(select_best(e, u, y, 5), Error);

  const auto dir = std::filesystem::temp_directory_path() / "opcert_test_ensemble";
  std::filesystem::remove_all(dir);
  save_ensemble(dir.string(), e);
  CHECK(std::filesystem::exists(dir / "loss_3.csv"));
  const RpEnsemble back = load_ensemble(dir.string());
  const Prediction a = rp_predict(e, u), b = rp_predict(back, u);
  CHECK(a.mean == b.mean);
  CHECK(a.spread == b.spread);
  CHECK(back.members[1].seed == e.members[1].seed);
  CHECK_THROWS_AS(load_quantile_pair(dir.string()), Error);
  std::filesystem::remove_all(dir);
}

TEST_CASE("quantile pair orders its two outputs") {
  Tensor u, y;
  make_data(8, 32, 7, u, y);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += 0.2 * std::sin(37.0 * static_cast<double>(i));
  QuantileConfig c;
  c.model = small_config(32, 1).model;
  c.train.epochs = 150;
  c.train.batch = 4;
  c.train.lr = 3e-3;
  c.alpha = 0.1;
  const QuantilePair q = train_quantile_pair(u, y, c);
  const Tensor lo = q.lo.predict(u), hi = q.hi.predict(u);
  // The normwise loss orders the pair by field norm, not pointwise. The
  // upper model stalls at the jump ||y~|| = ||y||, so only the lower side
  // is checked per sample.
  std::size_t lo_below = 0;
  double lo_norms = 0.0, hi_norms = 0.0;
  for (std::size_t b = 0; b < 8; ++b) {
    lo_below += norm2(take_leading(lo, b)) < norm2(take_leading(y, b));
    lo_norms += norm2(take_leading(lo, b));
    hi_norms += norm2(take_leading(hi, b));
  }
  CHECK(lo_below >= 6);
  CHECK(hi_norms > lo_norms);

  const auto dir = std::filesystem::temp_directory_path() / "opcert_test_qpair";
  std::filesystem::remove_all(dir);
  save_quantile_pair(dir.string(), q);
  const QuantilePair back = load_quantile_pair(dir.string());
  CHECK(back.lo.predict(u) == lo);
  CHECK(back.alpha == 0.1);
  std::filesystem::remove_all(dir);
}
