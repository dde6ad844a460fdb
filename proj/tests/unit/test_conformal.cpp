#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>

#include "opcert/conformal/scp.hpp"
#include "opcert/core/error.hpp"

using namespace opcert;
using namespace opcert::conformal;
using ensemble::initial_band;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double sorted_order_statistic(std::vector<double> v, double alpha) {
  std::sort(v.begin(), v.end());
  // Smallest k with k >= (1 - alpha)(n + 1), by integer search.
  const double need = (1.0 - alpha) * static_cast<double>(v.size() + 1);
  std::size_t k = 1;
  while (static_cast<double>(k) < need - 1e-9) ++k;
  return k > v.size() ? kInf : v[k - 1];
}

Tensor random_field(SeededRng& rng, Shape shape, double lo, double hi) {
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

}  // namespace

TEST_CASE("rank examples") {
  CHECK(conformal_rank(19, 0.05) == 19);
  CHECK(conformal_rank(50, 0.05) == 49);
  CHECK(conformal_rank(10, 0.05) == 11);
  CHECK(conformal_rank(1, 0.5) == 1);
  CHECK(conformal_rank(99, 0.01) == 99);
  CHECK_THROWS_AS(conformal_rank(5, 1.0), Error);
}

TEST_CASE("RP score") {
  CHECK(score_rp(Tensor({1}, 2.0), Tensor({1}, 1.0), Tensor({1}, 0.5))[0] == 2.0);
  CHECK(score_rp(Tensor({1}, 1.5), Tensor({1}, 1.5), Tensor({1}, 0.5))[0] == 0.0);
  CHECK(std::isinf(score_rp(Tensor({1}, 1.0), Tensor({1}, 1.0), Tensor({1}, 0.0))[0]));
  SeededRng rng(1);
  const Tensor y = random_field(rng, {4, 9}, -2, 2), mu = random_field(rng, {4, 9}, -2, 2),
               s = random_field(rng, {4, 9}, 0.1, 1);
  const Tensor e = score_rp(y, mu, s);
  for (std::size_t i = 0; i < y.size(); ++i) CHECK(std::abs(e[i] - std::abs(y[i] - mu[i]) / s[i]) < 1e-12);
  const Tensor scaled = score_rp(y * 3.5, mu * 3.5, s * 3.5);
  CHECK(max_abs_diff(scaled, e) < 1e-12);
  CHECK_THROWS_AS(score_rp(y, mu, Tensor({4, 8}, 1.0)), Error);
}

TEST_CASE("conformal quantile") {
  std::vector<double> v(19);
  for (int i = 0; i < 19; ++i) v[i] = 19 - i;
  CHECK(conformal_quantile(v, 0.05) == 19.0);
  CHECK(conformal_quantile(std::vector<double>(30, 2.5), 0.1) == 2.5);
  CHECK(std::isinf(conformal_quantile(std::vector<double>(10, 1.0), 0.05)));
  CHECK_THROWS_AS(conformal_quantile(std::vector<double>{}, 0.05), Error);
  SeededRng rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> s(50);
    for (auto& x : s) x = rng.normal();
    CHECK(conformal_quantile(s, 0.05) == sorted_order_statistic(s, 0.05));
    std::sort(s.begin(), s.end());
    CHECK(conformal_quantile(s, 0.05) == s[48]);
  }
}

TEST_CASE("per-location calibration") {
  ConformalConfig cfg;
  cfg.jitter = 0.0;
  Tensor one({19, 1});
  for (std::size_t i = 0; i < 19; ++i) one[i] = static_cast<double>(i + 1);
  CHECK(calibrate_scores(one, GridSpec::line(1), cfg).q[0] == 19.0);

  cfg.jitter = 1e-9;
  cfg.workers = 3;
  SeededRng rng(3);
  const GridSpec grid = GridSpec::square(6);
  Tensor scores({50, 6, 6});
  for (auto& v : scores.data()) v = std::abs(rng.normal());
  const QField f = calibrate_scores(scores, grid, cfg);
  CHECK(f.q.shape() == grid.shape());
  for (std::size_t j = 0; j < 36; ++j) {
    std::vector<double> col(50);
    for (std::size_t i = 0; i < 50; ++i) col[i] = scores[i * 36 + j];
    CHECK(std::abs(f.q[j] - sorted_order_statistic(col, 0.05)) <= 1e-9);
  }
  cfg.workers = 1;
  CHECK(calibrate_scores(scores, grid, cfg).q == f.q);

  ConformalConfig tight = cfg;
  for (double a : {0.5, 0.2, 0.1, 0.05, 0.02}) {
    tight.alpha = a;
    const QField g = calibrate_scores(scores, grid, tight);
    for (double b : {0.5, 0.2, 0.1, 0.05, 0.02}) {
      if (b >= a) continue;
      ConformalConfig t2 = tight;
      t2.alpha = b;
      const QField h = calibrate_scores(scores, grid, t2);
      for (std::size_t j = 0; j < 36; ++j) CHECK(h.q[j] >= g.q[j]);
    }
  }
  CHECK_THROWS_AS(calibrate_scores(scores, GridSpec::square(5), cfg), Error);
  cfg.alpha = 0.0;
  CHECK_THROWS_AS(calibrate_scores(scores, grid, cfg), Error);
}

TEST_CASE("marginal coverage equals the exact rank fraction") {
  SeededRng rng(4);
  const std::size_t n = 19, trials = 40000;
  std::size_t covered = 0;
  std::vector<double> s(n);
  for (std::size_t t = 0; t < trials; ++t) {
    for (auto& x : s) x = rng.uniform();
    covered += rng.uniform() <= conformal_quantile(s, 0.05);
  }
  CHECK(std::abs(static_cast<double>(covered) / trials - 0.95) < 0.005);
}

TEST_CASE("bands") {
  Band b = band(Tensor({1}, 0.0), Tensor({1}, 1.0), Tensor({1}, 2.0));
  CHECK(b.lower[0] == -2.0);
  CHECK(b.upper[0] == 2.0);
  b = band(Tensor({2}, 1.0), Tensor({2}, 0.0), Tensor({2}, {kInf, 3.0}));
  CHECK(b.lower[0] == -kInf);
  CHECK(b.upper[0] == kInf);
  CHECK(b.lower[1] == 1.0);

  SeededRng rng(5);
  const Tensor mu = random_field(rng, {3, 8}, -1, 1), s = random_field(rng, {3, 8}, 0, 1),
               q = random_field(rng, {8}, 0, 3);
  b = band(mu, s, q, 1.0);
  for (std::size_t k = 0; k < 3; ++k)
    for (std::size_t j = 0; j < 8; ++j) {
      const std::size_t i = k * 8 + j;
      CHECK(std::abs(b.lower[i] - (mu[i] - q[j] * s[i])) < 1e-14);
      CHECK(std::abs(b.upper[i] - (mu[i] + q[j] * s[i])) < 1e-14);
    }
  CHECK_THROWS_AS(band(mu, s, Tensor({7}, 1.0)), Error);

  CHECK(cq_score(Tensor({1}, 0.5), Tensor({1}, 0.0), Tensor({1}, 1.0))[0] < 0.0);
  CHECK(cq_score(Tensor({1}, 2.0), Tensor({1}, 0.0), Tensor({1}, 1.0))[0] == 1.0);
  const Tensor lo = random_field(rng, {3, 8}, -2, 0), hi = random_field(rng, {3, 8}, 0, 2);
  const Band c = cq_band(lo, hi, q);
  for (std::size_t i = 0; i < 24; ++i) {
    CHECK(lo[i] - c.lower[i] == doctest::Approx(q[i % 8]).epsilon(1e-14));
    CHECK(c.upper[i] - hi[i] == doctest::Approx(q[i % 8]).epsilon(1e-14));
  }
}

TEST_CASE("coverage evaluation") {
  SeededRng rng(6);
  const Tensor mu = random_field(rng, {20, 10}, -1, 1);
  CoverageReport r = coverage_eval(initial_band(mu, Tensor({20, 10}, 0.5)), mu);
  CHECK(r.average == 100.0);
  CHECK(r.below == 0);
  r = coverage_eval(Band{mu, mu}, mu + Tensor({20, 10}, 0.1));
  CHECK(r.max == 0.0);
  CHECK(r.below == 10);

  const Tensor truth = random_field(rng, {20, 10}, -1, 1), s = random_field(rng, {20, 10}, 0, 1);
  const Band b = initial_band(mu, s, 1.0);
  r = coverage_eval(b, truth, 50.0);
  double avg = 0.0;
  std::size_t below = 0;
  for (std::size_t j = 0; j < 10; ++j) {
    int hit = 0;
    for (std::size_t k = 0; k < 20; ++k) hit += std::abs(truth[k * 10 + j] - mu[k * 10 + j]) <= s[k * 10 + j];
    CHECK(r.coverage[j] == doctest::Approx(5.0 * hit).epsilon(1e-14));
    avg += 5.0 * hit / 10.0;
    below += 5.0 * hit < 50.0;
  }
  CHECK(std::abs(r.average - avg) < 1e-9);
  CHECK(r.below == below);
  CHECK(r.below + r.at_or_above == 10);
  CHECK(r.min <= r.average);

  // Closed intervals: a truth on the boundary is covered.
  r = coverage_eval(Band{Tensor({1, 1}, 0.0), Tensor({1, 1}, 1.0)}, Tensor({1, 1}, 1.0));
  CHECK(r.average == 100.0);
}

TEST_CASE("q-field and report files") {
  const auto dir = std::filesystem::temp_directory_path() / "opcert_test_conformal";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  QField f{Tensor({4, 4}, 1.25), GridSpec::square(4), 0.1, 1.0, ScoreKind::cq};
  f.q[3] = kInf;
  save_qfield((dir / "q.opq").string(), f);
  const QField g = load_qfield((dir / "q.opq").string());
  CHECK(g.q == f.q);
  CHECK(g.grid == f.grid);
  CHECK(g.alpha == 0.1);
  CHECK(g.kind == ScoreKind::cq);
  CHECK(g.infinite_count() == 1);
  {
    std::ofstream bad(dir / "bad.opq", std::ios::binary);
    bad << "OPQFLD02";
  }
  CHECK_THROWS_AS(load_qfield((dir / "bad.opq").string()), Error);

  CoverageReport r;
  r.coverage.assign(16, 100.0);
  r.coverage[2] = 90.0;
  r.average = 99.375;
  r.min = 90;
  r.max = 100;
  r.below = 1;
  r.at_or_above = 15;
  write_coverage_csv((dir / "r.csv").string(), {{"CRP-WNO", r, 0.5}}, GridSpec::square(4));
  std::ifstream in(dir / "r.csv");
  std::string line;
  std::getline(in, line);
  CHECK(line == "model,average,min,max,count_below_95,count_at_or_above_95,nmse_percent");
  std::getline(in, line);
  CHECK(line == "CRP-WNO,99.375,90,100,1,15,0.5");
  std::getline(in, line);
  CHECK(line.empty());
  std::getline(in, line);
  CHECK(line == "location,x,y,CRP-WNO,CRP-WNO_flag");
  std::getline(in, line);
  std::getline(in, line);
  std::getline(in, line);
  CHECK(line == "2,0,0.6666666666666666,90,below");
  std::filesystem::remove_all(dir);
}

TEST_CASE("NMSE") {
  CHECK(nmse_percent(Tensor({2}, {1.0, 0.0}), Tensor({2}, {1.0, 1.0})) == 50.0);
  CHECK_THROWS_AS(nmse_percent(Tensor({2}, 1.0), Tensor({2}, 0.0)), Error);
}

TEST_CASE("ensemble calibration covers its own calibration set") {
  ensemble::RpConfig c;
  c.model.width = 8;
  c.model.layers = 2;
  c.model.levels = 1;
  c.model.grid = GridSpec::line(32, true);
  c.model.proj_hidden = 16;
  c.members = 3;
  c.train.epochs = 5;
  c.train.batch = 5;
  SeededRng rng(8);
  Tensor u({30, 32}), y({30, 32});
  for (std::size_t b = 0; b < 30; ++b) {
    const double a = rng.normal();
    for (std::size_t i = 0; i < 32; ++i) {
      u.at({b, i}) = a * std::sin(2 * std::numbers::pi * i / 32.0);
      y.at({b, i}) = a * a * 0.3 + 0.1 * rng.normal();
    }
  }
  const auto e = ensemble::rp_train(u, y, c);
  ConformalConfig cfg;
  const QField q = calibrate(e, u, y, c.model.grid, cfg);
  CHECK(q.infinite_count() == 0);
  const auto p = ensemble::rp_predict(e, u);
  const CoverageReport r = coverage_eval(band(p.mean, p.spread, q.q), y);
  CHECK(r.average >= 94.0);
  CHECK_THROWS_AS(calibrate(e, u, y, GridSpec::line(32, false), cfg), Error);
  try {
    calibrate(e, Tensor({3, 16}), Tensor({3, 16}), c.model.grid, cfg);
    FAIL("expected mismatch");
  } catch (const Error& err) {
    CHECK(err.code() == ErrorCode::grid_mismatch);
  }
}
