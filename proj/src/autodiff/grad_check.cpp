#include "opcert/autodiff/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "opcert/core/error.hpp"

namespace opcert::ad {
namespace {

double evaluate(const std::function<Var(Tape&)>& closure) {
  Tape tape;
  const Var loss = closure(tape);
  require(loss.value().size() == 1, ErrorCode::non_scalar_loss, "grad_check: closure must return a scalar");
  return loss.value()[0];
}

}  // namespace

GradCheckReport grad_check(const std::function<Var(Tape&)>& closure, const std::vector<Parameter*>& parameters,
                           const GradCheckOptions& options) {
  require(options.epsilon >= 1e-7 && options.epsilon <= 1e-3, ErrorCode::invalid_argument,
          "grad_check: epsilon must lie in [1e-7, 1e-3]");
  GradCheckReport report;
  if (parameters.empty()) return report;

  for (Parameter* p : parameters) p->zero_grad();
  {
    Tape tape;
    tape.backward(closure(tape));
  }

  SeededRng rng(options.seed, 0x67726164);
  for (Parameter* p : parameters) {
    const std::size_t n = p->value.size();
    std::vector<std::size_t> coords;
    if (n <= options.samples_per_parameter) {
      for (std::size_t i = 0; i < n; ++i) coords.push_back(i);
    } else {
      for (std::size_t s = 0; s < options.samples_per_parameter; ++s) coords.push_back(rng.index(n));
    }
    double worst = 0.0;
    for (std::size_t i : coords) {
      const double saved = p->value[i];
      p->value[i] = saved + options.epsilon;
      const double up = evaluate(closure);
      p->value[i] = saved - options.epsilon;
      const double down = evaluate(closure);
      p->value[i] = saved;
      const double numeric = (up - down) / (2.0 * options.epsilon);
      const double analytic = p->grad[i];
      const double rel = std::abs(analytic - numeric) / (std::abs(analytic) + std::abs(numeric) + 1e-12);
      worst = std::max(worst, rel);
      ++report.coordinates_checked;
    }
    report.per_parameter[p->name] = worst;
    report.max_relative_error = std::max(report.max_relative_error, worst);
  }
  return report;
}

}  // namespace opcert::ad
