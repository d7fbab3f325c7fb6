#include "dims/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace dims {

namespace {

Real relative_error(Real analytic, Real numeric, Real floor) {
  const Real denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

}  // namespace

GradCheckReport grad_check(const std::function<Tensor()>& f, std::span<const NamedTensor> params,
                           const GradCheckOptions& options, const GradHook& hook) {
  GradCheckReport report;
  std::vector<std::vector<Real>> analytic;
  try {
    Tape tape;
    TapeScope scope(tape);
    for (auto [name, p] : params) {
      p.mutable_grad();
      p.zero_grad();
    }
    Tensor loss = f();
    if (!std::isfinite(loss.item())) throw NumericError("loss is not finite");
    tape.backward(loss);
    for (const auto& [name, p] : params) {
      auto g = p.grad();
      analytic.emplace_back(g.begin(), g.end());
      if (hook) hook(name, analytic.back());
    }
  } catch (const std::exception& e) {
    report.diagnostics = std::string("analytic pass failed: ") + e.what();
    return report;
  }

  auto evaluate = [&](const std::string& name, std::size_t i) -> Real {
    Real v = f().item();
    if (!std::isfinite(v)) {
      std::ostringstream msg;
      msg << "non-finite objective while perturbing " << name << "[" << i << "]";
      throw NumericError(msg.str());
    }
    return v;
  };

  try {
    for (std::size_t k = 0; k < params.size(); ++k) {
      auto p = params[k].second;
      const auto& name = params[k].first;
      auto values = p.mutable_values();
      ParamGradCheck entry{name};
      for (std::size_t i = 0; i < values.size(); ++i) {
        const Real original = values[i];
        values[i] = original + options.eps;
        const Real up = evaluate(name, i);
        values[i] = original - options.eps;
        const Real down = evaluate(name, i);
        values[i] = original;
        const Real numeric = (up - down) / (Real{2} * options.eps);
        const Real err = relative_error(analytic[k][i], numeric, options.abs_floor);
        if (err > entry.max_rel_error || i == 0) {
          entry.max_rel_error = std::max(entry.max_rel_error, err);
          if (err >= entry.max_rel_error) {
            entry.worst_index = i;
            entry.analytic = analytic[k][i];
            entry.numeric = numeric;
          }
        }
      }
      if (entry.max_rel_error >= report.max_rel_error) {
        report.max_rel_error = entry.max_rel_error;
        report.worst_param = name;
        report.worst_index = entry.worst_index;
      }
      report.params.push_back(entry);
    }
  } catch (const std::exception& e) {
    report.diagnostics = e.what();
    report.passed = false;
    return report;
  }
  report.passed = report.max_rel_error <= options.tol;
  return report;
}

GradCheckReport grad_check(const std::function<Tensor()>& f, ParameterStore& store,
                           const GradCheckOptions& options, const GradHook& hook) {
  std::vector<NamedTensor> params(store.begin(), store.end());
  return grad_check(f, params, options, hook);
}

}  // namespace dims
