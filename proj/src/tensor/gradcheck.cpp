#include "wasr/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "wasr/error.hpp"

namespace wasr {

namespace {
thread_local KinkScope* g_kink_scope = nullptr;
}  // namespace

KinkScope::KinkScope() : previous_(g_kink_scope) { g_kink_scope = this; }
KinkScope::~KinkScope() { g_kink_scope = previous_; }

void note_kink_margin(double margin) {
  if (g_kink_scope != nullptr) g_kink_scope->margin_ = std::min(g_kink_scope->margin_, margin);
}

bool kink_monitor_active() { return g_kink_scope != nullptr; }

Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f, const Tensor& at, double h) {
  Tensor probe(at.shape(), std::vector<double>(at.data().begin(), at.data().end()));
  auto grad = finite_diff_grad_inplace(probe, [&] { return f(probe); }, h);
  return Tensor(at.shape(), std::move(grad));
}

std::vector<double> finite_diff_grad_inplace(Tensor& leaf, const std::function<double()>& f, double h,
                                             std::span<const std::int64_t> indices) {
  if (!(h > 0.0)) throw ContractError("finite_diff_grad: step must be positive");
  NoGradGuard no_grad;
  auto x = leaf.mutable_data();
  std::vector<double> grad(x.size(), 0.0);
  auto probe = [&](std::size_t i) {
    const double orig = x[i];
    x[i] = orig + h;
    const double fp = f();
    x[i] = orig - h;
    const double fm = f();
    x[i] = orig;
    grad[i] = (fp - fm) / (2.0 * h);
  };
  if (indices.empty()) {
    for (std::size_t i = 0; i < x.size(); ++i) probe(i);
  } else {
    for (std::int64_t i : indices) probe(static_cast<std::size_t>(i));
  }
  return grad;
}

double max_relative_error(std::span<const double> analytic, std::span<const double> numeric, double floor) {
  if (analytic.size() != numeric.size()) throw ContractError("max_relative_error: length mismatch");
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double a = analytic[i], n = numeric[i];
    const double denom = std::max({std::abs(a), std::abs(n), floor});
    worst = std::max(worst, std::abs(a - n) / denom);
  }
  return worst;
}

GradCheckReport gradcheck(const std::string& name, const std::function<Tensor()>& loss_fn, std::vector<Tensor> leaves,
                          const GradCheckOptions& opt) {
  GradCheckReport report;
  report.name = name;
  for (auto& leaf : leaves) {
    leaf.zero_grad();
    leaf.set_requires_grad(true);
  }
  {
    KinkScope kinks;
    Tensor loss = loss_fn();
    report.kink_margin = kinks.min_margin();
    loss.backward();
  }

  for (auto& leaf : leaves) {
    const auto n = static_cast<std::int64_t>(leaf.numel());
    std::vector<std::int64_t> idx;
    if (opt.max_elements_per_leaf > 0 && n > opt.max_elements_per_leaf) {
      const double stride = static_cast<double>(n) / static_cast<double>(opt.max_elements_per_leaf);
      for (std::int64_t k = 0; k < opt.max_elements_per_leaf; ++k) idx.push_back(static_cast<std::int64_t>(k * stride));
    } else {
      idx.resize(static_cast<std::size_t>(n));
      std::iota(idx.begin(), idx.end(), 0);
    }
    std::vector<double> analytic(static_cast<std::size_t>(n), 0.0);
    if (leaf.has_grad()) std::copy(leaf.grad().begin(), leaf.grad().end(), analytic.begin());
    if (opt.negate_analytic) {
      for (double& a : analytic) a = -a;
    }
    const auto numeric = finite_diff_grad_inplace(leaf, [&] { return loss_fn().item(); }, opt.h, idx);

    std::vector<double> a_sel, n_sel;
    for (std::int64_t i : idx) {
      a_sel.push_back(analytic[static_cast<std::size_t>(i)]);
      n_sel.push_back(numeric[static_cast<std::size_t>(i)]);
      report.max_abs_error = std::max(report.max_abs_error, std::abs(a_sel.back() - n_sel.back()));
    }
    report.max_rel_error = std::max(report.max_rel_error, max_relative_error(a_sel, n_sel, opt.floor));
    report.elements_checked += static_cast<std::int64_t>(idx.size());
  }
  for (auto& leaf : leaves) leaf.zero_grad();
  report.passed = std::isfinite(report.max_rel_error) && report.max_rel_error <= opt.tolerance;
  return report;
}

}  // namespace wasr
