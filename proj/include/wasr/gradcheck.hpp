#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "wasr/tensor.hpp"

namespace wasr {

/// Central differences (f(x+h e_i) - f(x-h e_i)) / 2h for every element of `at`.
/// `f` receives a perturbed copy of `at`.
Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f, const Tensor& at, double h = 1e-5);

/// Same, perturbing the leaf in place and restoring it. `f` reads the leaf
/// through whatever structure owns it (a parameter store, a captured handle).
std::vector<double> finite_diff_grad_inplace(Tensor& leaf, const std::function<double()>& f, double h = 1e-5,
                                             std::span<const std::int64_t> indices = {});

/// Elementwise |a-b| / max(|a|, |b|, floor), maximized. The floor keeps
/// near-zero gradient entries from dominating on round-off alone.
double max_relative_error(std::span<const double> analytic, std::span<const double> numeric, double floor = 1e-3);

struct GradCheckOptions {
  double h = 1e-5;
  double tolerance = 1e-5;
  double floor = 1e-3;
  /// Check at most this many elements per leaf (evenly strided); <= 0 checks all.
  std::int64_t max_elements_per_leaf = 0;
  /// Fault injection: negates the analytic gradient before comparison.
  bool negate_analytic = false;
};

struct GradCheckReport {
  std::string name;
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::int64_t elements_checked = 0;
  /// Smallest distance of any relu input or max-pool runner-up from its kink,
  /// observed during the unperturbed forward pass.
  double kink_margin = std::numeric_limits<double>::infinity();
  bool passed = false;
};

/// Compares reverse-mode gradients of `loss_fn` w.r.t. `leaves` against
/// central differences. `loss_fn` must rebuild the graph on every call.
GradCheckReport gradcheck(const std::string& name, const std::function<Tensor()>& loss_fn, std::vector<Tensor> leaves,
                          const GradCheckOptions& opt = {});

/// Records how close piecewise-linear ops come to their kinks while alive.
class KinkScope {
 public:
  KinkScope();
  ~KinkScope();
  KinkScope(const KinkScope&) = delete;
  KinkScope& operator=(const KinkScope&) = delete;
  double min_margin() const { return margin_; }

 private:
  double margin_ = std::numeric_limits<double>::infinity();
  KinkScope* previous_;
  friend void note_kink_margin(double);
};

/// Called by relu / max_pool2d forward passes.
void note_kink_margin(double margin);
bool kink_monitor_active();

}  // namespace wasr
