#pragma once

#include <functional>
#include <string>
#include <vector>

#include "wasr/gradcheck.hpp"

namespace wasr {

struct GradCheckCase {
  std::string name;
  bool end_to_end = false;  // checked against the looser end-to-end tolerance
  std::function<GradCheckReport(const GradCheckOptions&)> run;
};

inline constexpr double kOpTolerance = 1e-5;
inline constexpr double kEndToEndTolerance = 1e-4;

/// One case per differentiable op and network block, plus the full WaSR
/// loss on a 3x16x16 input with 2-4-6-8 encoder channels.
std::vector<GradCheckCase> gradcheck_registry();

/// Runs every case with its tolerance. `inject_fault` names a case whose
/// analytic gradient is negated (negative control); empty for none.
std::vector<GradCheckReport> run_gradcheck_suite(const std::string& inject_fault = "");

}  // namespace wasr
