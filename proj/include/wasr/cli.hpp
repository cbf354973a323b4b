#pragma once

#include <string>
#include <vector>

#include "wasr/metrics.hpp"
#include "wasr/types.hpp"

namespace wasr {

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitData = 2, kExitNumeric = 3 };

/// Entry point of the `wasr` executable. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args);

/// Image blended with the class colors, with the water edge and detection
/// boxes drawn on top.
Image render_overlay(const Image& image, const SegLabelMap& labels, const FramePrediction& pred);

}  // namespace wasr
