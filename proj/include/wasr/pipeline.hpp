#pragma once

#include <string>
#include <vector>

#include "wasr/metrics.hpp"
#include "wasr/postprocess.hpp"
#include "wasr/training.hpp"

namespace wasr {

struct PipelineOptions {
  int min_area = -1;  // <0: scaled from the image size
  int connectivity = 4;
  double iou_threshold = 0.3;
};

/// Postprocessed prediction for one labeled map.
FramePrediction frame_prediction(int frame, const SegLabelMap& labels, const PipelineOptions& opt);

/// Network inference + postprocess + evaluation against each sample's GT.
EvalReport evaluate_network(const Network& net, const std::vector<SceneSample>& samples, const PipelineOptions& opt,
                            std::vector<FramePrediction>* predictions = nullptr);

/// Ground-truth labels pushed through postprocess and evaluation.
EvalReport evaluate_labels(const std::vector<SceneSample>& samples, const PipelineOptions& opt);

struct AblationRow {
  std::string variant;  // "WaSR", "WaSR_NOWS", "WaSR_NOIMU"
  TrainConfig config;
  EvalReport report;
  double mean_separation = 0.0;
  double median_separation = 0.0;  // diagnostic; the mean is sensitive to single-pixel obstacles
};

struct AblationResult {
  std::vector<AblationRow> rows;
  bool separation_direction = false;  // full < NOWS on held-out separation
  bool edge_direction = false;        // full mu_edg <= NOIMU mu_edg
};

/// Trains the full model, lambda1 = 0 and the constant-prior variant with
/// identical seeds and data order, then evaluates each on `test`.
AblationResult run_ablation(const std::vector<SceneSample>& train_set, const std::vector<SceneSample>& test,
                            const TrainConfig& base, const PipelineOptions& opt);

}  // namespace wasr
