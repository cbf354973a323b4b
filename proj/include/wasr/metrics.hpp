#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "wasr/postprocess.hpp"
#include "wasr/types.hpp"

namespace wasr {

struct FrameGT {
  std::vector<Box> boxes;
  Polyline edge;  // x strictly increasing
};

/// Per-column GT rows by linear interpolation between polyline vertices;
/// NaN for columns outside the polyline's x span.
std::vector<double> rasterize_edge(const Polyline& edge, int width);

/// Root-mean-square row deviation over columns where both are defined, or
/// nullopt when no column is.
std::optional<double> edge_error(const WaterEdge& pred, const Polyline& gt);

/// Intersection over union of inclusive pixel boxes.
double box_iou(const Box& a, const Box& b);

struct MatchCounts {
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;

  MatchCounts& operator+=(const MatchCounts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }
  friend bool operator==(const MatchCounts&, const MatchCounts&) = default;
};

/// Greedy one-to-one matching on IoU, highest first; ties resolved by
/// prediction index then GT index.
MatchCounts match_detections(const std::vector<Box>& pred, const std::vector<Box>& gt, double iou_threshold = 0.3);

/// 200 TP / (2TP + FP + FN); nullopt when all counts are zero.
std::optional<double> f_measure(std::int64_t tp, std::int64_t fp, std::int64_t fn);
inline std::optional<double> f_measure(const MatchCounts& c) { return f_measure(c.tp, c.fp, c.fn); }

struct FramePrediction {
  int frame = 0;
  std::vector<Detection> detections;
  WaterEdge edge;
};

struct FrameRecord {
  int frame = 0;
  std::string sequence;
  const FramePrediction* pred = nullptr;
  const FrameGT* gt = nullptr;  // null when missing
};

struct SequenceReport {
  int frames = 0;
  int edge_frames = 0;  // frames contributing to mu_edg
  double mu_edg = 0.0;
  double std_edg = 0.0;  // population std over frames
  MatchCounts counts;
  std::optional<double> f;
};

struct EvalReport {
  SequenceReport overall;
  std::map<std::string, SequenceReport> sequences;
  int missing_gt = 0;
  int skipped_edge = 0;
  double iou_threshold = 0.3;
};

EvalReport evaluate(const std::vector<FrameRecord>& frames, double iou_threshold = 0.3);

std::string report_json(const EvalReport& report);
std::string report_table(const EvalReport& report);

}  // namespace wasr
