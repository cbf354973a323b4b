#include "wasr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include <json.hpp>

namespace wasr {

std::vector<double> rasterize_edge(const Polyline& edge, int width) {
  std::vector<double> rows(static_cast<std::size_t>(std::max(width, 0)), std::numeric_limits<double>::quiet_NaN());
  for (std::size_t i = 1; i < edge.size(); ++i) {
    if (!(edge[i].x > edge[i - 1].x)) throw ContractError("edge polyline x must be strictly increasing");
  }
  if (edge.empty()) return rows;
  for (int c = 0; c < width; ++c) {
    const double x = c;
    if (x < edge.front().x || x > edge.back().x) continue;
    auto it = std::lower_bound(edge.begin(), edge.end(), x, [](const Point& p, double v) { return p.x < v; });
    if (it->x == x) {
      rows[static_cast<std::size_t>(c)] = it->y;
      continue;
    }
    const Point& b = *it;
    const Point& a = *(it - 1);
    const double t = (x - a.x) / (b.x - a.x);
    rows[static_cast<std::size_t>(c)] = a.y + t * (b.y - a.y);
  }
  return rows;
}

std::optional<double> edge_error(const WaterEdge& pred, const Polyline& gt) {
  const auto gt_rows = rasterize_edge(gt, static_cast<int>(pred.size()));
  double sum = 0.0;
  std::int64_t n = 0;
  for (std::size_t c = 0; c < pred.size(); ++c) {
    if (pred[c] == kNoWater || std::isnan(gt_rows[c])) continue;
    const double d = pred[c] - gt_rows[c];
    sum += d * d;
    ++n;
  }
  if (n == 0) return std::nullopt;
  return std::sqrt(sum / static_cast<double>(n));
}

double box_iou(const Box& a, const Box& b) {
  const int ix1 = std::max(a.x1, b.x1), iy1 = std::max(a.y1, b.y1);
  const int ix2 = std::min(a.x2, b.x2), iy2 = std::min(a.y2, b.y2);
  if (ix2 < ix1 || iy2 < iy1) return 0.0;
  const double inter = static_cast<double>(ix2 - ix1 + 1) * (iy2 - iy1 + 1);
  return inter / (static_cast<double>(a.area()) + static_cast<double>(b.area()) - inter);
}

MatchCounts match_detections(const std::vector<Box>& pred, const std::vector<Box>& gt, double iou_threshold) {
  struct Pair {
    double iou;
    std::size_t p, g;
  };
  std::vector<Pair> pairs;
  for (std::size_t p = 0; p < pred.size(); ++p) {
    for (std::size_t g = 0; g < gt.size(); ++g) {
      const double iou = box_iou(pred[p], gt[g]);
      if (iou >= iou_threshold && iou > 0.0) pairs.push_back({iou, p, g});
    }
  }
  std::stable_sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) { return a.iou > b.iou; });
  std::vector<bool> pred_used(pred.size(), false), gt_used(gt.size(), false);
  MatchCounts m;
  for (const auto& pr : pairs) {
    if (pred_used[pr.p] || gt_used[pr.g]) continue;
    pred_used[pr.p] = gt_used[pr.g] = true;
    ++m.tp;
  }
  m.fp = static_cast<std::int64_t>(pred.size()) - m.tp;
  m.fn = static_cast<std::int64_t>(gt.size()) - m.tp;
  return m;
}

std::optional<double> f_measure(std::int64_t tp, std::int64_t fp, std::int64_t fn) {
  if (tp < 0 || fp < 0 || fn < 0) throw ContractError("detection counts must be non-negative");
  const std::int64_t denom = 2 * tp + fp + fn;
  if (denom == 0) return std::nullopt;
  return 200.0 * static_cast<double>(tp) / static_cast<double>(denom);
}

namespace {

struct Accumulator {
  int frames = 0;
  std::vector<double> rmse;
  MatchCounts counts;

  SequenceReport finish() const {
    SequenceReport r;
    r.frames = frames;
    r.edge_frames = static_cast<int>(rmse.size());
    if (!rmse.empty()) {
      double s = 0.0;
      for (double v : rmse) s += v;
      r.mu_edg = s / static_cast<double>(rmse.size());
      double v2 = 0.0;
      for (double v : rmse) v2 += (v - r.mu_edg) * (v - r.mu_edg);
      r.std_edg = std::sqrt(v2 / static_cast<double>(rmse.size()));
    }
    r.counts = counts;
    r.f = f_measure(counts);
    return r;
  }
};

}  // namespace

EvalReport evaluate(const std::vector<FrameRecord>& frames, double iou_threshold) {
  EvalReport report;
  report.iou_threshold = iou_threshold;
  Accumulator all;
  std::map<std::string, Accumulator> per_seq;
  for (const auto& f : frames) {
    if (f.pred == nullptr) throw ContractError("evaluate: frame " + std::to_string(f.frame) + " has no prediction");
    if (f.gt == nullptr) {
      ++report.missing_gt;
      continue;
    }
    std::vector<Box> boxes;
    boxes.reserve(f.pred->detections.size());
    for (const auto& d : f.pred->detections) boxes.push_back(d.bbox);
    const MatchCounts m = match_detections(boxes, f.gt->boxes, iou_threshold);
    const auto rmse = edge_error(f.pred->edge, f.gt->edge);
    auto& seq = per_seq[f.sequence];
    for (Accumulator* acc : {&all, &seq}) {
      ++acc->frames;
      acc->counts += m;
      if (rmse) acc->rmse.push_back(*rmse);
    }
    if (!rmse) ++report.skipped_edge;
  }
  report.overall = all.finish();
  for (const auto& [name, acc] : per_seq) report.sequences[name] = acc.finish();
  return report;
}

namespace {

nlohmann::json seq_json(const SequenceReport& r) {
  nlohmann::json j;
  j["frames"] = r.frames;
  j["edge_frames"] = r.edge_frames;
  j["mu_edg"] = r.edge_frames > 0 ? nlohmann::json(r.mu_edg) : nlohmann::json(nullptr);
  j["std_edg"] = r.edge_frames > 0 ? nlohmann::json(r.std_edg) : nlohmann::json(nullptr);
  j["tp"] = r.counts.tp;
  j["fp"] = r.counts.fp;
  j["fn"] = r.counts.fn;
  j["f_measure"] = r.f ? nlohmann::json(*r.f) : nlohmann::json(nullptr);
  return j;
}

std::string fmt_f(const std::optional<double>& f) {
  if (!f) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", *f);
  return buf;
}

std::string table_row(const std::string& name, const SequenceReport& r) {
  char edge[64] = "-";
  if (r.edge_frames > 0) std::snprintf(edge, sizeof edge, "%.2f (%.2f)", r.mu_edg, r.std_edg);
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-16s %6d %17s %7lld %7lld %7lld %6s\n", name.c_str(), r.frames, edge,
                static_cast<long long>(r.counts.tp), static_cast<long long>(r.counts.fp),
                static_cast<long long>(r.counts.fn), fmt_f(r.f).c_str());
  return buf;
}

}  // namespace

std::string report_json(const EvalReport& report) {
  nlohmann::json j;
  j["iou_threshold"] = report.iou_threshold;
  j["overall"] = seq_json(report.overall);
  j["sequences"] = nlohmann::json::object();
  for (const auto& [name, r] : report.sequences) j["sequences"][name] = seq_json(r);
  j["warnings"] = {{"missing_gt", report.missing_gt}, {"skipped_edge", report.skipped_edge}};
  return j.dump(2);
}

std::string report_table(const EvalReport& report) {
  std::ostringstream out;
  char head[256];
  std::snprintf(head, sizeof head, "%-16s %6s %17s %7s %7s %7s %6s\n", "sequence", "frames", "mu_edg (std)", "TP", "FP",
                "FN", "F");
  out << head;
  for (const auto& [name, r] : report.sequences) out << table_row(name, r);
  out << table_row("overall", report.overall);
  if (report.missing_gt > 0 || report.skipped_edge > 0) {
    out << "warnings: missing_gt=" << report.missing_gt << " skipped_edge=" << report.skipped_edge << "\n";
  }
  return out.str();
}

}  // namespace wasr
