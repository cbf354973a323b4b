#include "wasr/pipeline.hpp"

#include <algorithm>

namespace wasr {

namespace {

int min_area_for(const PipelineOptions& opt, int h, int w) { return opt.min_area >= 0 ? opt.min_area : scaled_min_area(h, w); }

EvalReport evaluate_predictions(const std::vector<SceneSample>& samples, const std::vector<FramePrediction>& preds,
                                double iou_threshold) {
  std::vector<FrameGT> gts;
  gts.reserve(samples.size());
  for (const auto& s : samples) gts.push_back({s.gt_boxes, s.gt_edge});
  std::vector<FrameRecord> recs;
  for (std::size_t i = 0; i < samples.size(); ++i) recs.push_back({samples[i].frame, samples[i].sequence, &preds[i], &gts[i]});
  return evaluate(recs, iou_threshold);
}

}  // namespace

FramePrediction frame_prediction(int frame, const SegLabelMap& labels, const PipelineOptions& opt) {
  PostprocessResult pp = postprocess(labels, min_area_for(opt, labels.height, labels.width), opt.connectivity);
  return {frame, std::move(pp.detections), std::move(pp.edge)};
}

EvalReport evaluate_network(const Network& net, const std::vector<SceneSample>& samples, const PipelineOptions& opt,
                            std::vector<FramePrediction>* predictions) {
  std::vector<FramePrediction> preds;
  preds.reserve(samples.size());
  for (const auto& s : samples) preds.push_back(frame_prediction(s.frame, predict_labels(net, s), opt));
  EvalReport rep = evaluate_predictions(samples, preds, opt.iou_threshold);
  if (predictions) *predictions = std::move(preds);
  return rep;
}

EvalReport evaluate_labels(const std::vector<SceneSample>& samples, const PipelineOptions& opt) {
  std::vector<FramePrediction> preds;
  preds.reserve(samples.size());
  for (const auto& s : samples) preds.push_back(frame_prediction(s.frame, s.labels, opt));
  return evaluate_predictions(samples, preds, opt.iou_threshold);
}

AblationResult run_ablation(const std::vector<SceneSample>& train_set, const std::vector<SceneSample>& test,
                            const TrainConfig& base, const PipelineOptions& opt) {
  AblationResult out;
  TrainConfig full = base;
  full.net.use_imu = true;
  TrainConfig nows = full;
  nows.weights.lambda1 = 0.0;
  TrainConfig noimu = full;
  noimu.net.use_imu = false;
  for (auto& [name, cfg] : std::vector<std::pair<std::string, TrainConfig>>{
           {"WaSR", full}, {"WaSR_NOWS", nows}, {"WaSR_NOIMU", noimu}}) {
    if (!base.checkpoint_dir.empty()) cfg.checkpoint_dir = base.checkpoint_dir / name;
    TrainResult res = train(SampleSource::of(train_set), cfg);
    AblationRow row;
    row.variant = name;
    row.report = evaluate_network(res.net, test, opt);
    std::vector<double> sep = separation_values(res.net, test, cfg);
    if (!sep.empty()) {
      double sum = 0.0;
      for (double x : sep) sum += x;
      row.mean_separation = sum / static_cast<double>(sep.size());
      std::nth_element(sep.begin(), sep.begin() + sep.size() / 2, sep.end());
      row.median_separation = sep[sep.size() / 2];
    }
    row.config = cfg;
    out.rows.push_back(std::move(row));
  }
  out.separation_direction = out.rows[0].mean_separation < out.rows[1].mean_separation;
  out.edge_direction = out.rows[0].report.overall.mu_edg <= out.rows[2].report.overall.mu_edg;
  return out;
}

}  // namespace wasr
