#include "wasr/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include "wasr/config.hpp"
#include "wasr/dataset.hpp"
#include "wasr/error.hpp"
#include "wasr/gradcheck_suite.hpp"
#include "wasr/pipeline.hpp"

namespace wasr {

namespace {

std::string flag_name(const std::string& key) {
  std::string dashed = key;
  std::replace(dashed.begin(), dashed.end(), '_', '-');
  return dashed == key ? "--" + key : "--" + dashed + ",--" + key;
}

/// Options shared by every subcommand: --config, one --key per config key
/// and --no-imu.
struct CommonOptions {
  std::string config_path;
  std::map<std::string, std::string> overrides;
  bool no_imu = false;

  void attach(CLI::App* app) {
    app->add_option("--config", config_path, "key=value config file");
    for (const auto& k : config_keys()) {
      app->add_option_function<std::string>(
             flag_name(k.name), [this, name = std::string(k.name)](const std::string& v) { overrides[name] = v; },
             std::string(k.doc) + " [" + k.default_value + "]")
          ->option_text("VALUE");
    }
    app->add_flag("--no-imu", no_imu, "replace the IMU mask by the constant prior channel");
  }

  /// Defaults, then `base` (a checkpoint's config), then --config, then flags.
  RunConfig resolve(const std::optional<std::filesystem::path>& base = std::nullopt) const {
    RunConfig cfg = base ? RunConfig::from_file(*base) : RunConfig();
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw DataError("cannot open config " + config_path);
      std::ostringstream ss;
      ss << in.rdbuf();
      cfg.merge_text(ss.str(), config_path);
    }
    for (const auto& [k, v] : overrides) cfg.set(k, v);
    if (no_imu) cfg.set("use_imu", "false");
    return cfg;
  }
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("cannot write " + path.string());
}

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create " + dir.string() + ": " + ec.message());
}

std::string frame_name(int frame) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d.png", frame);
  return buf;
}

void require_resolution(const std::vector<SceneSample>& samples, const RunConfig& cfg, const std::string& what) {
  const int h = cfg.get_int("input_h"), w = cfg.get_int("input_w");
  for (const auto& s : samples) {
    if (s.image.height != h || s.image.width != w) {
      throw DataError("resolution mismatch: frame " + std::to_string(s.frame) + " is " +
                      std::to_string(s.image.width) + "x" + std::to_string(s.image.height) + ", " + what + " expects " +
                      std::to_string(w) + "x" + std::to_string(h));
    }
  }
}

std::string format_f(const std::optional<double>& f) {
  if (!f) return "absent";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", *f);
  return buf;
}

// ---------------------------------------------------------------------------
// synth

int cmd_synth(const RunConfig& cfg, const fs::path& out) {
  const int count = cfg.get_int("count");
  if (count < 1) throw ContractError("synth: count must be >= 1, got " + std::to_string(count));
  const SceneParams params = cfg.scene_params();
  const auto seed = static_cast<std::uint64_t>(cfg.get_int("seed"));
  const auto samples = generate_scenes(params, seed, count, cfg.get_int("first_frame"));
  nlohmann::json info{{"seed", seed}, {"params", scene_params_to_json(params)}};
  make_dir(out);
  write_dataset(out, samples, info);
  write_text(out / "config.txt", cfg.echo());
  std::cout << "synth: " << count << " scenes -> " << out.string() << "\n";
  std::cout << "manifest " << manifest_hash(out) << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// train

void stamp_checkpoints(const fs::path& dir, const std::string& config_text) {
  if (!fs::exists(dir)) return;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_directory() && e.path().filename().string().rfind("epoch_", 0) == 0) {
      write_text(e.path() / "config.txt", config_text);
    }
  }
}

SampleSource training_source(const std::vector<SceneSample>& samples, const RunConfig& cfg,
                             std::shared_ptr<AugmentedStream>& keep) {
  if (!cfg.get_bool("aug_enable")) return SampleSource::of(samples);
  keep = std::make_shared<AugmentedStream>(samples, cfg.aug_spec());
  SampleSource src;
  src.size = keep->size();
  src.get = [stream = keep](std::size_t i) { return stream->at(i); };
  return src;
}

int cmd_train(const RunConfig& cfg, const fs::path& data, const fs::path& out, const std::string& resume) {
  const auto samples = read_dataset(data);
  if (samples.empty()) throw DataError(data.string() + ": dataset is empty");
  require_resolution(samples, cfg, "config");
  TrainConfig tc = cfg.train_config();
  tc.checkpoint_dir = out / "checkpoints";
  if (!resume.empty()) tc.resume_from = resume;
  make_dir(tc.checkpoint_dir);
  const std::string config_text = cfg.echo();
  write_text(out / "config.txt", config_text);

  std::ofstream csv(out / "loss.csv");
  if (!csv) throw DataError("cannot write " + (out / "loss.csv").string());
  csv << "step,epoch,focal,separation,l2,total,lr\n";
  char line[256];
  auto on_step = [&](const StepLog& s) {
    std::snprintf(line, sizeof line, "%lld,%d,%.17g,%.17g,%.17g,%.17g,%.17g\n", static_cast<long long>(s.step), s.epoch,
                  s.focal, s.separation, s.l2, s.total, s.lr);
    csv << line << std::flush;
  };

  std::shared_ptr<AugmentedStream> stream;
  const SampleSource src = training_source(samples, cfg, stream);
  try {
    const TrainResult res = train(src, tc, on_step);
    stamp_checkpoints(tc.checkpoint_dir, config_text);
    const double last = res.log.empty() ? 0.0 : res.log.back().total;
    std::cout << "train: " << res.log.size() << " steps on " << src.size << " samples, final loss " << last << "\n";
    std::cout << "checkpoints in " << tc.checkpoint_dir.string() << "\n";
  } catch (const NumericError&) {
    stamp_checkpoints(tc.checkpoint_dir, config_text);
    throw;
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// infer

fs::path checkpoint_config(const fs::path& ck) {
  if (fs::exists(ck / "config.txt")) return ck / "config.txt";
  if (fs::exists(ck.parent_path().parent_path() / "config.txt")) return ck.parent_path().parent_path() / "config.txt";
  throw DataError(ck.string() + ": no config.txt next to the checkpoint");
}

Network load_network(const fs::path& ck, const RunConfig& cfg) {
  Network net = build_network(cfg.net_config());
  Checkpoint c = load_checkpoint(ck, cfg.train_config().optim);
  auto check = [&](const ParamStore& want, const ParamStore& got, const char* what) {
    if (want.names() != got.names()) throw DataError(ck.string() + ": " + what + " do not match the network config");
    for (const auto& n : want.names()) {
      if (want.at(n).shape() != got.at(n).shape()) {
        throw DataError(ck.string() + ": " + n + " has shape " + shape_str(got.at(n).shape()) + ", config expects " +
                        shape_str(want.at(n).shape()));
      }
    }
  };
  check(net.params, c.params, "parameters");
  check(net.buffers, c.buffers, "buffers");
  net.params = std::move(c.params);
  net.buffers = std::move(c.buffers);
  return net;
}

int cmd_infer(const CommonOptions& common, const std::string& checkpoint, const fs::path& data, const fs::path& out,
              bool overlay, bool gt_labels) {
  if (checkpoint.empty() && !gt_labels) throw ContractError("infer: --checkpoint is required unless --gt-labels is set");
  const RunConfig cfg =
      checkpoint.empty() ? common.resolve() : common.resolve(checkpoint_config(fs::path(checkpoint)));
  const auto samples = read_dataset(data);
  std::optional<Network> net;
  if (!checkpoint.empty()) {
    require_resolution(samples, cfg, "checkpoint");
    net = load_network(checkpoint, cfg);
  }
  const PipelineOptions opt = cfg.pipeline_options();

  make_dir(out / "masks");
  if (overlay) make_dir(out / "overlays");
  write_text(out / "config.txt", cfg.echo());
  std::vector<FramePrediction> preds;
  preds.reserve(samples.size());
  for (const auto& s : samples) {
    const SegLabelMap labels = gt_labels ? resolve_unknown(s.labels) : predict_labels(*net, s);
    preds.push_back(frame_prediction(s.frame, labels, opt));
    write_label_png(out / "masks" / frame_name(s.frame), labels);
    if (overlay) write_png_rgb(out / "overlays" / frame_name(s.frame), render_overlay(s.image, labels, preds.back()));
  }
  write_predictions(out, preds);
  std::cout << "infer: " << preds.size() << " frames -> " << out.string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// eval

MatchCounts parse_counts(const std::string& text) {
  std::vector<std::int64_t> v;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stoll(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ContractError("--counts: expected TP,FP,FN integers, got '" + text + "'");
    }
  }
  if (v.size() != 3) throw ContractError("--counts: expected TP,FP,FN, got '" + text + "'");
  MatchCounts c;
  c.tp = v[0];
  c.fp = v[1];
  c.fn = v[2];
  return c;
}

int cmd_eval(const RunConfig& cfg, const std::string& pred_dir, const std::string& gt_dir, const std::string& out,
             const std::string& counts) {
  if (!counts.empty()) {
    const MatchCounts c = parse_counts(counts);
    std::cout << "TP " << c.tp << " FP " << c.fp << " FN " << c.fn << " F " << format_f(f_measure(c)) << "\n";
    return kExitOk;
  }
  if (pred_dir.empty() || gt_dir.empty()) throw ContractError("eval: --pred and --gt are required without --counts");
  const auto preds = read_predictions(pred_dir);
  const GroundTruthSet gt = read_ground_truth(gt_dir);

  std::vector<int> orphans;
  std::map<int, const FramePrediction*> by_frame;
  for (const auto& p : preds) {
    if (!gt.frames.count(p.frame)) orphans.push_back(p.frame);
    by_frame[p.frame] = &p;
  }
  if (!orphans.empty()) {
    std::string list;
    for (std::size_t i = 0; i < orphans.size() && i < 20; ++i) list += (i ? "," : "") + std::to_string(orphans[i]);
    if (orphans.size() > 20) list += ",...";
    throw DataError("eval: " + std::to_string(orphans.size()) + " predicted frame(s) have no ground truth: " + list);
  }

  // Ground-truth frames without a prediction line count as empty predictions.
  const FramePrediction empty;
  std::vector<FrameRecord> records;
  for (const auto& [frame, g] : gt.frames) {
    auto it = by_frame.find(frame);
    records.push_back({frame, gt.sequence.at(frame), it == by_frame.end() ? &empty : it->second, &g});
  }
  EvalReport report = evaluate(records, cfg.get_double("iou_threshold"));
  if (preds.empty()) {
    report.overall.f.reset();
    for (auto& [name, seq] : report.sequences) seq.f.reset();
  }
  const std::string table = report_table(report);
  std::cout << table;
  if (!out.empty()) {
    make_dir(out);
    write_text(fs::path(out) / "report.txt", table);
    write_text(fs::path(out) / "report.json", report_json(report) + "\n");
    write_text(fs::path(out) / "config.txt", cfg.echo());
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// gradcheck

int cmd_gradcheck(const std::string& inject, const std::string& out) {
  if (!inject.empty()) {
    const auto reg = gradcheck_registry();
    if (std::none_of(reg.begin(), reg.end(), [&](const GradCheckCase& c) { return c.name == inject; })) {
      throw ContractError("--inject-fault: no gradient check named '" + inject + "'");
    }
  }
  const auto reports = run_gradcheck_suite(inject);
  std::ostringstream table;
  char line[256];
  std::snprintf(line, sizeof line, "%-24s %10s %12s %12s  %s\n", "check", "elements", "max_rel_err", "max_abs_err", "result");
  table << line;
  int failed = 0;
  for (const auto& r : reports) {
    std::snprintf(line, sizeof line, "%-24s %10lld %12.3e %12.3e  %s\n", r.name.c_str(),
                  static_cast<long long>(r.elements_checked), r.max_rel_error, r.max_abs_error, r.passed ? "ok" : "FAIL");
    table << line;
    failed += !r.passed;
  }
  table << reports.size() - failed << "/" << reports.size() << " checks passed\n";
  std::cout << table.str();
  if (!out.empty()) {
    make_dir(out);
    write_text(fs::path(out) / "gradcheck.txt", table.str());
  }
  return failed ? kExitNumeric : kExitOk;
}

// ---------------------------------------------------------------------------
// ablate

std::string config_diff(const RunConfig& base, const RunConfig& other) {
  std::string diff;
  for (const auto& k : config_keys()) {
    if (base.get(k.name) != other.get(k.name)) {
      diff += (diff.empty() ? "" : " ") + std::string(k.name) + "=" + other.get(k.name);
    }
  }
  return diff.empty() ? "(none)" : diff;
}

int cmd_ablate(const RunConfig& cfg, const fs::path& data, const fs::path& out) {
  const auto samples = read_dataset(data);
  require_resolution(samples, cfg, "config");
  const int holdout = cfg.get_int("holdout");
  if (holdout < 1 || holdout >= static_cast<int>(samples.size())) {
    throw ContractError("ablate: holdout must be in [1, " + std::to_string(samples.size() - 1) + "], got " +
                        std::to_string(holdout));
  }
  const int seeds = cfg.get_int("ablate_seeds");
  if (seeds < 1) throw ContractError("ablate: ablate_seeds must be >= 1");
  const std::vector<SceneSample> train_set(samples.begin(), samples.end() - holdout);
  const std::vector<SceneSample> test(samples.end() - holdout, samples.end());
  const PipelineOptions opt = cfg.pipeline_options();
  make_dir(out);

  RunConfig full = cfg;
  full.set("use_imu", "true");
  RunConfig nows = full;
  nows.set("lambda1", "0");
  RunConfig noimu = full;
  noimu.set("use_imu", "false");
  write_text(out / "config.txt", full.echo());
  std::cout << "WaSR_NOWS differs from WaSR by: " << config_diff(full, nows) << "\n";
  std::cout << "WaSR_NOIMU differs from WaSR by: " << config_diff(full, noimu) << "\n";
  std::cout << "train " << train_set.size() << " frames, held out " << test.size() << "\n";

  nlohmann::json runs = nlohmann::json::array();
  int sep_wins = 0, edge_wins = 0;
  const int seed0 = cfg.get_int("seed");
  std::printf("%-6s %-11s %8s %8s %6s %6s %6s %6s %12s %12s\n", "seed", "variant", "mu_edg", "(std)", "TP", "FP", "FN",
              "F", "sep_mean", "sep_median");
  for (int k = 0; k < seeds; ++k) {
    RunConfig seeded = full;
    seeded.set("seed", std::to_string(seed0 + k));
    TrainConfig base = seeded.train_config();
    base.checkpoint_dir = out / ("seed_" + std::to_string(seed0 + k));
    const AblationResult res = run_ablation(train_set, test, base, opt);
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : res.rows) {
      const auto& o = row.report.overall;
      std::printf("%-6d %-11s %8.3f %8.3f %6lld %6lld %6lld %6s %12.4f %12.4f\n", seed0 + k, row.variant.c_str(),
                  o.mu_edg, o.std_edg, static_cast<long long>(o.counts.tp), static_cast<long long>(o.counts.fp),
                  static_cast<long long>(o.counts.fn), format_f(o.f).c_str(), row.mean_separation,
                  row.median_separation);
      rows.push_back({{"variant", row.variant},
                      {"mu_edg", o.mu_edg},
                      {"std_edg", o.std_edg},
                      {"tp", o.counts.tp},
                      {"fp", o.counts.fp},
                      {"fn", o.counts.fn},
                      {"f_measure", o.f ? nlohmann::json(*o.f) : nlohmann::json(nullptr)},
                      {"mean_separation", row.mean_separation},
                      {"median_separation", row.median_separation}});
    }
    std::printf("seed %d: separation WaSR < WaSR_NOWS: %s; mu_edg WaSR <= WaSR_NOIMU: %s\n", seed0 + k,
                res.separation_direction ? "yes" : "no", res.edge_direction ? "yes" : "no");
    std::fflush(stdout);
    sep_wins += res.separation_direction;
    edge_wins += res.edge_direction;
    runs.push_back({{"seed", seed0 + k},
                    {"rows", rows},
                    {"separation_direction", res.separation_direction},
                    {"edge_direction", res.edge_direction}});
  }
  const bool sep_major = 2 * sep_wins > seeds, edge_major = 2 * edge_wins > seeds;
  std::printf("majority over %d seed(s): separation %s (%d), edge %s (%d)\n", seeds, sep_major ? "PASS" : "FAIL",
              sep_wins, edge_major ? "PASS" : "FAIL", edge_wins);
  nlohmann::json report{{"runs", runs},
                        {"config_diff", {{"WaSR_NOWS", config_diff(full, nows)}, {"WaSR_NOIMU", config_diff(full, noimu)}}},
                        {"separation_majority", sep_major},
                        {"edge_majority", edge_major}};
  write_text(out / "ablation.json", report.dump(2) + "\n");
  return kExitOk;
}

}  // namespace

Image render_overlay(const Image& image, const SegLabelMap& labels, const FramePrediction& pred) {
  static constexpr double kColors[4][3] = {
      {0.0, 0.85, 0.85},  // water
      {0.1, 0.1, 0.6},    // sky
      {1.0, 0.85, 0.0},   // obstacle
      {0.5, 0.5, 0.5},    // unknown
  };
  Image out = image;
  for (int r = 0; r < image.height; ++r) {
    for (int c = 0; c < image.width; ++c) {
      const Label l = labels(r, c);
      const int k = l == Label::water ? 0 : l == Label::sky ? 1 : l == Label::obstacle ? 2 : 3;
      for (int ch = 0; ch < 3; ++ch) out.at(ch, r, c) = 0.5 * image.at(ch, r, c) + 0.5 * kColors[k][ch];
    }
  }
  auto paint = [&](int r, int c, double red, double green, double blue) {
    if (r < 0 || c < 0 || r >= out.height || c >= out.width) return;
    out.at(0, r, c) = red;
    out.at(1, r, c) = green;
    out.at(2, r, c) = blue;
  };
  for (int c = 0; c < static_cast<int>(pred.edge.size()); ++c) {
    if (pred.edge[static_cast<std::size_t>(c)] != kNoWater) paint(pred.edge[static_cast<std::size_t>(c)], c, 1.0, 0.0, 1.0);
  }
  for (const auto& d : pred.detections) {
    for (int c = d.bbox.x1; c <= d.bbox.x2; ++c) {
      paint(d.bbox.y1, c, 0.0, 1.0, 0.0);
      paint(d.bbox.y2, c, 0.0, 1.0, 0.0);
    }
    for (int r = d.bbox.y1; r <= d.bbox.y2; ++r) {
      paint(r, d.bbox.x1, 0.0, 1.0, 0.0);
      paint(r, d.bbox.x2, 0.0, 1.0, 0.0);
    }
  }
  return out;
}

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"WaSR maritime obstacle detection: synthetic data, training, inference and evaluation"};
  app.require_subcommand(1);

  CommonOptions common;
  std::string out, data, resume, checkpoint, pred, gt, counts, inject;
  bool overlay = false, gt_labels = false;

  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  common.attach(synth);
  synth->add_option("--out", out, "dataset directory")->required();

  auto* train_cmd = app.add_subcommand("train", "train a network on a dataset");
  common.attach(train_cmd);
  train_cmd->add_option("--data", data, "dataset directory")->required();
  train_cmd->add_option("--out", out, "run directory")->required();
  train_cmd->add_option("--resume", resume, "checkpoint directory to continue from");

  auto* infer = app.add_subcommand("infer", "segment a dataset and extract obstacles and the water edge");
  common.attach(infer);
  infer->add_option("--checkpoint", checkpoint, "checkpoint directory (checkpoints/epoch_NNN)");
  infer->add_option("--data", data, "dataset directory")->required();
  infer->add_option("--out", out, "prediction directory")->required();
  infer->add_flag("--overlay", overlay, "write overlay images");
  infer->add_flag("--gt-labels", gt_labels, "postprocess the ground-truth masks instead of running the network");

  auto* eval = app.add_subcommand("eval", "score predictions against ground truth");
  common.attach(eval);
  eval->add_option("--pred", pred, "prediction directory");
  eval->add_option("--gt", gt, "dataset directory with ground truth");
  eval->add_option("--out", out, "report directory");
  eval->add_option("--counts", counts, "print the F-measure of TP,FP,FN and exit");

  auto* grad = app.add_subcommand("gradcheck", "run every registered finite-difference gradient check");
  common.attach(grad);
  grad->add_option("--inject-fault", inject, "negate the analytic gradient of the named check");
  grad->add_option("--out", out, "report directory");

  auto* ablate = app.add_subcommand("ablate", "train and compare WaSR, WaSR_NOWS and WaSR_NOIMU");
  common.attach(ablate);
  ablate->add_option("--data", data, "dataset directory")->required();
  ablate->add_option("--out", out, "report directory")->required();

  std::vector<std::string> argv_store{"wasr"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_store) argv.push_back(a.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (synth->parsed()) return cmd_synth(common.resolve(), out);
    if (train_cmd->parsed()) {
      const RunConfig cfg = common.resolve();
      make_dir(out);
      return cmd_train(cfg, data, out, resume);
    }
    if (infer->parsed()) return cmd_infer(common, checkpoint, data, out, overlay, gt_labels);
    if (eval->parsed()) return cmd_eval(common.resolve(), pred, gt, out, counts);
    if (grad->parsed()) return cmd_gradcheck(inject, out);
    if (ablate->parsed()) return cmd_ablate(common.resolve(), data, out);
  } catch (const ContractError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace wasr
