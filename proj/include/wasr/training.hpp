#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "wasr/losses.hpp"
#include "wasr/network.hpp"
#include "wasr/param_store.hpp"
#include "wasr/synthetic.hpp"

namespace wasr {

struct OptimHyper {
  double lr0 = 1e-4;
  double momentum = 0.9;
  double rms_decay = 0.9;
  double eps = 1e-8;
  double poly_power = 0.9;
};

/// RMSProp moments per parameter, plus the step counter.
struct OptimState {
  OptimHyper hyper;
  ParamStore square_avg{false};
  ParamStore momentum{false};
  std::int64_t step = 0;
  std::int64_t max_steps = 0;

  static OptimState init(const ParamStore& params, const OptimHyper& hyper, std::int64_t max_steps);
  double lr() const;

  /// ParamStore layout with magic "WASROPT1": "sq.<name>", "mom.<name>" and
  /// a "state" entry holding {step, max_steps}.
  void save(const std::filesystem::path& path) const;
  static OptimState load(const std::filesystem::path& path, const OptimHyper& hyper);
};

/// lr0 * (1 - step / max_steps)^power.
double poly_lr(std::int64_t step, std::int64_t max_steps, double lr0, double power);

/// s <- rho s + (1 - rho) g^2;  m <- mu m + g / sqrt(s + eps);  p <- p - lr m.
/// Missing gradients count as zero. Gradients are cleared afterwards.
void rmsprop_step(ParamStore& params, OptimState& state);

enum class WsStage { res5, res4 };

struct TrainConfig {
  NetConfig net;
  LossWeights weights;
  SeparationOptions separation;
  WsStage ws_stage = WsStage::res5;
  OptimHyper optim;
  int epochs = 5;
  std::uint64_t seed = 1;     // data order
  bool shuffle = true;
  std::filesystem::path checkpoint_dir;  // empty: no checkpoints
  std::filesystem::path resume_from;     // checkpoint directory to continue from
};

struct StepLog {
  std::int64_t step = 0;
  int epoch = 0;
  double focal = 0.0;
  double separation = 0.0;
  double l2 = 0.0;
  double total = 0.0;
  double lr = 0.0;
};

/// Indexable sample source (a plain scene list or an augmented stream).
struct SampleSource {
  std::size_t size = 0;
  std::function<SceneSample(std::size_t)> get;

  static SampleSource of(const std::vector<SceneSample>& samples);
};

struct TrainResult {
  Network net;
  OptimState optim;
  std::vector<StepLog> log;
};

/// [3,H,W] image tensor and the IMU prior mask for a sample.
Tensor image_tensor(const Image& image);
Tensor imu_mask_for(const SceneSample& s);

/// Losses for one sample against a forward pass in training mode. Returns
/// the breakdown; `ws_value` is only evaluated when lambda1 != 0.
LossBreakdown sample_losses(const Network& net, ParamStore& buffers, const SceneSample& s, const TrainConfig& cfg,
                            BatchNormMode mode, bool update_running);

/// Per-image steps over `epochs` passes; epoch order is a permutation drawn
/// from (seed, epoch). Writes checkpoint_dir/epoch_NNN after every epoch.
/// Throws NumericError when the total loss is not finite.
TrainResult train(const SampleSource& data, const TrainConfig& cfg,
                  const std::function<void(const StepLog&)>& on_step = {});

struct Checkpoint {
  ParamStore params;
  ParamStore buffers{false};
  OptimState optim;
  int epoch = 0;
};

void save_checkpoint(const std::filesystem::path& dir, const Network& net, const OptimState& optim, int epoch,
                     std::uint64_t seed);
Checkpoint load_checkpoint(const std::filesystem::path& dir, const OptimHyper& hyper);

/// Eval-mode forward returning per-pixel argmax labels at input resolution.
SegLabelMap predict_labels(const Network& net, const SceneSample& s);

/// Per-sample separation value (at the configured stage) for samples with
/// both water and obstacle pixels, evaluated in eval mode.
std::vector<double> separation_values(const Network& net, const std::vector<SceneSample>& samples,
                                      const TrainConfig& cfg);

/// Mean of separation_values, 0 when no sample qualifies.
double mean_separation(const Network& net, const std::vector<SceneSample>& samples, const TrainConfig& cfg);

}  // namespace wasr
