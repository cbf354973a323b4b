#include "wasr/training.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <numeric>

#include "wasr/error.hpp"
#include "wasr/horizon.hpp"
#include "wasr/rng.hpp"

namespace wasr {

namespace fs = std::filesystem;

double poly_lr(std::int64_t step, std::int64_t max_steps, double lr0, double power) {
  if (max_steps <= 0) throw ContractError("poly_lr: max_steps must be positive");
  if (step < 0 || step > max_steps) throw ContractError("poly_lr: step outside [0, max_steps]");
  return lr0 * std::pow(1.0 - static_cast<double>(step) / static_cast<double>(max_steps), power);
}

OptimState OptimState::init(const ParamStore& params, const OptimHyper& hyper, std::int64_t max_steps) {
  OptimState st;
  st.hyper = hyper;
  st.max_steps = max_steps;
  for (const auto& name : params.names()) {
    st.square_avg.add(name, Tensor::zeros(params.at(name).shape()));
    st.momentum.add(name, Tensor::zeros(params.at(name).shape()));
  }
  return st;
}

double OptimState::lr() const { return poly_lr(std::min(step, max_steps), max_steps, hyper.lr0, hyper.poly_power); }

void OptimState::save(const fs::path& path) const {
  ParamStore out(false);
  for (const auto& name : square_avg.names()) {
    out.add("sq." + name, square_avg.at(name));
    out.add("mom." + name, momentum.at(name));
  }
  out.add("state", Tensor({2}, {static_cast<double>(step), static_cast<double>(max_steps)}));
  out.save(path, "WASROPT1");
}

OptimState OptimState::load(const fs::path& path, const OptimHyper& hyper) {
  const ParamStore in = ParamStore::load(path, false, "WASROPT1");
  if (!in.contains("state") || in.at("state").numel() != 2) throw DataError(path.string() + ": missing optimizer state entry");
  OptimState st;
  st.hyper = hyper;
  const auto s = in.at("state").data();
  st.step = static_cast<std::int64_t>(s[0]);
  st.max_steps = static_cast<std::int64_t>(s[1]);
  for (const auto& name : in.names()) {
    if (name.starts_with("sq.")) {
      const std::string base = name.substr(3);
      if (!in.contains("mom." + base)) throw DataError(path.string() + ": no momentum entry for " + base);
      st.square_avg.add(base, in.at(name).detach());
      st.momentum.add(base, in.at("mom." + base).detach());
    }
  }
  return st;
}

void rmsprop_step(ParamStore& params, OptimState& st) {
  const double lr = st.lr();
  const double rho = st.hyper.rms_decay, mu = st.hyper.momentum, eps = st.hyper.eps;
  for (const auto& name : params.names()) {
    Tensor& p = params.at(name);
    if (!st.square_avg.contains(name)) throw ContractError("rmsprop_step: no optimizer state for " + name);
    Tensor& s = st.square_avg.at(name);
    Tensor& m = st.momentum.at(name);
    if (s.shape() != p.shape() || m.shape() != p.shape()) {
      throw ContractError("rmsprop_step: state shape mismatch for " + name);
    }
    auto pd = p.mutable_data();
    auto sd = s.mutable_data();
    auto md = m.mutable_data();
    const bool has_g = p.has_grad();
    const auto g = has_g ? p.grad() : std::span<const double>{};
    for (std::size_t i = 0; i < pd.size(); ++i) {
      const double gi = has_g ? g[i] : 0.0;
      sd[i] = rho * sd[i] + (1.0 - rho) * gi * gi;
      md[i] = mu * md[i] + gi / std::sqrt(sd[i] + eps);
      pd[i] -= lr * md[i];
    }
  }
  ++st.step;
  params.zero_grad();
}

SampleSource SampleSource::of(const std::vector<SceneSample>& samples) {
  return {samples.size(), [&samples](std::size_t i) { return samples[i]; }};
}

Tensor image_tensor(const Image& image) { return Tensor({3, image.height, image.width}, image.data); }

Tensor imu_mask_for(const SceneSample& s) {
  return render_imu_mask(horizon_line(s.imu, s.cam), s.image.width, s.image.height);
}

LossBreakdown sample_losses(const Network& net, ParamStore& buffers, const SceneSample& s, const TrainConfig& cfg,
                            BatchNormMode mode, bool update_running) {
  ForwardContext ctx{net.params, buffers, mode, update_running};
  const WasrOutput out = wasr_forward(image_tensor(s.image), imu_mask_for(s), ctx, net.cfg);
  const Tensor foc = focal_loss(out.seg.probs, s.labels, cfg.weights.gamma);
  Tensor ws;
  if (cfg.weights.lambda1 != 0.0) {
    const Tensor& feat = cfg.ws_stage == WsStage::res5 ? out.features.res5 : out.features.res4;
    ws = water_separation_loss(feat, build_region_index(s.labels, feat.dim(1), feat.dim(2)), cfg.separation);
  }
  Tensor l2;
  if (cfg.weights.lambda2 != 0.0) l2 = l2_reg(net.params);
  return total_loss(foc, ws, l2, cfg.weights);
}

namespace {

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, int epoch, bool shuffle) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  if (shuffle) {
    Rng rng(mix_seed({seed, static_cast<std::uint64_t>(epoch), 0x0DE7ULL}));
    rng.shuffle(order.begin(), order.end());
  }
  return order;
}

std::string epoch_dir_name(int epoch) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "epoch_%03d", epoch);
  return buf;
}

}  // namespace

void save_checkpoint(const fs::path& dir, const Network& net, const OptimState& optim, int epoch, std::uint64_t seed) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create checkpoint directory " + dir.string() + ": " + ec.message());
  net.params.save(dir / "params.bin");
  net.buffers.save(dir / "buffers.bin");
  optim.save(dir / "optim.bin");
  std::ofstream m(dir / "manifest.txt");
  m << "epoch=" << epoch << "\n"
    << "step=" << optim.step << "\n"
    << "max_steps=" << optim.max_steps << "\n"
    << "seed=" << seed << "\n"
    << "next_order_seed=" << mix_seed({seed, static_cast<std::uint64_t>(epoch), 0x0DE7ULL}) << "\n";
  if (!m) throw DataError("cannot write " + (dir / "manifest.txt").string());
}

Checkpoint load_checkpoint(const fs::path& dir, const OptimHyper& hyper) {
  Checkpoint ck;
  ck.params = ParamStore::load(dir / "params.bin", true);
  ck.buffers = ParamStore::load(dir / "buffers.bin", false);
  ck.optim = OptimState::load(dir / "optim.bin", hyper);
  std::ifstream m(dir / "manifest.txt");
  if (!m) throw DataError("cannot open " + (dir / "manifest.txt").string());
  std::string line;
  bool have_epoch = false;
  while (std::getline(m, line)) {
    if (line.starts_with("epoch=")) {
      ck.epoch = std::stoi(line.substr(6));
      have_epoch = true;
    }
  }
  if (!have_epoch) throw DataError((dir / "manifest.txt").string() + ": missing epoch");
  return ck;
}

TrainResult train(const SampleSource& data, const TrainConfig& cfg, const std::function<void(const StepLog&)>& on_step) {
  if (data.size == 0) throw ContractError("train: empty dataset");
  if (cfg.epochs < 1) throw ContractError("train: epochs must be >= 1");
  TrainResult res;
  res.net = build_network(cfg.net);
  const std::int64_t max_steps = static_cast<std::int64_t>(cfg.epochs) * static_cast<std::int64_t>(data.size);
  res.optim = OptimState::init(res.net.params, cfg.optim, max_steps);

  int first_epoch = 0;
  if (!cfg.resume_from.empty()) {
    Checkpoint ck = load_checkpoint(cfg.resume_from, cfg.optim);
    if (ck.params.names() != res.net.params.names()) {
      throw DataError(cfg.resume_from.string() + ": checkpoint parameters do not match the network config");
    }
    res.net.params = std::move(ck.params);
    res.net.buffers = std::move(ck.buffers);
    res.optim = std::move(ck.optim);
    if (res.optim.max_steps != max_steps) throw DataError("resume: checkpoint max_steps differs from this run's");
    first_epoch = ck.epoch;
  }

  for (int epoch = first_epoch; epoch < cfg.epochs; ++epoch) {
    for (std::size_t idx : epoch_order(data.size, cfg.seed, epoch, cfg.shuffle)) {
      const SceneSample s = data.get(idx);
      const double lr = res.optim.lr();
      LossBreakdown loss = sample_losses(res.net, res.net.buffers, s, cfg, BatchNormMode::train, true);
      const double total = loss.total.item();
      if (!std::isfinite(total)) {
        throw NumericError("non-finite loss at step " + std::to_string(res.optim.step) + " (epoch " +
                           std::to_string(epoch) + ", frame " + std::to_string(s.frame) + ")");
      }
      loss.total.backward();
      StepLog log{res.optim.step, epoch, loss.focal, loss.separation, loss.l2, total, lr};
      rmsprop_step(res.net.params, res.optim);
      res.log.push_back(log);
      if (on_step) on_step(log);
    }
    if (!cfg.checkpoint_dir.empty()) {
      save_checkpoint(cfg.checkpoint_dir / epoch_dir_name(epoch + 1), res.net, res.optim, epoch + 1, cfg.seed);
    }
  }
  return res;
}

SegLabelMap predict_labels(const Network& net, const SceneSample& s) {
  NoGradGuard guard;
  // Eval mode without running-stat updates never writes to the buffers.
  ForwardContext ctx{net.params, const_cast<ParamStore&>(net.buffers), BatchNormMode::eval, false};
  const WasrOutput out = wasr_forward(image_tensor(s.image), imu_mask_for(s), ctx, net.cfg);
  const auto p = out.seg.probs.data();
  const int nc = out.seg.probs.dim(0), h = out.seg.probs.dim(1), w = out.seg.probs.dim(2);
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  SegLabelMap labels(h, w, Label::water);
  for (std::size_t i = 0; i < plane; ++i) {
    int best = 0;
    for (int c = 1; c < nc; ++c) {
      if (p[c * plane + i] > p[best * plane + i]) best = c;
    }
    labels.cells[i] = static_cast<Label>(best);
  }
  return labels;
}

std::vector<double> separation_values(const Network& net, const std::vector<SceneSample>& samples,
                                      const TrainConfig& cfg) {
  NoGradGuard guard;
  std::vector<double> out;
  for (const auto& s : samples) {
    ForwardContext ctx{net.params, const_cast<ParamStore&>(net.buffers), BatchNormMode::eval, false};
    const WasrOutput fwd = wasr_forward(image_tensor(s.image), imu_mask_for(s), ctx, net.cfg);
    const Tensor& feat = cfg.ws_stage == WsStage::res5 ? fwd.features.res5 : fwd.features.res4;
    const RegionIndex idx = build_region_index(s.labels, feat.dim(1), feat.dim(2));
    if (idx.water_pixels.empty() || idx.obstacle_pixels.empty()) continue;
    out.push_back(water_separation_loss(feat, idx, cfg.separation).item());
  }
  return out;
}

double mean_separation(const Network& net, const std::vector<SceneSample>& samples, const TrainConfig& cfg) {
  const auto v = separation_values(net, samples, cfg);
  double sum = 0.0;
  for (double x : v) sum += x;
  return v.empty() ? 0.0 : sum / static_cast<double>(v.size());
}

}  // namespace wasr
