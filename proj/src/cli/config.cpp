#include "wasr/config.hpp"

#include <fstream>
#include <sstream>

#include "wasr/error.hpp"

namespace wasr {

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys{
      {"seed", "1", "master seed: scene generation, network init, data order"},
      // synthetic scenes
      {"count", "200", "scenes written by synth"},
      {"first_frame", "0", "frame id of the first synthesized scene"},
      {"input_h", "96", "image height (multiple of 8)"},
      {"input_w", "128", "image width (multiple of 8)"},
      {"focal_px", "128", "camera focal length in pixels"},
      {"roll_max", "0.15", "scene roll range +-, radians"},
      {"pitch_max", "0.12", "scene pitch range +-, radians"},
      {"imu_noise", "0.01", "IMU read-out noise std, radians"},
      {"water_texture", "0.05", "water texture amplitude"},
      {"glitter_prob", "0.002", "glitter streaks per water pixel"},
      {"reflection", "0.3", "obstacle reflection strength"},
      {"obstacles_min", "1", "obstacles per scene, minimum"},
      {"obstacles_max", "4", "obstacles per scene, maximum"},
      {"obstacle_size_min", "8", "obstacle extent, minimum px"},
      {"obstacle_size_max", "22", "obstacle extent, maximum px"},
      {"protruding_fraction", "0.5", "share of obstacles crossing the horizon"},
      {"haze", "0.3", "haze near the horizon"},
      {"sequence_length", "25", "frames per sequence id"},
      // network
      {"channels_res2", "16", "res2 width"},
      {"channels_res3", "32", "res3 width"},
      {"channels_res4", "48", "res4 width"},
      {"channels_res5", "64", "res5 width"},
      {"encoder_units", "1", "residual units per stage"},
      {"aspp_rates", "1,2,4,6", "ASPP dilation rates"},
      {"use_imu", "true", "feed the IMU horizon mask (false: constant 0.5 prior)"},
      // losses
      {"lambda1", "0.01", "separation loss weight"},
      {"lambda2", "1e-6", "L2 weight"},
      {"focal_gamma", "2", "focal loss exponent"},
      {"ws_stage", "res5", "separation loss features: res5 | res4"},
      {"ws_epsilon", "1e-8", "separation denominator floor"},
      {"ws_stop_grad", "false", "treat water means as constants"},
      // optimizer
      {"epochs", "5", "training epochs"},
      {"lr0", "1e-4", "initial learning rate"},
      {"momentum", "0.9", "RMSProp momentum"},
      {"rms_decay", "0.9", "RMSProp square-average decay"},
      {"rms_eps", "1e-8", "RMSProp epsilon"},
      {"poly_power", "0.9", "polynomial decay power"},
      {"shuffle", "true", "shuffle samples each epoch"},
      // augmentation
      {"aug_enable", "false", "train on the augmented stream"},
      {"aug_mirror", "true", "left-right mirror variants"},
      {"aug_rotations", "-15,-5,5,15", "rotation angles, degrees"},
      {"aug_elastic", "true", "elastic water deformation variants"},
      {"aug_elastic_step", "16", "elastic grid step, px"},
      {"aug_elastic_disp", "3", "elastic max displacement, px"},
      {"aug_color_refs", "2", "color variants per sample, including the original"},
      {"aug_seed", "1", "augmentation seed"},
      // postprocess / evaluation
      {"min_area", "-1", "minimum obstacle area, px (-1: 25 px scaled from 384x512)"},
      {"connectivity", "4", "component connectivity: 4 | 8"},
      {"iou_threshold", "0.3", "detection match threshold"},
      // ablation
      {"holdout", "50", "trailing frames held out by ablate"},
      {"ablate_seeds", "1", "number of seeds ablate runs (seed, seed+1, ...)"},
  };
  return keys;
}

RunConfig::RunConfig() {
  for (const auto& k : config_keys()) values_[k.name] = k.default_value;
}

RunConfig RunConfig::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  RunConfig cfg;
  cfg.merge_text(ss.str(), path.string());
  return cfg;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

void RunConfig::merge_text(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ContractError(origin + ":" + std::to_string(line_no) + ": expected key=value");
    }
    try {
      set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const ContractError& e) {
      throw ContractError(origin + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

void RunConfig::set(const std::string& key, const std::string& value) {
  auto it = values_.find(key);
  if (it == values_.end()) throw ContractError("unknown config key '" + key + "'");
  it->second = value;
}

const std::string& RunConfig::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ContractError("unknown config key '" + key + "'");
  return it->second;
}

int RunConfig::get_int(const std::string& key) const {
  const std::string& v = get(key);
  try {
    std::size_t used = 0;
    const long long x = std::stoll(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return static_cast<int>(x);
  } catch (const std::exception&) {
    throw ContractError(key + ": expected an integer, got '" + v + "'");
  }
}

double RunConfig::get_double(const std::string& key) const {
  const std::string& v = get(key);
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ContractError(key + ": expected a number, got '" + v + "'");
  }
}

bool RunConfig::get_bool(const std::string& key) const {
  const std::string& v = get(key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ContractError(key + ": expected true/false, got '" + v + "'");
}

namespace {

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(v);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

std::vector<int> RunConfig::get_int_list(const std::string& key) const {
  std::vector<int> out;
  for (const auto& s : split_list(get(key))) {
    try {
      std::size_t used = 0;
      out.push_back(std::stoi(s, &used));
      if (used != s.size()) throw std::invalid_argument(s);
    } catch (const std::exception&) {
      throw ContractError(key + ": expected comma-separated integers, got '" + get(key) + "'");
    }
  }
  return out;
}

std::vector<double> RunConfig::get_double_list(const std::string& key) const {
  std::vector<double> out;
  for (const auto& s : split_list(get(key))) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(s, &used));
      if (used != s.size()) throw std::invalid_argument(s);
    } catch (const std::exception&) {
      throw ContractError(key + ": expected comma-separated numbers, got '" + get(key) + "'");
    }
  }
  return out;
}

std::string RunConfig::echo() const {
  std::ostringstream out;
  for (const auto& k : config_keys()) out << k.name << "=" << get(k.name) << "\n";
  return out.str();
}

SceneParams RunConfig::scene_params() const {
  SceneParams p;
  p.height = get_int("input_h");
  p.width = get_int("input_w");
  p.focal_px = get_double("focal_px");
  const double roll = get_double("roll_max"), pitch = get_double("pitch_max");
  p.roll = {-roll, roll};
  p.pitch = {-pitch, pitch};
  p.imu_noise = get_double("imu_noise");
  p.water_texture = get_double("water_texture");
  p.glitter_prob = get_double("glitter_prob");
  p.reflection = get_double("reflection");
  p.obstacles_min = get_int("obstacles_min");
  p.obstacles_max = get_int("obstacles_max");
  p.obstacle_size_min = get_int("obstacle_size_min");
  p.obstacle_size_max = get_int("obstacle_size_max");
  p.protruding_fraction = get_double("protruding_fraction");
  p.haze = get_double("haze");
  p.sequence_length = get_int("sequence_length");
  p.validate();
  return p;
}

NetConfig RunConfig::net_config() const {
  NetConfig n;
  n.input_h = get_int("input_h");
  n.input_w = get_int("input_w");
  n.encoder_channels = {get_int("channels_res2"), get_int("channels_res3"), get_int("channels_res4"),
                        get_int("channels_res5")};
  n.encoder_units = get_int("encoder_units");
  n.aspp_rates = get_int_list("aspp_rates");
  n.use_imu = get_bool("use_imu");
  n.seed = static_cast<std::uint64_t>(get_int("seed"));
  n.validate();
  return n;
}

TrainConfig RunConfig::train_config() const {
  TrainConfig t;
  t.net = net_config();
  t.weights.lambda1 = get_double("lambda1");
  t.weights.lambda2 = get_double("lambda2");
  t.weights.gamma = get_double("focal_gamma");
  if (t.weights.lambda1 < 0 || t.weights.lambda2 < 0 || t.weights.gamma < 0) {
    throw ContractError("lambda1, lambda2 and focal_gamma must be non-negative");
  }
  const std::string& stage = get("ws_stage");
  if (stage == "res5") {
    t.ws_stage = WsStage::res5;
  } else if (stage == "res4") {
    t.ws_stage = WsStage::res4;
  } else {
    throw ContractError("ws_stage: expected res5 or res4, got '" + stage + "'");
  }
  t.separation.epsilon = get_double("ws_epsilon");
  t.separation.stop_grad_mu = get_bool("ws_stop_grad");
  t.optim.lr0 = get_double("lr0");
  t.optim.momentum = get_double("momentum");
  t.optim.rms_decay = get_double("rms_decay");
  t.optim.eps = get_double("rms_eps");
  t.optim.poly_power = get_double("poly_power");
  t.epochs = get_int("epochs");
  t.seed = static_cast<std::uint64_t>(get_int("seed"));
  t.shuffle = get_bool("shuffle");
  return t;
}

AugSpec RunConfig::aug_spec() const {
  AugSpec a;
  a.mirror = get_bool("aug_mirror");
  a.rotations_deg = get_double_list("aug_rotations");
  a.elastic = get_bool("aug_elastic");
  a.elastic_step = get_int("aug_elastic_step");
  a.elastic_disp = get_double("aug_elastic_disp");
  a.color_refs = get_int("aug_color_refs");
  a.seed = static_cast<std::uint64_t>(get_int("aug_seed"));
  a.validate();
  return a;
}

PipelineOptions RunConfig::pipeline_options() const {
  PipelineOptions o;
  o.min_area = get_int("min_area");
  o.connectivity = get_int("connectivity");
  if (o.connectivity != 4 && o.connectivity != 8) throw ContractError("connectivity must be 4 or 8");
  o.iou_threshold = get_double("iou_threshold");
  return o;
}

}  // namespace wasr
