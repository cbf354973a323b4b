#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "wasr/augmentation.hpp"
#include "wasr/pipeline.hpp"
#include "wasr/synthetic.hpp"
#include "wasr/training.hpp"

namespace wasr {

struct ConfigKey {
  const char* name;
  const char* default_value;
  const char* doc;
};

/// Every recognized key with its default.
const std::vector<ConfigKey>& config_keys();

/// key=value configuration. Unknown keys are rejected with ContractError.
class RunConfig {
 public:
  RunConfig();

  static RunConfig from_file(const std::filesystem::path& path);
  /// Merges `key=value` lines; '#' starts a comment.
  void merge_text(const std::string& text, const std::string& origin = "config");
  void set(const std::string& key, const std::string& value);
  const std::string& get(const std::string& key) const;

  int get_int(const std::string& key) const;
  double get_double(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::vector<int> get_int_list(const std::string& key) const;
  std::vector<double> get_double_list(const std::string& key) const;

  /// All keys in table order, one `key=value` line each.
  std::string echo() const;

  SceneParams scene_params() const;
  NetConfig net_config() const;
  TrainConfig train_config() const;
  AugSpec aug_spec() const;
  PipelineOptions pipeline_options() const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace wasr
