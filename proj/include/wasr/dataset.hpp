#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "wasr/metrics.hpp"
#include "wasr/synthetic.hpp"
#include "wasr/types.hpp"

namespace wasr {

namespace fs = std::filesystem;

// 8-bit PNG helpers. Image values are stored as round(v * 255).
void write_png_rgb(const fs::path& path, const Image& image);
Image read_png_rgb(const fs::path& path);
void write_png_gray(const fs::path& path, const Grid<std::uint8_t>& gray);
Grid<std::uint8_t> read_png_gray(const fs::path& path);

void write_label_png(const fs::path& path, const SegLabelMap& labels);
SegLabelMap read_label_png(const fs::path& path);

/// 64-bit FNV-1a, hex encoded.
std::string fnv1a_hex(const std::string& bytes);
std::string file_hash(const fs::path& path);

/// Layout: images/NNNN.png, masks/NNNN.png, imu.csv, gt_boxes.jsonl,
/// gt_edge.jsonl, intrinsics.txt, manifest.json. `info` is merged into the
/// manifest next to the frame count and per-file hashes.
void write_dataset(const fs::path& dir, const std::vector<SceneSample>& samples, const nlohmann::json& info);
std::vector<SceneSample> read_dataset(const fs::path& dir);

/// Hash of manifest.json's bytes.
std::string manifest_hash(const fs::path& dir);

/// Ground truth only (gt_boxes.jsonl + gt_edge.jsonl), keyed by frame,
/// with sequence ids.
struct GroundTruthSet {
  std::map<int, FrameGT> frames;
  std::map<int, std::string> sequence;
};
GroundTruthSet read_ground_truth(const fs::path& dir);

// Prediction files: one JSON object per line and per frame.
//   detections.jsonl: {"frame": id, "detections": [{"bbox": [x1,y1,x2,y2], "area": n}, ...]}
//   edge.jsonl:       {"frame": id, "edge": [r0, r1, ...]}   (-1 = no water)
void write_predictions(const fs::path& dir, const std::vector<FramePrediction>& preds);
std::vector<FramePrediction> read_predictions(const fs::path& dir);

SceneParams scene_params_from_json(const nlohmann::json& j);
nlohmann::json scene_params_to_json(const SceneParams& p);

}  // namespace wasr
