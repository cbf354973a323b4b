#include "wasr/dataset.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "wasr/error.hpp"

namespace wasr {

using nlohmann::json;

// ---------------------------------------------------------------------------
// PNG

namespace {

void write_png(const fs::path& path, int width, int height, png_uint_32 format, const std::vector<std::uint8_t>& buf) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(width);
  img.height = static_cast<png_uint_32>(height);
  img.format = format;
  if (!png_image_write_to_file(&img, path.c_str(), 0, buf.data(), 0, nullptr)) {
    throw DataError(path.string() + ": cannot write PNG: " + img.message);
  }
}

std::vector<std::uint8_t> read_png(const fs::path& path, png_uint_32 format, int& width, int& height) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str())) {
    throw DataError(path.string() + ": cannot read PNG: " + img.message);
  }
  img.format = format;
  std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr)) {
    png_image_free(&img);
    throw DataError(path.string() + ": corrupt PNG: " + img.message);
  }
  width = static_cast<int>(img.width);
  height = static_cast<int>(img.height);
  return buf;
}

}  // namespace

void write_png_rgb(const fs::path& path, const Image& image) {
  std::vector<std::uint8_t> buf(static_cast<std::size_t>(3) * image.height * image.width);
  for (int r = 0; r < image.height; ++r) {
    for (int c = 0; c < image.width; ++c) {
      for (int ch = 0; ch < 3; ++ch) {
        const double v = std::clamp(image.at(ch, r, c), 0.0, 1.0);
        buf[(static_cast<std::size_t>(r) * image.width + c) * 3 + ch] = static_cast<std::uint8_t>(std::lround(v * 255.0));
      }
    }
  }
  write_png(path, image.width, image.height, PNG_FORMAT_RGB, buf);
}

Image read_png_rgb(const fs::path& path) {
  int w = 0, h = 0;
  const auto buf = read_png(path, PNG_FORMAT_RGB, w, h);
  Image img(h, w);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      for (int ch = 0; ch < 3; ++ch) img.at(ch, r, c) = buf[(static_cast<std::size_t>(r) * w + c) * 3 + ch] / 255.0;
    }
  }
  return img;
}

void write_png_gray(const fs::path& path, const Grid<std::uint8_t>& gray) {
  write_png(path, gray.width, gray.height, PNG_FORMAT_GRAY, gray.cells);
}

Grid<std::uint8_t> read_png_gray(const fs::path& path) {
  int w = 0, h = 0;
  auto buf = read_png(path, PNG_FORMAT_GRAY, w, h);
  Grid<std::uint8_t> g(h, w);
  g.cells = std::move(buf);
  return g;
}

void write_label_png(const fs::path& path, const SegLabelMap& labels) {
  Grid<std::uint8_t> g(labels.height, labels.width);
  for (std::size_t i = 0; i < g.cells.size(); ++i) g.cells[i] = static_cast<std::uint8_t>(labels.cells[i]);
  write_png_gray(path, g);
}

SegLabelMap read_label_png(const fs::path& path) {
  const auto g = read_png_gray(path);
  SegLabelMap labels(g.height, g.width);
  for (std::size_t i = 0; i < g.cells.size(); ++i) {
    if (!is_valid_label(g.cells[i])) {
      throw DataError(path.string() + ": invalid label value " + std::to_string(g.cells[i]) + " at pixel offset " +
                      std::to_string(i));
    }
    labels.cells[i] = static_cast<Label>(g.cells[i]);
  }
  return labels;
}

// ---------------------------------------------------------------------------
// Hashing

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("write failed: " + path.string());
}

std::string frame_name(int frame) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d.png", frame);
  return buf;
}

json parse_line(const fs::path& path, int line_no, const std::string& line) {
  try {
    return json::parse(line);
  } catch (const json::exception& e) {
    throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
  }
}

template <class F>
void for_each_jsonl(const fs::path& path, F&& fn) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const json j = parse_line(path, line_no, line);
    try {
      fn(j);
    } catch (const json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

Box box_from_json(const json& j) {
  if (!j.is_array() || j.size() != 4) throw DataError("box must be [x1,y1,x2,y2]");
  Box b{j[0].get<int>(), j[1].get<int>(), j[2].get<int>(), j[3].get<int>()};
  if (b.x2 < b.x1 || b.y2 < b.y1) throw DataError("box has x2 < x1 or y2 < y1");
  return b;
}

}  // namespace

std::string file_hash(const fs::path& path) { return fnv1a_hex(slurp(path)); }

std::string manifest_hash(const fs::path& dir) { return file_hash(dir / "manifest.json"); }

// ---------------------------------------------------------------------------
// Dataset directory

void write_dataset(const fs::path& dir, const std::vector<SceneSample>& samples, const json& info) {
  std::error_code ec;
  fs::create_directories(dir / "images", ec);
  fs::create_directories(dir / "masks", ec);
  if (ec) throw DataError("cannot create dataset directory " + dir.string() + ": " + ec.message());

  std::map<int, ImuSample> imu;
  std::ostringstream boxes, edges;
  json files = json::object();
  for (const auto& s : samples) {
    const std::string name = frame_name(s.frame);
    write_png_rgb(dir / "images" / name, s.image);
    write_label_png(dir / "masks" / name, s.labels);
    files["images/" + name] = file_hash(dir / "images" / name);
    files["masks/" + name] = file_hash(dir / "masks" / name);
    imu[s.frame] = s.imu;
    json jb = json::array();
    for (const auto& b : s.gt_boxes) jb.push_back({b.x1, b.y1, b.x2, b.y2});
    boxes << json{{"frame", s.frame}, {"sequence", s.sequence}, {"boxes", jb}}.dump() << "\n";
    json je = json::array();
    for (const auto& p : s.gt_edge) je.push_back({p.x, p.y});
    edges << json{{"frame", s.frame}, {"edge", je}}.dump() << "\n";
  }
  write_imu_csv(dir / "imu.csv", imu);
  write_text(dir / "gt_boxes.jsonl", boxes.str());
  write_text(dir / "gt_edge.jsonl", edges.str());
  if (!samples.empty()) write_intrinsics(dir / "intrinsics.txt", samples.front().cam);
  for (const char* f : {"imu.csv", "gt_boxes.jsonl", "gt_edge.jsonl", "intrinsics.txt"}) {
    if (fs::exists(dir / f)) files[f] = file_hash(dir / f);
  }

  json manifest = info.is_object() ? info : json::object();
  manifest["count"] = samples.size();
  manifest["files"] = files;
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
}

GroundTruthSet read_ground_truth(const fs::path& dir) {
  GroundTruthSet gt;
  const fs::path boxes_path = dir / "gt_boxes.jsonl";
  for_each_jsonl(boxes_path, [&](const json& j) {
    const int frame = j.at("frame").get<int>();
    FrameGT& f = gt.frames[frame];
    gt.sequence[frame] = j.value("sequence", std::string("seq0"));
    for (const auto& b : j.at("boxes")) f.boxes.push_back(box_from_json(b));
  });
  const fs::path edge_path = dir / "gt_edge.jsonl";
  std::set<int> with_edge;
  for_each_jsonl(edge_path, [&](const json& j) {
    const int frame = j.at("frame").get<int>();
    auto it = gt.frames.find(frame);
    if (it == gt.frames.end()) throw DataError("edge for frame " + std::to_string(frame) + " has no gt_boxes entry");
    Polyline poly;
    for (const auto& v : j.at("edge")) {
      if (!v.is_array() || v.size() != 2) throw DataError("edge vertex must be [x, y]");
      poly.push_back({v[0].get<double>(), v[1].get<double>()});
    }
    for (std::size_t i = 1; i < poly.size(); ++i) {
      if (!(poly[i].x > poly[i - 1].x)) throw DataError("edge x must be strictly increasing");
    }
    it->second.edge = std::move(poly);
    with_edge.insert(frame);
  });
  for (const auto& [frame, f] : gt.frames) {
    if (!with_edge.count(frame)) throw DataError(edge_path.string() + ": no edge for frame " + std::to_string(frame));
  }
  return gt;
}

std::vector<SceneSample> read_dataset(const fs::path& dir) {
  if (!fs::is_directory(dir / "images")) throw DataError(dir.string() + ": missing images/ directory");
  std::vector<int> frames;
  for (const auto& entry : fs::directory_iterator(dir / "images")) {
    const auto stem = entry.path().stem().string();
    if (entry.path().extension() != ".png") continue;
    try {
      std::size_t used = 0;
      const int f = std::stoi(stem, &used);
      if (used != stem.size()) throw std::invalid_argument(stem);
      frames.push_back(f);
    } catch (const std::exception&) {
      throw DataError(entry.path().string() + ": image name is not a frame number");
    }
  }
  std::sort(frames.begin(), frames.end());

  const CameraIntrinsics cam = read_intrinsics(dir / "intrinsics.txt");
  const auto imu = read_imu_csv(dir / "imu.csv");
  const GroundTruthSet gt = read_ground_truth(dir);

  std::vector<SceneSample> out;
  out.reserve(frames.size());
  for (int f : frames) {
    SceneSample s;
    s.frame = f;
    s.cam = cam;
    s.image = read_png_rgb(dir / "images" / frame_name(f));
    const fs::path mask_path = dir / "masks" / frame_name(f);
    if (!fs::exists(mask_path)) throw DataError(mask_path.string() + ": missing mask for frame " + std::to_string(f));
    s.labels = read_label_png(mask_path);
    if (s.labels.height != s.image.height || s.labels.width != s.image.width) {
      throw DataError(mask_path.string() + ": mask size differs from image");
    }
    auto it = imu.find(f);
    if (it == imu.end()) throw DataError((dir / "imu.csv").string() + ": no row for frame " + std::to_string(f));
    s.imu = it->second;
    auto g = gt.frames.find(f);
    if (g == gt.frames.end()) throw DataError((dir / "gt_boxes.jsonl").string() + ": no entry for frame " + std::to_string(f));
    s.gt_boxes = g->second.boxes;
    s.gt_edge = g->second.edge;
    s.sequence = gt.sequence.at(f);
    out.push_back(std::move(s));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Predictions

void write_predictions(const fs::path& dir, const std::vector<FramePrediction>& preds) {
  std::ostringstream det, edge;
  for (const auto& p : preds) {
    json jd = json::array();
    for (const auto& d : p.detections) jd.push_back({{"bbox", {d.bbox.x1, d.bbox.y1, d.bbox.x2, d.bbox.y2}}, {"area", d.area}});
    det << json{{"frame", p.frame}, {"detections", jd}}.dump() << "\n";
    edge << json{{"frame", p.frame}, {"edge", p.edge}}.dump() << "\n";
  }
  write_text(dir / "detections.jsonl", det.str());
  write_text(dir / "edge.jsonl", edge.str());
}

std::vector<FramePrediction> read_predictions(const fs::path& dir) {
  std::map<int, FramePrediction> by_frame;
  for_each_jsonl(dir / "detections.jsonl", [&](const json& j) {
    const int frame = j.at("frame").get<int>();
    auto& p = by_frame[frame];
    p.frame = frame;
    for (const auto& d : j.at("detections")) p.detections.push_back({box_from_json(d.at("bbox")), d.at("area").get<std::int64_t>()});
  });
  const fs::path edge_path = dir / "edge.jsonl";
  if (fs::exists(edge_path)) {
    for_each_jsonl(edge_path, [&](const json& j) {
      const int frame = j.at("frame").get<int>();
      auto& p = by_frame[frame];
      p.frame = frame;
      p.edge = j.at("edge").get<std::vector<int>>();
    });
  }
  std::vector<FramePrediction> out;
  for (auto& [f, p] : by_frame) out.push_back(std::move(p));
  return out;
}

// ---------------------------------------------------------------------------
// Scene params <-> JSON

json scene_params_to_json(const SceneParams& p) {
  return json{{"height", p.height},
              {"width", p.width},
              {"focal_px", p.focal_px},
              {"roll", {p.roll.lo, p.roll.hi}},
              {"pitch", {p.pitch.lo, p.pitch.hi}},
              {"imu_noise", p.imu_noise},
              {"water_texture", p.water_texture},
              {"glitter_prob", p.glitter_prob},
              {"reflection", p.reflection},
              {"obstacles", {p.obstacles_min, p.obstacles_max}},
              {"obstacle_size", {p.obstacle_size_min, p.obstacle_size_max}},
              {"protruding_fraction", p.protruding_fraction},
              {"haze", p.haze},
              {"sequence_length", p.sequence_length}};
}

SceneParams scene_params_from_json(const json& j) {
  SceneParams p;
  try {
    p.height = j.value("height", p.height);
    p.width = j.value("width", p.width);
    p.focal_px = j.value("focal_px", p.focal_px);
    if (j.contains("roll")) p.roll = {j["roll"].at(0).get<double>(), j["roll"].at(1).get<double>()};
    if (j.contains("pitch")) p.pitch = {j["pitch"].at(0).get<double>(), j["pitch"].at(1).get<double>()};
    p.imu_noise = j.value("imu_noise", p.imu_noise);
    p.water_texture = j.value("water_texture", p.water_texture);
    p.glitter_prob = j.value("glitter_prob", p.glitter_prob);
    p.reflection = j.value("reflection", p.reflection);
    if (j.contains("obstacles")) {
      p.obstacles_min = j["obstacles"].at(0).get<int>();
      p.obstacles_max = j["obstacles"].at(1).get<int>();
    }
    if (j.contains("obstacle_size")) {
      p.obstacle_size_min = j["obstacle_size"].at(0).get<int>();
      p.obstacle_size_max = j["obstacle_size"].at(1).get<int>();
    }
    p.protruding_fraction = j.value("protruding_fraction", p.protruding_fraction);
    p.haze = j.value("haze", p.haze);
    p.sequence_length = j.value("sequence_length", p.sequence_length);
  } catch (const json::exception& e) {
    throw DataError(std::string("scene params: ") + e.what());
  }
  return p;
}

}  // namespace wasr
