#include "wasr/horizon.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>

#include "wasr/error.hpp"
#include "wasr/ops.hpp"

namespace wasr {

void CameraIntrinsics::validate() const {
  if (!(focal_px > 0.0)) throw ContractError("focal_px must be positive");
  if (width < 1 || height < 1) throw ContractError("image size must be positive");
  if (cx < 0.0 || cx > width - 1 || cy < 0.0 || cy > height - 1) {
    throw ContractError("principal point must lie inside the image");
  }
}

CameraIntrinsics CameraIntrinsics::centered(int width, int height, double focal_px) {
  CameraIntrinsics cam{focal_px, (width - 1) / 2.0, (height - 1) / 2.0, width, height};
  cam.validate();
  return cam;
}

HorizonLine horizon_line(const ImuSample& imu, const CameraIntrinsics& cam) {
  constexpr double kLimit = std::numbers::pi / 2;
  if (!(std::abs(imu.roll) < kLimit) || !(std::abs(imu.pitch) < kLimit)) {
    throw ContractError("IMU roll/pitch must have magnitude below pi/2");
  }
  return {std::tan(imu.roll), cam.cy + cam.focal_px * std::tan(imu.pitch), cam.cx};
}

ImuSample imu_from_horizon(const HorizonLine& line, const CameraIntrinsics& cam) {
  return {std::atan(line.slope), std::atan((line.intercept_row - cam.cy) / cam.focal_px)};
}

Tensor render_imu_mask(const HorizonLine& line, int width, int height) {
  if (width < 1 || height < 1) throw ContractError("render_imu_mask: dimensions must be positive");
  std::vector<double> data(static_cast<std::size_t>(width) * height, 0.0);
  for (int c = 0; c < width; ++c) {
    const double boundary = line.row_at(c);
    for (int r = 0; r < height; ++r) {
      if (r > boundary) data[static_cast<std::size_t>(r) * width + c] = 1.0;
    }
  }
  return Tensor({1, height, width}, std::move(data));
}

Tensor resize_mask(const Tensor& mask, int target_h, int target_w) {
  if (mask.rank() != 3 || mask.dim(0) != 1) throw ContractError("resize_mask: expected [1,H,W], got " + shape_str(mask.shape()));
  if (target_h > mask.dim(1) || target_w > mask.dim(2)) {
    throw ContractError("resize_mask: target larger than source " + shape_str(mask.shape()));
  }
  if (target_h == mask.dim(1) && target_w == mask.dim(2)) return mask;
  return resize_bilinear(mask, target_h, target_w);
}

// ---------------------------------------------------------------------------
// Files

namespace {

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& s, const std::filesystem::path& path, int line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw DataError(path.string() + ":" + std::to_string(line) + ": not a number: '" + s + "'");
  }
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

CameraIntrinsics read_intrinsics(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open intrinsics file '" + path.string() + "'");
  std::map<std::string, double> kv;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw DataError(path.string() + ":" + std::to_string(lineno) + ": expected key=value");
    kv[trim(line.substr(0, eq))] = parse_double(trim(line.substr(eq + 1)), path, lineno);
  }
  for (const char* key : {"focal_px", "cx", "cy", "width", "height"}) {
    if (!kv.count(key)) throw DataError(path.string() + ": missing key '" + key + "'");
  }
  CameraIntrinsics cam{kv["focal_px"], kv["cx"], kv["cy"], static_cast<int>(kv["width"]), static_cast<int>(kv["height"])};
  try {
    cam.validate();
  } catch (const ContractError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return cam;
}

void write_intrinsics(const std::filesystem::path& path, const CameraIntrinsics& cam) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot write '" + path.string() + "'");
  os << "focal_px=" << fmt_double(cam.focal_px) << "\ncx=" << fmt_double(cam.cx) << "\ncy=" << fmt_double(cam.cy)
     << "\nwidth=" << cam.width << "\nheight=" << cam.height << "\n";
}

std::map<int, ImuSample> read_imu_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open IMU file '" + path.string() + "'");
  std::string line;
  if (!std::getline(is, line) || trim(line) != "frame,roll_rad,pitch_rad") {
    throw DataError(path.string() + ":1: expected header 'frame,roll_rad,pitch_rad'");
  }
  std::map<int, ImuSample> out;
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string f, r, p, extra;
    if (!std::getline(ss, f, ',') || !std::getline(ss, r, ',') || !std::getline(ss, p, ',') || std::getline(ss, extra, ',')) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": expected 3 fields");
    }
    int frame = 0;
    const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), frame);
    if (ec != std::errc{} || ptr != f.data() + f.size()) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": bad frame id '" + f + "'");
    }
    if (out.count(frame)) throw DataError(path.string() + ":" + std::to_string(lineno) + ": duplicate frame " + f);
    out[frame] = {parse_double(r, path, lineno), parse_double(p, path, lineno)};
  }
  return out;
}

void write_imu_csv(const std::filesystem::path& path, const std::map<int, ImuSample>& samples) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot write '" + path.string() + "'");
  os << "frame,roll_rad,pitch_rad\n";
  for (const auto& [frame, s] : samples) os << frame << ',' << fmt_double(s.roll) << ',' << fmt_double(s.pitch) << '\n';
}

}  // namespace wasr
