#include <doctest.h>

#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "test_util.hpp"
#include "wasr/cli.hpp"
#include "wasr/dataset.hpp"

using namespace wasr;

namespace {

struct Run {
  int code = 0;
  std::string out;
};

Run run(std::vector<std::string> args) {
  std::ostringstream buf;
  std::streambuf* old = std::cout.rdbuf(buf.rdbuf());
  Run r;
  r.code = run_cli(args);
  std::cout.rdbuf(old);
  r.out = buf.str();
  return r;
}

std::vector<std::string> lines(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);)
    if (!l.empty()) out.push_back(l);
  return out;
}

nlohmann::json read_json(const fs::path& p) {
  std::ifstream in(p);
  return nlohmann::json::parse(in);
}

const std::vector<std::string> kSmallNet{"--channels-res2", "4", "--channels-res3", "4", "--channels-res4", "4",
                                          "--channels-res5", "4", "--aspp-rates", "1,2"};

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("synth") {
  const auto dir = test::scratch_dir("cli_synth");
  const Run a = run({"synth", "--count", "10", "--seed", "3", "--out", (dir / "a").string()});
  REQUIRE(a.code == kExitOk);
  int images = 0, masks = 0;
  for (const auto& e : fs::directory_iterator(dir / "a" / "images")) images += e.path().extension() == ".png";
  for (const auto& e : fs::directory_iterator(dir / "a" / "masks")) masks += e.path().extension() == ".png";
  CHECK(images == 10);
  CHECK(masks == 10);
  const Run b = run({"synth", "--count", "10", "--seed", "3", "--out", (dir / "b").string()});
  CHECK(manifest_hash(dir / "a") == manifest_hash(dir / "b"));
  CHECK(a.out.find(manifest_hash(dir / "a")) != std::string::npos);

  CHECK(run({"synth", "--count", "0", "--out", (dir / "c").string()}).code == kExitUsage);
  CHECK(run({"synth", "--bogus-flag", "--out", (dir / "d").string()}).code == kExitUsage);
  CHECK(run({"frobnicate"}).code == kExitUsage);
}

TEST_CASE("eval counts mode reproduces F") {
  const Run r = run({"eval", "--counts", "6166,679,151"});
  CHECK(r.code == kExitOk);
  CHECK(r.out.find("93.7") != std::string::npos);
  CHECK(run({"eval", "--counts", "1,2"}).code == kExitUsage);
}

TEST_CASE("ground truth through infer and eval") {
  const auto dir = test::scratch_dir("cli_gt");
  REQUIRE(run({"synth", "--count", "6", "--seed", "8", "--out", (dir / "data").string()}).code == kExitOk);
  REQUIRE(run({"infer", "--gt-labels", "--data", (dir / "data").string(), "--out", (dir / "gtpred").string()}).code ==
          kExitOk);
  CHECK(lines(dir / "gtpred" / "detections.jsonl").size() == 6);
  CHECK(lines(dir / "gtpred" / "edge.jsonl").size() == 6);
  REQUIRE(run({"eval", "--pred", (dir / "gtpred").string(), "--gt", (dir / "data").string(), "--out",
               (dir / "ev").string()})
              .code == kExitOk);
  const auto rep = read_json(dir / "ev" / "report.json");
  CHECK(rep["overall"]["f_measure"].get<double>() == 100.0);

  // Empty prediction set.
  fs::create_directories(dir / "empty");
  std::ofstream(dir / "empty" / "detections.jsonl").close();
  std::ofstream(dir / "empty" / "edge.jsonl").close();
  REQUIRE(run({"eval", "--pred", (dir / "empty").string(), "--gt", (dir / "data").string(), "--out",
               (dir / "ev_empty").string()})
              .code == kExitOk);
  const auto empty = read_json(dir / "ev_empty" / "report.json");
  CHECK(empty["overall"]["f_measure"].is_null());
  const auto gt = read_ground_truth(dir / "data");
  std::int64_t boxes = 0;
  for (const auto& [f, g] : gt.frames) boxes += static_cast<std::int64_t>(g.boxes.size());
  CHECK(empty["overall"]["fn"].get<std::int64_t>() == boxes);
  CHECK(empty["overall"]["tp"].get<std::int64_t>() == 0);

  // Predictions for frames without ground truth are a data error.
  std::ofstream(dir / "empty" / "detections.jsonl") << "{\"frame\": 999, \"detections\": []}\n";
  std::ofstream(dir / "empty" / "edge.jsonl") << "{\"frame\": 999, \"edge\": []}\n";
  CHECK(run({"eval", "--pred", (dir / "empty").string(), "--gt", (dir / "data").string()}).code == kExitData);
}

TEST_CASE("train then infer") {
  const auto dir = test::scratch_dir("cli_train");
  REQUIRE(run({"synth", "--count", "4", "--seed", "9", "--out", (dir / "data").string()}).code == kExitOk);
  std::vector<std::string> args{"train", "--data", (dir / "data").string(), "--out", (dir / "run").string(),
                                "--epochs", "1", "--lambda1", "0"};
  args.insert(args.end(), kSmallNet.begin(), kSmallNet.end());
  REQUIRE(run(args).code == kExitOk);
  const auto ckpt = dir / "run" / "checkpoints" / "epoch_001";
  CHECK(fs::exists(ckpt));
  const auto log = lines(dir / "run" / "loss.csv");
  REQUIRE(log.size() == 5);
  for (std::size_t i = 1; i < log.size(); ++i) {
    std::stringstream ss(log[i]);
    std::vector<std::string> cells;
    for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
    REQUIRE(cells.size() == 7);
    CHECK(std::stod(cells[3]) == 0.0);
  }

  REQUIRE(run({"infer", "--checkpoint", ckpt.string(), "--data", (dir / "data").string(), "--out",
               (dir / "pred").string(), "--overlay"})
              .code == kExitOk);
  CHECK(lines(dir / "pred" / "detections.jsonl").size() == 4);
  int overlays = 0;
  for (const auto& e : fs::directory_iterator(dir / "pred" / "overlays")) overlays += e.is_regular_file();
  CHECK(overlays == 4);
  for (const auto& e : fs::directory_iterator(dir / "pred" / "masks")) {
    for (Label l : read_label_png(e.path()).cells) CHECK((l == Label::water || l == Label::sky || l == Label::obstacle));
  }

  REQUIRE(run({"infer", "--checkpoint", ckpt.string(), "--data", (dir / "data").string(), "--out",
               (dir / "pred_noimu").string(), "--no-imu"})
              .code == kExitOk);
  CHECK(lines(dir / "pred_noimu" / "config.txt").size() > 10);
  bool blind = false;
  for (const auto& l : lines(dir / "pred_noimu" / "config.txt")) blind = blind || l == "use_imu=false";
  CHECK(blind);

  // Data at another resolution does not fit the checkpoint.
  REQUIRE(run({"synth", "--count", "2", "--input-h", "64", "--input-w", "96", "--focal-px", "64", "--out",
               (dir / "small").string()})
              .code == kExitOk);
  CHECK(run({"infer", "--checkpoint", ckpt.string(), "--data", (dir / "small").string(), "--out",
             (dir / "pred_small").string()})
            .code == kExitData);
}

TEST_CASE("gradcheck exit codes") {
  const Run ok = run({"gradcheck"});
  CHECK(ok.code == kExitOk);
  CHECK(ok.out.find("FAIL") == std::string::npos);
  const Run bad = run({"gradcheck", "--inject-fault", "conv2d"});
  CHECK(bad.code == kExitNumeric);
  CHECK(bad.out.find("FAIL") != std::string::npos);
  CHECK(run({"gradcheck", "--inject-fault", "no_such_op"}).code == kExitUsage);
}

}  // TEST_SUITE("cli")
