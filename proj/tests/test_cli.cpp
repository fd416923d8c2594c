#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "colonnet/cli.hpp"

namespace fs = std::filesystem;

namespace {

struct CliResult {
  int code = 0;
  std::string out;
  std::string err;
};

CliResult run(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.push_back("colonnet");
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  auto* old_out = std::cout.rdbuf(out.rdbuf());
  auto* old_err = std::cerr.rdbuf(err.rdbuf());
  CliResult result;
  result.code = colonnet::run_cli(static_cast<int>(argv.size()), argv.data());
  std::cout.rdbuf(old_out);
  std::cerr.rdbuf(old_err);
  result.out = out.str();
  result.err = err.str();
  return result;
}

struct Workspace {
  fs::path root;
  Workspace() : root(fs::temp_directory_path() / "colonnet_cli_test") {
    std::error_code ec;
    fs::remove_all(root, ec);
    fs::create_directories(root);
  }
  ~Workspace() {
    std::error_code ec;
    fs::remove_all(root, ec);
  }
  std::string dir(const std::string& name) const { return (root / name).string(); }
};

void write_file(const std::string& path, const std::string& text) {
  std::ofstream os(path);
  REQUIRE(os.good());
  os << text;
}

std::string last_line(const std::string& text) {
  std::istringstream is(text);
  std::string line, last;
  while (std::getline(is, line)) {
    if (!line.empty()) last = line;
  }
  return last;
}

std::string tiny_train_config(const std::string& dataset, const std::string& out_dir,
                              int seed = 1) {
  std::ostringstream os;
  os << "# smallest end-to-end run\n"
     << "seed = " << seed << "\n"
     << "dataset.root = " << dataset << "\n"
     << "output.dir = " << out_dir << "\n"
     << "model.input_size = 32\n"
     << "backbone.name = tiny\n"
     << "heads.cls_widths = 8\n"
     << "heads.det_widths = 8\n"
     << "unet.depth = 2\n"
     << "unet.base_channels = 2\n"
     << "train.learning_rate = 0.001\n"
     << "train.batch_size = 4\n"
     << "train.detection_epochs = 1\n"
     << "train.classification_epochs = 1\n"
     << "train.segmentation_epochs = 1\n"
     << "train.train_fraction = 0.75\n";
  return os.str();
}

int make_dataset(const Workspace& ws, const std::string& name, int n,
                 std::uint64_t seed) {
  CliResult r = run({"synth", "--n", std::to_string(n), "--size", "32", "--fraction",
                     "0.5", "--seed", std::to_string(seed), "--out", ws.dir(name)});
  REQUIRE(r.code == 0);
  return r.code;
}

}  // namespace

TEST_CASE("help lists subcommands and config keys") {
  CliResult r = run({"--help"});
  CHECK(r.code == 0);
  CHECK(r.out.find("synth") != std::string::npos);
  CHECK(r.out.find("train") != std::string::npos);
  CHECK(r.out.find("evaluate") != std::string::npos);
  CHECK(r.out.find("predict") != std::string::npos);
  CHECK(r.out.find("model.input_size") != std::string::npos);
  CHECK(r.out.find("train.learning_rate") != std::string::npos);
  CHECK(r.out.find("COLONNET_SEED") != std::string::npos);
}

TEST_CASE("a subcommand is required") {
  CliResult r = run({});
  CHECK(r.code != 0);
}

TEST_CASE("synth writes a loadable dataset") {
  Workspace ws;
  CliResult r = run({"synth", "--n", "8", "--size", "24", "--fraction", "0.5",
                     "--seed", "3", "--out", ws.dir("data")});
  CHECK(r.code == 0);
  CHECK(r.out.find("wrote 8 samples (4 bleeding)") != std::string::npos);
  CHECK(fs::is_regular_file(fs::path(ws.dir("data")) / "annotations.csv"));
  std::size_t images = 0;
  for (const auto& entry :
       fs::directory_iterator(fs::path(ws.dir("data")) / "images")) {
    images += entry.is_regular_file() ? 1 : 0;
  }
  CHECK(images == 8);

  CliResult bad = run({"synth", "--n", "1", "--out", ws.dir("bad")});
  CHECK(bad.code == 1);
  CHECK(bad.err.find("n_samples") != std::string::npos);
}

TEST_CASE("train produces a checkpoint and an ordered report") {
  Workspace ws;
  make_dataset(ws, "data", 12, 5);
  const std::string config_path = ws.dir("run.cfg");
  write_file(config_path, tiny_train_config(ws.dir("data"), ws.dir("out")));

  CliResult r = run({"train", config_path});
  CHECK(r.code == 0);
  const fs::path checkpoint = fs::path(ws.dir("out")) / "checkpoint.bin";
  const fs::path report_path = fs::path(ws.dir("out")) / "report.json";
  REQUIRE(fs::is_regular_file(checkpoint));
  REQUIRE(fs::is_regular_file(report_path));

  std::ifstream is(report_path);
  const nlohmann::json report = nlohmann::json::parse(is);
  REQUIRE(report.at("stages").size() == 3);
  CHECK(report.at("stages")[0].at("name") == "detection");
  CHECK(report.at("stages")[1].at("name") == "classification");
  CHECK(report.at("stages")[2].at("name") == "segmentation");
  CHECK(report.at("seed") == 1);
  CHECK(report.contains("validation"));

  SUBCASE("evaluate scores the written checkpoint") {
    CliResult ev = run({"evaluate", checkpoint.string(), ws.dir("data"), "--json",
                        ws.dir("metrics.json")});
    CHECK(ev.code == 0);
    CHECK(ev.out.find("Classification") != std::string::npos);
    CHECK(ev.out.find("Dice-Coeff.") != std::string::npos);
    const nlohmann::json line = nlohmann::json::parse(last_line(ev.out));
    CHECK(line.at("classification").contains("accuracy"));
    CHECK(line.at("classification").contains("recall"));
    CHECK(line.at("classification").contains("f1"));
    CHECK(line.at("detection").contains("avg_precision"));
    CHECK(line.at("detection").contains("mean_box_iou"));
    CHECK(line.at("segmentation").contains("dice"));
    CHECK(line.at("segmentation").contains("mask_iou"));

    std::ifstream jf(ws.dir("metrics.json"));
    const nlohmann::json from_file = nlohmann::json::parse(jf);
    CHECK(from_file == line);
  }

  SUBCASE("predict writes the three artifacts and a json line") {
    const std::string image =
        (fs::path(ws.dir("data")) / "images" / "synth_00000.png").string();
    CliResult pr =
        run({"predict", checkpoint.string(), image, "--out", ws.dir("pred")});
    CHECK(pr.code == 0);
    CHECK(fs::is_regular_file(fs::path(ws.dir("pred")) / "synth_00000_mask.png"));
    CHECK(fs::is_regular_file(fs::path(ws.dir("pred")) / "synth_00000_bbox.png"));
    CHECK(fs::is_regular_file(fs::path(ws.dir("pred")) / "synth_00000_cam.png"));
    const fs::path json_path = fs::path(ws.dir("pred")) / "synth_00000_prediction.json";
    REQUIRE(fs::is_regular_file(json_path));

    std::ifstream jf(json_path);
    const nlohmann::json line = nlohmann::json::parse(jf);
    CHECK(line.at("id") == "synth_00000");
    const double prob = line.at("bleed_prob").get<double>();
    CHECK(prob >= 0.0);
    CHECK(prob <= 1.0);
    const int label = line.at("label").get<int>();
    CHECK((label == 0 || label == 1));
    REQUIRE(line.at("bbox").size() == 4);
    for (const auto& v : line.at("bbox")) {
      CHECK(v.get<double>() >= 0.0);
      CHECK(v.get<double>() <= 1.0);
    }
    CHECK(nlohmann::json::parse(last_line(pr.out)) == line);
  }
}

TEST_CASE("unknown config keys fail with exit code 2") {
  Workspace ws;
  const std::string config_path = ws.dir("bad.cfg");
  write_file(config_path, "bakbone.name = tiny\n");
  CliResult r = run({"train", config_path});
  CHECK(r.code == 2);
  CHECK(r.err.find("config error") != std::string::npos);
  CHECK(r.err.find("bakbone.name") != std::string::npos);
}

TEST_CASE("missing dataset root fails as a config error") {
  Workspace ws;
  const std::string config_path = ws.dir("incomplete.cfg");
  write_file(config_path, "backbone.name = tiny\nmodel.input_size = 32\nunet.depth = 2\n");
  CliResult r = run({"train", config_path});
  CHECK(r.code == 2);
  CHECK(r.err.find("dataset.root") != std::string::npos);
}

TEST_CASE("the seed env var overrides the config") {
  Workspace ws;
  make_dataset(ws, "data", 8, 6);
  const std::string config_path = ws.dir("run.cfg");
  write_file(config_path, tiny_train_config(ws.dir("data"), ws.dir("out"), 1));

  ::setenv("COLONNET_SEED", "99", 1);
  CliResult r = run({"train", config_path});
  ::unsetenv("COLONNET_SEED");
  CHECK(r.code == 0);

  std::ifstream is(fs::path(ws.dir("out")) / "report.json");
  const nlohmann::json report = nlohmann::json::parse(is);
  CHECK(report.at("seed") == 99);
}

TEST_CASE("evaluate rejects a bad checkpoint with exit code 1") {
  Workspace ws;
  make_dataset(ws, "data", 4, 7);
  const std::string fake = ws.dir("fake.bin");
  write_file(fake, "garbage");
  CliResult r = run({"evaluate", fake, ws.dir("data")});
  CHECK(r.code == 1);
  CHECK(r.err.find("not a checkpoint") != std::string::npos);
}
