#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"

namespace fs = std::filesystem;

namespace {

const char* kCli = DISTILLAB_CLI_PATH;

struct RunResult {
  int exit_code;
  std::string output;  // stdout + stderr
};

RunResult run(const std::string& args) {
  const fs::path capture =
      fs::temp_directory_path() / "distillab_cli_capture.txt";
  const std::string command =
      std::string(kCli) + " " + args + " > " + capture.string() + " 2>&1";
  const int raw = std::system(command.c_str());
  RunResult result;
  result.exit_code = WEXITSTATUS(raw);
  std::ifstream in(capture);
  std::stringstream ss;
  ss << in.rdbuf();
  result.output = ss.str();
  return result;
}

int count_lines(const fs::path& p) {
  std::ifstream in(p);
  int n = 0;
  std::string line;
  while (std::getline(in, line)) ++n;
  return n;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

fs::path write_tiny_config(const fs::path& dir) {
  const fs::path path = dir / "tiny.json";
  std::ofstream out(path);
  out << R"({
  "data": {
    "source": "clusters",
    "clusters": {"classes": 3, "dim": 6, "sigma": 1.0, "similar_pair": [0, 1],
                 "delta_near": 2.0, "delta_far": 8.0, "per_class": 25, "seed": 1},
    "val_fraction": 0.2
  },
  "teacher": {"hidden": [12],
              "train": {"epochs": 4, "batch_size": 15, "learning_rate": 0.1,
                         "momentum": 0.9, "weight_decay": 0.0}},
  "teacher_alpha": 0.1,
  "student": {"hidden": [8],
              "train": {"epochs": 4, "batch_size": 15, "learning_rate": 0.1,
                         "momentum": 0.9, "weight_decay": 0.0}},
  "distill": {"lambda": 0.0, "temperature": 1.0},
  "seeds": [1],
  "eval_topk": 2
})";
  return path;
}

}  // namespace

TEST_CASE("curves subcommand emits the requested grid") {
  const fs::path dir = fresh_dir("distillab_cli_curves");
  RunResult r = run("curves --alpha 0.1 --zmin -10 --zmax 10 --steps 200 --out " +
                    dir.string());
  CHECK(r.exit_code == 0);
  const fs::path csv = dir / "curves.csv";
  REQUIRE(fs::exists(csv));
  CHECK(count_lines(csv) == 201);  // header + 200 rows

  std::ifstream in(csv);
  std::string header;
  std::getline(in, header);
  CHECK(header == "alpha,z,loss");
  std::string first;
  std::getline(in, first);
  CHECK(first == "0.100000,-10.000000,9.000045");

  // reruns with identical flags produce an identical manifest
  const std::string manifest_before = slurp(dir / "manifest.txt");
  RunResult again = run("curves --alpha 0.1 --zmin -10 --zmax 10 --steps 200 --out " +
                        dir.string());
  CHECK(again.exit_code == 0);
  CHECK(slurp(dir / "manifest.txt") == manifest_before);
  fs::remove_all(dir);
}

TEST_CASE("usage errors exit with 2, domain errors with 1") {
  RunResult unknown = run("no-such-subcommand");
  CHECK(unknown.exit_code == 2);

  const fs::path dir = fresh_dir("distillab_cli_errors");
  const fs::path bad = dir / "bad.json";
  {
    std::ofstream out(bad);
    out << R"({"teacher_alpha": 1.2})";
  }
  RunResult domain = run("train --config " + bad.string() + " --out " +
                         (dir / "out").string());
  CHECK(domain.exit_code == 1);
  CHECK(domain.output.find("invalid-coefficient") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("gen-data, train, evaluate, metrics and geometry chain together") {
  const fs::path dir = fresh_dir("distillab_cli_chain");
  const fs::path cfg = write_tiny_config(dir);

  RunResult gen = run("gen-data --config " + cfg.string() + " --out " +
                      (dir / "data").string());
  CHECK(gen.exit_code == 0);
  const fs::path dataset = dir / "data" / "dataset.csv";
  REQUIRE(fs::exists(dataset));
  CHECK(count_lines(dataset) == 76);  // header + 3*25 rows
  CHECK(fs::exists(dir / "data" / "dataset.csv.spec"));
  CHECK(fs::exists(dir / "data" / "manifest.txt"));

  RunResult train = run("train --config " + cfg.string() + " --out " +
                        (dir / "teacher").string());
  CHECK(train.exit_code == 0);
  const fs::path ckpt = dir / "teacher" / "teacher.ckpt";
  REQUIRE(fs::exists(ckpt));
  CHECK(fs::exists(dir / "teacher" / "teacher_epochs.csv"));
  CHECK(fs::exists(dir / "teacher" / "teacher_probs.csv"));
  CHECK(fs::exists(dir / "teacher" / "stability.txt"));

  RunResult eval = run("evaluate --checkpoint " + ckpt.string() + " --data " +
                       dataset.string() + " --topk 1 --topk 3 --out " +
                       (dir / "eval").string());
  CHECK(eval.exit_code == 0);
  CHECK(eval.output.find("top1 ") != std::string::npos);
  CHECK(eval.output.find("top3 ") != std::string::npos);

  RunResult metrics = run("metrics --probs " +
                          (dir / "teacher" / "teacher_probs.csv").string() +
                          " --out " + (dir / "metrics").string());
  CHECK(metrics.exit_code == 0);
  CHECK(metrics.output.find("intra_stability_eq2") != std::string::npos);
  CHECK(fs::exists(dir / "metrics" / "metrics.txt"));

  RunResult geometry = run("geometry --checkpoint " + ckpt.string() +
                           " --data " + dataset.string() +
                           " --pair 0 --pair 1 --out " +
                           (dir / "geometry").string());
  CHECK(geometry.exit_code == 0);
  CHECK(geometry.output.find("dc_full") != std::string::npos);
  CHECK(fs::exists(dir / "geometry" / "points.csv"));
  CHECK(fs::exists(dir / "geometry" / "scatter.svg"));

  RunResult distill = run("distill --config " + cfg.string() + " --teacher " +
                          ckpt.string() + " --out " +
                          (dir / "student").string());
  CHECK(distill.exit_code == 0);
  CHECK(fs::exists(dir / "student" / "student.ckpt"));
  fs::remove_all(dir);
}

TEST_CASE("matrix and report subcommands") {
  const fs::path dir = fresh_dir("distillab_cli_matrix");
  const fs::path cfg = write_tiny_config(dir);
  RunResult matrix = run("matrix --config " + cfg.string() + " --seeds 2 --out " +
                         (dir / "m").string());
  CHECK(matrix.exit_code == 0);
  REQUIRE(fs::exists(dir / "m" / "cells.csv"));
  // 2 seeds x 2 alphas x 1 setting = 4 cells + header
  CHECK(count_lines(dir / "m" / "cells.csv") == 5);
  CHECK(fs::exists(dir / "m" / "summary.txt"));
  CHECK(fs::exists(dir / "m" / "manifest.txt"));

  RunResult report = run("report --config " + cfg.string() + " --dir " +
                         (dir / "m").string());
  CHECK(report.exit_code == 0);
  CHECK(report.output.find("matrix-summary v1") != std::string::npos);
  CHECK(fs::exists(dir / "m" / "report.txt"));
  fs::remove_all(dir);
}

TEST_CASE("output root environment variable reroutes relative dirs") {
  const fs::path root = fresh_dir("distillab_cli_root");
  const std::string command = "DISTILLAB_OUTPUT_ROOT=" + root.string() + " " +
                              std::string(kCli) +
                              " curves --alpha 0 --steps 3 --out nested "
                              "> /dev/null 2>&1";
  const int raw = std::system(command.c_str());
  CHECK(WEXITSTATUS(raw) == 0);
  CHECK(fs::exists(root / "nested" / "curves.csv"));
  fs::remove_all(root);
}
