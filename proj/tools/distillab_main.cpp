#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "distillab/datagen.hpp"
#include "distillab/geometry.hpp"
#include "distillab/hash.hpp"
#include "distillab/losses.hpp"
#include "distillab/metrics.hpp"
#include "distillab/net.hpp"
#include "distillab/pipeline.hpp"
#include "distillab/rng.hpp"

namespace fs = std::filesystem;
using namespace distillab;

namespace {

bool g_verbose = false;

void note(const std::string& message) {
  if (g_verbose) std::cerr << "[distillab] " << message << "\n";
}

// Relative output dirs land under DISTILLAB_OUTPUT_ROOT when it is set.
fs::path resolve_output_dir(const std::string& out) {
  fs::path path(out);
  if (path.is_relative()) {
    if (const char* root = std::getenv("DISTILLAB_OUTPUT_ROOT")) {
      path = fs::path(root) / path;
    }
  }
  fs::create_directories(path);
  return path;
}

std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

// minimal ordered-JSON description for subcommands that take flags, not a
// config file; feeds the manifest's config hash
std::string flags_config_text(
    const std::vector<std::pair<std::string, std::string>>& kv) {
  std::ostringstream out;
  out << "{\n";
  for (size_t i = 0; i < kv.size(); ++i) {
    out << "  \"" << kv[i].first << "\": " << kv[i].second;
    if (i + 1 < kv.size()) out << ",";
    out << "\n";
  }
  out << "}\n";
  return out.str();
}

std::vector<uint64_t> override_seeds(const ExperimentConfig& cfg,
                                     int seeds_flag) {
  if (seeds_flag <= 0) return cfg.seeds;
  std::vector<uint64_t> seeds;
  for (int s = 1; s <= seeds_flag; ++s) seeds.push_back(static_cast<uint64_t>(s));
  return seeds;
}

int run_gen_data(const std::string& config_path, const std::string& out,
                 int64_t seed_flag) {
  ExperimentConfig cfg = load_experiment_config(config_path);
  const fs::path outdir = resolve_output_dir(out);
  const uint64_t seed =
      seed_flag >= 0 ? static_cast<uint64_t>(seed_flag) : cfg.seeds.front();

  if (cfg.data.source != DataConfig::Source::kClusters) {
    throw DomainError(ErrorKind::kSpecError,
                      "gen-data needs a cluster data source");
  }
  ClusterSpec spec = cfg.data.clusters;
  spec.seed = mix_seed(mix_seed(spec.seed, 1), seed);
  LabeledDataset d = gen_clusters(spec);
  if (cfg.data.curate) {
    d = curate_subset(d, cfg.data.curate->classes, mix_seed(seed, 2));
  }
  if (cfg.data.long_tail) {
    LongTailSpec lt = *cfg.data.long_tail;
    lt.seed = mix_seed(seed, 4);
    d = pareto_resample(d, lt);
  }
  write_dataset_csv(outdir / "dataset.csv", d, &spec);
  note("wrote " + (outdir / "dataset.csv").string() + " with " +
       std::to_string(d.size()) + " rows");
  write_manifest(outdir, resolved_config_text(cfg));
  return 0;
}

int run_train(const std::string& config_path, const std::string& out,
              int64_t seed_flag, double alpha_flag) {
  ExperimentConfig cfg = load_experiment_config(config_path);
  const fs::path outdir = resolve_output_dir(out);
  const uint64_t seed =
      seed_flag >= 0 ? static_cast<uint64_t>(seed_flag) : cfg.seeds.front();
  const double alpha = alpha_flag >= 0.0 ? alpha_flag : cfg.teacher_alpha;

  SplitDataset data = build_cell_data(cfg.data, seed);
  note("training teacher (alpha=" + fixed6(alpha) + ", seed=" +
       std::to_string(seed) + ")");
  TeacherRun teacher = train_teacher(cfg, seed, alpha, data);

  save_checkpoint(teacher.model, cfg.teacher.train.epochs,
                  outdir / "teacher.ckpt");
  {
    std::ofstream epochs(outdir / "teacher_epochs.csv");
    epochs << "epoch,train_loss,val_top1,val_top" << teacher.log.topk << "\n";
    for (size_t e = 0; e < teacher.log.epochs.size(); ++e) {
      const EpochStat& s = teacher.log.epochs[e];
      epochs << e << "," << fixed6(s.train_loss) << "," << fixed6(s.val_top1)
             << "," << fixed6(s.val_topk) << "\n";
    }
  }
  write_probability_dump(outdir / "teacher_probs.csv", teacher.train_probs,
                         data.train.labels);
  {
    std::ofstream report(outdir / "stability.txt");
    write_stability_report(report, *teacher.log.stability);
  }
  if (teacher.log.geometry) {
    const GeometryReport& geo = *teacher.log.geometry;
    write_points_csv(outdir / "points.csv", geo.points_2d, geo.labels);
    write_scatter_svg(outdir / "scatter.svg", geo.points_2d, geo.labels);
  }
  std::cout << "teacher val_top1 " << fixed6(teacher.log.final_val_top1())
            << " train_loss " << fixed6(teacher.log.final_train_loss())
            << " stability_eq2 "
            << fixed6(teacher.log.stability->stability_eq2) << "\n";
  write_manifest(outdir, resolved_config_text(cfg));
  return 0;
}

int run_distill(const std::string& config_path, const std::string& teacher_path,
                const std::string& out, int64_t seed_flag) {
  ExperimentConfig cfg = load_experiment_config(config_path);
  const fs::path outdir = resolve_output_dir(out);
  const uint64_t seed =
      seed_flag >= 0 ? static_cast<uint64_t>(seed_flag) : cfg.seeds.front();

  Checkpoint teacher = load_checkpoint(teacher_path);
  SplitDataset data = build_cell_data(cfg.data, seed);
  note("distilling student (lambda=" + fixed6(cfg.distill.lambda) +
       ", T=" + fixed6(cfg.distill.temperature) + ")");
  StudentRun student =
      distill_student(teacher.model, cfg, seed, cfg.distill, data);

  save_checkpoint(student.model, cfg.student.train.epochs,
                  outdir / "student.ckpt");
  {
    std::ofstream epochs(outdir / "student_epochs.csv");
    epochs << "epoch,train_loss,val_top1,val_top" << student.log.topk << "\n";
    for (size_t e = 0; e < student.log.epochs.size(); ++e) {
      const EpochStat& s = student.log.epochs[e];
      epochs << e << "," << fixed6(s.train_loss) << "," << fixed6(s.val_top1)
             << "," << fixed6(s.val_topk) << "\n";
    }
  }
  std::cout << "student val_top1 " << fixed6(student.log.final_val_top1())
            << " train_loss " << fixed6(student.log.final_train_loss())
            << "\n";
  write_manifest(outdir, resolved_config_text(cfg));
  return 0;
}

int run_evaluate(const std::string& checkpoint_path, const std::string& data_path,
                 std::vector<int> topk, const std::string& out) {
  const fs::path outdir = resolve_output_dir(out);
  Checkpoint ckpt = load_checkpoint(checkpoint_path);
  LabeledDataset d = read_dataset_csv(data_path);
  if (topk.empty()) topk = {1};
  auto acc = evaluate(ckpt.model, d.features, d.labels, topk);

  {
    std::ofstream report(outdir / "evaluate.txt");
    for (const auto& [k, v] : acc) {
      report << "top" << k << " " << fixed6(v) << "\n";
      std::cout << "top" << k << " " << fixed6(v) << "\n";
    }
  }
  std::ostringstream topk_json;
  topk_json << "[";
  for (size_t i = 0; i < topk.size(); ++i) {
    topk_json << topk[i] << (i + 1 < topk.size() ? "," : "");
  }
  topk_json << "]";
  write_manifest(outdir,
                 flags_config_text({{"subcommand", "\"evaluate\""},
                                    {"checkpoint", "\"" + checkpoint_path + "\""},
                                    {"data", "\"" + data_path + "\""},
                                    {"topk", topk_json.str()}}));
  return 0;
}

int run_metrics(const std::string& probs_path, const std::string& out) {
  const fs::path outdir = resolve_output_dir(out);
  ProbabilityDump dump = read_probability_dump(probs_path);
  GroupedProbs grouped =
      GroupedProbs::from_rows(dump.probs, dump.labels, dump.num_classes);
  StabilityReport report = compute_stability_report(grouped);
  {
    std::ofstream file(outdir / "metrics.txt");
    write_stability_report(file, report);
  }
  write_stability_report(std::cout, report);
  write_manifest(outdir,
                 flags_config_text({{"subcommand", "\"metrics\""},
                                    {"probs", "\"" + probs_path + "\""}}));
  return 0;
}

int run_geometry(const std::string& checkpoint_path, const std::string& data_path,
                 std::vector<int> pair, int reference, const std::string& out) {
  const fs::path outdir = resolve_output_dir(out);
  Checkpoint ckpt = load_checkpoint(checkpoint_path);
  LabeledDataset d = read_dataset_csv(data_path);
  if (pair.size() != 2) {
    throw DomainError(ErrorKind::kSpecError,
                      "--pair needs exactly two class indices");
  }
  int ref = reference;
  if (ref < 0) {
    ref = 0;
    while (ref == pair[0] || ref == pair[1]) ++ref;
  }
  GeometryReport report =
      analyze_geometry(ckpt.model, d.features, d.labels, pair[0], pair[1], ref);
  write_points_csv(outdir / "points.csv", report.points_2d, report.labels);
  write_scatter_svg(outdir / "scatter.svg", report.points_2d, report.labels);
  {
    std::ofstream file(outdir / "geometry.txt");
    file << "pair " << report.class_a << " " << report.class_b
         << " reference " << report.reference_class << " dc_full "
         << fixed6(report.dc_full) << " dc_2d " << fixed6(report.dc_2d)
         << " spread_a " << fixed6(report.spread_a_full) << " spread_b "
         << fixed6(report.spread_b_full) << "\n";
  }
  std::cout << "dc_full " << fixed6(report.dc_full) << " dc_2d "
            << fixed6(report.dc_2d) << " spread_a "
            << fixed6(report.spread_a_full) << " spread_b "
            << fixed6(report.spread_b_full) << "\n";
  write_manifest(
      outdir,
      flags_config_text({{"subcommand", "\"geometry\""},
                         {"checkpoint", "\"" + checkpoint_path + "\""},
                         {"data", "\"" + data_path + "\""},
                         {"pair", "[" + std::to_string(pair[0]) + "," +
                                      std::to_string(pair[1]) + "]"},
                         {"reference", std::to_string(ref)}}));
  return 0;
}

int run_curves(std::vector<double> alphas, double zmin, double zmax, int steps,
               const std::string& out) {
  const fs::path outdir = resolve_output_dir(out);
  if (alphas.empty()) alphas = {0.1};
  if (steps < 1) {
    throw DomainError(ErrorKind::kSpecError, "steps must be >= 1");
  }
  if (!(zmin <= zmax)) {
    throw DomainError(ErrorKind::kSpecError, "zmin must not exceed zmax");
  }
  Vec grid(static_cast<size_t>(steps));
  for (int i = 0; i < steps; ++i) {
    grid[static_cast<size_t>(i)] =
        steps == 1 ? zmin : zmin + (zmax - zmin) * i / (steps - 1);
  }
  {
    std::ofstream file(outdir / "curves.csv");
    file << "alpha,z,loss\n";
    for (double alpha : alphas) {
      auto curve = smoothed_logistic_curve(grid, alpha);
      for (const auto& [z, loss] : curve) {
        file << fixed6(alpha) << "," << fixed6(z) << "," << fixed6(loss)
             << "\n";
      }
    }
  }
  std::ostringstream alphas_json;
  alphas_json << "[";
  for (size_t i = 0; i < alphas.size(); ++i) {
    alphas_json << alphas[i] << (i + 1 < alphas.size() ? "," : "");
  }
  alphas_json << "]";
  write_manifest(outdir,
                 flags_config_text({{"subcommand", "\"curves\""},
                                    {"alpha", alphas_json.str()},
                                    {"zmin", std::to_string(zmin)},
                                    {"zmax", std::to_string(zmax)},
                                    {"steps", std::to_string(steps)}}));
  return 0;
}

int run_matrix_cmd(const std::string& config_path, const std::string& out,
                   int seeds_flag, int jobs) {
  ExperimentConfig cfg = load_experiment_config(config_path);
  cfg.seeds = override_seeds(cfg, seeds_flag);
  const fs::path outdir = resolve_output_dir(out);
  note("running matrix with " + std::to_string(cfg.seeds.size()) +
       " seeds, jobs=" + std::to_string(jobs));
  MatrixReport report = run_matrix(cfg, jobs, outdir);
  write_matrix_summary(std::cout, report, cfg);
  write_manifest(outdir, resolved_config_text(cfg));
  return 0;
}

int run_report(const std::string& config_path, const std::string& dir) {
  ExperimentConfig cfg = load_experiment_config(config_path);
  const fs::path outdir = resolve_output_dir(dir);
  MatrixReport report;
  report.cells = read_cells_csv(outdir / "cells.csv");
  report.config_hash = hex_string(fnv1a(resolved_config_text(cfg)));
  write_matrix_summary(std::cout, report, cfg);
  {
    std::ofstream file(outdir / "report.txt");
    write_matrix_summary(file, report, cfg);
  }
  write_manifest(outdir, resolved_config_text(cfg));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"label smoothing / knowledge distillation laboratory"};
  app.require_subcommand(1);
  app.add_flag("-v,--verbose", g_verbose, "progress notes on stderr");

  std::string config_path;
  std::string out = "out";
  int64_t seed_flag = -1;
  double alpha_flag = -1.0;
  std::string checkpoint_path;
  std::string teacher_path;
  std::string data_path;
  std::string probs_path;
  std::vector<int> topk;
  std::vector<int> pair;
  int reference = -1;
  std::vector<double> alphas;
  double zmin = -10.0;
  double zmax = 10.0;
  int steps = 200;
  int seeds_flag = 0;
  int jobs = 1;

  CLI::App* gen = app.add_subcommand("gen-data", "generate a dataset CSV");
  gen->add_option("--config", config_path, "experiment config (JSON)")
      ->required();
  gen->add_option("--out", out, "output directory");
  gen->add_option("--seed", seed_flag, "seed override");

  CLI::App* train = app.add_subcommand("train", "train a teacher");
  train->add_option("--config", config_path)->required();
  train->add_option("--out", out);
  train->add_option("--seed", seed_flag);
  train->add_option("--alpha", alpha_flag, "smoothing override");

  CLI::App* distill = app.add_subcommand("distill", "distill a student");
  distill->add_option("--config", config_path)->required();
  distill->add_option("--teacher", teacher_path, "teacher checkpoint")
      ->required();
  distill->add_option("--out", out);
  distill->add_option("--seed", seed_flag);

  CLI::App* eval = app.add_subcommand("evaluate", "top-k accuracy");
  eval->add_option("--checkpoint", checkpoint_path)->required();
  eval->add_option("--data", data_path)->required();
  eval->add_option("--topk", topk, "k values (default 1)");
  eval->add_option("--out", out);

  CLI::App* metrics = app.add_subcommand("metrics", "stability report");
  metrics->add_option("--probs", probs_path, "probability dump CSV")
      ->required();
  metrics->add_option("--out", out);

  CLI::App* geometry =
      app.add_subcommand("geometry", "penultimate-plane analysis");
  geometry->add_option("--checkpoint", checkpoint_path)->required();
  geometry->add_option("--data", data_path)->required();
  geometry->add_option("--pair", pair, "similar pair, two class indices")
      ->required();
  geometry->add_option("--reference", reference, "reference class");
  geometry->add_option("--out", out);

  CLI::App* curves = app.add_subcommand("curves", "smoothed logistic curve");
  curves->add_option("--alpha", alphas, "smoothing coefficients");
  curves->add_option("--zmin", zmin);
  curves->add_option("--zmax", zmax);
  curves->add_option("--steps", steps);
  curves->add_option("--out", out);

  CLI::App* matrix = app.add_subcommand("matrix", "full seed matrix");
  matrix->add_option("--config", config_path)->required();
  matrix->add_option("--out", out);
  matrix->add_option("--seeds", seeds_flag, "use seeds 1..N");
  matrix->add_option("--jobs", jobs, "worker pool size");

  CLI::App* report = app.add_subcommand("report", "re-summarize a matrix dir");
  report->add_option("--config", config_path)->required();
  report->add_option("--dir", out, "matrix output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (gen->parsed()) return run_gen_data(config_path, out, seed_flag);
    if (train->parsed()) return run_train(config_path, out, seed_flag, alpha_flag);
    if (distill->parsed())
      return run_distill(config_path, teacher_path, out, seed_flag);
    if (eval->parsed())
      return run_evaluate(checkpoint_path, data_path, topk, out);
    if (metrics->parsed()) return run_metrics(probs_path, out);
    if (geometry->parsed())
      return run_geometry(checkpoint_path, data_path, pair, reference, out);
    if (curves->parsed()) return run_curves(alphas, zmin, zmax, steps, out);
    if (matrix->parsed())
      return run_matrix_cmd(config_path, out, seeds_flag, jobs);
    if (report->parsed()) return run_report(config_path, out);
  } catch (const DomainError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
