#include "distillab/pipeline.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "distillab/rng.hpp"
#include "doctest.h"

using namespace distillab;
namespace fs = std::filesystem;

namespace {

ExperimentConfig tiny_config() {
  ExperimentConfig cfg;
  cfg.data.clusters.num_classes = 3;
  cfg.data.clusters.dim = 6;
  cfg.data.clusters.per_class = 30;
  cfg.data.clusters.delta_near = 2.0;
  cfg.data.clusters.delta_far = 8.0;
  cfg.data.val_fraction = 0.2;
  cfg.teacher.hidden = {16};
  cfg.teacher.train.epochs = 8;
  cfg.teacher.train.batch_size = 16;
  cfg.teacher.train.learning_rate = 0.1;
  cfg.teacher.train.decay_epochs = {};
  cfg.teacher.train.weight_decay = 0.0;
  cfg.student.hidden = {8};
  cfg.student.train = cfg.teacher.train;
  cfg.teacher_alpha = 0.1;
  cfg.eval_topk = 2;
  cfg.seeds = {1};
  return cfg;
}

Matrix logits_matrix(std::initializer_list<std::initializer_list<double>> rows) {
  Matrix m(static_cast<int>(rows.size()),
           static_cast<int>(rows.begin()->size()));
  int r = 0;
  for (const auto& row : rows) {
    int c = 0;
    for (double v : row) m.at(r, c++) = v;
    ++r;
  }
  return m;
}

// identity-ish model whose logits equal the input features
Model passthrough_model(int k) {
  NetworkSpec spec;
  spec.input_dim = k;
  spec.num_classes = k;
  spec.layers.push_back({k, k, Activation::kNone, false, 1.0});
  Model model = init_model(spec, 0);
  std::fill(model.weights[0].data.begin(), model.weights[0].data.end(), 0.0);
  for (int c = 0; c < k; ++c) model.weights[0].at(c, c) = 1.0;
  return model;
}

}  // namespace

TEST_CASE("evaluate counts top-k hits with index tie-breaking") {
  Model model = passthrough_model(3);
  Matrix features = logits_matrix({{3.0, 1.0, 2.0},    // ranking 0,2,1
                                   {1.0, 1.0, 1.0},    // ties: 0,1,2
                                   {0.0, 5.0, -1.0}}); // ranking 1,0,2
  std::vector<int> labels{0, 1, 2};
  std::vector<int> topk{1, 2, 3};
  auto acc = evaluate(model, features, labels, topk);
  // hand count: top-1 hits = example 0 only; top-2 adds example 1; top-3 all
  CHECK(acc.at(1) == doctest::Approx(1.0 / 3.0));
  CHECK(acc.at(2) == doctest::Approx(2.0 / 3.0));
  CHECK(acc.at(3) == 1.0);

  // uniform logits: only examples labeled class 0 count as top-1 hits
  Matrix flat(4, 3);
  std::vector<int> flat_labels{0, 1, 2, 0};
  auto flat_acc = evaluate(model, flat, flat_labels, std::vector<int>{1, 3});
  CHECK(flat_acc.at(1) == doctest::Approx(0.5));
  CHECK(flat_acc.at(3) == 1.0);

  CHECK_THROWS_WITH_AS(evaluate(model, flat, flat_labels, std::vector<int>{4}),
                       doctest::Contains("spec-error"), DomainError);
}

TEST_CASE("build_cell_data is deterministic and long-tails only the train side") {
  ExperimentConfig cfg = tiny_config();
  LongTailSpec lt;
  lt.max_per_class = 20;
  lt.min_per_class = 3;
  cfg.data.long_tail = lt;

  SplitDataset a = build_cell_data(cfg.data, 7);
  SplitDataset b = build_cell_data(cfg.data, 7);
  CHECK(a.train.features.data == b.train.features.data);
  CHECK(a.val.features.data == b.val.features.data);

  // validation stays balanced, the train side follows the pareto counts
  for (int c : a.val.class_counts()) CHECK(c == 6);
  auto train_counts = a.train.class_counts();
  CHECK(train_counts.front() == 20);
  CHECK(train_counts.back() == 3);

  SplitDataset c = build_cell_data(cfg.data, 8);
  CHECK(a.train.features.data != c.train.features.data);
}

TEST_CASE("training reaches 99% on separable two-class data") {
  ExperimentConfig cfg = tiny_config();
  cfg.data.clusters.num_classes = 2;
  cfg.data.clusters.dim = 4;
  cfg.data.clusters.per_class = 125;  // 100 train + 25 val per class
  // mean distance 8 sigma: the realized sample is linearly separable with
  // margin >= 2 sigma essentially always
  cfg.data.clusters.delta_near = 8.0;
  cfg.data.clusters.delta_far = 16.0;
  cfg.teacher.hidden = {16};
  cfg.teacher.train.epochs = 100;
  SplitDataset data = build_cell_data(cfg.data, 3);
  TeacherRun run = train_teacher(cfg, 3, 0.0, data, false);
  CHECK(run.log.final_train_accuracy >= 0.99);
  CHECK(run.log.epochs.size() == 100);
}

TEST_CASE("full-batch convex training has non-increasing loss") {
  // linear model + cross-entropy on fixed data is convex in the parameters
  ExperimentConfig cfg = tiny_config();
  SplitDataset data = build_cell_data(cfg.data, 5);

  NetworkSpec spec;
  spec.input_dim = data.train.dim();
  spec.num_classes = data.train.num_classes;
  spec.layers.push_back(
      {data.train.dim(), data.train.num_classes, Activation::kNone, false, 1.0});
  Model model = init_model(spec, 2);

  Matrix targets(data.train.size(), data.train.num_classes);
  for (int i = 0; i < data.train.size(); ++i) {
    targets.at(i, data.train.labels[static_cast<size_t>(i)]) = 1.0;
  }
  TargetCrossEntropyLoss loss(std::move(targets));

  TrainConfig tc;
  tc.epochs = 40;
  tc.batch_size = data.train.size();  // full batch
  tc.learning_rate = 0.1;
  tc.momentum = 0.0;
  tc.weight_decay = 0.0;
  ExperimentLog log = train_model(model, loss, data, tc, 1);
  for (size_t e = 1; e < log.epochs.size(); ++e) {
    CHECK(log.epochs[e].train_loss <= log.epochs[e - 1].train_loss + 1e-12);
  }
}

TEST_CASE("teacher training is deterministic and alpha changes the outcome") {
  ExperimentConfig cfg = tiny_config();
  SplitDataset data = build_cell_data(cfg.data, 1);
  TeacherRun a = train_teacher(cfg, 1, 0.1, data, false);
  TeacherRun b = train_teacher(cfg, 1, 0.1, data, false);
  CHECK(a.model.parameter_hash() == b.model.parameter_hash());
  CHECK(a.log.epochs.back().train_loss == b.log.epochs.back().train_loss);

  TeacherRun hard = train_teacher(cfg, 1, 0.0, data, false);
  CHECK(a.model.parameter_hash() != hard.model.parameter_hash());

  // frozen teacher: repeated evaluation gives identical probabilities
  Matrix p1 = model_probabilities(a.model, data.train.features);
  Matrix p2 = model_probabilities(a.model, data.train.features);
  CHECK(p1.data == p2.data);
}

TEST_CASE("teacher log carries stability and geometry reports") {
  ExperimentConfig cfg = tiny_config();
  SplitDataset data = build_cell_data(cfg.data, 2);
  TeacherRun run = train_teacher(cfg, 2, 0.1, data, true);
  REQUIRE(run.log.stability.has_value());
  CHECK(run.log.stability->num_classes == 3);
  REQUIRE(run.log.geometry.has_value());
  CHECK(run.log.geometry->dc_full > 0.0);
  CHECK(run.log.epochs.size() ==
        static_cast<size_t>(cfg.teacher.train.epochs));
}

TEST_CASE("soft-only distillation at T=1 is cross-entropy against the teacher") {
  ExperimentConfig cfg = tiny_config();
  SplitDataset data = build_cell_data(cfg.data, 4);
  TeacherRun teacher = train_teacher(cfg, 4, 0.1, data, false);

  ForwardRecord record = forward(teacher.model, data.train.features);
  DistillConfig soft_only{0.0, 1.0, false};
  DistillLogitLoss loss(record.logits(), data.train.labels,
                        data.train.num_classes, soft_only);

  // same-spec student initialized at the teacher's parameters: the distill
  // loss equals the teacher's mean output entropy
  double mean_entropy = 0.0;
  Matrix teacher_probs = model_probabilities(teacher.model, data.train.features);
  for (int i = 0; i < teacher_probs.rows; ++i) {
    mean_entropy += entropy(teacher_probs.row(i));
  }
  mean_entropy /= teacher_probs.rows;
  const double at_init =
      dataset_mean_loss(teacher.model, loss, data.train.features);
  CHECK(at_init == doctest::Approx(mean_entropy).epsilon(1e-12));

  // and for any student parameters it equals CE(student, teacher) exactly
  Model student = init_model(teacher.model.spec, 99);
  Matrix student_probs = model_probabilities(student, data.train.features);
  double ce = 0.0;
  for (int i = 0; i < student_probs.rows; ++i) {
    ce += cross_entropy(student_probs.row(i), teacher_probs.row(i));
  }
  ce /= student_probs.rows;
  CHECK(dataset_mean_loss(student, loss, data.train.features) ==
        doctest::Approx(ce).epsilon(1e-12));
}

TEST_CASE("distillation freezes the teacher and reacts to lambda") {
  ExperimentConfig cfg = tiny_config();
  SplitDataset data = build_cell_data(cfg.data, 6);
  TeacherRun teacher = train_teacher(cfg, 6, 0.1, data, false);
  const uint64_t hash_before = teacher.model.parameter_hash();

  StudentRun soft = distill_student(teacher.model, cfg, 6, {0.0, 1.0, false}, data);
  CHECK(teacher.model.parameter_hash() == hash_before);
  CHECK(soft.log.epochs.size() == static_cast<size_t>(cfg.student.train.epochs));

  StudentRun mixed = distill_student(teacher.model, cfg, 6, {0.5, 1.0, false}, data);
  CHECK(teacher.model.parameter_hash() == hash_before);
  // hard labels enter the objective, so the trajectory must change
  CHECK(mixed.log.epochs.front().train_loss !=
        soft.log.epochs.front().train_loss);
}

TEST_CASE("divergence surfaces as divergence-error with a partial log") {
  ExperimentConfig cfg = tiny_config();
  SplitDataset data = build_cell_data(cfg.data, 9);
  NetworkSpec spec = cfg.teacher.network(data.train.dim(), 3);
  Model model = init_model(spec, 1);
  Matrix targets(data.train.size(), 3);
  for (int i = 0; i < data.train.size(); ++i) {
    targets.at(i, data.train.labels[static_cast<size_t>(i)]) = 1.0;
  }
  TargetCrossEntropyLoss loss(std::move(targets));
  TrainConfig tc;
  tc.epochs = 50;
  tc.batch_size = 16;
  tc.learning_rate = 1e8;  // multiplicative blow-up via weight decay
  tc.weight_decay = 1.0;
  tc.momentum = 0.9;
  bool thrown = false;
  try {
    train_model(model, loss, data, tc, 1);
  } catch (const DivergenceError& e) {
    thrown = true;
    CHECK(std::string(e.what()).find("divergence-error") != std::string::npos);
  }
  CHECK(thrown);
}

TEST_CASE("config JSON parsing and validation") {
  const std::string text = R"({
    "data": {
      "source": "clusters",
      "clusters": {"classes": 4, "dim": 8, "sigma": 0.5, "similar_pair": [1, 2],
                   "delta_near": 1.0, "delta_far": 6.0, "per_class": 40, "seed": 3},
      "val_fraction": 0.25,
      "long_tail": {"power": 6.0, "max_per_class": 25, "min_per_class": 4}
    },
    "teacher": {"hidden": [32, 16], "activation": "tanh",
                "train": {"epochs": 5, "batch_size": 8, "learning_rate": 0.05,
                           "decay_epochs": [3], "decay_factor": 0.5,
                           "momentum": 0.8, "weight_decay": 0.0001}},
    "teacher_alpha": 0.2,
    "student": {"hidden": [8]},
    "distill": {"lambda": 0.5, "temperature": 2.0, "rescale_grad_by_t2": true},
    "lambda_presets": [0.3, 0.7],
    "seeds": [4, 5],
    "eval_topk": 2,
    "output_dir": "results"
  })";
  ExperimentConfig cfg = parse_experiment_config(text);
  CHECK(cfg.data.clusters.num_classes == 4);
  CHECK(cfg.data.clusters.similar_pair == std::pair<int, int>{1, 2});
  CHECK(cfg.data.long_tail.has_value());
  CHECK(cfg.data.long_tail->max_per_class == 25);
  CHECK(cfg.teacher.hidden == std::vector<int>{32, 16});
  CHECK(cfg.teacher.activation == Activation::kTanh);
  CHECK(cfg.teacher.train.decay_epochs == std::vector<int>{3});
  CHECK(cfg.teacher_alpha == 0.2);
  CHECK(cfg.distill.lambda == 0.5);
  CHECK(cfg.distill.rescale_grad_by_t2);
  CHECK(cfg.lambda_presets == std::vector<double>{0.3, 0.7});
  CHECK(cfg.seeds == std::vector<uint64_t>{4, 5});
  CHECK(cfg.output_dir == fs::path("results"));

  // resolved text round-trips through the parser
  ExperimentConfig back = parse_experiment_config(resolved_config_text(cfg));
  CHECK(resolved_config_text(back) == resolved_config_text(cfg));

  CHECK_THROWS_WITH_AS(parse_experiment_config("{\"teacher_alpha\": 1.2}"),
                       doctest::Contains("invalid-coefficient"), DomainError);
  CHECK_THROWS_WITH_AS(parse_experiment_config("not json"),
                       doctest::Contains("data-error"), DomainError);
}

TEST_CASE("run_matrix covers the cell grid and round-trips cells.csv") {
  ExperimentConfig cfg = tiny_config();
  cfg.teacher.train.epochs = 4;
  cfg.student.train.epochs = 4;
  cfg.seeds = {1, 2};
  const fs::path outdir =
      fs::temp_directory_path() / "distillab_matrix_unit_test";
  fs::remove_all(outdir);
  MatrixReport report = run_matrix(cfg, 1, outdir);

  // 2 seeds x {alpha 0, alpha 0.1} x 1 distill setting
  CHECK(report.cells.size() == 4);
  for (const CellOutcome& c : report.cells) {
    CHECK_FALSE(c.failed);
    CHECK(c.student_val_top1 >= 0.0);
    CHECK(c.student_val_top1 <= 1.0);
  }
  CHECK(fs::exists(outdir / "cells.csv"));
  CHECK(fs::exists(outdir / "summary.txt"));

  auto cells = read_cells_csv(outdir / "cells.csv");
  REQUIRE(cells.size() == report.cells.size());
  for (size_t i = 0; i < cells.size(); ++i) {
    CHECK(cells[i].key.id() == report.cells[i].key.id());
    // cells.csv stores 6 decimal places
    CHECK(cells[i].student_val_top1 ==
          doctest::Approx(report.cells[i].student_val_top1).epsilon(1e-5));
  }

  PairedCounts counts = report.paired_counts(0.0, 1.0);
  CHECK(counts.seeds == 2);

  // single seed, alpha 0: degenerates to one chained run
  ExperimentConfig single = tiny_config();
  single.teacher_alpha = 0.0;
  single.teacher.train.epochs = 3;
  single.student.train.epochs = 3;
  const fs::path outdir2 =
      fs::temp_directory_path() / "distillab_matrix_single_test";
  fs::remove_all(outdir2);
  MatrixReport one = run_matrix(single, 1, outdir2);
  CHECK(one.cells.size() == 1);

  std::ostringstream summary;
  write_matrix_summary(summary, report, cfg);
  CHECK(summary.str().find("sign_tests") != std::string::npos);

  fs::remove_all(outdir);
  fs::remove_all(outdir2);
}

TEST_CASE("matrix outputs are identical for any worker-pool size") {
  ExperimentConfig cfg = tiny_config();
  cfg.teacher.train.epochs = 3;
  cfg.student.train.epochs = 3;
  cfg.seeds = {1, 2};
  const fs::path dir1 = fs::temp_directory_path() / "distillab_jobs1";
  const fs::path dir4 = fs::temp_directory_path() / "distillab_jobs4";
  fs::remove_all(dir1);
  fs::remove_all(dir4);
  run_matrix(cfg, 1, dir1);
  run_matrix(cfg, 4, dir4);

  auto read_file = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  int csv_count = 0;
  for (const auto& entry : fs::directory_iterator(dir1)) {
    if (entry.path().extension() != ".csv") continue;
    ++csv_count;
    const fs::path other = dir4 / entry.path().filename();
    REQUIRE(fs::exists(other));
    CHECK(read_file(entry.path()) == read_file(other));
  }
  CHECK(csv_count > 0);
  fs::remove_all(dir1);
  fs::remove_all(dir4);
}
