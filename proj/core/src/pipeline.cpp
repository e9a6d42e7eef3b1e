#include "distillab/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <numeric>
#include <ostream>
#include <sstream>
#include <thread>

#include "distillab/hash.hpp"
#include "distillab/rng.hpp"
#include "json.hpp"

namespace distillab {

namespace {

using nlohmann::json;

// independent seed streams derived from one cell seed
constexpr uint64_t kStreamData = 1;
constexpr uint64_t kStreamCurate = 2;
constexpr uint64_t kStreamSplit = 3;
constexpr uint64_t kStreamLongTail = 4;
constexpr uint64_t kStreamTeacherInit = 5;
constexpr uint64_t kStreamTeacherShuffle = 6;
constexpr uint64_t kStreamStudentInit = 7;
constexpr uint64_t kStreamStudentShuffle = 8;

std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

double elapsed_seconds(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                       start)
      .count();
}

}  // namespace

NetworkSpec ModelConfig::network(int input_dim, int num_classes) const {
  return NetworkSpec::mlp(input_dim, hidden, num_classes, activation);
}

void ExperimentConfig::validate() const {
  if (data.source == DataConfig::Source::kClusters) {
    data.clusters.validate();
  } else if (data.file.empty()) {
    throw DomainError(ErrorKind::kSpecError,
                      "file data source needs a path");
  }
  if (!(data.val_fraction > 0.0 && data.val_fraction < 1.0)) {
    throw DomainError(ErrorKind::kSpecError,
                      "val_fraction must lie strictly between 0 and 1");
  }
  if (data.curate) {
    if (data.curate->classes < 2) {
      throw DomainError(ErrorKind::kSpecError,
                        "curated subset needs at least 2 classes");
    }
  }
  if (data.long_tail) data.long_tail->validate();
  if (!(teacher_alpha >= 0.0 && teacher_alpha < 1.0)) {
    throw DomainError(ErrorKind::kInvalidCoefficient,
                      "teacher_alpha must lie in [0,1), got " +
                          std::to_string(teacher_alpha));
  }
  if (teacher.hidden.empty() || student.hidden.empty()) {
    throw DomainError(ErrorKind::kSpecError,
                      "teacher and student need at least one hidden layer");
  }
  teacher.train.validate();
  student.train.validate();
  distill.validate();
  for (double l : lambda_presets) {
    if (!(l >= 0.0 && l <= 1.0)) {
      throw DomainError(ErrorKind::kInvalidCoefficient,
                        "lambda preset outside [0,1]");
    }
  }
  if (seeds.empty()) {
    throw DomainError(ErrorKind::kSpecError, "seed list must not be empty");
  }
  if (eval_topk < 1) {
    throw DomainError(ErrorKind::kSpecError, "eval_topk must be >= 1");
  }
}

namespace {

TrainConfig train_config_from_json(const json& j) {
  TrainConfig cfg;
  cfg.epochs = j.value("epochs", cfg.epochs);
  cfg.batch_size = j.value("batch_size", cfg.batch_size);
  cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
  if (j.contains("decay_epochs")) {
    cfg.decay_epochs = j.at("decay_epochs").get<std::vector<int>>();
  }
  cfg.decay_factor = j.value("decay_factor", cfg.decay_factor);
  cfg.momentum = j.value("momentum", cfg.momentum);
  cfg.weight_decay = j.value("weight_decay", cfg.weight_decay);
  return cfg;
}

json train_config_to_json(const TrainConfig& cfg) {
  json j;
  j["epochs"] = cfg.epochs;
  j["batch_size"] = cfg.batch_size;
  j["learning_rate"] = cfg.learning_rate;
  j["decay_epochs"] = cfg.decay_epochs;
  j["decay_factor"] = cfg.decay_factor;
  j["momentum"] = cfg.momentum;
  j["weight_decay"] = cfg.weight_decay;
  return j;
}

ModelConfig model_config_from_json(const json& j) {
  ModelConfig cfg;
  if (j.contains("hidden")) {
    cfg.hidden = j.at("hidden").get<std::vector<int>>();
  }
  cfg.activation =
      activation_from_name(j.value("activation", std::string("relu")));
  if (j.contains("train")) cfg.train = train_config_from_json(j.at("train"));
  return cfg;
}

json model_config_to_json(const ModelConfig& cfg) {
  json j;
  j["hidden"] = cfg.hidden;
  j["activation"] = activation_name(cfg.activation);
  j["train"] = train_config_to_json(cfg.train);
  return j;
}

}  // namespace

ExperimentConfig parse_experiment_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw DomainError(ErrorKind::kDataError,
                      std::string("config parse failure: ") + e.what());
  }
  ExperimentConfig cfg;
  try {
    if (j.contains("data")) {
      const json& d = j.at("data");
      const std::string source = d.value("source", std::string("clusters"));
      if (source == "clusters") {
        cfg.data.source = DataConfig::Source::kClusters;
      } else if (source == "file") {
        cfg.data.source = DataConfig::Source::kFile;
      } else {
        throw DomainError(ErrorKind::kSpecError,
                          "unknown data source '" + source + "'");
      }
      if (d.contains("clusters")) {
        const json& c = d.at("clusters");
        ClusterSpec& spec = cfg.data.clusters;
        spec.num_classes = c.value("classes", spec.num_classes);
        spec.dim = c.value("dim", spec.dim);
        spec.sigma = c.value("sigma", spec.sigma);
        if (c.contains("similar_pair")) {
          auto pair = c.at("similar_pair").get<std::vector<int>>();
          if (pair.size() != 2) {
            throw DomainError(ErrorKind::kSpecError,
                              "similar_pair needs exactly two classes");
          }
          spec.similar_pair = {pair[0], pair[1]};
        }
        spec.delta_near = c.value("delta_near", spec.delta_near);
        spec.delta_far = c.value("delta_far", spec.delta_far);
        spec.per_class = c.value("per_class", spec.per_class);
        spec.seed = c.value("seed", spec.seed);
      }
      cfg.data.file = d.value("file", std::string());
      cfg.data.val_fraction = d.value("val_fraction", cfg.data.val_fraction);
      if (d.contains("curate")) {
        CurateConfig curate;
        curate.classes = d.at("curate").value("classes", curate.classes);
        cfg.data.curate = curate;
      }
      if (d.contains("long_tail")) {
        const json& lt = d.at("long_tail");
        LongTailSpec spec;
        spec.pareto_power = lt.value("power", spec.pareto_power);
        spec.max_per_class = lt.value("max_per_class", spec.max_per_class);
        spec.min_per_class = lt.value("min_per_class", spec.min_per_class);
        spec.balanced = lt.value("balanced", spec.balanced);
        cfg.data.long_tail = spec;
      }
    }
    if (j.contains("teacher")) {
      cfg.teacher = model_config_from_json(j.at("teacher"));
    }
    cfg.teacher_alpha = j.value("teacher_alpha", cfg.teacher_alpha);
    if (j.contains("student")) {
      cfg.student = model_config_from_json(j.at("student"));
    }
    if (j.contains("distill")) {
      const json& d = j.at("distill");
      cfg.distill.lambda = d.value("lambda", cfg.distill.lambda);
      cfg.distill.temperature =
          d.value("temperature", cfg.distill.temperature);
      cfg.distill.rescale_grad_by_t2 =
          d.value("rescale_grad_by_t2", cfg.distill.rescale_grad_by_t2);
    }
    if (j.contains("lambda_presets")) {
      cfg.lambda_presets = j.at("lambda_presets").get<std::vector<double>>();
    }
    if (j.contains("seeds")) {
      cfg.seeds = j.at("seeds").get<std::vector<uint64_t>>();
    }
    cfg.eval_topk = j.value("eval_topk", cfg.eval_topk);
    cfg.output_dir = j.value("output_dir", std::string("out"));
  } catch (const json::exception& e) {
    throw DomainError(ErrorKind::kDataError,
                      std::string("config field error: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw DomainError(ErrorKind::kDataError,
                      "cannot open config: " + path.string());
  }
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_experiment_config(buffer.str());
}

std::string resolved_config_text(const ExperimentConfig& cfg) {
  json j;
  json data;
  data["source"] =
      cfg.data.source == DataConfig::Source::kClusters ? "clusters" : "file";
  json clusters;
  clusters["classes"] = cfg.data.clusters.num_classes;
  clusters["dim"] = cfg.data.clusters.dim;
  clusters["sigma"] = cfg.data.clusters.sigma;
  clusters["similar_pair"] = {cfg.data.clusters.similar_pair.first,
                              cfg.data.clusters.similar_pair.second};
  clusters["delta_near"] = cfg.data.clusters.delta_near;
  clusters["delta_far"] = cfg.data.clusters.delta_far;
  clusters["per_class"] = cfg.data.clusters.per_class;
  clusters["seed"] = cfg.data.clusters.seed;
  data["clusters"] = clusters;
  data["file"] = cfg.data.file.string();
  data["val_fraction"] = cfg.data.val_fraction;
  if (cfg.data.curate) {
    data["curate"] = {{"classes", cfg.data.curate->classes}};
  }
  if (cfg.data.long_tail) {
    data["long_tail"] = {{"power", cfg.data.long_tail->pareto_power},
                         {"max_per_class", cfg.data.long_tail->max_per_class},
                         {"min_per_class", cfg.data.long_tail->min_per_class},
                         {"balanced", cfg.data.long_tail->balanced}};
  }
  j["data"] = data;
  j["teacher"] = model_config_to_json(cfg.teacher);
  j["teacher_alpha"] = cfg.teacher_alpha;
  j["student"] = model_config_to_json(cfg.student);
  j["distill"] = {{"lambda", cfg.distill.lambda},
                  {"temperature", cfg.distill.temperature},
                  {"rescale_grad_by_t2", cfg.distill.rescale_grad_by_t2}};
  j["lambda_presets"] = cfg.lambda_presets;
  j["seeds"] = cfg.seeds;
  j["eval_topk"] = cfg.eval_topk;
  j["output_dir"] = cfg.output_dir.string();
  return j.dump(2) + "\n";
}

SplitDataset build_cell_data(const DataConfig& cfg, uint64_t cell_seed) {
  LabeledDataset d;
  if (cfg.source == DataConfig::Source::kClusters) {
    ClusterSpec spec = cfg.clusters;
    spec.seed = mix_seed(mix_seed(spec.seed, kStreamData), cell_seed);
    d = gen_clusters(spec);
  } else {
    d = read_dataset_csv(cfg.file);
  }
  if (cfg.curate) {
    d = curate_subset(d, cfg.curate->classes,
                      mix_seed(cell_seed, kStreamCurate));
  }
  SplitDataset out =
      split(d, cfg.val_fraction, mix_seed(cell_seed, kStreamSplit));
  if (cfg.long_tail) {
    LongTailSpec lt = *cfg.long_tail;
    lt.seed = mix_seed(cell_seed, kStreamLongTail);
    out.train = pareto_resample(out.train, lt);
  }
  return out;
}

double dataset_mean_loss(const Model& model, const LogitLoss& loss,
                         const Matrix& features) {
  ForwardRecord record = forward(model, features);
  double sum = 0.0;
  for (int i = 0; i < features.rows; ++i) {
    sum += loss.value(record.logits().row(i), i);
  }
  return sum / features.rows;
}

Matrix model_probabilities(const Model& model, const Matrix& features,
                           double temperature) {
  ForwardRecord record = forward(model, features);
  Matrix probs(features.rows, model.spec.num_classes);
  for (int i = 0; i < features.rows; ++i) {
    softmax_into(record.logits().row(i), temperature, probs.row(i));
  }
  return probs;
}

std::map<int, double> evaluate(const Model& model, const Matrix& features,
                               std::span<const int> labels,
                               std::span<const int> topk_list) {
  if (features.rows != static_cast<int>(labels.size())) {
    throw DomainError(ErrorKind::kShapeError,
                      "feature rows and labels disagree");
  }
  const int k_classes = model.spec.num_classes;
  for (int k : topk_list) {
    if (k < 1 || k > k_classes) {
      throw DomainError(ErrorKind::kSpecError,
                        "top-k with k=" + std::to_string(k) +
                            " outside 1.." + std::to_string(k_classes));
    }
  }
  ForwardRecord record = forward(model, features);
  std::map<int, double> correct;
  for (int k : topk_list) correct[k] = 0.0;
  for (int i = 0; i < features.rows; ++i) {
    auto logits = record.logits().row(i);
    const int label = labels[static_cast<size_t>(i)];
    // rank = classes strictly better, ties going to the lower index
    int rank = 0;
    const double own = logits[static_cast<size_t>(label)];
    for (int c = 0; c < k_classes; ++c) {
      if (c == label) continue;
      const double z = logits[static_cast<size_t>(c)];
      if (z > own || (z == own && c < label)) ++rank;
    }
    for (int k : topk_list) {
      if (rank < k) correct[k] += 1.0;
    }
  }
  for (auto& [k, v] : correct) v /= features.rows;
  return correct;
}

ExperimentLog train_model(Model& model, const LogitLoss& loss,
                          const SplitDataset& data, const TrainConfig& cfg,
                          int topk) {
  cfg.validate();
  const int n = data.train.size();
  if (n == 0) {
    throw DomainError(ErrorKind::kDataError, "empty training split");
  }
  if (data.train.dim() != model.spec.input_dim) {
    throw DomainError(ErrorKind::kShapeError,
                      "training features do not match the model input dim");
  }
  const int k_classes = model.spec.num_classes;
  SgdState state = SgdState::zeros_like(model);
  Rng shuffle_rng(mix_seed(cfg.seed, 0x65706f6368));
  ExperimentLog log;
  log.topk = topk;
  std::vector<int> topks{1};
  if (topk != 1) topks.push_back(topk);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<int> order = shuffle_rng.permutation<int>(n);
    double loss_sum = 0.0;
    for (int start = 0; start < n; start += cfg.batch_size) {
      const int bs = std::min(cfg.batch_size, n - start);
      Matrix batch(bs, data.train.dim());
      for (int j = 0; j < bs; ++j) {
        auto src = data.train.features.row(order[static_cast<size_t>(start + j)]);
        std::copy(src.begin(), src.end(), batch.row(j).begin());
      }
      ForwardRecord record = forward(model, batch);
      for (double z : record.logits().data) {
        if (!std::isfinite(z)) {
          throw DivergenceError(
              "non-finite logits at epoch " + std::to_string(epoch), log);
        }
      }
      Matrix upstream(bs, k_classes);
      for (int j = 0; j < bs; ++j) {
        const int example = order[static_cast<size_t>(start + j)];
        auto logits = record.logits().row(j);
        loss_sum += loss.value(logits, example);
        Vec g = loss.grad(logits, example);
        std::copy(g.begin(), g.end(), upstream.row(j).begin());
      }
      Gradients grads = backward(model, record, upstream);
      try {
        sgd_step(model, grads, state, cfg, epoch);
      } catch (const DomainError& e) {
        if (e.kind() == ErrorKind::kDivergenceError) {
          throw DivergenceError(e.what(), log);
        }
        throw;
      }
      if (!model.parameters_finite()) {
        throw DivergenceError(
            "non-finite parameters at epoch " + std::to_string(epoch), log);
      }
    }
    EpochStat stat;
    stat.train_loss = loss_sum / n;
    auto acc = evaluate(model, data.val.features, data.val.labels, topks);
    stat.val_top1 = acc.at(1);
    stat.val_topk = acc.at(topks.back());
    log.epochs.push_back(stat);
  }
  std::vector<int> top1{1};
  log.final_train_accuracy =
      evaluate(model, data.train.features, data.train.labels, top1).at(1);
  return log;
}

TeacherRun train_teacher(const ExperimentConfig& cfg, uint64_t cell_seed,
                         double alpha, const SplitDataset& data,
                         bool with_geometry) {
  const auto start = std::chrono::steady_clock::now();
  const int k_classes = data.train.num_classes;
  NetworkSpec spec = cfg.teacher.network(data.train.dim(), k_classes);
  Model model = init_model(spec, mix_seed(cell_seed, kStreamTeacherInit));

  Matrix targets(data.train.size(), k_classes);
  for (int i = 0; i < data.train.size(); ++i) {
    LabelVector lv = smooth_labels(
        data.train.labels[static_cast<size_t>(i)], alpha, k_classes);
    std::copy(lv.values.begin(), lv.values.end(), targets.row(i).begin());
  }
  TargetCrossEntropyLoss loss(std::move(targets));

  TrainConfig train_cfg = cfg.teacher.train;
  train_cfg.seed = mix_seed(cell_seed, kStreamTeacherShuffle);
  ExperimentLog log = train_model(model, loss, data, train_cfg,
                                  std::min(cfg.eval_topk, k_classes));

  TeacherRun run;
  run.train_probs = model_probabilities(model, data.train.features);
  GroupedProbs grouped = GroupedProbs::from_rows(
      run.train_probs, data.train.labels, k_classes);
  log.stability = compute_stability_report(grouped);

  if (with_geometry && cfg.data.source == DataConfig::Source::kClusters &&
      !cfg.data.curate && k_classes >= 3) {
    const auto [a, b] = cfg.data.clusters.similar_pair;
    int reference = 0;
    while (reference == a || reference == b) ++reference;
    log.geometry = analyze_geometry(model, data.train.features,
                                    data.train.labels, a, b, reference);
  }
  log.wall_seconds = elapsed_seconds(start);
  run.model = std::move(model);
  run.log = std::move(log);
  return run;
}

StudentRun distill_student(const Model& teacher, const ExperimentConfig& cfg,
                           uint64_t cell_seed, const DistillConfig& distill,
                           const SplitDataset& data) {
  const auto start = std::chrono::steady_clock::now();
  distill.validate();
  const int k_classes = data.train.num_classes;
  if (teacher.spec.num_classes != k_classes ||
      teacher.spec.input_dim != data.train.dim()) {
    throw DomainError(ErrorKind::kShapeError,
                      "teacher does not match the dataset shape");
  }
  NetworkSpec spec = cfg.student.network(data.train.dim(), k_classes);
  Model student = init_model(spec, mix_seed(cell_seed, kStreamStudentInit));

  // the teacher is frozen: its logits are computed once, up front
  ForwardRecord teacher_record = forward(teacher, data.train.features);
  DistillLogitLoss loss(teacher_record.logits(), data.train.labels, k_classes,
                        distill);

  TrainConfig train_cfg = cfg.student.train;
  train_cfg.seed = mix_seed(cell_seed, kStreamStudentShuffle);
  ExperimentLog log = train_model(student, loss, data, train_cfg,
                                  std::min(cfg.eval_topk, k_classes));
  log.wall_seconds = elapsed_seconds(start);

  StudentRun run;
  run.model = std::move(student);
  run.log = std::move(log);
  return run;
}

std::string CellKey::id() const {
  char buf[96];
  std::snprintf(buf, sizeof(buf), "s%06llu_a%.4f_l%.4f_t%.4f",
                static_cast<unsigned long long>(seed), teacher_alpha, lambda,
                temperature);
  return buf;
}

namespace {

std::string teacher_tag(uint64_t seed, double alpha) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "s%06llu_a%.4f",
                static_cast<unsigned long long>(seed), alpha);
  return buf;
}

void write_epochs_csv(const std::filesystem::path& path,
                      const ExperimentLog& log) {
  std::ofstream out(path);
  if (!out) {
    throw DomainError(ErrorKind::kDataError,
                      "cannot open epoch CSV for writing: " + path.string());
  }
  out << "epoch,train_loss,val_top1,val_top" << log.topk << "\n";
  for (size_t e = 0; e < log.epochs.size(); ++e) {
    const EpochStat& s = log.epochs[e];
    out << e << "," << fixed6(s.train_loss) << "," << fixed6(s.val_top1)
        << "," << fixed6(s.val_topk) << "\n";
  }
}

constexpr const char* kCellsHeader =
    "id,seed,alpha,lambda,temperature,failed,teacher_val_top1,"
    "teacher_val_topk,teacher_train_acc,teacher_final_train_loss,"
    "stability_eq2,stability_alg1,stability_alg1_population,inter_stability,"
    "profile_max,has_geometry,dc_full,dc_2d,pair_spread,student_val_top1,"
    "student_val_topk,student_final_train_loss,error";

}  // namespace

void write_cells_csv(const std::filesystem::path& path,
                     const std::vector<CellOutcome>& cells) {
  std::ofstream out(path);
  if (!out) {
    throw DomainError(ErrorKind::kDataError,
                      "cannot open cells CSV for writing: " + path.string());
  }
  out << kCellsHeader << "\n";
  for (const CellOutcome& c : cells) {
    std::string error = c.error;
    std::replace(error.begin(), error.end(), ',', ';');
    std::replace(error.begin(), error.end(), '\n', ' ');
    out << c.key.id() << "," << c.key.seed << "," << fixed6(c.key.teacher_alpha)
        << "," << fixed6(c.key.lambda) << "," << fixed6(c.key.temperature)
        << "," << (c.failed ? 1 : 0) << "," << fixed6(c.teacher_val_top1)
        << "," << fixed6(c.teacher_val_topk) << ","
        << fixed6(c.teacher_train_accuracy) << ","
        << fixed6(c.teacher_final_train_loss) << ","
        << fixed6(c.stability_eq2) << "," << fixed6(c.stability_alg1) << ","
        << fixed6(c.stability_alg1_population) << ","
        << fixed6(c.inter_stability) << "," << fixed6(c.profile_max) << ","
        << (c.dc_full != 0.0 || c.dc_2d != 0.0 ? 1 : 0) << ","
        << fixed6(c.dc_full) << "," << fixed6(c.dc_2d) << ","
        << fixed6(c.pair_spread) << "," << fixed6(c.student_val_top1) << ","
        << fixed6(c.student_val_topk) << ","
        << fixed6(c.student_final_train_loss) << "," << error << "\n";
  }
}

std::vector<CellOutcome> read_cells_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw DomainError(ErrorKind::kDataError,
                      "cannot open cells CSV: " + path.string());
  }
  std::string line;
  if (!std::getline(in, line) || line != kCellsHeader) {
    throw DomainError(ErrorKind::kDataError,
                      "unexpected cells CSV header in " + path.string());
  }
  std::vector<CellOutcome> cells;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string cell;
    auto next = [&]() -> std::string {
      if (!std::getline(ls, cell, ',')) {
        throw DomainError(ErrorKind::kDataError,
                          "short cells CSV row in " + path.string());
      }
      return cell;
    };
    CellOutcome c;
    next();  // id is reconstructible from the key
    c.key.seed = std::stoull(next());
    c.key.teacher_alpha = std::stod(next());
    c.key.lambda = std::stod(next());
    c.key.temperature = std::stod(next());
    c.failed = std::stoi(next()) != 0;
    c.teacher_val_top1 = std::stod(next());
    c.teacher_val_topk = std::stod(next());
    c.teacher_train_accuracy = std::stod(next());
    c.teacher_final_train_loss = std::stod(next());
    c.stability_eq2 = std::stod(next());
    c.stability_alg1 = std::stod(next());
    c.stability_alg1_population = std::stod(next());
    c.inter_stability = std::stod(next());
    c.profile_max = std::stod(next());
    next();  // has_geometry, implied by dc fields
    c.dc_full = std::stod(next());
    c.dc_2d = std::stod(next());
    c.pair_spread = std::stod(next());
    c.student_val_top1 = std::stod(next());
    c.student_val_topk = std::stod(next());
    c.student_final_train_loss = std::stod(next());
    if (std::getline(ls, cell)) c.error = cell;
    cells.push_back(std::move(c));
  }
  return cells;
}

PairedCounts MatrixReport::paired_counts(double lambda,
                                         double temperature) const {
  PairedCounts counts;
  std::map<uint64_t, const CellOutcome*> ls_cells;
  std::map<uint64_t, const CellOutcome*> hard_cells;
  for (const CellOutcome& c : cells) {
    if (c.failed) continue;
    if (std::abs(c.key.lambda - lambda) > 1e-12 ||
        std::abs(c.key.temperature - temperature) > 1e-12) {
      continue;
    }
    if (c.key.teacher_alpha == 0.0) {
      hard_cells[c.key.seed] = &c;
    } else {
      ls_cells[c.key.seed] = &c;
    }
  }
  double student_ls_sum = 0.0;
  double student_hard_sum = 0.0;
  for (const auto& [seed, ls] : ls_cells) {
    auto it = hard_cells.find(seed);
    if (it == hard_cells.end()) continue;
    const CellOutcome* hard = it->second;
    ++counts.seeds;
    if (1.0 - ls->stability_eq2 < 1.0 - hard->stability_eq2) {
      ++counts.variance_lower_with_ls;
    }
    if (ls->profile_max < hard->profile_max) {
      ++counts.profile_max_lower_with_ls;
    }
    if (ls->student_final_train_loss > hard->student_final_train_loss) {
      ++counts.distill_loss_higher_with_ls;
    }
    const bool both_geometry = (ls->dc_full != 0.0 || ls->dc_2d != 0.0) &&
                               (hard->dc_full != 0.0 || hard->dc_2d != 0.0);
    if (both_geometry) {
      if (ls->dc_full > hard->dc_full) ++counts.dc_full_larger_with_ls;
      if (ls->pair_spread < hard->pair_spread) {
        ++counts.spread_smaller_with_ls;
      }
    }
    student_ls_sum += ls->student_val_top1;
    student_hard_sum += hard->student_val_top1;
  }
  if (counts.seeds > 0) {
    counts.mean_student_val_ls = student_ls_sum / counts.seeds;
    counts.mean_student_val_hard = student_hard_sum / counts.seeds;
  }
  return counts;
}

MatrixReport run_matrix(const ExperimentConfig& cfg, int jobs,
                        const std::filesystem::path& output_dir) {
  cfg.validate();
  std::filesystem::create_directories(output_dir);

  std::vector<double> alphas{0.0};
  if (cfg.teacher_alpha > 0.0) alphas.push_back(cfg.teacher_alpha);
  std::vector<DistillConfig> settings{cfg.distill};
  for (double l : cfg.lambda_presets) {
    DistillConfig d = cfg.distill;
    d.lambda = l;
    settings.push_back(d);
  }

  struct Unit {
    uint64_t seed;
    double alpha;
  };
  std::vector<Unit> units;
  for (uint64_t seed : cfg.seeds) {
    for (double alpha : alphas) units.push_back({seed, alpha});
  }

  std::vector<std::vector<CellOutcome>> unit_outcomes(units.size());
  std::vector<std::string> timing(units.size());
  std::atomic<size_t> cursor{0};

  auto run_unit = [&](size_t unit_index) {
    const Unit unit = units[unit_index];
    std::vector<CellOutcome>& outcomes = unit_outcomes[unit_index];
    const auto start = std::chrono::steady_clock::now();
    auto fail_all = [&](const std::string& message) {
      outcomes.clear();
      for (const DistillConfig& setting : settings) {
        CellOutcome c;
        c.key = {unit.seed, unit.alpha, setting.lambda, setting.temperature};
        c.failed = true;
        c.error = message;
        outcomes.push_back(std::move(c));
      }
    };
    try {
      SplitDataset data = build_cell_data(cfg.data, unit.seed);
      TeacherRun teacher = train_teacher(cfg, unit.seed, unit.alpha, data);
      const std::string tag = teacher_tag(unit.seed, unit.alpha);
      save_checkpoint(teacher.model, cfg.teacher.train.epochs,
                      output_dir / ("teacher_" + tag + ".ckpt"));
      write_epochs_csv(output_dir / ("teacher_epochs_" + tag + ".csv"),
                       teacher.log);
      write_probability_dump(output_dir / ("teacher_probs_" + tag + ".csv"),
                             teacher.train_probs, data.train.labels);

      for (const DistillConfig& setting : settings) {
        CellOutcome c;
        c.key = {unit.seed, unit.alpha, setting.lambda, setting.temperature};
        c.teacher_val_top1 = teacher.log.final_val_top1();
        c.teacher_val_topk = teacher.log.epochs.back().val_topk;
        c.teacher_train_accuracy = teacher.log.final_train_accuracy;
        c.teacher_final_train_loss = teacher.log.final_train_loss();
        const StabilityReport& stability = *teacher.log.stability;
        c.stability_eq2 = stability.stability_eq2;
        c.stability_alg1 = stability.stability_alg1;
        c.stability_alg1_population = stability.stability_alg1_population;
        c.inter_stability = stability.inter_stability;
        c.profile_max = stability.max_profile_entry();
        if (teacher.log.geometry) {
          const GeometryReport& geo = *teacher.log.geometry;
          c.dc_full = geo.dc_full;
          c.dc_2d = geo.dc_2d;
          c.pair_spread = (geo.spread_a_full + geo.spread_b_full) / 2.0;
        }
        try {
          StudentRun student =
              distill_student(teacher.model, cfg, unit.seed, setting, data);
          c.student_val_top1 = student.log.final_val_top1();
          c.student_val_topk = student.log.epochs.back().val_topk;
          c.student_final_train_loss = student.log.final_train_loss();
          save_checkpoint(student.model, cfg.student.train.epochs,
                          output_dir / ("student_" + c.key.id() + ".ckpt"));
          write_epochs_csv(
              output_dir / ("student_epochs_" + c.key.id() + ".csv"),
              student.log);
        } catch (const DomainError& e) {
          c.failed = true;
          c.error = e.what();
        }
        outcomes.push_back(std::move(c));
      }
    } catch (const DomainError& e) {
      fail_all(e.what());
    }
    char buf[128];
    std::snprintf(buf, sizeof(buf), "%s %.3f", teacher_tag(unit.seed, unit.alpha).c_str(),
                  elapsed_seconds(start));
    timing[unit_index] = buf;
  };

  const int workers =
      std::max(1, std::min<int>(jobs, static_cast<int>(units.size())));
  if (workers == 1) {
    for (size_t i = 0; i < units.size(); ++i) run_unit(i);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(workers));
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&]() {
        for (;;) {
          const size_t i = cursor.fetch_add(1);
          if (i >= units.size()) return;
          run_unit(i);
        }
      });
    }
    for (std::thread& t : pool) t.join();
  }

  MatrixReport report;
  for (auto& outcomes : unit_outcomes) {
    for (auto& c : outcomes) report.cells.push_back(std::move(c));
  }
  std::sort(report.cells.begin(), report.cells.end(),
            [](const CellOutcome& a, const CellOutcome& b) {
              return a.key.id() < b.key.id();
            });
  report.config_hash = hex_string(fnv1a(resolved_config_text(cfg)));

  write_cells_csv(output_dir / "cells.csv", report.cells);
  {
    std::ofstream summary(output_dir / "summary.txt");
    write_matrix_summary(summary, report, cfg);
  }
  {
    // wall-clock scratch; the only output that is not run-deterministic
    std::ofstream t(output_dir / "timing.txt");
    for (const std::string& line : timing) t << line << "\n";
  }
  return report;
}

namespace {

struct Stats {
  double mean = 0.0;
  double stddev = 0.0;
};

Stats mean_std(const std::vector<double>& xs) {
  Stats s;
  if (xs.empty()) return s;
  s.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - s.mean) * (x - s.mean);
    s.stddev = std::sqrt(ss / (xs.size() - 1));
  }
  return s;
}

}  // namespace

void write_manifest(const std::filesystem::path& dir,
                    const std::string& resolved_config) {
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    if (entry.path().filename() == "manifest.txt") continue;
    files.push_back(std::filesystem::relative(entry.path(), dir));
  }
  std::sort(files.begin(), files.end());

  std::ofstream out(dir / "manifest.txt");
  if (!out) {
    throw DomainError(ErrorKind::kDataError,
                      "cannot open manifest for writing in " + dir.string());
  }
  out << "distillab-manifest v1\n";
  out << "config_hash " << hex_string(fnv1a(resolved_config)) << "\n";
  out << "files " << files.size() << "\n";
  for (const auto& rel : files) {
    std::ifstream in(dir / rel, std::ios::binary);
    std::stringstream buffer;
    buffer << in.rdbuf();
    const std::string bytes = buffer.str();
    out << "file " << rel.generic_string() << " " << bytes.size() << " "
        << hex_string(fnv1a(bytes)) << "\n";
  }
  out << "resolved_config:\n" << resolved_config;
}

void write_matrix_summary(std::ostream& out, const MatrixReport& report,
                          const ExperimentConfig& cfg) {
  out << "matrix-summary v1\n";
  out << "config_hash " << report.config_hash << "\n";
  out << "cells " << report.cells.size() << "\n";
  int failures = 0;
  for (const CellOutcome& c : report.cells) {
    if (c.failed) ++failures;
  }
  out << "failed_cells " << failures << "\n";
  out << "loss_convention per-example mean\n";

  // group by (alpha, lambda, temperature)
  std::map<std::string, std::vector<const CellOutcome*>> groups;
  for (const CellOutcome& c : report.cells) {
    if (c.failed) continue;
    char key[96];
    std::snprintf(key, sizeof(key), "a%.4f_l%.4f_t%.4f", c.key.teacher_alpha,
                  c.key.lambda, c.key.temperature);
    groups[key].push_back(&c);
  }
  for (const auto& [key, cells] : groups) {
    auto collect = [&](auto field) {
      std::vector<double> xs;
      xs.reserve(cells.size());
      for (const CellOutcome* c : cells) xs.push_back(field(*c));
      return mean_std(xs);
    };
    Stats teacher = collect([](const CellOutcome& c) { return c.teacher_val_top1; });
    Stats student = collect([](const CellOutcome& c) { return c.student_val_top1; });
    Stats loss = collect([](const CellOutcome& c) { return c.student_final_train_loss; });
    Stats variance = collect([](const CellOutcome& c) { return 1.0 - c.stability_eq2; });
    Stats inter = collect([](const CellOutcome& c) { return 1.0 - c.inter_stability; });
    Stats profile = collect([](const CellOutcome& c) { return c.profile_max; });
    Stats dc = collect([](const CellOutcome& c) { return c.dc_full; });
    Stats spread = collect([](const CellOutcome& c) { return c.pair_spread; });
    out << "setting " << key << " n " << cells.size() << "\n";
    out << "  teacher_val_top1 " << fixed6(teacher.mean) << " +- "
        << fixed6(teacher.stddev) << "\n";
    out << "  student_val_top1 " << fixed6(student.mean) << " +- "
        << fixed6(student.stddev) << "\n";
    out << "  student_final_train_loss " << fixed6(loss.mean) << " +- "
        << fixed6(loss.stddev) << "\n";
    out << "  intra_variance_eq2 " << fixed6(variance.mean) << " +- "
        << fixed6(variance.stddev) << "\n";
    out << "  inter_variance " << fixed6(inter.mean) << " +- "
        << fixed6(inter.stddev) << "\n";
    out << "  profile_max " << fixed6(profile.mean) << " +- "
        << fixed6(profile.stddev) << "\n";
    out << "  dc_full " << fixed6(dc.mean) << " +- " << fixed6(dc.stddev)
        << "\n";
    out << "  pair_spread " << fixed6(spread.mean) << " +- "
        << fixed6(spread.stddev) << "\n";
  }

  std::vector<DistillConfig> settings{cfg.distill};
  for (double l : cfg.lambda_presets) {
    DistillConfig d = cfg.distill;
    d.lambda = l;
    settings.push_back(d);
  }
  for (const DistillConfig& setting : settings) {
    PairedCounts counts =
        report.paired_counts(setting.lambda, setting.temperature);
    if (counts.seeds == 0) continue;
    char key[64];
    std::snprintf(key, sizeof(key), "l%.4f_t%.4f", setting.lambda,
                  setting.temperature);
    out << "sign_tests " << key << " seeds " << counts.seeds << "\n";
    out << "  intra_variance_lower_with_ls " << counts.variance_lower_with_ls
        << "/" << counts.seeds << "\n";
    out << "  profile_max_lower_with_ls " << counts.profile_max_lower_with_ls
        << "/" << counts.seeds << "\n";
    out << "  distill_train_loss_higher_with_ls "
        << counts.distill_loss_higher_with_ls << "/" << counts.seeds << "\n";
    out << "  dc_full_larger_with_ls " << counts.dc_full_larger_with_ls << "/"
        << counts.seeds << "\n";
    out << "  pair_spread_smaller_with_ls " << counts.spread_smaller_with_ls
        << "/" << counts.seeds << "\n";
    out << "  student_val_top1_ls " << fixed6(counts.mean_student_val_ls)
        << "\n";
    out << "  student_val_top1_hard " << fixed6(counts.mean_student_val_hard)
        << "\n";
  }
}

}  // namespace distillab
