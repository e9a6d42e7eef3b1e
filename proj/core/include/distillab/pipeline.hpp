#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "distillab/datagen.hpp"
#include "distillab/geometry.hpp"
#include "distillab/losses.hpp"
#include "distillab/metrics.hpp"
#include "distillab/net.hpp"

namespace distillab {

struct ModelConfig {
  std::vector<int> hidden{64, 64};
  Activation activation = Activation::kRelu;
  TrainConfig train;

  NetworkSpec network(int input_dim, int num_classes) const;
};

struct CurateConfig {
  int classes = 2;
};

struct DataConfig {
  enum class Source { kClusters, kFile };
  Source source = Source::kClusters;
  ClusterSpec clusters;
  std::filesystem::path file;
  double val_fraction = 0.2;
  std::optional<CurateConfig> curate;          // applied before splitting
  std::optional<LongTailSpec> long_tail;       // applied to the train split
};

struct ExperimentConfig {
  DataConfig data;
  ModelConfig teacher;
  double teacher_alpha = 0.1;
  ModelConfig student;
  DistillConfig distill;
  // Extra hard/soft mixing cells run alongside cfg.distill in a matrix.
  std::vector<double> lambda_presets;
  std::vector<uint64_t> seeds{1};
  int eval_topk = 3;
  std::filesystem::path output_dir = "out";

  void validate() const;
};

ExperimentConfig load_experiment_config(const std::filesystem::path& path);
ExperimentConfig parse_experiment_config(const std::string& json_text);
// Canonical serialization with every default filled in; its hash identifies
// the run in manifests.
std::string resolved_config_text(const ExperimentConfig& cfg);

struct EpochStat {
  double train_loss = 0.0;
  double val_top1 = 0.0;
  double val_topk = 0.0;
};

struct ExperimentLog {
  std::vector<EpochStat> epochs;
  int topk = 3;
  double final_train_accuracy = 0.0;
  std::optional<StabilityReport> stability;
  std::optional<GeometryReport> geometry;
  double wall_seconds = 0.0;

  double final_train_loss() const { return epochs.back().train_loss; }
  double final_val_top1() const { return epochs.back().val_top1; }
};

// Divergence aborts a run but keeps what was logged so far.
class DivergenceError : public DomainError {
 public:
  DivergenceError(const std::string& message, ExperimentLog partial)
      : DomainError(ErrorKind::kDivergenceError, message),
        partial_(std::move(partial)) {}

  const ExperimentLog& partial_log() const { return partial_; }

 private:
  ExperimentLog partial_;
};

// Deterministic per-cell data: generate (or load), curate, split with a
// balanced-by-construction validation set, then long-tail the train side.
SplitDataset build_cell_data(const DataConfig& cfg, uint64_t cell_seed);

// Mean of per-example losses over a feature matrix at the current parameters.
double dataset_mean_loss(const Model& model, const LogitLoss& loss,
                         const Matrix& features);

Matrix model_probabilities(const Model& model, const Matrix& features,
                           double temperature = 1.0);

// Top-k accuracy for each requested k; ties rank lower class indices first.
std::map<int, double> evaluate(const Model& model, const Matrix& features,
                               std::span<const int> labels,
                               std::span<const int> topk_list);

// Shared SGD epoch loop. Logs the running per-example mean train loss and
// validation accuracy each epoch; throws DivergenceError with the partial log
// when gradients or parameters stop being finite.
ExperimentLog train_model(Model& model, const LogitLoss& loss,
                          const SplitDataset& data, const TrainConfig& cfg,
                          int topk);

struct TeacherRun {
  Model model;
  ExperimentLog log;
  Matrix train_probs;  // temperature-1 probabilities on the train split
};

// Cross-entropy training against smoothed (alpha > 0) or hard targets. The
// log carries the stability report and, for cluster data, the geometry
// report on the train split.
TeacherRun train_teacher(const ExperimentConfig& cfg, uint64_t cell_seed,
                         double alpha, const SplitDataset& data,
                         bool with_geometry = true);

struct StudentRun {
  Model model;
  ExperimentLog log;
};

// The teacher is frozen: logits are computed once and only the student
// updates. lambda = 0 reduces to cross-entropy against teacher probabilities.
StudentRun distill_student(const Model& teacher, const ExperimentConfig& cfg,
                           uint64_t cell_seed, const DistillConfig& distill,
                           const SplitDataset& data);

struct CellKey {
  uint64_t seed = 0;
  double teacher_alpha = 0.0;
  double lambda = 0.0;
  double temperature = 1.0;

  std::string id() const;
};

struct CellOutcome {
  CellKey key;
  bool failed = false;
  std::string error;

  double teacher_val_top1 = 0.0;
  double teacher_val_topk = 0.0;
  double teacher_final_train_loss = 0.0;
  double teacher_train_accuracy = 0.0;
  double stability_eq2 = 0.0;
  double stability_alg1 = 0.0;
  double stability_alg1_population = 0.0;
  double inter_stability = 0.0;
  double profile_max = 0.0;
  double dc_full = 0.0;
  double dc_2d = 0.0;
  double pair_spread = 0.0;  // mean of the two within-class spreads
  double student_val_top1 = 0.0;
  double student_val_topk = 0.0;
  double student_final_train_loss = 0.0;
};

struct PairedCounts {
  int seeds = 0;
  int variance_lower_with_ls = 0;      // (1 - S_eq2) strictly lower
  int profile_max_lower_with_ls = 0;
  int distill_loss_higher_with_ls = 0;
  int dc_full_larger_with_ls = 0;
  int spread_smaller_with_ls = 0;
  double mean_student_val_ls = 0.0;
  double mean_student_val_hard = 0.0;
};

struct MatrixReport {
  std::vector<CellOutcome> cells;   // sorted by cell id
  std::string config_hash;

  // Directional comparisons of alpha = teacher_alpha vs alpha = 0 cells on
  // matched seeds, for the given distill setting.
  PairedCounts paired_counts(double lambda, double temperature) const;
};

// Runs every cell (seed x {0, teacher_alpha} x {distill, lambda presets}).
// Cells are independent; `jobs` sizes the worker pool and has no effect on
// any output byte. Failed cells are recorded and the matrix continues.
MatrixReport run_matrix(const ExperimentConfig& cfg, int jobs,
                        const std::filesystem::path& output_dir);

void write_cells_csv(const std::filesystem::path& path,
                     const std::vector<CellOutcome>& cells);
std::vector<CellOutcome> read_cells_csv(const std::filesystem::path& path);
void write_matrix_summary(std::ostream& out, const MatrixReport& report,
                          const ExperimentConfig& cfg);

// Writes <dir>/manifest.txt: the hash of the resolved configuration, one line
// per output file (path, size, content hash), then the configuration itself.
void write_manifest(const std::filesystem::path& dir,
                    const std::string& resolved_config);

}  // namespace distillab
