#pragma once

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "distillab/matrix.hpp"

namespace distillab {

// Gaussian class clusters with one designated semantically-similar pair: its
// means sit at distance delta_near while every other pair of means is at
// least delta_far apart.
struct ClusterSpec {
  int num_classes = 10;
  int dim = 32;
  double sigma = 1.0;
  std::pair<int, int> similar_pair{0, 1};
  double delta_near = 2.0;
  double delta_far = 8.0;
  int per_class = 200;
  uint64_t seed = 0;
  // Optional explicit means (num_classes rows); empty means auto placement.
  std::vector<Vec> means;

  void validate() const;
};

struct LongTailSpec {
  double pareto_power = 6.0;
  int max_per_class = 100;
  int min_per_class = 5;
  uint64_t seed = 0;
  // power -> infinity limit: every class keeps max_per_class
  bool balanced = false;

  void validate() const;
};

struct LabeledDataset {
  int num_classes = 0;
  Matrix features;          // N x dim
  std::vector<int> labels;  // N, values in 0..num_classes-1

  int size() const { return features.rows; }
  int dim() const { return features.cols; }
  std::vector<int> class_counts() const;
  void validate() const;
};

// Deterministic mean placement: orthogonal-axis layout when dim >= K,
// collinear chain otherwise. Throws spec-error when infeasible.
std::vector<Vec> place_cluster_means(const ClusterSpec& spec);

LabeledDataset gen_clusters(const ClusterSpec& spec);

// Per-rank kept counts: round(max * (1 + r * ((max/min)^power - 1)/(K-1))^(-1/power)),
// clipped to [min, max]. Rank 0 keeps exactly max, the last rank exactly min.
std::vector<int> pareto_class_counts(const LongTailSpec& spec,
                                     int num_classes);

// Class c (ranked by index) keeps the Pareto count, subsampled uniformly
// without replacement.
LabeledDataset pareto_resample(const LabeledDataset& d,
                               const LongTailSpec& spec);

// Keeps k uniformly chosen classes and relabels them to 0..k-1 preserving the
// original class order.
LabeledDataset curate_subset(const LabeledDataset& d, int k, uint64_t seed);

struct SplitDataset {
  LabeledDataset train;
  LabeledDataset val;
};

// Stratified by class: floor(n_c * val_fraction) validation members per
// class, the rest train. Both sides must keep every class non-empty.
SplitDataset split(const LabeledDataset& d, double val_fraction,
                   uint64_t seed);

// CSV rows: label,f_0,...,f_{dim-1}; a sidecar "<path>.spec" records the
// generating spec when one is supplied.
void write_dataset_csv(const std::filesystem::path& path,
                       const LabeledDataset& d,
                       const ClusterSpec* generated_from = nullptr);
LabeledDataset read_dataset_csv(const std::filesystem::path& path);

}  // namespace distillab
