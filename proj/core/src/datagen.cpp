#include "distillab/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>

#include "distillab/rng.hpp"

namespace distillab {

void ClusterSpec::validate() const {
  if (num_classes < 2) {
    throw DomainError(ErrorKind::kSpecError, "need at least 2 classes");
  }
  if (dim < 1) {
    throw DomainError(ErrorKind::kSpecError, "feature dim must be >= 1");
  }
  if (per_class < 2) {
    throw DomainError(ErrorKind::kSpecError, "per_class must be >= 2");
  }
  if (sigma < 0.0) {
    throw DomainError(ErrorKind::kSpecError, "sigma must be >= 0");
  }
  if (similar_pair.first == similar_pair.second) {
    throw DomainError(ErrorKind::kSpecError,
                      "similar pair must name two distinct classes");
  }
  if (similar_pair.first < 0 || similar_pair.first >= num_classes ||
      similar_pair.second < 0 || similar_pair.second >= num_classes) {
    throw DomainError(ErrorKind::kSpecError, "similar pair out of range");
  }
  if (!(delta_near < delta_far)) {
    throw DomainError(ErrorKind::kSpecError,
                      "delta_near must be smaller than delta_far");
  }
  if (!(delta_near > 0.0)) {
    throw DomainError(ErrorKind::kSpecError, "delta_near must be positive");
  }
  if (!means.empty()) {
    if (means.size() != static_cast<size_t>(num_classes)) {
      throw DomainError(ErrorKind::kSpecError,
                        "explicit means must cover every class");
    }
    for (const Vec& m : means) {
      if (m.size() != static_cast<size_t>(dim)) {
        throw DomainError(ErrorKind::kSpecError,
                          "explicit mean has wrong dimension");
      }
      for (double v : m) {
        if (!std::isfinite(v)) {
          throw DomainError(ErrorKind::kSpecError, "non-finite explicit mean");
        }
      }
    }
  }
}

void LongTailSpec::validate() const {
  if (min_per_class < 1) {
    throw DomainError(ErrorKind::kSpecError, "min_per_class must be >= 1");
  }
  if (max_per_class < min_per_class) {
    throw DomainError(ErrorKind::kSpecError,
                      "max_per_class must be >= min_per_class");
  }
  if (!(pareto_power > 0.0)) {
    throw DomainError(ErrorKind::kSpecError, "pareto power must be positive");
  }
}

std::vector<int> LabeledDataset::class_counts() const {
  std::vector<int> counts(static_cast<size_t>(num_classes), 0);
  for (int label : labels) ++counts[static_cast<size_t>(label)];
  return counts;
}

void LabeledDataset::validate() const {
  if (features.rows != static_cast<int>(labels.size())) {
    throw DomainError(ErrorKind::kDataError,
                      "feature rows and labels disagree");
  }
  for (int label : labels) {
    if (label < 0 || label >= num_classes) {
      throw DomainError(ErrorKind::kDataError,
                        "label " + std::to_string(label) + " out of range");
    }
  }
  for (double v : features.data) {
    if (!std::isfinite(v)) {
      throw DomainError(ErrorKind::kDataError, "non-finite feature value");
    }
  }
}

std::vector<Vec> place_cluster_means(const ClusterSpec& spec) {
  spec.validate();
  if (!spec.means.empty()) return spec.means;

  const int k = spec.num_classes;
  const auto [a, b] = spec.similar_pair;
  std::vector<Vec> means(static_cast<size_t>(k),
                         Vec(static_cast<size_t>(spec.dim), 0.0));
  if (spec.dim >= k) {
    // axis placement: class c at (delta_far/sqrt(2)) * e_c, except the second
    // pair member which sits delta_near away from the first along its own
    // unused axis.
    const double q = spec.delta_far / std::sqrt(2.0);
    for (int c = 0; c < k; ++c) {
      if (c == b) continue;
      means[static_cast<size_t>(c)][static_cast<size_t>(c)] = q;
    }
    means[static_cast<size_t>(b)][static_cast<size_t>(a)] = q;
    means[static_cast<size_t>(b)][static_cast<size_t>(b)] = spec.delta_near;
  } else {
    // collinear chain along e_0: far classes at 0, -delta_far, -2*delta_far,
    // ... and the second pair member on the opposite side of the first.
    if (spec.dim < 1) {
      throw DomainError(ErrorKind::kSpecError,
                        "cannot place means in dimension 0");
    }
    double position = 0.0;
    means[static_cast<size_t>(a)][0] = 0.0;
    for (int c = 0; c < k; ++c) {
      if (c == a || c == b) continue;
      position -= spec.delta_far;
      means[static_cast<size_t>(c)][0] = position;
    }
    means[static_cast<size_t>(b)][0] = spec.delta_near;
  }
  return means;
}

LabeledDataset gen_clusters(const ClusterSpec& spec) {
  std::vector<Vec> means = place_cluster_means(spec);
  LabeledDataset d;
  d.num_classes = spec.num_classes;
  d.features = Matrix(spec.num_classes * spec.per_class, spec.dim);
  d.labels.resize(static_cast<size_t>(d.features.rows));
  Rng rng(mix_seed(spec.seed, 0x67656e));
  int row = 0;
  for (int c = 0; c < spec.num_classes; ++c) {
    const Vec& mean = means[static_cast<size_t>(c)];
    for (int i = 0; i < spec.per_class; ++i, ++row) {
      d.labels[static_cast<size_t>(row)] = c;
      std::span<double> out = d.features.row(row);
      for (int j = 0; j < spec.dim; ++j) {
        out[static_cast<size_t>(j)] =
            rng.normal(mean[static_cast<size_t>(j)], spec.sigma);
      }
    }
  }
  d.validate();
  return d;
}

std::vector<int> pareto_class_counts(const LongTailSpec& spec,
                                     int num_classes) {
  spec.validate();
  if (num_classes < 1) {
    throw DomainError(ErrorKind::kSpecError, "need at least one class");
  }
  std::vector<int> counts(static_cast<size_t>(num_classes));
  if (spec.balanced || spec.max_per_class == spec.min_per_class) {
    std::fill(counts.begin(), counts.end(), spec.max_per_class);
    return counts;
  }
  if (num_classes == 1) {
    counts.front() = spec.max_per_class;
    return counts;
  }
  const double ratio =
      static_cast<double>(spec.max_per_class) / spec.min_per_class;
  const double top = std::pow(ratio, spec.pareto_power);
  for (int r = 0; r < num_classes; ++r) {
    const double scale = 1.0 + (top - 1.0) * r / (num_classes - 1);
    double n = spec.max_per_class * std::pow(scale, -1.0 / spec.pareto_power);
    int rounded = static_cast<int>(std::lround(n));
    counts[static_cast<size_t>(r)] =
        std::clamp(rounded, spec.min_per_class, spec.max_per_class);
  }
  counts.front() = spec.max_per_class;
  counts.back() = spec.min_per_class;
  for (size_t r = 1; r < counts.size(); ++r) {
    counts[r] = std::min(counts[r], counts[r - 1]);
  }
  return counts;
}

namespace {

LabeledDataset take_rows(const LabeledDataset& d,
                         const std::vector<int>& rows, int num_classes) {
  LabeledDataset out;
  out.num_classes = num_classes;
  out.features = Matrix(static_cast<int>(rows.size()), d.features.cols);
  out.labels.resize(rows.size());
  for (size_t i = 0; i < rows.size(); ++i) {
    auto src = d.features.row(rows[i]);
    std::copy(src.begin(), src.end(),
              out.features.row(static_cast<int>(i)).begin());
    out.labels[i] = d.labels[static_cast<size_t>(rows[i])];
  }
  return out;
}

std::vector<std::vector<int>> rows_by_class(const LabeledDataset& d) {
  std::vector<std::vector<int>> by_class(
      static_cast<size_t>(d.num_classes));
  for (int i = 0; i < d.size(); ++i) {
    by_class[static_cast<size_t>(d.labels[static_cast<size_t>(i)])].push_back(
        i);
  }
  return by_class;
}

}  // namespace

LabeledDataset pareto_resample(const LabeledDataset& d,
                               const LongTailSpec& spec) {
  d.validate();
  std::vector<int> counts = pareto_class_counts(spec, d.num_classes);
  auto by_class = rows_by_class(d);
  for (int c = 0; c < d.num_classes; ++c) {
    if (static_cast<int>(by_class[static_cast<size_t>(c)].size()) <
        spec.max_per_class) {
      throw DomainError(
          ErrorKind::kDataError,
          "class " + std::to_string(c) + " has only " +
              std::to_string(by_class[static_cast<size_t>(c)].size()) +
              " examples, need >= max_per_class = " +
              std::to_string(spec.max_per_class));
    }
  }
  Rng rng(mix_seed(spec.seed, 0x706172));
  std::vector<int> kept;
  for (int c = 0; c < d.num_classes; ++c) {
    auto& rows = by_class[static_cast<size_t>(c)];
    const int keep = counts[static_cast<size_t>(c)];
    // partial Fisher-Yates: uniform without replacement
    for (int i = 0; i < keep; ++i) {
      const auto j = static_cast<size_t>(
          i + static_cast<int>(rng.uniform_index(rows.size() - i)));
      std::swap(rows[static_cast<size_t>(i)], rows[j]);
    }
    std::vector<int> chosen(rows.begin(), rows.begin() + keep);
    std::sort(chosen.begin(), chosen.end());  // original row order preserved
    kept.insert(kept.end(), chosen.begin(), chosen.end());
  }
  LabeledDataset out = take_rows(d, kept, d.num_classes);
  out.validate();
  return out;
}

LabeledDataset curate_subset(const LabeledDataset& d, int k, uint64_t seed) {
  d.validate();
  if (k > d.num_classes) {
    throw DomainError(ErrorKind::kSpecError,
                      "cannot keep " + std::to_string(k) + " of " +
                          std::to_string(d.num_classes) + " classes");
  }
  if (k < 2) {
    throw DomainError(ErrorKind::kSpecError,
                      "curated subset needs at least 2 classes");
  }
  Rng rng(mix_seed(seed, 0x637572));
  std::vector<int> classes(static_cast<size_t>(d.num_classes));
  std::iota(classes.begin(), classes.end(), 0);
  for (int i = 0; i < k; ++i) {
    const auto j = static_cast<size_t>(
        i + static_cast<int>(rng.uniform_index(classes.size() - i)));
    std::swap(classes[static_cast<size_t>(i)], classes[j]);
  }
  std::vector<int> keep(classes.begin(), classes.begin() + k);
  std::sort(keep.begin(), keep.end());
  std::vector<int> relabel(static_cast<size_t>(d.num_classes), -1);
  for (int i = 0; i < k; ++i) relabel[static_cast<size_t>(keep[static_cast<size_t>(i)])] = i;

  std::vector<int> rows;
  for (int i = 0; i < d.size(); ++i) {
    if (relabel[static_cast<size_t>(d.labels[static_cast<size_t>(i)])] >= 0) {
      rows.push_back(i);
    }
  }
  LabeledDataset out = take_rows(d, rows, k);
  for (int& label : out.labels) label = relabel[static_cast<size_t>(label)];
  out.validate();
  return out;
}

SplitDataset split(const LabeledDataset& d, double val_fraction,
                   uint64_t seed) {
  d.validate();
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
    throw DomainError(ErrorKind::kSpecError,
                      "val_fraction must lie strictly between 0 and 1");
  }
  auto by_class = rows_by_class(d);
  Rng rng(mix_seed(seed, 0x73706c));
  std::vector<int> train_rows;
  std::vector<int> val_rows;
  for (int c = 0; c < d.num_classes; ++c) {
    auto& rows = by_class[static_cast<size_t>(c)];
    const int n = static_cast<int>(rows.size());
    const int n_val = static_cast<int>(std::floor(n * val_fraction));
    if (n_val < 1 || n - n_val < 1) {
      throw DomainError(ErrorKind::kDataError,
                        "class " + std::to_string(c) + " with " +
                            std::to_string(n) +
                            " examples is too small to stratify at fraction " +
                            std::to_string(val_fraction));
    }
    for (int i = 0; i < n_val; ++i) {
      const auto j = static_cast<size_t>(
          i + static_cast<int>(rng.uniform_index(rows.size() - i)));
      std::swap(rows[static_cast<size_t>(i)], rows[j]);
    }
    std::vector<int> val_part(rows.begin(), rows.begin() + n_val);
    std::vector<int> train_part(rows.begin() + n_val, rows.end());
    std::sort(val_part.begin(), val_part.end());
    std::sort(train_part.begin(), train_part.end());
    val_rows.insert(val_rows.end(), val_part.begin(), val_part.end());
    train_rows.insert(train_rows.end(), train_part.begin(), train_part.end());
  }
  std::sort(train_rows.begin(), train_rows.end());
  std::sort(val_rows.begin(), val_rows.end());
  SplitDataset out;
  out.train = take_rows(d, train_rows, d.num_classes);
  out.val = take_rows(d, val_rows, d.num_classes);
  out.train.validate();
  out.val.validate();
  return out;
}

void write_dataset_csv(const std::filesystem::path& path,
                       const LabeledDataset& d,
                       const ClusterSpec* generated_from) {
  d.validate();
  std::ofstream out(path);
  if (!out) {
    throw DomainError(ErrorKind::kDataError,
                      "cannot open dataset for writing: " + path.string());
  }
  out << "label";
  for (int j = 0; j < d.dim(); ++j) out << ",f_" << j;
  out << "\n";
  char buf[64];
  for (int i = 0; i < d.size(); ++i) {
    out << d.labels[static_cast<size_t>(i)];
    for (int j = 0; j < d.dim(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.12f", d.features.at(i, j));
      out << "," << buf;
    }
    out << "\n";
  }

  std::filesystem::path sidecar = path;
  sidecar += ".spec";
  std::ofstream meta(sidecar);
  meta << "distillab-dataset v1\n";
  meta << "classes " << d.num_classes << "\n";
  meta << "dim " << d.dim() << "\n";
  meta << "rows " << d.size() << "\n";
  if (generated_from != nullptr) {
    meta << "generator clusters\n";
    meta << "sigma " << generated_from->sigma << "\n";
    meta << "similar_pair " << generated_from->similar_pair.first << " "
         << generated_from->similar_pair.second << "\n";
    meta << "delta_near " << generated_from->delta_near << "\n";
    meta << "delta_far " << generated_from->delta_far << "\n";
    meta << "per_class " << generated_from->per_class << "\n";
    meta << "seed " << generated_from->seed << "\n";
  }
}

LabeledDataset read_dataset_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw DomainError(ErrorKind::kDataError,
                      "cannot open dataset: " + path.string());
  }
  std::string line;
  if (!std::getline(in, line) || line.rfind("label", 0) != 0) {
    throw DomainError(ErrorKind::kDataError,
                      "not a dataset CSV (bad header): " + path.string());
  }
  int dim = 0;
  for (char ch : line) {
    if (ch == ',') ++dim;
  }
  if (dim < 1) {
    throw DomainError(ErrorKind::kDataError, "dataset has no feature columns");
  }
  std::vector<double> values;
  std::vector<int> labels;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string cell;
    std::getline(ls, cell, ',');
    labels.push_back(std::stoi(cell));
    for (int j = 0; j < dim; ++j) {
      if (!std::getline(ls, cell, ',')) {
        throw DomainError(ErrorKind::kDataError,
                          "short dataset row in " + path.string());
      }
      values.push_back(std::stod(cell));
    }
  }
  LabeledDataset d;
  d.num_classes =
      labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
  d.labels = std::move(labels);
  d.features = Matrix(static_cast<int>(d.labels.size()), dim);
  d.features.data = std::move(values);
  d.validate();
  return d;
}

}  // namespace distillab
