#include "distillab/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>

namespace distillab {

void GroupedProbs::validate() const {
  if (num_classes < 1 ||
      members.size() != static_cast<size_t>(num_classes)) {
    throw DomainError(ErrorKind::kGroupingError,
                      "grouping needs one member list per class");
  }
  for (int c = 0; c < num_classes; ++c) {
    if (members[static_cast<size_t>(c)].empty()) {
      throw DomainError(ErrorKind::kGroupingError,
                        "class " + std::to_string(c) + " has no members");
    }
    for (const Vec& p : members[static_cast<size_t>(c)]) {
      if (p.size() != static_cast<size_t>(num_classes)) {
        throw DomainError(ErrorKind::kShapeError,
                          "probability vector length does not equal K");
      }
    }
  }
}

int GroupedProbs::total() const {
  int n = 0;
  for (const auto& group : members) n += static_cast<int>(group.size());
  return n;
}

GroupedProbs GroupedProbs::from_rows(const Matrix& probs,
                                     std::span<const int> labels,
                                     int num_classes) {
  if (probs.rows != static_cast<int>(labels.size())) {
    throw DomainError(ErrorKind::kShapeError,
                      "probability row count does not match label count");
  }
  if (probs.cols != num_classes) {
    throw DomainError(ErrorKind::kShapeError,
                      "probability width does not match class count");
  }
  GroupedProbs g;
  g.num_classes = num_classes;
  g.members.resize(static_cast<size_t>(num_classes));
  for (int i = 0; i < probs.rows; ++i) {
    int label = labels[static_cast<size_t>(i)];
    if (label < 0 || label >= num_classes) {
      throw DomainError(ErrorKind::kGroupingError,
                        "label " + std::to_string(label) + " out of range");
    }
    auto row = probs.row(i);
    g.members[static_cast<size_t>(label)].emplace_back(row.begin(), row.end());
  }
  g.validate();
  return g;
}

namespace {

Vec class_mean(const std::vector<Vec>& group, int k) {
  Vec mean(static_cast<size_t>(k), 0.0);
  for (const Vec& p : group) {
    for (int c = 0; c < k; ++c) mean[static_cast<size_t>(c)] += p[static_cast<size_t>(c)];
  }
  for (double& v : mean) v /= static_cast<double>(group.size());
  return mean;
}

}  // namespace

double intra_stability_eq2(const GroupedProbs& g) {
  g.validate();
  double variance_sum = 0.0;
  for (int c = 0; c < g.num_classes; ++c) {
    const auto& group = g.members[static_cast<size_t>(c)];
    Vec mean = class_mean(group, g.num_classes);
    double class_term = 0.0;
    for (const Vec& p : group) class_term += squared_distance(p, mean);
    variance_sum += class_term / static_cast<double>(group.size());
  }
  return 1.0 - variance_sum / g.num_classes;
}

double intra_stability_alg1(const GroupedProbs& g, StdMode mode) {
  g.validate();
  double std_sum = 0.0;
  for (int c = 0; c < g.num_classes; ++c) {
    const auto& group = g.members[static_cast<size_t>(c)];
    const size_t n = group.size();
    double mean = 0.0;
    for (const Vec& p : group) mean += p[static_cast<size_t>(c)];
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (const Vec& p : group) {
      double d = p[static_cast<size_t>(c)] - mean;
      ss += d * d;
    }
    if (mode == StdMode::kSample) {
      if (n > 1) std_sum += std::sqrt(ss / static_cast<double>(n - 1));
    } else {
      std_sum += std::sqrt(ss / static_cast<double>(n));
    }
  }
  return 1.0 - std_sum / g.num_classes;
}

double inter_stability(const GroupedProbs& g) {
  g.validate();
  Vec global_mean(static_cast<size_t>(g.num_classes), 0.0);
  int total = 0;
  for (const auto& group : g.members) {
    for (const Vec& p : group) {
      for (int c = 0; c < g.num_classes; ++c) {
        global_mean[static_cast<size_t>(c)] += p[static_cast<size_t>(c)];
      }
      ++total;
    }
  }
  for (double& v : global_mean) v /= static_cast<double>(total);

  double deviation_sum = 0.0;
  for (int c = 0; c < g.num_classes; ++c) {
    Vec mean = class_mean(g.members[static_cast<size_t>(c)], g.num_classes);
    deviation_sum += squared_distance(mean, global_mean);
  }
  return 1.0 - deviation_sum / g.num_classes;
}

Matrix class_mean_profile(const GroupedProbs& g) {
  g.validate();
  Matrix profile(g.num_classes, g.num_classes);
  for (int c = 0; c < g.num_classes; ++c) {
    Vec mean = class_mean(g.members[static_cast<size_t>(c)], g.num_classes);
    std::copy(mean.begin(), mean.end(), profile.row(c).begin());
  }
  return profile;
}

Matrix minor_probability_profile(const Matrix& profile) {
  if (profile.rows != profile.cols) {
    throw DomainError(ErrorKind::kShapeError,
                      "profile must be a square class-mean matrix");
  }
  Matrix minor(profile.rows, profile.cols - 1);
  for (int r = 0; r < profile.rows; ++r) {
    int out = 0;
    for (int c = 0; c < profile.cols; ++c) {
      if (c == r) continue;
      minor.at(r, out++) = profile.at(r, c);
    }
  }
  return minor;
}

double StabilityReport::max_profile_entry() const {
  double m = 0.0;
  for (double v : per_class_mean.data) m = std::max(m, v);
  return m;
}

StabilityReport compute_stability_report(const GroupedProbs& g) {
  g.validate();
  StabilityReport report;
  report.num_classes = g.num_classes;
  report.total_examples = g.total();
  report.stability_eq2 = intra_stability_eq2(g);
  report.stability_alg1 = intra_stability_alg1(g, StdMode::kSample);
  report.stability_alg1_population =
      intra_stability_alg1(g, StdMode::kPopulation);
  report.inter_stability = inter_stability(g);
  report.per_class_mean = class_mean_profile(g);
  report.per_class_variance.resize(static_cast<size_t>(g.num_classes));
  report.class_counts.resize(static_cast<size_t>(g.num_classes));
  for (int c = 0; c < g.num_classes; ++c) {
    const auto& group = g.members[static_cast<size_t>(c)];
    double ss = 0.0;
    for (const Vec& p : group) {
      ss += squared_distance(p, report.per_class_mean.row(c));
    }
    report.per_class_variance[static_cast<size_t>(c)] =
        ss / static_cast<double>(group.size());
    report.class_counts[static_cast<size_t>(c)] =
        static_cast<int>(group.size());
  }
  return report;
}

namespace {

std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

}  // namespace

void write_stability_report(std::ostream& out, const StabilityReport& r) {
  out << "stability-report v1\n";
  out << "classes " << r.num_classes << "\n";
  out << "examples " << r.total_examples << "\n";
  out << "intra_stability_eq2 " << fixed6(r.stability_eq2) << "\n";
  out << "intra_variance_eq2 " << fixed6(1.0 - r.stability_eq2) << "\n";
  out << "intra_stability_alg1_sample " << fixed6(r.stability_alg1) << "\n";
  out << "intra_stability_alg1_population "
      << fixed6(r.stability_alg1_population) << "\n";
  out << "inter_stability " << fixed6(r.inter_stability) << "\n";
  out << "inter_variance " << fixed6(1.0 - r.inter_stability) << "\n";
  out << "max_class_mean_entry " << fixed6(r.max_profile_entry()) << "\n";
  out << "per_class class count variance mean_target_prob\n";
  for (int c = 0; c < r.num_classes; ++c) {
    out << "class " << c << " " << r.class_counts[static_cast<size_t>(c)]
        << " " << fixed6(r.per_class_variance[static_cast<size_t>(c)]) << " "
        << fixed6(r.per_class_mean.at(c, c)) << "\n";
  }
}

void write_probability_dump(const std::filesystem::path& path,
                            const Matrix& probs, std::span<const int> labels) {
  if (probs.rows != static_cast<int>(labels.size())) {
    throw DomainError(ErrorKind::kShapeError,
                      "probability row count does not match label count");
  }
  std::ofstream out(path);
  if (!out) {
    throw DomainError(ErrorKind::kDataError,
                      "cannot open dump for writing: " + path.string());
  }
  out << "example_id,label";
  for (int c = 0; c < probs.cols; ++c) out << ",p_" << c;
  out << "\n";
  char buf[64];
  for (int i = 0; i < probs.rows; ++i) {
    out << i << "," << labels[static_cast<size_t>(i)];
    for (int c = 0; c < probs.cols; ++c) {
      // 12 decimals keeps re-read rows inside the 1e-9 sum tolerance
      std::snprintf(buf, sizeof(buf), "%.12f", probs.at(i, c));
      out << "," << buf;
    }
    out << "\n";
  }
}

ProbabilityDump read_probability_dump(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw DomainError(ErrorKind::kDataError,
                      "cannot open dump: " + path.string());
  }
  std::string line;
  if (!std::getline(in, line) || line.rfind("example_id,label", 0) != 0) {
    throw DomainError(ErrorKind::kDataError,
                      "not a probability dump (bad header): " + path.string());
  }
  int num_classes = 0;
  for (char ch : line) {
    if (ch == ',') ++num_classes;
  }
  num_classes -= 1;  // example_id,label columns
  if (num_classes < 2) {
    throw DomainError(ErrorKind::kDataError,
                      "probability dump needs at least 2 classes");
  }
  std::vector<double> values;
  std::vector<int> labels;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string cell;
    std::getline(ls, cell, ',');  // example_id, positional
    std::getline(ls, cell, ',');
    labels.push_back(std::stoi(cell));
    for (int c = 0; c < num_classes; ++c) {
      if (!std::getline(ls, cell, ',')) {
        throw DomainError(ErrorKind::kDataError,
                          "short probability row in " + path.string());
      }
      values.push_back(std::stod(cell));
    }
  }
  ProbabilityDump dump;
  dump.num_classes = num_classes;
  dump.labels = std::move(labels);
  dump.probs = Matrix(static_cast<int>(dump.labels.size()), num_classes);
  dump.probs.data = std::move(values);
  for (int i = 0; i < dump.probs.rows; ++i) {
    validate_probabilities(dump.probs.row(i));
  }
  return dump;
}

}  // namespace distillab
