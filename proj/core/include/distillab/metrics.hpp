#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "distillab/losses.hpp"
#include "distillab/matrix.hpp"

namespace distillab {

// Output distributions grouped by true class; every class 0..K-1 must hold at
// least one member and every member has length K.
struct GroupedProbs {
  int num_classes = 0;
  std::vector<std::vector<Vec>> members;  // members[c][i]

  void validate() const;
  int count(int c) const { return static_cast<int>(members[c].size()); }
  int total() const;

  static GroupedProbs from_rows(const Matrix& probs,
                                std::span<const int> labels, int num_classes);
};

enum class StdMode { kSample, kPopulation };

// 1 - (1/K) sum_c (1/n_c) sum_i ||p_{i,c} - mean_c||^2
double intra_stability_eq2(const GroupedProbs& g);

// 1 - (1/K) sum_c std_i(p_{i,c}[c]); the reference-code variant that only
// looks at the target-class probability. Sample std matches the tensor
// library default; singleton classes contribute 0 under either mode.
double intra_stability_alg1(const GroupedProbs& g,
                            StdMode mode = StdMode::kSample);

// 1 - (1/K) sum_c ||mean_c - mean_all||^2, mean_all taken over every example.
double inter_stability(const GroupedProbs& g);

// Row c is the class-mean distribution; rows sum to 1.
Matrix class_mean_profile(const GroupedProbs& g);

// Row c of the profile with entry c removed (K x (K-1)): the small
// probabilities a supervision distribution assigns to the other classes.
Matrix minor_probability_profile(const Matrix& profile);

struct StabilityReport {
  int num_classes = 0;
  int total_examples = 0;
  double stability_eq2 = 0.0;
  double stability_alg1 = 0.0;
  double stability_alg1_population = 0.0;
  double inter_stability = 0.0;
  Vec per_class_variance;   // mean squared deviation from the class mean
  Matrix per_class_mean;    // K x K, rows sum to 1
  std::vector<int> class_counts;

  double max_profile_entry() const;
};

StabilityReport compute_stability_report(const GroupedProbs& g);

void write_stability_report(std::ostream& out, const StabilityReport& report);

// Probability dump row format: example_id,label,p_0,...,p_{K-1}
struct ProbabilityDump {
  Matrix probs;
  std::vector<int> labels;
  int num_classes = 0;
};

void write_probability_dump(const std::filesystem::path& path,
                            const Matrix& probs, std::span<const int> labels);
ProbabilityDump read_probability_dump(const std::filesystem::path& path);

}  // namespace distillab
