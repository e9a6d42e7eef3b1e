#pragma once

#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include "distillab/matrix.hpp"
#include "distillab/net.hpp"

namespace distillab {

// Row c of the final-layer weight matrix: the direction that maximizes the
// class-c logit.
Vec template_of(const Model& model, int class_index);

struct PlaneBasis {
  Vec u1;
  Vec u2;
};

// Orthonormal basis of the plane through three class templates, via
// Gram-Schmidt on (t2 - t1, t3 - t1). Throws geometry-error when the
// differences are collinear (angle <= 1e-6 rad).
PlaneBasis plane_basis(std::span<const double> t1, std::span<const double> t2,
                       std::span<const double> t3);

// p -> ((p - origin) . u1, (p - origin) . u2)
std::pair<double, double> project_point(std::span<const double> p,
                                        std::span<const double> origin,
                                        const PlaneBasis& basis);
Matrix project(const Matrix& points, std::span<const double> origin,
               const PlaneBasis& basis);

struct SeparationStats {
  double center_distance = 0.0;  // distance between the two cluster means
  double spread_a = 0.0;  // mean distance of class-a points to their mean
  double spread_b = 0.0;
  Vec distances_a;  // per-example distance to the own-cluster mean
  Vec distances_b;
};

// Works on points of any width (2D projections or full penultimate space).
SeparationStats cluster_separation(const Matrix& points,
                                   std::span<const int> labels, int class_a,
                                   int class_b);

struct GeometryReport {
  int class_a = 0;
  int class_b = 0;
  int reference_class = 0;
  PlaneBasis basis;
  Matrix points_2d;          // n x 2
  std::vector<int> labels;
  Matrix cluster_means_2d;   // K x 2
  double dc_2d = 0.0;        // similar-pair center distance in the plane
  double dc_full = 0.0;      // same distance in full penultimate space
  double spread_a_full = 0.0;
  double spread_b_full = 0.0;
  // Per-example distances from the pair classes to the reference-class
  // cluster mean in full space; the per-example analogue of "how similar is
  // this example to the reference class".
  Vec reference_distances_a;
  Vec reference_distances_b;
};

// Projects penultimate activations of `data` onto the plane through the
// templates of (class_a, class_b, reference_class) and measures the pair's
// separation both in-plane and in full space.
GeometryReport analyze_geometry(const Model& model, const Matrix& features,
                                std::span<const int> labels, int class_a,
                                int class_b, int reference_class);

void write_points_csv(const std::filesystem::path& path,
                      const Matrix& points_2d, std::span<const int> labels);
void write_scatter_svg(const std::filesystem::path& path,
                       const Matrix& points_2d, std::span<const int> labels);

}  // namespace distillab
