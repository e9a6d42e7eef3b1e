#include "distillab/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>

namespace distillab {

Vec template_of(const Model& model, int class_index) {
  if (class_index < 0 || class_index >= model.spec.num_classes) {
    throw DomainError(ErrorKind::kSpecError,
                      "class " + std::to_string(class_index) +
                          " out of range for K=" +
                          std::to_string(model.spec.num_classes));
  }
  auto row = model.weights.back().row(class_index);
  return Vec(row.begin(), row.end());
}

PlaneBasis plane_basis(std::span<const double> t1, std::span<const double> t2,
                       std::span<const double> t3) {
  if (t1.size() != t2.size() || t1.size() != t3.size()) {
    throw DomainError(ErrorKind::kShapeError,
                      "templates have different dimensions");
  }
  Vec v1(t1.size());
  Vec v2(t1.size());
  for (size_t i = 0; i < t1.size(); ++i) {
    v1[i] = t2[i] - t1[i];
    v2[i] = t3[i] - t1[i];
  }
  const double n1 = norm(v1);
  const double n2 = norm(v2);
  if (n1 == 0.0 || n2 == 0.0) {
    throw DomainError(ErrorKind::kGeometryError,
                      "coincident templates span no plane");
  }
  // sin(angle) between the two difference vectors
  const double cos_angle = std::clamp(dot(v1, v2) / (n1 * n2), -1.0, 1.0);
  if (std::sqrt(std::max(0.0, 1.0 - cos_angle * cos_angle)) <= 1e-6) {
    throw DomainError(ErrorKind::kGeometryError,
                      "templates are collinear; no unique plane");
  }
  PlaneBasis basis;
  basis.u1 = v1;
  for (double& v : basis.u1) v /= n1;
  basis.u2 = v2;
  const double proj = dot(basis.u2, basis.u1);
  for (size_t i = 0; i < basis.u2.size(); ++i) {
    basis.u2[i] -= proj * basis.u1[i];
  }
  const double n_u2 = norm(basis.u2);
  for (double& v : basis.u2) v /= n_u2;
  return basis;
}

std::pair<double, double> project_point(std::span<const double> p,
                                        std::span<const double> origin,
                                        const PlaneBasis& basis) {
  if (p.size() != origin.size() || p.size() != basis.u1.size()) {
    throw DomainError(ErrorKind::kShapeError,
                      "point dimension does not match the plane");
  }
  Vec centered(p.size());
  for (size_t i = 0; i < p.size(); ++i) centered[i] = p[i] - origin[i];
  return {dot(centered, basis.u1), dot(centered, basis.u2)};
}

Matrix project(const Matrix& points, std::span<const double> origin,
               const PlaneBasis& basis) {
  Matrix out(points.rows, 2);
  for (int i = 0; i < points.rows; ++i) {
    auto [x, y] = project_point(points.row(i), origin, basis);
    out.at(i, 0) = x;
    out.at(i, 1) = y;
  }
  return out;
}

SeparationStats cluster_separation(const Matrix& points,
                                   std::span<const int> labels, int class_a,
                                   int class_b) {
  if (points.rows != static_cast<int>(labels.size())) {
    throw DomainError(ErrorKind::kShapeError,
                      "point rows and labels disagree");
  }
  Vec mean_a(static_cast<size_t>(points.cols), 0.0);
  Vec mean_b(static_cast<size_t>(points.cols), 0.0);
  int n_a = 0;
  int n_b = 0;
  for (int i = 0; i < points.rows; ++i) {
    Vec* mean = nullptr;
    if (labels[static_cast<size_t>(i)] == class_a) {
      mean = &mean_a;
      ++n_a;
    } else if (labels[static_cast<size_t>(i)] == class_b) {
      mean = &mean_b;
      ++n_b;
    } else {
      continue;
    }
    auto row = points.row(i);
    for (int j = 0; j < points.cols; ++j) {
      (*mean)[static_cast<size_t>(j)] += row[static_cast<size_t>(j)];
    }
  }
  if (n_a == 0 || n_b == 0) {
    throw DomainError(ErrorKind::kGroupingError,
                      "cluster_separation needs members in both classes");
  }
  for (double& v : mean_a) v /= n_a;
  for (double& v : mean_b) v /= n_b;

  SeparationStats stats;
  stats.center_distance = euclidean_distance(mean_a, mean_b);
  for (int i = 0; i < points.rows; ++i) {
    if (labels[static_cast<size_t>(i)] == class_a) {
      stats.distances_a.push_back(euclidean_distance(points.row(i), mean_a));
    } else if (labels[static_cast<size_t>(i)] == class_b) {
      stats.distances_b.push_back(euclidean_distance(points.row(i), mean_b));
    }
  }
  for (double d : stats.distances_a) stats.spread_a += d;
  stats.spread_a /= n_a;
  for (double d : stats.distances_b) stats.spread_b += d;
  stats.spread_b /= n_b;
  return stats;
}

GeometryReport analyze_geometry(const Model& model, const Matrix& features,
                                std::span<const int> labels, int class_a,
                                int class_b, int reference_class) {
  if (class_a == class_b || class_a == reference_class ||
      class_b == reference_class) {
    throw DomainError(ErrorKind::kSpecError,
                      "geometry needs three distinct classes");
  }
  if (!model.spec.has_hidden_layer()) {
    throw DomainError(ErrorKind::kSpecError,
                      "geometry needs a penultimate layer (>= 1 hidden)");
  }
  Vec t_a = template_of(model, class_a);
  Vec t_b = template_of(model, class_b);
  Vec t_ref = template_of(model, reference_class);

  GeometryReport report;
  report.class_a = class_a;
  report.class_b = class_b;
  report.reference_class = reference_class;
  report.basis = plane_basis(t_a, t_b, t_ref);
  report.labels.assign(labels.begin(), labels.end());

  ForwardRecord record = forward(model, features);
  const Matrix& penultimate = record.penultimate();
  report.points_2d = project(penultimate, t_a, report.basis);

  const int k = model.spec.num_classes;
  report.cluster_means_2d = Matrix(k, 2);
  std::vector<int> counts(static_cast<size_t>(k), 0);
  for (int i = 0; i < report.points_2d.rows; ++i) {
    const int c = report.labels[static_cast<size_t>(i)];
    report.cluster_means_2d.at(c, 0) += report.points_2d.at(i, 0);
    report.cluster_means_2d.at(c, 1) += report.points_2d.at(i, 1);
    ++counts[static_cast<size_t>(c)];
  }
  for (int c = 0; c < k; ++c) {
    if (counts[static_cast<size_t>(c)] == 0) continue;
    report.cluster_means_2d.at(c, 0) /= counts[static_cast<size_t>(c)];
    report.cluster_means_2d.at(c, 1) /= counts[static_cast<size_t>(c)];
  }

  SeparationStats in_plane =
      cluster_separation(report.points_2d, labels, class_a, class_b);
  report.dc_2d = in_plane.center_distance;

  SeparationStats full =
      cluster_separation(penultimate, labels, class_a, class_b);
  report.dc_full = full.center_distance;
  report.spread_a_full = full.spread_a;
  report.spread_b_full = full.spread_b;

  // distances of pair examples to the reference class's full-space mean
  Vec ref_mean(static_cast<size_t>(penultimate.cols), 0.0);
  int n_ref = 0;
  for (int i = 0; i < penultimate.rows; ++i) {
    if (report.labels[static_cast<size_t>(i)] != reference_class) continue;
    auto row = penultimate.row(i);
    for (int j = 0; j < penultimate.cols; ++j) {
      ref_mean[static_cast<size_t>(j)] += row[static_cast<size_t>(j)];
    }
    ++n_ref;
  }
  if (n_ref == 0) {
    throw DomainError(ErrorKind::kGroupingError,
                      "reference class has no members");
  }
  for (double& v : ref_mean) v /= n_ref;
  for (int i = 0; i < penultimate.rows; ++i) {
    const int c = report.labels[static_cast<size_t>(i)];
    if (c == class_a) {
      report.reference_distances_a.push_back(
          euclidean_distance(penultimate.row(i), ref_mean));
    } else if (c == class_b) {
      report.reference_distances_b.push_back(
          euclidean_distance(penultimate.row(i), ref_mean));
    }
  }
  return report;
}

void write_points_csv(const std::filesystem::path& path,
                      const Matrix& points_2d, std::span<const int> labels) {
  std::ofstream out(path);
  if (!out) {
    throw DomainError(ErrorKind::kDataError,
                      "cannot open points CSV for writing: " + path.string());
  }
  out << "label,x,y\n";
  char buf[64];
  for (int i = 0; i < points_2d.rows; ++i) {
    out << labels[static_cast<size_t>(i)];
    std::snprintf(buf, sizeof(buf), "%.6f", points_2d.at(i, 0));
    out << "," << buf;
    std::snprintf(buf, sizeof(buf), "%.6f", points_2d.at(i, 1));
    out << "," << buf << "\n";
  }
}

void write_scatter_svg(const std::filesystem::path& path,
                       const Matrix& points_2d, std::span<const int> labels) {
  static const char* palette[] = {"#4c72b0", "#dd8452", "#55a868", "#c44e52",
                                  "#8172b3", "#937860", "#da8bc3", "#8c8c8c",
                                  "#ccb974", "#64b5cd"};
  const int width = 640;
  const int height = 640;
  const int margin = 40;
  double min_x = 0.0, max_x = 1.0, min_y = 0.0, max_y = 1.0;
  if (points_2d.rows > 0) {
    min_x = max_x = points_2d.at(0, 0);
    min_y = max_y = points_2d.at(0, 1);
    for (int i = 1; i < points_2d.rows; ++i) {
      min_x = std::min(min_x, points_2d.at(i, 0));
      max_x = std::max(max_x, points_2d.at(i, 0));
      min_y = std::min(min_y, points_2d.at(i, 1));
      max_y = std::max(max_y, points_2d.at(i, 1));
    }
  }
  const double span_x = std::max(max_x - min_x, 1e-9);
  const double span_y = std::max(max_y - min_y, 1e-9);

  std::ofstream out(path);
  if (!out) {
    throw DomainError(ErrorKind::kDataError,
                      "cannot open SVG for writing: " + path.string());
  }
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
      << "\" height=\"" << height << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  char buf[160];
  for (int i = 0; i < points_2d.rows; ++i) {
    const double px =
        margin + (points_2d.at(i, 0) - min_x) / span_x * (width - 2 * margin);
    const double py = height - margin -
                      (points_2d.at(i, 1) - min_y) / span_y *
                          (height - 2 * margin);
    const char* color =
        palette[static_cast<size_t>(labels[static_cast<size_t>(i)]) % 10];
    std::snprintf(buf, sizeof(buf),
                  "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"2.5\" fill=\"%s\" "
                  "fill-opacity=\"0.7\"/>\n",
                  px, py, color);
    out << buf;
  }
  out << "</svg>\n";
}

}  // namespace distillab
