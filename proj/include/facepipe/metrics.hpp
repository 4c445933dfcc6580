#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "facepipe/core.hpp"
#include "json.hpp"

namespace facepipe {

inline constexpr int kExpressionDim = 16;

/// n x d embedding vectors, one per row.
struct EmbeddingSet {
  Eigen::MatrixXd vectors;

  EmbeddingSet() = default;
  explicit EmbeddingSet(Eigen::MatrixXd v);
  Eigen::Index count() const { return vectors.rows(); }
  Eigen::Index dim() const { return vectors.cols(); }
};

/// Mean absolute difference over all pixels and channels.
double l1_distance(const ImageBuffer& a, const ImageBuffer& b);
/// Euclidean norm of the angle differences, in degrees.
double euler_distance(const PoseAngles& a, const PoseAngles& b);
/// Mean per-point Euclidean distance, in pixels.
double landmark_distance(const LandmarkSet& a, const LandmarkSet& b);
/// Cosine similarity; throws on a zero vector or mismatched sizes.
double identity_similarity(const Eigen::VectorXd& a, const Eigen::VectorXd& b);
/// Euclidean distance between two 16-d expression embeddings.
double fec_distance(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

/// |mu_A - mu_B|^2 + Tr(S_A + S_B - 2 (S_A S_B)^{1/2}) with sample covariances
/// (denominator n - 1). The trace of the square root is taken from the
/// eigenvalues of S_A^{1/2} S_B S_A^{1/2}; eigenvalues below -1e-8 (relative to
/// the largest) are an error, smaller negatives count as 0.
double frechet_distance(const EmbeddingSet& a, const EmbeddingSet& b);

/// Mean and population standard deviation of per-frame values.
struct Summary {
  double mean = 0.0;
  double stddev = 0.0;
  std::size_t count = 0;
};
Summary summarize(const std::vector<double>& values);

/// Per-frame metric values plus global scalars (FID).
struct MetricReport {
  std::map<std::string, std::vector<double>> per_frame;
  std::map<std::string, double> global;

  void add(const std::string& metric, double value) { per_frame[metric].push_back(value); }
  std::map<std::string, Summary> summaries() const;
  nlohmann::json to_json() const;
  /// metric,mean,std,count rows; global scalars carry std 0 and count 1.
  std::string to_csv() const;
};

/// One vector per row of plain decimal numbers separated by commas or
/// whitespace. Rows must share a length.
EmbeddingSet load_embeddings_csv(const std::filesystem::path& path);
EmbeddingSet parse_embeddings_csv(const std::string& text);

}  // namespace facepipe
