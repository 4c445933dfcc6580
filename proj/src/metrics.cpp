#include "facepipe/metrics.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace facepipe {

EmbeddingSet::EmbeddingSet(Eigen::MatrixXd v) : vectors(std::move(v)) {
  if (vectors.rows() < 1 || vectors.cols() < 1) throw Error("embedding set must be non-empty");
  if (!vectors.allFinite()) throw Error("embeddings must be finite");
}

double l1_distance(const ImageBuffer& a, const ImageBuffer& b) {
  if (!a.same_extent(b)) throw Error("L1 distance needs images of equal extent");
  if (a.empty()) throw Error("L1 distance of empty images");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(static_cast<double>(a.data()[i]) - b.data()[i]);
  return s / static_cast<double>(a.size());
}

double euler_distance(const PoseAngles& a, const PoseAngles& b) {
  const double dy = a.yaw - b.yaw;
  const double dp = a.pitch - b.pitch;
  const double dr = a.roll - b.roll;
  return std::sqrt(dy * dy + dp * dp + dr * dr);
}

double landmark_distance(const LandmarkSet& a, const LandmarkSet& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < kNumLandmarks; ++i) s += distance(a[i], b[i]);
  return s / static_cast<double>(kNumLandmarks);
}

double identity_similarity(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size() || a.size() == 0) throw Error("identity vectors must be non-empty and equally sized");
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) throw Error("identity similarity of a zero vector");
  return (a / na).dot(b / nb);
}

double fec_distance(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != kExpressionDim || b.size() != kExpressionDim)
    throw Error("expression embeddings must be 16-dimensional");
  return (a - b).norm();
}

namespace {

void moments(const EmbeddingSet& s, Eigen::VectorXd& mean, Eigen::MatrixXd& cov) {
  const double n = static_cast<double>(s.count());
  mean = s.vectors.colwise().mean().transpose();
  const Eigen::MatrixXd centered = s.vectors.rowwise() - mean.transpose();
  cov = centered.transpose() * centered / (n - 1.0);
}

}  // namespace

double frechet_distance(const EmbeddingSet& a, const EmbeddingSet& b) {
  if (a.dim() != b.dim()) throw Error("Frechet distance needs embeddings of equal dimension");
  if (a.count() < 2 || b.count() < 2) throw Error("Frechet distance needs at least two vectors per set");
  Eigen::VectorXd mu_a, mu_b;
  Eigen::MatrixXd cov_a, cov_b;
  moments(a, mu_a, cov_a);
  moments(b, mu_b, cov_b);

  auto psd_eigen = [](const Eigen::MatrixXd& m, const char* what) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    if (es.info() != Eigen::Success) throw Error(std::string("eigendecomposition failed for ") + what);
    Eigen::VectorXd ev = es.eigenvalues();
    const double scale = std::max(1.0, ev.cwiseAbs().maxCoeff());
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
      if (ev(i) < -1e-8 * scale) throw Error(std::string(what) + " is not positive semi-definite");
      ev(i) = std::max(ev(i), 0.0);
    }
    return std::pair{ev, Eigen::MatrixXd(es.eigenvectors())};
  };
  const auto [ev_a, vec_a] = psd_eigen(cov_a, "first covariance");
  const Eigen::MatrixXd sqrt_a = vec_a * ev_a.cwiseSqrt().asDiagonal() * vec_a.transpose();
  Eigen::MatrixXd inner = sqrt_a * cov_b * sqrt_a;
  inner = 0.5 * (inner + inner.transpose());
  const auto [ev_in, vec_in] = psd_eigen(inner, "covariance product");
  (void)vec_in;
  const double tr_sqrt = ev_in.cwiseSqrt().sum();
  const double value = (mu_a - mu_b).squaredNorm() + cov_a.trace() + cov_b.trace() - 2.0 * tr_sqrt;
  return std::max(value, 0.0);
}

Summary summarize(const std::vector<double>& values) {
  Summary s;
  s.count = values.size();
  if (values.empty()) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  double sq = 0.0;
  for (double v : values) sq += (v - s.mean) * (v - s.mean);
  s.stddev = std::sqrt(sq / static_cast<double>(values.size()));
  return s;
}

std::map<std::string, Summary> MetricReport::summaries() const {
  std::map<std::string, Summary> out;
  for (const auto& [name, values] : per_frame) out[name] = summarize(values);
  return out;
}

nlohmann::json MetricReport::to_json() const {
  nlohmann::json metrics = nlohmann::json::object();
  for (const auto& [name, s] : summaries())
    metrics[name] = {{"mean", s.mean}, {"std", s.stddev}, {"count", s.count}, {"values", per_frame.at(name)}};
  nlohmann::json globals = nlohmann::json::object();
  for (const auto& [name, v] : global) globals[name] = v;
  return {{"version", 1}, {"metrics", metrics}, {"global", globals}};
}

std::string MetricReport::to_csv() const {
  std::ostringstream os;
  os.precision(17);
  os << "metric,mean,std,count\n";
  for (const auto& [name, s] : summaries()) os << name << "," << s.mean << "," << s.stddev << "," << s.count << "\n";
  for (const auto& [name, v] : global) os << name << "," << v << ",0,1\n";
  return os.str();
}

EmbeddingSet parse_embeddings_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::vector<std::vector<double>> rows;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    for (char& ch : line)
      if (ch == ',' || ch == ';' || ch == '\t' || ch == '\r') ch = ' ';
    std::istringstream ls(line);
    std::vector<double> row;
    std::string tok;
    while (ls >> tok) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(tok, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != tok.size() || !std::isfinite(v))
        throw Error("embedding CSV line " + std::to_string(line_no) + ": bad number '" + tok + "'");
      row.push_back(v);
    }
    if (row.empty()) continue;
    if (!rows.empty() && row.size() != rows.front().size())
      throw Error("embedding CSV line " + std::to_string(line_no) + ": inconsistent row length");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw Error("embedding CSV contains no vectors");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c) m(r, c) = rows[r][c];
  return EmbeddingSet(std::move(m));
}

EmbeddingSet load_embeddings_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open embedding file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_embeddings_csv(ss.str());
}

}  // namespace facepipe
