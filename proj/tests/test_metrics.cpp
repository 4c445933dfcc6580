#include <doctest.h>

#include <fstream>
#include <random>

#include "facepipe/metrics.hpp"
#include "support.hpp"

using namespace facepipe;

namespace {

EmbeddingSet column(const std::vector<double>& v) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(v.size()), 1);
  for (std::size_t i = 0; i < v.size(); ++i) m(static_cast<Eigen::Index>(i), 0) = v[i];
  return EmbeddingSet(m);
}

// Sample mean and standard deviation (denominator n - 1), written out directly.
std::pair<double, double> sample_moments(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m += x;
  m /= v.size();
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return {m, std::sqrt(s / (v.size() - 1.0))};
}

EmbeddingSet random_set(std::mt19937_64& rng, int n, int d, double shift) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd m(n, d);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng) + shift;
  return EmbeddingSet(m);
}

}  // namespace

TEST_CASE("L1 distance examples") {
  const ImageBuffer a(4, 4, 3, 0.3f);
  CHECK(l1_distance(a, a) == 0.0);
  CHECK(l1_distance(ImageBuffer(4, 4, 3, 1.0f), ImageBuffer(4, 4, 3, 0.0f)) == 1.0);
  ImageBuffer half(4, 4, 1);
  for (int y = 0; y < 2; ++y)
    for (int x = 0; x < 4; ++x) half.at(x, y) = 1.0f;
  CHECK(l1_distance(half, ImageBuffer(4, 4, 1)) == 0.5);
  CHECK_THROWS_AS(l1_distance(a, ImageBuffer(4, 4, 1)), Error);
}

TEST_CASE("Euler distance examples") {
  CHECK(euler_distance({10, 20, 30}, {10, 20, 30}) == 0.0);
  CHECK(euler_distance({30, 0, 0}, {}) == 30.0);
  CHECK(euler_distance({3, 4, 0}, {}) == 5.0);
  CHECK(euler_distance({0, 0, 0.5}, {}) > 0.0);
}

TEST_CASE("landmark distance examples") {
  std::mt19937_64 rng(61);
  const LandmarkSet a = test::random_landmarks(rng, 0, 0, 200, 200);
  CHECK(landmark_distance(a, a) == 0.0);
  LandmarkSet b;
  for (std::size_t i = 0; i < kNumLandmarks; ++i) b[i] = a[i] + Point2{3, 4};
  CHECK(landmark_distance(a, b) == doctest::Approx(5.0).epsilon(1e-12));
  LandmarkSet c = a;
  c[17] = c[17] + Point2{0, 9.8};
  CHECK(landmark_distance(a, c) == doctest::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("cosine identity similarity examples") {
  Eigen::VectorXd a(3), b(3);
  a << 1, 2, 3;
  CHECK(identity_similarity(a, a) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(identity_similarity(a, -a) == doctest::Approx(-1.0).epsilon(1e-15));
  a << 1, 0, 0;
  b << 0, 1, 0;
  CHECK(identity_similarity(a, b) == 0.0);
  CHECK_THROWS_AS(identity_similarity(a, Eigen::VectorXd::Zero(3)), Error);
  CHECK_THROWS_AS(identity_similarity(a, Eigen::VectorXd::Ones(2)), Error);
}

TEST_CASE("expression distance examples") {
  Eigen::VectorXd a = Eigen::VectorXd::Zero(16), b = Eigen::VectorXd::Zero(16);
  CHECK(fec_distance(a, a) == 0.0);
  b(5) = 1.0;
  CHECK(fec_distance(a, b) == 1.0);
  b(0) = 1.0;
  CHECK(fec_distance(b, a) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
  CHECK_THROWS_AS(fec_distance(Eigen::VectorXd::Zero(15), Eigen::VectorXd::Zero(15)), Error);
}

TEST_CASE("Frechet distance of 1-d sets matches the univariate closed form") {
  CHECK(frechet_distance(column({0, 0.2}), column({1.0, 1.2})) == doctest::Approx(1.0).epsilon(1e-12));
  std::mt19937_64 rng(62);
  std::uniform_int_distribution<int> count(2, 30);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> shift(-3, 3), spread(0.1, 4);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> a(count(rng)), b(count(rng));
    const double sa = spread(rng), sb = spread(rng), ma = shift(rng), mb = shift(rng);
    for (double& x : a) x = ma + sa * g(rng);
    for (double& x : b) x = mb + sb * g(rng);
    const auto [m1, s1] = sample_moments(a);
    const auto [m2, s2] = sample_moments(b);
    worst = std::max(worst, std::abs(frechet_distance(column(a), column(b)) - test::oracle::frechet_1d(m1, s1, m2, s2)));
  }
  CHECK(worst <= 1e-8);
}

TEST_CASE("Frechet distance is zero on itself, symmetric and rotation invariant") {
  std::mt19937_64 rng(63);
  for (int trial = 0; trial < 20; ++trial) {
    const int d = 1 + trial % 6;
    const EmbeddingSet a = random_set(rng, 40, d, 0.0), b = random_set(rng, 25, d, 0.7);
    CHECK(std::abs(frechet_distance(a, a)) <= 1e-8);
    const double ab = frechet_distance(a, b), ba = frechet_distance(b, a);
    CHECK(std::abs(ab - ba) <= 1e-10);
    CHECK(ab > 0.0);
    const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(random_set(rng, d, d, 0.0).vectors).householderQ();
    const double rotated = frechet_distance(EmbeddingSet(a.vectors * q), EmbeddingSet(b.vectors * q));
    CHECK(std::abs(rotated - ab) <= 1e-8 * std::max(1.0, ab));
  }
}

TEST_CASE("Frechet distance handles rank-deficient covariances and rejects bad input") {
  std::mt19937_64 rng(64);
  // Fewer samples than dimensions: singular covariances are still PSD.
  const EmbeddingSet a = random_set(rng, 3, 8, 0.0), b = random_set(rng, 4, 8, 1.0);
  CHECK(frechet_distance(a, b) >= 0.0);
  CHECK(std::abs(frechet_distance(a, a)) <= 1e-8);
  CHECK_THROWS_AS(frechet_distance(a, random_set(rng, 4, 7, 0.0)), Error);
  CHECK_THROWS_AS(frechet_distance(random_set(rng, 1, 8, 0.0), b), Error);
  CHECK_THROWS_AS(EmbeddingSet(Eigen::MatrixXd(0, 3)), Error);
  Eigen::MatrixXd bad = Eigen::MatrixXd::Ones(3, 2);
  bad(1, 1) = std::nan("");
  CHECK_THROWS_AS(EmbeddingSet{bad}, Error);
}

TEST_CASE("summaries use the population standard deviation") {
  CHECK(summarize({4.0}).stddev == 0.0);
  CHECK(summarize({2.5, 2.5}).stddev == 0.0);
  const Summary s = summarize({0.0, 2.0});
  CHECK(s.mean == 1.0);
  CHECK(s.stddev == 1.0);
  CHECK(s.count == 2);
  CHECK(summarize({}).count == 0);
}

TEST_CASE("reports serialize per-frame summaries and global scalars") {
  MetricReport r;
  r.add("l1", 0.0);
  r.add("l1", 2.0);
  r.add("euler", 5.0);
  r.global["fid"] = 0.25;
  const auto j = r.to_json();
  CHECK(j["metrics"]["l1"]["mean"] == 1.0);
  CHECK(j["metrics"]["l1"]["std"] == 1.0);
  CHECK(j["metrics"]["l1"]["values"].size() == 2);
  CHECK(j["metrics"]["euler"]["count"] == 1);
  CHECK(j["global"]["fid"] == 0.25);
  CHECK(r.to_csv() == "metric,mean,std,count\neuler,5,0,1\nl1,1,1,2\nfid,0.25,0,1\n");
}

TEST_CASE("embedding CSV parsing") {
  const EmbeddingSet e = parse_embeddings_csv("1, 2.5,-3\n4 5 6e-1\n\n7;8\t9\r\n");
  REQUIRE(e.count() == 3);
  REQUIRE(e.dim() == 3);
  CHECK(e.vectors(1, 2) == 0.6);
  CHECK(e.vectors(2, 0) == 7.0);
  CHECK_THROWS_AS(parse_embeddings_csv("1,2\n3\n"), Error);
  CHECK_THROWS_AS(parse_embeddings_csv("1,x\n"), Error);
  CHECK_THROWS_AS(parse_embeddings_csv("nan,1\n"), Error);
  CHECK_THROWS_AS(parse_embeddings_csv("\n\n"), Error);
  test::TempDir dir("emb");
  std::ofstream(dir / "e.csv") << "0.5,0.25\n";
  CHECK(load_embeddings_csv(dir / "e.csv").vectors(0, 1) == 0.25);
  CHECK_THROWS_AS(load_embeddings_csv(dir / "missing.csv"), Error);
}
