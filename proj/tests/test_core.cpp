#include <doctest.h>

#include <fstream>
#include <random>

#include "facepipe/annotations.hpp"
#include "facepipe/core.hpp"
#include "support.hpp"

using namespace facepipe;

TEST_CASE("iou of half-overlapping squares is one third") {
  const auto a = BoundingBox::from_corners(0, 0, 2, 2);
  const auto b = BoundingBox::from_corners(1, 0, 3, 2);
  CHECK(iou(a, b) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(iou(a, a) == 1.0);
  CHECK(iou(a, BoundingBox::from_corners(5, 5, 6, 6)) == 0.0);
}

TEST_CASE("iou is symmetric and bounded on random boxes") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 50.0), s(0.5, 30.0);
  for (int i = 0; i < 500; ++i) {
    const BoundingBox a{u(rng), u(rng), s(rng), s(rng)};
    const BoundingBox b{u(rng), u(rng), s(rng), s(rng)};
    const double v = iou(a, b);
    CHECK(v == iou(b, a));
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("degenerate boxes are rejected") {
  CHECK_THROWS_AS(BoundingBox({0, 0, 0, 1}).validate(), Error);
  CHECK_THROWS_AS(BoundingBox({0, 0, 1, -2}).validate(), Error);
  CHECK_THROWS_AS(BoundingBox({0, 0, std::nan(""), 1}).validate(), Error);
  CHECK_NOTHROW(BoundingBox({0, 0, 1, 1}).validate());
}

TEST_CASE("landmark sets need 98 finite points") {
  std::vector<Point2> pts(97);
  CHECK_THROWS_AS(LandmarkSet{pts}, Error);
  pts.resize(98);
  CHECK_NOTHROW(LandmarkSet{pts});
  pts[5].x = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(LandmarkSet{pts}, Error);
}

TEST_CASE("part ranges tile the 98-point layout") {
  std::size_t next = 0;
  for (const auto& r : parts::kAll) {
    CHECK(r.first == next);
    next = r.last + 1;
  }
  CHECK(next == kNumLandmarks);
}

TEST_CASE("flip permutation is an involution that keeps parts") {
  const auto& perm = wflw_flip_permutation();
  for (std::size_t i = 0; i < kNumLandmarks; ++i) {
    CHECK(perm[perm[i]] == i);
    for (const auto& r : parts::kAll)
      if (r.contains(i)) CHECK(r.contains(perm[i]));
  }
  CHECK(perm[parts::kMouthLeftCorner] == parts::kMouthRightCorner);
  CHECK(perm[0] == 32);
  CHECK(perm[16] == 16);
  CHECK(perm[96] == 97);
}

TEST_CASE("angles wrap into [-180, 180)") {
  CHECK(wrap_degrees(0.0) == 0.0);
  CHECK(wrap_degrees(180.0) == -180.0);
  CHECK(wrap_degrees(-180.0) == -180.0);
  CHECK(wrap_degrees(190.0) == doctest::Approx(-170.0));
  CHECK(wrap_degrees(-190.0) == doctest::Approx(170.0));
  CHECK(wrap_degrees(720.0 + 30.0) == doctest::Approx(30.0));
  const PoseAngles p = PoseAngles{370.0, -10.0, 200.0}.canonical();
  CHECK(p.yaw == doctest::Approx(10.0));
  CHECK(p.pitch == -10.0);
  CHECK(p.roll == doctest::Approx(-160.0));
}

TEST_CASE("segmentation masks count labels and derive the face mask") {
  SegMask m(3, 2);
  m.set(0, 0, SegLabel::kFace);
  m.set(1, 0, SegLabel::kHair);
  m.set(2, 1, SegLabel::kFace);
  CHECK(m.count(SegLabel::kFace) == 2);
  CHECK(m.count(SegLabel::kHair) == 1);
  CHECK(m.count(SegLabel::kBackground) == 3);
  const ImageBuffer f = binary_face_mask(m);
  CHECK(f.channels() == 1);
  CHECK(f.at(0, 0) == 1.0f);
  CHECK(f.at(1, 0) == 0.0f);
  CHECK(f.at(2, 1) == 1.0f);
  CHECK_THROWS_AS(SegMask(2, 1, std::vector<std::uint8_t>{0, 3}), Error);
  CHECK_THROWS_AS(SegMask(2, 2, std::vector<std::uint8_t>{0, 1}), Error);
}

TEST_CASE("image buffers check their range") {
  ImageBuffer img(2, 2, 3, 0.5f);
  CHECK_NOTHROW(img.check_range());
  img.at(1, 1, 2) = 1.5f;
  CHECK_THROWS_AS(img.check_range(), Error);
  img.at(1, 1, 2) = std::nanf("");
  CHECK_THROWS_AS(img.check_range(), Error);
  CHECK_THROWS_AS(ImageBuffer(2, 2, 1, std::vector<float>(3)), Error);
}

TEST_CASE("frame sequences need strictly increasing indices") {
  std::vector<FrameRecord> frames(2);
  frames[0].index = 3;
  frames[1].index = 3;
  CHECK_THROWS_AS(FrameSequence{frames}, Error);
  frames[1].index = 4;
  CHECK_NOTHROW(FrameSequence{frames});
}

TEST_CASE("thread budget honours FACEPIPE_THREADS") {
  ::setenv("FACEPIPE_THREADS", "3", 1);
  CHECK(thread_budget() == 3);
  ::setenv("FACEPIPE_THREADS", "zero", 1);
  CHECK(thread_budget() >= 1);
  ::unsetenv("FACEPIPE_THREADS");
  CHECK(thread_budget() >= 1);
}

namespace {

FrameRecord sample_record() {
  std::mt19937_64 rng(1);
  FrameRecord r;
  r.index = 7;
  r.image_path = "000007.png";
  r.bbox = {50.25, 60.5, 100, 90};
  r.landmarks = test::random_landmarks(rng, 0, 0, 128, 128);
  r.pose = {12.5, -3.25, 4.0};
  r.mask_path = "000007_mask.png";
  return r;
}

}  // namespace

TEST_CASE("annotations round-trip through JSON") {
  const FrameRecord r = sample_record();
  const auto j = to_json(r);
  CHECK(j.at("version") == kSchemaVersion);
  const FrameRecord back = frame_from_json(j, "/data");
  CHECK(back.index == r.index);
  CHECK(back.bbox == r.bbox);
  CHECK(back.landmarks == r.landmarks);
  CHECK(back.pose == r.pose);
  CHECK(back.image_path == "/data/000007.png");
  REQUIRE(back.mask_path.has_value());
  CHECK(*back.mask_path == "/data/000007_mask.png");
}

TEST_CASE("malformed annotations are reported per file") {
  test::TempDir dir("annot");
  write_annotation(sample_record(), dir / "000007.json");
  std::ofstream(dir / "000008.json") << "{\"version\": 1, \"frame\": 8";
  auto bad = to_json(sample_record());
  bad["frame"] = 9;
  bad["landmarks"].erase(0);
  std::ofstream(dir / "000009.json") << bad.dump();
  auto wrong_version = to_json(sample_record());
  wrong_version["frame"] = 10;
  wrong_version["version"] = 2;
  std::ofstream(dir / "000010.json") << wrong_version.dump();

  const FrameDirectory fd = load_frame_directory(dir.path(), false);
  CHECK(fd.sequence.size() == 1);
  CHECK(fd.sequence[0].index == 7);
  CHECK(fd.errors.size() == 3);
}

TEST_CASE("annotation loading orders frames by index") {
  test::TempDir dir("order");
  for (int idx : {5, 2, 9}) {
    FrameRecord r = sample_record();
    r.index = idx;
    write_annotation(r, dir / ("f" + std::to_string(10 - idx) + ".json"));
  }
  const FrameDirectory fd = load_frame_directory(dir.path(), false);
  REQUIRE(fd.sequence.size() == 3);
  CHECK(fd.sequence[0].index == 2);
  CHECK(fd.sequence[1].index == 5);
  CHECK(fd.sequence[2].index == 9);
}
