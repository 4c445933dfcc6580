#include "facepipe/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include "facepipe/annotations.hpp"
#include "facepipe/image_io.hpp"

namespace facepipe {

namespace {

FaceTemplate build_template() {
  FaceTemplate t{};
  std::array<bool, kNumLandmarks> set{};
  auto put = [&](std::size_t i, double x, double y, double z) {
    t[i] = {x, y, z};
    set[i] = true;
  };
  const double pi = std::numbers::pi;
  // Jaw line, image-left ear to chin.
  for (int i = 0; i <= 16; ++i) {
    const double a = pi * i / 32.0;
    put(i, -0.9 * std::cos(a), -0.1 + 0.95 * std::sin(a), -0.5 + 0.5 * std::sin(a));
  }
  // Left brow: upper edge outer -> inner, lower edge inner -> outer.
  for (int i = 0; i < 5; ++i) {
    const double x = -0.78 + 0.14 * i;
    put(33 + i, x, -0.55 - 0.08 * std::sin(pi * i / 4.0), 0.3 - 0.2 * std::abs(x));
  }
  for (int i = 0; i < 4; ++i) {
    const double x = -0.25 - 0.15 * i;
    put(38 + i, x, -0.49 - 0.03 * std::sin(pi * (i + 0.5) / 4.0), 0.3 - 0.2 * std::abs(x));
  }
  // Nose bridge, left nostril, tip base.
  for (int i = 0; i < 4; ++i) put(51 + i, 0.0, -0.35 + 0.1 * i, 0.45 + 0.1 * i);
  put(55, -0.18, 0.05, 0.5);
  put(56, -0.09, 0.08, 0.58);
  put(57, 0.0, 0.1, 0.62);
  // Left eye: outer corner, upper lid, inner corner, lower lid.
  const double ecx = -0.4, ecy = -0.3, erx = 0.16, ery = 0.07;
  for (int i = 0; i < 8; ++i) {
    const double a = pi - pi * i / 4.0;
    put(60 + i, ecx + erx * std::cos(a), ecy - ery * std::sin(a), 0.35);
  }
  // Mouth, left half and center line.
  auto mouth = [&](std::size_t i, double x, double y) { put(i, x, y, 0.45 - 0.3 * std::abs(x)); };
  mouth(76, -0.3, 0.42);
  mouth(77, -0.2, 0.36);
  mouth(78, -0.08, 0.33);
  mouth(79, 0.0, 0.35);
  mouth(85, 0.0, 0.54);
  mouth(86, -0.08, 0.53);
  mouth(87, -0.2, 0.5);
  mouth(88, -0.24, 0.43);
  mouth(89, -0.1, 0.41);
  mouth(90, 0.0, 0.41);
  mouth(94, 0.0, 0.46);
  mouth(95, -0.1, 0.455);
  put(96, ecx, ecy, 0.37);

  const auto& perm = wflw_flip_permutation();
  for (std::size_t i = 0; i < kNumLandmarks; ++i)
    if (set[i] && perm[i] != i && !set[perm[i]]) t[perm[i]] = {-t[i].x, t[i].y, t[i].z};
  return t;
}

}  // namespace

const FaceTemplate& mean_face_template() {
  static const FaceTemplate t = build_template();
  return t;
}

FaceTemplate open_mouth(const FaceTemplate& face, double amount) {
  FaceTemplate out = face;
  for (std::size_t i : {83, 84, 85, 86, 87, 93, 94, 95}) out[i].y += amount;
  return out;
}

LandmarkSet project_face(const FaceTemplate& face, const PoseAngles& pose, const Point2& center, double scale) {
  const double d = std::numbers::pi / 180.0;
  const double cy = std::cos(pose.yaw * d), sy = std::sin(pose.yaw * d);
  const double cp = std::cos(pose.pitch * d), sp = std::sin(pose.pitch * d);
  const double cr = std::cos(pose.roll * d), sr = std::sin(pose.roll * d);
  LandmarkSet out;
  for (std::size_t i = 0; i < kNumLandmarks; ++i) {
    const Point3& q = face[i];
    // yaw about the vertical axis
    const double x1 = cy * q.x + sy * q.z;
    const double z1 = -sy * q.x + cy * q.z;
    // pitch about the horizontal axis
    const double y2 = cp * q.y - sp * z1;
    // roll in the image plane
    const double x3 = cr * x1 - sr * y2;
    const double y3 = sr * x1 + cr * y2;
    out[i] = {center.x + scale * x3, center.y + scale * y3};
  }
  return out;
}

std::vector<TransformerSample> rotation_corpus(const RotationCorpusSpec& spec) {
  if (spec.samples < 1 || spec.image_size < 1) throw Error("rotation corpus needs samples and a positive size");
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> angle(-spec.max_angle, spec.max_angle);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::normal_distribution<double> shape(0.0, spec.shape_jitter);
  std::normal_distribution<double> noise(0.0, spec.noise);
  const int n = spec.image_size;
  std::vector<TransformerSample> out;
  out.reserve(static_cast<std::size_t>(spec.samples));
  for (int s = 0; s < spec.samples; ++s) {
    FaceTemplate face = mean_face_template();
    for (auto& p : face) {
      p.x += shape(rng);
      p.y += shape(rng);
      p.z += shape(rng);
    }
    const double scale = spec.scale * (1.0 + spec.scale_jitter * unit(rng));
    const Point2 center{0.5 * n + spec.shift_jitter * unit(rng), 0.5 * n + spec.shift_jitter * unit(rng)};
    const PoseAngles ps{angle(rng), angle(rng), angle(rng)};
    const PoseAngles pt{angle(rng), angle(rng), angle(rng)};
    LandmarkSet src = project_face(face, ps, center, scale);
    LandmarkSet tgt = project_face(face, pt, center, scale);
    for (std::size_t i = 0; i < kNumLandmarks; ++i) {
      src[i] = src[i] + Point2{noise(rng), noise(rng)};
      tgt[i] = tgt[i] + Point2{noise(rng), noise(rng)};
    }
    out.push_back({normalize_landmarks(src, n, n), pt, normalize_landmarks(tgt, n, n)});
  }
  return out;
}

double identity_baseline_mse(const std::vector<TransformerSample>& samples) {
  if (samples.empty()) throw Error("baseline of an empty corpus");
  double total = 0.0;
  for (const auto& s : samples)
    for (std::size_t i = 0; i < kNumLandmarks; ++i) {
      const Point2 d = s.target[i] - s.source[i];
      total += d.x * d.x + d.y * d.y;
    }
  return total / static_cast<double>(samples.size());
}

namespace {

bool inside(const std::vector<Point2>& poly, double x, double y) {
  bool in = false;
  for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
    const Point2& a = poly[i];
    const Point2& b = poly[j];
    if ((a.y > y) != (b.y > y) && x < (b.x - a.x) * (y - a.y) / (b.y - a.y) + a.x) in = !in;
  }
  return in;
}

std::vector<Point2> gather(const LandmarkSet& p, std::initializer_list<std::pair<int, int>> runs) {
  std::vector<Point2> out;
  for (auto [a, b] : runs) {
    const int step = a <= b ? 1 : -1;
    for (int i = a;; i += step) {
      out.push_back(p[static_cast<std::size_t>(i)]);
      if (i == b) break;
    }
  }
  return out;
}

void box_blur(ImageBuffer& img) {
  const ImageBuffer src = img;
  const int W = img.width(), H = img.height(), C = img.channels();
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x)
      for (int c = 0; c < C; ++c) {
        double s = 0.0;
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx)
            s += src.at(std::clamp(x + dx, 0, W - 1), std::clamp(y + dy, 0, H - 1), c);
        img.at(x, y, c) = static_cast<float>(s / 9.0);
      }
}

}  // namespace

SyntheticFace render_synthetic_face(const LandmarkSet& p, int width, int height, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> tone(-0.05, 0.05);
  const std::array<double, 3> skin{0.85 + tone(rng), 0.66 + tone(rng), 0.55 + tone(rng)};
  const std::array<double, 3> bg{0.25 + tone(rng), 0.35 + tone(rng), 0.45 + tone(rng)};

  const auto face = gather(p, {{0, 32}, {46, 42}, {37, 33}});
  const auto brow_l = gather(p, {{33, 37}, {38, 41}});
  const auto brow_r = gather(p, {{42, 46}, {47, 50}});
  const auto eye_l = gather(p, {{60, 67}});
  const auto eye_r = gather(p, {{68, 75}});
  const auto lips = gather(p, {{76, 87}});
  const auto inner = gather(p, {{88, 95}});
  const Point2 c = p.centroid(parts::kContour);
  double extent = 0.0;
  for (const auto& q : p.points()) extent = std::max(extent, distance(q, c));
  const double pupil_r = std::max(1.0, 0.35 * distance(p[60], p[64]));

  SyntheticFace out{ImageBuffer(width, height, 3), SegMask(width, height)};
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const double px = x + 0.5, py = y + 0.5;
      std::array<double, 3> col;
      const double tex = 0.06 * std::sin(px / 7.0) * std::cos(py / 9.0);
      for (int k = 0; k < 3; ++k) col[k] = bg[k] + 0.2 * px / width - 0.1 * py / height + tex;
      const double dx = (px - c.x) / (1.2 * extent), dy = (py - c.y + 0.25 * extent) / (1.25 * extent);
      SegLabel label = SegLabel::kBackground;
      if (dx * dx + dy * dy <= 1.0) {
        label = SegLabel::kHair;
        col = {0.25 + tex, 0.16 + tex, 0.1 + tex};
      }
      if (inside(face, px, py)) {
        label = SegLabel::kFace;
        const double shade = 1.0 - 0.25 * std::hypot(px - c.x, py - c.y) / extent;
        for (int k = 0; k < 3; ++k) col[k] = skin[k] * shade + 0.5 * tex;
        if (inside(brow_l, px, py) || inside(brow_r, px, py)) col = {0.3, 0.2, 0.15};
        if (inside(eye_l, px, py) || inside(eye_r, px, py)) col = {0.92, 0.92, 0.9};
        if (distance({px, py}, p[96]) <= pupil_r || distance({px, py}, p[97]) <= pupil_r) col = {0.1, 0.15, 0.3};
        if (distance({px, py}, p[57]) <= pupil_r) col = {skin[0] * 0.7, skin[1] * 0.6, skin[2] * 0.6};
        if (inside(lips, px, py)) col = {0.7, 0.25, 0.3};
        if (inside(inner, px, py)) col = {0.3, 0.05, 0.1};
      }
      out.mask.set(x, y, label);
      for (int k = 0; k < 3; ++k) out.image.at(x, y, k) = static_cast<float>(std::clamp(col[k], 0.0, 1.0));
    }
  box_blur(out.image);
  box_blur(out.image);
  return out;
}

BoundingBox face_box(const LandmarkSet& p, int width, int height, double margin) {
  double x0 = p[0].x, x1 = p[0].x, y0 = p[0].y, y1 = p[0].y;
  for (const auto& q : p.points()) {
    x0 = std::min(x0, q.x);
    x1 = std::max(x1, q.x);
    y0 = std::min(y0, q.y);
    y1 = std::max(y1, q.y);
  }
  const double side = std::min({margin * std::max(x1 - x0, y1 - y0), double(width), double(height)});
  const double cx = std::clamp(0.5 * (x0 + x1), 0.5 * side, width - 0.5 * side);
  const double cy = std::clamp(0.5 * (y0 + y1), 0.5 * side, height - 0.5 * side);
  return {cx, cy, side, side};
}

FrameSequence synthetic_sequence(const SyntheticSequenceSpec& spec) {
  if (spec.frames < 1) throw Error("synthetic sequence needs at least one frame");
  // Serpentine sweep over a yaw x pitch grid.
  const int cols = std::max(1, static_cast<int>(std::ceil(std::sqrt(spec.frames * 1.25))));
  const int rows = (spec.frames + cols - 1) / cols;
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> jitter(-1.0, 1.0);
  std::vector<FrameRecord> frames;
  const Point2 center{0.5 * spec.width, 0.5 * spec.height};
  for (int i = 0; i < spec.frames; ++i) {
    const int r = i / cols;
    const int k = r % 2 == 0 ? i % cols : cols - 1 - i % cols;
    const double u = cols > 1 ? static_cast<double>(k) / (cols - 1) : 0.5;
    const double v = rows > 1 ? static_cast<double>(r) / (rows - 1) : 0.5;
    PoseAngles pose{spec.max_yaw * (2.0 * u - 1.0) + jitter(rng), spec.max_pitch * (2.0 * v - 1.0) + jitter(rng),
                    spec.max_roll * std::sin(0.7 * i)};
    FrameRecord f;
    f.index = i;
    f.pose = pose;
    f.landmarks = project_face(mean_face_template(), pose, center, spec.scale);
    f.bbox = face_box(f.landmarks, spec.width, spec.height);
    SyntheticFace face = render_synthetic_face(f.landmarks, spec.width, spec.height, spec.seed);
    f.image = std::make_shared<const ImageBuffer>(std::move(face.image));
    f.mask = std::make_shared<const SegMask>(std::move(face.mask));
    char name[32];
    std::snprintf(name, sizeof name, "%06d", i);
    f.image_path = std::string(name) + ".png";
    f.mask_path = std::string(name) + "_mask.png";
    frames.push_back(std::move(f));
  }
  return FrameSequence(std::move(frames));
}

void write_sequence(const FrameSequence& sequence, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& f : sequence) {
    if (!f.image) throw Error("frame " + std::to_string(f.index) + " has no image to write");
    char name[32];
    std::snprintf(name, sizeof name, "%06d", f.index);
    FrameRecord rec = f;
    rec.image_path = std::string(name) + ".png";
    save_image(*f.image, dir / rec.image_path);
    if (f.mask) {
      rec.mask_path = std::string(name) + "_mask.png";
      save_mask(*f.mask, dir / *rec.mask_path);
    } else {
      rec.mask_path.reset();
    }
    write_annotation(rec, dir / (std::string(name) + ".json"));
  }
}

}  // namespace facepipe
