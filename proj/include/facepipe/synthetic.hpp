#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "facepipe/core.hpp"
#include "facepipe/transformer.hpp"

namespace facepipe {

// Synthetic faces: a left/right-symmetric 98-point 3-D template (WFLW order),
// rotated and orthographically projected. Used to train the landmark
// transformer and to build end-to-end fixtures with known ground truth.

struct Point3 {
  double x = 0.0;  // right in the image
  double y = 0.0;  // down in the image
  double z = 0.0;  // toward the camera
};

using FaceTemplate = std::array<Point3, kNumLandmarks>;

/// Mean-face template in units of half the face width, centered near the nose.
/// Mirroring x -> -x maps point i onto wflw_flip_permutation()[i].
const FaceTemplate& mean_face_template();

/// Template with the lower lip lowered by `amount` (template units).
FaceTemplate open_mouth(const FaceTemplate& face, double amount);

/// Rotates by yaw (about y), then pitch (about x), then roll (in the image
/// plane, x' = c + R(x - c) with y down) and projects orthographically:
/// pixel = center + scale * (x, y).
LandmarkSet project_face(const FaceTemplate& face, const PoseAngles& pose, const Point2& center, double scale);

struct RotationCorpusSpec {
  int samples = 2048;
  int image_size = 256;
  double max_angle = 45.0;     // degrees, each axis uniform in [-max, max]
  double scale = 70.0;         // px per template unit
  double scale_jitter = 0.05;  // relative
  double shift_jitter = 4.0;   // px
  double shape_jitter = 0.02;  // template units, per point
  double noise = 0.5;          // px, per point and view
  std::uint64_t seed = 0;
};

/// (p_s, theta_t, p_t) triples in normalized coordinates: each sample draws
/// one perturbed template and two poses and projects it under both.
std::vector<TransformerSample> rotation_corpus(const RotationCorpusSpec& spec);

/// Mean of |p_t - p_s|^2 over the corpus: the loss of predicting no motion.
double identity_baseline_mse(const std::vector<TransformerSample>& samples);

struct SyntheticFace {
  ImageBuffer image;
  SegMask mask;
};

/// Paints a face for the given landmarks: shaded skin inside the contour and
/// brows, darker eyes, brows, lips and pupils, hair above, textured
/// background. Smooth (blurred) so resampling errors stay small.
SyntheticFace render_synthetic_face(const LandmarkSet& landmarks, int width, int height, std::uint64_t seed);

/// Square box around the landmarks, enlarged by `margin` and kept in frame.
BoundingBox face_box(const LandmarkSet& landmarks, int width, int height, double margin = 1.5);

struct SyntheticSequenceSpec {
  int frames = 20;
  int width = 256;
  int height = 256;
  double scale = 60.0;
  double max_yaw = 40.0;
  double max_pitch = 20.0;
  double max_roll = 8.0;
  std::uint64_t seed = 0;
};

/// A head sweeping through yaw and pitch with a slight roll; consecutive
/// poses are more than kDefaultPruneRadius apart. Records carry images and masks.
FrameSequence synthetic_sequence(const SyntheticSequenceSpec& spec);

/// Writes NNNNNN.png, NNNNNN_mask.png and NNNNNN.json per frame.
void write_sequence(const FrameSequence& sequence, const std::filesystem::path& dir);

}  // namespace facepipe
