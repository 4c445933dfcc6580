#include "facepipe/transformer.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

namespace facepipe {

MlpTransformer MlpTransformer::create(const std::vector<int>& dims, const InitOptions& init) {
  if (dims.size() < 2) throw Error("transformer needs at least one layer");
  for (int d : dims)
    if (d <= 0) throw Error("layer widths must be positive");
  std::mt19937_64 rng(init.seed);
  MlpTransformer m;
  const std::size_t n_layers = dims.size() - 1;
  for (std::size_t l = 0; l < n_layers; ++l) {
    DenseLayer layer;
    const int in = dims[l];
    const int out = dims[l + 1];
    const bool last = l + 1 == n_layers;
    layer.weight = Eigen::MatrixXd::Zero(out, in);
    layer.bias = Eigen::VectorXd::Zero(out);
    if (!last || !init.zero_final_layer) {
      std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / in));
      for (int r = 0; r < out; ++r)
        for (int c = 0; c < in; ++c) layer.weight(r, c) = normal(rng);
    }
    layer.batch_norm = !last;
    if (layer.batch_norm) {
      layer.gamma = Eigen::VectorXd::Ones(out);
      layer.beta = Eigen::VectorXd::Zero(out);
      layer.running_mean = Eigen::VectorXd::Zero(out);
      layer.running_var = Eigen::VectorXd::Ones(out);
    }
    m.layers_.push_back(std::move(layer));
  }
  return m;
}

MlpTransformer MlpTransformer::create_default(std::uint64_t seed) {
  std::vector<int> dims{kTransformerInputDim};
  for (int i = 0; i < kTransformerLayers - 1; ++i) dims.push_back(kTransformerHidden);
  dims.push_back(kTransformerOutputDim);
  return create(dims, {seed, true});
}

void MlpTransformer::validate() const {
  if (layers_.empty()) throw Error("transformer has no layers");
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& L = layers_[l];
    if (l > 0 && L.in_dim() != layers_[l - 1].out_dim()) throw Error("layer dimensions do not chain");
    if (L.bias.size() != L.out_dim()) throw Error("bias size mismatch");
    if (!L.weight.allFinite() || !L.bias.allFinite()) throw Error("non-finite transformer parameters");
    if (L.batch_norm) {
      if (L.gamma.size() != L.out_dim() || L.beta.size() != L.out_dim() || L.running_mean.size() != L.out_dim() ||
          L.running_var.size() != L.out_dim())
        throw Error("batch-norm parameter size mismatch");
      if (!L.gamma.allFinite() || !L.beta.allFinite() || !L.running_mean.allFinite())
        throw Error("non-finite batch-norm parameters");
      if (!(L.running_var.array() > 0.0).all()) throw Error("running variances must be positive");
    }
  }
}

bool operator==(const MlpTransformer& a, const MlpTransformer& b) {
  if (a.layers_.size() != b.layers_.size()) return false;
  for (std::size_t l = 0; l < a.layers_.size(); ++l) {
    const auto& x = a.layers_[l];
    const auto& y = b.layers_[l];
    if (x.batch_norm != y.batch_norm || x.weight != y.weight || x.bias != y.bias) return false;
    if (x.batch_norm && (x.gamma != y.gamma || x.beta != y.beta || x.running_mean != y.running_mean ||
                         x.running_var != y.running_var))
      return false;
  }
  return true;
}

Eigen::MatrixXd MlpTransformer::infer(const Eigen::MatrixXd& inputs) const {
  if (inputs.rows() != input_dim()) throw Error("transformer input has wrong dimension");
  Eigen::MatrixXd out(output_dim(), inputs.cols());
  // Column at a time: a sample's output never depends on its batch.
  for (Eigen::Index col = 0; col < inputs.cols(); ++col) {
    Eigen::VectorXd x = inputs.col(col);
    for (const auto& L : layers_) {
      Eigen::VectorXd z = L.weight * x + L.bias;
      if (L.batch_norm) {
        z = (L.gamma.array() * (z - L.running_mean).array() / (L.running_var.array() + kBnEps).sqrt() +
             L.beta.array())
                .cwiseMax(0.0)
                .matrix();
      }
      x = std::move(z);
    }
    out.col(col) = x;
  }
  return out;
}

namespace {

struct LayerCache {
  Eigen::MatrixXd input;
  Eigen::MatrixXd xhat;
  Eigen::MatrixXd pre_relu;
  Eigen::VectorXd inv_std;
};

Eigen::MatrixXd train_forward(const MlpTransformer& model, const Eigen::MatrixXd& inputs,
                              std::vector<LayerCache>& cache, BatchStats* stats) {
  const auto& layers = model.layers();
  cache.resize(layers.size());
  const double B = static_cast<double>(inputs.cols());
  Eigen::MatrixXd x = inputs;
  if (stats) {
    stats->mean.assign(layers.size(), {});
    stats->var.assign(layers.size(), {});
  }
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& L = layers[l];
    LayerCache& c = cache[l];
    c.input = x;
    Eigen::MatrixXd z = L.weight * x;
    z.colwise() += L.bias;
    if (!L.batch_norm) {
      x = std::move(z);
      continue;
    }
    const Eigen::VectorXd mean = z.rowwise().sum() / B;
    z.colwise() -= mean;
    const Eigen::VectorXd var = z.array().square().rowwise().sum() / B;
    c.inv_std = (var.array() + MlpTransformer::kBnEps).rsqrt();
    c.xhat = c.inv_std.asDiagonal() * z;
    c.pre_relu = L.gamma.asDiagonal() * c.xhat;
    c.pre_relu.colwise() += L.beta;
    x = c.pre_relu.cwiseMax(0.0);
    if (stats) {
      stats->mean[l] = mean;
      stats->var[l] = var;
    }
  }
  return x;
}

void check_batch(const MlpTransformer& model, const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets) {
  if (inputs.rows() != model.input_dim() || targets.rows() != model.output_dim() || inputs.cols() != targets.cols() ||
      inputs.cols() == 0)
    throw Error("training batch has inconsistent shape");
}

}  // namespace

double loss_and_gradients(const MlpTransformer& model, const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets,
                          std::vector<LayerGradients>& grads, BatchStats* stats) {
  check_batch(model, inputs, targets);
  const auto& layers = model.layers();
  std::vector<LayerCache> cache;
  const Eigen::MatrixXd out = train_forward(model, inputs, cache, stats);
  const double B = static_cast<double>(inputs.cols());
  const Eigen::MatrixXd diff = out - targets;
  const double loss = diff.squaredNorm() / B;

  grads.resize(layers.size());
  Eigen::MatrixXd d = 2.0 * diff / B;  // dL/d(layer output)
  for (std::size_t li = layers.size(); li-- > 0;) {
    const auto& L = layers[li];
    const LayerCache& c = cache[li];
    LayerGradients& g = grads[li];
    if (L.batch_norm) {
      const Eigen::MatrixXd dy = (c.pre_relu.array() > 0.0).select(d, 0.0);
      g.gamma = (dy.array() * c.xhat.array()).rowwise().sum();
      g.beta = dy.rowwise().sum();
      const Eigen::MatrixXd dxhat = L.gamma.asDiagonal() * dy;
      const Eigen::VectorXd mean_dxhat = dxhat.rowwise().sum() / B;
      const Eigen::VectorXd mean_dxhat_xhat = (dxhat.array() * c.xhat.array()).rowwise().sum() / B;
      Eigen::MatrixXd dz = dxhat;
      dz.colwise() -= mean_dxhat;
      dz -= mean_dxhat_xhat.asDiagonal() * c.xhat;
      d = c.inv_std.asDiagonal() * dz;
    } else {
      g.gamma.resize(0);
      g.beta.resize(0);
    }
    g.weight = d * c.input.transpose();
    g.bias = d.rowwise().sum();
    if (li > 0) d = L.weight.transpose() * d;
  }
  return loss;
}

double training_loss(const MlpTransformer& model, const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets) {
  check_batch(model, inputs, targets);
  std::vector<LayerCache> cache;
  const Eigen::MatrixXd out = train_forward(model, inputs, cache, nullptr);
  return (out - targets).squaredNorm() / static_cast<double>(inputs.cols());
}

double inference_loss(const MlpTransformer& model, const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets) {
  check_batch(model, inputs, targets);
  return (model.infer(inputs) - targets).squaredNorm() / static_cast<double>(inputs.cols());
}

LandmarkSet normalize_landmarks(const LandmarkSet& p, int width, int height) {
  LandmarkSet out;
  for (std::size_t i = 0; i < kNumLandmarks; ++i)
    out[i] = {2.0 * p[i].x / width - 1.0, 2.0 * p[i].y / height - 1.0};
  return out;
}

LandmarkSet denormalize_landmarks(const LandmarkSet& p, int width, int height) {
  LandmarkSet out;
  for (std::size_t i = 0; i < kNumLandmarks; ++i)
    out[i] = {(p[i].x + 1.0) * 0.5 * width, (p[i].y + 1.0) * 0.5 * height};
  return out;
}

Eigen::VectorXd encode_input(const LandmarkSet& source, const PoseAngles& pose) {
  Eigen::VectorXd v(kTransformerInputDim);
  for (std::size_t i = 0; i < kNumLandmarks; ++i) {
    v(2 * i) = source[i].x;
    v(2 * i + 1) = source[i].y;
  }
  v(2 * kNumLandmarks) = pose.yaw / kAngleScale;
  v(2 * kNumLandmarks + 1) = pose.pitch / kAngleScale;
  v(2 * kNumLandmarks + 2) = pose.roll / kAngleScale;
  return v;
}

Eigen::VectorXd encode_output(const LandmarkSet& landmarks) {
  Eigen::VectorXd v(kTransformerOutputDim);
  for (std::size_t i = 0; i < kNumLandmarks; ++i) {
    v(2 * i) = landmarks[i].x;
    v(2 * i + 1) = landmarks[i].y;
  }
  return v;
}

LandmarkSet decode_output(const Eigen::Ref<const Eigen::VectorXd>& v) {
  if (v.size() != kTransformerOutputDim) throw Error("transformer output has wrong dimension");
  std::array<Point2, kNumLandmarks> pts{};
  for (std::size_t i = 0; i < kNumLandmarks; ++i) pts[i] = {v(2 * i), v(2 * i + 1)};
  return LandmarkSet(pts);
}

LandmarkSet forward(const MlpTransformer& model, const LandmarkSet& source, const PoseAngles& target_pose) {
  if (!source.all_finite() || !target_pose.finite()) throw Error("transformer input must be finite");
  const Eigen::VectorXd x = encode_input(source, target_pose);
  const Eigen::MatrixXd y = model.infer(x);
  return decode_output(y.col(0));
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw Error("learning rate must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) throw Error("Adam betas must lie in [0,1)");
  if (batch_size < 1) throw Error("batch size must be >= 1");
  if (iterations < 0) throw Error("iterations must be >= 0");
  if (lr_halving_steps < 0) throw Error("lr_halving_steps must be >= 0");
}

TrainResult train(const std::vector<TransformerSample>& dataset, const TrainConfig& config) {
  return train(dataset, config, MlpTransformer::create_default(config.seed));
}

TrainResult train(const std::vector<TransformerSample>& dataset, const TrainConfig& config, MlpTransformer model) {
  config.validate();
  if (dataset.empty()) throw Error("training dataset is empty");
  model.validate();
  if (model.input_dim() != kTransformerInputDim || model.output_dim() != kTransformerOutputDim)
    throw Error("model dimensions do not match the landmark encoding");

  const Eigen::Index n = static_cast<Eigen::Index>(dataset.size());
  Eigen::MatrixXd X(kTransformerInputDim, n), Y(kTransformerOutputDim, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    X.col(i) = encode_input(dataset[i].source, dataset[i].target_pose);
    Y.col(i) = encode_output(dataset[i].target);
  }
  if (!X.allFinite() || !Y.allFinite()) throw Error("training data must be finite");

  auto& layers = model.layers();
  if (config.init_output_bias_to_mean && layers.back().weight.isZero(0.0) && layers.back().bias.isZero(0.0))
    layers.back().bias = Y.rowwise().mean();

  struct Moments {
    Eigen::MatrixXd mw, vw;
    Eigen::VectorXd mb, vb, mg, vg, mbeta, vbeta;
  };
  std::vector<Moments> mom(layers.size());
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& L = layers[l];
    mom[l].mw = mom[l].vw = Eigen::MatrixXd::Zero(L.out_dim(), L.in_dim());
    mom[l].mb = mom[l].vb = Eigen::VectorXd::Zero(L.out_dim());
    if (L.batch_norm) mom[l].mg = mom[l].vg = mom[l].mbeta = mom[l].vbeta = Eigen::VectorXd::Zero(L.out_dim());
  }

  std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = order.size();
  const Eigen::Index batch = std::min<Eigen::Index>(config.batch_size, n);

  TrainResult result;
  result.loss_curve.reserve(static_cast<std::size_t>(config.iterations));
  std::vector<LayerGradients> grads;
  BatchStats stats;
  Eigen::MatrixXd bx(kTransformerInputDim, batch), by(kTransformerOutputDim, batch);
  double b1t = 1.0, b2t = 1.0;

  for (int step = 0; step < config.iterations; ++step) {
    for (Eigen::Index b = 0; b < batch; ++b) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      bx.col(b) = X.col(order[cursor]);
      by.col(b) = Y.col(order[cursor]);
      ++cursor;
    }
    const double loss = loss_and_gradients(model, bx, by, grads, &stats);
    if (!std::isfinite(loss)) {
      std::ostringstream os;
      os << "training diverged: loss " << loss << " at step " << step;
      throw Error(os.str());
    }
    result.loss_curve.push_back(loss);

    double lr = config.learning_rate;
    if (config.lr_halving_steps > 0) lr *= std::pow(0.5, step / config.lr_halving_steps);
    b1t *= config.beta1;
    b2t *= config.beta2;
    const double c1 = 1.0 - b1t;
    const double c2 = 1.0 - b2t;
    auto adam = [&](auto& param, const auto& grad, auto& m, auto& v) {
      m = config.beta1 * m + (1.0 - config.beta1) * grad;
      v = config.beta2 * v + (1.0 - config.beta2) * grad.cwiseProduct(grad);
      param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + config.adam_eps);
    };
    for (std::size_t l = 0; l < layers.size(); ++l) {
      auto& L = layers[l];
      adam(L.weight, grads[l].weight, mom[l].mw, mom[l].vw);
      adam(L.bias, grads[l].bias, mom[l].mb, mom[l].vb);
      if (!L.batch_norm) continue;
      adam(L.gamma, grads[l].gamma, mom[l].mg, mom[l].vg);
      adam(L.beta, grads[l].beta, mom[l].mbeta, mom[l].vbeta);
      const double unbias = batch > 1 ? static_cast<double>(batch) / static_cast<double>(batch - 1) : 1.0;
      L.running_mean = (1.0 - MlpTransformer::kBnMomentum) * L.running_mean + MlpTransformer::kBnMomentum * stats.mean[l];
      L.running_var =
          (1.0 - MlpTransformer::kBnMomentum) * L.running_var + MlpTransformer::kBnMomentum * unbias * stats.var[l];
    }
  }
  result.model = std::move(model);
  return result;
}

std::vector<PoseAngles> intermediate_poses(const PoseAngles& source, const PoseAngles& target, int n) {
  if (n < 1) throw Error("iteration count must be >= 1");
  std::vector<PoseAngles> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 1; i <= n; ++i) {
    const double f = static_cast<double>(i) / n;
    out.push_back({(1.0 - f) * source.yaw + f * target.yaw, (1.0 - f) * source.pitch + f * target.pitch,
                   (1.0 - f) * source.roll + f * target.roll});
  }
  return out;
}

std::vector<LandmarkSet> intermediate_landmarks(const MlpTransformer& model, const LandmarkSet& source,
                                                const PoseAngles& source_pose, const PoseAngles& target_pose, int n,
                                                const LandmarkSet* target) {
  const auto poses = intermediate_poses(source_pose, target_pose, n);
  std::vector<LandmarkSet> out;
  out.reserve(poses.size());
  for (int i = 0; i + 1 < n; ++i) out.push_back(forward(model, source, poses[i]));
  out.push_back(target ? *target : forward(model, source, target_pose));
  return out;
}

LandmarkSet swap_mouth_landmarks(const LandmarkSet& target, const LandmarkSet& source) {
  using parts::kMouth;
  const Point2 ct = target.centroid(kMouth);
  const Point2 cs = source.centroid(kMouth);
  const double dt = distance(target[parts::kMouthLeftCorner], target[parts::kMouthRightCorner]);
  const double ds = distance(source[parts::kMouthLeftCorner], source[parts::kMouthRightCorner]);
  const double scale = ds > 0.0 ? dt / ds : 1.0;
  LandmarkSet out = target;
  // s + (ct - cs) + (scale - 1)(s - cs): exact when source == target.
  const Point2 shift = ct - cs;
  for (std::size_t i = kMouth.first; i <= kMouth.last; ++i)
    out[i] = source[i] + shift + (source[i] - cs) * (scale - 1.0);
  return out;
}

namespace {

constexpr char kMagic[4] = {'F', 'P', 'T', '1'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int k = 0; k < 4; ++k) out.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
}

void put_f32(std::vector<std::uint8_t>& out, double v) { put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v))); }

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& b) : bytes_(b) {}
  std::uint32_t u32() {
    if (pos_ + 4 > bytes_.size()) throw Error("truncated checkpoint");
    std::uint32_t v = 0;
    for (int k = 0; k < 4; ++k) v |= static_cast<std::uint32_t>(bytes_[pos_++]) << (8 * k);
    return v;
  }
  double f32() { return std::bit_cast<float>(u32()); }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> checkpoint_bytes(const MlpTransformer& model) {
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  const auto& layers = model.layers();
  put_u32(out, static_cast<std::uint32_t>(layers.size()));
  for (const auto& L : layers) {
    put_u32(out, static_cast<std::uint32_t>(L.out_dim()));
    put_u32(out, static_cast<std::uint32_t>(L.in_dim()));
    for (int r = 0; r < L.out_dim(); ++r)
      for (int c = 0; c < L.in_dim(); ++c) put_f32(out, L.weight(r, c));
    for (int r = 0; r < L.out_dim(); ++r) put_f32(out, L.bias(r));
    if (!L.batch_norm) continue;
    for (const Eigen::VectorXd* v : {&L.gamma, &L.beta, &L.running_mean, &L.running_var})
      for (int r = 0; r < L.out_dim(); ++r) put_f32(out, (*v)(r));
  }
  return out;
}

MlpTransformer checkpoint_from_bytes(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 8 || !std::equal(std::begin(kMagic), std::end(kMagic), bytes.begin()))
    throw Error("not a transformer checkpoint (bad magic)");
  const std::vector<std::uint8_t> body(bytes.begin() + 4, bytes.end());
  Reader in(body);
  const std::uint32_t count = in.u32();
  if (count == 0 || count > 1024) throw Error("implausible checkpoint layer count");
  std::vector<int> dims;
  MlpTransformer m;
  std::vector<DenseLayer> layers;
  for (std::uint32_t l = 0; l < count; ++l) {
    DenseLayer L;
    const int rows = static_cast<int>(in.u32());
    const int cols = static_cast<int>(in.u32());
    if (rows <= 0 || cols <= 0 || rows > (1 << 16) || cols > (1 << 16)) throw Error("implausible layer shape");
    L.weight.resize(rows, cols);
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) L.weight(r, c) = in.f32();
    L.bias.resize(rows);
    for (int r = 0; r < rows; ++r) L.bias(r) = in.f32();
    L.batch_norm = l + 1 < count;
    if (L.batch_norm) {
      for (Eigen::VectorXd* v : {&L.gamma, &L.beta, &L.running_mean, &L.running_var}) {
        v->resize(rows);
        for (int r = 0; r < rows; ++r) (*v)(r) = in.f32();
      }
    }
    layers.push_back(std::move(L));
  }
  if (!in.done()) throw Error("trailing bytes in checkpoint");
  m.layers() = std::move(layers);
  m.validate();
  return m;
}

void save_checkpoint(const MlpTransformer& model, const std::filesystem::path& path) {
  const auto bytes = checkpoint_bytes(model);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write checkpoint " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

MlpTransformer load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return checkpoint_from_bytes(bytes);
}

void write_loss_csv(const std::vector<double>& curve, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "step,mse\n";
  out.precision(17);
  for (std::size_t i = 0; i < curve.size(); ++i) out << i << "," << curve[i] << "\n";
}

}  // namespace facepipe
