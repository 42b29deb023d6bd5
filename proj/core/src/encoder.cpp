#include "cryopose/encoder.hpp"

#include <cmath>

namespace cryopose {

void EncoderConfig::validate() const {
  CP_CHECK(input_size >= 8 && input_size % 8 == 0, ConfigError,
           "encoder: input size must be a multiple of 8 (three maxpool stages)");
  for (int f : filters) CP_CHECK(f >= 1, ConfigError, "encoder: filter counts must be >= 1");
  for (int m : mlp) CP_CHECK(m >= 1, ConfigError, "encoder: MLP widths must be >= 1");
}

Tensor& EncoderWeights::at(const std::string& name) {
  for (auto& e : entries)
    if (e.name == name) return e.tensor;
  throw Error("encoder weights: no tensor named '" + name + "'");
}

const Tensor& EncoderWeights::at(const std::string& name) const {
  for (const auto& e : entries)
    if (e.name == name) return e.tensor;
  throw Error("encoder weights: no tensor named '" + name + "'");
}

std::int64_t EncoderWeights::parameter_count() const {
  std::int64_t n = 0;
  for (const auto& e : entries) n += e.tensor.numel();
  return n;
}

namespace {

struct LayerSpec {
  std::string name;
  Shape shape;
  std::int64_t fan_in;
};

std::vector<LayerSpec> layer_specs(const EncoderConfig& cfg) {
  std::vector<LayerSpec> specs;
  int in_ch = 1;
  for (int block = 0; block < 3; ++block) {
    const int f = cfg.filters[static_cast<std::size_t>(block)];
    for (int half = 0; half < 2; ++half) {
      const std::string base = "conv" + std::to_string(block * 2 + half + 1);
      const int c = half == 0 ? in_ch : f;
      specs.push_back({base + ".w", {f, c, 3, 3}, static_cast<std::int64_t>(c) * 9});
      specs.push_back({base + ".b", {f}, static_cast<std::int64_t>(c) * 9});
    }
    in_ch = f;
  }
  const std::int64_t flat = cfg.flatten_dim();
  specs.push_back({"fc1.w", {flat, cfg.mlp[0]}, flat});
  specs.push_back({"fc1.b", {cfg.mlp[0]}, flat});
  specs.push_back({"fc2.w", {cfg.mlp[0], cfg.mlp[1]}, cfg.mlp[0]});
  specs.push_back({"fc2.b", {cfg.mlp[1]}, cfg.mlp[0]});
  specs.push_back({"head.w", {cfg.mlp[1], cfg.head_dim()}, cfg.mlp[1]});
  specs.push_back({"head.b", {cfg.head_dim()}, cfg.mlp[1]});
  return specs;
}

}  // namespace

std::int64_t encoder_parameter_count(const EncoderConfig& cfg) {
  std::int64_t n = 0;
  for (const auto& s : layer_specs(cfg)) n += shape_numel(s.shape);
  return n;
}

EncoderWeights init_encoder_weights(const EncoderConfig& cfg, Rng& rng) {
  cfg.validate();
  EncoderWeights w;
  for (const auto& spec : layer_specs(cfg)) {
    const bool is_bias = spec.shape.size() == 1;
    const double bound = is_bias ? std::sqrt(1.0 / static_cast<double>(spec.fan_in))
                                 : std::sqrt(6.0 / static_cast<double>(spec.fan_in));
    Tensor t = Tensor::zeros(spec.shape, Dtype::Real64);
    double* p = t.mutable_real();
    for (std::int64_t i = 0; i < t.numel(); ++i) p[i] = rng.uniform(-bound, bound);
    w.entries.push_back({spec.name, std::move(t)});
  }
  return w;
}

const ad::Var& EncoderVars::at(const std::string& name) const {
  for (const auto& [n, v] : vars)
    if (n == name) return v;
  throw Error("encoder vars: no tensor named '" + name + "'");
}

EncoderVars encoder_leaves(ad::Tape& tape, const EncoderWeights& w, bool requires_grad) {
  EncoderVars vars;
  for (const auto& e : w.entries) vars.vars.emplace_back(e.name, tape.leaf(e.tensor, requires_grad));
  return vars;
}

ad::Var encoder_forward(const ad::Var& images, const EncoderVars& w,
                        const EncoderConfig& cfg) {
  using namespace ad;
  const Tensor& v = images.value();
  CP_CHECK_SHAPE(v.rank() == 4 && v.dim(1) == 1 && v.dim(2) == cfg.input_size &&
                     v.dim(3) == cfg.input_size,
                 "encoder_forward expects (B,1," + std::to_string(cfg.input_size) + "," +
                     std::to_string(cfg.input_size) + ") images");
  Var x = images;
  for (int block = 0; block < 3; ++block) {
    for (int half = 0; half < 2; ++half) {
      const std::string base = "conv" + std::to_string(block * 2 + half + 1);
      x = relu(bias_channels(conv2d(x, w.at(base + ".w")), w.at(base + ".b")));
    }
    x = maxpool2d(x);
  }
  const auto B = v.dim(0);
  x = reshape(x, {B, cfg.flatten_dim()});
  x = relu(add_rowvec(matmul(x, w.at("fc1.w")), w.at("fc1.b")));
  x = relu(add_rowvec(matmul(x, w.at("fc2.w")), w.at("fc2.b")));
  return add_rowvec(matmul(x, w.at("head.w")), w.at("head.b"));
}

Tensor normalize_image(const Tensor& image) {
  CP_CHECK_SHAPE(!image.is_complex(), "normalize_image expects a real tensor");
  const std::int64_t n = image.numel();
  const double* p = image.real_data();
  double mean = 0.0;
  for (std::int64_t i = 0; i < n; ++i) mean += p[i];
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (std::int64_t i = 0; i < n; ++i) var += (p[i] - mean) * (p[i] - mean);
  var /= static_cast<double>(n);
  const double scale = var > 0.0 ? 1.0 / std::sqrt(var) : 1.0;
  Tensor out = Tensor::zeros(image.shape(), Dtype::Real64);
  double* o = out.mutable_real();
  for (std::int64_t i = 0; i < n; ++i) o[i] = (p[i] - mean) * scale;
  return out;
}

std::vector<Eigen::VectorXd> encode_batch(const Tensor& images, const EncoderWeights& w,
                                          const EncoderConfig& cfg) {
  CP_CHECK_SHAPE(images.rank() == 3, "encode_batch expects (B, N, N) images");
  const auto B = images.dim(0);
  const auto n = images.dim(1);
  Tensor batch = Tensor::zeros({B, 1, n, n}, Dtype::Real64);
  {
    double* dst = batch.mutable_real();
    const std::int64_t plane = n * n;
    for (std::int64_t b = 0; b < B; ++b) {
      Tensor img = Tensor::from_real({n, n}, std::vector<double>(
          images.real_data() + b * plane, images.real_data() + (b + 1) * plane));
      Tensor norm = normalize_image(img);
      std::copy_n(norm.real_data(), plane, dst + b * plane);
    }
  }
  ad::Tape tape;
  EncoderVars vars = encoder_leaves(tape, w, /*requires_grad=*/false);
  ad::Var raw = encoder_forward(tape.leaf(batch, false), vars, cfg);
  const Tensor& out = raw.value();
  std::vector<Eigen::VectorXd> rows;
  rows.reserve(static_cast<std::size_t>(B));
  const int d = cfg.head_dim();
  for (std::int64_t b = 0; b < B; ++b) {
    Eigen::VectorXd r(d);
    for (int i = 0; i < d; ++i) r[i] = out.real_data()[b * d + i];
    rows.push_back(std::move(r));
  }
  return rows;
}

so3::Rotation rotation_from_raw(const Eigen::VectorXd& raw, so3::HeadKind kind,
                                int* perturbed) {
  if (kind != so3::HeadKind::S2S2) {
    return so3::head_to_rotation_value(raw, kind);
  }
  Eigen::VectorXd r = raw;
  for (int attempt = 0; attempt < 8; ++attempt) {
    try {
      return so3::head_to_rotation_value(r, kind);
    } catch (const Error&) {
      // Deterministic perturbation pattern; grows until non-degenerate.
      const double eps = 1e-6 * std::pow(10.0, attempt);
      for (int i = 0; i < r.size(); ++i) r[i] += eps * (i + 1);
      if (perturbed) ++*perturbed;
    }
  }
  throw NumericError("s2s2 head output degenerate beyond repair");
}

std::vector<so3::Rotation> encode_rotations(const Tensor& images, const EncoderWeights& w,
                                            const EncoderConfig& cfg, int* perturbed) {
  std::vector<so3::Rotation> out;
  for (const auto& raw : encode_batch(images, w, cfg)) {
    out.push_back(rotation_from_raw(raw, cfg.head, perturbed));
  }
  return out;
}

}  // namespace cryopose
