#include "trojdiff/mlp.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

namespace trojdiff {

Activation parse_activation(const std::string& name) {
  if (name == "silu") return Activation::kSilu;
  if (name == "tanh") return Activation::kTanh;
  if (name == "identity") return Activation::kIdentity;
  throw ParameterError("unknown activation '" + name + "' (expected silu|tanh|identity)");
}

const char* to_string(Activation act) {
  switch (act) {
    case Activation::kSilu: return "silu";
    case Activation::kTanh: return "tanh";
    case Activation::kIdentity: return "identity";
  }
  return "?";
}

namespace {

Mat activate(const Mat& z, Activation act) {
  switch (act) {
    case Activation::kSilu: return (z.array() / (1.0 + (-z.array()).exp())).matrix();
    case Activation::kTanh: return z.array().tanh().matrix();
    case Activation::kIdentity: return z;
  }
  return z;
}

Mat activate_grad(const Mat& z, Activation act) {
  switch (act) {
    case Activation::kSilu: {
      const Eigen::ArrayXXd sig = 1.0 / (1.0 + (-z.array()).exp());
      return (sig * (1.0 + z.array() * (1.0 - sig))).matrix();
    }
    case Activation::kTanh: return (1.0 - z.array().tanh().square()).matrix();
    case Activation::kIdentity: return Mat::Ones(z.rows(), z.cols());
  }
  return z;
}

}  // namespace

std::vector<int> MlpDenoiser::widths() const {
  std::vector<int> w;
  w.push_back(spec_.input_dim());
  for (int h : spec_.hidden) w.push_back(h);
  w.push_back(spec_.data_dim);
  return w;
}

Eigen::Index MlpDenoiser::param_count(const MlpSpec& spec) {
  Eigen::Index n = 0;
  int in = spec.input_dim();
  std::vector<int> outs = spec.hidden;
  outs.push_back(spec.data_dim);
  for (int out : outs) {
    n += static_cast<Eigen::Index>(out) * in + out;
    in = out;
  }
  return n;
}

void MlpDenoiser::validate() const {
  if (spec_.data_dim < 1) throw ParameterError("MLP data_dim must be positive");
  if (spec_.steps < 1) throw ParameterError("MLP steps must be positive");
  for (int h : spec_.hidden)
    if (h < 1) throw ParameterError("MLP hidden widths must be positive");
  if (params_.size() != param_count(spec_))
    throw ParameterError("MLP parameter vector has " + std::to_string(params_.size()) +
                         " entries, expected " + std::to_string(param_count(spec_)));
  if (!params_.allFinite()) throw ParameterError("MLP parameters must be finite");
}

MlpDenoiser::MlpDenoiser(MlpSpec spec, Rng& rng) : spec_(std::move(spec)) {
  params_ = Vec::Zero(param_count(spec_));
  const std::vector<int> w = widths();
  Eigen::Index off = 0;
  for (std::size_t l = 0; l + 1 < w.size(); ++l) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(w[l]));
    const Eigen::Index nw = static_cast<Eigen::Index>(w[l + 1]) * w[l];
    for (Eigen::Index i = 0; i < nw; ++i) params_[off + i] = scale * rng.normal();
    off += nw + w[l + 1];
  }
  validate();
}

MlpDenoiser::MlpDenoiser(MlpSpec spec, Vec params)
    : spec_(std::move(spec)), params_(std::move(params)) {
  validate();
}

Mat MlpDenoiser::features(const Mat& x, const std::vector<int>& t) const {
  if (x.rows() != spec_.data_dim)
    throw ParameterError("MLP input has " + std::to_string(x.rows()) + " rows, expected " +
                         std::to_string(spec_.data_dim));
  if (static_cast<Eigen::Index>(t.size()) != x.cols())
    throw ParameterError("one time step per column required");
  if (!spec_.time_encoding) return x;
  Mat f(spec_.input_dim(), x.cols());
  f.topRows(spec_.data_dim) = x;
  const int d = spec_.data_dim;
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const double u = static_cast<double>(t[j]) / spec_.steps;
    const double a = std::numbers::pi * u;
    f(d, j) = u;
    f(d + 1, j) = std::sin(a);
    f(d + 2, j) = std::cos(a);
    f(d + 3, j) = std::sin(2.0 * a);
    f(d + 4, j) = std::cos(2.0 * a);
  }
  return f;
}

Mat MlpDenoiser::forward(const Mat& input, Cache* cache) const {
  if (input.rows() != spec_.input_dim()) throw ParameterError("MLP feature shape mismatch");
  const std::vector<int> w = widths();
  const std::size_t layers = w.size() - 1;
  if (cache) {
    cache->inputs.assign(layers, Mat());
    cache->pre.assign(layers, Mat());
  }
  Mat h = input;
  Eigen::Index off = 0;
  for (std::size_t l = 0; l < layers; ++l) {
    Eigen::Map<const Mat> W(params_.data() + off, w[l + 1], w[l]);
    off += static_cast<Eigen::Index>(w[l + 1]) * w[l];
    Eigen::Map<const Vec> b(params_.data() + off, w[l + 1]);
    off += w[l + 1];
    Mat z = W * h;
    z.colwise() += b;
    if (cache) cache->inputs[l] = h;
    if (l + 1 < layers) {
      h = activate(z, spec_.activation);
      if (cache) cache->pre[l] = std::move(z);
    } else {
      h = std::move(z);
    }
  }
  return h;
}

Vec MlpDenoiser::backward(const Cache& cache, const Mat& grad_out) const {
  const std::vector<int> w = widths();
  const std::size_t layers = w.size() - 1;
  if (cache.inputs.size() != layers) throw ParameterError("MLP cache does not match network");
  if (grad_out.rows() != spec_.data_dim || grad_out.cols() != cache.inputs[0].cols())
    throw ParameterError("MLP upstream gradient shape mismatch");
  Vec grad = Vec::Zero(params_.size());
  std::vector<Eigen::Index> offsets(layers);
  Eigen::Index off = 0;
  for (std::size_t l = 0; l < layers; ++l) {
    offsets[l] = off;
    off += static_cast<Eigen::Index>(w[l + 1]) * w[l] + w[l + 1];
  }
  Mat delta = grad_out;
  for (std::size_t l = layers; l-- > 0;) {
    const Eigen::Index nw = static_cast<Eigen::Index>(w[l + 1]) * w[l];
    Eigen::Map<Mat> gW(grad.data() + offsets[l], w[l + 1], w[l]);
    Eigen::Map<Vec> gb(grad.data() + offsets[l] + nw, w[l + 1]);
    gW.noalias() = delta * cache.inputs[l].transpose();
    gb = delta.rowwise().sum();
    if (l == 0) break;
    Eigen::Map<const Mat> W(params_.data() + offsets[l], w[l + 1], w[l]);
    Mat back = W.transpose() * delta;
    delta = back.cwiseProduct(activate_grad(cache.pre[l - 1], spec_.activation));
  }
  return grad;
}

Mat MlpDenoiser::predict(const Mat& x, int t) const {
  return forward(features(x, std::vector<int>(x.cols(), t)));
}

Mat MlpDenoiser::predict(const Mat& x, const std::vector<int>& t) const {
  return forward(features(x, t));
}

Adam::Adam(Eigen::Index size, double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), m_(Vec::Zero(size)), v_(Vec::Zero(size)) {
  if (!(lr > 0.0)) throw ParameterError("learning rate must be positive");
}

void Adam::step(Vec& params, const Vec& grad) {
  if (grad.size() != m_.size() || params.size() != m_.size())
    throw ParameterError("optimizer state size mismatch");
  ++iter_;
  m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
  v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(iter_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(iter_));
  params.array() -= lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
}

void mlp_step(MlpDenoiser& model, const Vec& grads, Adam& optimizer) {
  optimizer.step(model.params(), grads);
}

void save_checkpoint(const std::string& path, const MlpDenoiser& model,
                     const nlohmann::json& meta) {
  static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little-endian");
  const MlpSpec& spec = model.spec();
  nlohmann::json header = {
      {"format", "trojdiff-mlp"},
      {"version", 1},
      {"data_dim", spec.data_dim},
      {"hidden", spec.hidden},
      {"activation", to_string(spec.activation)},
      {"steps", spec.steps},
      {"time_encoding", spec.time_encoding ? "t/T,sin(pi t/T),cos(pi t/T),sin(2pi t/T),cos(2pi t/T)"
                                           : "none"},
      {"param_count", model.params().size()},
      {"meta", meta},
  };
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParameterError("cannot open checkpoint for writing: " + path);
  out << header.dump() << '\n';
  out.write(reinterpret_cast<const char*>(model.params().data()),
            static_cast<std::streamsize>(model.params().size() * sizeof(double)));
  if (!out) throw ParameterError("failed writing checkpoint: " + path);
}

LoadedModel load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParameterError("cannot open checkpoint: " + path);
  std::string line;
  std::getline(in, line);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw ParameterError("checkpoint header is not JSON: " + std::string(e.what()));
  }
  if (header.value("format", "") != "trojdiff-mlp")
    throw ParameterError("not a trojdiff-mlp checkpoint: " + path);
  MlpSpec spec;
  spec.data_dim = header.at("data_dim").get<int>();
  spec.hidden = header.at("hidden").get<std::vector<int>>();
  spec.activation = parse_activation(header.at("activation").get<std::string>());
  spec.steps = header.at("steps").get<int>();
  spec.time_encoding = header.at("time_encoding").get<std::string>() != "none";
  const auto count = header.at("param_count").get<Eigen::Index>();
  if (count != MlpDenoiser::param_count(spec))
    throw ParameterError("checkpoint param_count does not match its architecture");
  Vec params(count);
  in.read(reinterpret_cast<char*>(params.data()),
          static_cast<std::streamsize>(count * sizeof(double)));
  if (in.gcount() != static_cast<std::streamsize>(count * sizeof(double)))
    throw ParameterError("checkpoint truncated: " + path);
  return {MlpDenoiser(std::move(spec), std::move(params)), std::move(header)};
}

}  // namespace trojdiff
