#include "ssimgen/nn.hpp"

#include "ssimgen/random.hpp"

#include <cmath>
#include <string>

namespace ssimgen::nn {

Activation parse_activation(std::string_view name) {
  if (name == "relu") return Activation::Relu;
  if (name == "tanh") return Activation::Tanh;
  if (name == "linear") return Activation::Identity;
  throw Error(ErrorCode::ConfigError, "unknown activation '" + std::string(name) + "'");
}

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::Relu: return "relu";
    case Activation::Tanh: return "tanh";
    case Activation::Identity: return "linear";
  }
  return "?";
}

OutputActivation parse_output_activation(std::string_view name) {
  if (name == "sigmoid") return OutputActivation::Sigmoid;
  if (name == "linear") return OutputActivation::Linear;
  throw Error(ErrorCode::ConfigError, "unknown output activation '" + std::string(name) + "'");
}

std::string_view to_string(OutputActivation a) { return a == OutputActivation::Sigmoid ? "sigmoid" : "linear"; }

void validate(const MlpSpec& spec) {
  if (spec.widths.size() < 3) throw Error(ErrorCode::ConfigError, "an MLP needs at least one hidden layer");
  for (int w : spec.widths)
    if (w <= 0) throw Error(ErrorCode::ConfigError, "layer widths must be positive");
}

Mlp::Mlp(MlpSpec spec, std::uint64_t seed) : spec_(std::move(spec)) {
  validate(spec_);
  Rng rng = make_rng(seed);
  for (std::size_t k = 0; k + 1 < spec_.widths.size(); ++k) {
    const int in = spec_.widths[k], out = spec_.widths[k + 1];
    const double limit = std::sqrt(6.0 / (in + out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    Matrix w(in, out);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = dist(rng);
    params_.push_back(std::move(w));
    params_.push_back(Matrix::Zero(1, out));
  }
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p.size());
  return n;
}

std::vector<ad::Var> Mlp::bind(ad::Tape& tape, bool trainable) const {
  std::vector<ad::Var> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(trainable ? tape.leaf(p) : tape.constant(p));
  return out;
}

namespace {

ad::Var activate(ad::Var x, Activation a) {
  switch (a) {
    case Activation::Relu: return ad::relu(x);
    case Activation::Tanh: return ad::tanh(x);
    case Activation::Identity: return x;
  }
  return x;
}

Matrix activate(const Matrix& x, Activation a) {
  switch (a) {
    case Activation::Relu: return x.cwiseMax(0.0);
    case Activation::Tanh: return x.array().tanh().matrix();
    case Activation::Identity: return x;
  }
  return x;
}

}  // namespace

ad::Var Mlp::forward(ad::Tape& tape, const std::vector<ad::Var>& params, ad::Var x, bool apply_output) const {
  (void)tape;
  if (params.size() != params_.size()) throw Error(ErrorCode::ShapeMismatch, "parameter list does not match network");
  const std::size_t layers = params_.size() / 2;
  ad::Var h = x;
  for (std::size_t k = 0; k < layers; ++k) {
    h = ad::affine(h, params[2 * k], params[2 * k + 1]);
    if (k + 1 < layers) h = activate(h, spec_.hidden);
  }
  if (apply_output && spec_.output == OutputActivation::Sigmoid) h = ad::sigmoid(h);
  return h;
}

Matrix Mlp::apply(const Matrix& x, bool apply_output) const {
  const std::size_t layers = params_.size() / 2;
  Matrix h = x;
  for (std::size_t k = 0; k < layers; ++k) {
    h = (h * params_[2 * k]).rowwise() + params_[2 * k + 1].row(0);
    if (k + 1 < layers) h = activate(h, spec_.hidden);
  }
  if (apply_output && spec_.output == OutputActivation::Sigmoid)
    h = h.unaryExpr([](double v) {
      if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
      const double e = std::exp(v);
      return e / (1.0 + e);
    });
  return h;
}

std::vector<double> Mlp::flatten() const {
  std::vector<double> flat;
  flat.reserve(parameter_count());
  for (const auto& p : params_)
    for (Eigen::Index r = 0; r < p.rows(); ++r)
      for (Eigen::Index c = 0; c < p.cols(); ++c) flat.push_back(p(r, c));
  return flat;
}

Mlp Mlp::unflatten(MlpSpec spec, const std::vector<double>& flat) {
  validate(spec);
  Mlp m;
  m.spec_ = std::move(spec);
  std::size_t pos = 0;
  for (std::size_t k = 0; k + 1 < m.spec_.widths.size(); ++k) {
    const int in = m.spec_.widths[k], out = m.spec_.widths[k + 1];
    for (auto [rows, cols] : {std::pair{in, out}, std::pair{1, out}}) {
      if (pos + static_cast<std::size_t>(rows * cols) > flat.size())
        throw Error(ErrorCode::IncompatibleCheckpoint, "parameter array shorter than the network");
      Matrix p(rows, cols);
      for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) p(r, c) = flat[pos++];
      m.params_.push_back(std::move(p));
    }
  }
  if (pos != flat.size()) throw Error(ErrorCode::IncompatibleCheckpoint, "parameter array longer than the network");
  return m;
}

Matrix pack(const std::vector<Matrix>& parts) {
  Eigen::Index total = 0;
  for (const auto& p : parts) total += p.size();
  Matrix out(total, 1);
  Eigen::Index pos = 0;
  for (const auto& p : parts) {
    out.middleRows(pos, p.size()) = p.reshaped(p.size(), 1);
    pos += p.size();
  }
  return out;
}

std::vector<ad::Var> unpack(ad::Var packed, const std::vector<Matrix>& shapes) {
  std::vector<ad::Var> out;
  Eigen::Index pos = 0;
  for (const auto& s : shapes) {
    out.push_back(ad::reshape(ad::slice_rows(packed, pos, s.size()), s.rows(), s.cols()));
    pos += s.size();
  }
  if (pos != packed.rows()) throw Error(ErrorCode::ShapeMismatch, "packed vector does not match shapes");
  return out;
}

}  // namespace ssimgen::nn
