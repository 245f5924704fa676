#pragma once

#include "ssimgen/autodiff.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <string_view>
#include <vector>

namespace ssimgen::nn {

using ad::Matrix;

enum class Activation { Relu, Tanh, Identity };
enum class OutputActivation { Sigmoid, Linear };

Activation parse_activation(std::string_view name);
std::string_view to_string(Activation a);
OutputActivation parse_output_activation(std::string_view name);
std::string_view to_string(OutputActivation a);

struct MlpSpec {
  std::vector<int> widths;  // input, hidden..., output
  Activation hidden = Activation::Relu;
  OutputActivation output = OutputActivation::Linear;
};

/// Throws ConfigError unless there is at least one hidden layer and every
/// width is positive.
void validate(const MlpSpec& spec);

/// Fully connected network. Parameters are stored as W0, b0, W1, b1, ...
/// with W_k of shape in x out and b_k of shape 1 x out.
class Mlp {
 public:
  Mlp() = default;
  /// Xavier-uniform weights, zero biases.
  Mlp(MlpSpec spec, std::uint64_t seed);

  const MlpSpec& spec() const { return spec_; }
  std::vector<Matrix>& params() { return params_; }
  const std::vector<Matrix>& params() const { return params_; }
  std::size_t parameter_count() const;

  /// Puts every parameter on the tape, as leaves or as constants.
  std::vector<ad::Var> bind(ad::Tape& tape, bool trainable) const;

  /// Rows of x are samples. `apply_output` = false returns pre-activations
  /// of the last layer (logits).
  ad::Var forward(ad::Tape& tape, const std::vector<ad::Var>& params, ad::Var x, bool apply_output = true) const;

  /// Same computation without a tape.
  Matrix apply(const Matrix& x, bool apply_output = true) const;

  /// Flat parameter list (W row-major then b, per layer).
  std::vector<double> flatten() const;
  static Mlp unflatten(MlpSpec spec, const std::vector<double>& flat);

 private:
  MlpSpec spec_;
  std::vector<Matrix> params_;
};

/// Stacks matrices into one column (column-major within each matrix).
Matrix pack(const std::vector<Matrix>& parts);
/// Slices a packed leaf back into Vars shaped like `shapes`.
std::vector<ad::Var> unpack(ad::Var packed, const std::vector<Matrix>& shapes);

}  // namespace ssimgen::nn
