#pragma once

#include <Eigen/Dense>
#include <random>
#include <vector>

namespace pipeforge {

enum class Activation { kIdentity, kTanh };

struct Layer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;
  Activation activation = Activation::kTanh;

  bool operator==(const Layer& o) const {
    return weight == o.weight && bias == o.bias && activation == o.activation;
  }
};

struct MlpParams {
  std::vector<Layer> layers;

  int input_dim() const;
  int output_dim() const;
  Eigen::Index parameter_count() const;
  bool operator==(const MlpParams&) const = default;
};

/// Tanh hidden layers and a linear output layer. Weights are Glorot-uniform; the output
/// layer is additionally scaled by `output_scale`. Biases start at zero.
MlpParams make_mlp(const std::vector<int>& dims, std::mt19937_64& rng, double output_scale = 1.0);

/// Throws InvalidArgument on non-chaining shapes or non-finite parameters.
void validate_mlp(const MlpParams& params);

Eigen::VectorXd mlp_forward(const MlpParams& params, const Eigen::VectorXd& input);

/// Post-activation outputs of every layer, input first.
struct MlpTape {
  std::vector<Eigen::MatrixXd> activations;
};

/// Column-per-sample batch forward. Fills `tape` for a later backward pass.
Eigen::MatrixXd mlp_forward_batch(const MlpParams& params, const Eigen::MatrixXd& inputs,
                                  MlpTape* tape = nullptr);

struct MlpGrads {
  std::vector<Eigen::MatrixXd> weight;
  std::vector<Eigen::VectorXd> bias;
  Eigen::MatrixXd input;  // d(loss)/d(input), one column per sample
};

/// Reverse-mode gradients summed over the batch columns.
MlpGrads mlp_backward(const MlpParams& params, const MlpTape& tape,
                      const Eigen::MatrixXd& output_grad);
MlpGrads mlp_backward(const MlpParams& params, const Eigen::VectorXd& input,
                      const Eigen::VectorXd& output_grad);

/// Flat views in layer order: weight (column-major) then bias.
Eigen::VectorXd flatten_params(const MlpParams& params);
void assign_params(MlpParams& params, const Eigen::VectorXd& flat);
Eigen::VectorXd flatten_grads(const MlpGrads& grads);

class Adam {
 public:
  explicit Adam(Eigen::Index size, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  /// Descends `grad` in place. lr == 0 leaves `params` untouched.
  void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad, double lr);

  const Eigen::VectorXd& first_moment() const { return m_; }
  const Eigen::VectorXd& second_moment() const { return v_; }
  long steps() const { return t_; }
  void restore(Eigen::VectorXd m, Eigen::VectorXd v, long t);

 private:
  Eigen::VectorXd m_;
  Eigen::VectorXd v_;
  long t_ = 0;
  double beta1_;
  double beta2_;
  double eps_;
};

}  // namespace pipeforge
