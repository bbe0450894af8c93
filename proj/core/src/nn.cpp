#include "pipeforge/nn.hpp"

#include <cmath>
#include <string>

#include "pipeforge/errors.hpp"

namespace pipeforge {

int MlpParams::input_dim() const {
  return layers.empty() ? 0 : static_cast<int>(layers.front().weight.cols());
}

int MlpParams::output_dim() const {
  return layers.empty() ? 0 : static_cast<int>(layers.back().weight.rows());
}

Eigen::Index MlpParams::parameter_count() const {
  Eigen::Index n = 0;
  for (const auto& l : layers) n += l.weight.size() + l.bias.size();
  return n;
}

MlpParams make_mlp(const std::vector<int>& dims, std::mt19937_64& rng, double output_scale) {
  if (dims.size() < 2) throw InvalidArgument("an MLP needs at least input and output sizes");
  MlpParams p;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    const int in = dims[i];
    const int out = dims[i + 1];
    if (in <= 0 || out <= 0) throw InvalidArgument("MLP layer sizes must be positive");
    const double limit = std::sqrt(6.0 / (in + out));
    std::uniform_real_distribution<double> u(-limit, limit);
    Layer layer;
    layer.weight.resize(out, in);
    // Fill column-major explicitly so the draw order never depends on Eigen internals.
    for (int c = 0; c < in; ++c) {
      for (int r = 0; r < out; ++r) layer.weight(r, c) = u(rng);
    }
    layer.bias = Eigen::VectorXd::Zero(out);
    const bool last = i + 2 == dims.size();
    layer.activation = last ? Activation::kIdentity : Activation::kTanh;
    if (last) layer.weight *= output_scale;
    p.layers.push_back(std::move(layer));
  }
  return p;
}

void validate_mlp(const MlpParams& params) {
  if (params.layers.empty()) throw InvalidArgument("MLP has no layers");
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    const auto& l = params.layers[i];
    if (l.bias.size() != l.weight.rows()) {
      throw InvalidArgument("layer " + std::to_string(i) + ": bias size does not match rows");
    }
    if (i > 0 && l.weight.cols() != params.layers[i - 1].weight.rows()) {
      throw InvalidArgument("layer " + std::to_string(i) + ": dimensions do not chain");
    }
    if (!l.weight.allFinite() || !l.bias.allFinite()) {
      throw InvalidArgument("layer " + std::to_string(i) + ": non-finite parameters");
    }
  }
}

namespace {

void activate(Eigen::MatrixXd& z, Activation a) {
  if (a == Activation::kTanh) z = z.array().tanh();
}

}  // namespace

Eigen::MatrixXd mlp_forward_batch(const MlpParams& params, const Eigen::MatrixXd& inputs,
                                  MlpTape* tape) {
  if (params.layers.empty()) throw InvalidArgument("MLP has no layers");
  if (inputs.rows() != params.input_dim()) {
    throw InvalidArgument("input has " + std::to_string(inputs.rows()) + " rows, expected " +
                          std::to_string(params.input_dim()));
  }
  if (tape) {
    tape->activations.clear();
    tape->activations.push_back(inputs);
  }
  Eigen::MatrixXd x = inputs;
  for (const auto& l : params.layers) {
    Eigen::MatrixXd z = l.weight * x;
    z.colwise() += l.bias;
    activate(z, l.activation);
    x = std::move(z);
    if (tape) tape->activations.push_back(x);
  }
  return x;
}

Eigen::VectorXd mlp_forward(const MlpParams& params, const Eigen::VectorXd& input) {
  return mlp_forward_batch(params, input);
}

MlpGrads mlp_backward(const MlpParams& params, const MlpTape& tape,
                      const Eigen::MatrixXd& output_grad) {
  const std::size_t n = params.layers.size();
  if (tape.activations.size() != n + 1) throw InvalidArgument("tape does not match network");
  if (output_grad.rows() != params.output_dim() ||
      output_grad.cols() != tape.activations.back().cols()) {
    throw InvalidArgument("output gradient shape does not match forward output");
  }
  MlpGrads g;
  g.weight.resize(n);
  g.bias.resize(n);
  Eigen::MatrixXd delta = output_grad;
  for (std::size_t i = n; i-- > 0;) {
    const auto& l = params.layers[i];
    if (l.activation == Activation::kTanh) {
      delta = delta.cwiseProduct((1.0 - tape.activations[i + 1].array().square()).matrix());
    }
    g.weight[i] = delta * tape.activations[i].transpose();
    g.bias[i] = delta.rowwise().sum();
    delta = l.weight.transpose() * delta;
  }
  g.input = std::move(delta);
  return g;
}

MlpGrads mlp_backward(const MlpParams& params, const Eigen::VectorXd& input,
                      const Eigen::VectorXd& output_grad) {
  MlpTape tape;
  mlp_forward_batch(params, input, &tape);
  return mlp_backward(params, tape, output_grad);
}

Eigen::VectorXd flatten_params(const MlpParams& params) {
  Eigen::VectorXd flat(params.parameter_count());
  Eigen::Index k = 0;
  for (const auto& l : params.layers) {
    flat.segment(k, l.weight.size()) = l.weight.reshaped();
    k += l.weight.size();
    flat.segment(k, l.bias.size()) = l.bias;
    k += l.bias.size();
  }
  return flat;
}

void assign_params(MlpParams& params, const Eigen::VectorXd& flat) {
  if (flat.size() != params.parameter_count()) {
    throw InvalidArgument("flat parameter vector has the wrong size");
  }
  Eigen::Index k = 0;
  for (auto& l : params.layers) {
    l.weight.reshaped() = flat.segment(k, l.weight.size());
    k += l.weight.size();
    l.bias = flat.segment(k, l.bias.size());
    k += l.bias.size();
  }
}

Eigen::VectorXd flatten_grads(const MlpGrads& grads) {
  Eigen::Index size = 0;
  for (std::size_t i = 0; i < grads.weight.size(); ++i) {
    size += grads.weight[i].size() + grads.bias[i].size();
  }
  Eigen::VectorXd flat(size);
  Eigen::Index k = 0;
  for (std::size_t i = 0; i < grads.weight.size(); ++i) {
    flat.segment(k, grads.weight[i].size()) = grads.weight[i].reshaped();
    k += grads.weight[i].size();
    flat.segment(k, grads.bias[i].size()) = grads.bias[i];
    k += grads.bias[i].size();
  }
  return flat;
}

Adam::Adam(Eigen::Index size, double beta1, double beta2, double eps)
    : m_(Eigen::VectorXd::Zero(size)),
      v_(Eigen::VectorXd::Zero(size)),
      beta1_(beta1),
      beta2_(beta2),
      eps_(eps) {}

void Adam::step(Eigen::VectorXd& params, const Eigen::VectorXd& grad, double lr) {
  if (params.size() != m_.size() || grad.size() != m_.size()) {
    throw InvalidArgument("Adam state size does not match parameters");
  }
  ++t_;
  m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
  v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseAbs2();
  if (lr == 0.0) return;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  params.array() -= lr * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
}

void Adam::restore(Eigen::VectorXd m, Eigen::VectorXd v, long t) {
  if (m.size() != m_.size() || v.size() != v_.size()) {
    throw InvalidArgument("Adam state size does not match");
  }
  m_ = std::move(m);
  v_ = std::move(v);
  t_ = t;
}

}  // namespace pipeforge
