#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Core>

namespace rebama {

enum class HeadKind { softmax_blocks, bounded_affine, linear };

const char* to_string(HeadKind kind);

// Output layer activation.
//  softmax_blocks: the output splits into `blocks` equal blocks, each a softmax.
//    An optional 0/1 mask (same shape as the output) removes entries; they
//    emit exactly 0 and the block renormalizes over the rest.
//  bounded_affine: lower + (upper - lower) * sigmoid(z), strictly inside the box
//    whenever lower < upper.
//  linear: identity.
struct Head {
  HeadKind kind = HeadKind::linear;
  int blocks = 1;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  static Head softmax(int blocks);
  static Head bounded(Eigen::VectorXd lower, Eigen::VectorXd upper);
  static Head linear();

  bool operator==(const Head& other) const;
};

// Dense network input -> hidden (tanh) -> hidden (ReLU) -> head. All weights
// and biases live in one flat parameter vector:
//   W1 (hidden x input), b1, W2 (hidden x hidden), b2, W3 (output x hidden), b3
// with matrices stored column-major. Batches are matrices with one sample per column.
class Mlp {
 public:
  static constexpr int kHidden = 30;

  Mlp() = default;
  Mlp(int input, int output, Head head, int hidden = kHidden);

  // Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)] for every weight and bias.
  void initialize(std::mt19937_64& rng);
  static Mlp initialized(int input, int output, Head head, std::uint64_t seed,
                         int hidden = kHidden);

  static int parameter_count(int input, int hidden, int output);

  int input_size() const { return input_; }
  int hidden_size() const { return hidden_; }
  int output_size() const { return output_; }
  int parameter_count() const { return static_cast<int>(params_.size()); }
  const Head& head() const { return head_; }

  Eigen::VectorXd& parameters() { return params_; }
  const Eigen::VectorXd& parameters() const { return params_; }
  // Throws ValidationError on a size mismatch.
  void set_parameters(const Eigen::VectorXd& params);

  struct Cache {
    Eigen::MatrixXd input;
    Eigen::MatrixXd hidden1;  // after tanh
    Eigen::MatrixXd hidden2;  // after ReLU
    Eigen::MatrixXd output;
    Eigen::MatrixXd mask;  // empty when unmasked
  };

  struct Gradients {
    Eigen::VectorXd parameters;  // summed over the batch
    Eigen::MatrixXd input;       // one column per sample
  };

  // `mask` may be empty (0x0); otherwise it must match the output shape.
  Eigen::MatrixXd forward(const Eigen::MatrixXd& input,
                          const Eigen::MatrixXd& mask = Eigen::MatrixXd()) const;
  Eigen::MatrixXd forward(const Eigen::MatrixXd& input, Cache& cache,
                          const Eigen::MatrixXd& mask = Eigen::MatrixXd()) const;

  // Reverse mode through a cached forward pass. `upstream` is dLoss/dOutput.
  Gradients backward(const Cache& cache, const Eigen::MatrixXd& upstream) const;
  // Input gradient only; skips the parameter accumulation.
  Eigen::MatrixXd input_gradient(const Cache& cache, const Eigen::MatrixXd& upstream) const;

  bool operator==(const Mlp& other) const;

 private:
  Eigen::MatrixXd output_delta(const Cache& cache, const Eigen::MatrixXd& upstream) const;
  void check_input(const Eigen::MatrixXd& input, const Eigen::MatrixXd& mask) const;

  int input_ = 0;
  int hidden_ = kHidden;
  int output_ = 0;
  Head head_;
  Eigen::VectorXd params_;
};

struct AdamState {
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  long step = 0;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static AdamState for_parameters(Eigen::Index n, double learning_rate = 1e-3);
};

// Bias-corrected Adam. Throws NumericError on a non-finite gradient and
// ValidationError on a length mismatch.
void adam_step(Eigen::VectorXd& theta, const Eigen::VectorXd& grad, AdamState& state);

// target <- tau * online + (1 - tau) * target
void soft_update(Eigen::VectorXd& target, const Eigen::VectorXd& online, double tau);

// Analytic gradients of L = sum(upstream .* forward(input)) against central
// finite differences. Coordinates with |FD| <= `floor`, or too close to the
// cancellation error of the difference, are not scored, nor are those whose
// +-h probes land on different sides of a ReLU kink.
struct GradientCheck {
  double max_parameter_error = 0.0;  // relative
  double max_input_error = 0.0;      // relative
  int scored = 0;
  int unscored = 0;  // FD value below the noise floor
  int skipped_kinks = 0;
};

GradientCheck check_gradients(const Mlp& net, const Eigen::MatrixXd& input,
                              const Eigen::MatrixXd& upstream,
                              const Eigen::MatrixXd& mask = Eigen::MatrixXd(), double h = 1e-5,
                              double floor = 1e-7);

}  // namespace rebama
