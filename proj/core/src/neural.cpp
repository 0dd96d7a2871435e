#include "rebama/neural.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "rebama/error.hpp"

namespace rebama {

namespace {

using ConstMatrixMap = Eigen::Map<const Eigen::MatrixXd>;
using ConstVectorMap = Eigen::Map<const Eigen::VectorXd>;
using MatrixMap = Eigen::Map<Eigen::MatrixXd>;
using VectorMap = Eigen::Map<Eigen::VectorXd>;

struct Offsets {
  Eigen::Index w1, b1, w2, b2, w3, b3, total;
};

Offsets offsets(int input, int hidden, int output) {
  Offsets o{};
  o.w1 = 0;
  o.b1 = o.w1 + static_cast<Eigen::Index>(hidden) * input;
  o.w2 = o.b1 + hidden;
  o.b2 = o.w2 + static_cast<Eigen::Index>(hidden) * hidden;
  o.w3 = o.b2 + hidden;
  o.b3 = o.w3 + static_cast<Eigen::Index>(output) * hidden;
  o.total = o.b3 + output;
  return o;
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// Vectorizes where Eigen's tanh does not; agrees with std::tanh to a few ulp.
Eigen::MatrixXd fast_tanh(const Eigen::MatrixXd& x) {
  return (1.0 - 2.0 / ((2.0 * x.array()).exp() + 1.0)).matrix();
}

}  // namespace

const char* to_string(HeadKind kind) {
  switch (kind) {
    case HeadKind::softmax_blocks:
      return "softmax";
    case HeadKind::bounded_affine:
      return "bounded";
    case HeadKind::linear:
      return "linear";
  }
  return "?";
}

Head Head::softmax(int blocks) {
  Head h;
  h.kind = HeadKind::softmax_blocks;
  h.blocks = blocks;
  return h;
}

Head Head::bounded(Eigen::VectorXd lower, Eigen::VectorXd upper) {
  Head h;
  h.kind = HeadKind::bounded_affine;
  h.lower = std::move(lower);
  h.upper = std::move(upper);
  return h;
}

Head Head::linear() { return Head{}; }

bool Head::operator==(const Head& other) const {
  return kind == other.kind && blocks == other.blocks && lower == other.lower &&
         upper == other.upper;
}

Mlp::Mlp(int input, int output, Head head, int hidden)
    : input_(input), hidden_(hidden), output_(output), head_(std::move(head)) {
  if (input < 1 || output < 1 || hidden < 1) {
    throw ValidationError("network dimensions must be positive");
  }
  switch (head_.kind) {
    case HeadKind::softmax_blocks:
      if (head_.blocks < 1 || output % head_.blocks != 0) {
        throw ValidationError("softmax head blocks must divide the output size");
      }
      break;
    case HeadKind::bounded_affine:
      if (head_.lower.size() != output || head_.upper.size() != output) {
        throw ValidationError("bounded head needs one bound pair per output");
      }
      for (int k = 0; k < output; ++k) {
        if (head_.lower[k] > head_.upper[k]) {
          throw ValidationError("bounded head lower bound exceeds upper bound");
        }
      }
      break;
    case HeadKind::linear:
      break;
  }
  params_ = Eigen::VectorXd::Zero(parameter_count(input, hidden, output));
}

int Mlp::parameter_count(int input, int hidden, int output) {
  return static_cast<int>(offsets(input, hidden, output).total);
}

void Mlp::initialize(std::mt19937_64& rng) {
  const auto o = offsets(input_, hidden_, output_);
  auto fill = [&](Eigen::Index begin, Eigen::Index end, int fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (Eigen::Index k = begin; k < end; ++k) params_[k] = dist(rng);
  };
  fill(o.w1, o.w2, input_);
  fill(o.w2, o.w3, hidden_);
  fill(o.w3, o.total, hidden_);
}

Mlp Mlp::initialized(int input, int output, Head head, std::uint64_t seed, int hidden) {
  Mlp net(input, output, std::move(head), hidden);
  std::mt19937_64 rng(seed);
  net.initialize(rng);
  return net;
}

void Mlp::set_parameters(const Eigen::VectorXd& params) {
  if (params.size() != params_.size()) {
    throw ValidationError("parameter vector has " + std::to_string(params.size()) +
                          " entries, network expects " + std::to_string(params_.size()));
  }
  params_ = params;
}

void Mlp::check_input(const Eigen::MatrixXd& input, const Eigen::MatrixXd& mask) const {
  if (input.rows() != input_) {
    throw ValidationError("network input has " + std::to_string(input.rows()) +
                          " features, expected " + std::to_string(input_));
  }
  if (mask.size() != 0) {
    if (head_.kind != HeadKind::softmax_blocks) {
      throw ValidationError("output masks apply to softmax heads only");
    }
    if (mask.rows() != output_ || mask.cols() != input.cols()) {
      throw ValidationError("output mask shape does not match the batch");
    }
  }
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& input, const Eigen::MatrixXd& mask) const {
  Cache cache;
  return forward(input, cache, mask);
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& input, Cache& cache,
                             const Eigen::MatrixXd& mask) const {
  check_input(input, mask);
  const auto o = offsets(input_, hidden_, output_);
  const double* p = params_.data();
  const ConstMatrixMap w1(p + o.w1, hidden_, input_);
  const ConstVectorMap b1(p + o.b1, hidden_);
  const ConstMatrixMap w2(p + o.w2, hidden_, hidden_);
  const ConstVectorMap b2(p + o.b2, hidden_);
  const ConstMatrixMap w3(p + o.w3, output_, hidden_);
  const ConstVectorMap b3(p + o.b3, output_);

  cache.input = input;
  cache.mask = mask;
  cache.hidden1.noalias() = w1 * input;
  cache.hidden1.colwise() += b1;
  cache.hidden1 = fast_tanh(cache.hidden1);
  cache.hidden2.noalias() = w2 * cache.hidden1;
  cache.hidden2.colwise() += b2;
  cache.hidden2 = cache.hidden2.cwiseMax(0.0);
  Eigen::MatrixXd z;
  z.noalias() = w3 * cache.hidden2;
  z.colwise() += b3;

  auto& y = cache.output;
  switch (head_.kind) {
    case HeadKind::linear:
      y = std::move(z);
      break;
    case HeadKind::bounded_affine: {
      y.resize(z.rows(), z.cols());
      for (Eigen::Index c = 0; c < z.cols(); ++c) {
        for (Eigen::Index r = 0; r < z.rows(); ++r) {
          y(r, c) = head_.lower[r] + (head_.upper[r] - head_.lower[r]) * sigmoid(z(r, c));
        }
      }
      break;
    }
    case HeadKind::softmax_blocks: {
      const int size = output_ / head_.blocks;
      constexpr double kNegInf = -std::numeric_limits<double>::infinity();
      if (mask.size() != 0) z = (mask.array() != 0.0).select(z, kNegInf);
      y.resize(z.rows(), z.cols());
      for (int b = 0; b < head_.blocks; ++b) {
        const auto block = z.middleRows(b * size, size);
        const Eigen::RowVectorXd top = block.colwise().maxCoeff();
        if (!top.allFinite()) throw ValidationError("softmax block has no unmasked entry");
        auto out = y.middleRows(b * size, size);
        out = (block.rowwise() - top).array().exp().matrix();
        const Eigen::RowVectorXd total = out.colwise().sum();
        out.array().rowwise() /= total.array();
      }
      break;
    }
  }
  return y;
}

Eigen::MatrixXd Mlp::output_delta(const Cache& cache, const Eigen::MatrixXd& upstream) const {
  if (upstream.rows() != output_ || upstream.cols() != cache.output.cols()) {
    throw ValidationError("upstream gradient shape does not match the cached batch");
  }
  const auto& y = cache.output;
  switch (head_.kind) {
    case HeadKind::linear:
      return upstream;
    case HeadKind::bounded_affine: {
      Eigen::MatrixXd dz(y.rows(), y.cols());
      for (Eigen::Index c = 0; c < y.cols(); ++c) {
        for (Eigen::Index r = 0; r < y.rows(); ++r) {
          const double width = head_.upper[r] - head_.lower[r];
          if (width == 0.0) {
            dz(r, c) = 0.0;
            continue;
          }
          const double s = (y(r, c) - head_.lower[r]) / width;
          dz(r, c) = upstream(r, c) * width * s * (1.0 - s);
        }
      }
      return dz;
    }
    case HeadKind::softmax_blocks: {
      const int size = output_ / head_.blocks;
      Eigen::MatrixXd dz(y.rows(), y.cols());
      for (int b = 0; b < head_.blocks; ++b) {
        const auto yb = y.middleRows(b * size, size).array();
        const auto ub = upstream.middleRows(b * size, size).array();
        const Eigen::RowVectorXd dot = (yb * ub).colwise().sum();
        dz.middleRows(b * size, size) = (yb * (ub.rowwise() - dot.array())).matrix();
      }
      return dz;
    }
  }
  return upstream;
}

Mlp::Gradients Mlp::backward(const Cache& cache, const Eigen::MatrixXd& upstream) const {
  const auto o = offsets(input_, hidden_, output_);
  const double* p = params_.data();
  const ConstMatrixMap w2(p + o.w2, hidden_, hidden_);
  const ConstMatrixMap w3(p + o.w3, output_, hidden_);
  const ConstMatrixMap w1(p + o.w1, hidden_, input_);

  Gradients g;
  g.parameters = Eigen::VectorXd::Zero(o.total);
  double* gp = g.parameters.data();

  const Eigen::MatrixXd dz3 = output_delta(cache, upstream);
  MatrixMap(gp + o.w3, output_, hidden_).noalias() = dz3 * cache.hidden2.transpose();
  VectorMap(gp + o.b3, output_) = dz3.rowwise().sum();

  Eigen::MatrixXd dz2 = w3.transpose() * dz3;
  dz2 = (cache.hidden2.array() > 0.0).select(dz2, 0.0);
  MatrixMap(gp + o.w2, hidden_, hidden_).noalias() = dz2 * cache.hidden1.transpose();
  VectorMap(gp + o.b2, hidden_) = dz2.rowwise().sum();

  Eigen::MatrixXd dz1 = w2.transpose() * dz2;
  dz1.array() *= 1.0 - cache.hidden1.array().square();
  MatrixMap(gp + o.w1, hidden_, input_).noalias() = dz1 * cache.input.transpose();
  VectorMap(gp + o.b1, hidden_) = dz1.rowwise().sum();

  g.input.noalias() = w1.transpose() * dz1;
  return g;
}

Eigen::MatrixXd Mlp::input_gradient(const Cache& cache, const Eigen::MatrixXd& upstream) const {
  const auto o = offsets(input_, hidden_, output_);
  const double* p = params_.data();
  const ConstMatrixMap w1(p + o.w1, hidden_, input_);
  const ConstMatrixMap w2(p + o.w2, hidden_, hidden_);
  const ConstMatrixMap w3(p + o.w3, output_, hidden_);

  const Eigen::MatrixXd dz3 = output_delta(cache, upstream);
  Eigen::MatrixXd dz2 = w3.transpose() * dz3;
  dz2 = (cache.hidden2.array() > 0.0).select(dz2, 0.0);
  Eigen::MatrixXd dz1 = w2.transpose() * dz2;
  dz1.array() *= 1.0 - cache.hidden1.array().square();
  return w1.transpose() * dz1;
}

bool Mlp::operator==(const Mlp& other) const {
  return input_ == other.input_ && hidden_ == other.hidden_ && output_ == other.output_ &&
         head_ == other.head_ && params_ == other.params_;
}

AdamState AdamState::for_parameters(Eigen::Index n, double learning_rate) {
  AdamState s;
  s.m = Eigen::VectorXd::Zero(n);
  s.v = Eigen::VectorXd::Zero(n);
  s.learning_rate = learning_rate;
  return s;
}

void adam_step(Eigen::VectorXd& theta, const Eigen::VectorXd& grad, AdamState& state) {
  if (grad.size() != theta.size() || state.m.size() != theta.size() ||
      state.v.size() != theta.size()) {
    throw ValidationError("Adam state, gradient and parameters must have equal length");
  }
  if (!grad.allFinite()) throw NumericError("non-finite gradient passed to Adam");
  ++state.step;
  state.m = state.beta1 * state.m + (1.0 - state.beta1) * grad;
  state.v = state.beta2 * state.v + (1.0 - state.beta2) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  theta.array() -= state.learning_rate * (state.m.array() / c1) /
                   ((state.v.array() / c2).sqrt() + state.epsilon);
}

void soft_update(Eigen::VectorXd& target, const Eigen::VectorXd& online, double tau) {
  if (!(tau > 0.0 && tau <= 1.0)) throw ValidationError("soft update tau must lie in (0, 1]");
  if (target.size() != online.size()) {
    throw ValidationError("soft update between networks of different shape");
  }
  if (tau == 1.0) {
    target = online;
    return;
  }
  target = tau * online + (1.0 - tau) * target;
}

GradientCheck check_gradients(const Mlp& net, const Eigen::MatrixXd& input,
                              const Eigen::MatrixXd& upstream, const Eigen::MatrixXd& mask,
                              double h, double floor) {
  Mlp::Cache cache;
  net.forward(input, cache, mask);
  const Mlp::Gradients analytic = net.backward(cache, upstream);
  const auto relu_pattern = [](const Mlp::Cache& c) { return (c.hidden2.array() > 0.0).eval(); };
  const auto pattern = relu_pattern(cache);

  GradientCheck result;
  // Central difference of L between the two probes, scored against `analytic_value`.
  const auto score = [&](double analytic_value, const Mlp& plus_net, const Eigen::MatrixXd& plus_in,
                         const Mlp& minus_net, const Eigen::MatrixXd& minus_in, double& worst) {
    Mlp::Cache cp;
    Mlp::Cache cm;
    const double lp = (upstream.array() * plus_net.forward(plus_in, cp, mask).array()).sum();
    const double lm = (upstream.array() * minus_net.forward(minus_in, cm, mask).array()).sum();
    if ((relu_pattern(cp) != pattern).any() || (relu_pattern(cm) != pattern).any()) {
      ++result.skipped_kinks;
      return;
    }
    const double fd = (lp - lm) / (2.0 * h);
    // Cancellation in lp - lm bounds the FD accuracy; values within 1e4 times
    // that bound cannot be scored at a 1e-4 relative tolerance.
    const double cancellation =
        std::numeric_limits<double>::epsilon() * (std::abs(lp) + std::abs(lm)) / (2.0 * h);
    if (std::abs(fd) <= std::max(floor, 1e4 * cancellation)) {
      ++result.unscored;
      return;
    }
    const double err = std::abs(analytic_value - fd) / std::max(std::abs(analytic_value), std::abs(fd));
    worst = std::max(worst, err);
    ++result.scored;
  };

  Mlp plus = net;
  Mlp minus = net;
  for (Eigen::Index k = 0; k < net.parameters().size(); ++k) {
    plus.parameters()[k] = net.parameters()[k] + h;
    minus.parameters()[k] = net.parameters()[k] - h;
    score(analytic.parameters[k], plus, input, minus, input, result.max_parameter_error);
    plus.parameters()[k] = net.parameters()[k];
    minus.parameters()[k] = net.parameters()[k];
  }
  Eigen::MatrixXd in_plus = input;
  Eigen::MatrixXd in_minus = input;
  for (Eigen::Index k = 0; k < input.size(); ++k) {
    in_plus(k) = input(k) + h;
    in_minus(k) = input(k) - h;
    score(analytic.input(k), net, in_plus, net, in_minus, result.max_input_error);
    in_plus(k) = input(k);
    in_minus(k) = input(k);
  }
  return result;
}

}  // namespace rebama
