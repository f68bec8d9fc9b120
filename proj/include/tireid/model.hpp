#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace tireid {

// Model input row: [v_x, v_y, omega, delta]. Output row: [dv_y, domega]
// residuals over one telemetry interval.
inline constexpr int kNetInputDim = 4;
inline constexpr int kNetOutputDim = 2;

using Window = std::vector<std::array<double, 4>>;
using ResidualSeq = std::vector<std::array<double, 2>>;

struct InputNorm {
  std::array<double, 4> mean{0.0, 0.0, 0.0, 0.0};
  std::array<double, 4> std{1.0, 1.0, 1.0, 1.0};
};

// Streaming evaluator: push one sample, get the residual prediction for the
// transition starting at that sample. Used by the autoregressive virtual sweep.
class ResidualStream {
 public:
  virtual ~ResidualStream() = default;
  virtual void reset() = 0;
  virtual std::array<double, 2> step(const std::array<double, 4>& u) = 0;
};

// Residual corrector interface shared by the S4 net and the MLP/RNN baselines.
// Parameters live in one flat vector so the optimizer and finite-difference
// checks treat every architecture uniformly.
class ResidualNet {
 public:
  virtual ~ResidualNet() = default;

  virtual const char* arch() const = 0;
  virtual std::size_t param_count() const = 0;
  virtual std::span<double> params() = 0;
  virtual std::span<const double> params() const = 0;

  // Inference forward (dropout disabled, deterministic).
  virtual ResidualSeq forward(const Window& window) const = 0;

  // Training-mode MSE loss on one window; accumulates d(loss)/d(params) into
  // grad (size param_count). dropout_seed == nullptr disables dropout.
  virtual double loss_and_grad(const Window& window, const ResidualSeq& target,
                               std::span<double> grad,
                               const std::uint64_t* dropout_seed) const = 0;

  virtual std::unique_ptr<ResidualStream> make_stream() const = 0;
  virtual std::unique_ptr<ResidualNet> clone() const = 0;
  virtual nlohmann::json to_json() const = 0;

  InputNorm input_norm;
  double dropout_rate = 0.0;
};

struct NetSpec {
  std::string arch = "s4";  // s4 | mlp | rnn
  int d_model = 16;         // s4 channels
  int state_dim = 16;       // s4 states per channel, even
  int hidden = 32;          // mlp/rnn hidden width
  double dropout = 0.1;
  double delta_init = 0.01;  // initial SSM step size [s]
};

std::unique_ptr<ResidualNet> make_net(const NetSpec& spec, std::uint64_t seed);
std::unique_ptr<ResidualNet> net_from_json(const nlohmann::json& doc);

// Convolution-mode and recurrence-mode forward passes of the S4 net must
// agree; exposed for the equivalence tests.
ResidualSeq s4_forward_recurrent(const ResidualNet& net, const Window& window);

double gelu(double x);
double gelu_derivative(double x);

}  // namespace tireid
