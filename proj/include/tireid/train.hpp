#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tireid/dynamics.hpp"
#include "tireid/model.hpp"
#include "tireid/telemetry.hpp"

namespace tireid {

struct ResidualWindow {
  Window input;        // L x [v_x, v_y, omega, delta]
  ResidualSeq target;  // L x [dv_y residual, domega residual]
};

struct ResidualDataset {
  int window_len = 0;
  std::vector<ResidualWindow> windows;  // sliding causal slices, stride 1, time order
};

// Residual target at index k: measured [v_y, omega]_{k+1} minus the nominal
// one-step prediction from the measured state at k. Dataset size is
// log.size() - L - 1 windows.
ResidualDataset build_residual_dataset(const TelemetryLog& log, const TireParams& tires,
                                       const VehicleParams& p, int L);

// Per-channel mean/std over the first `first_n` windows (the training split).
InputNorm compute_input_norm(const ResidualDataset& data, std::size_t first_n);

struct TrainConfig {
  std::string arch = "s4";
  double learning_rate = 1e-3;
  int steps = 2000;
  int batch = 32;
  double dropout = 0.1;
  std::uint64_t seed = 1;
  double val_fraction = 0.2;
  int val_every = 50;
  int window = 64;
  int d_model = 16;
  int state_dim = 16;
  int hidden = 32;
  double delta_init = 0.01;

  void validate() const;
  NetSpec net_spec() const;
};

struct LossPoint {
  int step;
  double train_loss;
  double val_loss;  // most recent evaluation
};

struct TrainResult {
  std::vector<LossPoint> history;
  double final_train_loss = 0.0;
  double final_val_loss = 0.0;
  std::size_t train_windows = 0;
  std::size_t val_windows = 0;
};

// Adam on the flat parameter vector; seeded and reproducible. Sets the net's
// input normalization from the training split before the first step.
TrainResult train(ResidualNet& net, const ResidualDataset& data, const TrainConfig& cfg);

// Mean loss and mean gradient over the selected windows. The parallel variant
// fans the per-window work out with OpenMP but reduces the per-window
// gradients in fixed index order, so both variants produce bitwise identical
// results. grad is overwritten.
double batch_loss_and_grad(const ResidualNet& net, const ResidualDataset& data,
                           std::span<const std::size_t> indices,
                           std::span<const std::uint64_t> dropout_seeds, std::span<double> grad,
                           bool parallel);

// Mean inference-mode MSE over windows [begin, end).
double dataset_loss(const ResidualNet& net, const ResidualDataset& data, std::size_t begin,
                    std::size_t end, bool parallel);

}  // namespace tireid
