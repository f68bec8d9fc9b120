#include "tireid/train.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "tireid/errors.hpp"
#include "tireid/rng.hpp"

namespace tireid {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw InvalidInput(msg);
}

double window_eval_loss(const ResidualNet& net, const ResidualWindow& w) {
  const ResidualSeq pred = net.forward(w.input);
  double loss = 0.0;
  const double inv = 1.0 / (static_cast<double>(pred.size()) * 2.0);
  for (std::size_t l = 0; l < pred.size(); ++l) {
    for (int o = 0; o < 2; ++o) {
      const double e = pred[l][static_cast<std::size_t>(o)] - w.target[l][static_cast<std::size_t>(o)];
      loss += e * e * inv;
    }
  }
  return loss;
}

}  // namespace

ResidualDataset build_residual_dataset(const TelemetryLog& log, const TireParams& tires,
                                       const VehicleParams& p, int L) {
  log.validate();
  tires.validate();
  p.validate();
  require(L >= 1, "build_residual_dataset: window length must be >= 1");
  const std::size_t M = log.size();
  require(M > static_cast<std::size_t>(L) + 1,
          "build_residual_dataset: log length " + std::to_string(M) +
              " too short for window " + std::to_string(L));

  // Per-step residuals e_k, defined for k = 0..M-2.
  std::vector<std::array<double, 2>> resid(M - 1);
  for (std::size_t k = 0; k + 1 < M; ++k) {
    const TelemetryRecord& r = log.records[k];
    const VehicleState pred =
        step_nominal({r.v_x, r.v_y, r.omega}, r.delta, tires, p, log.T_s);
    resid[k] = {log.records[k + 1].v_y - pred.v_y, log.records[k + 1].omega - pred.omega};
  }

  ResidualDataset out;
  out.window_len = L;
  const std::size_t count = M - static_cast<std::size_t>(L) - 1;
  out.windows.reserve(count);
  for (std::size_t j = 0; j < count; ++j) {
    ResidualWindow w;
    w.input.resize(static_cast<std::size_t>(L));
    w.target.resize(static_cast<std::size_t>(L));
    for (std::size_t l = 0; l < static_cast<std::size_t>(L); ++l) {
      const TelemetryRecord& r = log.records[j + l];
      w.input[l] = {r.v_x, r.v_y, r.omega, r.delta};
      w.target[l] = resid[j + l];
    }
    out.windows.push_back(std::move(w));
  }
  return out;
}

InputNorm compute_input_norm(const ResidualDataset& data, std::size_t first_n) {
  require(first_n >= 1 && first_n <= data.windows.size(),
          "compute_input_norm: bad training split size");
  InputNorm norm;
  std::array<double, 4> sum{}, sq{};
  std::size_t count = 0;
  for (std::size_t w = 0; w < first_n; ++w) {
    for (const auto& row : data.windows[w].input) {
      for (int j = 0; j < 4; ++j) {
        sum[static_cast<std::size_t>(j)] += row[static_cast<std::size_t>(j)];
        sq[static_cast<std::size_t>(j)] +=
            row[static_cast<std::size_t>(j)] * row[static_cast<std::size_t>(j)];
      }
      ++count;
    }
  }
  for (int j = 0; j < 4; ++j) {
    const double mean = sum[static_cast<std::size_t>(j)] / static_cast<double>(count);
    const double var =
        std::max(0.0, sq[static_cast<std::size_t>(j)] / static_cast<double>(count) - mean * mean);
    norm.mean[static_cast<std::size_t>(j)] = mean;
    // Keep std strictly positive; constant channels normalize to zero.
    norm.std[static_cast<std::size_t>(j)] = std::max(std::sqrt(var), 1e-6);
  }
  return norm;
}

void TrainConfig::validate() const {
  require(arch == "s4" || arch == "mlp" || arch == "rnn",
          "train.arch `" + arch + "` unknown; valid values: s4, mlp, rnn");
  require(learning_rate > 0.0, "train.learning_rate must be positive");
  require(steps >= 1, "train.steps must be >= 1");
  require(batch >= 1, "train.batch must be >= 1");
  require(dropout >= 0.0 && dropout < 1.0, "train.dropout out of [0, 1)");
  require(val_fraction > 0.0 && val_fraction <= 0.5, "train.val_fraction out of (0, 0.5]");
  require(val_every >= 1, "train.val_every must be >= 1");
  require(window >= 2, "train.window must be >= 2");
  require(d_model >= 1, "train.d_model must be >= 1");
  require(state_dim >= 2 && state_dim % 2 == 0, "train.state_dim must be even and >= 2");
  require(hidden >= 1, "train.hidden must be >= 1");
  require(delta_init > 1e-5 && delta_init < 1.0, "train.delta_init out of (1e-5, 1)");
}

NetSpec TrainConfig::net_spec() const {
  return {arch, d_model, state_dim, hidden, dropout, delta_init};
}

double batch_loss_and_grad(const ResidualNet& net, const ResidualDataset& data,
                           std::span<const std::size_t> indices,
                           std::span<const std::uint64_t> dropout_seeds, std::span<double> grad,
                           bool parallel) {
  require(!indices.empty(), "batch_loss_and_grad: empty batch");
  require(dropout_seeds.size() == indices.size(), "batch_loss_and_grad: seed count mismatch");
  const std::size_t P = net.param_count();
  require(grad.size() == P, "batch_loss_and_grad: grad size mismatch");
  const std::size_t B = indices.size();

  std::vector<double> wgrad(B * P, 0.0);
  std::vector<double> wloss(B, 0.0);

#pragma omp parallel for schedule(static) if (parallel)
  for (std::ptrdiff_t b = 0; b < static_cast<std::ptrdiff_t>(B); ++b) {
    const ResidualWindow& w = data.windows[indices[static_cast<std::size_t>(b)]];
    const std::uint64_t seed = dropout_seeds[static_cast<std::size_t>(b)];
    wloss[static_cast<std::size_t>(b)] = net.loss_and_grad(
        w.input, w.target, {&wgrad[static_cast<std::size_t>(b) * P], P}, &seed);
  }

  // Fixed-order reduction keeps results independent of the thread count.
  std::fill(grad.begin(), grad.end(), 0.0);
  double loss = 0.0;
  const double inv = 1.0 / static_cast<double>(B);
  for (std::size_t b = 0; b < B; ++b) {
    loss += wloss[b];
    const double* g = &wgrad[b * P];
    for (std::size_t i = 0; i < P; ++i) grad[i] += g[i];
  }
  for (std::size_t i = 0; i < P; ++i) grad[i] *= inv;
  return loss * inv;
}

double dataset_loss(const ResidualNet& net, const ResidualDataset& data, std::size_t begin,
                    std::size_t end, bool parallel) {
  require(begin < end && end <= data.windows.size(), "dataset_loss: bad range");
  const std::size_t n = end - begin;
  std::vector<double> losses(n, 0.0);

#pragma omp parallel for schedule(static) if (parallel)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
    losses[static_cast<std::size_t>(i)] =
        window_eval_loss(net, data.windows[begin + static_cast<std::size_t>(i)]);
  }

  double sum = 0.0;
  for (double l : losses) sum += l;
  return sum / static_cast<double>(n);
}

TrainResult train(ResidualNet& net, const ResidualDataset& data, const TrainConfig& cfg) {
  cfg.validate();
  require(data.windows.size() >= 2, "train: dataset needs at least 2 windows");

  const std::size_t n = data.windows.size();
  std::size_t n_val = static_cast<std::size_t>(std::llround(cfg.val_fraction * static_cast<double>(n)));
  n_val = std::clamp<std::size_t>(n_val, 1, n - 1);
  const std::size_t n_train = n - n_val;

  net.input_norm = compute_input_norm(data, n_train);
  net.dropout_rate = cfg.dropout;

  const std::size_t P = net.param_count();
  std::span<double> theta = net.params();
  std::vector<double> grad(P), m(P, 0.0), v(P, 0.0);
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;

  Rng rng(cfg.seed + 1);
  std::vector<std::size_t> idx(static_cast<std::size_t>(cfg.batch));
  std::vector<std::uint64_t> seeds(static_cast<std::size_t>(cfg.batch));

  TrainResult result;
  result.train_windows = n_train;
  result.val_windows = n_val;
  result.history.reserve(static_cast<std::size_t>(cfg.steps));
  double val_loss = dataset_loss(net, data, n_train, n, true);

  double b1t = 1.0, b2t = 1.0;
  for (int step = 1; step <= cfg.steps; ++step) {
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = rng.index(n_train);
    for (std::size_t i = 0; i < seeds.size(); ++i) seeds[i] = rng.next_u64();

    const double loss = batch_loss_and_grad(net, data, idx, seeds, grad, true);
    if (!std::isfinite(loss)) {
      throw NumericFailure("training diverged (non-finite loss) at step " + std::to_string(step));
    }

    // Cosine decay from the configured peak rate down to zero.
    const double lr = cfg.learning_rate * 0.5 *
                      (1.0 + std::cos(std::numbers::pi * static_cast<double>(step - 1) /
                                      static_cast<double>(cfg.steps)));
    b1t *= b1;
    b2t *= b2;
    for (std::size_t i = 0; i < P; ++i) {
      m[i] = b1 * m[i] + (1.0 - b1) * grad[i];
      v[i] = b2 * v[i] + (1.0 - b2) * grad[i] * grad[i];
      const double mhat = m[i] / (1.0 - b1t);
      const double vhat = v[i] / (1.0 - b2t);
      theta[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }

    if (step % cfg.val_every == 0 || step == cfg.steps) {
      val_loss = dataset_loss(net, data, n_train, n, true);
      if (!std::isfinite(val_loss)) {
        throw NumericFailure("validation loss non-finite at step " + std::to_string(step));
      }
    }
    result.history.push_back({step, loss, val_loss});
  }

  result.final_train_loss = result.history.back().train_loss;
  result.final_val_loss = val_loss;
  return result;
}

}  // namespace tireid
