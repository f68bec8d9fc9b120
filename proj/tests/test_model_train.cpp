#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "tireid/errors.hpp"
#include "tireid/model.hpp"
#include "tireid/plant.hpp"
#include "tireid/rng.hpp"
#include "tireid/train.hpp"

using namespace tireid;

namespace {

Window random_window(Rng& rng, int L) {
  Window w(static_cast<std::size_t>(L));
  for (auto& row : w) {
    row = {20.0 + rng.normal(), rng.normal(), rng.normal(), 0.1 * rng.normal()};
  }
  return w;
}

ResidualSeq random_target(Rng& rng, int L) {
  ResidualSeq t(static_cast<std::size_t>(L));
  for (auto& row : t) row = {0.01 * rng.normal(), 0.01 * rng.normal()};
  return t;
}

// Randomize after construction so gradient checks see generic weights.
void scramble_params(ResidualNet& net, Rng& rng, double scale) {
  for (double& p : net.params()) p += scale * rng.normal();
}

double max_abs_diff(const ResidualSeq& a, const ResidualSeq& b) {
  double worst = 0.0;
  for (std::size_t l = 0; l < a.size(); ++l) {
    worst = std::max(worst, std::abs(a[l][0] - b[l][0]));
    worst = std::max(worst, std::abs(a[l][1] - b[l][1]));
  }
  return worst;
}

}  // namespace

TEST_CASE("parameter counts") {
  CHECK(make_net({"s4", 16, 16, 32, 0.0, 0.01}, 1)->param_count() == 1682);
  CHECK(make_net({"mlp", 16, 16, 32, 0.0, 0.01}, 1)->param_count() == 226);
  CHECK(make_net({"rnn", 16, 16, 32, 0.0, 0.01}, 1)->param_count() == 1250);
}

TEST_CASE("unknown arch lists valid values") {
  CHECK_THROWS_WITH_AS(make_net({"transformer", 16, 16, 32, 0.0, 0.01}, 1),
                       doctest::Contains("s4, mlp, rnn"), InvalidInput);
}

TEST_CASE("s4: convolutional and recurrent forward agree within 1e-6") {
  Rng rng(101);
  for (int trial = 0; trial < 10; ++trial) {
    auto net = make_net({"s4", 16, 16, 32, 0.0, 0.01}, 1000 + trial);
    scramble_params(*net, rng, 0.05);
    net->input_norm.mean = {20.0, 0.0, 0.0, 0.0};
    net->input_norm.std = {1.0, 0.5, 0.3, 0.05};
    const Window w = random_window(rng, 64);
    const ResidualSeq conv = net->forward(w);
    const ResidualSeq rec = s4_forward_recurrent(*net, w);
    CHECK(max_abs_diff(conv, rec) < 1e-6);
  }
}

TEST_CASE("s4: inference is deterministic with dropout configured") {
  Rng rng(103);
  auto net = make_net({"s4", 8, 8, 32, 0.3, 0.01}, 7);
  const Window w = random_window(rng, 32);
  const ResidualSeq a = net->forward(w);
  const ResidualSeq b = net->forward(w);
  CHECK(max_abs_diff(a, b) == 0.0);
}

TEST_CASE("s4: zero decoder weights give all-zero output") {
  auto net = make_net({"s4", 8, 8, 32, 0.0, 0.01}, 7);
  std::span<double> p = net->params();
  // Decoder block is the trailing 2*d + 2 parameters.
  for (std::size_t i = p.size() - 18; i < p.size(); ++i) p[i] = 0.0;
  Rng rng(105);
  const ResidualSeq out = net->forward(random_window(rng, 16));
  for (const auto& row : out) {
    CHECK(row[0] == 0.0);
    CHECK(row[1] == 0.0);
  }
}

TEST_CASE("s4: causality, rows before a perturbation are unchanged") {
  Rng rng(107);
  auto net = make_net({"s4", 16, 16, 32, 0.0, 0.01}, 9);
  scramble_params(*net, rng, 0.05);
  const Window base = random_window(rng, 48);
  const ResidualSeq out_base = net->forward(base);
  for (const std::size_t k : {std::size_t{5}, std::size_t{20}, std::size_t{47}}) {
    Window w = base;
    w[k][1] += 1.0;
    w[k][3] += 0.2;
    const ResidualSeq out = net->forward(w);
    for (std::size_t l = 0; l < k; ++l) {
      CHECK(std::abs(out[l][0] - out_base[l][0]) <= 1e-12);
      CHECK(std::abs(out[l][1] - out_base[l][1]) <= 1e-12);
    }
    CHECK(std::abs(out[k][0] - out_base[k][0]) > 0.0);
  }
}

TEST_CASE("gradient check: backprop matches central differences for every arch") {
  Rng rng(109);
  const int L = 16;
  for (const char* arch : {"s4", "mlp", "rnn"}) {
    auto net = make_net({arch, 8, 8, 12, 0.0, 0.01}, 11);
    scramble_params(*net, rng, 0.05);
    net->input_norm.mean = {20.0, 0.0, 0.0, 0.0};
    net->input_norm.std = {1.0, 0.5, 0.3, 0.05};
    const Window w = random_window(rng, L);
    const ResidualSeq t = random_target(rng, L);

    const std::size_t P = net->param_count();
    std::vector<double> grad(P, 0.0), scratch(P);
    net->loss_and_grad(w, t, grad, nullptr);

    std::span<double> theta = net->params();
    const double eps = 1e-5;
    double worst = 0.0;
    for (std::size_t i = 0; i < P; ++i) {
      const double saved = theta[i];
      theta[i] = saved + eps;
      std::fill(scratch.begin(), scratch.end(), 0.0);
      const double lp = net->loss_and_grad(w, t, scratch, nullptr);
      theta[i] = saved - eps;
      std::fill(scratch.begin(), scratch.end(), 0.0);
      const double lm = net->loss_and_grad(w, t, scratch, nullptr);
      theta[i] = saved;
      const double fd = (lp - lm) / (2.0 * eps);
      const double rel = std::abs(grad[i] - fd) / std::max({std::abs(grad[i]), std::abs(fd), 1e-8});
      worst = std::max(worst, rel);
    }
    INFO("arch = ", arch);
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("dropout: seeded masks are reproducible and change the loss") {
  Rng rng(113);
  auto net = make_net({"s4", 8, 8, 32, 0.4, 0.01}, 13);
  const Window w = random_window(rng, 24);
  const ResidualSeq t = random_target(rng, 24);
  std::vector<double> g1(net->param_count(), 0.0), g2(net->param_count(), 0.0);
  const std::uint64_t seed_a = 555, seed_b = 556;
  const double la1 = net->loss_and_grad(w, t, g1, &seed_a);
  std::fill(g2.begin(), g2.end(), 0.0);
  const double la2 = net->loss_and_grad(w, t, g2, &seed_a);
  CHECK(la1 == la2);
  CHECK(g1 == g2);
  const double lb = net->loss_and_grad(w, t, g2, &seed_b);
  CHECK(la1 != lb);
}

TEST_CASE("serialization: round trip reproduces forward exactly") {
  Rng rng(127);
  for (const char* arch : {"s4", "mlp", "rnn"}) {
    auto net = make_net({arch, 12, 8, 20, 0.1, 0.02}, 17);
    scramble_params(*net, rng, 0.03);
    net->input_norm.mean = {19.7, 0.01, -0.02, 0.0};
    net->input_norm.std = {0.9, 0.4, 0.2, 0.06};
    const Window w = random_window(rng, 33);
    const ResidualSeq before = net->forward(w);

    const nlohmann::json doc = net->to_json();
    CHECK(doc.at("schema_version").get<int>() == 1);
    // Through text, as the CLI would write it.
    const std::string text = doc.dump();
    auto restored = net_from_json(nlohmann::json::parse(text));
    CHECK(std::string(restored->arch()) == arch);
    const ResidualSeq after = restored->forward(w);
    CHECK(max_abs_diff(before, after) == 0.0);
  }
}

TEST_CASE("mlp: memoryless behavior") {
  Rng rng(131);
  auto net = make_net({"mlp", 8, 8, 16, 0.0, 0.01}, 19);
  scramble_params(*net, rng, 0.1);

  Window constant(20);
  for (auto& row : constant) row = {20.0, 0.3, 0.1, 0.05};
  const ResidualSeq out = net->forward(constant);
  for (std::size_t l = 1; l < out.size(); ++l) {
    CHECK(out[l][0] == out[0][0]);
    CHECK(out[l][1] == out[0][1]);
  }

  Window other = constant;
  other[3] = {18.0, -1.0, 0.4, -0.2};
  const ResidualSeq out2 = net->forward(other);
  for (std::size_t l = 0; l < out.size(); ++l) {
    if (l == 3) continue;
    CHECK(out2[l][0] == out[l][0]);
    CHECK(out2[l][1] == out[l][1]);
  }
}

TEST_CASE("rnn: zero weights give zero outputs") {
  auto net = make_net({"rnn", 8, 8, 16, 0.0, 0.01}, 23);
  for (double& p : net->params()) p = 0.0;
  Rng rng(137);
  const ResidualSeq out = net->forward(random_window(rng, 12));
  for (const auto& row : out) {
    CHECK(row[0] == 0.0);
    CHECK(row[1] == 0.0);
  }
}

TEST_CASE("streams match batch forward") {
  Rng rng(139);
  for (const char* arch : {"s4", "mlp", "rnn"}) {
    auto net = make_net({arch, 8, 8, 16, 0.0, 0.01}, 29);
    scramble_params(*net, rng, 0.05);
    const Window w = random_window(rng, 40);
    const ResidualSeq batch = net->forward(w);
    auto stream = net->make_stream();
    double worst = 0.0;
    for (std::size_t l = 0; l < w.size(); ++l) {
      const auto y = stream->step(w[l]);
      worst = std::max({worst, std::abs(y[0] - batch[l][0]), std::abs(y[1] - batch[l][1])});
    }
    // The s4 batch path runs in convolution mode, the stream in recurrence.
    CHECK(worst < 1e-6);
  }
}

// ---------------------------------------------------------------------------
// Residual dataset
// ---------------------------------------------------------------------------

namespace {

TelemetryLog make_log(double sigma_rel, NoiseStd noise, double duration,
                      double dt_plant = 1e-3) {
  PlantConfig cfg;
  cfg.sigma_rel = sigma_rel;
  cfg.noise_std = noise;
  cfg.seed = 5;
  cfg.dt_plant = dt_plant;
  const auto steering = make_maneuver({ManeuverKind::sine_sweep, duration, 0.08, 0.1, 0.8},
                                      cfg.T_s);
  return collect_telemetry(cfg, steering, duration);
}

}  // namespace

TEST_CASE("residual dataset: size contract and window shapes") {
  const TelemetryLog log = make_log(0.0, {0.0, 0.0}, 5.0);
  const PlantConfig ref;
  const ResidualDataset data = build_residual_dataset(log, ref.true_tires, ref.vehicle, 64);
  CHECK(data.windows.size() == log.size() - 64 - 1);
  for (const auto& w : data.windows) {
    CHECK(w.input.size() == 64);
    CHECK(w.target.size() == 64);
  }
}

TEST_CASE("residual dataset: no mismatch means near-zero targets") {
  // Plant stepped at the telemetry rate, so the nominal one-step prediction
  // shares the discretization exactly.
  const TelemetryLog log = make_log(0.0, {0.0, 0.0}, 5.0, 0.01);
  const PlantConfig ref;
  const ResidualDataset data = build_residual_dataset(log, ref.true_tires, ref.vehicle, 32);
  double worst = 0.0;
  for (const auto& w : data.windows) {
    for (const auto& row : w.target) {
      worst = std::max({worst, std::abs(row[0]), std::abs(row[1])});
    }
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("residual dataset: lag residuals correlate with steering rate") {
  const TelemetryLog log = make_log(0.6, {0.0, 0.0}, 30.0);
  const PlantConfig ref;
  const ResidualDataset data = build_residual_dataset(log, ref.true_tires, ref.vehicle, 2);
  // Stride-1 structure: window j target row 0 is the residual at j. The yaw
  // channel carries the direct front-axle lag signature of the steering rate.
  std::vector<double> e_om, ddelta;
  double e_vy_rms = 0.0;
  for (std::size_t j = 0; j + 1 < data.windows.size(); ++j) {
    e_om.push_back(data.windows[j].target[0][1]);
    e_vy_rms += data.windows[j].target[0][0] * data.windows[j].target[0][0];
    ddelta.push_back((log.records[j + 1].delta - log.records[j].delta) / log.T_s);
  }
  e_vy_rms = std::sqrt(e_vy_rms / static_cast<double>(e_om.size()));
  CHECK(e_vy_rms > 1e-4);  // lag makes the lateral residuals clearly nonzero
  double me = 0.0, md = 0.0;
  for (std::size_t i = 0; i < e_om.size(); ++i) {
    me += e_om[i];
    md += ddelta[i];
  }
  me /= static_cast<double>(e_om.size());
  md /= static_cast<double>(e_om.size());
  double cov = 0.0, ve = 0.0, vd = 0.0;
  for (std::size_t i = 0; i < e_om.size(); ++i) {
    cov += (e_om[i] - me) * (ddelta[i] - md);
    ve += (e_om[i] - me) * (e_om[i] - me);
    vd += (ddelta[i] - md) * (ddelta[i] - md);
  }
  const double corr = cov / std::sqrt(ve * vd);
  CHECK(std::abs(corr) > 0.3);
}

TEST_CASE("residual dataset: log too short") {
  const TelemetryLog log = make_log(0.0, {0.0, 0.0}, 2.0);  // 201 records
  const PlantConfig ref;
  CHECK_THROWS_AS(build_residual_dataset(log, ref.true_tires, ref.vehicle, 200), InvalidInput);
  CHECK_NOTHROW(build_residual_dataset(log, ref.true_tires, ref.vehicle, 199));
}

TEST_CASE("input norm: constant channel gets a positive floor") {
  const TelemetryLog log = make_log(0.0, {0.0, 0.0}, 3.0);
  const PlantConfig ref;
  const ResidualDataset data = build_residual_dataset(log, ref.true_tires, ref.vehicle, 16);
  const InputNorm norm = compute_input_norm(data, data.windows.size());
  CHECK(norm.mean[0] == doctest::Approx(20.0).epsilon(1e-9));
  CHECK(norm.std[0] > 0.0);   // constant v_x channel
  CHECK(norm.std[3] > 1e-4);  // steering actually varies
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

TEST_CASE("train: zero-residual dataset reaches loss < 1e-8") {
  const TelemetryLog log = make_log(0.0, {0.0, 0.0}, 6.0);
  const PlantConfig ref;
  const ResidualDataset data = build_residual_dataset(log, ref.true_tires, ref.vehicle, 32);
  TrainConfig cfg;
  cfg.arch = "s4";
  cfg.d_model = 8;
  cfg.state_dim = 8;
  cfg.window = 32;
  cfg.steps = 400;
  cfg.batch = 8;
  cfg.dropout = 0.0;
  auto net = make_net(cfg.net_spec(), cfg.seed);
  const TrainResult result = train(*net, data, cfg);
  CHECK(result.final_train_loss < 1e-8);
  CHECK(result.final_val_loss < 1e-8);
}

TEST_CASE("train: same seed and config give identical loss histories") {
  const TelemetryLog log = make_log(0.6, {0.002, 0.001}, 6.0);
  const PlantConfig ref;
  const ResidualDataset data = build_residual_dataset(log, ref.true_tires, ref.vehicle, 16);
  TrainConfig cfg;
  cfg.d_model = 8;
  cfg.state_dim = 8;
  cfg.window = 16;
  cfg.steps = 60;
  cfg.batch = 8;
  cfg.seed = 21;

  auto net1 = make_net(cfg.net_spec(), cfg.seed);
  auto net2 = make_net(cfg.net_spec(), cfg.seed);
  const TrainResult r1 = train(*net1, data, cfg);
  const TrainResult r2 = train(*net2, data, cfg);
  REQUIRE(r1.history.size() == r2.history.size());
  for (std::size_t i = 0; i < r1.history.size(); ++i) {
    CHECK(r1.history[i].train_loss == r2.history[i].train_loss);
    CHECK(r1.history[i].val_loss == r2.history[i].val_loss);
  }
  CHECK(std::equal(net1->params().begin(), net1->params().end(), net2->params().begin()));
}

TEST_CASE("batch kernel: OpenMP and serial reductions are bitwise identical") {
  const TelemetryLog log = make_log(0.6, {0.002, 0.001}, 5.0);
  const PlantConfig ref;
  const ResidualDataset data = build_residual_dataset(log, ref.true_tires, ref.vehicle, 24);
  auto net = make_net({"s4", 8, 8, 16, 0.2, 0.01}, 31);
  net->input_norm = compute_input_norm(data, data.windows.size());

  Rng rng(151);
  std::vector<std::size_t> idx(16);
  std::vector<std::uint64_t> seeds(16);
  for (auto& i : idx) i = rng.index(data.windows.size());
  for (auto& s : seeds) s = rng.next_u64();

  std::vector<double> g_par(net->param_count()), g_ser(net->param_count());
  const double l_par = batch_loss_and_grad(*net, data, idx, seeds, g_par, true);
  const double l_ser = batch_loss_and_grad(*net, data, idx, seeds, g_ser, false);
  CHECK(l_par == l_ser);
  CHECK(g_par == g_ser);

  const double d_par = dataset_loss(*net, data, 0, data.windows.size(), true);
  const double d_ser = dataset_loss(*net, data, 0, data.windows.size(), false);
  CHECK(d_par == d_ser);
}

TEST_CASE("train: divergence raises a numeric failure naming the step") {
  const TelemetryLog log = make_log(0.6, {0.0, 0.0}, 5.0);
  const PlantConfig ref;
  const ResidualDataset data = build_residual_dataset(log, ref.true_tires, ref.vehicle, 16);
  TrainConfig cfg;
  cfg.d_model = 8;
  cfg.state_dim = 8;
  cfg.window = 16;
  cfg.steps = 200;
  cfg.batch = 4;
  cfg.learning_rate = 1e12;
  auto net = make_net(cfg.net_spec(), cfg.seed);
  CHECK_THROWS_WITH_AS(train(*net, data, cfg), doctest::Contains("step"), NumericFailure);
}
