#include "tireid/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numbers>
#include <utility>

#include "tireid/errors.hpp"
#include "tireid/fft.hpp"
#include "tireid/rng.hpp"
#include "tireid/ssm.hpp"

namespace tireid {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

void check_window(const Window& w) {
  if (w.empty()) throw InvalidInput("model: empty window");
  for (const auto& row : w) {
    for (double v : row) {
      if (!std::isfinite(v)) throw InvalidInput("model: non-finite window entry");
    }
  }
}

// Row-major L x 4 normalized copy.
std::vector<double> normalized(const Window& w, const InputNorm& norm) {
  std::vector<double> un(w.size() * 4);
  for (std::size_t l = 0; l < w.size(); ++l) {
    for (int j = 0; j < 4; ++j) {
      un[l * 4 + j] = (w[l][j] - norm.mean[j]) / norm.std[j];
    }
  }
  return un;
}

// Inverted-dropout multipliers in fixed row-major order.
void fill_mask(std::vector<double>& mask, double rate, std::uint64_t seed) {
  Rng rng(seed);
  const double keep_scale = 1.0 / (1.0 - rate);
  for (double& m : mask) m = rng.uniform() < rate ? 0.0 : keep_scale;
}

nlohmann::json complex_array_json(const double* re, const double* im, int n) {
  nlohmann::json arr = nlohmann::json::array();
  for (int i = 0; i < n; ++i) arr.push_back({re[i], im[i]});
  return arr;
}

std::vector<double> get_vec(const nlohmann::json& j, const char* key, std::size_t expect) {
  if (!j.contains(key)) throw InvalidInput(std::string("model json: missing ") + key);
  std::vector<double> v = j.at(key).get<std::vector<double>>();
  if (v.size() != expect) throw InvalidInput(std::string("model json: bad size for ") + key);
  return v;
}

}  // namespace

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); }

double gelu_derivative(double x) {
  return 0.5 * (1.0 + std::erf(x * kInvSqrt2)) + x * kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

// ---------------------------------------------------------------------------
// S4 residual net: linear encoder -> d_model diagonal SSM channels -> GELU ->
// dropout -> linear decoder. Trains in recurrent mode with exact backprop,
// infers in convolution mode.
// ---------------------------------------------------------------------------

class SsmNet final : public ResidualNet {
 public:
  SsmNet(int d_model, int state_dim, double dropout, double delta_init, std::uint64_t seed)
      : d_(d_model), n_(state_dim) {
    if (d_ < 1) throw InvalidInput("s4: d_model must be >= 1");
    if (n_ < 2 || n_ % 2 != 0) throw InvalidInput("s4: state_dim must be even and >= 2");
    if (!(delta_init > kMinDelta && delta_init < kMaxDelta)) {
      throw InvalidInput("s4: delta_init outside (1e-5, 1)");
    }
    dropout_rate = dropout;
    params_.assign(param_count(), 0.0);

    Rng rng(seed);
    double* ew = enc_w();
    for (int i = 0; i < d_ * 4; ++i) ew[i] = 0.5 * rng.normal();
    const auto a0 = hippo_diag_init(n_);
    for (int c = 0; c < d_; ++c) {
      double* base = channel(c);
      for (int i = 0; i < n_; ++i) {
        base[kRho * n_ + i] = std::log(-a0[static_cast<std::size_t>(i)].real());
        base[kPhi * n_ + i] = a0[static_cast<std::size_t>(i)].imag();
        base[kBre * n_ + i] = 1.0;
        base[kBim * n_ + i] = 0.0;
        base[kCre * n_ + i] = 0.5 * rng.normal();
        base[kCim * n_ + i] = 0.5 * rng.normal();
      }
      base[6 * n_] = 0.0;                       // D_f
      base[6 * n_ + 1] = std::log(delta_init);  // log_delta
    }
    double* dw = dec_w();
    const double dec_std = 0.01 / std::sqrt(static_cast<double>(d_));
    for (int i = 0; i < 2 * d_; ++i) dw[i] = dec_std * rng.normal();
  }

  const char* arch() const override { return "s4"; }

  std::size_t param_count() const override {
    return static_cast<std::size_t>(5 * d_ + d_ * (6 * n_ + 2) + 2 * d_ + 2);
  }

  std::span<double> params() override { return params_; }
  std::span<const double> params() const override { return params_; }

  int d_model() const { return d_; }
  int state_dim() const { return n_; }

  SsmCore core(int c) const {
    const double* base = channel(c);
    SsmCore out;
    out.A.resize(static_cast<std::size_t>(n_));
    out.B.resize(static_cast<std::size_t>(n_));
    out.C.resize(static_cast<std::size_t>(n_));
    for (int i = 0; i < n_; ++i) {
      out.A[static_cast<std::size_t>(i)] = {-std::exp(base[kRho * n_ + i]), base[kPhi * n_ + i]};
      out.B[static_cast<std::size_t>(i)] = {base[kBre * n_ + i], base[kBim * n_ + i]};
      out.C[static_cast<std::size_t>(i)] = {base[kCre * n_ + i], base[kCim * n_ + i]};
    }
    out.D_f = base[6 * n_];
    out.log_delta = base[6 * n_ + 1];
    return out;
  }

  ResidualSeq forward(const Window& window) const override {
    check_window(window);
    const std::size_t L = window.size();
    const std::vector<double> un = normalized(window, input_norm);

    std::vector<double> x(L * static_cast<std::size_t>(d_));
    encode(un, x);

    std::vector<double> g(L * static_cast<std::size_t>(d_));
    for (int c = 0; c < d_; ++c) {
      const SsmCore co = core(c);
      std::vector<double> xc(L);
      for (std::size_t l = 0; l < L; ++l) xc[l] = x[l * static_cast<std::size_t>(d_) + c];
      const std::vector<double> k = ssm_kernel(co, static_cast<int>(L));
      const std::vector<double> yc = conv_apply(k, xc, co.D_f);
      for (std::size_t l = 0; l < L; ++l) {
        g[l * static_cast<std::size_t>(d_) + c] = gelu(yc[l]);
      }
    }
    return decode(g, L);
  }

  double loss_and_grad(const Window& window, const ResidualSeq& target, std::span<double> grad,
                       const std::uint64_t* dropout_seed) const override;

  std::unique_ptr<ResidualStream> make_stream() const override;

  std::unique_ptr<ResidualNet> clone() const override { return std::make_unique<SsmNet>(*this); }

  nlohmann::json to_json() const override {
    nlohmann::json j;
    j["schema_version"] = 1;
    j["arch"] = "s4";
    j["d_model"] = d_;
    j["state_dim"] = n_;
    j["dropout"] = dropout_rate;
    j["input_norm"] = {{"mean", input_norm.mean}, {"std", input_norm.std}};
    nlohmann::json channels = nlohmann::json::array();
    for (int c = 0; c < d_; ++c) {
      const double* base = channel(c);
      nlohmann::json ch;
      ch["rho"] = std::vector<double>(base + kRho * n_, base + (kRho + 1) * n_);
      ch["phi"] = std::vector<double>(base + kPhi * n_, base + (kPhi + 1) * n_);
      ch["B"] = complex_array_json(base + kBre * n_, base + kBim * n_, n_);
      ch["C"] = complex_array_json(base + kCre * n_, base + kCim * n_, n_);
      ch["D_f"] = base[6 * n_];
      ch["log_delta"] = base[6 * n_ + 1];
      channels.push_back(std::move(ch));
    }
    j["params"] = {
        {"enc_w", std::vector<double>(enc_w(), enc_w() + d_ * 4)},
        {"enc_b", std::vector<double>(enc_b(), enc_b() + d_)},
        {"channels", std::move(channels)},
        {"dec_w", std::vector<double>(dec_w(), dec_w() + 2 * d_)},
        {"dec_b", std::vector<double>(dec_b(), dec_b() + 2)},
    };
    return j;
  }

  static std::unique_ptr<SsmNet> from_json(const nlohmann::json& j) {
    auto net = std::make_unique<SsmNet>(j.at("d_model").get<int>(), j.at("state_dim").get<int>(),
                                        j.at("dropout").get<double>(), 0.01, 0);
    const auto& p = j.at("params");
    const int d = net->d_, n = net->n_;
    std::vector<double> v = get_vec(p, "enc_w", static_cast<std::size_t>(d * 4));
    std::copy(v.begin(), v.end(), net->enc_w());
    v = get_vec(p, "enc_b", static_cast<std::size_t>(d));
    std::copy(v.begin(), v.end(), net->enc_b());
    const auto& channels = p.at("channels");
    if (static_cast<int>(channels.size()) != d) throw InvalidInput("model json: channel count");
    for (int c = 0; c < d; ++c) {
      const auto& ch = channels.at(static_cast<std::size_t>(c));
      double* base = net->channel(c);
      v = get_vec(ch, "rho", static_cast<std::size_t>(n));
      std::copy(v.begin(), v.end(), base + kRho * n);
      v = get_vec(ch, "phi", static_cast<std::size_t>(n));
      std::copy(v.begin(), v.end(), base + kPhi * n);
      for (int i = 0; i < n; ++i) {
        const auto& b = ch.at("B").at(static_cast<std::size_t>(i));
        const auto& cc = ch.at("C").at(static_cast<std::size_t>(i));
        base[kBre * n + i] = b.at(0).get<double>();
        base[kBim * n + i] = b.at(1).get<double>();
        base[kCre * n + i] = cc.at(0).get<double>();
        base[kCim * n + i] = cc.at(1).get<double>();
      }
      base[6 * n] = ch.at("D_f").get<double>();
      base[6 * n + 1] = ch.at("log_delta").get<double>();
    }
    v = get_vec(p, "dec_w", static_cast<std::size_t>(2 * d));
    std::copy(v.begin(), v.end(), net->dec_w());
    v = get_vec(p, "dec_b", 2);
    std::copy(v.begin(), v.end(), net->dec_b());
    return net;
  }

 private:
  friend ResidualSeq s4_forward_recurrent(const ResidualNet& net, const Window& window);

  // Channel parameter block order, each slice of length state_dim.
  static constexpr int kRho = 0;
  static constexpr int kPhi = 1;
  static constexpr int kBre = 2;
  static constexpr int kBim = 3;
  static constexpr int kCre = 4;
  static constexpr int kCim = 5;

  double* enc_w() { return params_.data(); }
  const double* enc_w() const { return params_.data(); }
  double* enc_b() { return params_.data() + d_ * 4; }
  const double* enc_b() const { return params_.data() + d_ * 4; }
  double* channel(int c) { return params_.data() + 5 * d_ + c * (6 * n_ + 2); }
  const double* channel(int c) const { return params_.data() + 5 * d_ + c * (6 * n_ + 2); }
  double* dec_w() { return params_.data() + 5 * d_ + d_ * (6 * n_ + 2); }
  const double* dec_w() const { return params_.data() + 5 * d_ + d_ * (6 * n_ + 2); }
  double* dec_b() { return dec_w() + 2 * d_; }
  const double* dec_b() const { return dec_w() + 2 * d_; }

  void encode(const std::vector<double>& un, std::vector<double>& x) const {
    const std::size_t L = un.size() / 4;
    const double* w = enc_w();
    const double* b = enc_b();
    for (std::size_t l = 0; l < L; ++l) {
      const double* u = &un[l * 4];
      for (int c = 0; c < d_; ++c) {
        const double* wc = w + c * 4;
        x[l * static_cast<std::size_t>(d_) + c] =
            wc[0] * u[0] + wc[1] * u[1] + wc[2] * u[2] + wc[3] * u[3] + b[c];
      }
    }
  }

  ResidualSeq decode(const std::vector<double>& g, std::size_t L) const {
    const double* w = dec_w();
    const double* b = dec_b();
    ResidualSeq out(L);
    for (std::size_t l = 0; l < L; ++l) {
      const double* gl = &g[l * static_cast<std::size_t>(d_)];
      for (int o = 0; o < 2; ++o) {
        double acc = b[o];
        const double* wo = w + o * d_;
        for (int c = 0; c < d_; ++c) acc += wo[c] * gl[c];
        out[l][static_cast<std::size_t>(o)] = acc;
      }
    }
    return out;
  }

  int d_;
  int n_;
  std::vector<double> params_;
};

double SsmNet::loss_and_grad(const Window& window, const ResidualSeq& target,
                             std::span<double> grad, const std::uint64_t* dropout_seed) const {
  check_window(window);
  if (target.size() != window.size()) throw InvalidInput("loss_and_grad: target length mismatch");
  if (grad.size() != param_count()) throw InvalidInput("loss_and_grad: grad size mismatch");
  const std::size_t L = window.size();
  const std::size_t D = static_cast<std::size_t>(d_);
  const std::size_t N = static_cast<std::size_t>(n_);

  const std::vector<double> un = normalized(window, input_norm);
  std::vector<double> x(L * D);
  encode(un, x);

  // Per-channel discretization, recurrent states for every step, activations.
  std::vector<double> abar_re(D * N), abar_im(D * N), cbar_re(D * N), cbar_im(D * N);
  std::vector<double> q_re(D * N), q_im(D * N);
  std::vector<double> h_re(D * L * N), h_im(D * L * N);
  std::vector<double> y(L * D), gd(L * D), mask;
  const bool use_dropout = dropout_seed != nullptr && dropout_rate > 0.0;
  if (use_dropout) {
    mask.resize(L * D);
    fill_mask(mask, dropout_rate, *dropout_seed);
  }

  for (std::size_t c = 0; c < D; ++c) {
    const double* base = channel(static_cast<int>(c));
    const double delta = std::exp(base[6 * n_ + 1]);
    const double d_f = base[6 * n_];
    for (std::size_t i = 0; i < N; ++i) {
      const double are = -std::exp(base[kRho * n_ + static_cast<int>(i)]);
      const double aim = base[kPhi * n_ + static_cast<int>(i)];
      const std::complex<double> em1 = cexpm1({delta * are, delta * aim});
      const double ab_re = em1.real() + 1.0, ab_im = em1.imag();
      abar_re[c * N + i] = ab_re;
      abar_im[c * N + i] = ab_im;
      // q = (exp(dA) - 1) / A
      const double a2 = are * are + aim * aim;
      const double qr = (em1.real() * are + em1.imag() * aim) / a2;
      const double qi = (em1.imag() * are - em1.real() * aim) / a2;
      q_re[c * N + i] = qr;
      q_im[c * N + i] = qi;
      const double cre = base[kCre * n_ + static_cast<int>(i)];
      const double cim = base[kCim * n_ + static_cast<int>(i)];
      cbar_re[c * N + i] = cre * qr - cim * qi;
      cbar_im[c * N + i] = cre * qi + cim * qr;
    }

    const double* bre = base + kBre * n_;
    const double* bim = base + kBim * n_;
    double* hre_c = &h_re[c * L * N];
    double* him_c = &h_im[c * L * N];
    for (std::size_t l = 0; l < L; ++l) {
      const double xv = x[l * D + c];
      const double* hp_re = l > 0 ? hre_c + (l - 1) * N : nullptr;
      const double* hp_im = l > 0 ? him_c + (l - 1) * N : nullptr;
      double* hc_re = hre_c + l * N;
      double* hc_im = him_c + l * N;
      double acc = 0.0;
      for (std::size_t i = 0; i < N; ++i) {
        double hr = bre[i] * xv;
        double hi = bim[i] * xv;
        if (l > 0) {
          hr += abar_re[c * N + i] * hp_re[i] - abar_im[c * N + i] * hp_im[i];
          hi += abar_re[c * N + i] * hp_im[i] + abar_im[c * N + i] * hp_re[i];
        }
        hc_re[i] = hr;
        hc_im[i] = hi;
        acc += cbar_re[c * N + i] * hr - cbar_im[c * N + i] * hi;
      }
      const double yv = 2.0 * acc + d_f * xv;
      y[l * D + c] = yv;
      const double m = use_dropout ? mask[l * D + c] : 1.0;
      gd[l * D + c] = gelu(yv) * m;
    }
  }

  // Decode + loss.
  const double* dw = dec_w();
  const double* db = dec_b();
  const double inv = 1.0 / (static_cast<double>(L) * 2.0);
  double loss = 0.0;
  std::vector<double> dout(L * 2);
  for (std::size_t l = 0; l < L; ++l) {
    for (int o = 0; o < 2; ++o) {
      double acc = db[o];
      const double* wo = dw + o * d_;
      const double* gl = &gd[l * D];
      for (std::size_t c = 0; c < D; ++c) acc += wo[c] * gl[c];
      const double err = acc - target[l][static_cast<std::size_t>(o)];
      loss += err * err * inv;
      dout[l * 2 + static_cast<std::size_t>(o)] = 2.0 * err * inv;
    }
  }

  // ---- backward ----
  const std::size_t dec_off = static_cast<std::size_t>(5 * d_ + d_ * (6 * n_ + 2));
  std::vector<double> dy(L * D);
  for (std::size_t l = 0; l < L; ++l) {
    const double* gl = &gd[l * D];
    for (int o = 0; o < 2; ++o) {
      const double dv = dout[l * 2 + static_cast<std::size_t>(o)];
      double* gw = &grad[dec_off + static_cast<std::size_t>(o * d_)];
      for (std::size_t c = 0; c < D; ++c) gw[c] += dv * gl[c];
      grad[dec_off + static_cast<std::size_t>(2 * d_ + o)] += dv;
    }
    for (std::size_t c = 0; c < D; ++c) {
      const double dgd = dw[c] * dout[l * 2] + dw[D + c] * dout[l * 2 + 1];
      const double m = use_dropout ? mask[l * D + c] : 1.0;
      dy[l * D + c] = dgd * m * gelu_derivative(y[l * D + c]);
    }
  }

  std::vector<double> dx(L * D, 0.0);
  std::vector<double> lam_re(N), lam_im(N), dab_re(N), dab_im(N), dcb_re(N), dcb_im(N),
      db_re(N), db_im(N);
  for (std::size_t c = 0; c < D; ++c) {
    const double* base = channel(static_cast<int>(c));
    const std::size_t ch_off = static_cast<std::size_t>(5 * d_ + c * (6 * N + 2));
    const double delta = std::exp(base[6 * n_ + 1]);
    const double d_f = base[6 * n_];
    const double* bre = base + kBre * n_;
    const double* bim = base + kBim * n_;
    const double* hre_c = &h_re[c * L * N];
    const double* him_c = &h_im[c * L * N];

    std::fill(lam_re.begin(), lam_re.end(), 0.0);
    std::fill(lam_im.begin(), lam_im.end(), 0.0);
    std::fill(dab_re.begin(), dab_re.end(), 0.0);
    std::fill(dab_im.begin(), dab_im.end(), 0.0);
    std::fill(dcb_re.begin(), dcb_re.end(), 0.0);
    std::fill(dcb_im.begin(), dcb_im.end(), 0.0);
    std::fill(db_re.begin(), db_re.end(), 0.0);
    std::fill(db_im.begin(), db_im.end(), 0.0);
    double dd_f = 0.0;

    for (std::size_t l = L; l-- > 0;) {
      const double dyv = dy[l * D + c];
      const double xv = x[l * D + c];
      const double* hc_re = hre_c + l * N;
      const double* hc_im = him_c + l * N;
      dd_f += dyv * xv;
      double dxv = d_f * dyv;
      for (std::size_t i = 0; i < N; ++i) {
        // y contributions: dCbar += 2 dy conj(h); lambda += 2 dy conj(Cbar)
        dcb_re[i] += 2.0 * dyv * hc_re[i];
        dcb_im[i] -= 2.0 * dyv * hc_im[i];
        lam_re[i] += 2.0 * dyv * cbar_re[c * N + i];
        lam_im[i] -= 2.0 * dyv * cbar_im[c * N + i];
        // h_l = Abar h_{l-1} + B x_l
        if (l > 0) {
          const double hp_re = hre_c[(l - 1) * N + i];
          const double hp_im = him_c[(l - 1) * N + i];
          dab_re[i] += hp_re * lam_re[i] + hp_im * lam_im[i];
          dab_im[i] += hp_re * lam_im[i] - hp_im * lam_re[i];
        }
        db_re[i] += xv * lam_re[i];
        db_im[i] += xv * lam_im[i];
        dxv += bre[i] * lam_re[i] + bim[i] * lam_im[i];
        // lambda_{l-1} = conj(Abar) lambda_l
        const double nr = abar_re[c * N + i] * lam_re[i] + abar_im[c * N + i] * lam_im[i];
        const double ni = abar_re[c * N + i] * lam_im[i] - abar_im[c * N + i] * lam_re[i];
        lam_re[i] = nr;
        lam_im[i] = ni;
      }
      dx[l * D + c] += dxv;
    }

    // Chain to the underlying channel parameters.
    double ddelta = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
      const double are = -std::exp(base[kRho * n_ + static_cast<int>(i)]);
      const double aim = base[kPhi * n_ + static_cast<int>(i)];
      const double cre = base[kCre * n_ + static_cast<int>(i)];
      const double cim = base[kCim * n_ + static_cast<int>(i)];
      const double qr = q_re[c * N + i], qi = q_im[c * N + i];
      const double abr = abar_re[c * N + i], abi = abar_im[c * N + i];

      // dC = conj(q) dCbar
      grad[ch_off + kCre * N + i] += qr * dcb_re[i] + qi * dcb_im[i];
      grad[ch_off + kCim * N + i] += qr * dcb_im[i] - qi * dcb_re[i];
      // dq = conj(C) dCbar
      const double dq_r = cre * dcb_re[i] + cim * dcb_im[i];
      const double dq_i = cre * dcb_im[i] - cim * dcb_re[i];
      // dAbar += conj(1/A) dq; 1/A = conj(A)/|A|^2, so conj(1/A) = A/|A|^2
      const double a2 = are * are + aim * aim;
      const double ia_re = are / a2, ia_im = aim / a2;
      double dab_tot_re = dab_re[i] + ia_re * dq_r - ia_im * dq_i;
      double dab_tot_im = dab_im[i] + ia_re * dq_i + ia_im * dq_r;
      // dA from q directly: conj(-q/A) dq, with -q/A = -(q * conj(A))/|A|^2
      const double mqa_re = -(qr * are + qi * aim) / a2;
      const double mqa_im = -(qi * are - qr * aim) / a2;
      double da_re = mqa_re * dq_r + mqa_im * dq_i;
      double da_im = mqa_re * dq_i - mqa_im * dq_r;
      // dA from Abar = exp(delta A): conj(delta Abar) dAbar
      da_re += delta * (abr * dab_tot_re + abi * dab_tot_im);
      da_im += delta * (abr * dab_tot_im - abi * dab_tot_re);
      // ddelta += Re(conj(A Abar) dAbar)
      const double aab_re = are * abr - aim * abi;
      const double aab_im = are * abi + aim * abr;
      ddelta += aab_re * dab_tot_re + aab_im * dab_tot_im;

      grad[ch_off + kRho * N + i] += da_re * are;  // dRe(A)/drho = -exp(rho) = are
      grad[ch_off + kPhi * N + i] += da_im;
      grad[ch_off + kBre * N + i] += db_re[i];
      grad[ch_off + kBim * N + i] += db_im[i];
    }
    grad[ch_off + 6 * N] += dd_f;
    grad[ch_off + 6 * N + 1] += ddelta * delta;
  }

  // Encoder backward.
  for (std::size_t l = 0; l < L; ++l) {
    const double* u = &un[l * 4];
    for (std::size_t c = 0; c < D; ++c) {
      const double dv = dx[l * D + c];
      double* gw = &grad[c * 4];
      gw[0] += dv * u[0];
      gw[1] += dv * u[1];
      gw[2] += dv * u[2];
      gw[3] += dv * u[3];
      grad[static_cast<std::size_t>(d_ * 4) + c] += dv;
    }
  }

  return loss;
}

namespace {

class SsmStream final : public ResidualStream {
 public:
  SsmStream(const SsmNet& net) : net_(net) {
    const int d = net.d_model();
    cores_.reserve(static_cast<std::size_t>(d));
    discs_.reserve(static_cast<std::size_t>(d));
    for (int c = 0; c < d; ++c) {
      cores_.push_back(net.core(c));
      discs_.push_back(discretize(cores_.back()));
    }
    states_.resize(static_cast<std::size_t>(d));
    reset();
  }

  void reset() override {
    for (auto& s : states_) s.h.assign(cores_.front().A.size(), {0.0, 0.0});
  }

  std::array<double, 2> step(const std::array<double, 4>& u) override {
    const int d = net_.d_model();
    std::array<double, 4> un;
    for (int j = 0; j < 4; ++j) {
      un[static_cast<std::size_t>(j)] =
          (u[static_cast<std::size_t>(j)] - net_.input_norm.mean[static_cast<std::size_t>(j)]) /
          net_.input_norm.std[static_cast<std::size_t>(j)];
    }
    std::span<const double> p = net_.params();
    const double* ew = p.data();
    const double* eb = p.data() + d * 4;
    const double* dw = p.data() + 5 * d + d * (6 * net_.state_dim() + 2);
    const double* db = dw + 2 * d;

    std::array<double, 2> out{db[0], db[1]};
    for (int c = 0; c < d; ++c) {
      const double* wc = ew + c * 4;
      const double xc = wc[0] * un[0] + wc[1] * un[1] + wc[2] * un[2] + wc[3] * un[3] + eb[c];
      const double yc = recurrent_step(discs_[static_cast<std::size_t>(c)],
                                       cores_[static_cast<std::size_t>(c)],
                                       states_[static_cast<std::size_t>(c)], xc);
      const double gc = gelu(yc);
      out[0] += dw[c] * gc;
      out[1] += dw[d + c] * gc;
    }
    return out;
  }

 private:
  const SsmNet& net_;
  std::vector<SsmCore> cores_;
  std::vector<DiscretizedCore> discs_;
  std::vector<RecurrentState> states_;
};

}  // namespace

std::unique_ptr<ResidualStream> SsmNet::make_stream() const {
  return std::make_unique<SsmStream>(*this);
}

ResidualSeq s4_forward_recurrent(const ResidualNet& net, const Window& window) {
  const auto* s4 = dynamic_cast<const SsmNet*>(&net);
  if (s4 == nullptr) throw InvalidInput("s4_forward_recurrent: not an s4 net");
  SsmStream stream(*s4);
  ResidualSeq out;
  out.reserve(window.size());
  for (const auto& row : window) out.push_back(stream.step(row));
  return out;
}

// ---------------------------------------------------------------------------
// MLP baseline: the same 4 -> hidden -> 2 map applied to every row.
// ---------------------------------------------------------------------------

class MlpNet final : public ResidualNet {
 public:
  MlpNet(int hidden, double dropout, std::uint64_t seed) : h_(hidden) {
    if (h_ < 1) throw InvalidInput("mlp: hidden must be >= 1");
    dropout_rate = dropout;
    params_.assign(param_count(), 0.0);
    Rng rng(seed);
    double* w1 = params_.data();
    for (int i = 0; i < h_ * 4; ++i) w1[i] = 0.5 * rng.normal();
    double* w2 = params_.data() + h_ * 5;
    const double w2_std = 0.01 / std::sqrt(static_cast<double>(h_));
    for (int i = 0; i < 2 * h_; ++i) w2[i] = w2_std * rng.normal();
  }

  const char* arch() const override { return "mlp"; }
  std::size_t param_count() const override { return static_cast<std::size_t>(7 * h_ + 2); }
  std::span<double> params() override { return params_; }
  std::span<const double> params() const override { return params_; }

  ResidualSeq forward(const Window& window) const override {
    check_window(window);
    ResidualSeq out(window.size());
    const std::vector<double> un = normalized(window, input_norm);
    for (std::size_t l = 0; l < window.size(); ++l) out[l] = row_forward(&un[l * 4]);
    return out;
  }

  double loss_and_grad(const Window& window, const ResidualSeq& target, std::span<double> grad,
                       const std::uint64_t* dropout_seed) const override {
    check_window(window);
    if (target.size() != window.size()) {
      throw InvalidInput("loss_and_grad: target length mismatch");
    }
    const std::size_t L = window.size();
    const std::size_t H = static_cast<std::size_t>(h_);
    const std::vector<double> un = normalized(window, input_norm);
    std::vector<double> mask;
    const bool use_dropout = dropout_seed != nullptr && dropout_rate > 0.0;
    if (use_dropout) {
      mask.resize(L * H);
      fill_mask(mask, dropout_rate, *dropout_seed);
    }

    const double* w1 = params_.data();
    const double* b1 = params_.data() + h_ * 4;
    const double* w2 = params_.data() + h_ * 5;
    const double* b2 = params_.data() + h_ * 7;
    const std::size_t o_w1 = 0, o_b1 = H * 4, o_w2 = H * 5, o_b2 = H * 7;

    const double inv = 1.0 / (static_cast<double>(L) * 2.0);
    double loss = 0.0;
    std::vector<double> z(H), ad(H);
    for (std::size_t l = 0; l < L; ++l) {
      const double* u = &un[l * 4];
      for (std::size_t i = 0; i < H; ++i) {
        const double* wi = w1 + i * 4;
        z[i] = wi[0] * u[0] + wi[1] * u[1] + wi[2] * u[2] + wi[3] * u[3] + b1[i];
        const double m = use_dropout ? mask[l * H + i] : 1.0;
        ad[i] = gelu(z[i]) * m;
      }
      std::array<double, 2> dov;
      for (int o = 0; o < 2; ++o) {
        double acc = b2[o];
        const double* wo = w2 + o * h_;
        for (std::size_t i = 0; i < H; ++i) acc += wo[i] * ad[i];
        const double err = acc - target[l][static_cast<std::size_t>(o)];
        loss += err * err * inv;
        dov[static_cast<std::size_t>(o)] = 2.0 * err * inv;
      }
      for (int o = 0; o < 2; ++o) {
        const double dv = dov[static_cast<std::size_t>(o)];
        for (std::size_t i = 0; i < H; ++i) grad[o_w2 + static_cast<std::size_t>(o) * H + i] += dv * ad[i];
        grad[o_b2 + static_cast<std::size_t>(o)] += dv;
      }
      for (std::size_t i = 0; i < H; ++i) {
        const double m = use_dropout ? mask[l * H + i] : 1.0;
        const double da = (w2[i] * dov[0] + w2[H + i] * dov[1]) * m * gelu_derivative(z[i]);
        grad[o_w1 + i * 4 + 0] += da * u[0];
        grad[o_w1 + i * 4 + 1] += da * u[1];
        grad[o_w1 + i * 4 + 2] += da * u[2];
        grad[o_w1 + i * 4 + 3] += da * u[3];
        grad[o_b1 + i] += da;
      }
    }
    return loss;
  }

  std::unique_ptr<ResidualStream> make_stream() const override;
  std::unique_ptr<ResidualNet> clone() const override { return std::make_unique<MlpNet>(*this); }

  nlohmann::json to_json() const override {
    nlohmann::json j;
    j["schema_version"] = 1;
    j["arch"] = "mlp";
    j["hidden"] = h_;
    j["dropout"] = dropout_rate;
    j["input_norm"] = {{"mean", input_norm.mean}, {"std", input_norm.std}};
    const double* p = params_.data();
    j["params"] = {
        {"w1", std::vector<double>(p, p + h_ * 4)},
        {"b1", std::vector<double>(p + h_ * 4, p + h_ * 5)},
        {"w2", std::vector<double>(p + h_ * 5, p + h_ * 7)},
        {"b2", std::vector<double>(p + h_ * 7, p + h_ * 7 + 2)},
    };
    return j;
  }

  static std::unique_ptr<MlpNet> from_json(const nlohmann::json& j) {
    auto net = std::make_unique<MlpNet>(j.at("hidden").get<int>(), j.at("dropout").get<double>(),
                                        0);
    const auto& p = j.at("params");
    const std::size_t H = static_cast<std::size_t>(net->h_);
    std::vector<double> v = get_vec(p, "w1", H * 4);
    std::copy(v.begin(), v.end(), net->params_.begin());
    v = get_vec(p, "b1", H);
    std::copy(v.begin(), v.end(), net->params_.begin() + static_cast<std::ptrdiff_t>(H * 4));
    v = get_vec(p, "w2", H * 2);
    std::copy(v.begin(), v.end(), net->params_.begin() + static_cast<std::ptrdiff_t>(H * 5));
    v = get_vec(p, "b2", 2);
    std::copy(v.begin(), v.end(), net->params_.begin() + static_cast<std::ptrdiff_t>(H * 7));
    return net;
  }

 private:
  friend class MlpStream;

  std::array<double, 2> row_forward(const double* u) const {
    const double* w1 = params_.data();
    const double* b1 = params_.data() + h_ * 4;
    const double* w2 = params_.data() + h_ * 5;
    const double* b2 = params_.data() + h_ * 7;
    std::array<double, 2> out{b2[0], b2[1]};
    for (int i = 0; i < h_; ++i) {
      const double* wi = w1 + i * 4;
      const double a = gelu(wi[0] * u[0] + wi[1] * u[1] + wi[2] * u[2] + wi[3] * u[3] + b1[i]);
      out[0] += w2[i] * a;
      out[1] += w2[h_ + i] * a;
    }
    return out;
  }

  int h_;
  std::vector<double> params_;
};

class MlpStream final : public ResidualStream {
 public:
  explicit MlpStream(const MlpNet& net) : net_(net) {}
  void reset() override {}
  std::array<double, 2> step(const std::array<double, 4>& u) override {
    std::array<double, 4> un;
    for (int j = 0; j < 4; ++j) {
      un[static_cast<std::size_t>(j)] =
          (u[static_cast<std::size_t>(j)] - net_.input_norm.mean[static_cast<std::size_t>(j)]) /
          net_.input_norm.std[static_cast<std::size_t>(j)];
    }
    return net_.row_forward(un.data());
  }

 private:
  const MlpNet& net_;
};

std::unique_ptr<ResidualStream> MlpNet::make_stream() const {
  return std::make_unique<MlpStream>(*this);
}

// ---------------------------------------------------------------------------
// RNN baseline: single-layer tanh recurrence with a linear per-step readout.
// ---------------------------------------------------------------------------

class RnnNet final : public ResidualNet {
 public:
  RnnNet(int hidden, double dropout, std::uint64_t seed) : h_(hidden) {
    if (h_ < 1) throw InvalidInput("rnn: hidden must be >= 1");
    dropout_rate = dropout;
    params_.assign(param_count(), 0.0);
    Rng rng(seed);
    double* wih = params_.data();
    for (int i = 0; i < h_ * 4; ++i) wih[i] = 0.5 * rng.normal();
    double* whh = params_.data() + h_ * 4;
    const double whh_std = 0.5 / std::sqrt(static_cast<double>(h_));
    for (int i = 0; i < h_ * h_; ++i) whh[i] = whh_std * rng.normal();
    double* wout = params_.data() + h_ * 4 + h_ * h_ + h_;
    const double wo_std = 0.01 / std::sqrt(static_cast<double>(h_));
    for (int i = 0; i < 2 * h_; ++i) wout[i] = wo_std * rng.normal();
  }

  const char* arch() const override { return "rnn"; }
  std::size_t param_count() const override {
    return static_cast<std::size_t>(h_ * 4 + h_ * h_ + h_ + 2 * h_ + 2);
  }
  std::span<double> params() override { return params_; }
  std::span<const double> params() const override { return params_; }

  ResidualSeq forward(const Window& window) const override {
    check_window(window);
    const std::size_t L = window.size();
    const std::size_t H = static_cast<std::size_t>(h_);
    const std::vector<double> un = normalized(window, input_norm);
    std::vector<double> h(H, 0.0), hn(H);
    ResidualSeq out(L);
    for (std::size_t l = 0; l < L; ++l) {
      step_state(&un[l * 4], h, hn);
      h.swap(hn);
      out[l] = readout(h.data());
    }
    return out;
  }

  double loss_and_grad(const Window& window, const ResidualSeq& target, std::span<double> grad,
                       const std::uint64_t* dropout_seed) const override {
    check_window(window);
    if (target.size() != window.size()) {
      throw InvalidInput("loss_and_grad: target length mismatch");
    }
    const std::size_t L = window.size();
    const std::size_t H = static_cast<std::size_t>(h_);
    const std::vector<double> un = normalized(window, input_norm);
    const bool use_dropout = dropout_seed != nullptr && dropout_rate > 0.0;
    std::vector<double> mask;
    if (use_dropout) {
      mask.resize(L * H);
      fill_mask(mask, dropout_rate, *dropout_seed);
    }

    const double* wih = params_.data();
    const double* whh = params_.data() + h_ * 4;
    const double* bh = params_.data() + h_ * 4 + h_ * h_;
    const double* wout = bh + h_;
    const double* bout = wout + 2 * h_;
    const std::size_t o_wih = 0, o_whh = H * 4, o_bh = H * 4 + H * H, o_wout = o_bh + H,
                      o_bout = o_wout + 2 * H;

    std::vector<double> hs(L * H);  // post-tanh states
    const double inv = 1.0 / (static_cast<double>(L) * 2.0);
    double loss = 0.0;
    std::vector<double> douts(L * 2);
    for (std::size_t l = 0; l < L; ++l) {
      const double* u = &un[l * 4];
      const double* hp = l > 0 ? &hs[(l - 1) * H] : nullptr;
      for (std::size_t i = 0; i < H; ++i) {
        const double* wi = wih + i * 4;
        double a = wi[0] * u[0] + wi[1] * u[1] + wi[2] * u[2] + wi[3] * u[3] + bh[i];
        if (l > 0) {
          const double* wr = whh + i * H;
          for (std::size_t k = 0; k < H; ++k) a += wr[k] * hp[k];
        }
        hs[l * H + i] = std::tanh(a);
      }
      for (int o = 0; o < 2; ++o) {
        double acc = bout[o];
        const double* wo = wout + o * h_;
        for (std::size_t i = 0; i < H; ++i) {
          const double m = use_dropout ? mask[l * H + i] : 1.0;
          acc += wo[i] * hs[l * H + i] * m;
        }
        const double err = acc - target[l][static_cast<std::size_t>(o)];
        loss += err * err * inv;
        douts[l * 2 + static_cast<std::size_t>(o)] = 2.0 * err * inv;
      }
    }

    std::vector<double> da_next(H, 0.0), dh(H), da(H);
    for (std::size_t l = L; l-- > 0;) {
      const double* u = &un[l * 4];
      const double d0 = douts[l * 2], d1 = douts[l * 2 + 1];
      for (std::size_t i = 0; i < H; ++i) {
        const double m = use_dropout ? mask[l * H + i] : 1.0;
        const double hv = hs[l * H + i];
        grad[o_wout + i] += d0 * hv * m;
        grad[o_wout + H + i] += d1 * hv * m;
        dh[i] = (wout[i] * d0 + wout[H + i] * d1) * m;
      }
      grad[o_bout] += d0;
      grad[o_bout + 1] += d1;
      // recurrent contribution from step l+1: dh += Whh^T da_{l+1}
      for (std::size_t k = 0; k < H; ++k) {
        const double dv = da_next[k];
        if (dv != 0.0) {
          const double* wr = whh + k * H;
          for (std::size_t i = 0; i < H; ++i) dh[i] += wr[i] * dv;
        }
      }
      const double* hp = l > 0 ? &hs[(l - 1) * H] : nullptr;
      for (std::size_t i = 0; i < H; ++i) {
        const double hv = hs[l * H + i];
        da[i] = dh[i] * (1.0 - hv * hv);
        grad[o_wih + i * 4 + 0] += da[i] * u[0];
        grad[o_wih + i * 4 + 1] += da[i] * u[1];
        grad[o_wih + i * 4 + 2] += da[i] * u[2];
        grad[o_wih + i * 4 + 3] += da[i] * u[3];
        grad[o_bh + i] += da[i];
        if (l > 0) {
          double* gw = &grad[o_whh + i * H];
          for (std::size_t k = 0; k < H; ++k) gw[k] += da[i] * hp[k];
        }
      }
      da_next.swap(da);
    }
    return loss;
  }

  std::unique_ptr<ResidualStream> make_stream() const override;
  std::unique_ptr<ResidualNet> clone() const override { return std::make_unique<RnnNet>(*this); }

  nlohmann::json to_json() const override {
    nlohmann::json j;
    j["schema_version"] = 1;
    j["arch"] = "rnn";
    j["hidden"] = h_;
    j["dropout"] = dropout_rate;
    j["input_norm"] = {{"mean", input_norm.mean}, {"std", input_norm.std}};
    const double* p = params_.data();
    const std::size_t H = static_cast<std::size_t>(h_);
    j["params"] = {
        {"w_ih", std::vector<double>(p, p + H * 4)},
        {"w_hh", std::vector<double>(p + H * 4, p + H * 4 + H * H)},
        {"b_h", std::vector<double>(p + H * 4 + H * H, p + H * 4 + H * H + H)},
        {"w_out", std::vector<double>(p + H * 5 + H * H, p + H * 7 + H * H)},
        {"b_out", std::vector<double>(p + H * 7 + H * H, p + H * 7 + H * H + 2)},
    };
    return j;
  }

  static std::unique_ptr<RnnNet> from_json(const nlohmann::json& j) {
    auto net = std::make_unique<RnnNet>(j.at("hidden").get<int>(), j.at("dropout").get<double>(),
                                        0);
    const auto& p = j.at("params");
    const std::size_t H = static_cast<std::size_t>(net->h_);
    double* dst = net->params_.data();
    for (const auto& [key, expect] :
         std::vector<std::pair<const char*, std::size_t>>{{"w_ih", H * 4},
                                                          {"w_hh", H * H},
                                                          {"b_h", H},
                                                          {"w_out", 2 * H},
                                                          {"b_out", 2}}) {
      std::vector<double> v = get_vec(p, key, expect);
      std::copy(v.begin(), v.end(), dst);
      dst += expect;
    }
    return net;
  }

 private:
  friend class RnnStream;

  void step_state(const double* u, const std::vector<double>& h, std::vector<double>& hn) const {
    const std::size_t H = static_cast<std::size_t>(h_);
    const double* wih = params_.data();
    const double* whh = params_.data() + h_ * 4;
    const double* bh = params_.data() + h_ * 4 + h_ * h_;
    for (std::size_t i = 0; i < H; ++i) {
      const double* wi = wih + i * 4;
      double a = wi[0] * u[0] + wi[1] * u[1] + wi[2] * u[2] + wi[3] * u[3] + bh[i];
      const double* wr = whh + i * H;
      for (std::size_t k = 0; k < H; ++k) a += wr[k] * h[k];
      hn[i] = std::tanh(a);
    }
  }

  std::array<double, 2> readout(const double* h) const {
    const double* wout = params_.data() + h_ * 4 + h_ * h_ + h_;
    const double* bout = wout + 2 * h_;
    std::array<double, 2> out{bout[0], bout[1]};
    for (int i = 0; i < h_; ++i) {
      out[0] += wout[i] * h[i];
      out[1] += wout[h_ + i] * h[i];
    }
    return out;
  }

  int h_;
  std::vector<double> params_;
};

class RnnStream final : public ResidualStream {
 public:
  explicit RnnStream(const RnnNet& net)
      : net_(net), h_(static_cast<std::size_t>(net.h_), 0.0), hn_(h_.size()) {}
  void reset() override { std::fill(h_.begin(), h_.end(), 0.0); }
  std::array<double, 2> step(const std::array<double, 4>& u) override {
    std::array<double, 4> un;
    for (int j = 0; j < 4; ++j) {
      un[static_cast<std::size_t>(j)] =
          (u[static_cast<std::size_t>(j)] - net_.input_norm.mean[static_cast<std::size_t>(j)]) /
          net_.input_norm.std[static_cast<std::size_t>(j)];
    }
    net_.step_state(un.data(), h_, hn_);
    h_.swap(hn_);
    return net_.readout(h_.data());
  }

 private:
  const RnnNet& net_;
  std::vector<double> h_;
  std::vector<double> hn_;
};

std::unique_ptr<ResidualStream> RnnNet::make_stream() const {
  return std::make_unique<RnnStream>(*this);
}

// ---------------------------------------------------------------------------

std::unique_ptr<ResidualNet> make_net(const NetSpec& spec, std::uint64_t seed) {
  if (spec.arch == "s4") {
    return std::make_unique<SsmNet>(spec.d_model, spec.state_dim, spec.dropout, spec.delta_init,
                                    seed);
  }
  if (spec.arch == "mlp") return std::make_unique<MlpNet>(spec.hidden, spec.dropout, seed);
  if (spec.arch == "rnn") return std::make_unique<RnnNet>(spec.hidden, spec.dropout, seed);
  throw InvalidInput("unknown arch `" + spec.arch + "`; valid values: s4, mlp, rnn");
}

std::unique_ptr<ResidualNet> net_from_json(const nlohmann::json& doc) {
  if (!doc.contains("arch")) throw InvalidInput("model json: missing arch");
  const std::string arch = doc.at("arch").get<std::string>();
  std::unique_ptr<ResidualNet> net;
  if (arch == "s4") {
    net = SsmNet::from_json(doc);
  } else if (arch == "mlp") {
    net = MlpNet::from_json(doc);
  } else if (arch == "rnn") {
    net = RnnNet::from_json(doc);
  } else {
    throw InvalidInput("model json: unknown arch `" + arch + "`");
  }
  const auto& norm = doc.at("input_norm");
  const auto mean = norm.at("mean").get<std::vector<double>>();
  const auto stdv = norm.at("std").get<std::vector<double>>();
  if (mean.size() != 4 || stdv.size() != 4) throw InvalidInput("model json: input_norm size");
  for (int j = 0; j < 4; ++j) {
    net->input_norm.mean[static_cast<std::size_t>(j)] = mean[static_cast<std::size_t>(j)];
    net->input_norm.std[static_cast<std::size_t>(j)] = stdv[static_cast<std::size_t>(j)];
  }
  return net;
}

}  // namespace tireid
