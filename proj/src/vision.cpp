#include "tireid/vision.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <json.hpp>

#include "tireid/errors.hpp"

namespace tireid {

namespace {

// Numeric bounds of the AxlePacejka D invariant, (0, 1.6].
constexpr double kDFloor = 1e-3;
constexpr double kDCeil = 1.6;

void require(bool ok, const std::string& msg) {
  if (!ok) throw InvalidInput(msg);
}

}  // namespace

void FrictionBasis::validate() const {
  require(entries.size() >= 2, "FrictionBasis needs at least 2 entries");
  std::set<std::string> labels;
  for (const FrictionBasisEntry& e : entries) {
    require(e.mu > 0.0 && e.mu <= 1.6, "FrictionBasis mu out of (0, 1.6]: " + e.label);
    require(labels.insert(e.label).second, "FrictionBasis duplicate label: " + e.label);
  }
}

FrictionBasis default_friction_basis() {
  return {{{"ice", 0.2}, {"wet", 0.5}, {"dry-asphalt", 0.8}, {"high-grip", 1.0}}};
}

ClassProbabilities softmax(const ClassLogits& z) {
  require(!z.empty(), "softmax: empty logits");
  for (double v : z) {
    if (!std::isfinite(v)) throw InvalidInput("softmax: non-finite logit");
  }
  const double zmax = *std::max_element(z.begin(), z.end());
  ClassProbabilities p(z.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    p[i] = std::exp(z[i] - zmax);
    sum += p[i];
  }
  for (double& v : p) v /= sum;
  return p;
}

FrictionPrior expected_friction(const ClassProbabilities& p, const FrictionBasis& basis) {
  basis.validate();
  require(p.size() == basis.size(), "expected_friction: probability/basis size mismatch (" +
                                        std::to_string(p.size()) + " vs " +
                                        std::to_string(basis.size()) + ")");
  double mu = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) mu += p[i] * basis.entries[i].mu;
  return {mu, PriorSource::ingested};
}

double warm_start_D(const FrictionPrior& prior) {
  return std::clamp(prior.mu_hat, kDFloor, kDCeil);
}

ClassLogits stub_classify(const std::vector<double>& texture,
                          const std::vector<std::vector<double>>& centroids, double beta) {
  require(!centroids.empty(), "stub_classify: no centroids");
  ClassLogits z(centroids.size());
  for (std::size_t i = 0; i < centroids.size(); ++i) {
    require(centroids[i].size() == texture.size(),
            "stub_classify: centroid " + std::to_string(i) + " bin count mismatch");
    double d = 0.0;
    for (std::size_t b = 0; b < texture.size(); ++b) d += std::abs(texture[b] - centroids[i][b]);
    z[i] = -beta * d;
  }
  return z;
}

FrictionPrior aggregate_prior(std::vector<FrictionPrior> frames) {
  require(!frames.empty(), "aggregate_prior: no frames");
  std::sort(frames.begin(), frames.end(),
            [](const FrictionPrior& a, const FrictionPrior& b) { return a.mu_hat < b.mu_hat; });
  const std::size_t n = frames.size();
  double med;
  if (n % 2 == 1) {
    med = frames[n / 2].mu_hat;
  } else {
    med = 0.5 * (frames[n / 2 - 1].mu_hat + frames[n / 2].mu_hat);
  }
  return {med, frames.front().source};
}

PriorStream read_prior_file(const std::string& csv_path, const std::string& basis_json_path) {
  PriorStream out;

  std::ifstream bj(basis_json_path);
  if (!bj) throw InvalidInput("cannot open basis sidecar: " + basis_json_path);
  nlohmann::json doc;
  try {
    bj >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput("basis sidecar parse error: " + std::string(e.what()));
  }
  if (!doc.is_array()) throw InvalidInput("basis sidecar must be a JSON array");
  for (const auto& item : doc) {
    if (!item.contains("label") || !item.contains("mu")) {
      throw InvalidInput("basis sidecar entries need `label` and `mu`");
    }
    out.basis.entries.push_back({item["label"].get<std::string>(), item["mu"].get<double>()});
  }
  out.basis.validate();

  std::ifstream cs(csv_path);
  if (!cs) throw InvalidInput("cannot open prior file: " + csv_path);
  std::string line;
  require(static_cast<bool>(std::getline(cs, line)), "prior file is empty");
  std::size_t cols = line.empty() ? 0 : 1 + std::count(line.begin(), line.end(), ',');
  require(cols == out.basis.size(), "prior file column count (" + std::to_string(cols) +
                                        ") does not match basis size (" +
                                        std::to_string(out.basis.size()) + ")");
  std::size_t lineno = 1;
  while (std::getline(cs, line)) {
    ++lineno;
    if (line.empty()) continue;
    ClassProbabilities p;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        p.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw InvalidInput("prior file parse error at line " + std::to_string(lineno));
      }
    }
    require(p.size() == out.basis.size(),
            "prior file row " + std::to_string(lineno) + " column count mismatch");
    double sum = 0.0;
    for (double v : p) {
      require(v >= 0.0, "prior file row " + std::to_string(lineno) + " has negative probability");
      sum += v;
    }
    require(std::abs(sum - 1.0) <= 1e-6,
            "prior file row " + std::to_string(lineno) + " does not sum to 1");
    out.frames.push_back(std::move(p));
  }
  require(!out.frames.empty(), "prior file has no data rows");
  return out;
}

FrictionPrior prior_from_stream(const PriorStream& stream) {
  std::vector<FrictionPrior> per_frame;
  per_frame.reserve(stream.frames.size());
  for (const ClassProbabilities& p : stream.frames) {
    per_frame.push_back(expected_friction(p, stream.basis));
  }
  return aggregate_prior(std::move(per_frame));
}

}  // namespace tireid
