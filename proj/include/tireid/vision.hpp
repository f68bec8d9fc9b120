#pragma once

#include <string>
#include <vector>

namespace tireid {

struct FrictionBasisEntry {
  std::string label;
  double mu;  // nominal friction coefficient, (0, 1.6]
};

// Ordered surface-class -> friction mapping.
struct FrictionBasis {
  std::vector<FrictionBasisEntry> entries;

  std::size_t size() const { return entries.size(); }
  void validate() const;
};

// ice 0.2, wet 0.5, dry-asphalt 0.8, high-grip 1.0
FrictionBasis default_friction_basis();

using ClassLogits = std::vector<double>;
using ClassProbabilities = std::vector<double>;

enum class PriorSource { ingested, stub, manual };

struct FrictionPrior {
  double mu_hat;
  PriorSource source = PriorSource::ingested;
};

// Overflow-safe softmax (max subtraction); output sums to 1 within 1e-12.
ClassProbabilities softmax(const ClassLogits& z);

// Expected friction mu_hat = p . basis.
FrictionPrior expected_friction(const ClassProbabilities& p, const FrictionBasis& basis);

// Initialization seed for the Pacejka peak parameter, clamped to the D bounds.
// Applied identically to front and rear axles.
double warm_start_D(const FrictionPrior& prior);

// Deterministic stand-in for a CNN classifier: logits are -beta times the L1
// distance between the texture histogram and each class centroid.
ClassLogits stub_classify(const std::vector<double>& texture,
                          const std::vector<std::vector<double>>& centroids, double beta);

// Median of per-frame expected frictions; robust to outlier frames.
FrictionPrior aggregate_prior(std::vector<FrictionPrior> frames);

// Prior file: CSV of per-frame probabilities with header `p_1,...,p_N` plus a
// JSON sidecar declaring the basis [{"label": ..., "mu": ...}, ...].
struct PriorStream {
  FrictionBasis basis;
  std::vector<ClassProbabilities> frames;
};

PriorStream read_prior_file(const std::string& csv_path, const std::string& basis_json_path);
FrictionPrior prior_from_stream(const PriorStream& stream);

}  // namespace tireid
