#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <unordered_map>
#include <vector>

#include "towerlimits/inducing.hpp"

namespace towerlimits {

struct Cylinder {
  std::vector<std::uint32_t> word;  // label ids, outermost symbol first
  double lo = 0.0, hi = 0.0;        // interval located by bisection on branch words
  double measure = 0.0;             // empirical probability (counts; sums to 1 per depth)
  double measure_se = 0.0;
  double length_measure = 0.0;      // |interval| / |Y|, exact for Lebesgue-invariant parents
  double representative = 0.0;
  std::uint64_t count = 0;
  std::vector<double> points;       // a few stored samples, for pair statistics
};

struct CylinderBuildOptions {
  std::size_t samples = 1000000;
  std::uint64_t seed = 1;
  int segments = 8;           // disjoint stream segments for measure SEs
  int stored_samples = 4;
  double endpoint_tol = 1e-13;
};

// Nested cylinder partition of the induced base, to a fixed depth, with the
// symbolic metric d_beta(x,y) = beta^(separation time).
class CylinderTree {
 public:
  int depth() const { return depth_; }
  double beta() const { return beta_; }
  const InducedSystem& induced() const { return induced_; }
  bool exact_lengths() const { return exact_lengths_; }

  std::size_t label_count() const { return labels_.size(); }
  const ExcursionLabel& label(std::uint32_t id) const { return labels_[id]; }
  std::uint32_t label_return_time(std::uint32_t id) const { return labels_[id].return_time; }
  std::optional<std::uint32_t> find_label(const ExcursionLabel& l) const;

  // depth-k cylinders, k = 1..depth()
  const std::vector<Cylinder>& level(int k) const { return levels_.at(k - 1); }
  std::optional<std::uint32_t> find_cylinder(int k, const std::vector<std::uint32_t>& word) const;

  friend CylinderTree build_cylinders(const InducedSystem& induced, int depth, double beta,
                                      const CylinderBuildOptions& opts);

 private:
  InducedSystem induced_{MapSystem{}, Interval{}};
  int depth_ = 0;
  double beta_ = 0.5;
  bool exact_lengths_ = false;
  std::vector<ExcursionLabel> labels_;
  std::unordered_map<std::uint64_t, std::uint32_t> label_index_;  // pattern-key -> id
  std::vector<std::vector<Cylinder>> levels_;
  // trie edges per level: (parent word id, label id) -> word id at that level
  std::vector<std::unordered_map<std::uint64_t, std::uint32_t>> edges_;
};

CylinderTree build_cylinders(const InducedSystem& induced, int depth, double beta,
                             const CylinderBuildOptions& opts = {});

// Separation time s (greatest n with x, y in one common n-cylinder, capped at the
// tree depth) and the metric value beta^s.
std::pair<int, double> separation_and_metric(const CylinderTree& tree, double x, double y);

// Transfer operator discretization.  Exact inverse-branch evaluation for the
// Lebesgue-preserving doubling map; Ulam form on cylinder cells otherwise.
class TransferDisc {
 public:
  static TransferDisc exact_doubling(const MapSystem& system, std::size_t grid_size);
  static TransferDisc ulam(const CylinderTree& tree, int cell_depth, std::size_t samples,
                           std::uint64_t seed);

  bool exact_mode() const { return exact_; }
  std::size_t size() const { return nodes_.size(); }
  const std::vector<double>& nodes() const { return nodes_; }
  const std::vector<double>& node_measures() const { return weights_; }

  std::vector<double> apply(const std::vector<double>& v) const;
  std::vector<double> apply_koopman(const std::vector<double>& w) const;
  double integral(const std::vector<double>& v) const;
  std::vector<double> sample_grid(const std::function<double(double)>& v) const;

  // (P^j v)(x) by the explicit preimage sum; exact mode only.
  double eval_power(const std::function<double(double)>& v, double x, int j) const;

 private:
  TransferDisc() = default;
  bool exact_ = false;
  MapSystem system_;
  std::vector<double> nodes_;
  std::vector<double> weights_;
  // sparse joint matrix m(C_i cap f^-1 C_j) in triplet form (ulam mode)
  std::vector<std::uint32_t> row_, col_;
  std::vector<double> joint_;
  std::vector<double> col_weights_;
};

struct CorrelationSeries {
  std::vector<double> value;  // C(n), n = 0..n_max
  std::vector<double> se;
  std::size_t budget = 0;
  int replicas = 0;
};

CorrelationSeries correlation_sequence(const InducedSystem& induced, const Observable& v,
                                       const Observable& w, int n_max, std::size_t budget,
                                       std::uint64_t seed, int replicas = 16);

struct DecayFit {
  bool degenerate = false;   // all lags at the noise floor: very fast mixing
  double amplitude = 0.0;    // C in C * tau^n
  double rate = 0.0;         // tau
  double rate_lo = 0.0, rate_hi = 0.0;
  double r2 = 0.0;
  std::vector<int> lags_used;
};

DecayFit fit_decay(const CorrelationSeries& series, double noise_floor_mult = 3.0);

struct DistortionReport {
  double lipschitz_part = 0.0;  // max |g_k(x)/g_k(y) - 1| / d_beta(f^k x, f^k y)
  double ratio_part = 1.0;      // max of m(a)/g_k and its reciprocal
  double d_hat = 1.0;
  std::size_t pairs = 0;
};

struct DistortionOptions {
  std::size_t max_pairs = 20000;
  std::uint64_t min_count = 50;  // skip cells whose measure rests on fewer samples
};

DistortionReport check_distortion(const CylinderTree& tree, int depth,
                                  const DistortionOptions& opts = {});

struct OscillationReport {
  std::vector<double> sums;    // per depth k = 1..K
  std::vector<double> bounds;  // (vbeta * |R|_{2+delta} * beta^k)^(2+delta)
  double log_slope = 0.0;      // regression slope of log sums on k
  double vbeta_surrogate = 0.0;
  double moment_norm_value = 0.0;
  double delta = 0.0;
};

OscillationReport ps_oscillation(const CylinderTree& tree, const Observable& v, double delta,
                                 std::size_t budget, std::uint64_t seed);

struct MixingEstimate {
  double difference = 0.0;  // |m(a cap f^-(N+k) b) - m(a) m(b)|
  double se = 0.0;
  double m_a = 0.0;
  double m_b = 0.0;
  int gap = 0;
};

MixingEstimate ps_mixing(const CylinderTree& tree, const Cylinder& a,
                         const std::vector<Interval>& b, int gap, std::size_t budget,
                         std::uint64_t seed);

// Lipschitz constant of v in d_beta, maximized over sampled same-cylinder pairs
// at the deepest level, reported with a 1.2 safety factor.
double dbeta_lipschitz_surrogate(const CylinderTree& tree, const Observable& v,
                                 std::size_t pair_budget, std::uint64_t seed);

}  // namespace towerlimits
