#include "towerlimits/gibbs_markov.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "towerlimits/util/descriptive.hpp"
#include "towerlimits/util/parallel.hpp"

namespace towerlimits {

namespace {

std::uint64_t label_key(const ExcursionLabel& l) {
  // pattern already encodes the itinerary with a sentinel; mix in the length
  return l.pattern * 0x9e3779b97f4a7c15ULL ^ l.return_time;
}

std::uint64_t edge_key(std::uint32_t parent, std::uint32_t label) {
  return (static_cast<std::uint64_t>(parent) << 32) | label;
}

// f^m(x) for a point of the induced base, by repeated first returns.
double induced_power(const InducedSystem& ind, double x, int m) {
  for (int i = 0; i < m; ++i) x = ind.first_return(x).image;
  return x;
}

}  // namespace

std::optional<std::uint32_t> CylinderTree::find_label(const ExcursionLabel& l) const {
  const auto it = label_index_.find(label_key(l));
  if (it == label_index_.end() || !(labels_[it->second] == l)) return std::nullopt;
  return it->second;
}

std::optional<std::uint32_t> CylinderTree::find_cylinder(
    int k, const std::vector<std::uint32_t>& word) const {
  if (k < 1 || k > depth_ || word.size() != static_cast<std::size_t>(k)) return std::nullopt;
  std::uint32_t node = word[0];
  if (node >= labels_.size()) return std::nullopt;
  for (int d = 1; d < k; ++d) {
    const auto it = edges_[d].find(edge_key(node, word[d]));
    if (it == edges_[d].end()) return std::nullopt;
    node = it->second;
  }
  return node;
}

CylinderTree build_cylinders(const InducedSystem& induced, int depth, double beta,
                             const CylinderBuildOptions& opts) {
  if (depth < 1) throw ParameterError("build_cylinders: depth must be >= 1");
  if (!(beta > 0.0 && beta < 1.0)) throw ParameterError("build_cylinders: beta must be in (0,1)");
  if (opts.samples < 1000) throw ParameterError("build_cylinders: sample budget too small");

  CylinderTree tree;
  tree.induced_ = induced;
  tree.depth_ = depth;
  tree.beta_ = beta;
  tree.exact_lengths_ = induced.parent().kind() == MapKind::doubling;
  tree.edges_.resize(depth);

  // Stream one stationary induced orbit, recording points and excursion labels.
  const std::size_t n = opts.samples;
  std::vector<double> pts(n);
  std::vector<std::uint32_t> lab(n);
  {
    InducedOrbit orbit(induced, opts.seed);
    for (std::size_t i = 0; i < n; ++i) {
      pts[i] = orbit.point();
      const Excursion e = orbit.advance();
      auto it = tree.label_index_.find(label_key(e.label));
      if (it == tree.label_index_.end() || !(tree.labels_[it->second] == e.label)) {
        const auto id = static_cast<std::uint32_t>(tree.labels_.size());
        tree.labels_.push_back(e.label);
        tree.label_index_.emplace(label_key(e.label), id);
        lab[i] = id;
      } else {
        lab[i] = it->second;
      }
    }
  }

  // Word ids per depth via a level trie; tally counts and per-segment counts.
  const int segments = std::max(2, opts.segments);
  std::vector<std::uint32_t> word_prev(n), word_cur;
  struct Tally {
    std::uint64_t count = 0;
    double first_point = 0.0;
    std::vector<double> samples;
    std::vector<std::uint32_t> seg_count;
  };
  std::vector<std::vector<Tally>> tallies(depth);

  for (int d = 0; d < depth; ++d) {
    const std::size_t windows = n - static_cast<std::size_t>(d);
    word_cur.assign(n, 0);
    auto& edge = tree.edges_[d];
    auto& tally = tallies[d];
    std::uint32_t next_id = 0;
    if (d == 0) next_id = static_cast<std::uint32_t>(tree.labels_.size());
    for (std::size_t i = 0; i < windows; ++i) {
      std::uint32_t id;
      if (d == 0) {
        id = lab[i];
      } else {
        const std::uint64_t key = edge_key(word_prev[i], lab[i + d]);
        auto it = edge.find(key);
        if (it == edge.end()) {
          id = next_id++;
          edge.emplace(key, id);
        } else {
          id = it->second;
        }
      }
      word_cur[i] = id;
      if (id >= tally.size()) tally.resize(id + 1);
      auto& t = tally[id];
      if (t.count == 0) {
        t.first_point = pts[i];
        t.seg_count.assign(segments, 0);
      }
      ++t.count;
      if (t.samples.size() < static_cast<std::size_t>(opts.stored_samples))
        t.samples.push_back(pts[i]);
      ++t.seg_count[std::min<std::size_t>(i * segments / windows, segments - 1)];
    }
    std::swap(word_prev, word_cur);
  }

  // Words, counts -> cylinders; endpoints by bisection afterwards.
  tree.levels_.resize(depth);
  std::vector<std::vector<std::uint32_t>> parent_of(depth);  // word id -> prefix word id
  std::vector<std::vector<std::uint32_t>> last_of(depth);    // word id -> last label id
  for (int d = 0; d < depth; ++d) {
    const std::size_t count = tallies[d].size();
    parent_of[d].assign(count, 0);
    last_of[d].assign(count, 0);
    if (d == 0) {
      for (std::uint32_t id = 0; id < count; ++id) last_of[d][id] = id;
    } else {
      for (const auto& [key, id] : tree.edges_[d]) {
        parent_of[d][id] = static_cast<std::uint32_t>(key >> 32);
        last_of[d][id] = static_cast<std::uint32_t>(key & 0xffffffffu);
      }
    }
    auto& lvl = tree.levels_[d];
    lvl.resize(count);
    const std::size_t windows = n - static_cast<std::size_t>(d);
    for (std::uint32_t id = 0; id < count; ++id) {
      auto& c = lvl[id];
      auto& t = tallies[d][id];
      c.count = t.count;
      c.measure = static_cast<double>(t.count) / static_cast<double>(windows);
      c.representative = t.first_point;
      c.points = std::move(t.samples);
      util::RunningStats seg;
      for (int s = 0; s < segments; ++s)
        seg.add(static_cast<double>(t.seg_count[s]) * segments / static_cast<double>(windows));
      c.measure_se = seg.mean_se();
      // reconstruct the word
      c.word.assign(d + 1, 0);
      std::uint32_t node = id;
      for (int k = d; k >= 1; --k) {
        c.word[k] = last_of[k][node];
        node = parent_of[k][node];
      }
      c.word[0] = node;
    }
  }

  // Depth-1 endpoints: order labels by observed position, bisect the boundaries.
  {
    auto& lvl = tree.levels_[0];
    std::vector<std::pair<double, std::uint32_t>> order;
    std::vector<double> lo_obs(lvl.size(), 2.0), hi_obs(lvl.size(), -1.0);
    // use all sampled points for tight observed brackets
    for (std::size_t i = 0; i < n; ++i) {
      const std::uint32_t id = lab[i];
      lo_obs[id] = std::min(lo_obs[id], pts[i]);
      hi_obs[id] = std::max(hi_obs[id], pts[i]);
    }
    for (std::uint32_t id = 0; id < lvl.size(); ++id) order.emplace_back(lo_obs[id], id);
    std::sort(order.begin(), order.end());
    for (std::size_t r = 0; r + 1 < order.size(); ++r) {
      if (hi_obs[order[r].second] > order[r + 1].first)
        throw GeometryError("build_cylinders: observed label sets interleave");
    }
    const Interval Y = induced.base();
    auto same_label = [&](double x, std::uint32_t id) {
      if (!(x >= Y.lo && x < Y.hi)) return false;
      try {
        return induced.label(x) == tree.labels_[id];
      } catch (const NonreturnError&) {
        return false;  // exceptional boundary point (e.g. a preimage of a fixed point)
      }
    };
    for (std::size_t r = 0; r < order.size(); ++r) {
      const std::uint32_t id = order[r].second;
      double lo;
      if (r == 0) {
        lo = Y.lo;
        if (!same_label(lo, id)) {
          double a = Y.lo, b = lo_obs[id];
          while (b - a > opts.endpoint_tol) {
            const double m = 0.5 * (a + b);
            (same_label(m, id) ? b : a) = m;
          }
          lo = b;
        }
      } else {
        double a = hi_obs[order[r - 1].second], b = lo_obs[id];
        while (b - a > opts.endpoint_tol) {
          const double m = 0.5 * (a + b);
          (same_label(m, id) ? b : a) = m;
        }
        lo = b;
      }
      double hi;
      {
        double a = hi_obs[id];
        double b = r + 1 < order.size() ? lo_obs[order[r + 1].second] : Y.hi;
        while (b - a > opts.endpoint_tol) {
          const double m = 0.5 * (a + b);
          (same_label(m, id) ? a : b) = m;
        }
        hi = b;
      }
      lvl[id].lo = lo;
      lvl[id].hi = hi;
    }
  }

  // Deeper endpoints: within the prefix cylinder, f^d is monotone onto Y; the last
  // symbol restricts the image to its depth-1 interval.
  for (int d = 1; d < depth; ++d) {
    auto& lvl = tree.levels_[d];
    util::parallel_for(lvl.size(), [&](std::size_t id) {
      auto& c = lvl[id];
      const Cylinder& prefix = tree.levels_[d - 1][parent_of[d][id]];
      const Cylinder& last = tree.levels_[0][last_of[d][id]];
      auto below_target = [&](double x, double target) {
        try {
          return induced_power(induced, x, d) < target;
        } catch (const NonreturnError&) {
          return true;  // exceptional boundary point; assign to the lower side
        }
      };
      auto locate = [&](double target) {
        double a = prefix.lo, b = prefix.hi;
        // keep evaluation strictly inside the prefix cylinder
        while (b - a > opts.endpoint_tol) {
          const double m = 0.5 * (a + b);
          (below_target(m, target) ? a : b) = m;
        }
        return 0.5 * (a + b);
      };
      c.lo = last.lo <= induced.base().lo ? prefix.lo : locate(last.lo);
      c.hi = last.hi >= induced.base().hi ? prefix.hi : locate(last.hi);
    });
  }

  const double y_len = induced.base().length();
  for (auto& lvl : tree.levels_)
    for (auto& c : lvl) c.length_measure = std::max(0.0, c.hi - c.lo) / y_len;

  return tree;
}

std::pair<int, double> separation_and_metric(const CylinderTree& tree, double x, double y) {
  const auto& ind = tree.induced();
  if (!ind.base().contains(x) || !ind.base().contains(y))
    throw DomainError("separation_and_metric: points must lie in the base set");
  int s = 0;
  double px = x, py = y;
  while (s < tree.depth()) {
    const auto ex = ind.first_return(px);
    const auto ey = ind.first_return(py);
    if (!(ind.label(px) == ind.label(py))) break;
    ++s;
    px = ex.image;
    py = ey.image;
  }
  return {s, std::pow(tree.beta(), s)};
}

// ---------------------------------------------------------------------------
// TransferDisc

TransferDisc TransferDisc::exact_doubling(const MapSystem& system, std::size_t grid_size) {
  if (system.kind() != MapKind::doubling)
    throw ParameterError("TransferDisc::exact_doubling: exact branches require the doubling map");
  if (grid_size < 4 || grid_size % 2 != 0)
    throw ParameterError("TransferDisc: grid size must be even and >= 4");
  TransferDisc t;
  t.exact_ = true;
  t.system_ = system;
  t.nodes_.resize(grid_size);
  t.weights_.assign(grid_size, 1.0 / static_cast<double>(grid_size));
  for (std::size_t i = 0; i < grid_size; ++i)
    t.nodes_[i] = static_cast<double>(i) / static_cast<double>(grid_size);
  return t;
}

TransferDisc TransferDisc::ulam(const CylinderTree& tree, int cell_depth, std::size_t samples,
                                std::uint64_t seed) {
  if (cell_depth < 1 || cell_depth > tree.depth())
    throw ParameterError("TransferDisc::ulam: cell depth outside tree depth");
  TransferDisc t;
  t.exact_ = false;
  t.system_ = tree.induced().parent();
  const auto& cells = tree.level(cell_depth);
  t.nodes_.resize(cells.size());
  for (std::size_t i = 0; i < cells.size(); ++i) t.nodes_[i] = cells[i].representative;

  // joint counts m(C_i cap f^-1 C_j) along a fresh stationary orbit
  std::unordered_map<std::uint64_t, std::uint64_t> joint;
  std::uint64_t total = 0;
  {
    InducedOrbit orbit(tree.induced(), seed);
    std::vector<std::uint32_t> window;  // label ids over the last cell_depth+1 excursions
    auto push_label = [&](const ExcursionLabel& l) {
      const auto id = tree.find_label(l);
      window.push_back(id ? *id : 0xffffffffu);
      if (window.size() > static_cast<std::size_t>(cell_depth) + 1)
        window.erase(window.begin());
    };
    auto cell_at = [&](std::size_t offset) -> std::optional<std::uint32_t> {
      std::vector<std::uint32_t> w(window.begin() + offset,
                                   window.begin() + offset + cell_depth);
      for (auto id : w)
        if (id == 0xffffffffu) return std::nullopt;
      return tree.find_cylinder(cell_depth, w);
    };
    for (std::size_t i = 0; i < samples + static_cast<std::size_t>(cell_depth) + 1; ++i) {
      push_label(orbit.advance().label);
      if (window.size() < static_cast<std::size_t>(cell_depth) + 1) continue;
      const auto ci = cell_at(0);
      const auto cj = cell_at(1);
      if (ci && cj) {
        ++joint[(static_cast<std::uint64_t>(*ci) << 32) | *cj];
        ++total;
      }
    }
  }
  if (total == 0) throw EstimationError("TransferDisc::ulam: no transitions observed");
  t.row_.reserve(joint.size());
  t.col_.reserve(joint.size());
  t.joint_.reserve(joint.size());
  t.weights_.assign(cells.size(), 0.0);
  t.col_weights_.assign(cells.size(), 0.0);
  for (const auto& [key, cnt] : joint) {
    const auto i = static_cast<std::uint32_t>(key >> 32);
    const auto j = static_cast<std::uint32_t>(key & 0xffffffffu);
    const double mass = static_cast<double>(cnt) / static_cast<double>(total);
    t.row_.push_back(i);
    t.col_.push_back(j);
    t.joint_.push_back(mass);
    t.weights_[i] += mass;
    t.col_weights_[j] += mass;
  }
  return t;
}

std::vector<double> TransferDisc::sample_grid(const std::function<double(double)>& v) const {
  std::vector<double> out(nodes_.size());
  for (std::size_t i = 0; i < nodes_.size(); ++i) out[i] = v(nodes_[i]);
  return out;
}

double TransferDisc::integral(const std::vector<double>& v) const {
  double s = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) s += weights_[i] * v[i];
  return s;
}

std::vector<double> TransferDisc::apply(const std::vector<double>& v) const {
  if (v.size() != nodes_.size()) throw ParameterError("TransferDisc::apply: size mismatch");
  const std::size_t n = nodes_.size();
  std::vector<double> out(n, 0.0);
  if (exact_) {
    // periodic piecewise-linear interpolation of the grid values
    auto interp = [&](double x) {
      x -= std::floor(x);
      const double pos = x * static_cast<double>(n);
      const auto i = static_cast<std::size_t>(pos) % n;
      const double frac = pos - std::floor(pos);
      return v[i] * (1.0 - frac) + v[(i + 1) % n] * frac;
    };
    for (std::size_t i = 0; i < n; ++i) {
      const double x = nodes_[i];
      out[i] = 0.5 * (interp(0.5 * x) + interp(0.5 * x + 0.5));
    }
    return out;
  }
  for (std::size_t e = 0; e < joint_.size(); ++e)
    out[col_[e]] += joint_[e] * v[row_[e]];
  for (std::size_t j = 0; j < n; ++j)
    out[j] = col_weights_[j] > 0.0 ? out[j] / col_weights_[j] : 0.0;
  return out;
}

std::vector<double> TransferDisc::apply_koopman(const std::vector<double>& w) const {
  if (w.size() != nodes_.size()) throw ParameterError("TransferDisc::apply_koopman: size mismatch");
  const std::size_t n = nodes_.size();
  std::vector<double> out(n, 0.0);
  if (exact_) {
    for (std::size_t i = 0; i < n; ++i) out[i] = w[(2 * i) % n];
    return out;
  }
  for (std::size_t e = 0; e < joint_.size(); ++e)
    out[row_[e]] += joint_[e] * w[col_[e]];
  for (std::size_t i = 0; i < n; ++i)
    if (weights_[i] > 0.0) out[i] /= weights_[i];
  return out;
}

double TransferDisc::eval_power(const std::function<double(double)>& v, double x, int j) const {
  if (!exact_) throw ParameterError("TransferDisc::eval_power: exact mode only");
  if (j < 0 || j > 30) throw ParameterError("TransferDisc::eval_power: power out of range");
  if (j == 0) return v(x);
  const double count = std::ldexp(1.0, j);  // 2^j preimages
  const double scale = 1.0 / count;
  double sum = 0.0;
  for (double k = 0.0; k < count; k += 1.0) sum += v((x + k) * scale);
  return sum * scale;
}

// ---------------------------------------------------------------------------

CorrelationSeries correlation_sequence(const InducedSystem& induced, const Observable& v,
                                       const Observable& w, int n_max, std::size_t budget,
                                       std::uint64_t seed, int replicas) {
  if (n_max < 0) throw ParameterError("correlation_sequence: n_max must be >= 0");
  if (replicas < 2) throw ParameterError("correlation_sequence: need >= 2 replicas");
  if (budget < static_cast<std::size_t>(replicas) * (static_cast<std::size_t>(n_max) + 2))
    throw ParameterError("correlation_sequence: budget too small for the lag range");

  const std::size_t len = budget / static_cast<std::size_t>(replicas);
  std::vector<std::vector<double>> per_replica(replicas);

  util::parallel_for(static_cast<std::size_t>(replicas), [&](std::size_t r) {
    InducedOrbit orbit(induced, util::stream_seed(seed, r));
    const std::size_t total = len + static_cast<std::size_t>(n_max);
    std::vector<double> vv(total), ww(total);
    for (std::size_t i = 0; i < total; ++i) {
      const double y = orbit.point();
      vv[i] = v(y);
      ww[i] = w(y);
      orbit.advance();
    }
    double mv = 0.0, mw = 0.0;
    for (std::size_t i = 0; i < total; ++i) {
      mv += vv[i];
      mw += ww[i];
    }
    mv /= static_cast<double>(total);
    mw /= static_cast<double>(total);
    std::vector<double> c(static_cast<std::size_t>(n_max) + 1, 0.0);
    for (int lag = 0; lag <= n_max; ++lag) {
      double s = 0.0;
      for (std::size_t i = 0; i < len; ++i) s += vv[i] * ww[i + lag];
      c[lag] = s / static_cast<double>(len) - mv * mw;
    }
    per_replica[r] = std::move(c);
  });

  CorrelationSeries out;
  out.budget = budget;
  out.replicas = replicas;
  out.value.assign(static_cast<std::size_t>(n_max) + 1, 0.0);
  out.se.assign(static_cast<std::size_t>(n_max) + 1, 0.0);
  for (int lag = 0; lag <= n_max; ++lag) {
    util::RunningStats s;
    for (int r = 0; r < replicas; ++r) s.add(per_replica[r][lag]);
    out.value[lag] = s.mean();
    out.se[lag] = s.mean_se();
  }
  return out;
}

DecayFit fit_decay(const CorrelationSeries& series, double noise_floor_mult) {
  DecayFit fit;
  std::vector<double> xs, ys;
  // The usable lags are the contiguous prefix above the noise floor: past the
  // first sub-floor lag the series is noise, and a noise excursion there would
  // flatten the fitted rate.
  for (std::size_t lag = 1; lag < series.value.size(); ++lag) {
    const double floor = noise_floor_mult * series.se[lag];
    if (!(std::fabs(series.value[lag]) > floor) || series.value[lag] == 0.0) break;
    xs.push_back(static_cast<double>(lag));
    ys.push_back(std::log(std::fabs(series.value[lag])));
    fit.lags_used.push_back(static_cast<int>(lag));
  }
  if (xs.empty()) {
    fit.degenerate = true;
    return fit;
  }
  if (xs.size() < 5)
    throw InsufficientDataError("fit_decay: fewer than 5 lags above the noise floor");
  const auto line = util::fit_line(xs, ys);
  fit.amplitude = std::exp(line.intercept);
  fit.rate = std::exp(line.slope);
  fit.rate_lo = std::exp(line.slope - 2.0 * line.slope_se);
  fit.rate_hi = std::exp(line.slope + 2.0 * line.slope_se);
  fit.r2 = line.r2;
  return fit;
}

// ---------------------------------------------------------------------------

namespace {

// g_k(x) = 1 / (f^k)'(x) and f^k(x), along the orbit
std::pair<double, double> gk_and_image(const InducedSystem& ind, double x, int k) {
  double deriv = 1.0;
  for (int i = 0; i < k; ++i) {
    deriv *= ind.derivative(x);
    x = ind.first_return(x).image;
  }
  return {1.0 / deriv, x};
}

}  // namespace

DistortionReport check_distortion(const CylinderTree& tree, int depth,
                                  const DistortionOptions& opts) {
  if (depth < 1 || depth > tree.depth())
    throw ParameterError("check_distortion: depth outside the tree");
  if (tree.depth() < 2) throw ParameterError("check_distortion: tree depth must be >= 2");
  const auto& ind = tree.induced();
  DistortionReport rep;
  std::size_t used = 0;
  for (const auto& cyl : tree.level(depth)) {
    if (used >= opts.max_pairs) break;
    if (!tree.exact_lengths() && cyl.count < opts.min_count) continue;
    const double m_a = tree.exact_lengths() ? cyl.length_measure : cyl.measure;
    if (m_a <= 0.0) continue;
    for (std::size_t i = 0; i < cyl.points.size(); ++i) {
      const auto [g_i, img_i] = gk_and_image(ind, cyl.points[i], depth);
      const double ratio = m_a / g_i;
      rep.ratio_part = std::max({rep.ratio_part, ratio, 1.0 / ratio});
      for (std::size_t j = i + 1; j < cyl.points.size(); ++j) {
        const auto [g_j, img_j] = gk_and_image(ind, cyl.points[j], depth);
        const auto [s, d] = separation_and_metric(tree, img_i, img_j);
        const double quot = std::fabs(g_i / g_j - 1.0) / d;
        rep.lipschitz_part = std::max(rep.lipschitz_part, quot);
        ++used;
      }
    }
  }
  rep.pairs = used;
  rep.d_hat = std::max(rep.lipschitz_part, rep.ratio_part);
  return rep;
}

double dbeta_lipschitz_surrogate(const CylinderTree& tree, const Observable& v,
                                 std::size_t pair_budget, std::uint64_t seed) {
  // Pair each fresh sample with the previous visitor of its deepest cylinder.
  const int k = tree.depth();
  InducedOrbit orbit(tree.induced(), seed);
  std::unordered_map<std::uint64_t, double> last_visit;
  std::vector<std::uint32_t> window;
  double best = 0.0;
  std::size_t pairs = 0;
  std::vector<double> recent_pts;
  std::size_t iterations = 0;
  const std::size_t iteration_cap = 60 * pair_budget + 100000;
  while (pairs < pair_budget && ++iterations < iteration_cap) {
    const double y = orbit.point();
    const auto id = tree.find_label(orbit.advance().label);
    window.push_back(id ? *id : 0xffffffffu);
    recent_pts.push_back(y);
    if (window.size() < static_cast<std::size_t>(k)) continue;
    if (window.size() > static_cast<std::size_t>(k)) {
      window.erase(window.begin());
      recent_pts.erase(recent_pts.begin());
    }
    bool known = true;
    for (auto w : window)
      if (w == 0xffffffffu) known = false;
    if (!known) continue;
    std::uint64_t h = 1469598103934665603ULL;
    for (auto w : window) h = (h ^ w) * 1099511628211ULL;
    const double x0 = recent_pts.front();
    const auto it = last_visit.find(h);
    if (it != last_visit.end() && it->second != x0) {
      const double d = std::pow(tree.beta(), k);  // same depth-k cylinder
      best = std::max(best, std::fabs(v(x0) - v(it->second)) / d);
      ++pairs;
    }
    last_visit[h] = x0;
    if (last_visit.size() > 2000000) break;
  }
  return 1.2 * best;
}

OscillationReport ps_oscillation(const CylinderTree& tree, const Observable& v, double delta,
                                 std::size_t budget, std::uint64_t seed) {
  if (!(delta > 0.0)) throw ParameterError("ps_oscillation: delta must be positive");
  const int K = tree.depth();
  const double p = 2.0 + delta;

  const auto returns = sample_returns(tree.induced(), std::max<std::size_t>(budget / 4, 10000),
                                      util::stream_seed(seed, 101));
  const auto mom = moment_norm(returns, p);
  if (!mom.finite)
    throw ParameterError("ps_oscillation: |R|_{2+delta} has an infinite-moment verdict");

  const double vbeta =
      dbeta_lipschitz_surrogate(tree, v, std::min<std::size_t>(budget / 8, 100000),
                                util::stream_seed(seed, 102));

  // Pass 1: per-cylinder means of v at every depth.  Pass 2 (same stream seed):
  // centered (2+delta)-moments, so no per-cylinder sample storage is needed.
  struct Cell {
    double sum = 0.0;
    std::uint64_t count = 0;
    double acc = 0.0;
  };
  std::vector<std::unordered_map<std::uint64_t, Cell>> cells(K);
  const std::uint64_t stream_seed = util::stream_seed(seed, 103);

  for (int pass = 0; pass < 2; ++pass) {
    InducedOrbit orbit(tree.induced(), stream_seed);
    std::vector<std::uint64_t> rolling;  // label ids as raw hashes
    std::vector<double> points;
    for (std::size_t i = 0; i < budget; ++i) {
      const double y = orbit.point();
      const Excursion e = orbit.advance();
      rolling.push_back(label_key(e.label));
      points.push_back(y);
      if (rolling.size() > static_cast<std::size_t>(K)) {
        rolling.erase(rolling.begin());
        points.erase(points.begin());
      }
      // windows ending at the newest sample begin at older points
      for (int k = 1; k <= K && static_cast<std::size_t>(k) <= rolling.size(); ++k) {
        std::uint64_t h = 1469598103934665603ULL;
        const std::size_t start = rolling.size() - static_cast<std::size_t>(k);
        for (std::size_t w = start; w < rolling.size(); ++w)
          h = (h ^ rolling[w]) * 1099511628211ULL;
        const double x0 = points[start];
        auto& cell = cells[k - 1][h];
        if (pass == 0) {
          cell.sum += v(x0);
          ++cell.count;
        } else if (cell.count > 0) {
          const double mean = cell.sum / static_cast<double>(cell.count);
          cell.acc += std::pow(std::fabs(v(x0) - mean), p);
        }
      }
    }
  }

  OscillationReport rep;
  rep.delta = delta;
  rep.vbeta_surrogate = vbeta;
  rep.moment_norm_value = mom.norm;
  std::vector<double> ks, logs;
  for (int k = 1; k <= K; ++k) {
    double total = 0.0;
    std::uint64_t cnt = 0;
    for (const auto& [h, cell] : cells[k - 1]) {
      total += cell.acc;
      cnt += cell.count;
    }
    const double sum = cnt > 0 ? total / static_cast<double>(cnt) : 0.0;
    rep.sums.push_back(sum);
    rep.bounds.push_back(std::pow(vbeta * mom.norm * std::pow(tree.beta(), k), p));
    if (sum > 0.0) {
      ks.push_back(k);
      logs.push_back(std::log(sum));
    }
  }
  if (ks.size() >= 2) rep.log_slope = util::fit_line(ks, logs).slope;
  return rep;
}

MixingEstimate ps_mixing(const CylinderTree& tree, const Cylinder& a,
                         const std::vector<Interval>& b, int gap, std::size_t budget,
                         std::uint64_t seed) {
  if (gap < 0) throw ParameterError("ps_mixing: gap must be >= 0");
  const int k = static_cast<int>(a.word.size());
  const int shift = gap + k;
  auto in_b = [&](double x) {
    for (const auto& iv : b)
      if (iv.contains(x)) return true;
    return false;
  };

  InducedOrbit orbit(tree.induced(), seed);
  std::vector<std::uint32_t> labels;
  std::vector<double> points;
  labels.reserve(budget + shift + k);
  points.reserve(budget + shift + k);
  for (std::size_t i = 0; i < budget + static_cast<std::size_t>(shift + k); ++i) {
    points.push_back(orbit.point());
    const auto id = tree.find_label(orbit.advance().label);
    labels.push_back(id ? *id : 0xffffffffu);
  }

  auto in_a = [&](std::size_t i) {
    for (int w = 0; w < k; ++w)
      if (labels[i + w] != a.word[w]) return false;
    return true;
  };

  const int segments = 16;
  util::RunningStats joint_stats, a_stats, b_stats;
  std::vector<double> seg_joint(segments, 0.0), seg_a(segments, 0.0), seg_b(segments, 0.0),
      seg_n(segments, 0.0);
  for (std::size_t i = 0; i < budget; ++i) {
    const int s = static_cast<int>(i * segments / budget);
    const double ia = in_a(i) ? 1.0 : 0.0;
    const double ib = in_b(points[i + shift]) ? 1.0 : 0.0;
    seg_joint[s] += ia * ib;
    seg_a[s] += ia;
    seg_b[s] += ib;
    seg_n[s] += 1.0;
  }
  util::RunningStats diff_stats;
  double m_a = 0.0, m_b = 0.0, joint = 0.0, n_total = 0.0;
  for (int s = 0; s < segments; ++s) {
    if (seg_n[s] == 0.0) continue;
    diff_stats.add(seg_joint[s] / seg_n[s] - (seg_a[s] / seg_n[s]) * (seg_b[s] / seg_n[s]));
    m_a += seg_a[s];
    m_b += seg_b[s];
    joint += seg_joint[s];
    n_total += seg_n[s];
  }
  MixingEstimate est;
  est.gap = gap;
  est.m_a = m_a / n_total;
  est.m_b = m_b / n_total;
  est.difference = std::fabs(joint / n_total - est.m_a * est.m_b);
  est.se = diff_stats.mean_se();
  return est;
}

}  // namespace towerlimits
