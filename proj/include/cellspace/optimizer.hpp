#pragma once

// Constrained two-objective evolutionary search (NSGA-II style) over genomes.
//
//   evolve_single_loop  one EA over the whole genome
//   evolve_two_phase    outer EA over cell genes, scored by the hypervolume
//                       of an inner EA over the layer structure
//   brute_force_pareto  exhaustive oracle for small spaces
//
// Objectives are (f1, f2) minimized under g <= 0, compared with
// feasibility-first dominance.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "architecture_export.hpp"
#include "evaluation.hpp"
#include "genome_codec.hpp"
#include "metrics.hpp"
#include "rng.hpp"

namespace cellspace {

struct Individual {
  DigitGenome genome;
  ObjectiveVector objectives;
  std::uint64_t param_count = 0;
  int rank = 0;
  double crowding = 0.0;
};

class SearchError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Dominance, sorting, crowding.

/// <= in both objectives and < in at least one.
inline bool pareto_dominates(const ObjectiveVector& a, const ObjectiveVector& b) {
  return a.f1 <= b.f1 && a.f2 <= b.f2 && (a.f1 < b.f1 || a.f2 < b.f2);
}

/// Feasible beats infeasible; two infeasible compare by violation g; two
/// feasible by Pareto dominance.
inline bool constrained_dominates(const ObjectiveVector& a, const ObjectiveVector& b) {
  const bool fa = a.feasible();
  const bool fb = b.feasible();
  if (fa && !fb) return true;
  if (!fa && fb) return false;
  if (!fa && !fb) return a.g < b.g;
  return pareto_dominates(a, b);
}

inline bool constrained_dominates(const Individual& a, const Individual& b) {
  return constrained_dominates(a.objectives, b.objectives);
}

/// Deb's fast non-dominated sort. Fronts hold indices into `pop`, each front
/// in ascending index order.
inline std::vector<std::vector<std::size_t>> fast_nondominated_sort(
    std::span<const ObjectiveVector> pop) {
  const std::size_t n = pop.size();
  std::vector<std::vector<std::size_t>> dominated(n);
  std::vector<std::size_t> dom_count(n, 0);
  std::vector<std::vector<std::size_t>> fronts;
  std::vector<std::size_t> current;
  for (std::size_t p = 0; p < n; ++p) {
    for (std::size_t q = 0; q < n; ++q) {
      if (p == q) continue;
      if (constrained_dominates(pop[p], pop[q]))
        dominated[p].push_back(q);
      else if (constrained_dominates(pop[q], pop[p]))
        ++dom_count[p];
    }
    if (dom_count[p] == 0) current.push_back(p);
  }
  while (!current.empty()) {
    std::vector<std::size_t> next;
    for (auto p : current)
      for (auto q : dominated[p])
        if (--dom_count[q] == 0) next.push_back(q);
    std::sort(next.begin(), next.end());
    fronts.push_back(std::move(current));
    current = std::move(next);
  }
  return fronts;
}

/// Crowding distance over (f1, f2). Boundary points get +inf; a zero-range
/// objective contributes nothing.
inline std::vector<double> crowding_distance(std::span<const ObjectiveVector> front) {
  const std::size_t n = front.size();
  std::vector<double> dist(n, 0.0);
  if (n <= 2) {
    std::fill(dist.begin(), dist.end(), std::numeric_limits<double>::infinity());
    return dist;
  }
  std::vector<std::size_t> order(n);
  for (int obj = 0; obj < 2; ++obj) {
    const auto value = [&](std::size_t i) { return obj == 0 ? front[i].f1 : front[i].f2; };
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return value(a) < value(b); });
    const double lo = value(order.front());
    const double hi = value(order.back());
    dist[order.front()] = std::numeric_limits<double>::infinity();
    dist[order.back()] = std::numeric_limits<double>::infinity();
    if (hi == lo) continue;
    for (std::size_t k = 1; k + 1 < n; ++k)
      dist[order[k]] += (value(order[k + 1]) - value(order[k - 1])) / (hi - lo);
  }
  return dist;
}

/// Area dominated by the points inside the reference box, by an f1-sorted
/// staircase sweep. Dominated and out-of-box points add nothing.
inline double hypervolume_2d(std::span<const ObjectiveVector> points, double ref_f1 = 1.0,
                             double ref_f2 = 1.0) {
  std::vector<std::pair<double, double>> pts;
  for (const auto& p : points)
    if (p.f1 < ref_f1 && p.f2 < ref_f2) pts.emplace_back(p.f1, p.f2);
  std::sort(pts.begin(), pts.end());
  std::vector<std::pair<double, double>> stairs;
  double best_f2 = ref_f2;
  for (const auto& p : pts) {
    if (p.second < best_f2) {
      stairs.push_back(p);
      best_f2 = p.second;
    }
  }
  double area = 0.0;
  for (std::size_t i = 0; i < stairs.size(); ++i) {
    const double next_f1 = i + 1 < stairs.size() ? stairs[i + 1].first : ref_f1;
    area += (next_f1 - stairs[i].first) * (ref_f2 - stairs[i].second);
  }
  return area;
}

// ---------------------------------------------------------------------------
// Archive.

/// All-time set of mutually non-dominated individuals, one per genome.
class ParetoArchive {
 public:
  /// Inserts unless a member dominates it or has the same genome; evicts
  /// members it dominates. Returns whether it was inserted.
  bool offer(const Individual& ind) {
    for (const auto& e : entries_) {
      if (e.genome == ind.genome) return false;
      if (constrained_dominates(e, ind)) return false;
    }
    std::erase_if(entries_, [&](const Individual& e) { return constrained_dominates(ind, e); });
    entries_.push_back(ind);
    return true;
  }

  const std::vector<Individual>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  /// Entries ordered by f1, then f2, then genome.
  std::vector<Individual> sorted() const {
    auto out = entries_;
    std::sort(out.begin(), out.end(), [](const Individual& a, const Individual& b) {
      if (a.objectives.f1 != b.objectives.f1) return a.objectives.f1 < b.objectives.f1;
      if (a.objectives.f2 != b.objectives.f2) return a.objectives.f2 < b.objectives.f2;
      return a.genome < b.genome;
    });
    return out;
  }

  std::optional<double> best_feasible_f1() const {
    std::optional<double> best;
    for (const auto& e : entries_)
      if (e.objectives.feasible() && (!best || e.objectives.f1 < *best)) best = e.objectives.f1;
    return best;
  }

  /// Hypervolume of the feasible members at reference (1, 1).
  double hypervolume() const {
    std::vector<ObjectiveVector> pts;
    for (const auto& e : entries_)
      if (e.objectives.feasible()) pts.push_back(e.objectives);
    return hypervolume_2d(pts);
  }

 private:
  std::vector<Individual> entries_;
};

// ---------------------------------------------------------------------------
// Variation operators on real relaxations.

namespace detail {

inline double sbx_beta(double u, double eta) {
  if (u <= 0.5) return std::pow(2.0 * u, 1.0 / (eta + 1.0));
  return std::pow(1.0 / (2.0 * (1.0 - u)), 1.0 / (eta + 1.0));
}

}  // namespace detail

/// Simulated binary crossover on real vectors. With probability `prob` the
/// pair is recombined: each variable with a non-degenerate range and distinct
/// parent values is crossed with probability 0.5 using one spread factor for
/// both children (so c1 + c2 == p1 + p2), then the children swap that
/// variable with probability 0.5. Otherwise the children copy the parents.
/// Results are not clamped; see round_to_bounds.
inline std::pair<std::vector<double>, std::vector<double>> sbx_real(
    std::span<const double> p1, std::span<const double> p2, std::span<const double> upper,
    double eta, double prob, Rng& rng) {
  if (p1.size() != p2.size() || p1.size() != upper.size())
    throw std::invalid_argument("sbx: parent shapes differ");
  std::vector<double> c1(p1.begin(), p1.end());
  std::vector<double> c2(p2.begin(), p2.end());
  if (!(rng.uniform01() < prob)) return {c1, c2};
  for (std::size_t i = 0; i < p1.size(); ++i) {
    if (upper[i] <= 0.0) continue;
    if (!(rng.uniform01() < 0.5)) continue;
    if (std::fabs(p1[i] - p2[i]) <= 1e-14) continue;
    const double beta = detail::sbx_beta(rng.uniform01(), eta);
    c1[i] = 0.5 * ((1.0 + beta) * p1[i] + (1.0 - beta) * p2[i]);
    c2[i] = 0.5 * ((1.0 - beta) * p1[i] + (1.0 + beta) * p2[i]);
    if (rng.uniform01() < 0.5) std::swap(c1[i], c2[i]);
  }
  return {c1, c2};
}

/// Deb's bounded polynomial mutation of one value in [lower, upper].
inline double polynomial_mutation_real(double y, double lower, double upper, double eta,
                                       Rng& rng) {
  const double range = upper - lower;
  if (range <= 0.0) return y;
  const double d1 = (y - lower) / range;
  const double d2 = (upper - y) / range;
  const double pw = 1.0 / (eta + 1.0);
  const double u = rng.uniform01();
  double dq = 0.0;
  if (u < 0.5) {
    const double xy = 1.0 - d1;
    const double val = 2.0 * u + (1.0 - 2.0 * u) * std::pow(xy, eta + 1.0);
    dq = std::pow(val, pw) - 1.0;
  } else {
    const double xy = 1.0 - d2;
    const double val = 2.0 * (1.0 - u) + 2.0 * (u - 0.5) * std::pow(xy, eta + 1.0);
    dq = 1.0 - std::pow(val, pw);
  }
  return std::clamp(y + dq * range, lower, upper);
}

/// Nearest integer (ties to even), clamped to [0, upper].
inline double round_to_bounds(double v, double upper) {
  return std::clamp(std::nearbyint(v), 0.0, upper);
}

inline std::vector<double> digit_upper_bounds(const GenomeLayout& layout) {
  std::vector<double> upper;
  for (auto r : layout.radices()) upper.push_back(static_cast<double>(r - 1));
  return upper;
}

inline std::vector<double> to_reals(const DigitGenome& g) {
  return {g.digits.begin(), g.digits.end()};
}

inline DigitGenome from_reals(std::span<const double> v, std::span<const double> upper) {
  DigitGenome g;
  for (std::size_t i = 0; i < v.size(); ++i)
    g.digits.push_back(static_cast<std::uint32_t>(round_to_bounds(v[i], upper[i])));
  return g;
}

/// Per-digit SBX on whole digit genomes; children are rounded and clamped to
/// each digit's radix.
inline std::pair<DigitGenome, DigitGenome> sbx_crossover(const DigitGenome& p1,
                                                         const DigitGenome& p2,
                                                         const GenomeLayout& layout,
                                                         const EAParams& ea, Rng& rng) {
  if (p1.digits.size() != layout.size() || p2.digits.size() != layout.size())
    throw std::invalid_argument("sbx: genome shape mismatch");
  const auto upper = digit_upper_bounds(layout);
  auto [c1, c2] = sbx_real(to_reals(p1), to_reals(p2), upper, ea.crossover_eta,
                           ea.crossover_prob, rng);
  return {from_reals(c1, upper), from_reals(c2, upper)};
}

/// Every digit mutated independently with probability mutation_prob.
inline DigitGenome polynomial_mutation(const DigitGenome& g, const GenomeLayout& layout,
                                       const EAParams& ea, Rng& rng) {
  DigitGenome out = g;
  for (std::size_t i = 0; i < g.digits.size(); ++i) {
    const double upper = static_cast<double>(layout.radix(i) - 1);
    if (upper <= 0.0) continue;
    if (!(rng.uniform01() < ea.mutation_prob)) continue;
    const double y = polynomial_mutation_real(g.digits[i], 0.0, upper, ea.mutation_eta, rng);
    out.digits[i] = static_cast<std::uint32_t>(round_to_bounds(y, upper));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Representations: which part of the genome an EA varies, and as what reals.

/// Maps the searched part of a genome to a real vector and back. Positions
/// outside the searched part are taken from a template genome.
class Representation {
 public:
  /// Digit mode: one variable per listed digit position.
  static Representation digits(const GenomeLayout& layout, std::vector<std::size_t> positions) {
    Representation r(layout);
    r.positions_ = std::move(positions);
    for (auto pos : r.positions_) r.upper_.push_back(static_cast<double>(layout.radix(pos) - 1));
    return r;
  }

  /// Packed mode: one variable per listed packed gene. Every gene bound must
  /// be below 2^53 so the relaxation is exact.
  static Representation packed(const GenomeLayout& layout, std::vector<std::size_t> genes) {
    Representation r(layout);
    r.packed_ = true;
    r.positions_ = std::move(genes);
    const auto bounds = packed_bounds(layout.params());
    for (auto gi : r.positions_) {
      if (bounds[gi] >= (BigInt(1) << 53))
        throw SearchError("packed mode needs every gene bound below 2^53; gene " +
                          std::to_string(gi) + " has bound " + bounds[gi].str());
      r.upper_.push_back(static_cast<double>(bounds[gi] - 1));
    }
    return r;
  }

  std::size_t size() const { return positions_.size(); }
  const std::vector<double>& upper() const { return upper_; }

  std::vector<double> encode(const DigitGenome& g) const {
    std::vector<double> out;
    if (!packed_) {
      for (auto pos : positions_) out.push_back(g.digits[pos]);
      return out;
    }
    const auto p = pack(g, layout_.params());
    for (auto gi : positions_) out.push_back(static_cast<double>(p.genes[gi]));
    return out;
  }

  DigitGenome decode(std::span<const double> v, const DigitGenome& base) const {
    if (!packed_) {
      DigitGenome g = base;
      for (std::size_t i = 0; i < positions_.size(); ++i)
        g.digits[positions_[i]] = static_cast<std::uint32_t>(round_to_bounds(v[i], upper_[i]));
      return g;
    }
    auto p = pack(base, layout_.params());
    for (std::size_t i = 0; i < positions_.size(); ++i)
      p.genes[positions_[i]] =
          BigInt(static_cast<std::uint64_t>(round_to_bounds(v[i], upper_[i])));
    return unpack(p, layout_.params());
  }

 private:
  explicit Representation(const GenomeLayout& layout) : layout_(layout) {}

  GenomeLayout layout_;
  bool packed_ = false;
  std::vector<std::size_t> positions_;
  std::vector<double> upper_;
};

inline std::vector<std::size_t> structure_positions(const GenomeLayout& layout) {
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < layout.params().cell_layers; ++k) out.push_back(layout.structure_index(k));
  return out;
}

inline std::vector<std::size_t> cell_positions(const GenomeLayout& layout) {
  std::vector<std::size_t> out;
  for (std::size_t i = layout.params().cell_layers; i < layout.size(); ++i) out.push_back(i);
  return out;
}

inline std::vector<std::size_t> all_positions(const GenomeLayout& layout) {
  std::vector<std::size_t> out(layout.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = i;
  return out;
}

/// Representation for a set of digit positions under the configured mode.
/// Packed mode uses the packed genes covering those positions.
inline Representation make_representation(const GenomeLayout& layout, VariationMode mode,
                                          const std::vector<std::size_t>& positions) {
  if (mode == VariationMode::digit) return Representation::digits(layout, positions);
  const auto& p = layout.params();
  std::vector<std::size_t> genes;
  for (auto pos : positions) {
    std::size_t gene = 0;
    if (pos >= p.cell_layers) {
      const auto reduction_start = layout.reduction_index(0);
      if (pos >= reduction_start) {
        const auto cell = pos - reduction_start;
        gene = 1 + cell * (p.pipelines + 1) + p.pipelines;
      } else {
        const auto rel = (pos - p.cell_layers) / p.block_layers;  // cell * L_p + pipeline
        gene = 1 + (rel / p.pipelines) * (p.pipelines + 1) + rel % p.pipelines;
      }
    }
    if (std::find(genes.begin(), genes.end(), gene) == genes.end()) genes.push_back(gene);
  }
  std::sort(genes.begin(), genes.end());
  return Representation::packed(layout, genes);
}

// ---------------------------------------------------------------------------
// Fitness: genome -> objectives through an Evaluator.

struct Scored {
  ObjectiveVector objectives;
  std::uint64_t param_count = 0;
};

/// Decodes, builds and exports each genome, sends uncached ones to the
/// evaluator in one batch (the generation barrier), and turns accuracies into
/// objective vectors. Failed evaluations score accuracy 0. Successful scores
/// are memoized for the life of the pipeline.
class FitnessPipeline {
 public:
  FitnessPipeline(const SearchConfig& cfg, Evaluator& evaluator)
      : cfg_(cfg), evaluator_(evaluator) {}

  std::vector<Scored> evaluate(std::span<const DigitGenome> genomes) {
    std::vector<Scored> out(genomes.size());
    std::vector<EvaluationRequest> requests;
    std::vector<std::vector<std::size_t>> slots;
    std::map<DigitGenome, std::size_t> pending;
    std::vector<std::uint64_t> params;
    for (std::size_t i = 0; i < genomes.size(); ++i) {
      if (auto it = memo_.find(genomes[i]); it != memo_.end()) {
        out[i] = it->second;
        continue;
      }
      const auto [pit, fresh] = pending.try_emplace(genomes[i], requests.size());
      if (!fresh) {
        slots[pit->second].push_back(i);
        continue;
      }
      const auto graph = build_graph(decode(genomes[i], cfg_), cfg_);
      EvaluationRequest req;
      req.id = next_id_++;
      req.genome = genomes[i];
      req.architecture = export_architecture(genomes[i], graph, cfg_);
      req.budget = cfg_.ea.training;
      params.push_back(req.architecture["param_count"].get<std::uint64_t>());
      requests.push_back(std::move(req));
      slots.push_back({i});
    }
    if (requests.empty()) return out;

    const auto results = evaluator_.evaluate(requests);
    if (results.size() != requests.size())
      throw EvaluatorError("evaluator returned " + std::to_string(results.size()) +
                           " results for " + std::to_string(requests.size()) + " requests");
    evaluations_ += requests.size();
    for (std::size_t r = 0; r < requests.size(); ++r) {
      const double accuracy = results[r].ok() ? results[r].accuracy : 0.0;
      Scored s{objective_vector(1.0 - accuracy, params[r], cfg_.total_param), params[r]};
      if (results[r].ok()) memo_.emplace(requests[r].genome, s);
      for (auto slot : slots[r]) out[slot] = s;
    }
    return out;
  }

  /// Requests sent to the evaluator so far.
  std::uint64_t evaluations() const { return evaluations_; }
  const SearchConfig& config() const { return cfg_; }

 private:
  const SearchConfig& cfg_;
  Evaluator& evaluator_;
  std::map<DigitGenome, Scored> memo_;
  std::uint64_t next_id_ = 1;
  std::uint64_t evaluations_ = 0;
};

// ---------------------------------------------------------------------------
// Run log.

struct GenerationStats {
  std::uint32_t gen = 0;
  std::uint64_t evals = 0;
  std::optional<double> best_f1;
  std::size_t archive_size = 0;
  double hypervolume = 0.0;
};

inline Json to_json(const GenerationStats& s) {
  return Json{{"gen", s.gen},
              {"evals", s.evals},
              {"best_f1", s.best_f1 ? Json(*s.best_f1) : Json(nullptr)},
              {"archive_size", s.archive_size},
              {"hypervolume", s.hypervolume}};
}

struct SearchResult {
  ParetoArchive archive;
  std::vector<GenerationStats> log;  // entry 0 is the initial population
  std::uint64_t evaluations = 0;
};

using GenerationCallback = std::function<void(const GenerationStats&)>;

// ---------------------------------------------------------------------------
// NSGA-II over one representation.

struct NsgaSettings {
  std::uint32_t population = 20;
  std::uint32_t generations = 0;
  std::uint64_t seed = 1;
  double crossover_prob = 1.0;
  double crossover_eta = 3.0;
  double mutation_prob = 1.0;
  double mutation_eta = 3.0;
};

inline NsgaSettings nsga_settings(const EAParams& ea) {
  return {ea.population, ea.generations, ea.seed, ea.crossover_prob,
          ea.crossover_eta, ea.mutation_prob, ea.mutation_eta};
}

namespace detail {

inline void assign_rank_and_crowding(std::vector<Individual>& pop) {
  std::vector<ObjectiveVector> objs;
  for (const auto& ind : pop) objs.push_back(ind.objectives);
  const auto fronts = fast_nondominated_sort(objs);
  for (std::size_t r = 0; r < fronts.size(); ++r) {
    std::vector<ObjectiveVector> fo;
    for (auto i : fronts[r]) fo.push_back(pop[i].objectives);
    const auto cd = crowding_distance(fo);
    for (std::size_t k = 0; k < fronts[r].size(); ++k) {
      pop[fronts[r][k]].rank = static_cast<int>(r);
      pop[fronts[r][k]].crowding = cd[k];
    }
  }
}

/// Lower rank wins, then larger crowding, then lower index.
inline std::size_t binary_tournament(const std::vector<Individual>& pop, Rng& rng) {
  const auto a = static_cast<std::size_t>(rng.uniform_below(pop.size()));
  const auto b = static_cast<std::size_t>(rng.uniform_below(pop.size()));
  const auto& x = pop[a];
  const auto& y = pop[b];
  if (x.rank != y.rank) return x.rank < y.rank ? a : b;
  if (x.crowding != y.crowding) return x.crowding > y.crowding ? a : b;
  return std::min(a, b);
}

/// Truncates to n by whole fronts, breaking the last front by descending
/// crowding (stable, so lower index wins ties).
inline std::vector<Individual> survive(std::vector<Individual> merged, std::size_t n) {
  std::vector<ObjectiveVector> objs;
  for (const auto& ind : merged) objs.push_back(ind.objectives);
  const auto fronts = fast_nondominated_sort(objs);
  std::vector<Individual> next;
  for (const auto& front : fronts) {
    if (next.size() + front.size() <= n) {
      for (auto i : front) next.push_back(merged[i]);
      if (next.size() == n) break;
      continue;
    }
    std::vector<ObjectiveVector> fo;
    for (auto i : front) fo.push_back(merged[i].objectives);
    const auto cd = crowding_distance(fo);
    std::vector<std::size_t> order(front.size());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return cd[a] > cd[b]; });
    for (std::size_t k = 0; next.size() < n; ++k) next.push_back(merged[front[order[k]]]);
    break;
  }
  assign_rank_and_crowding(next);
  return next;
}

inline std::vector<Individual> score(FitnessPipeline& fitness, std::vector<DigitGenome> genomes) {
  const auto scored = fitness.evaluate(genomes);
  std::vector<Individual> out;
  for (std::size_t i = 0; i < genomes.size(); ++i)
    out.push_back({std::move(genomes[i]), scored[i].objectives, scored[i].param_count, 0, 0.0});
  return out;
}

}  // namespace detail

/// Runs NSGA-II over `rep`, filling the remaining digits from `base`. Every
/// evaluated individual is offered to `archive`. `on_generation` sees the
/// initial population as generation 0 and then each of `generations`.
inline void run_nsga2(const Representation& rep, const DigitGenome& base,
                      const NsgaSettings& s, FitnessPipeline& fitness, ParetoArchive& archive,
                      const GenerationCallback& on_generation = {}) {
  if (s.population < 2 || s.population % 2 != 0)
    throw SearchError("population must be even and >= 2");
  Rng rng(s.seed);
  const auto& upper = rep.upper();

  std::vector<DigitGenome> init;
  for (std::uint32_t i = 0; i < s.population; ++i) {
    std::vector<double> v(rep.size());
    for (std::size_t k = 0; k < v.size(); ++k)
      v[k] = static_cast<double>(rng.uniform_below(static_cast<std::uint64_t>(upper[k]) + 1));
    init.push_back(rep.decode(v, base));
  }
  auto pop = detail::score(fitness, std::move(init));
  for (const auto& ind : pop) archive.offer(ind);
  detail::assign_rank_and_crowding(pop);

  const auto report = [&](std::uint32_t gen) {
    if (on_generation)
      on_generation({gen, fitness.evaluations(), archive.best_feasible_f1(), archive.size(),
                     archive.hypervolume()});
  };
  report(0);

  for (std::uint32_t gen = 1; gen <= s.generations; ++gen) {
    std::vector<DigitGenome> children;
    while (children.size() < s.population) {
      const auto a = detail::binary_tournament(pop, rng);
      const auto b = detail::binary_tournament(pop, rng);
      auto [c1, c2] = sbx_real(rep.encode(pop[a].genome), rep.encode(pop[b].genome), upper,
                               s.crossover_eta, s.crossover_prob, rng);
      for (auto* c : {&c1, &c2}) {
        for (std::size_t k = 0; k < c->size(); ++k) {
          (*c)[k] = round_to_bounds((*c)[k], upper[k]);
          if (upper[k] > 0.0 && rng.uniform01() < s.mutation_prob)
            (*c)[k] = polynomial_mutation_real((*c)[k], 0.0, upper[k], s.mutation_eta, rng);
        }
        children.push_back(rep.decode(*c, base));
      }
    }
    auto offspring = detail::score(fitness, std::move(children));
    for (const auto& ind : offspring) archive.offer(ind);
    auto merged = std::move(pop);
    merged.insert(merged.end(), offspring.begin(), offspring.end());
    pop = detail::survive(std::move(merged), s.population);
    report(gen);
  }
}

/// The whole genome searched at once.
inline SearchResult evolve_single_loop(const SearchConfig& cfg, Evaluator& evaluator,
                                       const GenerationCallback& on_generation = {}) {
  const GenomeLayout layout(cfg.params);
  const auto rep = make_representation(layout, cfg.ea.mode, all_positions(layout));
  FitnessPipeline fitness(cfg, evaluator);
  SearchResult result;
  run_nsga2(rep, zero_genome(cfg.params), nsga_settings(cfg.ea), fitness, result.archive,
            [&](const GenerationStats& st) {
              result.log.push_back(st);
              if (on_generation) on_generation(st);
            });
  result.evaluations = fitness.evaluations();
  return result;
}

/// Pareto front over the layer structure with the cell genes of `cells`
/// frozen: exhaustive enumeration or an inner NSGA-II run.
inline ParetoArchive inner_front(const DigitGenome& cells, const SearchConfig& cfg,
                                 FitnessPipeline& fitness, const InnerBudget& budget,
                                 std::uint64_t seed) {
  const GenomeLayout layout(cfg.params);
  ParetoArchive front;
  if (budget.exhaustive) {
    const auto positions = structure_positions(layout);
    std::vector<DigitGenome> all;
    DigitGenome g = cells;
    for (auto pos : positions) g.digits[pos] = 0;
    while (true) {
      all.push_back(g);
      std::size_t k = 0;
      for (; k < positions.size(); ++k) {
        if (++g.digits[positions[k]] < layout.radix(positions[k])) break;
        g.digits[positions[k]] = 0;
      }
      if (k == positions.size()) break;
    }
    for (const auto& ind : detail::score(fitness, std::move(all))) front.offer(ind);
    return front;
  }
  const auto rep = make_representation(layout, cfg.ea.mode, structure_positions(layout));
  NsgaSettings s = nsga_settings(cfg.ea);
  s.population = budget.population;
  s.generations = budget.generations;
  s.seed = seed;
  run_nsga2(rep, cells, s, fitness, front);
  return front;
}

/// Outer EA over cell genes (block digits and reduction values), maximizing
/// the hypervolume at (1, 1) of the inner structure front. Returns the
/// non-dominated union of all inner fronts.
inline SearchResult evolve_two_phase(const SearchConfig& cfg, Evaluator& evaluator,
                                     const GenerationCallback& on_generation = {}) {
  const GenomeLayout layout(cfg.params);
  const auto rep = make_representation(layout, cfg.ea.mode, cell_positions(layout));
  const auto& upper = rep.upper();
  const auto& ea = cfg.ea;
  FitnessPipeline fitness(cfg, evaluator);
  SearchResult result;
  Rng rng(ea.seed);
  const DigitGenome base = zero_genome(cfg.params);

  struct Member {
    DigitGenome cells;
    double hv = 0.0;
  };
  std::map<DigitGenome, double> hv_memo;
  const auto assess = [&](std::vector<DigitGenome> cellsets) {
    std::vector<Member> out;
    for (auto& c : cellsets) {
      for (auto pos : structure_positions(layout)) c.digits[pos] = 0;
      auto it = hv_memo.find(c);
      if (it == hv_memo.end()) {
        const auto front = inner_front(c, cfg, fitness, ea.inner_budget, rng.next());
        for (const auto& ind : front.entries()) result.archive.offer(ind);
        it = hv_memo.emplace(c, front.hypervolume()).first;
      }
      out.push_back({c, it->second});
    }
    return out;
  };
  const auto report = [&](std::uint32_t gen) {
    GenerationStats st{gen, fitness.evaluations(), result.archive.best_feasible_f1(),
                       result.archive.size(), result.archive.hypervolume()};
    result.log.push_back(st);
    if (on_generation) on_generation(st);
  };

  std::vector<DigitGenome> init;
  for (std::uint32_t i = 0; i < ea.population; ++i) {
    std::vector<double> v(rep.size());
    for (std::size_t k = 0; k < v.size(); ++k)
      v[k] = static_cast<double>(rng.uniform_below(static_cast<std::uint64_t>(upper[k]) + 1));
    init.push_back(rep.decode(v, base));
  }
  auto pop = assess(std::move(init));
  report(0);

  const auto tournament = [&] {
    const auto a = static_cast<std::size_t>(rng.uniform_below(pop.size()));
    const auto b = static_cast<std::size_t>(rng.uniform_below(pop.size()));
    if (pop[a].hv != pop[b].hv) return pop[a].hv > pop[b].hv ? a : b;
    return std::min(a, b);
  };

  for (std::uint32_t gen = 1; gen <= ea.generations; ++gen) {
    std::vector<DigitGenome> children;
    while (children.size() < ea.population) {
      const auto a = tournament();
      const auto b = tournament();
      auto [c1, c2] = sbx_real(rep.encode(pop[a].cells), rep.encode(pop[b].cells), upper,
                               ea.crossover_eta, ea.crossover_prob, rng);
      for (auto* c : {&c1, &c2}) {
        for (std::size_t k = 0; k < c->size(); ++k) {
          (*c)[k] = round_to_bounds((*c)[k], upper[k]);
          if (upper[k] > 0.0 && rng.uniform01() < ea.mutation_prob)
            (*c)[k] = polynomial_mutation_real((*c)[k], 0.0, upper[k], ea.mutation_eta, rng);
        }
        children.push_back(rep.decode(*c, base));
      }
    }
    auto offspring = assess(std::move(children));
    pop.insert(pop.end(), offspring.begin(), offspring.end());
    std::stable_sort(pop.begin(), pop.end(),
                     [](const Member& x, const Member& y) { return x.hv > y.hv; });
    pop.resize(ea.population);
    report(gen);
  }
  result.evaluations = fitness.evaluations();
  return result;
}

inline SearchResult run_search(const SearchConfig& cfg, Evaluator& evaluator,
                               const GenerationCallback& on_generation = {}) {
  if (cfg.ea.strategy == SearchStrategy::two_phase)
    return evolve_two_phase(cfg, evaluator, on_generation);
  return evolve_single_loop(cfg, evaluator, on_generation);
}

/// Exact constrained-non-dominated set by enumerating every genome.
inline ParetoArchive brute_force_pareto(const SearchConfig& cfg, Evaluator& evaluator,
                                        std::uint64_t limit = 100000) {
  const auto total = total_cardinality(cfg.params);
  if (total > limit)
    throw SearchError("space has " + total.str() + " genomes, above the enumeration limit " +
                      std::to_string(limit));
  const GenomeLayout layout(cfg.params);
  FitnessPipeline fitness(cfg, evaluator);
  ParetoArchive archive;
  DigitGenome g = zero_genome(cfg.params);
  bool more = true;
  while (more) {
    std::vector<DigitGenome> batch;
    while (more && batch.size() < 4096) {
      batch.push_back(g);
      more = increment(g, layout);
    }
    for (const auto& ind : detail::score(fitness, std::move(batch))) archive.offer(ind);
  }
  return archive;
}

}  // namespace cellspace
