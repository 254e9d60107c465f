#pragma once

// Genome representations and the maps between them.
//
//   DigitGenome   one small integer per decision point (canonical form)
//   PackedGenome  one big integer per structure / pipeline / reduction gene
//   ArchitecturePlan  the symbolic architecture both forms describe
//
// Digit order (flat): the L_c structure digits, then block digits ordered by
// (cell, pipeline, block layer), then one reduction value per cell.
// Within a packed gene digits are little-endian: digit 0 is the first layer.
// Within a digit the catalog choice is the minor index and the
// option/mode the major one: d = choice + catalog_size * option.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "rng.hpp"
#include "space_config.hpp"

namespace cellspace {

class GenomeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DigitGenome {
  std::vector<std::uint32_t> digits;

  friend bool operator==(const DigitGenome&, const DigitGenome&) = default;
  friend auto operator<=>(const DigitGenome&, const DigitGenome&) = default;
};

/// Packed gene vector: [x, x_11 .. x_1Lp, r_1, x_21 .. r_2, ...].
struct PackedGenome {
  std::vector<BigInt> genes;

  friend bool operator==(const PackedGenome&, const PackedGenome&) = default;
};

/// Position and radix of every digit for one SpaceParams.
class GenomeLayout {
 public:
  explicit GenomeLayout(const SpaceParams& p) : params_(p) {
    const auto s = structure_radix(p);
    const auto b = block_radix(p);
    const auto r = static_cast<std::uint64_t>(reduction_cardinality(p));
    radices_.assign(p.cell_layers, s);
    radices_.insert(radices_.end(), std::size_t{p.cells} * p.pipelines * p.block_layers, b);
    radices_.insert(radices_.end(), p.cells, r);
  }

  const SpaceParams& params() const { return params_; }
  std::size_t size() const { return radices_.size(); }
  std::uint64_t radix(std::size_t i) const { return radices_[i]; }
  const std::vector<std::uint64_t>& radices() const { return radices_; }

  std::size_t structure_index(std::size_t layer) const { return layer; }
  std::size_t block_index(std::size_t cell, std::size_t pipeline, std::size_t layer) const {
    return params_.cell_layers +
           (cell * params_.pipelines + pipeline) * params_.block_layers + layer;
  }
  std::size_t reduction_index(std::size_t cell) const {
    return params_.cell_layers +
           std::size_t{params_.cells} * params_.pipelines * params_.block_layers + cell;
  }
  /// Number of genes in the packed form: 1 + N_c * (L_p + 1).
  std::size_t packed_size() const { return 1 + std::size_t{params_.cells} * (params_.pipelines + 1); }

 private:
  SpaceParams params_;
  std::vector<std::uint64_t> radices_;
};

// ---------------------------------------------------------------------------
// Symbolic plan.

struct LayerPlan {
  std::uint32_t cell = 0;
  std::uint32_t sampling = 0;  // index into SearchConfig::sampling_modes

  friend auto operator<=>(const LayerPlan&, const LayerPlan&) = default;
};

struct BlockChoice {
  std::uint32_t block = 0;
  std::uint32_t option = 0;

  friend auto operator<=>(const BlockChoice&, const BlockChoice&) = default;
};

struct ReductionPlan {
  enum class Placement { before_merge, after_merge };
  Placement placement = Placement::before_merge;
  std::vector<std::uint32_t> blocks;  // L_r entries before the merge, 1 after it
  std::uint32_t merge = 0;

  friend auto operator<=>(const ReductionPlan&, const ReductionPlan&) = default;
};

struct CellPlan {
  std::vector<std::vector<BlockChoice>> pipelines;
  ReductionPlan reduction;

  friend auto operator<=>(const CellPlan&, const CellPlan&) = default;
};

struct ArchitecturePlan {
  std::vector<LayerPlan> layers;
  std::vector<CellPlan> cells;

  friend auto operator<=>(const ArchitecturePlan&, const ArchitecturePlan&) = default;
};

// ---------------------------------------------------------------------------
// Digit-level decoding.

inline LayerPlan decode_structure_digit(std::uint64_t d, const SpaceParams& p) {
  return {static_cast<std::uint32_t>(d % p.cells), static_cast<std::uint32_t>(d / p.cells)};
}

inline BlockChoice decode_block_digit(std::uint64_t d, const SpaceParams& p) {
  return {static_cast<std::uint32_t>(d % p.blocks), static_cast<std::uint32_t>(d / p.blocks)};
}

inline ReductionPlan decode_reduction_value(std::uint64_t r, const SpaceParams& p) {
  const std::uint64_t nr = p.reduction_blocks;
  std::uint64_t branch_codes = 1;
  for (std::uint32_t i = 0; i < p.reduction_layers; ++i) branch_codes *= nr;
  ReductionPlan plan;
  if (r < std::uint64_t{p.merge_modes} * branch_codes) {
    plan.placement = ReductionPlan::Placement::before_merge;
    plan.merge = static_cast<std::uint32_t>(r / branch_codes);
    auto rest = r % branch_codes;
    plan.blocks.resize(p.reduction_layers);
    for (auto& b : plan.blocks) {
      b = static_cast<std::uint32_t>(rest % nr);
      rest /= nr;
    }
  } else {
    const auto rr = r - std::uint64_t{p.merge_modes} * branch_codes;
    plan.placement = ReductionPlan::Placement::after_merge;
    plan.merge = static_cast<std::uint32_t>(rr / nr);
    plan.blocks = {static_cast<std::uint32_t>(rr % nr)};
  }
  return plan;
}

namespace detail {

inline std::vector<std::uint64_t> split_digits(BigInt value, std::uint64_t radix,
                                               std::size_t count) {
  std::vector<std::uint64_t> out(count);
  for (auto& d : out) {
    d = static_cast<std::uint64_t>(value % radix);
    value /= radix;
  }
  return out;
}

inline BigInt join_digits(const std::uint32_t* digits, std::size_t count, std::uint64_t radix) {
  BigInt v = 0;
  for (std::size_t k = count; k-- > 0;) v = v * radix + digits[k];
  return v;
}

inline void check_gene(const BigInt& v, const BigInt& bound, const std::string& what) {
  if (v < 0 || v >= bound)
    throw GenomeError(what + " " + v.str() + " outside [0, " + bound.str() + ")");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Gene-level decoding.

/// Structure gene x in [0, (P_c N_c)^L_c) -> one (cell, sampling mode) per
/// layer, little-endian base P_c N_c.
inline std::vector<LayerPlan> decode_structure_gene(const BigInt& x, const SpaceParams& p) {
  detail::check_gene(x, structure_cardinality(p), "structure gene");
  std::vector<LayerPlan> out;
  for (auto d : detail::split_digits(x, structure_radix(p), p.cell_layers))
    out.push_back(decode_structure_digit(d, p));
  return out;
}

/// Pipeline gene in [0, (P_B N_B)^L_B) -> one (block, option) per block layer.
inline std::vector<BlockChoice> decode_pipeline_gene(const BigInt& x, const SpaceParams& p) {
  detail::check_gene(x, pipeline_cardinality(p), "pipeline gene");
  std::vector<BlockChoice> out;
  for (auto d : detail::split_digits(x, block_radix(p), p.block_layers))
    out.push_back(decode_block_digit(d, p));
  return out;
}

/// Reduction gene in [0, P_r N_r^L_r + P_r N_r). Codes below P_r N_r^L_r place
/// one reduction block per branch before the merge; the rest place a single
/// block after it.
inline ReductionPlan decode_reduction_gene(const BigInt& r, const SpaceParams& p) {
  detail::check_gene(r, reduction_cardinality(p), "reduction gene");
  return decode_reduction_value(static_cast<std::uint64_t>(r), p);
}

// ---------------------------------------------------------------------------
// Validation, packing.

inline void validate_genome(const DigitGenome& g, const GenomeLayout& layout) {
  if (g.digits.size() != layout.size())
    throw GenomeError("genome has " + std::to_string(g.digits.size()) + " digits, expected " +
                      std::to_string(layout.size()));
  for (std::size_t i = 0; i < g.digits.size(); ++i)
    if (g.digits[i] >= layout.radix(i))
      throw GenomeError("digit " + std::to_string(i) + " = " + std::to_string(g.digits[i]) +
                        " outside radix " + std::to_string(layout.radix(i)));
}

inline PackedGenome pack(const DigitGenome& g, const SpaceParams& p) {
  const GenomeLayout layout(p);
  validate_genome(g, layout);
  PackedGenome out;
  out.genes.reserve(layout.packed_size());
  out.genes.push_back(detail::join_digits(g.digits.data(), p.cell_layers, structure_radix(p)));
  for (std::uint32_t c = 0; c < p.cells; ++c) {
    for (std::uint32_t j = 0; j < p.pipelines; ++j)
      out.genes.push_back(detail::join_digits(&g.digits[layout.block_index(c, j, 0)],
                                              p.block_layers, block_radix(p)));
    out.genes.emplace_back(g.digits[layout.reduction_index(c)]);
  }
  return out;
}

inline DigitGenome unpack(const PackedGenome& packed, const SpaceParams& p) {
  const GenomeLayout layout(p);
  if (packed.genes.size() != layout.packed_size())
    throw GenomeError("packed genome has " + std::to_string(packed.genes.size()) +
                      " genes, expected " + std::to_string(layout.packed_size()));
  const auto pipe_bound = pipeline_cardinality(p);
  const auto red_bound = reduction_cardinality(p);
  DigitGenome g;
  g.digits.resize(layout.size());

  detail::check_gene(packed.genes[0], structure_cardinality(p), "structure gene");
  auto s = detail::split_digits(packed.genes[0], structure_radix(p), p.cell_layers);
  for (std::size_t k = 0; k < s.size(); ++k) g.digits[k] = static_cast<std::uint32_t>(s[k]);

  std::size_t gi = 1;
  for (std::uint32_t c = 0; c < p.cells; ++c) {
    for (std::uint32_t j = 0; j < p.pipelines; ++j, ++gi) {
      detail::check_gene(packed.genes[gi], pipe_bound, "pipeline gene");
      auto ds = detail::split_digits(packed.genes[gi], block_radix(p), p.block_layers);
      for (std::uint32_t k = 0; k < p.block_layers; ++k)
        g.digits[layout.block_index(c, j, k)] = static_cast<std::uint32_t>(ds[k]);
    }
    detail::check_gene(packed.genes[gi], red_bound, "reduction gene");
    g.digits[layout.reduction_index(c)] = static_cast<std::uint32_t>(packed.genes[gi]);
    ++gi;
  }
  return g;
}

/// Upper bound (exclusive) of each packed gene, in packed order.
inline std::vector<BigInt> packed_bounds(const SpaceParams& p) {
  std::vector<BigInt> out{structure_cardinality(p)};
  const auto pipe = pipeline_cardinality(p);
  const auto red = reduction_cardinality(p);
  for (std::uint32_t c = 0; c < p.cells; ++c) {
    for (std::uint32_t j = 0; j < p.pipelines; ++j) out.push_back(pipe);
    out.push_back(red);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Decoding to a plan.

/// Total on in-range genomes and injective: distinct genomes give distinct plans.
inline ArchitecturePlan decode(const DigitGenome& g, const SearchConfig& cfg) {
  const auto& p = cfg.params;
  const GenomeLayout layout(p);
  validate_genome(g, layout);
  ArchitecturePlan plan;
  for (std::uint32_t k = 0; k < p.cell_layers; ++k)
    plan.layers.push_back(decode_structure_digit(g.digits[layout.structure_index(k)], p));
  plan.cells.resize(p.cells);
  for (std::uint32_t c = 0; c < p.cells; ++c) {
    auto& cell = plan.cells[c];
    cell.pipelines.resize(p.pipelines);
    for (std::uint32_t j = 0; j < p.pipelines; ++j)
      for (std::uint32_t k = 0; k < p.block_layers; ++k)
        cell.pipelines[j].push_back(decode_block_digit(g.digits[layout.block_index(c, j, k)], p));
    cell.reduction = decode_reduction_value(g.digits[layout.reduction_index(c)], p);
  }
  return plan;
}

// ---------------------------------------------------------------------------
// Sampling, enumeration, hashing.

/// Each digit drawn independently and uniformly over its radix, in flat order,
/// with Rng::uniform_below.
inline DigitGenome random_genome(Rng& rng, const GenomeLayout& layout) {
  DigitGenome g;
  g.digits.resize(layout.size());
  for (std::size_t i = 0; i < layout.size(); ++i)
    g.digits[i] = static_cast<std::uint32_t>(rng.uniform_below(layout.radix(i)));
  return g;
}

inline DigitGenome random_genome(std::uint64_t seed, const SpaceParams& p) {
  Rng rng(seed);
  return random_genome(rng, GenomeLayout(p));
}

inline DigitGenome zero_genome(const SpaceParams& p) {
  return DigitGenome{std::vector<std::uint32_t>(GenomeLayout(p).size(), 0)};
}

/// Mixed-radix increment (digit 0 fastest). Returns false after wrapping
/// back to all zeros.
inline bool increment(DigitGenome& g, const GenomeLayout& layout) {
  for (std::size_t i = 0; i < g.digits.size(); ++i) {
    if (++g.digits[i] < layout.radix(i)) return true;
    g.digits[i] = 0;
  }
  return false;
}

inline constexpr std::uint64_t kFnvOffsetBasis = 14695981039346656037ull;
inline constexpr std::uint64_t kFnvPrime = 1099511628211ull;

inline std::uint64_t fnv1a64(const unsigned char* data, std::size_t n,
                             std::uint64_t h = kFnvOffsetBasis) {
  for (std::size_t i = 0; i < n; ++i) {
    h ^= data[i];
    h *= kFnvPrime;
  }
  return h;
}

/// FNV-1a 64 over the digits serialized as 4-byte big-endian words.
inline std::uint64_t genome_hash(const DigitGenome& g) {
  std::uint64_t h = kFnvOffsetBasis;
  for (auto d : g.digits) {
    const unsigned char bytes[4] = {static_cast<unsigned char>(d >> 24),
                                    static_cast<unsigned char>(d >> 16),
                                    static_cast<unsigned char>(d >> 8),
                                    static_cast<unsigned char>(d)};
    h = fnv1a64(bytes, 4, h);
  }
  return h;
}

// ---------------------------------------------------------------------------
// JSON.

inline Json to_json(const DigitGenome& g) { return Json{{"digits", g.digits}}; }

inline Json to_json(const PackedGenome& p) {
  Json genes = Json::array();
  for (const auto& v : p.genes) genes.push_back(v.str());
  return Json{{"packed", std::move(genes)}};
}

inline PackedGenome packed_from_strings(const std::vector<std::string>& genes) {
  PackedGenome p;
  for (const auto& s : genes) {
    if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos)
      throw GenomeError("packed gene \"" + s + "\" is not a non-negative decimal integer");
    p.genes.emplace_back(s);
  }
  return p;
}

/// Accepts {"digits": [...]} or {"packed": ["<decimal>", ...]} (or both, which
/// must agree). Validates against the layout.
inline DigitGenome genome_from_json(const Json& j, const SpaceParams& p) {
  if (!j.is_object()) throw GenomeError("genome JSON must be an object");
  std::optional<DigitGenome> from_digits, from_packed;
  if (auto it = j.find("digits"); it != j.end()) {
    if (!it->is_array()) throw GenomeError("\"digits\" must be an array");
    DigitGenome g;
    for (const auto& d : *it) {
      if (!d.is_number_integer() || d.get<long long>() < 0 ||
          d.get<long long>() > 0xffffffffLL)
        throw GenomeError("digits must be unsigned 32-bit integers");
      g.digits.push_back(d.get<std::uint32_t>());
    }
    validate_genome(g, GenomeLayout(p));
    from_digits = std::move(g);
  }
  if (auto it = j.find("packed"); it != j.end()) {
    if (!it->is_array()) throw GenomeError("\"packed\" must be an array");
    std::vector<std::string> genes;
    for (const auto& v : *it) {
      if (v.is_string())
        genes.push_back(v.get<std::string>());
      else if (v.is_number_unsigned())
        genes.push_back(std::to_string(v.get<std::uint64_t>()));
      else
        throw GenomeError("packed genes must be decimal strings");
    }
    from_packed = unpack(packed_from_strings(genes), p);
  }
  if (from_digits && from_packed && *from_digits != *from_packed)
    throw GenomeError("\"digits\" and \"packed\" describe different genomes");
  if (from_digits) return *from_digits;
  if (from_packed) return *from_packed;
  throw GenomeError("genome JSON needs \"digits\" or \"packed\"");
}

}  // namespace cellspace
