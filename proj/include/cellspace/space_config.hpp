#pragma once

// Declarative definition of a cell-based search space: the block and
// reduction catalogs, the layer counts of every level of the hierarchy,
// the classifier head, the parameter budget and the evolutionary-search
// settings. Everything here is an immutable value once loaded.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "json.hpp"

namespace cellspace {

using BigInt = boost::multiprecision::cpp_int;
using Json = nlohmann::json;

enum class OpKind { conv2d, depthwise_sep_conv2d, maxpool, identity };
enum class Activation { none, relu_before, relu_after };
enum class MergeMode { add, concat };
enum class SamplingMode { same, down, up };
enum class HeadActivation { none, relu, softmax };
enum class VariationMode { digit, packed };
enum class SearchStrategy { single_loop, two_phase };

/// A square, padded operation. Identity carries kernel 1.
struct Operation {
  OpKind kind = OpKind::identity;
  int kernel = 1;

  friend bool operator==(const Operation&, const Operation&) = default;
};

struct Block {
  std::string name;
  Operation op;

  friend bool operator==(const Block&, const Block&) = default;
};

/// How a block is wrapped. A skipped block is a pure identity, so skip
/// excludes batch_norm and any activation.
struct BlockOption {
  bool skip = false;
  bool batch_norm = false;
  Activation activation = Activation::none;

  friend bool operator==(const BlockOption&, const BlockOption&) = default;
};

struct TensorShape {
  std::int64_t h = 0;
  std::int64_t w = 0;
  std::int64_t c = 0;

  bool valid() const { return h >= 1 && w >= 1 && c >= 1; }
  std::int64_t elements() const { return h * w * c; }
  friend bool operator==(const TensorShape&, const TensorShape&) = default;
};

struct HeadLayer {
  enum class Kind { dense, dropout };
  Kind kind = Kind::dense;
  int units = 0;                                  // dense only
  HeadActivation activation = HeadActivation::none;  // dense only
  double rate = 0.0;                              // dropout only

  static HeadLayer dense(int units, HeadActivation act) {
    return {Kind::dense, units, act, 0.0};
  }
  static HeadLayer dropout(double rate) {
    return {Kind::dropout, 0, HeadActivation::none, rate};
  }
  friend bool operator==(const HeadLayer&, const HeadLayer&) = default;
};

/// Counts of every level of the hierarchy.
///
///   cell_layers      L_c  cell layers stacked in series
///   cells            N_c  distinct cells searched
///   sampling_modes   P_c  same / down / up choices per layer
///   pipelines        L_p  parallel pipelines per cell
///   block_layers     L_B  blocks in series per pipeline
///   blocks           N_B  block catalog size
///   block_options    P_B  block option catalog size
///   reduction_layers L_r  reduction blocks before the merge
///   reduction_blocks N_r  reduction block catalog size
///   merge_modes      P_r  add / concat choices
///
/// The catalog-derived counts (N_B, P_B, N_r, P_r, P_c) always equal the
/// lengths of the corresponding SearchConfig lists.
struct SpaceParams {
  std::uint32_t cell_layers = 1;
  std::uint32_t cells = 1;
  std::uint32_t sampling_modes = 1;
  std::uint32_t pipelines = 1;
  std::uint32_t block_layers = 1;
  std::uint32_t blocks = 1;
  std::uint32_t block_options = 1;
  std::uint32_t reduction_layers = 1;
  std::uint32_t reduction_blocks = 1;
  std::uint32_t merge_modes = 1;

  friend bool operator==(const SpaceParams&, const SpaceParams&) = default;
};

struct InnerBudget {
  std::uint32_t population = 8;
  std::uint32_t generations = 20;
  // Enumerate every structure assignment instead of running the inner EA.
  bool exhaustive = false;

  friend bool operator==(const InnerBudget&, const InnerBudget&) = default;
};

struct TrainingBudget {
  int epochs = 10;
  int batch_size = 128;
  double dropout = 0.7;

  friend bool operator==(const TrainingBudget&, const TrainingBudget&) = default;
};

struct EAParams {
  std::uint32_t population = 20;
  std::uint32_t generations = 1000;
  std::uint64_t seed = 1;
  double crossover_prob = 1.0;
  double crossover_eta = 3.0;
  double mutation_prob = 1.0;
  double mutation_eta = 3.0;
  VariationMode mode = VariationMode::digit;
  SearchStrategy strategy = SearchStrategy::single_loop;
  InnerBudget inner_budget;
  double eval_timeout_s = 3600.0;
  TrainingBudget training;

  friend bool operator==(const EAParams&, const EAParams&) = default;
};

struct SearchConfig {
  SpaceParams params;
  std::vector<Block> blocks;
  std::vector<BlockOption> block_options;
  std::vector<Operation> reduction_blocks;
  std::vector<MergeMode> merge_modes;
  std::vector<SamplingMode> sampling_modes;
  bool allow_mismatched_reduction_layers = false;
  TensorShape input_shape{28, 28, 1};
  int stem_filters = 32;
  std::vector<HeadLayer> head;
  std::uint64_t total_param = 150000000;
  EAParams ea;

  friend bool operator==(const SearchConfig&, const SearchConfig&) = default;
};

/// Raised for unreadable, malformed or invalid configuration. key() names the
/// offending JSON key (dotted path) when there is one.
class ConfigError : public std::runtime_error {
 public:
  enum class Kind { io, parse, validation };

  ConfigError(Kind kind, std::string key, const std::string& what)
      : std::runtime_error(key.empty() ? what : key + ": " + what),
        kind_(kind),
        key_(std::move(key)) {}

  Kind kind() const { return kind_; }
  const std::string& key() const { return key_; }

 private:
  Kind kind_;
  std::string key_;
};

// ---------------------------------------------------------------------------
// Cardinalities. All exact; realistic spaces overflow 64 bits.

/// (P_B * N_B)^L_B architectures for one pipeline.
inline BigInt pipeline_cardinality(const SpaceParams& p) {
  return boost::multiprecision::pow(BigInt(p.block_options) * p.blocks,
                                    p.block_layers);
}

/// P_r * N_r^L_r + P_r * N_r: reduction blocks before the merge (one per
/// branch) or a single reduction block after it.
inline BigInt reduction_cardinality(const SpaceParams& p) {
  const BigInt nr = p.reduction_blocks;
  return BigInt(p.merge_modes) * boost::multiprecision::pow(nr, p.reduction_layers) +
         BigInt(p.merge_modes) * nr;
}

/// (P_B * N_B)^(L_B * L_p).
inline BigInt conv_part_cardinality(const SpaceParams& p) {
  return boost::multiprecision::pow(BigInt(p.block_options) * p.blocks,
                                    p.block_layers * p.pipelines);
}

/// (P_c * N_c)^L_c ways to fill the cell layers.
inline BigInt structure_cardinality(const SpaceParams& p) {
  return boost::multiprecision::pow(BigInt(p.sampling_modes) * p.cells,
                                    p.cell_layers);
}

/// Per-cell complexity of the two-loop formulation, reported as
/// (P_B*N_B)^L_B + P_r*N_r*(N_r^L_r + 1). Diagnostic only: the conv term has
/// no L_p exponent and the reduction term differs from reduction_cardinality,
/// which is what the codec actually enumerates.
inline BigInt cell_complexity(const SpaceParams& p) {
  const BigInt nr = p.reduction_blocks;
  return pipeline_cardinality(p) +
         BigInt(p.merge_modes) * nr *
             (boost::multiprecision::pow(nr, p.reduction_layers) + 1);
}

/// Number of distinct genomes:
/// structure * (pipeline^L_p * reduction)^N_c.
inline BigInt total_cardinality(const SpaceParams& p) {
  const BigInt per_cell = conv_part_cardinality(p) * reduction_cardinality(p);
  return structure_cardinality(p) * boost::multiprecision::pow(per_cell, p.cells);
}

// ---------------------------------------------------------------------------
// Enum <-> tag tables.

namespace detail {

template <class E>
struct EnumTag {
  E value;
  std::string_view tag;
};

inline constexpr EnumTag<OpKind> kOpKindTags[] = {
    {OpKind::conv2d, "conv2d"},
    {OpKind::depthwise_sep_conv2d, "depthwise_sep_conv2d"},
    {OpKind::maxpool, "maxpool"},
    {OpKind::identity, "identity"}};
inline constexpr EnumTag<Activation> kActivationTags[] = {
    {Activation::none, "none"},
    {Activation::relu_before, "relu_before"},
    {Activation::relu_after, "relu_after"}};
inline constexpr EnumTag<MergeMode> kMergeTags[] = {{MergeMode::add, "add"},
                                                    {MergeMode::concat, "concat"}};
inline constexpr EnumTag<SamplingMode> kSamplingTags[] = {
    {SamplingMode::same, "same"}, {SamplingMode::down, "down"}, {SamplingMode::up, "up"}};
inline constexpr EnumTag<HeadActivation> kHeadActTags[] = {
    {HeadActivation::none, "none"},
    {HeadActivation::relu, "relu"},
    {HeadActivation::softmax, "softmax"}};
inline constexpr EnumTag<VariationMode> kModeTags[] = {{VariationMode::digit, "digit"},
                                                       {VariationMode::packed, "packed"}};
inline constexpr EnumTag<SearchStrategy> kStrategyTags[] = {
    {SearchStrategy::single_loop, "single_loop"},
    {SearchStrategy::two_phase, "two_phase"}};

template <class E, std::size_t N>
std::string_view tag_of(const EnumTag<E> (&table)[N], E value) {
  for (const auto& e : table)
    if (e.value == value) return e.tag;
  return "?";
}

template <class E, std::size_t N>
E parse_tag(const EnumTag<E> (&table)[N], const Json& j, const std::string& key) {
  if (!j.is_string())
    throw ConfigError(ConfigError::Kind::validation, key, "expected a string tag");
  const auto s = j.get<std::string>();
  for (const auto& e : table)
    if (e.tag == s) return e.value;
  throw ConfigError(ConfigError::Kind::validation, key, "unknown tag \"" + s + "\"");
}

inline void invalid(const std::string& key, const std::string& what) {
  throw ConfigError(ConfigError::Kind::validation, key, what);
}

inline std::string join_key(const std::string& ctx, std::string_view name) {
  return ctx.empty() ? std::string(name) : ctx + "." + std::string(name);
}

inline std::string index_key(const std::string& ctx, std::size_t i) {
  return ctx + "[" + std::to_string(i) + "]";
}

inline void check_object(const Json& j, const std::string& key,
                         std::initializer_list<std::string_view> allowed) {
  if (!j.is_object()) invalid(key.empty() ? "<root>" : key, "expected an object");
  for (const auto& [k, v] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), k) == allowed.end())
      invalid(join_key(key, k), "unknown key");
  }
}

inline const Json& require(const Json& obj, std::string_view name, const std::string& ctx) {
  const auto it = obj.find(std::string(name));
  if (it == obj.end()) invalid(join_key(ctx, name), "missing required key");
  return *it;
}

template <class T>
T get_integer(const Json& obj, std::string_view name, const std::string& ctx,
              std::optional<T> fallback, long long min_value) {
  const auto key = join_key(ctx, name);
  const auto it = obj.find(std::string(name));
  if (it == obj.end()) {
    if (!fallback) invalid(key, "missing required key");
    return *fallback;
  }
  if (!it->is_number_integer()) invalid(key, "expected an integer");
  if (it->is_number_unsigned()) {
    const auto v = it->get<std::uint64_t>();
    if (static_cast<long double>(v) < static_cast<long double>(min_value))
      invalid(key, "must be >= " + std::to_string(min_value));
    return static_cast<T>(v);
  }
  const auto v = it->get<long long>();
  if (v < min_value) invalid(key, "must be >= " + std::to_string(min_value));
  return static_cast<T>(v);
}

inline double get_number(const Json& obj, std::string_view name, const std::string& ctx,
                         std::optional<double> fallback) {
  const auto key = join_key(ctx, name);
  const auto it = obj.find(std::string(name));
  if (it == obj.end()) {
    if (!fallback) invalid(key, "missing required key");
    return *fallback;
  }
  if (!it->is_number()) invalid(key, "expected a number");
  return it->get<double>();
}

inline bool get_bool(const Json& obj, std::string_view name, const std::string& ctx,
                     bool fallback) {
  const auto it = obj.find(std::string(name));
  if (it == obj.end()) return fallback;
  if (!it->is_boolean()) invalid(join_key(ctx, name), "expected a boolean");
  return it->get<bool>();
}

inline const Json& require_list(const Json& root, std::string_view name) {
  const Json& list = require(root, name, "");
  if (!list.is_array()) invalid(std::string(name), "expected an array");
  if (list.empty()) invalid(std::string(name), "must not be empty");
  return list;
}

inline Operation parse_operation(const Json& j, const std::string& key,
                                 std::initializer_list<std::string_view> extra_keys) {
  std::vector<std::string_view> allowed{"op", "kernel"};
  allowed.insert(allowed.end(), extra_keys.begin(), extra_keys.end());
  if (!j.is_object()) invalid(key, "expected an object");
  for (const auto& [k, v] : j.items())
    if (std::find(allowed.begin(), allowed.end(), k) == allowed.end())
      invalid(join_key(key, k), "unknown key");
  Operation op;
  op.kind = parse_tag(kOpKindTags, require(j, "op", key), join_key(key, "op"));
  if (op.kind == OpKind::identity) {
    op.kernel = 1;
  } else {
    op.kernel = get_integer<int>(j, "kernel", key, std::nullopt, 1);
  }
  return op;
}

}  // namespace detail

inline std::string_view to_string(OpKind v) { return detail::tag_of(detail::kOpKindTags, v); }
inline std::string_view to_string(Activation v) {
  return detail::tag_of(detail::kActivationTags, v);
}
inline std::string_view to_string(MergeMode v) { return detail::tag_of(detail::kMergeTags, v); }
inline std::string_view to_string(SamplingMode v) {
  return detail::tag_of(detail::kSamplingTags, v);
}
inline std::string_view to_string(HeadActivation v) {
  return detail::tag_of(detail::kHeadActTags, v);
}
inline std::string_view to_string(VariationMode v) { return detail::tag_of(detail::kModeTags, v); }
inline std::string_view to_string(SearchStrategy v) {
  return detail::tag_of(detail::kStrategyTags, v);
}

// ---------------------------------------------------------------------------
// Validation.

/// Radix of a structure digit (one cell layer): P_c * N_c.
inline std::uint64_t structure_radix(const SpaceParams& p) {
  return std::uint64_t{p.sampling_modes} * p.cells;
}
/// Radix of a block digit (one block layer of one pipeline): P_B * N_B.
inline std::uint64_t block_radix(const SpaceParams& p) {
  return std::uint64_t{p.block_options} * p.blocks;
}

/// Checks every invariant of a config and re-derives the catalog counts.
/// Throws ConfigError naming the offending key.
inline void validate(SearchConfig& cfg) {
  using detail::invalid;
  auto& p = cfg.params;
  if (cfg.blocks.empty()) invalid("blocks", "must not be empty");
  if (cfg.block_options.empty()) invalid("block_options", "must not be empty");
  if (cfg.reduction_blocks.empty()) invalid("reduction_blocks", "must not be empty");
  if (cfg.merge_modes.empty()) invalid("merge_modes", "must not be empty");
  if (cfg.sampling_modes.empty()) invalid("sampling_modes", "must not be empty");
  if (cfg.head.empty()) invalid("head", "must not be empty");

  p.blocks = static_cast<std::uint32_t>(cfg.blocks.size());
  p.block_options = static_cast<std::uint32_t>(cfg.block_options.size());
  p.reduction_blocks = static_cast<std::uint32_t>(cfg.reduction_blocks.size());
  p.merge_modes = static_cast<std::uint32_t>(cfg.merge_modes.size());
  p.sampling_modes = static_cast<std::uint32_t>(cfg.sampling_modes.size());

  for (std::size_t i = 0; i < cfg.blocks.size(); ++i) {
    auto& op = cfg.blocks[i].op;
    if (op.kind == OpKind::identity) op.kernel = 1;
    if (op.kernel < 1) invalid(detail::index_key("blocks", i) + ".kernel", "must be >= 1");
  }
  for (std::size_t i = 0; i < cfg.block_options.size(); ++i) {
    const auto& o = cfg.block_options[i];
    if (o.skip && (o.batch_norm || o.activation != Activation::none))
      invalid(detail::index_key("block_options", i),
              "skip excludes batch_norm and activation");
  }
  for (std::size_t i = 0; i < cfg.reduction_blocks.size(); ++i) {
    auto& op = cfg.reduction_blocks[i];
    if (op.kind == OpKind::depthwise_sep_conv2d)
      invalid(detail::index_key("reduction_blocks", i) + ".op",
              "reduction blocks are maxpool, conv2d or identity");
    if (op.kind == OpKind::identity) op.kernel = 1;
    if (op.kernel < 1)
      invalid(detail::index_key("reduction_blocks", i) + ".kernel", "must be >= 1");
  }

  if (p.cell_layers < 1) invalid("layers.L_c", "must be >= 1");
  if (p.cells < 1) invalid("layers.N_c", "must be >= 1");
  if (p.pipelines < 1) invalid("layers.L_p", "must be >= 1");
  if (p.block_layers < 1) invalid("layers.L_B", "must be >= 1");
  if (p.reduction_layers < 1) invalid("layers.L_r", "must be >= 1");
  if (p.reduction_layers != p.pipelines && !cfg.allow_mismatched_reduction_layers)
    invalid("layers.L_r", "must equal L_p unless allow_mismatched_L_r is set");

  // Every digit is serialized as a 32-bit unsigned value.
  const BigInt digit_limit = BigInt(1) << 32;
  if (BigInt(structure_radix(p)) >= digit_limit)
    invalid("layers.N_c", "structure digit radix exceeds 2^32");
  if (BigInt(block_radix(p)) >= digit_limit)
    invalid("blocks", "block digit radix exceeds 2^32");
  if (reduction_cardinality(p) >= digit_limit)
    invalid("layers.L_r", "reduction digit radix exceeds 2^32");

  if (!cfg.input_shape.valid()) invalid("input_shape", "all dimensions must be >= 1");
  if (cfg.stem_filters < 1) invalid("stem_filters", "must be >= 1");
  for (std::size_t i = 0; i < cfg.head.size(); ++i) {
    const auto& l = cfg.head[i];
    if (l.kind == HeadLayer::Kind::dense && l.units < 1)
      invalid(detail::index_key("head", i) + ".units", "must be >= 1");
    if (l.kind == HeadLayer::Kind::dropout && !(l.rate >= 0.0 && l.rate < 1.0))
      invalid(detail::index_key("head", i) + ".rate", "must be in [0, 1)");
  }
  if (cfg.total_param == 0) invalid("objectives.total_param", "must be > 0");

  const auto& ea = cfg.ea;
  if (ea.population < 4 || ea.population % 2 != 0)
    invalid("ea.population", "must be even and >= 4");
  if (!(ea.crossover_prob >= 0.0 && ea.crossover_prob <= 1.0))
    invalid("ea.crossover_prob", "must be in [0, 1]");
  if (!(ea.mutation_prob >= 0.0 && ea.mutation_prob <= 1.0))
    invalid("ea.mutation_prob", "must be in [0, 1]");
  if (!(ea.crossover_eta > 0.0)) invalid("ea.crossover_eta", "must be > 0");
  if (!(ea.mutation_eta > 0.0)) invalid("ea.mutation_eta", "must be > 0");
  if (ea.inner_budget.population < 4 || ea.inner_budget.population % 2 != 0)
    invalid("ea.inner_budget.population", "must be even and >= 4");
  if (!(ea.eval_timeout_s > 0.0)) invalid("ea.eval_timeout_s", "must be > 0");
  if (ea.training.epochs < 0) invalid("ea.training.epochs", "must be >= 0");
  if (ea.training.batch_size < 1) invalid("ea.training.batch_size", "must be >= 1");
  if (!(ea.training.dropout >= 0.0 && ea.training.dropout < 1.0))
    invalid("ea.training.dropout", "must be in [0, 1)");
}

// ---------------------------------------------------------------------------
// JSON.

/// Builds and validates a config from its JSON document. Unknown keys are
/// rejected at every level.
inline SearchConfig config_from_json(const Json& root) {
  using namespace detail;
  check_object(root, "",
               {"blocks", "block_options", "reduction_blocks", "merge_modes",
                "sampling_modes", "layers", "input_shape", "stem_filters", "head",
                "objectives", "ea"});
  SearchConfig cfg;

  const auto& blocks = require_list(root, "blocks");
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const auto key = index_key("blocks", i);
    Block b;
    b.op = parse_operation(blocks[i], key, {"name"});
    if (auto it = blocks[i].find("name"); it != blocks[i].end()) {
      if (!it->is_string()) invalid(key + ".name", "expected a string");
      b.name = it->get<std::string>();
    } else {
      b.name = std::string(to_string(b.op.kind)) + std::to_string(b.op.kernel);
    }
    cfg.blocks.push_back(std::move(b));
  }

  const auto& options = require_list(root, "block_options");
  for (std::size_t i = 0; i < options.size(); ++i) {
    const auto key = index_key("block_options", i);
    check_object(options[i], key, {"skip", "batch_norm", "activation"});
    BlockOption o;
    o.skip = get_bool(options[i], "skip", key, false);
    o.batch_norm = get_bool(options[i], "batch_norm", key, false);
    if (auto it = options[i].find("activation"); it != options[i].end())
      o.activation = parse_tag(kActivationTags, *it, key + ".activation");
    cfg.block_options.push_back(o);
  }

  const auto& reductions = require_list(root, "reduction_blocks");
  for (std::size_t i = 0; i < reductions.size(); ++i)
    cfg.reduction_blocks.push_back(
        parse_operation(reductions[i], index_key("reduction_blocks", i), {}));

  const auto& merges = require_list(root, "merge_modes");
  for (std::size_t i = 0; i < merges.size(); ++i)
    cfg.merge_modes.push_back(parse_tag(kMergeTags, merges[i], index_key("merge_modes", i)));

  const auto& samplings = require_list(root, "sampling_modes");
  for (std::size_t i = 0; i < samplings.size(); ++i)
    cfg.sampling_modes.push_back(
        parse_tag(kSamplingTags, samplings[i], index_key("sampling_modes", i)));

  const auto& layers = require(root, "layers", "");
  check_object(layers, "layers", {"L_c", "N_c", "L_p", "L_B", "L_r", "allow_mismatched_L_r"});
  auto& p = cfg.params;
  p.cell_layers = get_integer<std::uint32_t>(layers, "L_c", "layers", std::nullopt, 1);
  p.cells = get_integer<std::uint32_t>(layers, "N_c", "layers", std::nullopt, 1);
  p.pipelines = get_integer<std::uint32_t>(layers, "L_p", "layers", std::nullopt, 1);
  p.block_layers = get_integer<std::uint32_t>(layers, "L_B", "layers", std::nullopt, 1);
  p.reduction_layers = get_integer<std::uint32_t>(layers, "L_r", "layers", p.pipelines, 1);
  cfg.allow_mismatched_reduction_layers =
      get_bool(layers, "allow_mismatched_L_r", "layers", false);

  const auto& shape = require(root, "input_shape", "");
  if (!shape.is_array() || shape.size() != 3)
    invalid("input_shape", "expected [height, width, channels]");
  for (const auto& d : shape)
    if (!d.is_number_integer() || d.get<long long>() < 1)
      invalid("input_shape", "all dimensions must be positive integers");
  cfg.input_shape = {shape[0].get<std::int64_t>(), shape[1].get<std::int64_t>(),
                     shape[2].get<std::int64_t>()};
  cfg.stem_filters = get_integer<int>(root, "stem_filters", "", 32, 1);

  const auto& head = require_list(root, "head");
  for (std::size_t i = 0; i < head.size(); ++i) {
    const auto key = index_key("head", i);
    const auto& h = head[i];
    if (!h.is_object()) invalid(key, "expected an object");
    const auto type = require(h, "type", key);
    if (type == "dense") {
      check_object(h, key, {"type", "units", "activation"});
      HeadActivation act = HeadActivation::none;
      if (auto it = h.find("activation"); it != h.end())
        act = parse_tag(kHeadActTags, *it, key + ".activation");
      cfg.head.push_back(HeadLayer::dense(get_integer<int>(h, "units", key, std::nullopt, 1), act));
    } else if (type == "dropout") {
      check_object(h, key, {"type", "rate"});
      cfg.head.push_back(HeadLayer::dropout(get_number(h, "rate", key, std::nullopt)));
    } else {
      invalid(key + ".type", "unknown tag " + type.dump());
    }
  }

  if (auto it = root.find("objectives"); it != root.end()) {
    check_object(*it, "objectives", {"total_param"});
    cfg.total_param =
        get_integer<std::uint64_t>(*it, "total_param", "objectives", cfg.total_param, 1);
  }

  if (auto it = root.find("ea"); it != root.end()) {
    const auto& j = *it;
    check_object(j, "ea",
                 {"population", "generations", "seed", "crossover_prob", "crossover_eta",
                  "mutation_prob", "mutation_eta", "mode", "strategy", "inner_budget",
                  "eval_timeout_s", "training"});
    auto& ea = cfg.ea;
    ea.population = get_integer<std::uint32_t>(j, "population", "ea", ea.population, 0);
    ea.generations = get_integer<std::uint32_t>(j, "generations", "ea", ea.generations, 0);
    ea.seed = get_integer<std::uint64_t>(j, "seed", "ea", ea.seed, 0);
    ea.crossover_prob = get_number(j, "crossover_prob", "ea", ea.crossover_prob);
    ea.crossover_eta = get_number(j, "crossover_eta", "ea", ea.crossover_eta);
    ea.mutation_prob = get_number(j, "mutation_prob", "ea", ea.mutation_prob);
    ea.mutation_eta = get_number(j, "mutation_eta", "ea", ea.mutation_eta);
    if (auto m = j.find("mode"); m != j.end()) ea.mode = parse_tag(kModeTags, *m, "ea.mode");
    if (auto s = j.find("strategy"); s != j.end())
      ea.strategy = parse_tag(kStrategyTags, *s, "ea.strategy");
    if (auto ib = j.find("inner_budget"); ib != j.end()) {
      check_object(*ib, "ea.inner_budget", {"population", "generations", "exhaustive"});
      ea.inner_budget.population = get_integer<std::uint32_t>(
          *ib, "population", "ea.inner_budget", ea.inner_budget.population, 0);
      ea.inner_budget.generations = get_integer<std::uint32_t>(
          *ib, "generations", "ea.inner_budget", ea.inner_budget.generations, 0);
      ea.inner_budget.exhaustive =
          get_bool(*ib, "exhaustive", "ea.inner_budget", ea.inner_budget.exhaustive);
    }
    ea.eval_timeout_s = get_number(j, "eval_timeout_s", "ea", ea.eval_timeout_s);
    if (auto t = j.find("training"); t != j.end()) {
      check_object(*t, "ea.training", {"epochs", "batch_size", "dropout"});
      ea.training.epochs = get_integer<int>(*t, "epochs", "ea.training", ea.training.epochs, 0);
      ea.training.batch_size =
          get_integer<int>(*t, "batch_size", "ea.training", ea.training.batch_size, 1);
      ea.training.dropout = get_number(*t, "dropout", "ea.training", ea.training.dropout);
    }
  }

  validate(cfg);
  return cfg;
}

inline Json to_json(const Operation& op) {
  Json j{{"op", std::string(to_string(op.kind))}};
  if (op.kind != OpKind::identity) j["kernel"] = op.kernel;
  return j;
}

/// Canonical JSON form; config_from_json(to_json(c)) == c.
inline Json to_json(const SearchConfig& cfg) {
  Json root = Json::object();
  Json blocks = Json::array();
  for (const auto& b : cfg.blocks) {
    Json j = to_json(b.op);
    j["name"] = b.name;
    blocks.push_back(std::move(j));
  }
  root["blocks"] = std::move(blocks);

  Json options = Json::array();
  for (const auto& o : cfg.block_options) {
    if (o.skip) {
      options.push_back({{"skip", true}});
    } else {
      options.push_back({{"batch_norm", o.batch_norm},
                         {"activation", std::string(to_string(o.activation))}});
    }
  }
  root["block_options"] = std::move(options);

  Json reductions = Json::array();
  for (const auto& op : cfg.reduction_blocks) reductions.push_back(to_json(op));
  root["reduction_blocks"] = std::move(reductions);

  Json merges = Json::array();
  for (auto m : cfg.merge_modes) merges.push_back(std::string(to_string(m)));
  root["merge_modes"] = std::move(merges);
  Json samplings = Json::array();
  for (auto s : cfg.sampling_modes) samplings.push_back(std::string(to_string(s)));
  root["sampling_modes"] = std::move(samplings);

  const auto& p = cfg.params;
  root["layers"] = {{"L_c", p.cell_layers},
                    {"N_c", p.cells},
                    {"L_p", p.pipelines},
                    {"L_B", p.block_layers},
                    {"L_r", p.reduction_layers}};
  if (cfg.allow_mismatched_reduction_layers) root["layers"]["allow_mismatched_L_r"] = true;
  root["input_shape"] = {cfg.input_shape.h, cfg.input_shape.w, cfg.input_shape.c};
  root["stem_filters"] = cfg.stem_filters;

  Json head = Json::array();
  for (const auto& l : cfg.head) {
    if (l.kind == HeadLayer::Kind::dense) {
      head.push_back({{"type", "dense"},
                      {"units", l.units},
                      {"activation", std::string(to_string(l.activation))}});
    } else {
      head.push_back({{"type", "dropout"}, {"rate", l.rate}});
    }
  }
  root["head"] = std::move(head);
  root["objectives"] = {{"total_param", cfg.total_param}};

  const auto& ea = cfg.ea;
  root["ea"] = {{"population", ea.population},
                {"generations", ea.generations},
                {"seed", ea.seed},
                {"crossover_prob", ea.crossover_prob},
                {"crossover_eta", ea.crossover_eta},
                {"mutation_prob", ea.mutation_prob},
                {"mutation_eta", ea.mutation_eta},
                {"mode", std::string(to_string(ea.mode))},
                {"strategy", std::string(to_string(ea.strategy))},
                {"inner_budget",
                 {{"population", ea.inner_budget.population},
                  {"generations", ea.inner_budget.generations},
                  {"exhaustive", ea.inner_budget.exhaustive}}},
                {"eval_timeout_s", ea.eval_timeout_s},
                {"training",
                 {{"epochs", ea.training.epochs},
                  {"batch_size", ea.training.batch_size},
                  {"dropout", ea.training.dropout}}}};
  return root;
}

inline SearchConfig parse_config(std::string_view text) {
  Json root;
  try {
    root = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ConfigError(ConfigError::Kind::parse, "", std::string("parse error: ") + e.what());
  }
  return config_from_json(root);
}

inline SearchConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(ConfigError::Kind::io, "", "cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

/// The search space instance used for the MNIST experiments: five
/// single-operation blocks, seven wrapping options, three reduction blocks,
/// 2 cells over 2 layers, 3 pipelines of 4 blocks, and a
/// dense(2048) -> dropout(0.7) -> dense(10) classifier.
inline SearchConfig default_config() {
  SearchConfig cfg;
  cfg.blocks = {{"conv3x3", {OpKind::conv2d, 3}},
                {"conv5x5", {OpKind::conv2d, 5}},
                {"conv7x7", {OpKind::conv2d, 7}},
                {"maxpool3x3", {OpKind::maxpool, 3}},
                {"sepconv7x7", {OpKind::depthwise_sep_conv2d, 7}}};
  cfg.block_options = {{true, false, Activation::none},
                       {false, false, Activation::none},
                       {false, true, Activation::none},
                       {false, true, Activation::relu_before},
                       {false, true, Activation::relu_after},
                       {false, false, Activation::relu_before},
                       {false, false, Activation::relu_after}};
  cfg.reduction_blocks = {{OpKind::maxpool, 3}, {OpKind::conv2d, 1}, {OpKind::identity, 1}};
  cfg.merge_modes = {MergeMode::add, MergeMode::concat};
  cfg.sampling_modes = {SamplingMode::same, SamplingMode::down};
  cfg.params.cell_layers = 2;
  cfg.params.cells = 2;
  cfg.params.pipelines = 3;
  cfg.params.block_layers = 4;
  cfg.params.reduction_layers = 3;
  cfg.input_shape = {28, 28, 1};
  cfg.stem_filters = 32;
  cfg.head = {HeadLayer::dense(2048, HeadActivation::relu), HeadLayer::dropout(0.7),
              HeadLayer::dense(10, HeadActivation::softmax)};
  cfg.total_param = 150000000;
  validate(cfg);
  return cfg;
}

}  // namespace cellspace
