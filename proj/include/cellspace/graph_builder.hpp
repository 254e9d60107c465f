#pragma once

// Concrete, shaped operation DAG for an ArchitecturePlan:
//
//   input -> stem conv 3x3 -> cell layer 0 .. cell layer L_c-1 -> head
//
// Shape rules: padded stride-1 ops keep (h, w); stride-2 ops give
// (ceil(h/2), ceil(w/2)); convolutions set c = filters; concat sums c;
// add requires identical shapes; upsample2x doubles (h, w).
//
// Cell rules:
//  - Conv-part blocks are stride 1 and channel preserving. A block is
//    [relu] -> op -> [batch_norm] -> [relu]; a skipped block is one identity.
//  - Reduction blocks are stride 2 under down, stride 1 under same. Under up a
//    2x nearest upsample precedes the block. Identity under down becomes
//    maxpool 3x3 stride 2.
//  - Pipelines merge by add or concat (no merge node when L_p == 1).
//  - A trailing 1x1 projection fixes channels when they differ from the
//    target: 2c (down), c (same), max(1, c/2) (up).

#include <algorithm>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "genome_codec.hpp"
#include "space_config.hpp"

namespace cellspace {

enum class NodeOp {
  input,
  stem_conv,
  conv2d,
  depthwise_sep_conv2d,
  maxpool,
  identity,
  batch_norm,
  relu,
  merge_add,
  merge_concat,
  projection_conv1x1,
  upsample2x,
  flatten,
  dense,
  dropout,
  softmax,
};

inline constexpr detail::EnumTag<NodeOp> kNodeOpTags[] = {
    {NodeOp::input, "input"},
    {NodeOp::stem_conv, "stem_conv"},
    {NodeOp::conv2d, "conv2d"},
    {NodeOp::depthwise_sep_conv2d, "depthwise_sep_conv2d"},
    {NodeOp::maxpool, "maxpool"},
    {NodeOp::identity, "identity"},
    {NodeOp::batch_norm, "batch_norm"},
    {NodeOp::relu, "relu"},
    {NodeOp::merge_add, "merge_add"},
    {NodeOp::merge_concat, "merge_concat"},
    {NodeOp::projection_conv1x1, "projection_conv1x1"},
    {NodeOp::upsample2x, "upsample2x"},
    {NodeOp::flatten, "flatten"},
    {NodeOp::dense, "dense"},
    {NodeOp::dropout, "dropout"},
    {NodeOp::softmax, "softmax"},
};

inline std::string_view to_string(NodeOp op) { return detail::tag_of(kNodeOpTags, op); }

/// Zero means "not applicable to this op".
struct NodeAttrs {
  int kernel = 0;
  int stride = 0;
  int filters = 0;
  int units = 0;
  double rate = 0.0;

  friend bool operator==(const NodeAttrs&, const NodeAttrs&) = default;
};

struct ArchNode {
  int id = 0;
  NodeOp op = NodeOp::identity;
  NodeAttrs attrs;
  std::vector<int> inputs;
  TensorShape out_shape;  // dense-like outputs are (1, 1, units)

  friend bool operator==(const ArchNode&, const ArchNode&) = default;
};

/// Where one cell layer sits in the graph: nodes [first_id, output_id].
struct CellSpan {
  std::uint32_t layer = 0;
  std::uint32_t cell = 0;
  SamplingMode mode = SamplingMode::same;
  int input_id = 0;
  int first_id = 0;
  int output_id = 0;

  friend bool operator==(const CellSpan&, const CellSpan&) = default;
};

/// Nodes are stored in topological order and node.id == position.
struct ArchGraph {
  std::vector<ArchNode> nodes;
  int input_id = 0;
  int output_id = 0;
  std::vector<CellSpan> cells;

  const ArchNode& node(int id) const { return nodes.at(static_cast<std::size_t>(id)); }
  const TensorShape& output_shape() const { return node(output_id).out_shape; }
  friend bool operator==(const ArchGraph&, const ArchGraph&) = default;
};

class ShapeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return (a + b - 1) / b; }

inline std::string shape_str(const TensorShape& s) {
  return "(" + std::to_string(s.h) + "," + std::to_string(s.w) + "," + std::to_string(s.c) + ")";
}

}  // namespace detail

/// Output shape of one node given its input shapes.
inline TensorShape infer_node_shape(const ArchNode& n, std::span<const TensorShape> in) {
  const auto where = [&] { return "node " + std::to_string(n.id) + " (" + std::string(to_string(n.op)) + ")"; };
  const auto need = [&](std::size_t count) {
    if (in.size() != count)
      throw ShapeError(where() + ": expected " + std::to_string(count) + " input(s), got " +
                       std::to_string(in.size()));
  };
  switch (n.op) {
    case NodeOp::input:
      need(0);
      if (!n.out_shape.valid()) throw ShapeError(where() + ": input shape not set");
      return n.out_shape;
    case NodeOp::stem_conv:
    case NodeOp::conv2d:
    case NodeOp::depthwise_sep_conv2d:
    case NodeOp::projection_conv1x1: {
      need(1);
      if (n.attrs.filters < 1 || n.attrs.stride < 1 || n.attrs.kernel < 1)
        throw ShapeError(where() + ": kernel, stride and filters must be >= 1");
      return {detail::ceil_div(in[0].h, n.attrs.stride), detail::ceil_div(in[0].w, n.attrs.stride),
              n.attrs.filters};
    }
    case NodeOp::maxpool:
      need(1);
      if (n.attrs.stride < 1 || n.attrs.kernel < 1)
        throw ShapeError(where() + ": kernel and stride must be >= 1");
      return {detail::ceil_div(in[0].h, n.attrs.stride), detail::ceil_div(in[0].w, n.attrs.stride),
              in[0].c};
    case NodeOp::identity:
    case NodeOp::batch_norm:
    case NodeOp::relu:
    case NodeOp::dropout:
    case NodeOp::softmax:
      need(1);
      return in[0];
    case NodeOp::merge_add:
      if (in.size() < 2) throw ShapeError(where() + ": merge needs >= 2 inputs");
      for (const auto& s : in)
        if (s != in[0])
          throw ShapeError(where() + ": add operands differ: " + detail::shape_str(in[0]) +
                           " vs " + detail::shape_str(s));
      return in[0];
    case NodeOp::merge_concat: {
      if (in.size() < 2) throw ShapeError(where() + ": merge needs >= 2 inputs");
      TensorShape out = in[0];
      out.c = 0;
      for (const auto& s : in) {
        if (s.h != in[0].h || s.w != in[0].w)
          throw ShapeError(where() + ": concat operands differ spatially: " +
                           detail::shape_str(in[0]) + " vs " + detail::shape_str(s));
        out.c += s.c;
      }
      return out;
    }
    case NodeOp::upsample2x:
      need(1);
      return {in[0].h * 2, in[0].w * 2, in[0].c};
    case NodeOp::flatten:
      need(1);
      return {1, 1, in[0].elements()};
    case NodeOp::dense:
      need(1);
      if (n.attrs.units < 1) throw ShapeError(where() + ": units must be >= 1");
      return {1, 1, n.attrs.units};
  }
  throw ShapeError(where() + ": unknown op");
}

/// Recomputes every out_shape from the input node's shape. Checks topological
/// order and arity; throws ShapeError on any inconsistency.
inline ArchGraph infer_shapes(ArchGraph g) {
  int inputs = 0;
  std::vector<TensorShape> in;
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    auto& n = g.nodes[i];
    if (n.id != static_cast<int>(i))
      throw ShapeError("node at position " + std::to_string(i) + " has id " + std::to_string(n.id));
    if (n.op == NodeOp::input) ++inputs;
    in.clear();
    for (int src : n.inputs) {
      if (src < 0 || src >= n.id)
        throw ShapeError("node " + std::to_string(n.id) + " reads node " + std::to_string(src) +
                         " which does not precede it");
      in.push_back(g.nodes[static_cast<std::size_t>(src)].out_shape);
    }
    n.out_shape = infer_node_shape(n, in);
  }
  if (inputs != 1) throw ShapeError("graph must have exactly one input node");
  if (g.nodes.empty() || g.nodes[static_cast<std::size_t>(g.input_id)].op != NodeOp::input)
    throw ShapeError("input_id does not name the input node");
  if (g.output_id < 0 || g.output_id >= static_cast<int>(g.nodes.size()))
    throw ShapeError("output_id out of range");
  return g;
}

namespace detail {

class GraphAssembler {
 public:
  explicit GraphAssembler(ArchGraph& g) : g_(g) {}

  int add(NodeOp op, NodeAttrs attrs, std::vector<int> inputs) {
    ArchNode n;
    n.id = static_cast<int>(g_.nodes.size());
    n.op = op;
    n.attrs = attrs;
    n.inputs = std::move(inputs);
    std::vector<TensorShape> in;
    for (int src : n.inputs) in.push_back(shape(src));
    n.out_shape = infer_node_shape(n, in);
    g_.nodes.push_back(std::move(n));
    return g_.nodes.back().id;
  }

  const TensorShape& shape(int id) const { return g_.nodes[static_cast<std::size_t>(id)].out_shape; }
  int channels(int id) const { return static_cast<int>(shape(id).c); }

  int conv_like(NodeOp op, int in, int kernel, int stride, int filters) {
    return add(op, {kernel, stride, filters, 0, 0.0}, {in});
  }
  int unary(NodeOp op, int in) { return add(op, {}, {in}); }

 private:
  ArchGraph& g_;
};

inline int add_block(GraphAssembler& a, int in, const Block& block, const BlockOption& option) {
  if (option.skip) return a.unary(NodeOp::identity, in);
  int cur = in;
  if (option.activation == Activation::relu_before) cur = a.unary(NodeOp::relu, cur);
  const int c = a.channels(cur);
  switch (block.op.kind) {
    case OpKind::conv2d:
      cur = a.conv_like(NodeOp::conv2d, cur, block.op.kernel, 1, c);
      break;
    case OpKind::depthwise_sep_conv2d:
      cur = a.conv_like(NodeOp::depthwise_sep_conv2d, cur, block.op.kernel, 1, c);
      break;
    case OpKind::maxpool:
      cur = a.add(NodeOp::maxpool, {block.op.kernel, 1, 0, 0, 0.0}, {cur});
      break;
    case OpKind::identity:
      cur = a.unary(NodeOp::identity, cur);
      break;
  }
  if (option.batch_norm) cur = a.unary(NodeOp::batch_norm, cur);
  if (option.activation == Activation::relu_after) cur = a.unary(NodeOp::relu, cur);
  return cur;
}

/// One reduction block. Only the first block on a branch carries the
/// sampling (stride 2 or upsample); later ones are stride 1.
inline int add_reduction_block(GraphAssembler& a, int in, const Operation& op, SamplingMode mode,
                               bool carries_sampling) {
  int cur = in;
  int stride = 1;
  if (carries_sampling && mode == SamplingMode::up) cur = a.unary(NodeOp::upsample2x, cur);
  if (carries_sampling && mode == SamplingMode::down) stride = 2;
  OpKind kind = op.kind;
  int kernel = op.kernel;
  if (kind == OpKind::identity && stride == 2) {
    kind = OpKind::maxpool;
    kernel = 3;
  }
  switch (kind) {
    case OpKind::maxpool:
      return a.add(NodeOp::maxpool, {kernel, stride, 0, 0, 0.0}, {cur});
    case OpKind::conv2d:
      return a.conv_like(NodeOp::conv2d, cur, kernel, stride, a.channels(cur));
    case OpKind::depthwise_sep_conv2d:
      return a.conv_like(NodeOp::depthwise_sep_conv2d, cur, kernel, stride, a.channels(cur));
    case OpKind::identity:
      return a.unary(NodeOp::identity, cur);
  }
  return cur;
}

inline std::int64_t target_channels(std::int64_t c_in, SamplingMode mode) {
  switch (mode) {
    case SamplingMode::down:
      return c_in * 2;
    case SamplingMode::up:
      return std::max<std::int64_t>(1, c_in / 2);
    case SamplingMode::same:
      break;
  }
  return c_in;
}

inline int add_cell(GraphAssembler& a, int in, const CellPlan& cell, SamplingMode mode,
                    const SearchConfig& cfg) {
  const auto& p = cfg.params;
  const std::int64_t c_in = a.channels(in);

  std::vector<int> branches;
  for (const auto& pipeline : cell.pipelines) {
    int cur = in;
    for (const auto& choice : pipeline)
      cur = add_block(a, cur, cfg.blocks[choice.block], cfg.block_options[choice.option]);
    branches.push_back(cur);
  }

  const auto& red = cell.reduction;
  const auto merge = [&](std::vector<int> ids) {
    if (ids.size() == 1) return ids.front();
    const auto op = cfg.merge_modes[red.merge] == MergeMode::add ? NodeOp::merge_add
                                                                 : NodeOp::merge_concat;
    return a.add(op, {}, std::move(ids));
  };

  int merged = 0;
  if (red.placement == ReductionPlan::Placement::before_merge) {
    // Reduction block r goes on branch r mod L_p, in series; with L_r == L_p
    // that is exactly one block per branch.
    for (std::size_t j = 0; j < branches.size(); ++j) {
      bool first = true;
      for (std::size_t r = j; r < red.blocks.size(); r += p.pipelines) {
        branches[j] = add_reduction_block(a, branches[j], cfg.reduction_blocks[red.blocks[r]],
                                          mode, first);
        first = false;
      }
      if (first)
        branches[j] = add_reduction_block(a, branches[j], Operation{OpKind::identity, 1}, mode, true);
    }
    merged = merge(branches);
  } else {
    merged = merge(branches);
    merged = add_reduction_block(a, merged, cfg.reduction_blocks[red.blocks.front()], mode, true);
  }

  const auto target = target_channels(c_in, mode);
  if (a.channels(merged) != target)
    merged = a.conv_like(NodeOp::projection_conv1x1, merged, 1, 1, static_cast<int>(target));
  return merged;
}

}  // namespace detail

/// input -> stem -> cells, without the head. Records a CellSpan per layer.
inline ArchGraph build_feature_graph(const ArchitecturePlan& plan, const SearchConfig& cfg) {
  ArchGraph g;
  detail::GraphAssembler a(g);
  ArchNode input;
  input.id = 0;
  input.op = NodeOp::input;
  input.out_shape = cfg.input_shape;
  g.nodes.push_back(input);
  g.input_id = 0;

  int cur = a.conv_like(NodeOp::stem_conv, g.input_id, 3, 1, cfg.stem_filters);
  for (std::uint32_t k = 0; k < plan.layers.size(); ++k) {
    const auto& layer = plan.layers[k];
    const auto mode = cfg.sampling_modes[layer.sampling];
    CellSpan span{k, layer.cell, mode, cur, static_cast<int>(g.nodes.size()), 0};
    cur = detail::add_cell(a, cur, plan.cells[layer.cell], mode, cfg);
    span.output_id = cur;
    g.cells.push_back(span);
  }
  g.output_id = cur;
  return g;
}

/// Appends flatten and the head layers in order: dense(+relu/softmax node),
/// dropout.
inline ArchGraph attach_head(ArchGraph g, std::span<const HeadLayer> head) {
  if (head.empty()) throw std::invalid_argument("head is empty");
  detail::GraphAssembler a(g);
  int cur = a.unary(NodeOp::flatten, g.output_id);
  for (const auto& layer : head) {
    if (layer.kind == HeadLayer::Kind::dense) {
      cur = a.add(NodeOp::dense, {0, 0, 0, layer.units, 0.0}, {cur});
      if (layer.activation == HeadActivation::relu) cur = a.unary(NodeOp::relu, cur);
      if (layer.activation == HeadActivation::softmax) cur = a.unary(NodeOp::softmax, cur);
    } else {
      cur = a.add(NodeOp::dropout, {0, 0, 0, 0, layer.rate}, {cur});
    }
  }
  g.output_id = cur;
  return g;
}

inline ArchGraph build_graph(const ArchitecturePlan& plan, const SearchConfig& cfg) {
  return attach_head(build_feature_graph(plan, cfg), cfg.head);
}

}  // namespace cellspace
