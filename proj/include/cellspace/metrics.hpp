#pragma once

// Trainable-parameter counting and the objective / constraint vector.
//
// Conventions (must match any framework-side evaluator):
//   conv k x k          k^2 * c_in * c_out + c_out
//   depthwise-sep k x k k^2 * c_in + c_in * c_out + c_out
//   dense               n_in * n_out + n_out
//   batch_norm          2 * c   (gamma, beta; moving statistics excluded)
//   everything else     0

#include <cstdint>
#include <stdexcept>

#include "graph_builder.hpp"

namespace cellspace {

struct ObjectiveVector {
  double f1 = 1.0;  // 1 - accuracy
  double f2 = 0.0;  // params / total_param
  double g = -1.0;  // f2 - 1, feasible iff <= 0

  bool feasible() const { return g <= 0.0; }
  friend bool operator==(const ObjectiveVector&, const ObjectiveVector&) = default;
};

inline std::uint64_t node_param_count(const ArchNode& node, const ArchGraph& graph) {
  if (!node.out_shape.valid())
    throw std::logic_error("node " + std::to_string(node.id) + " has no inferred shape");
  const auto in_shape = [&]() -> const TensorShape& {
    const auto& s = graph.node(node.inputs.at(0)).out_shape;
    if (!s.valid())
      throw std::logic_error("input of node " + std::to_string(node.id) + " has no inferred shape");
    return s;
  };
  const auto out_c = static_cast<std::uint64_t>(node.out_shape.c);
  switch (node.op) {
    case NodeOp::stem_conv:
    case NodeOp::conv2d:
    case NodeOp::projection_conv1x1: {
      const auto k = static_cast<std::uint64_t>(node.attrs.kernel);
      const auto c_in = static_cast<std::uint64_t>(in_shape().c);
      return k * k * c_in * out_c + out_c;
    }
    case NodeOp::depthwise_sep_conv2d: {
      const auto k = static_cast<std::uint64_t>(node.attrs.kernel);
      const auto c_in = static_cast<std::uint64_t>(in_shape().c);
      return k * k * c_in + c_in * out_c + out_c;
    }
    case NodeOp::dense: {
      const auto n_in = static_cast<std::uint64_t>(in_shape().elements());
      return n_in * out_c + out_c;
    }
    case NodeOp::batch_norm:
      return 2 * out_c;
    default:
      return 0;
  }
}

inline std::uint64_t total_param_count(const ArchGraph& graph) {
  std::uint64_t total = 0;
  for (const auto& n : graph.nodes) total += node_param_count(n, graph);
  return total;
}

/// f2 = params / total_param, g = f2 - 1. Exact for params < 2^53 (one
/// correctly rounded division).
inline ObjectiveVector objective_vector(double error, std::uint64_t params,
                                        std::uint64_t total_param) {
  if (total_param == 0) throw std::invalid_argument("total_param must be > 0");
  ObjectiveVector v;
  v.f1 = error;
  v.f2 = static_cast<double>(params) / static_cast<double>(total_param);
  v.g = v.f2 - 1.0;
  return v;
}

inline ObjectiveVector objective_vector(double error, const ArchGraph& graph,
                                        std::uint64_t total_param) {
  return objective_vector(error, total_param_count(graph), total_param);
}

}  // namespace cellspace
