#pragma once

// ArchitectureExport: the JSON document handed to external evaluators and
// written by `cellspace export`. Canonical form is nlohmann's compact dump
// (object keys sorted, no whitespace), so identical inputs give identical
// bytes.

#include <cstdio>
#include <iomanip>
#include <sstream>
#include <string>

#include "genome_codec.hpp"
#include "graph_builder.hpp"
#include "metrics.hpp"

namespace cellspace {

inline constexpr std::string_view kExportFormatVersion = "1";

inline std::string canonical_dump(const Json& j) { return j.dump(); }

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

/// FNV-1a 64 of the config's canonical JSON, as 16 hex digits.
inline std::string config_fingerprint(const SearchConfig& cfg) {
  const auto text = canonical_dump(to_json(cfg));
  return hex64(fnv1a64(reinterpret_cast<const unsigned char*>(text.data()), text.size()));
}

inline Json node_attrs_json(const ArchNode& n) {
  Json a = Json::object();
  switch (n.op) {
    case NodeOp::stem_conv:
    case NodeOp::conv2d:
    case NodeOp::depthwise_sep_conv2d:
    case NodeOp::projection_conv1x1:
      a["kernel"] = n.attrs.kernel;
      a["stride"] = n.attrs.stride;
      a["filters"] = n.attrs.filters;
      break;
    case NodeOp::maxpool:
      a["kernel"] = n.attrs.kernel;
      a["stride"] = n.attrs.stride;
      break;
    case NodeOp::dense:
      a["units"] = n.attrs.units;
      break;
    case NodeOp::dropout:
      a["rate"] = n.attrs.rate;
      break;
    default:
      break;
  }
  return a;
}

inline Json graph_to_json(const ArchGraph& g) {
  Json nodes = Json::array();
  for (const auto& n : g.nodes) {
    nodes.push_back({{"id", n.id},
                     {"op", std::string(to_string(n.op))},
                     {"attrs", node_attrs_json(n)},
                     {"inputs", n.inputs},
                     {"out_shape", {n.out_shape.h, n.out_shape.w, n.out_shape.c}}});
  }
  Json cells = Json::array();
  for (const auto& c : g.cells) {
    cells.push_back({{"layer", c.layer},
                     {"cell", c.cell},
                     {"mode", std::string(to_string(c.mode))},
                     {"input_id", c.input_id},
                     {"first_id", c.first_id},
                     {"output_id", c.output_id}});
  }
  return Json{{"nodes", std::move(nodes)},
              {"input_id", g.input_id},
              {"output_id", g.output_id},
              {"cells", std::move(cells)}};
}

/// Rebuilds a graph from its JSON form and re-runs shape inference; throws
/// ShapeError if the recorded shapes disagree with the recomputed ones.
inline ArchGraph graph_from_json(const Json& j) {
  ArchGraph g;
  for (const auto& jn : j.at("nodes")) {
    ArchNode n;
    n.id = jn.at("id").get<int>();
    n.op = detail::parse_tag(kNodeOpTags, jn.at("op"), "op");
    const auto& a = jn.at("attrs");
    n.attrs.kernel = a.value("kernel", 0);
    n.attrs.stride = a.value("stride", 0);
    n.attrs.filters = a.value("filters", 0);
    n.attrs.units = a.value("units", 0);
    n.attrs.rate = a.value("rate", 0.0);
    n.inputs = jn.at("inputs").get<std::vector<int>>();
    const auto& s = jn.at("out_shape");
    n.out_shape = {s.at(0).get<std::int64_t>(), s.at(1).get<std::int64_t>(),
                   s.at(2).get<std::int64_t>()};
    g.nodes.push_back(std::move(n));
  }
  g.input_id = j.at("input_id").get<int>();
  g.output_id = j.at("output_id").get<int>();
  if (auto it = j.find("cells"); it != j.end()) {
    for (const auto& jc : *it) {
      CellSpan c;
      c.layer = jc.at("layer").get<std::uint32_t>();
      c.cell = jc.at("cell").get<std::uint32_t>();
      c.mode = detail::parse_tag(detail::kSamplingTags, jc.at("mode"), "mode");
      c.input_id = jc.at("input_id").get<int>();
      c.first_id = jc.at("first_id").get<int>();
      c.output_id = jc.at("output_id").get<int>();
      g.cells.push_back(c);
    }
  }
  const auto recorded = g;
  g = infer_shapes(std::move(g));
  for (std::size_t i = 0; i < g.nodes.size(); ++i)
    if (g.nodes[i].out_shape != recorded.nodes[i].out_shape)
      throw ShapeError("node " + std::to_string(i) + ": recorded shape " +
                       detail::shape_str(recorded.nodes[i].out_shape) + " but inferred " +
                       detail::shape_str(g.nodes[i].out_shape));
  return g;
}

inline Json export_architecture(const DigitGenome& genome, const ArchGraph& graph,
                                const SearchConfig& cfg) {
  Json gj = to_json(genome);
  gj["packed"] = to_json(pack(genome, cfg.params))["packed"];
  return Json{{"format_version", std::string(kExportFormatVersion)},
              {"genome", std::move(gj)},
              {"graph", graph_to_json(graph)},
              {"param_count", total_param_count(graph)},
              {"config_fingerprint", config_fingerprint(cfg)}};
}

/// Decodes, builds and exports in one step.
inline Json export_architecture(const DigitGenome& genome, const SearchConfig& cfg) {
  return export_architecture(genome, build_graph(decode(genome, cfg), cfg), cfg);
}

struct ImportedArchitecture {
  DigitGenome genome;
  ArchGraph graph;
  std::uint64_t param_count = 0;  // as recorded in the document
};

inline ImportedArchitecture import_architecture(const Json& j) {
  if (j.at("format_version") != kExportFormatVersion)
    throw std::runtime_error("unsupported architecture format_version " +
                             j.at("format_version").dump());
  ImportedArchitecture out;
  out.genome.digits = j.at("genome").at("digits").get<std::vector<std::uint32_t>>();
  out.graph = graph_from_json(j.at("graph"));
  out.param_count = j.at("param_count").get<std::uint64_t>();
  return out;
}

// ---------------------------------------------------------------------------
// Human-readable summaries.

inline std::string describe_block(const SearchConfig& cfg, const BlockChoice& b) {
  const auto& opt = cfg.block_options[b.option];
  if (opt.skip) return "skip";
  std::string s = cfg.blocks[b.block].name;
  if (opt.activation == Activation::relu_before) s = "relu>" + s;
  if (opt.batch_norm) s += ">bn";
  if (opt.activation == Activation::relu_after) s += ">relu";
  return s;
}

inline std::string plan_summary(const ArchitecturePlan& plan, const ArchGraph& graph,
                                const SearchConfig& cfg) {
  std::ostringstream os;
  os << "layer  cell  mode   in_shape        out_shape       params\n";
  for (const auto& span : graph.cells) {
    std::uint64_t params = 0;
    for (int id = span.first_id; id <= span.output_id; ++id)
      params += node_param_count(graph.node(id), graph);
    const auto& in = graph.node(span.input_id).out_shape;
    const auto& out = graph.node(span.output_id).out_shape;
    os << std::left << std::setw(7) << span.layer << std::setw(6) << span.cell << std::setw(7)
       << to_string(span.mode) << std::setw(16) << detail::shape_str(in) << std::setw(16)
       << detail::shape_str(out) << params << '\n';
  }
  for (std::size_t c = 0; c < plan.cells.size(); ++c) {
    const auto& cell = plan.cells[c];
    os << "cell " << c << ":\n";
    for (std::size_t j = 0; j < cell.pipelines.size(); ++j) {
      os << "  pipeline " << j << ":";
      for (const auto& b : cell.pipelines[j]) os << ' ' << describe_block(cfg, b);
      os << '\n';
    }
    const auto& r = cell.reduction;
    os << "  reduction: "
       << (r.placement == ReductionPlan::Placement::before_merge ? "before_merge" : "after_merge")
       << " merge=" << to_string(cfg.merge_modes[r.merge]) << " blocks=[";
    for (std::size_t k = 0; k < r.blocks.size(); ++k) {
      const auto& op = cfg.reduction_blocks[r.blocks[k]];
      os << (k ? "," : "") << to_string(op.kind);
      if (op.kind != OpKind::identity) os << op.kernel;
    }
    os << "]\n";
  }
  os << "total params: " << total_param_count(graph) << '\n';
  return os.str();
}

}  // namespace cellspace
