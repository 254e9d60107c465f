#pragma once

// Pareto archive exports: CSV, JSON (round-trippable) and an SVG scatter of
// error against normalized size.

#include <charconv>
#include <cstdio>
#include <sstream>
#include <string>

#include "optimizer.hpp"

namespace cellspace {

/// Shortest decimal form that round-trips.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::string packed_string(const DigitGenome& g, const SpaceParams& p) {
  std::string s;
  for (const auto& gene : pack(g, p).genes) {
    if (!s.empty()) s += ';';
    s += gene.str();
  }
  return s;
}

/// Columns genome_packed,f1,f2,g,param_count; rows by ascending f1. Packed
/// genes are ';'-separated decimals.
inline std::string export_pareto_csv(const ParetoArchive& archive, const SpaceParams& p) {
  std::string out = "genome_packed,f1,f2,g,param_count\n";
  for (const auto& e : archive.sorted()) {
    out += packed_string(e.genome, p);
    out += ',' + format_double(e.objectives.f1);
    out += ',' + format_double(e.objectives.f2);
    out += ',' + format_double(e.objectives.g);
    out += ',' + std::to_string(e.param_count) + '\n';
  }
  return out;
}

inline Json export_pareto_json(const ParetoArchive& archive, const SpaceParams& p) {
  Json entries = Json::array();
  for (const auto& e : archive.sorted()) {
    entries.push_back({{"digits", e.genome.digits},
                       {"packed", to_json(pack(e.genome, p))["packed"]},
                       {"f1", e.objectives.f1},
                       {"f2", e.objectives.f2},
                       {"g", e.objectives.g},
                       {"param_count", e.param_count}});
  }
  return Json{{"format_version", "1"}, {"entries", std::move(entries)}};
}

inline ParetoArchive pareto_from_json(const Json& j, const SpaceParams& p) {
  ParetoArchive archive;
  for (const auto& e : j.at("entries")) {
    Individual ind;
    ind.genome = genome_from_json(Json{{"digits", e.at("digits")}}, p);
    ind.objectives = {e.at("f1").get<double>(), e.at("f2").get<double>(), e.at("g").get<double>()};
    ind.param_count = e.at("param_count").get<std::uint64_t>();
    if (!archive.offer(ind))
      throw std::runtime_error("pareto JSON entries are not mutually non-dominated");
  }
  return archive;
}

// ---------------------------------------------------------------------------
// SVG.

struct PlotFrame {
  static constexpr double width = 800;
  static constexpr double height = 600;
  static constexpr double left = 80;
  static constexpr double right = 780;
  static constexpr double top = 20;
  static constexpr double bottom = 540;

  double x_hi = 1.0;  // f2 at the right edge
  double y_hi = 1.0;  // f1 at the top edge

  double px(double f2) const { return left + (right - left) * f2 / x_hi; }
  double py(double f1) const { return bottom - (bottom - top) * f1 / y_hi; }
};

/// Axes span [0, 1.05 * max] of each objective over the archive (max taken as
/// 1 when the archive is empty or all zero).
inline PlotFrame plot_frame(const ParetoArchive& archive) {
  double max_f1 = 0.0;
  double max_f2 = 0.0;
  for (const auto& e : archive.entries()) {
    max_f1 = std::max(max_f1, e.objectives.f1);
    max_f2 = std::max(max_f2, e.objectives.f2);
  }
  PlotFrame f;
  f.x_hi = (max_f2 > 0.0 ? max_f2 : 1.0) * 1.05;
  f.y_hi = (max_f1 > 0.0 ? max_f1 : 1.0) * 1.05;
  return f;
}

inline std::string render_pareto_svg(const ParetoArchive& archive) {
  const auto f = plot_frame(archive);
  const auto num = [](double v, const char* fmt = "%.2f") {
    char buf[64];
    std::snprintf(buf, sizeof buf, fmt, v);
    return std::string(buf);
  };
  std::ostringstream os;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
     << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" height=\"600\" "
        "viewBox=\"0 0 800 600\">\n"
     << "<rect x=\"0\" y=\"0\" width=\"800\" height=\"600\" fill=\"white\"/>\n"
     << "<g stroke=\"black\" stroke-width=\"1\">\n"
     << "<line x1=\"" << num(f.left) << "\" y1=\"" << num(f.bottom) << "\" x2=\"" << num(f.right)
     << "\" y2=\"" << num(f.bottom) << "\"/>\n"
     << "<line x1=\"" << num(f.left) << "\" y1=\"" << num(f.bottom) << "\" x2=\"" << num(f.left)
     << "\" y2=\"" << num(f.top) << "\"/>\n";
  for (int t = 0; t <= 5; ++t) {
    const double xv = f.x_hi * t / 5.0;
    const double yv = f.y_hi * t / 5.0;
    os << "<line x1=\"" << num(f.px(xv)) << "\" y1=\"" << num(f.bottom) << "\" x2=\""
       << num(f.px(xv)) << "\" y2=\"" << num(f.bottom + 5) << "\"/>\n";
    os << "<line x1=\"" << num(f.left - 5) << "\" y1=\"" << num(f.py(yv)) << "\" x2=\""
       << num(f.left) << "\" y2=\"" << num(f.py(yv)) << "\"/>\n";
  }
  os << "</g>\n<g font-family=\"sans-serif\" font-size=\"12\" fill=\"black\">\n";
  for (int t = 0; t <= 5; ++t) {
    const double xv = f.x_hi * t / 5.0;
    const double yv = f.y_hi * t / 5.0;
    os << "<text x=\"" << num(f.px(xv)) << "\" y=\"" << num(f.bottom + 20)
       << "\" text-anchor=\"middle\">" << num(xv, "%.4g") << "</text>\n";
    os << "<text x=\"" << num(f.left - 8) << "\" y=\"" << num(f.py(yv) + 4)
       << "\" text-anchor=\"end\">" << num(yv, "%.4g") << "</text>\n";
  }
  os << "<text x=\"430.00\" y=\"585.00\" text-anchor=\"middle\">params / TotalParam</text>\n"
     << "<text x=\"20.00\" y=\"280.00\" text-anchor=\"middle\" "
        "transform=\"rotate(-90 20.00 280.00)\">1 \xE2\x88\x92 accuracy</text>\n"
     << "</g>\n<g stroke=\"none\">\n";
  for (const auto& e : archive.sorted()) {
    os << "<circle cx=\"" << num(f.px(e.objectives.f2)) << "\" cy=\"" << num(f.py(e.objectives.f1))
       << "\" r=\"4\" fill=\"" << (e.objectives.feasible() ? "#1f77b4" : "#d62728") << "\"/>\n";
  }
  os << "</g>\n</svg>\n";
  return os.str();
}

}  // namespace cellspace
