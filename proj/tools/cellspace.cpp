// cellspace: command-line front end for the search-space toolkit.
//
// Exit codes: 0 success, 2 usage error, 3 config/validation error,
// 4 evaluator failure.

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "cellspace/cellspace.hpp"

namespace fs = std::filesystem;
using namespace cellspace;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitConfig = 3;
constexpr int kExitEvaluator = 4;

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

/// A genome argument is a file path, a JSON object ({"digits": ...} or
/// {"packed": ...}) or comma-separated packed genes.
DigitGenome parse_genome_arg(std::string text, const SpaceParams& p) {
  std::error_code ec;
  if (fs::is_regular_file(text, ec)) text = read_file(text);
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) throw GenomeError("empty genome argument");
  if (text[first] == '{') {
    Json j;
    try {
      j = Json::parse(text);
    } catch (const Json::parse_error& e) {
      throw GenomeError(std::string("genome JSON: ") + e.what());
    }
    // Accept a full architecture export too.
    if (j.contains("genome") && j["genome"].is_object()) j = j["genome"];
    return genome_from_json(j, p);
  }
  std::vector<std::string> genes;
  std::string cur;
  for (char ch : text) {
    if (ch == ',' || ch == ';') {
      genes.push_back(cur);
      cur.clear();
    } else if (ch != ' ' && ch != '\t' && ch != '\r' && ch != '\n') {
      cur += ch;
    }
  }
  genes.push_back(cur);
  return unpack(packed_from_strings(genes), p);
}

void cmd_space_info(const SearchConfig& cfg) {
  const auto& p = cfg.params;
  const GenomeLayout layout(p);
  std::cout << "params: L_c=" << p.cell_layers << " N_c=" << p.cells << " P_c=" << p.sampling_modes
            << " L_p=" << p.pipelines << " L_B=" << p.block_layers << " N_B=" << p.blocks
            << " P_B=" << p.block_options << " L_r=" << p.reduction_layers
            << " N_r=" << p.reduction_blocks << " P_r=" << p.merge_modes << '\n'
            << "pipeline: " << pipeline_cardinality(p) << '\n'
            << "convolution_part: " << conv_part_cardinality(p) << '\n'
            << "reduction: " << reduction_cardinality(p) << '\n'
            << "structure: " << structure_cardinality(p) << '\n'
            << "cell_complexity: " << cell_complexity(p) << '\n'
            << "total: " << total_cardinality(p) << '\n'
            << "genome_digits: " << layout.size() << '\n'
            << "packed_genes: " << layout.packed_size() << '\n';
}

void cmd_sample(const SearchConfig& cfg, std::uint64_t seed, std::size_t count) {
  Rng rng(seed);
  const GenomeLayout layout(cfg.params);
  for (std::size_t i = 0; i < count; ++i)
    std::cout << to_json(random_genome(rng, layout)).dump() << '\n';
}

void cmd_decode(const SearchConfig& cfg, const DigitGenome& g) {
  const auto plan = decode(g, cfg);
  const auto graph = build_graph(plan, cfg);
  std::cout << canonical_dump(export_architecture(g, graph, cfg)) << "\n\n"
            << plan_summary(plan, graph, cfg);
}

void cmd_params(const SearchConfig& cfg, const DigitGenome& g) {
  const auto graph = build_graph(decode(g, cfg), cfg);
  std::cout << "id    op                     out_shape          params\n";
  for (const auto& n : graph.nodes) {
    std::ostringstream shape;
    shape << '(' << n.out_shape.h << ',' << n.out_shape.w << ',' << n.out_shape.c << ')';
    std::cout << std::left << std::setw(6) << n.id << std::setw(23) << to_string(n.op)
              << std::setw(19) << shape.str() << node_param_count(n, graph) << '\n';
  }
  std::cout << "total: " << total_param_count(graph) << '\n';
}

struct SearchOptions {
  std::string evaluator = "surrogate";
  std::string strategy;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint32_t> population;
  std::optional<std::uint32_t> generations;
  std::optional<double> timeout;
  std::size_t workers = 1;
  std::string cache;
  std::string out_dir = ".";
};

int cmd_search(SearchConfig cfg, const SearchOptions& opt) {
  if (opt.strategy == "single") cfg.ea.strategy = SearchStrategy::single_loop;
  if (opt.strategy == "two-phase") cfg.ea.strategy = SearchStrategy::two_phase;
  if (opt.seed) cfg.ea.seed = *opt.seed;
  if (opt.population) cfg.ea.population = *opt.population;
  if (opt.generations) cfg.ea.generations = *opt.generations;
  if (opt.timeout) cfg.ea.eval_timeout_s = *opt.timeout;
  validate(cfg);

  std::unique_ptr<Evaluator> inner;
  if (opt.evaluator == "surrogate") {
    inner = std::make_unique<SurrogateEvaluator>();
  } else if (opt.evaluator.rfind("external:", 0) == 0) {
    inner = std::make_unique<ExternalEvaluator>(opt.evaluator.substr(9), cfg.ea.eval_timeout_s,
                                                opt.workers);
  } else {
    std::cerr << "unknown evaluator '" << opt.evaluator << "' (surrogate|external:<command>)\n";
    return kExitUsage;
  }
  EvaluationCache cache;
  if (!opt.cache.empty()) cache.attach_file(opt.cache);
  CachedEvaluator evaluator(*inner, cache);

  const fs::path out_dir = opt.out_dir;
  fs::create_directories(out_dir);
  std::ofstream run_log(out_dir / "run.log", std::ios::binary);
  if (!run_log) throw std::runtime_error("cannot write " + (out_dir / "run.log").string());

  const auto result = run_search(cfg, evaluator, [&](const GenerationStats& st) {
    const auto line = to_json(st).dump();
    run_log << line << '\n';
    log::info(line);
  });
  run_log.close();

  write_file(out_dir / "pareto.csv", export_pareto_csv(result.archive, cfg.params));
  write_file(out_dir / "pareto.json", export_pareto_json(result.archive, cfg.params).dump() + "\n");
  write_file(out_dir / "pareto.svg", render_pareto_svg(result.archive));
  std::cout << "archive: " << result.archive.size() << " individuals, " << result.evaluations
            << " evaluations\n"
            << "wrote " << (out_dir / "pareto.csv").string() << ", pareto.json, pareto.svg, run.log\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cellspace: cell-based neural architecture search spaces"};
  app.require_subcommand(1);

  std::string config_path;
  const auto add_config = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "search space config (JSON)")->required();
  };

  auto* space = app.add_subcommand("space", "search space queries");
  space->require_subcommand(1);
  auto* info = space->add_subcommand("info", "print every cardinality of the space");
  add_config(info);

  std::uint64_t seed = 1;
  std::size_t count = 1;
  auto* sample = app.add_subcommand("sample", "print random genomes as JSON lines");
  add_config(sample);
  sample->add_option("--seed", seed, "random seed");
  sample->add_option("--count", count, "number of genomes");

  std::string genome_arg;
  auto* decode_cmd = app.add_subcommand("decode", "architecture export and summary of a genome");
  add_config(decode_cmd);
  decode_cmd->add_option("--genome", genome_arg, "JSON, packed CSV, or a file holding either")
      ->required();

  auto* params = app.add_subcommand("params", "parameter count with per-node breakdown");
  add_config(params);
  params->add_option("--genome", genome_arg, "JSON, packed CSV, or a file holding either")->required();

  SearchOptions sopt;
  auto* search = app.add_subcommand("search", "run the evolutionary search");
  add_config(search);
  search->add_option("--evaluator", sopt.evaluator, "surrogate | external:<command>");
  search->add_option("--strategy", sopt.strategy, "single | two-phase")
      ->check(CLI::IsMember({"single", "two-phase"}));
  search->add_option("--seed", sopt.seed, "override ea.seed");
  search->add_option("--population", sopt.population, "override ea.population");
  search->add_option("--generations", sopt.generations, "override ea.generations");
  search->add_option("--timeout", sopt.timeout, "override ea.eval_timeout_s (seconds)");
  search->add_option("--workers", sopt.workers, "external evaluator processes");
  search->add_option("--cache", sopt.cache, "persistent evaluation cache (NDJSON)");
  search->add_option("--out-dir", sopt.out_dir, "output directory");

  std::string out_path;
  auto* export_cmd = app.add_subcommand("export", "write the architecture export of a genome");
  add_config(export_cmd);
  export_cmd->add_option("--genome", genome_arg, "JSON, packed CSV, or a file holding either")
      ->required();
  export_cmd->add_option("--out", out_path, "output file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    const auto cfg = load_config(config_path);
    if (info->parsed()) {
      cmd_space_info(cfg);
    } else if (sample->parsed()) {
      cmd_sample(cfg, seed, count);
    } else if (decode_cmd->parsed()) {
      cmd_decode(cfg, parse_genome_arg(genome_arg, cfg.params));
    } else if (params->parsed()) {
      cmd_params(cfg, parse_genome_arg(genome_arg, cfg.params));
    } else if (search->parsed()) {
      return cmd_search(cfg, sopt);
    } else if (export_cmd->parsed()) {
      const auto g = parse_genome_arg(genome_arg, cfg.params);
      write_file(out_path, canonical_dump(export_architecture(g, cfg)) + "\n");
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const GenomeError& e) {
    std::cerr << "genome error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const SearchError& e) {
    std::cerr << "search error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const EvaluatorError& e) {
    std::cerr << "evaluator error: " << e.what() << '\n';
    return kExitEvaluator;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
