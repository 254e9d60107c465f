#include <gtest/gtest.h>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <sstream>

#include "cellspace/cellspace.hpp"
#include "support.hpp"

using namespace cellspace;
using testing_support::run_command;
using testing_support::slurp;
using testing_support::source_path;

namespace {

const std::string kCli = CELLSPACE_CLI;
const std::string kDefault = source_path("configs/default.json");

std::string quote(const std::string& s) { return "'" + s + "'"; }

Individual entry(std::uint32_t d, double f1, double f2, std::uint64_t params = 0) {
  return {DigitGenome{{0, 0, d, 0}}, {f1, f2, f2 - 1.0}, params, 0, 0.0};
}

boost::property_tree::ptree parse_xml(const std::string& text) {
  std::istringstream in(text);
  boost::property_tree::ptree tree;
  boost::property_tree::read_xml(in, tree);
  return tree;
}

int count_elements(const boost::property_tree::ptree& tree, const std::string& name) {
  int n = 0;
  for (const auto& [key, child] : tree) {
    if (key == name) ++n;
    n += count_elements(child, name);
  }
  return n;
}

}  // namespace

TEST(ArchitectureExport, ZeroGenomeMatchesGolden) {
  const auto cfg = default_config();
  const auto text = canonical_dump(export_architecture(zero_genome(cfg.params), cfg)) + "\n";
  EXPECT_EQ(text, slurp(source_path("tests/golden/zero_genome_export.json")));
}

TEST(ArchitectureExport, CanonicalFormIsAFixpoint) {
  const auto cfg = default_config();
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto text = canonical_dump(export_architecture(random_genome(seed, cfg.params), cfg));
    EXPECT_EQ(canonical_dump(Json::parse(text)), text);
    EXPECT_EQ(text.find('\n'), std::string::npos);
    EXPECT_EQ(text.find(": "), std::string::npos);
  }
}

TEST(ArchitectureExport, ImportRecomputesParamCount) {
  const auto cfg = default_config();
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto g = random_genome(seed, cfg.params);
    const auto doc = export_architecture(g, cfg);
    const auto imported = import_architecture(Json::parse(canonical_dump(doc)));
    EXPECT_EQ(imported.genome, g);
    EXPECT_EQ(imported.param_count, total_param_count(imported.graph));
    EXPECT_EQ(imported.param_count, total_param_count(build_graph(decode(g, cfg), cfg)));
  }
}

TEST(ArchitectureExport, TamperedShapesAndVersionsRejected) {
  const auto cfg = default_config();
  auto doc = export_architecture(zero_genome(cfg.params), cfg);
  auto bad = doc;
  bad["graph"]["nodes"][1]["out_shape"] = {28, 28, 31};
  EXPECT_THROW(import_architecture(bad), ShapeError);
  bad = doc;
  bad["format_version"] = "2";
  EXPECT_THROW(import_architecture(bad), std::runtime_error);
}

TEST(ArchitectureExport, FingerprintTracksConfig) {
  auto cfg = default_config();
  const auto fp = config_fingerprint(cfg);
  EXPECT_EQ(fp.size(), 16u);
  EXPECT_EQ(fp, config_fingerprint(load_config(kDefault)));
  cfg.stem_filters = 16;
  EXPECT_NE(config_fingerprint(cfg), fp);
}

TEST(ParetoCsv, EmptyArchiveIsHeaderOnly) {
  EXPECT_EQ(export_pareto_csv(ParetoArchive{}, testing_support::tiny_config().params),
            "genome_packed,f1,f2,g,param_count\n");
}

TEST(ParetoCsv, RowsInF1Order) {
  const auto p = testing_support::tiny_config().params;
  ParetoArchive a;
  a.offer(entry(3, 0.5, 0.25, 37500000));
  a.offer(entry(1, 0.25, 0.5, 75000000));
  const auto csv = export_pareto_csv(a, p);
  EXPECT_EQ(csv,
            "genome_packed,f1,f2,g,param_count\n"
            "0;4;0,0.25,0.5,-0.5,75000000\n"
            "0;12;0,0.5,0.25,-0.75,37500000\n");
}

TEST(ParetoJson, RoundTrip) {
  const auto cfg = default_config();
  SurrogateEvaluator ev;
  auto run = cfg;
  run.ea.generations = 5;
  const auto archive = evolve_single_loop(run, ev).archive;
  const auto j = export_pareto_json(archive, cfg.params);
  const auto back = pareto_from_json(Json::parse(j.dump()), cfg.params);
  EXPECT_EQ(export_pareto_json(back, cfg.params).dump(), j.dump());
  EXPECT_EQ(export_pareto_csv(back, cfg.params), export_pareto_csv(archive, cfg.params));
  ASSERT_EQ(back.size(), archive.size());
  EXPECT_EQ(j["entries"][0]["packed"].size(), 9u);

  auto dominated = j;
  auto extra = dominated["entries"][0];
  extra["f1"] = extra["f1"].get<double>() + 0.1;
  extra["f2"] = extra["f2"].get<double>() + 0.1;
  extra["digits"][0] = (extra["digits"][0].get<int>() + 1) % 4;
  dominated["entries"].push_back(extra);
  EXPECT_THROW(pareto_from_json(dominated, cfg.params), std::runtime_error);
}

TEST(ParetoSvg, EmptyArchiveHasAxesOnly) {
  const auto svg = render_pareto_svg(ParetoArchive{});
  const auto tree = parse_xml(svg);
  EXPECT_EQ(count_elements(tree, "circle"), 0);
  EXPECT_GE(count_elements(tree, "line"), 2);
  EXPECT_NE(svg.find("params / TotalParam"), std::string::npos);
  EXPECT_NE(svg.find("1 \xE2\x88\x92 accuracy"), std::string::npos);
  EXPECT_EQ(tree.get<std::string>("svg.<xmlattr>.width"), "800");
  EXPECT_EQ(tree.get<std::string>("svg.<xmlattr>.height"), "600");
}

TEST(ParetoSvg, SinglePointAffineMap) {
  ParetoArchive a;
  a.offer(entry(0, 0.05, 0.1));
  const auto svg = render_pareto_svg(a);
  const auto tree = parse_xml(svg);
  ASSERT_EQ(count_elements(tree, "circle"), 1);
  // x: 80 + 700 * 0.1 / 0.105;  y: 540 - 520 * 0.05 / 0.0525.
  EXPECT_NE(svg.find("<circle cx=\"746.67\" cy=\"44.76\""), std::string::npos) << svg;
  EXPECT_EQ(render_pareto_svg(a), svg);
}

TEST(ParetoSvg, InfeasiblePointsDrawnRed) {
  ParetoArchive a;
  a.offer(entry(0, 0.05, 1.5));
  const auto svg = render_pareto_svg(a);
  EXPECT_NE(svg.find("#d62728"), std::string::npos);
  EXPECT_NO_THROW(parse_xml(svg));
}

TEST(PlanSummary, ListsCellsAndTotal) {
  const auto cfg = default_config();
  const auto g = random_genome(3, cfg.params);
  const auto plan = decode(g, cfg);
  const auto graph = build_graph(plan, cfg);
  const auto text = plan_summary(plan, graph, cfg);
  EXPECT_NE(text.find("cell 0:"), std::string::npos);
  EXPECT_NE(text.find("cell 1:"), std::string::npos);
  EXPECT_NE(text.find("total params: " + std::to_string(total_param_count(graph))),
            std::string::npos);
}

TEST(Cli, SpaceInfoPrintsCardinalities) {
  const auto r = run_command(kCli + " space info --config " + quote(kDefault));
  EXPECT_EQ(r.exit_code, 0);
  EXPECT_NE(r.out.find("pipeline: 1500625\n"), std::string::npos);
  EXPECT_NE(r.out.find("convolution_part: 3379220508056640625\n"), std::string::npos);
  EXPECT_NE(r.out.find("reduction: 60\n"), std::string::npos);
  EXPECT_NE(r.out.find("structure: 16\n"), std::string::npos);
  EXPECT_NE(r.out.find("cell_complexity: 1500793\n"), std::string::npos);
  EXPECT_NE(r.out.find("total: 657741959543265430301284790039062500000000\n"), std::string::npos);
}

TEST(Cli, SampleDecodeParamsExport) {
  auto r = run_command(kCli + " sample --config " + quote(kDefault) + " --seed 5 --count 3");
  ASSERT_EQ(r.exit_code, 0);
  std::istringstream lines(r.out);
  std::string first;
  std::getline(lines, first);
  const auto cfg = default_config();
  EXPECT_EQ(genome_from_json(Json::parse(first), cfg.params), random_genome(5, cfg.params));
  EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 3);

  const auto g = random_genome(5, cfg.params);
  const auto graph = build_graph(decode(g, cfg), cfg);
  r = run_command(kCli + " params --config " + quote(kDefault) + " --genome " + quote(first));
  ASSERT_EQ(r.exit_code, 0);
  EXPECT_NE(r.out.find("total: " + std::to_string(total_param_count(graph)) + "\n"),
            std::string::npos);

  std::string packed;
  for (const auto& gene : pack(g, cfg.params).genes) packed += (packed.empty() ? "" : ",") + gene.str();
  r = run_command(kCli + " decode --config " + quote(kDefault) + " --genome " + quote(packed));
  ASSERT_EQ(r.exit_code, 0);
  EXPECT_EQ(r.out.substr(0, r.out.find('\n')), canonical_dump(export_architecture(g, graph, cfg)));

  const auto dir = testing_support::fresh_dir("cli_export");
  const auto zero = to_json(zero_genome(cfg.params)).dump();
  r = run_command(kCli + " export --config " + quote(kDefault) + " --genome " + quote(zero) +
                  " --out " + quote((dir / "zero.json").string()));
  ASSERT_EQ(r.exit_code, 0);
  EXPECT_EQ(slurp(dir / "zero.json"), slurp(source_path("tests/golden/zero_genome_export.json")));

  // A full export is accepted as a genome argument.
  r = run_command(kCli + " params --config " + quote(kDefault) + " --genome " +
                  quote((dir / "zero.json").string()));
  EXPECT_EQ(r.exit_code, 0);
}

TEST(Cli, SearchWritesAllArtifacts) {
  const auto dir = testing_support::fresh_dir("cli_search");
  const auto r = run_command(kCli + " search --config " + quote(kDefault) +
                             " --generations 3 --seed 2 --out-dir " + quote(dir.string()));
  ASSERT_EQ(r.exit_code, 0);
  for (const char* f : {"pareto.csv", "pareto.json", "pareto.svg", "run.log"})
    EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
  const auto log = slurp(dir / "run.log");
  EXPECT_EQ(std::count(log.begin(), log.end(), '\n'), 4);
  const auto first = Json::parse(log.substr(0, log.find('\n')));
  for (const char* k : {"gen", "evals", "best_f1", "archive_size", "hypervolume"})
    EXPECT_TRUE(first.contains(k)) << k;
  EXPECT_NO_THROW(parse_xml(slurp(dir / "pareto.svg")));
  const auto json = Json::parse(slurp(dir / "pareto.json"));
  EXPECT_EQ(pareto_from_json(json, default_config().params).size(), json["entries"].size());
}

TEST(Cli, ExternalEvaluatorAndCache) {
  const auto dir = testing_support::fresh_dir("cli_external");
  const auto tiny = source_path("configs/tiny.json");
  const std::string common = kCli + " search --config " + quote(tiny) +
                             " --generations 5 --evaluator " +
                             quote(std::string("external:") + CELLSPACE_FAKE_EVALUATOR + " echo") +
                             " --cache " + quote((dir / "cache.ndjson").string());
  auto r = run_command(common + " --out-dir " + quote((dir / "a").string()));
  ASSERT_EQ(r.exit_code, 0);
  const auto cached = slurp(dir / "cache.ndjson");
  EXPECT_FALSE(cached.empty());
  r = run_command(common + " --out-dir " + quote((dir / "b").string()));
  ASSERT_EQ(r.exit_code, 0);
  EXPECT_EQ(slurp(dir / "cache.ndjson"), cached);
  EXPECT_EQ(slurp(dir / "a" / "pareto.csv"), slurp(dir / "b" / "pareto.csv"));
}

TEST(Cli, ExitCodes) {
  EXPECT_EQ(run_command(kCli + " 2>/dev/null").exit_code, 2);
  EXPECT_EQ(run_command(kCli + " space info 2>/dev/null").exit_code, 2);
  EXPECT_EQ(run_command(kCli + " frobnicate --config x 2>/dev/null").exit_code, 2);
  EXPECT_EQ(run_command(kCli + " search --config " + quote(kDefault) +
                        " --strategy sideways 2>/dev/null")
                .exit_code,
            2);
  EXPECT_EQ(run_command(kCli + " space info --config /nonexistent.json 2>/dev/null").exit_code, 3);

  const auto dir = testing_support::fresh_dir("cli_codes");
  {
    std::ofstream bad(dir / "bad.json");
    bad << R"({"blocks": []})";
  }
  EXPECT_EQ(run_command(kCli + " space info --config " + quote((dir / "bad.json").string()) +
                        " 2>/dev/null")
                .exit_code,
            3);
  EXPECT_EQ(run_command(kCli + " decode --config " + quote(kDefault) +
                        " --genome '{\"digits\":[9,9]}' 2>/dev/null")
                .exit_code,
            3);
  EXPECT_EQ(run_command(kCli + " decode --config " + quote(kDefault) +
                        " --genome '1,2,x' 2>/dev/null")
                .exit_code,
            3);
  EXPECT_EQ(run_command(kCli + " search --config " + quote(kDefault) +
                        " --population 5 2>/dev/null")
                .exit_code,
            3);
  EXPECT_EQ(run_command(kCli + " search --config " + quote(kDefault) +
                        " --evaluator 'external:/nonexistent/trainer' --out-dir " +
                        quote(dir.string()) + " 2>/dev/null")
                .exit_code,
            4);
  EXPECT_EQ(run_command(kCli + " search --config " + quote(kDefault) +
                        " --evaluator oracle 2>/dev/null")
                .exit_code,
            2);
}
