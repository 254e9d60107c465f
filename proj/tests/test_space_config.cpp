#include <gtest/gtest.h>

#include <fstream>

#include "cellspace/space_config.hpp"
#include "support.hpp"

using namespace cellspace;
using testing_support::source_path;

namespace {

// Repeated multiplication, independent of the library's pow().
BigInt power(BigInt base, unsigned exp) {
  BigInt r = 1;
  for (unsigned i = 0; i < exp; ++i) r *= base;
  return r;
}

SpaceParams params(std::uint32_t L_c, std::uint32_t N_c, std::uint32_t P_c, std::uint32_t L_p,
                   std::uint32_t L_B, std::uint32_t N_B, std::uint32_t P_B, std::uint32_t L_r,
                   std::uint32_t N_r, std::uint32_t P_r) {
  return {L_c, N_c, P_c, L_p, L_B, N_B, P_B, L_r, N_r, P_r};
}

SpaceParams reference_params() { return params(2, 2, 2, 3, 4, 5, 7, 3, 3, 2); }

Json default_json() { return to_json(default_config()); }

ConfigError config_error(const Json& j) {
  try {
    config_from_json(j);
  } catch (const ConfigError& e) {
    return e;
  }
  ADD_FAILURE() << "expected ConfigError";
  return ConfigError(ConfigError::Kind::io, "", "none");
}

}  // namespace

TEST(Cardinality, PipelineExamples) {
  EXPECT_EQ(pipeline_cardinality(reference_params()), 1500625);
  EXPECT_EQ(pipeline_cardinality(reference_params()), power(35, 4));
  for (std::uint32_t lb = 1; lb <= 6; ++lb)
    EXPECT_EQ(pipeline_cardinality(params(1, 1, 1, 1, lb, 1, 1, 1, 1, 1)), 1);
  EXPECT_EQ(pipeline_cardinality(params(1, 1, 1, 1, 2, 2, 2, 1, 1, 1)), 16);
}

TEST(Cardinality, ReductionExamples) {
  EXPECT_EQ(reduction_cardinality(reference_params()), 60);
  EXPECT_EQ(reduction_cardinality(params(1, 1, 1, 1, 1, 1, 1, 1, 1, 1)), 2);
  EXPECT_EQ(reduction_cardinality(params(1, 1, 1, 1, 1, 1, 1, 1, 2, 1)), 4);
}

TEST(Cardinality, ConvPartNeedsBigIntegers) {
  const auto v = conv_part_cardinality(reference_params());
  EXPECT_EQ(v.str(), "3379220508056640625");
  EXPECT_EQ(v, power(35, 12));
  EXPECT_GT(v, BigInt(std::numeric_limits<std::uint32_t>::max()));

  auto p = reference_params();
  p.pipelines = 1;
  EXPECT_EQ(conv_part_cardinality(p), pipeline_cardinality(p));
  EXPECT_EQ(conv_part_cardinality(params(1, 1, 1, 2, 1, 2, 2, 2, 1, 1)), 16);
}

TEST(Cardinality, StructureExamples) {
  EXPECT_EQ(structure_cardinality(reference_params()), 16);
  EXPECT_EQ(structure_cardinality(params(1, 3, 1, 1, 1, 1, 1, 1, 1, 1)), 3);
  EXPECT_EQ(structure_cardinality(params(3, 2, 3, 1, 1, 1, 1, 1, 1, 1)), 216);
}

TEST(Cardinality, CellComplexityVerbatim) {
  EXPECT_EQ(cell_complexity(reference_params()), 1500793);
  EXPECT_EQ(cell_complexity(params(1, 1, 1, 1, 1, 1, 1, 1, 1, 1)), 3);
  EXPECT_EQ(cell_complexity(params(1, 1, 1, 1, 1, 2, 1, 1, 2, 1)), 8);
}

TEST(Cardinality, TotalExamples) {
  const BigInt expected = 16 * power(power(35, 12) * 60, 2);
  EXPECT_EQ(total_cardinality(reference_params()), expected);
  EXPECT_EQ(total_cardinality(reference_params()).str(),
            "657741959543265430301284790039062500000000");
  EXPECT_EQ(total_cardinality(params(1, 1, 1, 1, 1, 1, 1, 1, 1, 1)), 2);
  EXPECT_EQ(total_cardinality(params(1, 1, 1, 1, 2, 2, 2, 1, 2, 1)), 64);
}

TEST(Cardinality, RandomParamsAgreeWithClosedForms) {
  Rng rng(11);
  for (int t = 0; t < 200; ++t) {
    const auto r = [&](std::uint64_t hi) { return static_cast<std::uint32_t>(1 + rng.uniform_below(hi)); };
    const auto p = params(r(3), r(3), r(3), r(3), r(4), r(6), r(7), r(3), r(4), r(2));
    const BigInt pipe = power(p.block_options * p.blocks, p.block_layers);
    const BigInt red = p.merge_modes * power(p.reduction_blocks, p.reduction_layers) +
                       p.merge_modes * p.reduction_blocks;
    EXPECT_EQ(pipeline_cardinality(p), pipe);
    EXPECT_EQ(reduction_cardinality(p), red);
    EXPECT_EQ(total_cardinality(p),
              power(p.sampling_modes * p.cells, p.cell_layers) *
                  power(power(pipe, p.pipelines) * red, p.cells));
  }
}

TEST(LoadConfig, ShippedDefaultMatchesBuiltIn) {
  const auto cfg = load_config(source_path("configs/default.json"));
  EXPECT_EQ(cfg.params, reference_params());
  EXPECT_EQ(cfg, default_config());
  EXPECT_EQ(cfg.total_param, 150000000u);
  EXPECT_EQ(cfg.ea.population, 20u);
  EXPECT_EQ(cfg.ea.generations, 1000u);
  EXPECT_EQ(cfg.ea.crossover_eta, 3.0);
  EXPECT_EQ(cfg.ea.mutation_eta, 3.0);
  EXPECT_EQ(cfg.ea.training.batch_size, 128);
  EXPECT_EQ(cfg.ea.training.epochs, 10);
}

TEST(LoadConfig, DerivedCountsFollowListLengths) {
  auto j = default_json();
  j["blocks"].erase(4);
  j["merge_modes"] = {"concat"};
  j["sampling_modes"] = {"same", "down", "up"};
  const auto cfg = config_from_json(j);
  EXPECT_EQ(cfg.params.blocks, 4u);
  EXPECT_EQ(cfg.params.merge_modes, 1u);
  EXPECT_EQ(cfg.params.sampling_modes, 3u);
  EXPECT_EQ(cfg.params.block_options, cfg.block_options.size());
  EXPECT_EQ(cfg.params.reduction_blocks, cfg.reduction_blocks.size());
}

TEST(LoadConfig, EmptyBlocksNamesKey) {
  auto j = default_json();
  j["blocks"] = Json::array();
  const auto e = config_error(j);
  EXPECT_EQ(e.kind(), ConfigError::Kind::validation);
  EXPECT_EQ(e.key(), "blocks");
}

TEST(LoadConfig, OmittedReductionLayersDefaultToPipelines) {
  auto j = default_json();
  j["layers"].erase("L_r");
  EXPECT_EQ(config_from_json(j).params.reduction_layers, 3u);
  j["layers"]["L_p"] = 2;
  EXPECT_EQ(config_from_json(j).params.reduction_layers, 2u);
}

TEST(LoadConfig, MismatchedReductionLayersNeedOverride) {
  auto j = default_json();
  j["layers"]["L_r"] = 2;
  EXPECT_EQ(config_error(j).key(), "layers.L_r");
  j["layers"]["allow_mismatched_L_r"] = true;
  const auto cfg = config_from_json(j);
  EXPECT_EQ(cfg.params.reduction_layers, 2u);
  EXPECT_TRUE(cfg.allow_mismatched_reduction_layers);
}

TEST(LoadConfig, UnknownKeysRejected) {
  auto j = default_json();
  j["colour"] = "blue";
  EXPECT_EQ(config_error(j).key(), "colour");
  j = default_json();
  j["layers"]["L_x"] = 1;
  EXPECT_EQ(config_error(j).key(), "layers.L_x");
  j = default_json();
  j["ea"]["populaton"] = 10;
  EXPECT_EQ(config_error(j).key(), "ea.populaton");
}

TEST(LoadConfig, UnknownEnumTagNamesKey) {
  auto j = default_json();
  j["merge_modes"] = {"add", "multiply"};
  const auto e = config_error(j);
  EXPECT_EQ(e.kind(), ConfigError::Kind::validation);
  EXPECT_NE(e.key().find("merge_modes"), std::string::npos);

  j = default_json();
  j["blocks"][0]["op"] = "attention";
  EXPECT_NE(config_error(j).key().find("blocks"), std::string::npos);
}

TEST(LoadConfig, ValidationErrors) {
  struct Case {
    const char* pointer;
    Json value;
    const char* key;
  };
  const std::vector<Case> cases = {
      {"/block_options/0/batch_norm", true, "block_options"},
      {"/reduction_blocks/0/op", "depthwise_sep_conv2d", "reduction_blocks"},
      {"/ea/population", 7, "ea.population"},
      {"/ea/population", 2, "ea.population"},
      {"/ea/crossover_prob", 1.5, "ea.crossover_prob"},
      {"/ea/mutation_eta", 0, "ea.mutation_eta"},
      {"/objectives/total_param", 0, "objectives.total_param"},
      {"/stem_filters", 0, "stem_filters"},
      {"/head", Json::array(), "head"},
      {"/layers/L_B", 0, "layers.L_B"},
  };
  for (const auto& c : cases) {
    auto j = default_json();
    j[Json::json_pointer(c.pointer)] = c.value;
    const auto e = config_error(j);
    EXPECT_NE(e.key().find(c.key), std::string::npos) << c.pointer << " gave " << e.what();
  }
}

TEST(LoadConfig, ParseAndIoErrors) {
  try {
    parse_config("{\"blocks\": [");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.kind(), ConfigError::Kind::parse);
  }
  try {
    load_config("/nonexistent/cellspace.json");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.kind(), ConfigError::Kind::io);
  }
}

TEST(LoadConfig, CanonicalJsonRoundTrip) {
  for (const char* name : {"configs/default.json", "configs/tiny.json"}) {
    const auto cfg = load_config(source_path(name));
    const auto again = config_from_json(to_json(cfg));
    EXPECT_EQ(again, cfg) << name;
    EXPECT_EQ(to_json(again).dump(), to_json(cfg).dump()) << name;
  }
}

TEST(LoadConfig, TinyFixture) {
  const auto cfg = testing_support::tiny_config();
  EXPECT_EQ(cfg.params, params(1, 1, 1, 1, 2, 2, 2, 1, 2, 1));
  EXPECT_EQ(total_cardinality(cfg.params), 64);
}
