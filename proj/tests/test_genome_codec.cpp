#include <gtest/gtest.h>

#include <boost/math/distributions/chi_squared.hpp>
#include <charconv>
#include <cmath>
#include <set>

#include "cellspace/genome_codec.hpp"
#include "support.hpp"

using namespace cellspace;

namespace {

const SearchConfig& reference() {
  static const SearchConfig cfg = default_config();
  return cfg;
}

// Little-endian digits of v in `base`, via std::to_chars (which prints
// most-significant first).
std::vector<std::uint32_t> to_chars_digits(std::uint64_t v, int base, std::size_t count) {
  char buf[80];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, base);
  std::vector<std::uint32_t> out;
  for (const char* p = res.ptr; p != buf;) {
    const char ch = *--p;
    out.push_back(ch <= '9' ? ch - '0' : ch - 'a' + 10);
  }
  out.resize(count, 0);
  return out;
}

// Packs by summing digit * radix^position over a gene's digits.
BigInt oracle_gene(const std::vector<std::uint32_t>& digits, std::size_t begin, std::size_t count,
                   std::uint64_t radix) {
  BigInt v = 0;
  BigInt weight = 1;
  for (std::size_t i = 0; i < count; ++i) {
    v += weight * digits[begin + i];
    weight *= radix;
  }
  return v;
}

double chi_square_p(const std::vector<double>& observed, double expected_each) {
  double stat = 0.0;
  for (double o : observed) stat += (o - expected_each) * (o - expected_each) / expected_each;
  boost::math::chi_squared dist(static_cast<double>(observed.size() - 1));
  return boost::math::cdf(boost::math::complement(dist, stat));
}

}  // namespace

TEST(StructureGene, Examples) {
  const auto& p = reference().params;
  for (const auto& l : decode_structure_gene(0, p)) {
    EXPECT_EQ(l.cell, 0u);
    EXPECT_EQ(l.sampling, 0u);
  }
  const auto six = decode_structure_gene(6, p);
  ASSERT_EQ(six.size(), 2u);
  EXPECT_EQ(six[0], (LayerPlan{0, 1}));
  EXPECT_EQ(six[1], (LayerPlan{1, 0}));
  const auto fifteen = decode_structure_gene(15, p);
  EXPECT_EQ(fifteen[0], (LayerPlan{1, 1}));
  EXPECT_EQ(fifteen[1], (LayerPlan{1, 1}));
  EXPECT_THROW(decode_structure_gene(16, p), GenomeError);
  EXPECT_THROW(decode_structure_gene(-1, p), GenomeError);
}

TEST(PipelineGene, Examples) {
  const auto& p = reference().params;
  for (const auto& b : decode_pipeline_gene(0, p)) EXPECT_EQ(b, (BlockChoice{0, 0}));

  const auto g36 = decode_pipeline_gene(36, p);
  ASSERT_EQ(g36.size(), 4u);
  EXPECT_EQ(g36[0], (BlockChoice{1, 0}));
  EXPECT_EQ(g36[1], (BlockChoice{1, 0}));
  EXPECT_EQ(g36[2], (BlockChoice{0, 0}));
  EXPECT_EQ(g36[3], (BlockChoice{0, 0}));

  for (const auto& b : decode_pipeline_gene(1500624, p)) EXPECT_EQ(b, (BlockChoice{4, 6}));
  EXPECT_THROW(decode_pipeline_gene(1500625, p), GenomeError);
}

TEST(PipelineGene, AgreesWithBase35Conversion) {
  const auto& p = reference().params;
  Rng rng(5);
  for (int t = 0; t < 2000; ++t) {
    const auto x = rng.uniform_below(1500625);
    const auto digits = to_chars_digits(x, 35, 4);
    const auto blocks = decode_pipeline_gene(x, p);
    for (std::size_t k = 0; k < 4; ++k) {
      EXPECT_EQ(blocks[k].block, digits[k] % 5);
      EXPECT_EQ(blocks[k].option, digits[k] / 5);
    }
  }
}

TEST(ReductionGene, Examples) {
  const auto& p = reference().params;
  const auto r0 = decode_reduction_gene(0, p);
  EXPECT_EQ(r0.placement, ReductionPlan::Placement::before_merge);
  EXPECT_EQ(r0.merge, 0u);
  EXPECT_EQ(r0.blocks, (std::vector<std::uint32_t>{0, 0, 0}));

  const auto r54 = decode_reduction_gene(54, p);
  EXPECT_EQ(r54.placement, ReductionPlan::Placement::after_merge);
  EXPECT_EQ(r54.merge, 0u);
  EXPECT_EQ(r54.blocks, (std::vector<std::uint32_t>{0}));

  const auto r59 = decode_reduction_gene(59, p);
  EXPECT_EQ(r59.placement, ReductionPlan::Placement::after_merge);
  EXPECT_EQ(r59.merge, 1u);
  EXPECT_EQ(r59.blocks, (std::vector<std::uint32_t>{2}));

  // 1 * 27 + (2 + 1*3 + 0*9): concat, branches [2,1,0].
  const auto r32 = decode_reduction_gene(32, p);
  EXPECT_EQ(r32.placement, ReductionPlan::Placement::before_merge);
  EXPECT_EQ(r32.merge, 1u);
  EXPECT_EQ(r32.blocks, (std::vector<std::uint32_t>{2, 1, 0}));

  EXPECT_THROW(decode_reduction_gene(60, p), GenomeError);
}

TEST(ReductionGene, EveryCodeDistinct) {
  const auto& p = reference().params;
  std::set<ReductionPlan> seen;
  for (int r = 0; r < 60; ++r) seen.insert(decode_reduction_gene(r, p));
  EXPECT_EQ(seen.size(), 60u);
}

TEST(Pack, ZeroAndStructureExample) {
  const auto& p = reference().params;
  const auto zero = zero_genome(p);
  const auto packed = pack(zero, p);
  ASSERT_EQ(packed.genes.size(), 9u);
  for (const auto& gene : packed.genes) EXPECT_EQ(gene, 0);
  EXPECT_EQ(unpack(packed, p), zero);

  auto g = zero;
  g.digits[0] = 2;
  g.digits[1] = 1;
  EXPECT_EQ(pack(g, p).genes[0], 6);
}

TEST(Pack, MatchesOracleAndRoundTrips) {
  const auto& p = reference().params;
  const GenomeLayout layout(p);
  Rng rng(2024);
  for (int t = 0; t < 10000; ++t) {
    const auto g = random_genome(rng, layout);
    const auto packed = pack(g, p);
    ASSERT_EQ(unpack(packed, p), g);
    if (t % 10 != 0) continue;
    // X = [x, x_11..x_1Lp, r_1, x_21.., r_2]
    ASSERT_EQ(packed.genes[0], oracle_gene(g.digits, 0, p.cell_layers, layout.radix(0)));
    std::size_t gi = 1;
    for (std::uint32_t c = 0; c < p.cells; ++c) {
      for (std::uint32_t j = 0; j < p.pipelines; ++j)
        ASSERT_EQ(packed.genes[gi++],
                  oracle_gene(g.digits, layout.block_index(c, j, 0), p.block_layers, 35));
      ASSERT_EQ(packed.genes[gi++], g.digits[layout.reduction_index(c)]);
    }
  }
}

TEST(Pack, OutOfRangeRejected) {
  const auto& p = reference().params;
  auto packed = pack(zero_genome(p), p);
  packed.genes[1] = 1500625;
  EXPECT_THROW(unpack(packed, p), GenomeError);
  packed = pack(zero_genome(p), p);
  packed.genes.pop_back();
  EXPECT_THROW(unpack(packed, p), GenomeError);

  auto g = zero_genome(p);
  g.digits[2] = 35;
  EXPECT_THROW(pack(g, p), GenomeError);
  EXPECT_THROW(decode(g, reference()), GenomeError);
}

TEST(Decode, AllZeroGenome) {
  const auto plan = decode(zero_genome(reference().params), reference());
  ASSERT_EQ(plan.layers.size(), 2u);
  for (const auto& l : plan.layers) {
    EXPECT_EQ(l.cell, 0u);
    EXPECT_EQ(reference().sampling_modes[l.sampling], SamplingMode::same);
  }
  ASSERT_EQ(plan.cells.size(), 2u);
  for (const auto& cell : plan.cells) {
    ASSERT_EQ(cell.pipelines.size(), 3u);
    for (const auto& pipe : cell.pipelines) {
      ASSERT_EQ(pipe.size(), 4u);
      for (const auto& b : pipe) {
        EXPECT_EQ(reference().blocks[b.block].name, "conv3x3");
        EXPECT_TRUE(reference().block_options[b.option].skip);
      }
    }
    EXPECT_EQ(cell.reduction.placement, ReductionPlan::Placement::before_merge);
    EXPECT_EQ(reference().merge_modes[cell.reduction.merge], MergeMode::add);
    for (auto r : cell.reduction.blocks)
      EXPECT_EQ(reference().reduction_blocks[r].kind, OpKind::maxpool);
  }
}

TEST(Decode, TinyFixtureIsBijective) {
  const auto cfg = testing_support::tiny_config();
  const GenomeLayout layout(cfg.params);
  std::set<ArchitecturePlan> plans;
  std::set<DigitGenome> genomes;
  std::set<std::vector<std::string>> packed;
  DigitGenome g = zero_genome(cfg.params);
  std::size_t count = 0;
  do {
    ++count;
    genomes.insert(g);
    plans.insert(decode(g, cfg));
    std::vector<std::string> genes;
    for (const auto& v : pack(g, cfg.params).genes) genes.push_back(v.str());
    packed.insert(genes);
    EXPECT_EQ(unpack(pack(g, cfg.params), cfg.params), g);
  } while (increment(g, layout));
  EXPECT_EQ(BigInt(count), total_cardinality(cfg.params));
  EXPECT_EQ(count, 64u);
  EXPECT_EQ(plans.size(), 64u);
  EXPECT_EQ(genomes.size(), 64u);
  EXPECT_EQ(packed.size(), 64u);
}

TEST(Decode, EnumerationCountMatchesCardinality) {
  auto j = to_json(testing_support::tiny_config());
  j["layers"] = {{"L_c", 2}, {"N_c", 2}, {"L_p", 2}, {"L_B", 1}, {"L_r", 2}};
  j["sampling_modes"] = {"same", "down"};
  const auto cfg = config_from_json(j);
  const GenomeLayout layout(cfg.params);
  std::set<ArchitecturePlan> plans;
  DigitGenome g = zero_genome(cfg.params);
  std::size_t count = 0;
  do {
    ++count;
    plans.insert(decode(g, cfg));
  } while (increment(g, layout));
  EXPECT_EQ(BigInt(count), total_cardinality(cfg.params));
  EXPECT_EQ(plans.size(), count);
}

TEST(RandomGenome, DeterministicPerSeed) {
  const auto& p = reference().params;
  EXPECT_EQ(random_genome(42, p), random_genome(42, p));
  EXPECT_NE(random_genome(42, p), random_genome(43, p));
}

TEST(RandomGenome, TinyFixtureCoversEveryPlanUniformly) {
  const auto cfg = testing_support::tiny_config();
  const GenomeLayout layout(cfg.params);
  Rng rng(99);
  std::map<DigitGenome, double> counts;
  const int n = 10000;
  for (int i = 0; i < n; ++i) counts[random_genome(rng, layout)] += 1;
  ASSERT_EQ(counts.size(), 64u);
  std::vector<double> obs;
  for (const auto& [g, c] : counts) obs.push_back(c);
  EXPECT_GT(chi_square_p(obs, n / 64.0), 0.001);
}

TEST(RandomGenome, DigitHistogramsWithinFiveSigma) {
  const auto& p = reference().params;
  const GenomeLayout layout(p);
  Rng rng(7);
  const int n = 100000;
  std::vector<std::vector<double>> hist(layout.size());
  for (std::size_t i = 0; i < layout.size(); ++i) hist[i].assign(layout.radix(i), 0.0);
  for (int t = 0; t < n; ++t) {
    const auto g = random_genome(rng, layout);
    for (std::size_t i = 0; i < g.digits.size(); ++i) hist[i][g.digits[i]] += 1;
  }
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const double k = static_cast<double>(layout.radix(i));
    const double mean = n / k;
    const double sigma = std::sqrt(n * (1.0 / k) * (1.0 - 1.0 / k));
    for (double c : hist[i]) EXPECT_LT(std::fabs(c - mean), 5 * sigma) << "digit " << i;
  }
}

TEST(Hash, FnvReferenceValues) {
  EXPECT_EQ(genome_hash(DigitGenome{}), 14695981039346656037ull);
  // Reference FNV-1a 64 over 00 00 00 00, unrolled.
  std::uint64_t h = 14695981039346656037ull;
  for (int i = 0; i < 4; ++i) h = (h ^ 0u) * 1099511628211ull;
  EXPECT_EQ(genome_hash(DigitGenome{{0}}), h);
  // Published test vector: FNV-1a 64 of "a".
  const unsigned char a = 'a';
  EXPECT_EQ(fnv1a64(&a, 1), 0xaf63dc4c8601ec8cull);
  // Big-endian byte order: digit 1 hashes as 00 00 00 01.
  std::uint64_t h1 = 14695981039346656037ull;
  for (unsigned char b : {0, 0, 0, 1}) h1 = (h1 ^ b) * 1099511628211ull;
  EXPECT_EQ(genome_hash(DigitGenome{{1}}), h1);
}

TEST(Hash, EqualGenomesEqualHashesAndBucketsUniform) {
  const auto& p = reference().params;
  const GenomeLayout layout(p);
  Rng rng(3);
  const int n = 100000;
  const int buckets = 256;
  std::vector<double> counts(buckets, 0.0);
  for (int t = 0; t < n; ++t) {
    const auto g = random_genome(rng, layout);
    const auto copy = g;
    ASSERT_EQ(genome_hash(g), genome_hash(copy));
    counts[genome_hash(g) >> 56] += 1;
  }
  EXPECT_GT(chi_square_p(counts, static_cast<double>(n) / buckets), 0.001);
}

TEST(GenomeJson, DigitsAndPackedForms) {
  const auto& p = reference().params;
  const auto g = random_genome(17, p);
  const auto packed = pack(g, p);
  EXPECT_EQ(genome_from_json(to_json(g), p), g);
  EXPECT_EQ(genome_from_json(to_json(packed), p), g);
  Json both = to_json(g);
  both["packed"] = to_json(packed)["packed"];
  EXPECT_EQ(genome_from_json(both, p), g);
  both["digits"][0] = (g.digits[0] + 1) % 4;
  EXPECT_THROW(genome_from_json(both, p), GenomeError);
  EXPECT_THROW(genome_from_json(Json::object(), p), GenomeError);
  EXPECT_THROW(genome_from_json(Json{{"packed", {"12x"}}}, p), GenomeError);
  EXPECT_THROW(genome_from_json(Json{{"digits", {1, 2}}}, p), GenomeError);
}
