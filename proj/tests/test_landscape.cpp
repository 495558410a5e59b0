#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "cag/landscape.hpp"
#include "support.hpp"

using namespace cag;

namespace {

NKLandscape two_site_fixture() {
  return NKLandscape(2, 0, 0, {{0.1, 0.9}, {0.2, 0.8}});
}

// Index for site i read off the genotype string by hand: the character at
// position (i + j) mod n contributes 2^j.
std::size_t hand_index(const std::string& g, std::size_t site, std::size_t k) {
  std::size_t idx = 0, weight = 1;
  for (std::size_t j = 0; j <= k; ++j, weight *= 2)
    if (g[(site + j) % g.size()] == '1') idx += weight;
  return idx;
}

}  // namespace

TEST(Genotype, StringAndIndexRoundTrip) {
  const auto g = Genotype::from_string("101");
  EXPECT_EQ(g.size(), 3u);
  EXPECT_TRUE(g[0]);
  EXPECT_FALSE(g[1]);
  EXPECT_EQ(g.to_string(), "101");
  EXPECT_EQ(g.index(), 5u);
  EXPECT_EQ(Genotype::from_index(5, 3), g);
  EXPECT_EQ(Genotype::from_index(1, 3).to_string(), "100");
  EXPECT_THROW(Genotype::from_string("102"), std::invalid_argument);
  EXPECT_THROW(Genotype::from_index(8, 3), std::invalid_argument);
}

TEST(GenerateNk, TableShapes) {
  const auto a = generate_nk(3, 2, 11);
  EXPECT_EQ(a.tables().size(), 3u);
  for (const auto& t : a.tables()) EXPECT_EQ(t.size(), 8u);
  const auto b = generate_nk(1, 0, 11);
  ASSERT_EQ(b.tables().size(), 1u);
  EXPECT_EQ(b.table(0).size(), 2u);
}

TEST(GenerateNk, SameSeedSameTables) {
  EXPECT_EQ(generate_nk(3, 2, 99).tables(), generate_nk(3, 2, 99).tables());
  EXPECT_NE(generate_nk(3, 2, 99).tables(), generate_nk(3, 2, 100).tables());
}

TEST(GenerateNk, ValuesInUnitInterval) {
  const auto l = generate_nk(8, 5, 3);
  for (const auto& t : l.tables())
    for (double v : t) {
      EXPECT_GE(v, 0.0);
      EXPECT_LT(v, 1.0);
    }
}

TEST(GenerateNk, SiteMajorDrawOrder) {
  // The first table takes the first 2^(k+1) draws, the second the next.
  std::mt19937_64 eng(5);
  const auto l = generate_nk(2, 1, 5);
  for (std::size_t site = 0; site < 2; ++site)
    for (std::size_t e = 0; e < 4; ++e) EXPECT_EQ(l.table(site)[e], double(eng() >> 11) * 0x1.0p-53);
}

TEST(GenerateNk, RejectsBadShapes) {
  EXPECT_THROW(generate_nk(0, 0, 1), std::invalid_argument);
  EXPECT_THROW(generate_nk(3, 3, 1), std::invalid_argument);
  EXPECT_THROW(generate_nk(3, 5, 1), std::invalid_argument);
}

TEST(Evaluate, DirectLookup) {
  const auto l = two_site_fixture();
  EXPECT_EQ(evaluate(l, Genotype::from_string("11")), (ScoreVector{0.9, 0.8}));
  EXPECT_EQ(evaluate(l, Genotype::from_string("00")), (ScoreVector{0.1, 0.2}));
  EXPECT_EQ(evaluate(l, Genotype::from_string("10")), (ScoreVector{0.9, 0.2}));
}

TEST(Evaluate, HandIndexedSeededLandscape) {
  const auto l = generate_nk(3, 2, 7);
  const std::string g = "101";
  // site 0 reads sites 0,1,2 = 1,0,1 -> 5; site 1 reads 1,2,0 = 0,1,1 -> 6;
  // site 2 reads 2,0,1 = 1,1,0 -> 3.
  EXPECT_EQ(hand_index(g, 0, 2), 5u);
  EXPECT_EQ(hand_index(g, 1, 2), 6u);
  EXPECT_EQ(hand_index(g, 2, 2), 3u);
  const ScoreVector expected{l.table(0)[5], l.table(1)[6], l.table(2)[3]};
  EXPECT_EQ(evaluate(l, Genotype::from_string(g)), expected);
}

TEST(Evaluate, MatchesHandIndexingEverywhere) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto l = generate_nk(5, 2, seed);
    for (std::uint64_t idx = 0; idx < 32; ++idx) {
      const auto g = Genotype::from_index(idx, 5);
      const auto s = g.to_string();
      ScoreVector expected;
      for (std::size_t i = 0; i < 5; ++i) expected.push_back(l.table(i)[hand_index(s, i, 2)]);
      EXPECT_EQ(evaluate(l, g), expected);
      EXPECT_EQ(evaluate_index(l, idx), expected);
    }
  }
}

TEST(Evaluate, PureFunction) {
  const auto l = generate_nk(6, 3, 21);
  const auto g = Genotype::from_string("110010");
  EXPECT_EQ(evaluate(l, g), evaluate(l, g));
}

TEST(Evaluate, LengthMismatchThrows) {
  EXPECT_THROW(evaluate(two_site_fixture(), Genotype::from_string("101")), std::invalid_argument);
}

TEST(Evaluate, KZeroFlipChangesOneComponent) {
  const auto l = generate_nk(6, 0, 4);
  for (std::uint64_t idx = 0; idx < 64; ++idx) {
    const auto g = Genotype::from_index(idx, 6);
    const auto base = evaluate(l, g);
    for (std::size_t i = 0; i < 6; ++i) {
      const auto flipped = evaluate(l, g.flipped(i));
      for (std::size_t c = 0; c < 6; ++c) {
        if (c == i) EXPECT_NE(flipped[c], base[c]);
        else EXPECT_EQ(flipped[c], base[c]);
      }
    }
  }
}

TEST(Neighbors, SiteOrder) {
  auto strings = [](const std::vector<Genotype>& gs) {
    std::vector<std::string> out;
    for (const auto& g : gs) out.push_back(g.to_string());
    return out;
  };
  EXPECT_EQ(strings(neighbors(Genotype::from_string("000"))), (std::vector<std::string>{"100", "010", "001"}));
  EXPECT_EQ(strings(neighbors(Genotype::from_string("1"))), (std::vector<std::string>{"0"}));
  EXPECT_EQ(strings(neighbors(Genotype::from_string("101"))), (std::vector<std::string>{"001", "111", "100"}));
}

TEST(NkPhenotypes, PartitionAndIds) {
  const auto l = generate_nk(6, 2, 8);
  const auto groups = nk_phenotypes(l);
  EXPECT_EQ(groups.phenotype_of[0], 0u);
  std::set<std::uint64_t> covered;
  for (std::size_t p = 0; p < groups.members.size(); ++p)
    for (auto g : groups.members[p]) {
      EXPECT_TRUE(covered.insert(g).second);
      EXPECT_EQ(groups.phenotype_of[g], p);
      EXPECT_EQ(evaluate_index(l, g), groups.scores[p]);
    }
  EXPECT_EQ(covered.size(), 64u);
}

TEST(NkToNetwork, SingleSite) {
  const NKLandscape l(1, 0, 0, {{0.25, 0.75}});
  const auto net = nk_to_network(l, 0.01);
  ASSERT_EQ(net.size(), 2u);
  EXPECT_DOUBLE_EQ(net.weight(0, 1), 0.01);
  EXPECT_DOUBLE_EQ(net.weight(1, 0), 0.01);
  EXPECT_EQ(net.label(0), "g0");
  EXPECT_EQ(net.label(1), "g1");
}

TEST(NkToNetwork, MatchesBruteForcePairTally) {
  for (std::uint64_t seed : {1u, 7u, 42u}) {
    const double rate = 0.003;
    const auto l = generate_nk(3, 2, seed);
    const auto net = nk_to_network(l, rate);

    // Oracle: group genotype strings by score vector, then tally every
    // (genotype, flipped site) pair.
    std::map<ScoreVector, std::vector<std::string>> by_scores;
    for (std::uint64_t idx = 0; idx < 8; ++idx) {
      const auto g = Genotype::from_index(idx, 3);
      by_scores[evaluate(l, g)].push_back(g.to_string());
    }
    ASSERT_EQ(by_scores.size(), net.size());
    const double single = rate * (1 - rate) * (1 - rate);
    for (const auto& [src_scores, genotypes] : by_scores) {
      std::map<ScoreVector, double> tally;
      for (const auto& s : genotypes)
        for (std::size_t i = 0; i < 3; ++i) {
          std::string t = s;
          t[i] = t[i] == '0' ? '1' : '0';
          const auto dst = evaluate(l, Genotype::from_string(t));
          if (dst != src_scores) tally[dst] += single / double(genotypes.size());
        }
      const auto a = *net.find(src_scores);
      std::size_t edges = 0;
      for (const auto& [dst, w] : tally) {
        const auto b = *net.find(dst);
        EXPECT_NEAR(net.weight(a, b), w, 1e-15);
        ++edges;
      }
      EXPECT_EQ(net.out_edges(a).size(), edges);
    }
  }
}

TEST(NkToNetwork, WeightBoundsAndSymmetricSupport) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const double rate = 0.05;
    const auto l = generate_nk(5, seed % 3, seed);
    const auto net = nk_to_network(l, rate);
    for (PhenotypeId a = 0; a < net.size(); ++a) {
      double row = 0.0;
      for (const auto& e : net.out_edges(a)) {
        EXPECT_GT(e.probability, 0.0);
        EXPECT_LE(e.probability, 1.0);
        EXPECT_GT(net.weight(e.target, a), 0.0);
        row += e.probability;
      }
      EXPECT_LE(row, 5 * rate + 1e-12);
    }
  }
}

TEST(NkToNetwork, RejectsBadRateAndLargeN) {
  const auto l = generate_nk(3, 1, 1);
  EXPECT_THROW(nk_to_network(l, 0.0), std::invalid_argument);
  EXPECT_THROW(nk_to_network(l, 1.0), std::invalid_argument);
  EXPECT_THROW(nk_to_network(generate_nk(21, 1, 1), 0.01), std::invalid_argument);
  EXPECT_THROW(nk_to_network(l, 0.01, 2), std::invalid_argument);
}

TEST(LandscapeFile, RoundTripIsExact) {
  const auto l = generate_nk(4, 2, 123);
  std::ostringstream out;
  write_landscape(out, l, "hello\nworld");
  const auto text = out.str();
  EXPECT_EQ(text.rfind("# hello\n# world\nnk-landscape 1\n", 0), 0u);
  std::istringstream in(text);
  EXPECT_EQ(read_landscape(in), l);
}

TEST(LandscapeFile, MalformedInputs) {
  for (const std::string bad : {"", "nk-landscape 2\nn 1\nk 0\nseed 0\nsite 0 0.1 0.2\n",
                                "nk-landscape 1\nn 1\nk 0\nseed 0\n",
                                "nk-landscape 1\nn 1\nk 0\nseed 0\nsite 0 0.1\n",
                                "nk-landscape 1\nn 1\nk 0\nseed 0\nsite 0 0.1 1.5\n",
                                "nk-landscape 1\nn 2\nk 2\nseed 0\nsite 0 0 0\nsite 1 0 0\n"}) {
    std::istringstream in(bad);
    EXPECT_ANY_THROW(read_landscape(in)) << bad;
  }
}
