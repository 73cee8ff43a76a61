#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <vector>

#include "support.hpp"

using namespace pine;

TEST(Csv, StringLabelsMapBySortedValue) {
  const auto d = parse_csv("a,b,label\n1,2,yes\n3,4,no\n5,6,yes\n", "label");
  EXPECT_EQ(d.n_rows(), 3u);
  EXPECT_EQ(d.n_features(), 2u);
  EXPECT_EQ(d.n_classes(), 2);
  EXPECT_EQ(d.labels(), (std::vector<int>{1, 0, 1}));  // no < yes
  EXPECT_EQ(d.class_names(), (std::vector<std::string>{"no", "yes"}));
  EXPECT_EQ(d.at(2, 1), 6.0);
}

TEST(Csv, NumericLabelsSortNumerically) {
  const auto d = parse_csv("x,y\n0,10\n1,9\n2,10\n", "y");
  EXPECT_EQ(d.class_names(), (std::vector<std::string>{"9", "10"}));
  EXPECT_EQ(d.labels(), (std::vector<int>{1, 0, 1}));
}

TEST(Csv, CategoricalFirstAppearanceCodes) {
  const auto d = parse_csv("colour,v\nred,1\nblue,2\nred,3\n");
  EXPECT_EQ(d.column(0), (std::vector<double>{1.0, 2.0, 1.0}));
  EXPECT_EQ(d.features()[0].kind, FeatureKind::Categorical);
  EXPECT_EQ(d.category_name(0, 2.0), "blue");
  EXPECT_EQ(d.features()[1].kind, FeatureKind::Continuous);
}

TEST(Csv, BlankCellNamesRowAndColumn) {
  try {
    parse_csv("a,b\n1,2\n3,\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ParseError);
    const std::string msg = e.what();
    EXPECT_NE(msg.find("row 2"), std::string::npos);
    EXPECT_NE(msg.find("column 2"), std::string::npos);
  }
}

TEST(Csv, StructuralErrors) {
  auto code = [](const char* text) {
    try {
      parse_csv(text);
    } catch (const Error& e) {
      return e.code();
    }
    return Errc::Inconsistent;
  };
  EXPECT_EQ(code(""), Errc::EmptyDataset);
  EXPECT_EQ(code("a,b\n"), Errc::EmptyDataset);
  EXPECT_EQ(code("a,b\n1,2,3\n"), Errc::InconsistentColumnCount);
  EXPECT_EQ(code("a\n\"unterminated\n"), Errc::ParseError);
}

TEST(Csv, QuotedFieldsAndRoundTrip) {
  const auto d = parse_csv("\"name, with comma\",v,label\n\"a \"\"q\"\"\",1.5,x\nb,-2,y\n", "label");
  EXPECT_EQ(d.features()[0].categories[0], "a \"q\"");
  const auto back = parse_csv(to_csv(d), "label");
  EXPECT_EQ(back.values(), d.values());
  EXPECT_EQ(back.labels(), d.labels());
  EXPECT_EQ(back.features()[0].name, "name, with comma");
}

TEST(Csv, NumbersRoundTripExactly) {
  SplitMix64 rng(1);
  std::vector<double> v;
  for (int i = 0; i < 200; ++i) v.push_back(rng.normal() * std::pow(10.0, static_cast<double>(rng.bounded(20)) - 10.0));
  const Dataset d(4, v);
  EXPECT_EQ(parse_csv(to_csv(d)).values(), v);
}

TEST(Split, HandSizes) {
  EXPECT_EQ(split_sizes(10, {{0.64, 0.16, 0.20}, 0}), (std::vector<std::size_t>{6, 1, 3}));
  EXPECT_EQ(split_sizes(100, {{0.48, 0.16, 0.16, 0.20}, 0}), (std::vector<std::size_t>{48, 16, 16, 20}));
}

TEST(Split, SinglePartitionIsIdentity) {
  const Dataset d(1, {1, 2, 3, 4, 5});
  const auto parts = split(d, {{1.0}, 42});
  ASSERT_EQ(parts.size(), 1u);
  auto v = parts[0].values();
  std::sort(v.begin(), v.end());
  EXPECT_EQ(v, d.values());
}

TEST(Split, PartitionsArePermutationAndDeterministic) {
  SplitMix64 rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 4 + rng.bounded(200);
    const SplitSpec spec{{0.64, 0.16, 0.20}, rng.next()};
    const auto a = split_indices(n, spec);
    EXPECT_EQ(a, split_indices(n, spec));
    std::vector<std::size_t> all;
    for (const auto& p : a) {
      EXPECT_FALSE(p.empty());
      all.insert(all.end(), p.begin(), p.end());
    }
    std::sort(all.begin(), all.end());
    std::vector<std::size_t> expect(n);
    std::iota(expect.begin(), expect.end(), std::size_t{0});
    EXPECT_EQ(all, expect);
  }
}

TEST(Split, Errors) {
  EXPECT_THROW(split_sizes(2, {{0.5, 0.25, 0.25}, 0}), Error);
  EXPECT_THROW(split_sizes(10, {{0.5, 0.4}, 0}), Error);
  EXPECT_THROW(split_sizes(10, {{}, 0}), Error);
  try {
    split_sizes(2, {{0.5, 0.25, 0.25}, 0});
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::TooFewRows);
  }
}

TEST(Split, ManifestListsPartitions) {
  const auto j = split_manifest(10, {{0.64, 0.16, 0.20}, 7});
  EXPECT_EQ(j.at("seed"), 7);
  EXPECT_EQ(j.at("partitions").size(), 3u);
  EXPECT_EQ(j.at("partitions")[2].size(), 3u);
}
