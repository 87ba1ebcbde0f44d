#include <gtest/gtest.h>

#include <random>

#include "helpers.hpp"
#include "stancenet/snowball.hpp"

using namespace stancenet;
using namespace stancenet::snowball;
using testing_support::post;

namespace {

std::vector<Post> tagged(std::initializer_list<std::set<std::string>> sets) {
  std::vector<Post> out;
  int n = 0;
  for (const auto& s : sets) out.push_back(post("p" + std::to_string(n++), "u", "", s));
  return out;
}

}  // namespace

TEST(Cooccurring, Examples) {
  EXPECT_TRUE(cooccurring(tagged({{"x", "y"}}), {"a"}, 1).empty());
  EXPECT_EQ(cooccurring(tagged({{"a", "b"}}), {"a"}, 1), (std::map<std::string, std::size_t>{{"b", 1}}));
  EXPECT_EQ(cooccurring(tagged({{"a", "b"}, {"a", "b"}, {"a", "c"}}), {"a"}, 2),
            (std::map<std::string, std::size_t>{{"b", 2}}));
  EXPECT_THROW(cooccurring({}, {"a"}, 0), ConfigError);
}

TEST(Expand, Examples) {
  const auto corpus = tagged({{"a", "b"}, {"a", "b"}, {"a", "c"}});
  EXPECT_EQ(expand(corpus, {"a"}, {0, 2, {}, {}}).final_set, (TagSet{"a"}));
  const auto r = expand(corpus, {"a"}, {2, 2, {}, {}});
  EXPECT_EQ(r.final_set, (TagSet{"a", "b"}));
  ASSERT_EQ(r.rounds.size(), 1u);
  EXPECT_EQ(r.rounds[0].added[0].tag, "b");
  EXPECT_EQ(r.rounds[0].added[0].sources, (TagSet{"a"}));
}

TEST(Expand, SecondRoundReachesFurther) {
  const auto corpus = tagged({{"a", "b"}, {"a", "b"}, {"b", "c"}, {"b", "c"}, {"c", "d"}});
  EXPECT_EQ(expand(corpus, {"a"}, {1, 2, {}, {}}).final_set, (TagSet{"a", "b"}));
  const auto two = expand(corpus, {"a"}, {2, 2, {}, {}});
  EXPECT_EQ(two.final_set, (TagSet{"a", "b", "c"}));
  EXPECT_EQ(two.rounds[1].added[0].sources, (TagSet{"b"}));
}

TEST(Expand, DenyAndAllowLists) {
  const auto corpus = tagged({{"a", "b", "c"}, {"a", "b", "c"}});
  EXPECT_EQ(expand(corpus, {"a"}, {1, 2, {}, {"b"}}).final_set, (TagSet{"a", "c"}));
  EXPECT_EQ(expand(corpus, {"a"}, {1, 2, TagSet{"c"}, {}}).final_set, (TagSet{"a", "c"}));
  EXPECT_EQ(expand(corpus, {"a"}, {1, 2, TagSet{}, {}}).final_set, (TagSet{"a"}));
}

namespace {

std::vector<Post> random_corpus(std::mt19937& gen) {
  std::vector<Post> out;
  const int n = 5 + static_cast<int>(gen() % 40);
  for (int i = 0; i < n; ++i) {
    std::set<std::string> tags;
    const int k = 1 + static_cast<int>(gen() % 4);
    for (int t = 0; t < k; ++t) tags.insert(std::string(1, static_cast<char>('a' + gen() % 12)));
    out.push_back(post("p" + std::to_string(i), "u", "", tags));
  }
  return out;
}

TagSet random_subset(std::mt19937& gen, int size) {
  TagSet s;
  for (int i = 0; i < size; ++i) s.insert(std::string(1, static_cast<char>('a' + gen() % 12)));
  return s;
}

}  // namespace

TEST(SnowballProperties, MonotoneFilteredAndOrderFree) {
  std::mt19937 gen(77);
  for (int iter = 0; iter < 300; ++iter) {
    auto corpus = random_corpus(gen);
    const TagSet seeds = random_subset(gen, 2);
    const TagSet deny = random_subset(gen, 2);
    std::optional<TagSet> allow;
    if (gen() % 2) allow = random_subset(gen, 5);
    const std::size_t min_count = 1 + gen() % 3;

    TagSet previous = seeds;
    for (std::size_t rounds = 0; rounds <= 4; ++rounds) {
      const auto report = expand(corpus, seeds, {rounds, min_count, allow, deny});
      EXPECT_TRUE(std::includes(report.final_set.begin(), report.final_set.end(), seeds.begin(), seeds.end()));
      EXPECT_TRUE(std::includes(report.final_set.begin(), report.final_set.end(), previous.begin(), previous.end()));
      for (const auto& r : report.rounds) {
        for (const auto& a : r.added) {
          EXPECT_FALSE(deny.count(a.tag));
          EXPECT_GE(a.count, min_count);
          if (allow) {
            EXPECT_TRUE(allow->count(a.tag));
          }
        }
      }
      previous = report.final_set;
    }

    const auto before = cooccurring(corpus, seeds, min_count);
    std::shuffle(corpus.begin(), corpus.end(), gen);
    EXPECT_EQ(before, cooccurring(corpus, seeds, min_count));
  }
}

TEST(ContextFilter, Examples) {
  const std::map<std::string, TagSet> rules = {{"groomer", {"dog"}}};
  EXPECT_TRUE(context_filter(tagged({{"groomer", "dog"}}), rules).empty());
  EXPECT_EQ(context_filter(tagged({{"groomer"}}), rules).size(), 1u);
  const auto corpus = tagged({{"groomer", "dog"}, {"x"}});
  EXPECT_EQ(context_filter(corpus, {}), corpus);
}

TEST(ContextFilter, RulesFile) {
  const auto rules = parse_context_rules(json::parse(read_file(testing_support::source_dir() / "data/context_rules.json")));
  ASSERT_TRUE(rules.count("groomer"));
  EXPECT_TRUE(rules.at("groomer").count("dog"));
  EXPECT_THROW(parse_context_rules(json::array()), ConfigError);
  EXPECT_THROW(parse_context_rules({{"a", "dog"}}), ConfigError);
}

TEST(Expand, ReportJson) {
  const auto r = expand(tagged({{"a", "b"}, {"a", "b"}}), {"a"}, {});
  const auto j = to_json(r);
  EXPECT_EQ(j["final_set"], json::array({"a", "b"}));
  EXPECT_EQ(j["rounds"][0]["added"][0]["count"], 2);
}
