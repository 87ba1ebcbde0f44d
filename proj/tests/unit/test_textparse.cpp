#include <gtest/gtest.h>

#include <random>

#include "helpers.hpp"
#include "parser_cases.hpp"
#include "stancenet/textparse.hpp"

using namespace stancenet;
using namespace stancenet::textparse;

TEST(Textparse, PublishedExampleDescription) {
  const std::string text =
      "the best of friends @reneerapp @dylanmulvaney\n#reneerapp #reneerappsupremacy #reneerappfan\n"
      "#dylanmulvaney #everythingtoeveryone #live";
  const auto scan = extract_mentions(text);
  EXPECT_EQ(scan.mentions, (std::vector<std::string>{"reneerapp", "dylanmulvaney"}));
  EXPECT_EQ(scan.unresolved, 0u);
  EXPECT_EQ(extract_hashtags(text),
            (std::vector<std::string>{"reneerapp", "reneerappsupremacy", "reneerappfan", "dylanmulvaney",
                                      "everythingtoeveryone", "live"}));
}

TEST(Textparse, GoldenCases) {
  const auto results = testing_support::run_parser_cases(testing_support::source_dir() / "tests/data/parser_cases.json");
  EXPECT_GE(results.size(), 30u);
  std::set<std::string> kinds;
  for (const auto& r : results) {
    EXPECT_TRUE(r.ok) << r.text << ": " << r.detail;
    for (const auto& in : detect_interactions(r.text)) kinds.insert(to_string(in.kind));
  }
  EXPECT_EQ(kinds.size(), 4u);
}

TEST(Textparse, CustomGrammar) {
  MarkerGrammar g = MarkerGrammar::from_json({{"reply", {"En respuesta a"}}, {"duet", {"#duo con"}}});
  const auto ins = detect_interactions("en respuesta a @ana #duo con @beto #stitch with @cy", g);
  ASSERT_EQ(ins.size(), 3u);
  EXPECT_EQ(ins[0].kind, InteractionKind::Reply);
  EXPECT_EQ(ins[1].kind, InteractionKind::Duet);
  EXPECT_EQ(ins[2].kind, InteractionKind::Stitch);
  EXPECT_EQ(detect_interactions("Replying to @ana", g)[0].kind, InteractionKind::Tag);
}

TEST(Textparse, EnrichPostAddsTagsAndInteractions) {
  Post p = testing_support::post("p1", "u", "Replying to @Bob #TDOV", {"fyp"});
  enrich_post(p);
  EXPECT_EQ(p.hashtags, (std::set<std::string>{"fyp", "tdov"}));
  ASSERT_EQ(p.interactions.size(), 1u);
  EXPECT_EQ(p.interactions[0], (Interaction{InteractionKind::Reply, "bob", true}));
}

namespace {

std::string random_description(std::mt19937& gen) {
  static const std::vector<std::string> pieces = {
      "@", "#", "Replying to ", "#stitch with ", "#duet with ", "@al", "@Bo", "@c.d.", "x@y", "#Tag",
      "é", "Ž", "\xF0\x9F\x8F\xB3", " ", "\n", "\t", ".", "_", "a", "9", "with ", "to ", "replying", "\xFF",
      "\xC3", "@zoë", "##", "@@", "#duet", "-"};
  std::string s;
  const int n = static_cast<int>(gen() % 14);
  for (int i = 0; i < n; ++i) s += pieces[gen() % pieces.size()];
  return s;
}

}  // namespace

TEST(TextparseProperties, TotalIdempotentAndBounded) {
  std::mt19937 gen(2024);
  for (int iter = 0; iter < 5000; ++iter) {
    const std::string text = random_description(gen);
    ParsedDescription a;
    ASSERT_NO_THROW(a = parse_description(text));
    const auto b = parse_description(text);
    EXPECT_EQ(a.mentions, b.mentions);
    EXPECT_EQ(a.hashtags, b.hashtags);
    EXPECT_EQ(a.interactions, b.interactions);
    EXPECT_LE(a.interactions.size(), a.mentions.size() + a.unresolved_mentions);

    std::size_t resolved = 0;
    std::set<std::string> targets;
    for (const auto& in : a.interactions) {
      if (!in.resolved) continue;
      ++resolved;
      EXPECT_NE(std::find(a.mentions.begin(), a.mentions.end(), in.target), a.mentions.end()) << text;
      EXPECT_TRUE(targets.insert(in.target).second) << "one interaction per user: " << text;
    }
    EXPECT_EQ(resolved, a.mentions.size()) << text;

    const std::set<std::string> distinct(a.mentions.begin(), a.mentions.end());
    EXPECT_EQ(distinct.size(), a.mentions.size());
    for (const auto& m : a.mentions) {
      for (char c : m) EXPECT_TRUE(std::islower(static_cast<unsigned char>(c)) || std::isdigit(static_cast<unsigned char>(c)) || c == '_' || c == '.');
      EXPECT_NE(m.back(), '.');
    }
  }
}

TEST(TextparseProperties, FirstAppearanceOrder) {
  const auto parsed = parse_description("#b @y #a @x #b @y #c");
  EXPECT_EQ(parsed.hashtags, (std::vector<std::string>{"b", "a", "c"}));
  EXPECT_EQ(parsed.mentions, (std::vector<std::string>{"y", "x"}));
}

TEST(TextparseProperties, MarkerConsumedMentionIsNotAlsoATag) {
  for (const std::string text : {"#stitch with @u", "#duet with @u", "Replying to @u"}) {
    const auto ins = detect_interactions(text);
    ASSERT_EQ(ins.size(), 1u) << text;
    EXPECT_NE(ins[0].kind, InteractionKind::Tag) << text;
  }
}
