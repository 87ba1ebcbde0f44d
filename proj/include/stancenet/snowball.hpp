#pragma once

// Offline snowball expansion of a seed hashtag set by co-occurrence.

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "stancenet/corpus.hpp"
#include "stancenet/error.hpp"

namespace stancenet::snowball {

using TagSet = std::set<std::string>;

struct AddedTag {
  std::string tag;
  std::size_t count = 0;
  TagSet sources;  // members of the current set it co-occurred with
};

struct Round {
  std::size_t number = 0;
  std::vector<AddedTag> added;
};

struct ExpansionReport {
  TagSet seeds;
  std::vector<Round> rounds;
  TagSet final_set;
};

struct ExpandOptions {
  std::size_t rounds = 1;
  std::size_t min_count = 2;
  std::optional<TagSet> allowlist;  // nullopt: no relevance selection
  TagSet denylist;
};

/// Every non-seed tag on a post carrying at least one seed is tallied once per
/// post. Tags below `min_count` are dropped.
inline std::map<std::string, std::size_t> cooccurring(const std::vector<Post>& corpus,
                                                      const TagSet& seeds,
                                                      std::size_t min_count) {
  if (min_count < 1) throw ConfigError("min_count must be >= 1");
  std::map<std::string, std::size_t> tally;
  for (const auto& post : corpus) {
    const bool seeded = std::any_of(post.hashtags.begin(), post.hashtags.end(),
                                    [&](const std::string& t) { return seeds.count(t) > 0; });
    if (!seeded) continue;
    for (const auto& tag : post.hashtags) {
      if (!seeds.count(tag)) ++tally[tag];
    }
  }
  for (auto it = tally.begin(); it != tally.end();) {
    it = it->second < min_count ? tally.erase(it) : std::next(it);
  }
  return tally;
}

inline ExpansionReport expand(const std::vector<Post>& corpus, const TagSet& seeds,
                              const ExpandOptions& opts) {
  ExpansionReport report;
  report.seeds = seeds;
  report.final_set = seeds;

  for (std::size_t r = 1; r <= opts.rounds; ++r) {
    const auto tally = cooccurring(corpus, report.final_set, opts.min_count);
    Round round;
    round.number = r;
    for (const auto& [tag, count] : tally) {
      if (opts.denylist.count(tag)) continue;
      if (opts.allowlist && !opts.allowlist->count(tag)) continue;
      round.added.push_back({tag, count, {}});
    }
    if (round.added.empty()) break;
    for (auto& added : round.added) {
      for (const auto& post : corpus) {
        if (!post.hashtags.count(added.tag)) continue;
        for (const auto& t : post.hashtags) {
          if (report.final_set.count(t)) added.sources.insert(t);
        }
      }
    }
    for (const auto& added : round.added) report.final_set.insert(added.tag);
    report.rounds.push_back(std::move(round));
  }
  return report;
}

/// Drops posts where an ambiguous tag co-occurs with one of its context tags
/// (e.g. groomer -> {dog, doggrooming}).
inline std::vector<Post> context_filter(const std::vector<Post>& posts,
                                        const std::map<std::string, TagSet>& ambiguous) {
  std::vector<Post> kept;
  kept.reserve(posts.size());
  for (const auto& post : posts) {
    bool drop = false;
    for (const auto& [tag, contexts] : ambiguous) {
      if (!post.hashtags.count(tag)) continue;
      drop = std::any_of(contexts.begin(), contexts.end(),
                         [&](const std::string& c) { return post.hashtags.count(c) > 0; });
      if (drop) break;
    }
    if (!drop) kept.push_back(post);
  }
  return kept;
}

/// Context rules file: {"groomer": ["dog", "doggrooming"], ...}.
inline std::map<std::string, TagSet> parse_context_rules(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("context rules must be a JSON object");
  std::map<std::string, TagSet> rules;
  for (const auto& [tag, contexts] : j.items()) {
    auto key = normalize_hashtag(tag);
    if (!key) throw ConfigError("invalid hashtag in context rules: '" + tag + "'");
    if (!contexts.is_array()) throw ConfigError("context list for '" + tag + "' must be an array");
    for (const auto& c : contexts) {
      auto norm = c.is_string() ? normalize_hashtag(c.get<std::string>()) : std::nullopt;
      if (!norm) throw ConfigError("invalid context hashtag for '" + tag + "'");
      rules[*key].insert(*norm);
    }
  }
  return rules;
}

inline nlohmann::json to_json(const ExpansionReport& report) {
  nlohmann::json rounds = nlohmann::json::array();
  for (const auto& r : report.rounds) {
    nlohmann::json added = nlohmann::json::array();
    for (const auto& a : r.added) {
      added.push_back({{"tag", a.tag}, {"count", a.count}, {"sources", a.sources}});
    }
    rounds.push_back({{"round", r.number}, {"added", added}});
  }
  return {{"seeds", report.seeds}, {"rounds", rounds}, {"final_set", report.final_set}};
}

}  // namespace stancenet::snowball
