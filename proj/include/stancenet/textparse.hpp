#pragma once

// Mention, hashtag and interaction extraction from post descriptions.
//
// Mentions: '@' followed by a maximal run of [a-z0-9_.] after case folding.
// Trailing dots are punctuation, not part of the name. A bare '@', or a run
// that continues into a character outside the username charset (a display
// name such as "@Zoë"), counts as an unresolved mention. An '@' glued to a
// preceding word character ("me@site.com") is not a mention.
//
// Interactions: "Replying to @u" at the start of the text is a Reply,
// "#stitch with @u" a Stitch, "#duet with @u" a Duet, every other mention a
// Tag. Each resolved username yields at most one interaction; when a user is
// reached by several kinds the strongest wins (Reply > Stitch > Duet > Tag).

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "stancenet/corpus.hpp"
#include "stancenet/unicode.hpp"

namespace stancenet::textparse {

/// Marker phrases, lowercase, words separated by single spaces. Any run of
/// whitespace in the text matches a space in a phrase.
struct MarkerGrammar {
  std::vector<std::string> reply{"replying to"};
  std::vector<std::string> stitch{"#stitch with"};
  std::vector<std::string> duet{"#duet with"};

  static MarkerGrammar from_json(const nlohmann::json& j) {
    MarkerGrammar g;
    const auto read = [&](const char* key, std::vector<std::string>& dst) {
      if (!j.contains(key)) return;
      dst.clear();
      for (const auto& p : j.at(key)) dst.push_back(unicode::to_lower_utf8(p.get<std::string>()));
    };
    read("reply", g.reply);
    read("stitch", g.stitch);
    read("duet", g.duet);
    return g;
  }

  nlohmann::json to_json() const {
    return {{"reply", reply}, {"stitch", stitch}, {"duet", duet}};
  }
};

struct MentionScan {
  std::vector<std::string> mentions;  // distinct, order of first appearance
  std::size_t unresolved = 0;
};

struct ParsedDescription {
  std::vector<std::string> mentions;
  std::vector<std::string> hashtags;
  std::vector<Interaction> interactions;
  std::size_t unresolved_mentions = 0;
};

namespace detail {

inline bool username_char(char32_t c) {
  return (c >= U'a' && c <= U'z') || (c >= U'0' && c <= U'9') || c == U'_' || c == U'.';
}

struct Occurrence {
  std::size_t at;                       // index of '@'
  std::optional<std::string> username;  // nullopt when unresolved
};

/// `text` must already be case-folded.
inline std::vector<Occurrence> scan_mentions(std::u32string_view text) {
  std::vector<Occurrence> out;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] != U'@') continue;
    if (i > 0 && (unicode::is_word(text[i - 1]) || text[i - 1] == U'.')) continue;
    std::size_t j = i + 1;
    while (j < text.size() && username_char(text[j])) ++j;
    std::size_t end = j;
    while (end > i + 1 && text[end - 1] == U'.') --end;
    const bool display_name = j < text.size() && unicode::is_word(text[j]);
    if (end == i + 1 || display_name) {
      out.push_back({i, std::nullopt});
    } else {
      out.push_back({i, unicode::encode(text.substr(i + 1, end - i - 1))});
    }
    i = j == i + 1 ? i : j - 1;
  }
  return out;
}

inline std::vector<std::u32string> phrase_words(std::string_view phrase) {
  std::vector<std::u32string> words;
  std::u32string cur;
  for (char32_t c : unicode::to_lower(unicode::decode(phrase))) {
    if (unicode::is_space(c)) {
      if (!cur.empty()) words.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) words.push_back(std::move(cur));
  return words;
}

/// Does `phrase` (plus at least one whitespace) end right before `at`?
/// When `anchored`, only whitespace may precede the phrase.
inline bool phrase_precedes(std::u32string_view text, std::size_t at, std::string_view phrase,
                            bool anchored) {
  const auto words = phrase_words(phrase);
  if (words.empty()) return false;
  std::size_t pos = at;  // one past the last unmatched character
  for (auto w = words.rbegin(); w != words.rend(); ++w) {
    std::size_t ws = 0;
    while (pos > 0 && unicode::is_space(text[pos - 1])) {
      --pos;
      ++ws;
    }
    if (ws == 0) return false;
    if (pos < w->size()) return false;
    if (text.substr(pos - w->size(), w->size()) != *w) return false;
    pos -= w->size();
  }
  if (!anchored) return true;
  while (pos > 0 && unicode::is_space(text[pos - 1])) --pos;
  return pos == 0;
}

inline bool any_phrase_precedes(std::u32string_view text, std::size_t at,
                                const std::vector<std::string>& phrases, bool anchored) {
  return std::any_of(phrases.begin(), phrases.end(), [&](const std::string& p) {
    return phrase_precedes(text, at, p, anchored);
  });
}

inline int kind_rank(InteractionKind k) {
  switch (k) {
    case InteractionKind::Reply: return 0;
    case InteractionKind::Stitch: return 1;
    case InteractionKind::Duet: return 2;
    case InteractionKind::Tag: return 3;
  }
  return 3;
}

}  // namespace detail

inline MentionScan extract_mentions(std::string_view description) {
  const std::u32string text = unicode::to_lower(unicode::decode(description));
  MentionScan scan;
  for (auto& occ : detail::scan_mentions(text)) {
    if (!occ.username) {
      ++scan.unresolved;
    } else if (std::find(scan.mentions.begin(), scan.mentions.end(), *occ.username) ==
               scan.mentions.end()) {
      scan.mentions.push_back(std::move(*occ.username));
    }
  }
  return scan;
}

/// '#' followed by a maximal run of word characters, case-folded. Distinct,
/// in order of first appearance.
inline std::vector<std::string> extract_hashtags(std::string_view description) {
  const std::u32string text = unicode::to_lower(unicode::decode(description));
  std::vector<std::string> tags;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] != U'#') continue;
    std::size_t j = i + 1;
    while (j < text.size() && unicode::is_word(text[j])) ++j;
    if (j > i + 1) {
      std::string tag = unicode::encode(text.substr(i + 1, j - i - 1));
      if (std::find(tags.begin(), tags.end(), tag) == tags.end()) tags.push_back(std::move(tag));
    }
    i = j - 1;
  }
  return tags;
}

inline std::vector<Interaction> detect_interactions(std::string_view description,
                                                    const MarkerGrammar& grammar = {}) {
  const std::u32string text = unicode::to_lower(unicode::decode(description));
  const auto occurrences = detail::scan_mentions(text);

  struct Pending {
    std::size_t first_at;
    Interaction interaction;
  };
  std::vector<Pending> pending;
  std::map<std::string, std::size_t> by_target;  // username -> index into pending

  for (std::size_t n = 0; n < occurrences.size(); ++n) {
    const auto& occ = occurrences[n];
    InteractionKind kind = InteractionKind::Tag;
    if (n == 0 && detail::any_phrase_precedes(text, occ.at, grammar.reply, true)) {
      kind = InteractionKind::Reply;
    } else if (detail::any_phrase_precedes(text, occ.at, grammar.stitch, false)) {
      kind = InteractionKind::Stitch;
    } else if (detail::any_phrase_precedes(text, occ.at, grammar.duet, false)) {
      kind = InteractionKind::Duet;
    }
    if (!occ.username) {
      pending.push_back({occ.at, Interaction{kind, "", false}});
      continue;
    }
    auto it = by_target.find(*occ.username);
    if (it == by_target.end()) {
      by_target.emplace(*occ.username, pending.size());
      pending.push_back({occ.at, Interaction{kind, *occ.username, true}});
    } else {
      auto& existing = pending[it->second].interaction;
      if (detail::kind_rank(kind) < detail::kind_rank(existing.kind)) existing.kind = kind;
    }
  }

  std::vector<Interaction> out;
  out.reserve(pending.size());
  for (auto& p : pending) out.push_back(std::move(p.interaction));
  return out;
}

inline ParsedDescription parse_description(std::string_view description,
                                           const MarkerGrammar& grammar = {}) {
  ParsedDescription parsed;
  auto scan = extract_mentions(description);
  parsed.mentions = std::move(scan.mentions);
  parsed.unresolved_mentions = scan.unresolved;
  parsed.hashtags = extract_hashtags(description);
  parsed.interactions = detect_interactions(description, grammar);
  return parsed;
}

/// Fills a post's hashtag set and (when it has none) its interaction list
/// from the description.
inline void enrich_post(Post& post, const MarkerGrammar& grammar = {}) {
  for (auto& tag : extract_hashtags(post.description)) post.hashtags.insert(std::move(tag));
  if (post.interactions.empty()) post.interactions = detect_interactions(post.description, grammar);
}

}  // namespace stancenet::textparse
