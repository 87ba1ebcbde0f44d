#pragma once

// Post corpus data model, JSON-Lines ingestion, hashtag buckets and
// stratified sampling.

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "json.hpp"
#include "stancenet/error.hpp"
#include "stancenet/unicode.hpp"
#include "stancenet/util.hpp"

namespace stancenet {

using json = nlohmann::json;

enum class InteractionKind { Tag, Reply, Stitch, Duet };

inline constexpr std::array<InteractionKind, 4> kAllInteractionKinds = {
    InteractionKind::Tag, InteractionKind::Reply, InteractionKind::Stitch,
    InteractionKind::Duet};

inline std::string to_string(InteractionKind k) {
  switch (k) {
    case InteractionKind::Tag: return "tag";
    case InteractionKind::Reply: return "reply";
    case InteractionKind::Stitch: return "stitch";
    case InteractionKind::Duet: return "duet";
  }
  return "tag";
}

inline std::optional<InteractionKind> parse_interaction_kind(std::string_view s) {
  const std::string lower = unicode::to_lower_utf8(s);
  for (auto k : kAllInteractionKinds) {
    if (to_string(k) == lower) return k;
  }
  return std::nullopt;
}

struct Interaction {
  InteractionKind kind = InteractionKind::Tag;
  std::string target;  // empty when unresolved
  bool resolved = true;

  friend bool operator==(const Interaction&, const Interaction&) = default;
};

struct Post {
  std::string id;
  std::string author;
  std::string description;
  std::string transcript;
  std::int64_t created_at = 0;
  std::int64_t like_count = 0;
  std::set<std::string> hashtags;
  std::vector<Interaction> interactions;

  friend bool operator==(const Post&, const Post&) = default;
};

// ---------------------------------------------------------------------------
// Stance labels

enum class Stance { AntiTrans, ProTrans, Neutral };

inline constexpr std::array<Stance, 3> kStances = {Stance::AntiTrans, Stance::ProTrans,
                                                   Stance::Neutral};

inline constexpr std::size_t index_of(Stance s) noexcept { return static_cast<std::size_t>(s); }

inline std::string to_string(Stance s) {
  switch (s) {
    case Stance::AntiTrans: return "AntiTrans";
    case Stance::ProTrans: return "ProTrans";
    case Stance::Neutral: return "Neutral";
  }
  return "Neutral";
}

/// Human-facing form used in prompts and report tables.
inline std::string display_name(Stance s) {
  switch (s) {
    case Stance::AntiTrans: return "Anti-Trans";
    case Stance::ProTrans: return "Pro-Trans";
    case Stance::Neutral: return "Neutral";
  }
  return "Neutral";
}

/// Accepts "AntiTrans", "anti-trans", "anti", "pro_trans", ... (case-insensitive).
inline std::optional<Stance> parse_stance(std::string_view s) {
  std::string key;
  for (char c : unicode::to_lower_utf8(s)) {
    if (c != '-' && c != '_' && c != ' ') key.push_back(c);
  }
  if (key == "antitrans" || key == "anti") return Stance::AntiTrans;
  if (key == "protrans" || key == "pro") return Stance::ProTrans;
  if (key == "neutral") return Stance::Neutral;
  return std::nullopt;
}

enum class Sublabel { TM, ATM, XOR, TERF, RW, INTRA, CEL, REF, CON };

inline constexpr std::array<Sublabel, 9> kSublabels = {
    Sublabel::TM,  Sublabel::ATM,   Sublabel::XOR, Sublabel::TERF, Sublabel::RW,
    Sublabel::INTRA, Sublabel::CEL, Sublabel::REF, Sublabel::CON};

inline std::string to_string(Sublabel s) {
  static constexpr std::array<const char*, 9> kNames = {"TM", "ATM", "XOR", "TERF", "RW",
                                                        "INTRA", "CEL", "REF", "CON"};
  return kNames[static_cast<std::size_t>(s)];
}

inline std::optional<Sublabel> parse_sublabel(std::string_view s) {
  std::string upper(s);
  for (auto& c : upper) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  for (auto sub : kSublabels) {
    if (to_string(sub) == upper) return sub;
  }
  return std::nullopt;
}

/// The primary side a sublabel belongs to.
inline constexpr Stance side_of(Sublabel s) noexcept {
  switch (s) {
    case Sublabel::CEL:
    case Sublabel::REF:
    case Sublabel::CON:
      return Stance::ProTrans;
    default:
      return Stance::AntiTrans;
  }
}

inline std::vector<Sublabel> sublabels_of(Stance side) {
  std::vector<Sublabel> out;
  if (side == Stance::Neutral) return out;
  for (auto s : kSublabels) {
    if (side_of(s) == side) out.push_back(s);
  }
  return out;
}

struct StanceLabel {
  Stance primary = Stance::Neutral;
  std::set<Sublabel> sublabels;

  friend bool operator==(const StanceLabel&, const StanceLabel&) = default;
};

struct LabelViolation {
  std::string rule;
  std::string message;
};

/// Returns the first broken label rule, if any.
inline std::optional<LabelViolation> label_violation(const StanceLabel& label) {
  if (label.primary == Stance::Neutral && !label.sublabels.empty()) {
    return LabelViolation{"neutral-has-no-sublabels",
                          "a Neutral label cannot carry sublabels"};
  }
  for (auto s : label.sublabels) {
    if (side_of(s) != label.primary) {
      return LabelViolation{
          "sublabel-side-mismatch",
          "sublabel " + to_string(s) + " belongs to " + display_name(side_of(s)) +
              ", not " + display_name(label.primary)};
    }
  }
  return std::nullopt;
}

inline void validate(const StanceLabel& label) {
  if (auto v = label_violation(label)) throw ValidationError(v->rule, v->message);
}

struct AnnotatedSample {
  std::string post_id;
  std::string annotator_id;
  StanceLabel label;
  std::int64_t annotated_at = 0;

  friend bool operator==(const AnnotatedSample&, const AnnotatedSample&) = default;
};

enum class HashtagBucket { ProOnly, AntiOnly, Both, Neither };

inline std::string to_string(HashtagBucket b) {
  switch (b) {
    case HashtagBucket::ProOnly: return "pro-only";
    case HashtagBucket::AntiOnly: return "anti-only";
    case HashtagBucket::Both: return "both";
    case HashtagBucket::Neither: return "neither";
  }
  return "neither";
}

inline std::optional<HashtagBucket> parse_bucket(std::string_view s) {
  for (auto b : {HashtagBucket::ProOnly, HashtagBucket::AntiOnly, HashtagBucket::Both,
                 HashtagBucket::Neither}) {
    if (to_string(b) == s) return b;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Normalization

/// Strips leading '#' characters and lowercases. Returns nullopt for tags
/// that are empty or contain whitespace after normalization.
inline std::optional<std::string> normalize_hashtag(std::string_view raw) {
  raw = trim(raw);
  while (!raw.empty() && raw.front() == '#') raw.remove_prefix(1);
  if (raw.empty()) return std::nullopt;
  const std::u32string cps = unicode::to_lower(unicode::decode(raw));
  for (char32_t cp : cps) {
    if (unicode::is_space(cp) || cp == U'#') return std::nullopt;
  }
  return unicode::encode(cps);
}

/// Usernames are case-insensitive; a leading '@' is dropped.
inline std::string normalize_username(std::string_view raw) {
  raw = trim(raw);
  if (!raw.empty() && raw.front() == '@') raw.remove_prefix(1);
  return unicode::to_lower_utf8(raw);
}

// ---------------------------------------------------------------------------
// JSON mapping

inline json label_to_json(const StanceLabel& label) {
  json subs = json::array();
  for (auto s : label.sublabels) subs.push_back(to_string(s));
  return json{{"primary", to_string(label.primary)}, {"sublabels", subs}};
}

/// Parses and validates a label object.
inline StanceLabel label_from_json(const json& j) {
  if (!j.is_object()) throw ValidationError("label-shape", "label must be an object");
  if (!j.contains("primary") || !j["primary"].is_string()) {
    throw ValidationError("label-shape", "label.primary must be a string");
  }
  StanceLabel label;
  auto primary = parse_stance(j["primary"].get<std::string>());
  if (!primary) {
    throw ValidationError("label-primary",
                          "unknown primary label '" + j["primary"].get<std::string>() + "'");
  }
  label.primary = *primary;
  if (j.contains("sublabels") && !j["sublabels"].is_null()) {
    if (!j["sublabels"].is_array()) {
      throw ValidationError("label-shape", "label.sublabels must be an array");
    }
    for (const auto& s : j["sublabels"]) {
      if (!s.is_string()) throw ValidationError("label-shape", "sublabel must be a string");
      auto sub = parse_sublabel(s.get<std::string>());
      if (!sub) {
        throw ValidationError("label-sublabel",
                              "unknown sublabel '" + s.get<std::string>() + "'");
      }
      label.sublabels.insert(*sub);
    }
  }
  validate(label);
  return label;
}

inline json interaction_to_json(const Interaction& in) {
  return json{{"kind", to_string(in.kind)}, {"target", in.target}, {"resolved", in.resolved}};
}

inline json post_to_json(const Post& p) {
  json interactions = json::array();
  for (const auto& in : p.interactions) interactions.push_back(interaction_to_json(in));
  return json{{"id", p.id},
              {"author", p.author},
              {"description", p.description},
              {"transcript", p.transcript},
              {"created_at", p.created_at},
              {"like_count", p.like_count},
              {"hashtags", p.hashtags},
              {"interactions", interactions}};
}

namespace detail {

inline const json* optional_field(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return nullptr;
  return &*it;
}

inline std::string required_string(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_string()) {
    throw DataError(std::string("field '") + key + "' must be a string");
  }
  return it->get<std::string>();
}

inline std::string optional_string(const json& j, const char* key) {
  const json* f = optional_field(j, key);
  if (!f) return {};
  if (!f->is_string()) throw DataError(std::string("field '") + key + "' must be a string");
  return f->get<std::string>();
}

inline std::int64_t optional_int(const json& j, const char* key) {
  const json* f = optional_field(j, key);
  if (!f) return 0;
  if (!f->is_number_integer()) {
    throw DataError(std::string("field '") + key + "' must be an integer");
  }
  return f->get<std::int64_t>();
}

}  // namespace detail

/// Builds a validated Post from one JSON object; throws DataError on violations.
inline Post post_from_json(const json& j) {
  if (!j.is_object()) throw DataError("post must be a JSON object");
  Post p;
  p.id = detail::required_string(j, "id");
  if (p.id.empty()) throw DataError("post id must be nonempty");
  p.author = normalize_username(detail::required_string(j, "author"));
  if (p.author.empty()) throw DataError("post author must be nonempty");
  p.description = detail::optional_string(j, "description");
  p.transcript = detail::optional_string(j, "transcript");
  p.created_at = detail::optional_int(j, "created_at");
  p.like_count = detail::optional_int(j, "like_count");
  if (p.like_count < 0) throw DataError("like_count must be >= 0");
  if (const json* tags = detail::optional_field(j, "hashtags")) {
    if (!tags->is_array()) throw DataError("hashtags must be an array");
    for (const auto& t : *tags) {
      if (!t.is_string()) throw DataError("hashtag must be a string");
      auto norm = normalize_hashtag(t.get<std::string>());
      if (!norm) throw DataError("invalid hashtag '" + t.get<std::string>() + "'");
      p.hashtags.insert(*norm);
    }
  }
  if (const json* ins = detail::optional_field(j, "interactions")) {
    if (!ins->is_array()) throw DataError("interactions must be an array");
    for (const auto& ij : *ins) {
      if (!ij.is_object()) throw DataError("interaction must be an object");
      Interaction in;
      auto kind = parse_interaction_kind(detail::required_string(ij, "kind"));
      if (!kind) throw DataError("unknown interaction kind");
      in.kind = *kind;
      in.target = normalize_username(detail::optional_string(ij, "target"));
      if (const json* r = detail::optional_field(ij, "resolved")) {
        if (!r->is_boolean()) throw DataError("interaction.resolved must be a boolean");
        in.resolved = r->get<bool>();
      }
      if (in.resolved && in.target.empty()) {
        throw DataError("resolved interaction needs a nonempty target");
      }
      if (!in.resolved) in.target.clear();
      p.interactions.push_back(std::move(in));
    }
  }
  return p;
}

inline json annotation_to_json(const AnnotatedSample& a) {
  return json{{"post_id", a.post_id},
              {"annotator_id", a.annotator_id},
              {"label", label_to_json(a.label)},
              {"annotated_at", a.annotated_at}};
}

inline AnnotatedSample annotation_from_json(const json& j) {
  if (!j.is_object()) throw DataError("annotation must be a JSON object");
  AnnotatedSample a;
  a.post_id = detail::required_string(j, "post_id");
  a.annotator_id = detail::required_string(j, "annotator_id");
  if (a.post_id.empty() || a.annotator_id.empty()) {
    throw DataError("post_id and annotator_id must be nonempty");
  }
  if (!j.contains("label")) throw DataError("annotation needs a label");
  a.label = label_from_json(j["label"]);
  a.annotated_at = detail::optional_int(j, "annotated_at");
  return a;
}

// ---------------------------------------------------------------------------
// JSON-Lines ingestion

struct LineIssue {
  std::size_t line = 0;  // 1-based
  std::string reason;
};

struct CorpusLoad {
  std::vector<Post> posts;
  std::vector<LineIssue> rejections;
  std::vector<LineIssue> duplicates;
};

namespace detail {

template <class Record, class FromJson, class KeyOf>
void parse_jsonl(std::string_view text, FromJson&& from_json, KeyOf&& key_of,
                 std::vector<Record>& out, std::vector<LineIssue>& rejections,
                 std::vector<LineIssue>& duplicates) {
  std::unordered_set<std::string> seen;
  std::size_t line_no = 0;
  for (std::string_view line : split_lines(text)) {
    ++line_no;
    if (trim(line).empty()) continue;
    json j = json::parse(line.begin(), line.end(), nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded()) {
      rejections.push_back({line_no, "malformed JSON"});
      continue;
    }
    try {
      Record rec = from_json(j);
      std::string key = key_of(rec);
      if (!seen.insert(key).second) {
        duplicates.push_back({line_no, "duplicate key '" + key + "'"});
        continue;
      }
      out.push_back(std::move(rec));
    } catch (const DataError& e) {
      rejections.push_back({line_no, e.what()});
    } catch (const json::exception& e) {
      rejections.push_back({line_no, e.what()});
    }
  }
}

}  // namespace detail

/// Parses JSON-Lines corpus text. Malformed lines are reported, not fatal;
/// duplicate ids keep the first occurrence.
inline CorpusLoad parse_corpus(std::string_view text) {
  CorpusLoad load;
  detail::parse_jsonl<Post>(
      text, [](const json& j) { return post_from_json(j); },
      [](const Post& p) { return p.id; }, load.posts, load.rejections, load.duplicates);
  return load;
}

inline CorpusLoad load_corpus(const std::filesystem::path& path) {
  return parse_corpus(read_file(path));
}

inline std::string serialize_corpus(const std::vector<Post>& posts) {
  std::string out;
  for (const auto& p : posts) {
    out += post_to_json(p).dump();
    out += '\n';
  }
  return out;
}

inline void write_corpus(const std::filesystem::path& path, const std::vector<Post>& posts) {
  write_file(path, serialize_corpus(posts));
}

struct AnnotationLoad {
  std::vector<AnnotatedSample> samples;
  std::vector<LineIssue> rejections;
  std::vector<LineIssue> duplicates;
};

/// (post_id, annotator_id) pairs are unique; repeats keep the first.
inline AnnotationLoad parse_annotations(std::string_view text) {
  AnnotationLoad load;
  detail::parse_jsonl<AnnotatedSample>(
      text, [](const json& j) { return annotation_from_json(j); },
      [](const AnnotatedSample& a) { return a.post_id + '\x1f' + a.annotator_id; },
      load.samples, load.rejections, load.duplicates);
  return load;
}

inline AnnotationLoad load_annotations(const std::filesystem::path& path) {
  return parse_annotations(read_file(path));
}

inline std::string serialize_annotations(const std::vector<AnnotatedSample>& samples) {
  std::string out;
  for (const auto& a : samples) {
    out += annotation_to_json(a).dump();
    out += '\n';
  }
  return out;
}

/// Throws DataError naming every annotation whose post is absent from `posts`.
inline void check_annotation_references(const std::vector<AnnotatedSample>& samples,
                                        const std::vector<Post>& posts) {
  std::unordered_set<std::string> ids;
  for (const auto& p : posts) ids.insert(p.id);
  std::set<std::string> missing;
  for (const auto& a : samples) {
    if (!ids.count(a.post_id)) missing.insert(a.post_id);
  }
  if (!missing.empty()) {
    std::string msg = "annotations reference unknown posts:";
    for (const auto& m : missing) msg += " " + m;
    throw DataError(msg);
  }
}

/// Hashtag list text: one tag per line, '#' optional, ';' starts a comment line.
inline std::set<std::string> parse_hashtag_list(std::string_view text) {
  std::set<std::string> tags;
  std::size_t line_no = 0;
  for (std::string_view line : split_lines(text)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line.front() == ';') continue;
    auto tag = normalize_hashtag(line);
    if (!tag) throw ParseError("invalid hashtag '" + std::string(line) + "'", line_no);
    tags.insert(std::move(*tag));
  }
  return tags;
}

inline std::set<std::string> load_hashtag_list(const std::filesystem::path& path) {
  return parse_hashtag_list(read_file(path));
}

inline std::string serialize_hashtag_list(const std::set<std::string>& tags) {
  std::string out;
  for (const auto& t : tags) out += t + '\n';
  return out;
}

// ---------------------------------------------------------------------------
// Buckets and sampling

inline void check_disjoint(const std::set<std::string>& pro, const std::set<std::string>& anti) {
  std::vector<std::string> both;
  std::set_intersection(pro.begin(), pro.end(), anti.begin(), anti.end(),
                        std::back_inserter(both));
  if (!both.empty()) {
    std::string msg = "pro and anti hashtag lists overlap:";
    for (const auto& t : both) msg += " " + t;
    throw ConfigError(msg);
  }
}

inline HashtagBucket bucket_of(const Post& post, const std::set<std::string>& pro,
                               const std::set<std::string>& anti) {
  check_disjoint(pro, anti);
  bool has_pro = false;
  bool has_anti = false;
  for (const auto& tag : post.hashtags) {
    has_pro = has_pro || pro.count(tag) > 0;
    has_anti = has_anti || anti.count(tag) > 0;
  }
  if (has_pro && has_anti) return HashtagBucket::Both;
  if (has_pro) return HashtagBucket::ProOnly;
  if (has_anti) return HashtagBucket::AntiOnly;
  return HashtagBucket::Neither;
}

/// Draws `per_bucket` posts from each requested bucket. The draw depends only on
/// the set of post ids and the seed, not on corpus order. Output is grouped by
/// requested bucket, ids ascending within a bucket.
inline std::vector<Post> stratified_sample(const std::vector<Post>& corpus,
                                           std::size_t per_bucket,
                                           const std::vector<HashtagBucket>& buckets,
                                           const std::set<std::string>& pro,
                                           const std::set<std::string>& anti,
                                           std::uint64_t seed) {
  check_disjoint(pro, anti);
  std::set<HashtagBucket> unique(buckets.begin(), buckets.end());
  if (unique.size() != buckets.size()) throw ConfigError("bucket requested more than once");

  std::map<HashtagBucket, std::vector<const Post*>> by_bucket;
  for (const auto& p : corpus) by_bucket[bucket_of(p, pro, anti)].push_back(&p);

  std::vector<Post> out;
  if (per_bucket == 0) return out;
  for (auto b : buckets) {
    auto& members = by_bucket[b];
    if (members.size() < per_bucket) {
      throw DataError("bucket " + to_string(b) + " has " + std::to_string(members.size()) +
                      " posts, " + std::to_string(per_bucket) + " requested");
    }
    std::sort(members.begin(), members.end(),
              [](const Post* a, const Post* c) { return a->id < c->id; });
    SeededRng rng(mix_seed(seed, static_cast<std::uint64_t>(b)));
    rng.shuffle(members);
    std::vector<const Post*> chosen(members.begin(),
                                    members.begin() + static_cast<std::ptrdiff_t>(per_bucket));
    std::sort(chosen.begin(), chosen.end(),
              [](const Post* a, const Post* c) { return a->id < c->id; });
    for (const Post* p : chosen) out.push_back(*p);
  }
  return out;
}

inline constexpr std::string_view kTextSeparator = "---";

/// Transcript, a "---" line, then the description. Empty parts are elided.
inline std::string classification_text(const Post& post) {
  if (post.transcript.empty()) return post.description;
  if (post.description.empty()) return post.transcript;
  std::string out = post.transcript;
  out += '\n';
  out += kTextSeparator;
  out += '\n';
  out += post.description;
  return out;
}

}  // namespace stancenet
