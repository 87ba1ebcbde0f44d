#pragma once

// Zero-shot prompt ensembles, retrieval-augmented single-prompt
// classification, label parsing and classification records.

#include <algorithm>
#include <array>
#include <atomic>
#include <exception>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "json.hpp"
#include "stancenet/corpus.hpp"
#include "stancenet/error.hpp"
#include "stancenet/llm.hpp"
#include "stancenet/prompt.hpp"
#include "stancenet/ragindex.hpp"

namespace stancenet::classify {

using json = nlohmann::json;

inline constexpr std::size_t kEnsembleSize = 8;

enum class Strategy { ZeroShotEnsemble, RagExamples, RagExamplesTaxonomy };

inline std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::ZeroShotEnsemble: return "zero-shot";
    case Strategy::RagExamples: return "rag-examples";
    case Strategy::RagExamplesTaxonomy: return "rag-full";
  }
  return "zero-shot";
}

inline std::optional<Strategy> parse_strategy(std::string_view s) {
  for (auto st : {Strategy::ZeroShotEnsemble, Strategy::RagExamples, Strategy::RagExamplesTaxonomy}) {
    if (to_string(st) == s) return st;
  }
  return std::nullopt;
}

/// nullopt means the completion could not be read as a label.
using Vote = std::optional<Stance>;

inline std::string vote_string(const Vote& v) { return v ? to_string(*v) : "Unparseable"; }

// ---------------------------------------------------------------------------
// Label parsing

namespace detail {

inline bool is_letter(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
}

/// Occurrences of `word` in `text` bounded by non-alphanumerics on both sides.
inline bool contains_word(std::string_view text, std::string_view word) {
  for (std::size_t pos = text.find(word); pos != std::string_view::npos;
       pos = text.find(word, pos + 1)) {
    const bool left = pos == 0 || !is_letter(text[pos - 1]);
    const std::size_t end = pos + word.size();
    const bool right = end == text.size() || !is_letter(text[end]);
    if (left && right) return true;
  }
  return false;
}

}  // namespace detail

/// Looks for "anti-trans", "pro-trans" and "neutral" (case-insensitive); if
/// none appear, for bare "anti" / "pro" words. Exactly one distinct label must
/// be found.
inline Vote parse_label(std::string_view raw) {
  const std::string text = unicode::to_lower_utf8(raw);
  std::set<Stance> found;
  if (detail::contains_word(text, "anti-trans")) found.insert(Stance::AntiTrans);
  if (detail::contains_word(text, "pro-trans")) found.insert(Stance::ProTrans);
  if (detail::contains_word(text, "neutral")) found.insert(Stance::Neutral);
  if (found.empty()) {
    if (detail::contains_word(text, "anti")) found.insert(Stance::AntiTrans);
    if (detail::contains_word(text, "pro")) found.insert(Stance::ProTrans);
  }
  if (found.size() != 1) return std::nullopt;
  return *found.begin();
}

// ---------------------------------------------------------------------------
// Records

struct ClassificationRecord {
  std::string post_id;
  Strategy strategy = Strategy::ZeroShotEnsemble;
  std::optional<Stance> verdict;  // nullopt: Unclassified
  std::map<std::string, Vote> votes;
  std::vector<rag::ScoredEntry> retrieved;
  std::map<std::string, std::vector<std::string>> responses;  // raw text per attempt
  bool tie = false;
  std::string error;
  std::string manifest;  // config hash

  bool classified() const noexcept { return verdict.has_value(); }
};

inline json record_to_json(const ClassificationRecord& r) {
  json votes = json::object();
  for (const auto& [id, v] : r.votes) votes[id] = vote_string(v);
  json retrieved = json::array();
  json scores = json::array();
  for (const auto& e : r.retrieved) {
    retrieved.push_back(e.id);
    scores.push_back(e.score);
  }
  json j{{"post_id", r.post_id},
         {"strategy", to_string(r.strategy)},
         {"verdict", r.verdict ? json(to_string(*r.verdict)) : json(nullptr)},
         {"status", r.verdict ? "classified" : "unclassified"},
         {"votes", votes},
         {"retrieved", retrieved},
         {"retrieval_scores", scores},
         {"responses", r.responses},
         {"tie", r.tie},
         {"manifest", r.manifest}};
  if (!r.error.empty()) j["error"] = r.error;
  return j;
}

inline ClassificationRecord record_from_json(const json& j) {
  try {
    ClassificationRecord r;
    r.post_id = j.at("post_id").get<std::string>();
    auto strategy = parse_strategy(j.at("strategy").get<std::string>());
    if (!strategy) throw DataError("unknown strategy in record '" + r.post_id + "'");
    r.strategy = *strategy;
    if (!j.at("verdict").is_null()) {
      auto s = parse_stance(j["verdict"].get<std::string>());
      if (!s) throw DataError("unknown verdict in record '" + r.post_id + "'");
      r.verdict = *s;
    }
    for (const auto& [id, v] : j.at("votes").items()) {
      const auto str = v.get<std::string>();
      r.votes[id] = str == "Unparseable" ? std::nullopt : parse_stance(str);
    }
    const auto& ids = j.at("retrieved");
    const json scores = j.value("retrieval_scores", json::array());
    for (std::size_t i = 0; i < ids.size(); ++i) {
      r.retrieved.push_back({ids[i].get<std::string>(), i < scores.size() ? scores[i].get<double>() : 0.0});
    }
    if (j.contains("responses")) {
      r.responses = j["responses"].get<std::map<std::string, std::vector<std::string>>>();
    }
    r.tie = j.value("tie", false);
    r.error = j.value("error", "");
    r.manifest = j.value("manifest", "");
    return r;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed classification record: ") + e.what());
  }
}

inline std::string serialize_records(const std::vector<ClassificationRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    out += record_to_json(r).dump();
    out += '\n';
  }
  return out;
}

inline std::vector<ClassificationRecord> parse_records(std::string_view text) {
  std::vector<ClassificationRecord> out;
  std::size_t line_no = 0;
  for (auto line : split_lines(text)) {
    ++line_no;
    if (trim(line).empty()) continue;
    json j = json::parse(line.begin(), line.end(), nullptr, false);
    if (j.is_discarded()) throw ParseError("malformed results line", line_no);
    out.push_back(record_from_json(j));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Querying

struct Options {
  double temperature = 0.0;
  int max_tokens = 16;
  std::size_t retries = 2;          // extra attempts after an unparseable answer
  double retry_temperature = 0.2;
  std::size_t k = rag::kDefaultTopK;
  double threshold = rag::kDefaultThreshold;
  bool leave_one_out = false;       // never retrieve the post's own entry
  std::string manifest;             // config hash stamped on records
};

struct QueryOutcome {
  Vote vote;
  std::vector<std::string> responses;
};

/// Sends `prompt` and parses the answer, retrying warmer on unparseable text.
inline QueryOutcome query(const llm::Backend& backend, const std::string& prompt,
                          const Options& opts) {
  QueryOutcome out;
  for (std::size_t attempt = 0; attempt <= opts.retries; ++attempt) {
    llm::LlmRequest req{prompt, attempt == 0 ? opts.temperature : opts.retry_temperature,
                        opts.max_tokens};
    auto resp = backend.complete(req);
    out.vote = parse_label(resp.text);
    out.responses.push_back(std::move(resp.text));
    if (out.vote) break;
  }
  return out;
}

struct EnsembleVerdict {
  std::optional<Stance> verdict;
  bool tie = false;
};

/// Majority of parseable votes. Ties resolve AntiTrans > ProTrans > Neutral.
inline EnsembleVerdict ensemble(const std::map<std::string, Vote>& votes) {
  std::array<std::size_t, 3> counts{};
  for (const auto& [id, v] : votes) {
    if (v) ++counts[index_of(*v)];
  }
  const std::size_t top = *std::max_element(counts.begin(), counts.end());
  if (top == 0) return {};
  EnsembleVerdict out;
  std::size_t winners = 0;
  for (auto s : kStances) {  // precedence order
    if (counts[index_of(s)] == top) {
      if (!out.verdict) out.verdict = s;
      ++winners;
    }
  }
  out.tie = winners > 1;
  return out;
}

inline ClassificationRecord classify_zero_shot(const llm::Backend& backend, const Post& post,
                                               const std::vector<prompt::PromptTemplate>& templates,
                                               const Options& opts = {}) {
  if (templates.size() != kEnsembleSize) {
    throw ConfigError("zero-shot ensemble needs " + std::to_string(kEnsembleSize) +
                      " templates, got " + std::to_string(templates.size()));
  }
  ClassificationRecord rec;
  rec.post_id = post.id;
  rec.strategy = Strategy::ZeroShotEnsemble;
  rec.manifest = opts.manifest;
  const std::string content = classification_text(post);
  for (const auto& tmpl : templates) {
    auto outcome = query(backend, prompt::render_prompt(tmpl, content), opts);
    rec.votes[tmpl.id()] = outcome.vote;
    rec.responses[tmpl.id()] = std::move(outcome.responses);
  }
  const auto result = ensemble(rec.votes);
  rec.verdict = result.verdict;
  rec.tie = result.tie;
  if (!rec.verdict) rec.error = "all votes unparseable";
  return rec;
}

/// Definition text as shown in prompts: "[Anti-Trans: TM] ...", "[Neutral] ...".
inline std::string format_definition(const rag::IndexEntry& entry) {
  std::string tag = "[";
  if (entry.label) {
    tag += display_name(entry.label->primary);
    if (!entry.label->sublabels.empty()) tag += ": " + to_string(*entry.label->sublabels.begin());
  } else {
    tag += "Codebook";
  }
  tag += "] ";
  return tag + entry.text;
}

struct Augmentation {
  std::vector<rag::ScoredEntry> retrieved;
  std::vector<prompt::LabeledText> examples;
  std::vector<std::string> definitions;
};

inline Augmentation augment(const Post& post, const rag::Store& store, const Options& opts) {
  Augmentation aug;
  std::set<std::string> exclude;
  if (opts.leave_one_out) exclude.insert(post.id);
  auto result = rag::retrieve(store, classification_text(post), opts.k, opts.threshold, post.id,
                              exclude);
  for (const auto& hit : result.entries) {
    const rag::IndexEntry* e = store.find(hit.id);
    if (!e) continue;
    if (e->bucket == rag::EntryBucket::TaxonomyDef) {
      aug.definitions.push_back(format_definition(*e));
    } else {
      aug.examples.push_back({e->text, e->label ? e->label->primary : Stance::Neutral});
    }
  }
  aug.retrieved = std::move(result.entries);
  return aug;
}

/// Single best prompt, augmented with entries retrieved from `store`. For
/// RagExamplesTaxonomy pass the combined examples + codebook store.
inline ClassificationRecord classify_rag(const llm::Backend& backend, const Post& post,
                                         const prompt::PromptTemplate& best,
                                         const rag::Store& store, Strategy strategy,
                                         const Options& opts = {}) {
  if (strategy == Strategy::ZeroShotEnsemble) {
    throw ConfigError("classify_rag needs a retrieval strategy");
  }
  ClassificationRecord rec;
  rec.post_id = post.id;
  rec.strategy = strategy;
  rec.manifest = opts.manifest;
  auto aug = augment(post, store, opts);
  rec.retrieved = aug.retrieved;
  const auto text =
      prompt::render_prompt(best, classification_text(post), aug.examples, aug.definitions);
  auto outcome = query(backend, text, opts);
  rec.votes[best.id()] = outcome.vote;
  rec.responses[best.id()] = std::move(outcome.responses);
  rec.verdict = outcome.vote;
  if (!rec.verdict) rec.error = "unparseable after retries";
  return rec;
}

/// Prompt with the highest per-prompt accuracy over `records` (an
/// Unparseable vote counts as wrong). Ties go to the smaller id.
inline std::string select_best_prompt(const std::vector<ClassificationRecord>& records,
                                      const std::map<std::string, Stance>& truth) {
  if (records.empty()) throw DataError("no zero-shot records to select a prompt from");
  std::map<std::string, std::size_t> correct;
  for (const auto& r : records) {
    auto t = truth.find(r.post_id);
    if (t == truth.end()) throw DataError("no ground truth for post '" + r.post_id + "'");
    for (const auto& [id, v] : r.votes) {
      correct[id] += (v && *v == t->second) ? 1 : 0;
    }
  }
  if (correct.empty()) throw DataError("records carry no votes");
  std::string best;
  std::size_t best_count = 0;
  for (const auto& [id, c] : correct) {  // map order: ids ascending
    if (best.empty() || c > best_count) {
      best = id;
      best_count = c;
    }
  }
  return best;
}

/// Runs `fn` over every post with up to `parallelism` workers. Output order
/// follows input order.
inline std::vector<ClassificationRecord> classify_all(
    const std::vector<Post>& posts,
    const std::function<ClassificationRecord(const Post&)>& fn, std::size_t parallelism = 1) {
  std::vector<ClassificationRecord> out(posts.size());
  const std::size_t workers = std::max<std::size_t>(1, std::min(parallelism, posts.size()));
  if (workers == 1) {
    for (std::size_t i = 0; i < posts.size(); ++i) out[i] = fn(posts[i]);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < posts.size(); i = next++) {
        try {
          out[i] = fn(posts[i]);
        } catch (...) {
          std::lock_guard<std::mutex> lock(failure_mu);
          if (!failure) failure = std::current_exception();
          next = posts.size();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  return out;
}

}  // namespace stancenet::classify
