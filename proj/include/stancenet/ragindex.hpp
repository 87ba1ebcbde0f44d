#pragma once

// Hashed TF-IDF embeddings and bucketed vector stores for annotated examples
// and codebook definitions, with thresholded top-k cosine retrieval.
//
// Tokens are maximal runs of word characters, case-folded. Each token is
// hashed (FNV-1a 64) into one of `dimension` slots. Slot weights are raw term
// frequency times smoothed idf, idf = ln((1 + N) / (1 + df)) + 1, where N is
// the number of entries in the store and df the number of entries touching
// the slot. Vectors are L2-normalized, so cosine similarity is a dot product.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "json.hpp"
#include "stancenet/corpus.hpp"
#include "stancenet/error.hpp"
#include "stancenet/unicode.hpp"
#include "stancenet/util.hpp"

namespace stancenet::rag {

using json = nlohmann::json;

inline constexpr std::size_t kDefaultDimension = 512;
inline constexpr std::size_t kDefaultTopK = 3;
inline constexpr double kDefaultThreshold = 0.35;

/// (slot, weight) pairs sorted by slot, no zero weights.
using SparseVector = std::vector<std::pair<std::uint32_t, double>>;

inline std::vector<std::string> tokenize(std::string_view text) {
  const std::u32string cps = unicode::to_lower(unicode::decode(text));
  std::vector<std::string> tokens;
  std::u32string cur;
  for (char32_t c : cps) {
    if (unicode::is_word(c)) {
      cur.push_back(c);
    } else if (!cur.empty()) {
      tokens.push_back(unicode::encode(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(unicode::encode(cur));
  return tokens;
}

inline std::uint32_t slot_of(std::string_view token, std::size_t dimension) {
  return static_cast<std::uint32_t>(fnv1a64(token) % dimension);
}

inline SparseVector term_frequencies(std::string_view text, std::size_t dimension) {
  std::map<std::uint32_t, double> tf;
  for (const auto& tok : tokenize(text)) tf[slot_of(tok, dimension)] += 1.0;
  return SparseVector(tf.begin(), tf.end());
}

inline double idf_value(std::size_t doc_count, std::size_t df) {
  return std::log((1.0 + static_cast<double>(doc_count)) / (1.0 + static_cast<double>(df))) + 1.0;
}

/// Applies idf weights then L2-normalizes. Empty input stays empty (the zero vector).
inline SparseVector weigh(const SparseVector& tf, const std::vector<double>& idf) {
  SparseVector out;
  out.reserve(tf.size());
  double norm2 = 0;
  for (const auto& [slot, f] : tf) {
    const double w = f * idf.at(slot);
    if (w == 0) continue;
    out.emplace_back(slot, w);
    norm2 += w * w;
  }
  if (norm2 == 0) return {};
  const double norm = std::sqrt(norm2);
  for (auto& kv : out) kv.second /= norm;
  return out;
}

/// Dot product of two sorted sparse vectors; 0 when either is the zero vector.
inline double dot(const SparseVector& a, const SparseVector& b) {
  double s = 0;
  auto i = a.begin();
  auto j = b.begin();
  while (i != a.end() && j != b.end()) {
    if (i->first < j->first) {
      ++i;
    } else if (j->first < i->first) {
      ++j;
    } else {
      s += i->second * j->second;
      ++i;
      ++j;
    }
  }
  return s;
}

enum class EntryBucket { AntiExample, ProExample, TaxonomyDef };

inline std::string to_string(EntryBucket b) {
  switch (b) {
    case EntryBucket::AntiExample: return "anti_example";
    case EntryBucket::ProExample: return "pro_example";
    case EntryBucket::TaxonomyDef: return "taxonomy_def";
  }
  return "taxonomy_def";
}

inline std::optional<EntryBucket> parse_entry_bucket(std::string_view s) {
  for (auto b : {EntryBucket::AntiExample, EntryBucket::ProExample, EntryBucket::TaxonomyDef}) {
    if (to_string(b) == s) return b;
  }
  return std::nullopt;
}

/// Source material for one store entry, before embedding.
struct Document {
  std::string id;
  std::string text;
  EntryBucket bucket = EntryBucket::TaxonomyDef;
  std::optional<StanceLabel> label;  // examples: the annotation; definitions: side + sublabel
};

struct IndexEntry {
  std::string id;
  std::string text;
  EntryBucket bucket = EntryBucket::TaxonomyDef;
  std::optional<StanceLabel> label;
  SparseVector embedding;
};

inline void check_entry(const Document& d) {
  if (d.id.empty()) throw DataError("store entry id must be nonempty");
  if (d.bucket == EntryBucket::TaxonomyDef) return;
  const Stance want =
      d.bucket == EntryBucket::AntiExample ? Stance::AntiTrans : Stance::ProTrans;
  if (!d.label || d.label->primary != want) {
    throw DataError("example entry '" + d.id + "' label does not match bucket " +
                    to_string(d.bucket));
  }
}

/// Immutable after construction; rebuilding yields a new store.
class Store {
 public:
  Store() : Store(std::vector<Document>{}) {}

  /// Builds embeddings with idf learned over `docs`, or with `frozen_idf` when given.
  explicit Store(std::vector<Document> docs, std::size_t dimension = kDefaultDimension,
                 std::optional<std::vector<double>> frozen_idf = std::nullopt)
      : dimension_(dimension) {
    if (dimension_ == 0) throw ConfigError("store dimension must be positive");
    std::set<std::string> ids;
    for (const auto& d : docs) {
      check_entry(d);
      if (!ids.insert(d.id).second) throw DataError("duplicate store entry id '" + d.id + "'");
    }
    std::vector<SparseVector> tfs;
    tfs.reserve(docs.size());
    std::vector<std::size_t> df(dimension_, 0);
    for (const auto& d : docs) {
      tfs.push_back(term_frequencies(d.text, dimension_));
      for (const auto& kv : tfs.back()) ++df[kv.first];
    }
    if (frozen_idf) {
      if (frozen_idf->size() != dimension_) throw ConfigError("frozen idf has wrong dimension");
      idf_ = std::move(*frozen_idf);
    } else {
      idf_.resize(dimension_);
      for (std::size_t s = 0; s < dimension_; ++s) idf_[s] = idf_value(docs.size(), df[s]);
    }
    entries_.reserve(docs.size());
    for (std::size_t i = 0; i < docs.size(); ++i) {
      entries_.push_back(IndexEntry{std::move(docs[i].id), std::move(docs[i].text),
                                    docs[i].bucket, std::move(docs[i].label),
                                    weigh(tfs[i], idf_)});
    }
  }

  std::size_t dimension() const noexcept { return dimension_; }
  const std::vector<double>& idf() const noexcept { return idf_; }
  const std::vector<IndexEntry>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }

  SparseVector embed(std::string_view text) const {
    return weigh(term_frequencies(text, dimension_), idf_);
  }

  const IndexEntry* find(std::string_view id) const {
    for (const auto& e : entries_) {
      if (e.id == id) return &e;
    }
    return nullptr;
  }

  std::vector<Document> documents() const {
    std::vector<Document> docs;
    docs.reserve(entries_.size());
    for (const auto& e : entries_) docs.push_back({e.id, e.text, e.bucket, e.label});
    return docs;
  }

  std::map<std::string, std::size_t> bucket_counts() const {
    std::map<std::string, std::size_t> counts;
    for (const auto& e : entries_) ++counts[to_string(e.bucket)];
    return counts;
  }

  /// Creation manifest. Contains no timestamps, so rebuilding the same store
  /// serializes to the same bytes.
  json manifest() const {
    std::string digest_src;
    for (const auto& e : entries_) {
      digest_src += e.id;
      digest_src += '\x1f';
      digest_src += e.text;
      digest_src += '\x1e';
    }
    return {{"format", "stancenet-store/1"},
            {"tokenizer", "unicode-word-casefold"},
            {"hash", "fnv1a64-mod-dimension"},
            {"weighting", "tf*idf; idf=ln((1+N)/(1+df))+1; l2"},
            {"entry_count", entries_.size()},
            {"bucket_counts", bucket_counts()},
            {"content_digest", hex64(fnv1a64(digest_src))}};
  }

  json to_json() const {
    json entries = json::array();
    for (const auto& e : entries_) {
      json emb = json::array();
      for (const auto& [slot, w] : e.embedding) emb.push_back(json::array({slot, w}));
      json je{{"id", e.id}, {"text", e.text}, {"bucket", to_string(e.bucket)}, {"embedding", emb}};
      je["label"] = e.label ? label_to_json(*e.label) : json(nullptr);
      entries.push_back(std::move(je));
    }
    return {{"header",
             {{"dimension", dimension_},
              {"doc_count", entries_.size()},
              {"idf", idf_},
              {"manifest", manifest()}}},
            {"entries", entries}};
  }

  /// Restores a serialized store. Embeddings are recomputed from text and the
  /// stored idf table and must match what the file carries.
  static Store from_json(const json& j) {
    try {
      const auto& header = j.at("header");
      const std::size_t dim = header.at("dimension").get<std::size_t>();
      auto idf = header.at("idf").get<std::vector<double>>();
      if (idf.size() != dim) throw DataError("store idf table does not match dimension");
      std::vector<Document> docs;
      for (const auto& je : j.at("entries")) {
        Document d;
        d.id = je.at("id").get<std::string>();
        d.text = je.at("text").get<std::string>();
        auto bucket = parse_entry_bucket(je.at("bucket").get<std::string>());
        if (!bucket) throw DataError("unknown store bucket in entry '" + d.id + "'");
        d.bucket = *bucket;
        if (je.contains("label") && !je["label"].is_null()) d.label = label_from_json(je["label"]);
        docs.push_back(std::move(d));
      }
      Store store(std::move(docs), dim, std::move(idf));
      const auto& jentries = j.at("entries");
      for (std::size_t i = 0; i < store.entries_.size(); ++i) {
        const auto& emb = jentries[i].at("embedding");
        const auto& mine = store.entries_[i].embedding;
        bool same = emb.size() == mine.size();
        for (std::size_t k = 0; same && k < mine.size(); ++k) {
          same = emb[k].at(0).get<std::uint32_t>() == mine[k].first &&
                 std::abs(emb[k].at(1).get<double>() - mine[k].second) <= 1e-12;
        }
        if (!same) {
          throw DataError("store entry '" + store.entries_[i].id +
                          "' embedding does not match its text");
        }
      }
      return store;
    } catch (const json::exception& e) {
      throw DataError(std::string("malformed store file: ") + e.what());
    }
  }

 private:
  std::size_t dimension_;
  std::vector<double> idf_;
  std::vector<IndexEntry> entries_;
};

inline void save_store(const std::filesystem::path& path, const Store& store) {
  write_file(path, store.to_json().dump() + "\n");
}

inline Store load_store(const std::filesystem::path& path) {
  json j = json::parse(read_file(path), nullptr, false);
  if (j.is_discarded()) throw DataError("store file '" + path.string() + "' is not valid JSON");
  return Store::from_json(j);
}

/// Merges two stores; idf is recomputed over the union.
inline Store combine(const Store& a, const Store& b) {
  if (a.dimension() != b.dimension()) throw ConfigError("cannot combine stores of different dimension");
  auto docs = a.documents();
  for (auto& d : b.documents()) docs.push_back(std::move(d));
  return Store(std::move(docs), a.dimension());
}

// ---------------------------------------------------------------------------
// Indexing

struct ExampleIndex {
  Store store;
  std::vector<std::string> skipped_neutral;  // post ids
};

/// One entry per non-Neutral sample, text = classification_text(post).
inline ExampleIndex index_examples(const std::vector<AnnotatedSample>& samples,
                                   const std::vector<Post>& posts,
                                   std::size_t dimension = kDefaultDimension) {
  std::unordered_map<std::string, const Post*> by_id;
  for (const auto& p : posts) by_id.emplace(p.id, &p);
  std::vector<Document> docs;
  ExampleIndex out;
  std::set<std::string> seen;
  for (const auto& s : samples) {
    if (!seen.insert(s.post_id).second) {
      throw DataError("post '" + s.post_id + "' annotated more than once in the example set");
    }
    auto it = by_id.find(s.post_id);
    if (it == by_id.end()) throw DataError("annotation references unknown post '" + s.post_id + "'");
    if (s.label.primary == Stance::Neutral) {
      out.skipped_neutral.push_back(s.post_id);
      continue;
    }
    docs.push_back({s.post_id, classification_text(*it->second),
                    s.label.primary == Stance::AntiTrans ? EntryBucket::AntiExample
                                                         : EntryBucket::ProExample,
                    s.label});
  }
  out.store = Store(std::move(docs), dimension);
  return out;
}

struct CodebookEntry {
  std::string id;
  Stance side = Stance::Neutral;
  std::optional<Sublabel> sublabel;
  std::string definition;
};

namespace detail {

/// Byte offsets of the top-level array elements of a JSON text.
inline std::vector<std::size_t> top_level_element_offsets(std::string_view text) {
  std::vector<std::size_t> offsets;
  int depth = 0;
  bool in_string = false;
  bool escape = false;
  bool expect_element = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_string) {
      if (escape) {
        escape = false;
      } else if (c == '\\') {
        escape = true;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == ' ' || c == '\n' || c == '\r' || c == '\t') continue;
    if (depth == 1 && expect_element && c != ']') {
      offsets.push_back(i);
      expect_element = false;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '[' || c == '{') {
      ++depth;
      if (depth == 1 && c == '[') expect_element = true;
    } else if (c == ']' || c == '}') {
      --depth;
    } else if (c == ',' && depth == 1) {
      expect_element = true;
    }
  }
  return offsets;
}

inline std::size_t line_at(std::string_view text, std::size_t offset) {
  return 1 + static_cast<std::size_t>(
                 std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(
                                                             std::min(offset, text.size())),
                            '\n'));
}

}  // namespace detail

/// Parses a codebook: a JSON list of {id, side: pro|anti|neutral, sublabel|null,
/// definition}. Errors carry the line of the offending entry.
inline std::vector<CodebookEntry> parse_codebook(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed codebook: ") + e.what(),
                     detail::line_at(text, e.byte == 0 ? 0 : e.byte - 1));
  }
  if (!j.is_array()) throw ParseError("codebook must be a JSON list", 1);
  const auto offsets = detail::top_level_element_offsets(text);
  std::vector<CodebookEntry> out;
  std::set<std::string> ids;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::size_t line = i < offsets.size() ? detail::line_at(text, offsets[i]) : 1;
    const auto& e = j[i];
    const auto fail = [&](const std::string& why) -> ParseError {
      return ParseError("codebook entry " + std::to_string(i + 1) + ": " + why, line);
    };
    if (!e.is_object()) throw fail("not an object");
    CodebookEntry c;
    if (!e.contains("id") || !e["id"].is_string() || e["id"].get<std::string>().empty()) {
      throw fail("missing id");
    }
    c.id = e["id"].get<std::string>();
    if (!ids.insert(c.id).second) throw fail("duplicate definition id '" + c.id + "'");
    if (!e.contains("side") || !e["side"].is_string()) throw fail("missing side");
    auto side = parse_stance(e["side"].get<std::string>());
    if (!side) throw fail("unknown side '" + e["side"].get<std::string>() + "'");
    c.side = *side;
    if (e.contains("sublabel") && !e["sublabel"].is_null()) {
      if (!e["sublabel"].is_string()) throw fail("sublabel must be a string or null");
      c.sublabel = parse_sublabel(e["sublabel"].get<std::string>());
      if (!c.sublabel) throw fail("unknown sublabel '" + e["sublabel"].get<std::string>() + "'");
      if (side_of(*c.sublabel) != c.side) throw fail("sublabel does not belong to side");
    }
    if (!e.contains("definition") || !e["definition"].is_string() ||
        trim(e["definition"].get<std::string>()).empty()) {
      throw fail("missing definition text");
    }
    c.definition = e["definition"].get<std::string>();
    out.push_back(std::move(c));
  }
  return out;
}

inline std::vector<CodebookEntry> load_codebook(const std::filesystem::path& path) {
  return parse_codebook(read_file(path));
}

inline json codebook_to_json(const std::vector<CodebookEntry>& codebook) {
  json out = json::array();
  for (const auto& c : codebook) {
    out.push_back({{"id", c.id},
                   {"side", c.side == Stance::AntiTrans  ? "anti"
                            : c.side == Stance::ProTrans ? "pro"
                                                         : "neutral"},
                   {"sublabel", c.sublabel ? json(to_string(*c.sublabel)) : json(nullptr)},
                   {"definition", c.definition}});
  }
  return out;
}

inline std::vector<Document> taxonomy_documents(const std::vector<CodebookEntry>& codebook) {
  std::vector<Document> docs;
  for (const auto& c : codebook) {
    StanceLabel label{c.side, {}};
    if (c.sublabel) label.sublabels.insert(*c.sublabel);
    docs.push_back({c.id, c.definition, EntryBucket::TaxonomyDef, label});
  }
  return docs;
}

/// One TaxonomyDef entry per definition.
inline Store index_taxonomy(const std::vector<CodebookEntry>& codebook,
                            std::size_t dimension = kDefaultDimension) {
  return Store(taxonomy_documents(codebook), dimension);
}

// ---------------------------------------------------------------------------
// Retrieval

struct ScoredEntry {
  std::string id;
  double score = 0;
};

struct RetrievalResult {
  std::string query_id;
  std::vector<ScoredEntry> entries;
};

/// Ranks every entry by cosine to the query and keeps the top `k` scoring at
/// least `threshold`; ties go to the smaller id. Entries named in `exclude`
/// are never returned.
inline RetrievalResult retrieve(const Store& store, std::string_view query, std::size_t k,
                                double threshold, std::string query_id = {},
                                const std::set<std::string>& exclude = {}) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw ConfigError("threshold must be in [0, 1]");
  RetrievalResult result{std::move(query_id), {}};
  if (k == 0 || store.empty()) return result;
  const SparseVector q = store.embed(query);
  for (const auto& e : store.entries()) {
    if (exclude.count(e.id)) continue;
    const double s = dot(q, e.embedding);
    if (s >= threshold) result.entries.push_back({e.id, s});
  }
  const auto better = [](const ScoredEntry& a, const ScoredEntry& b) {
    return a.score != b.score ? a.score > b.score : a.id < b.id;
  };
  if (result.entries.size() > k) {
    std::partial_sort(result.entries.begin(), result.entries.begin() + static_cast<std::ptrdiff_t>(k),
                      result.entries.end(), better);
    result.entries.resize(k);
  } else {
    std::sort(result.entries.begin(), result.entries.end(), better);
  }
  return result;
}

}  // namespace stancenet::rag
