#pragma once

// Annotation sessions: a primary annotator labels every sample, a validator
// labels a seeded overlap subset. State lives in an append-only JSON-Lines
// event log; replaying it rebuilds the session exactly.

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "httplib.h"
#include "json.hpp"
#include "stancenet/corpus.hpp"
#include "stancenet/error.hpp"
#include "stancenet/evalkit.hpp"
#include "stancenet/ragindex.hpp"
#include "stancenet/util.hpp"

namespace stancenet::annotate {

using json = nlohmann::json;

/// Request conflicts with session state (label for a task never served, skip of a finished task).
class StateError : public DataError {
 public:
  using DataError::DataError;
};

inline constexpr std::uint64_t kPrimarySalt = 1;
inline constexpr std::uint64_t kOverlapSalt = 2;

struct SessionConfig {
  std::string primary = "a1";
  std::string validator = "a2";
  std::size_t overlap = 50;
  std::uint64_t seed = 7;
  std::string codebook_version = "1";
};

struct AnnotationTask {
  std::string post_id;
  std::string text;  // classification text followed by the hashtag list
  std::vector<std::string> hashtags;
  std::string codebook_version;
  std::string annotator;
  std::size_t position = 0;   // 1-based index in this annotator's queue
  std::size_t remaining = 0;  // tasks in the queue not yet served
};

inline json to_json(const AnnotationTask& t) {
  return {{"post_id", t.post_id},
          {"text", t.text},
          {"hashtags", t.hashtags},
          {"codebook_version", t.codebook_version},
          {"annotator", t.annotator},
          {"position", t.position},
          {"remaining", t.remaining}};
}

struct Progress {
  std::string annotator;
  std::size_t total = 0;
  std::size_t labeled = 0;
  std::size_t skipped = 0;
  std::size_t pending = 0;
  std::size_t unserved = 0;
};

inline json to_json(const Progress& p) {
  return {{"annotator", p.annotator}, {"total", p.total},     {"labeled", p.labeled},
          {"skipped", p.skipped},     {"pending", p.pending}, {"unserved", p.unserved}};
}

struct LabelEvent {
  StanceLabel label;
  std::int64_t at = 0;  // unix seconds
};

using Clock = std::function<std::int64_t()>;

inline std::int64_t unix_now() {
  return std::chrono::duration_cast<std::chrono::seconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

class AnnotationSession {
 public:
  /// `log_path` empty keeps the session in memory. An existing log is
  /// replayed and must have been written for the same configuration.
  AnnotationSession(SessionConfig config, std::vector<Post> samples,
                    std::filesystem::path log_path = {}, Clock clock = unix_now)
      : config_(std::move(config)), log_path_(std::move(log_path)), clock_(std::move(clock)) {
    if (config_.primary.empty() || config_.validator.empty() ||
        config_.primary == config_.validator) {
      throw ConfigError("session needs two distinct nonempty annotator ids");
    }
    std::sort(samples.begin(), samples.end(),
              [](const Post& a, const Post& b) { return a.id < b.id; });
    for (auto& p : samples) {
      const std::string id = p.id;
      if (!posts_.emplace(id, std::move(p)).second) {
        throw DataError("duplicate post id '" + id + "' in annotation sample");
      }
    }
    if (config_.overlap > posts_.size()) {
      throw ConfigError("overlap size " + std::to_string(config_.overlap) + " exceeds the " +
                        std::to_string(posts_.size()) + " samples");
    }
    build_queues();
    if (!log_path_.empty() && std::filesystem::exists(log_path_)) {
      replay(read_file(log_path_));
    } else {
      append(header());
    }
  }

  const SessionConfig& config() const noexcept { return config_; }
  std::size_t size() const noexcept { return posts_.size(); }
  const std::vector<std::string>& queue(const std::string& annotator) const {
    return state_of(annotator).queue;
  }
  std::vector<std::string> overlap_ids() const {
    std::vector<std::string> ids = queues_.at(config_.validator).queue;
    std::sort(ids.begin(), ids.end());
    return ids;
  }
  std::vector<std::string> annotators() const { return {config_.primary, config_.validator}; }

  /// The pending task, or the next unserved one; nullopt once the queue is exhausted.
  std::optional<AnnotationTask> next_task(const std::string& annotator) {
    std::lock_guard lock(mutex_);
    auto& st = state_of(annotator);
    if (!st.pending) {
      while (st.cursor < st.queue.size() && st.done.count(st.queue[st.cursor])) ++st.cursor;
      if (st.cursor >= st.queue.size()) return std::nullopt;
      const std::string& id = st.queue[st.cursor];
      append({{"type", "assign"}, {"annotator", annotator}, {"post_id", id}, {"at", clock_()}});
      apply_assign(st, id);
    }
    return make_task(annotator, st);
  }

  void submit_label(const std::string& annotator, const std::string& post_id,
                    const StanceLabel& label) {
    std::lock_guard lock(mutex_);
    auto& st = state_of(annotator);
    require_post(post_id);
    if (auto v = label_violation(label)) throw ValidationError(v->rule, v->message);
    if (!st.served.count(post_id)) {
      throw StateError("post '" + post_id + "' was not assigned to annotator '" + annotator + "'");
    }
    const std::int64_t at = clock_();
    append({{"type", "label"},
            {"annotator", annotator},
            {"post_id", post_id},
            {"label", label_to_json(label)},
            {"at", at}});
    apply_label(st, post_id, label, at);
  }

  void skip(const std::string& annotator, const std::string& post_id, const std::string& reason) {
    std::lock_guard lock(mutex_);
    auto& st = state_of(annotator);
    require_post(post_id);
    if (!st.pending || *st.pending != post_id) {
      throw StateError("post '" + post_id + "' is not the pending task of '" + annotator + "'");
    }
    if (trim(reason).empty()) throw ValidationError("skip-needs-reason", "a skip needs a reason");
    append({{"type", "skip"},
            {"annotator", annotator},
            {"post_id", post_id},
            {"reason", reason},
            {"at", clock_()}});
    apply_skip(st, post_id);
  }

  Progress progress(const std::string& annotator) const {
    std::lock_guard lock(mutex_);
    const auto& st = state_of(annotator);
    Progress p;
    p.annotator = annotator;
    p.total = st.queue.size();
    for (const auto& id : st.queue) {
      if (st.latest.count(id)) ++p.labeled;
      else if (st.skipped.count(id)) ++p.skipped;
      else if (st.pending && *st.pending == id) ++p.pending;
      else ++p.unserved;
    }
    return p;
  }

  /// Labels currently in force (latest submission; skipped tasks absent).
  std::map<std::string, StanceLabel> labels(const std::string& annotator) const {
    std::lock_guard lock(mutex_);
    std::map<std::string, StanceLabel> out;
    for (const auto& [id, ev] : state_of(annotator).latest) out[id] = ev.label;
    return out;
  }

  std::vector<LabelEvent> history(const std::string& annotator, const std::string& post_id) const {
    std::lock_guard lock(mutex_);
    const auto& h = state_of(annotator).history;
    auto it = h.find(post_id);
    return it == h.end() ? std::vector<LabelEvent>{} : it->second;
  }

  /// Kappa on primary stance over overlap samples both annotators have labeled.
  eval::AgreementReport agreement_snapshot() const {
    std::lock_guard lock(mutex_);
    const auto& a = queues_.at(config_.primary).latest;
    const auto& b = queues_.at(config_.validator).latest;
    std::map<std::string, Stance> la;
    std::map<std::string, Stance> lb;
    for (const auto& [id, ev] : b) {
      auto it = a.find(id);
      if (it == a.end()) continue;
      la[id] = it->second.label.primary;
      lb[id] = ev.label.primary;
    }
    return eval::cohen_kappa(la, lb);
  }

  /// The primary annotator's non-Neutral labels, sorted by post id.
  std::vector<AnnotatedSample> export_examples() const {
    std::lock_guard lock(mutex_);
    std::vector<AnnotatedSample> out;
    for (const auto& [id, ev] : queues_.at(config_.primary).latest) {
      if (ev.label.primary == Stance::Neutral) continue;
      out.push_back({id, config_.primary, ev.label, ev.at});
    }
    return out;
  }

  /// Every annotator's labels in force, for evaluation ground truth and kappa offline.
  std::vector<AnnotatedSample> export_all() const {
    std::lock_guard lock(mutex_);
    std::vector<AnnotatedSample> out;
    for (const auto& who : {config_.primary, config_.validator}) {
      for (const auto& [id, ev] : queues_.at(who).latest) out.push_back({id, who, ev.label, ev.at});
    }
    return out;
  }

  const Post& post(const std::string& id) const {
    require_post(id);
    return posts_.at(id);
  }

 private:
  struct AnnotatorState {
    std::vector<std::string> queue;
    std::set<std::string> served;  // ever assigned
    std::set<std::string> done;    // labeled or skipped
    std::set<std::string> skipped;
    std::optional<std::string> pending;
    std::size_t cursor = 0;
    std::map<std::string, LabelEvent> latest;
    std::map<std::string, std::vector<LabelEvent>> history;
  };

  void build_queues() {
    std::vector<std::string> ids;
    for (const auto& [id, p] : posts_) ids.push_back(id);
    std::vector<std::string> primary = ids;
    SeededRng(mix_seed(config_.seed, kPrimarySalt)).shuffle(primary);
    std::vector<std::string> pick = ids;
    SeededRng(mix_seed(config_.seed, kOverlapSalt)).shuffle(pick);
    const std::set<std::string> overlap(pick.begin(), pick.begin() + static_cast<std::ptrdiff_t>(config_.overlap));
    std::vector<std::string> validator;
    for (const auto& id : primary) {
      if (overlap.count(id)) validator.push_back(id);
    }
    queues_[config_.primary].queue = std::move(primary);
    queues_[config_.validator].queue = std::move(validator);
  }

  json header() const {
    std::vector<std::string> ids;
    for (const auto& [id, p] : posts_) ids.push_back(id);
    return {{"type", "session"},
            {"primary", config_.primary},
            {"validator", config_.validator},
            {"overlap", config_.overlap},
            {"seed", config_.seed},
            {"codebook_version", config_.codebook_version},
            {"post_ids", ids}};
  }

  AnnotatorState& state_of(const std::string& annotator) {
    auto it = queues_.find(annotator);
    if (it == queues_.end()) throw NotFoundError("unknown annotator '" + annotator + "'");
    return it->second;
  }
  const AnnotatorState& state_of(const std::string& annotator) const {
    auto it = queues_.find(annotator);
    if (it == queues_.end()) throw NotFoundError("unknown annotator '" + annotator + "'");
    return it->second;
  }

  void require_post(const std::string& id) const {
    if (!posts_.count(id)) throw NotFoundError("unknown post '" + id + "'");
  }

  AnnotationTask make_task(const std::string& annotator, const AnnotatorState& st) const {
    const Post& p = posts_.at(*st.pending);
    AnnotationTask t;
    t.post_id = p.id;
    t.hashtags.assign(p.hashtags.begin(), p.hashtags.end());
    t.text = classification_text(p);
    if (!t.hashtags.empty()) {
      t.text += "\n\n";
      for (std::size_t i = 0; i < t.hashtags.size(); ++i) t.text += (i ? " #" : "#") + t.hashtags[i];
    }
    t.codebook_version = config_.codebook_version;
    t.annotator = annotator;
    std::size_t unserved = 0;
    for (const auto& id : st.queue) {
      if (!st.served.count(id)) ++unserved;
    }
    t.position = st.served.size();
    t.remaining = unserved;
    return t;
  }

  void apply_assign(AnnotatorState& st, const std::string& id) {
    st.served.insert(id);
    st.pending = id;
  }

  void apply_label(AnnotatorState& st, const std::string& id, const StanceLabel& label,
                   std::int64_t at) {
    st.latest[id] = {label, at};
    st.history[id].push_back({label, at});
    st.skipped.erase(id);
    st.done.insert(id);
    if (st.pending && *st.pending == id) st.pending.reset();
  }

  void apply_skip(AnnotatorState& st, const std::string& id) {
    st.skipped.insert(id);
    st.done.insert(id);
    st.pending.reset();
  }

  void replay(const std::string& text) {
    const auto lines = split_lines(text);
    bool seen_header = false;
    std::size_t line_no = 0;
    for (const auto line : lines) {
      ++line_no;
      if (trim(line).empty()) continue;
      json ev = json::parse(line, nullptr, false);
      if (ev.is_discarded() || !ev.is_object()) {
        // A torn final write is the only tolerated damage.
        if (line_no == lines.size()) break;
        throw ParseError("annotation log '" + log_path_.string() + "' has a corrupt event", line_no);
      }
      const std::string type = ev.value("type", "");
      if (!seen_header) {
        if (type != "session") throw ParseError("annotation log does not start with a session header", line_no);
        if (ev != header()) {
          throw ConfigError("annotation log '" + log_path_.string() +
                            "' was written for a different session configuration");
        }
        seen_header = true;
        continue;
      }
      try {
        auto& st = state_of(ev.at("annotator").get<std::string>());
        const std::string id = ev.at("post_id").get<std::string>();
        require_post(id);
        if (type == "assign") {
          apply_assign(st, id);
        } else if (type == "label") {
          apply_label(st, id, label_from_json(ev.at("label")), ev.value("at", std::int64_t{0}));
        } else if (type == "skip") {
          apply_skip(st, id);
        } else {
          throw DataError("unknown event type '" + type + "'");
        }
      } catch (const json::exception& e) {
        throw ParseError(std::string("bad annotation event: ") + e.what(), line_no);
      } catch (const DataError& e) {
        throw ParseError(std::string("bad annotation event: ") + e.what(), line_no);
      }
    }
    if (!seen_header) append(header());
  }

  void append(const json& event) {
    if (log_path_.empty()) return;
    if (log_path_.has_parent_path()) std::filesystem::create_directories(log_path_.parent_path());
    std::ofstream out(log_path_, std::ios::app | std::ios::binary);
    out << event.dump() << '\n';
    out.flush();
    if (!out) throw IoError("cannot append to annotation log '" + log_path_.string() + "'");
  }

  SessionConfig config_;
  std::filesystem::path log_path_;
  Clock clock_;
  std::map<std::string, Post> posts_;
  std::map<std::string, AnnotatorState> queues_;
  mutable std::mutex mutex_;
};

// ---------------------------------------------------------------------------
// HTTP

namespace detail {

inline void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

inline void send_error(httplib::Response& res, int status, const std::string& message,
                       const std::string& rule = {}) {
  json body{{"error", message}};
  if (!rule.empty()) body["rule"] = rule;
  send_json(res, status, body);
}

template <class Fn>
void guarded(httplib::Response& res, Fn&& fn) {
  try {
    fn();
  } catch (const ValidationError& e) {
    send_error(res, 422, e.what(), e.rule());
  } catch (const NotFoundError& e) {
    send_error(res, 404, e.what());
  } catch (const StateError& e) {
    send_error(res, 409, e.what());
  } catch (const json::exception& e) {
    send_error(res, 400, std::string("bad request body: ") + e.what());
  } catch (const std::exception& e) {
    send_error(res, 500, e.what());
  }
}

inline json body_of(const httplib::Request& req) {
  json body = json::parse(req.body, nullptr, false);
  if (body.is_discarded() || !body.is_object()) {
    throw ValidationError("body-is-json-object", "request body must be a JSON object");
  }
  return body;
}

inline std::string field(const json& body, const char* key) {
  auto it = body.find(key);
  if (it == body.end() || !it->is_string()) {
    throw ValidationError("missing-field", std::string("request needs string field '") + key + "'");
  }
  return it->get<std::string>();
}

}  // namespace detail

/// Registers the annotation endpoints; `ui_dir`, when it exists, is served at "/".
inline void mount_api(httplib::Server& server, std::shared_ptr<AnnotationSession> session,
                      std::vector<rag::CodebookEntry> codebook,
                      const std::filesystem::path& ui_dir = {}) {
  server.Get("/api/task", [session](const httplib::Request& req, httplib::Response& res) {
    detail::guarded(res, [&] {
      if (!req.has_param("annotator")) {
        throw ValidationError("missing-field", "query parameter 'annotator' is required");
      }
      const auto who = req.get_param_value("annotator");
      if (auto task = session->next_task(who)) {
        detail::send_json(res, 200, {{"status", "task"}, {"task", to_json(*task)}});
      } else {
        detail::send_json(res, 200, {{"status", "done"}, {"task", nullptr}});
      }
    });
  });
  server.Post("/api/label", [session](const httplib::Request& req, httplib::Response& res) {
    detail::guarded(res, [&] {
      const json body = detail::body_of(req);
      const auto who = detail::field(body, "annotator");
      const auto id = detail::field(body, "post_id");
      if (!body.contains("label")) throw ValidationError("missing-field", "request needs 'label'");
      const json& lj = body["label"];
      StanceLabel label;
      try {
        label = label_from_json(lj);
      } catch (const ValidationError&) {
        throw;
      } catch (const std::exception& e) {
        throw ValidationError("label-schema", e.what());
      }
      session->submit_label(who, id, label);
      detail::send_json(res, 200, {{"status", "ok"},
                                   {"post_id", id},
                                   {"history_length", session->history(who, id).size()}});
    });
  });
  server.Post("/api/skip", [session](const httplib::Request& req, httplib::Response& res) {
    detail::guarded(res, [&] {
      const json body = detail::body_of(req);
      const auto who = detail::field(body, "annotator");
      const auto id = detail::field(body, "post_id");
      session->skip(who, id, detail::field(body, "reason"));
      detail::send_json(res, 200, {{"status", "ok"}, {"post_id", id}});
    });
  });
  server.Get("/api/agreement", [session](const httplib::Request&, httplib::Response& res) {
    detail::guarded(res, [&] { detail::send_json(res, 200, eval::to_json(session->agreement_snapshot())); });
  });
  server.Get("/api/progress", [session](const httplib::Request& req, httplib::Response& res) {
    detail::guarded(res, [&] {
      json out = json::array();
      if (req.has_param("annotator")) {
        out.push_back(to_json(session->progress(req.get_param_value("annotator"))));
      } else {
        for (const auto& who : session->annotators()) out.push_back(to_json(session->progress(who)));
      }
      detail::send_json(res, 200, {{"session_total", session->size()},
                                   {"overlap", session->config().overlap},
                                   {"annotators", out}});
    });
  });
  server.Get("/api/codebook", [session, codebook](const httplib::Request&, httplib::Response& res) {
    detail::guarded(res, [&] {
      detail::send_json(res, 200, {{"version", session->config().codebook_version},
                                   {"entries", rag::codebook_to_json(codebook)}});
    });
  });
  server.Get("/api/export", [session](const httplib::Request&, httplib::Response& res) {
    detail::guarded(res, [&] {
      res.status = 200;
      res.set_content(serialize_annotations(session->export_examples()), "application/x-ndjson");
    });
  });
  if (!ui_dir.empty() && std::filesystem::is_directory(ui_dir)) {
    server.set_mount_point("/", ui_dir.string());
  }
}

}  // namespace stancenet::annotate
