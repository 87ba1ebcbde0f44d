// stancenet: command-line pipeline
//   ingest -> expand-hashtags -> sample -> index -> classify -> evaluate -> network
// plus `serve` for annotation sessions.

#include <iostream>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "stancenet/annotate.hpp"
#include "stancenet/classify.hpp"
#include "stancenet/config.hpp"
#include "stancenet/corpus.hpp"
#include "stancenet/evalkit.hpp"
#include "stancenet/netgraph.hpp"
#include "stancenet/snowball.hpp"
#include "stancenet/textparse.hpp"

namespace fs = std::filesystem;
using namespace stancenet;
using config::KeySpec;
using config::Settings;
using json = nlohmann::json;

namespace {

bool g_quiet = false;

void log(const std::string& level, const std::string& msg) {
  if (g_quiet && level == "info") return;
  std::cerr << "stancenet: " << level << ": " << msg << "\n";
}
void info(const std::string& msg) { log("info", msg); }
void warn(const std::string& msg) { log("warning", msg); }

void require_input(const fs::path& path, const std::string& what, const std::string& producer) {
  if (path.empty()) throw ConfigError(what + " path is not set");
  if (!fs::exists(path)) {
    throw DataError(what + " '" + path.string() + "' not found; produce it with `stancenet " +
                    producer + "`");
  }
}

std::vector<Post> load_posts(const fs::path& path, const std::string& producer) {
  require_input(path, "corpus", producer);
  auto load = load_corpus(path);
  if (!load.rejections.empty() || !load.duplicates.empty()) {
    warn(path.string() + ": " + std::to_string(load.rejections.size()) + " rejected and " +
         std::to_string(load.duplicates.size()) + " duplicate lines ignored");
  }
  return std::move(load.posts);
}

/// Labels of one annotator, keyed by post id.
std::map<std::string, AnnotatedSample> annotator_labels(const fs::path& path,
                                                        const std::string& annotator) {
  require_input(path, "annotations", "serve --export");
  auto load = load_annotations(path);
  if (!load.rejections.empty()) {
    throw ParseError("annotation file '" + path.string() + "': " + load.rejections.front().reason,
                     load.rejections.front().line);
  }
  std::map<std::string, AnnotatedSample> out;
  for (auto& s : load.samples) {
    if (s.annotator_id == annotator) out.emplace(s.post_id, std::move(s));
  }
  if (out.empty()) {
    throw DataError("annotation file '" + path.string() + "' has no labels by annotator '" +
                    annotator + "'");
  }
  return out;
}

void write_jsonl_output(const fs::path& path, const std::string& content,
                        const config::Manifest& manifest) {
  write_file(path, content);
  manifest.write_beside(path);
  info("wrote " + path.string());
}

// ---------------------------------------------------------------------------
// Subcommands

const std::vector<KeySpec> kIngestKeys = {
    {"input", nullptr, "raw posts, JSON-Lines"},
    {"output", "work/corpus.jsonl", "canonical corpus"},
    {"report", "work/ingest_report.json", "rejections and duplicates"},
    {"grammar", "", "interaction marker grammar (JSON)"},
};

void run_ingest(const Settings& s) {
  const fs::path input = s.path("input");
  require_input(input, "raw post file", "ingest --input <crawl.jsonl>");
  config::Manifest manifest("ingest", s);
  manifest.input(input);
  textparse::MarkerGrammar grammar;
  if (!s.str("grammar").empty()) {
    manifest.input(s.path("grammar"));
    grammar = textparse::MarkerGrammar::from_json(json::parse(read_file(s.path("grammar"))));
  }
  auto load = manifest.stage("load", [&] { return load_corpus(input); });
  manifest.stage("parse", [&] {
    for (auto& p : load.posts) textparse::enrich_post(p, grammar);
  });
  json issues = json::array();
  for (const auto& r : load.rejections) issues.push_back({{"line", r.line}, {"reason", r.reason}});
  json dups = json::array();
  for (const auto& d : load.duplicates) dups.push_back({{"line", d.line}, {"reason", d.reason}});
  std::size_t unresolved = 0;
  for (const auto& p : load.posts) {
    for (const auto& in : p.interactions) unresolved += in.resolved ? 0 : 1;
  }
  const json report{{"posts", load.posts.size()},
                    {"rejected", issues.size()},
                    {"duplicates", dups.size()},
                    {"unresolved_mentions", unresolved},
                    {"rejections", issues},
                    {"duplicate_lines", dups}};
  write_jsonl_output(s.path("output"), serialize_corpus(load.posts), manifest);
  write_file(s.path("report"), report.dump(2) + "\n");
  info(std::to_string(load.posts.size()) + " posts, " + std::to_string(issues.size()) +
       " rejected, " + std::to_string(dups.size()) + " duplicates");
}

const std::vector<KeySpec> kExpandKeys = {
    {"corpus", "work/corpus.jsonl", "canonical corpus"},
    {"seeds", nullptr, "seed hashtag list"},
    {"rounds", 1, "expansion rounds"},
    {"min_count", 2, "minimum co-occurrence count"},
    {"allowlist", "", "only these tags may be added"},
    {"denylist", "", "these tags are never added"},
    {"output", "work/expanded_hashtags.txt", "expanded hashtag list"},
    {"report", "work/expansion.json", "per-round additions"},
};

void run_expand(const Settings& s) {
  const auto posts = load_posts(s.path("corpus"), "ingest");
  require_input(s.path("seeds"), "seed hashtag list", "expand-hashtags --seeds <list.txt>");
  config::Manifest manifest("expand-hashtags", s);
  manifest.input(s.path("corpus"));
  manifest.input(s.path("seeds"));
  snowball::ExpandOptions opts;
  opts.rounds = s.count("rounds");
  opts.min_count = s.count("min_count");
  if (!s.str("allowlist").empty()) {
    manifest.input(s.path("allowlist"));
    opts.allowlist = load_hashtag_list(s.path("allowlist"));
  }
  if (!s.str("denylist").empty()) {
    manifest.input(s.path("denylist"));
    opts.denylist = load_hashtag_list(s.path("denylist"));
  }
  const auto seeds = load_hashtag_list(s.path("seeds"));
  const auto report =
      manifest.stage("expand", [&] { return snowball::expand(posts, seeds, opts); });
  write_jsonl_output(s.path("output"), serialize_hashtag_list(report.final_set), manifest);
  write_file(s.path("report"), snowball::to_json(report).dump(2) + "\n");
  info(std::to_string(seeds.size()) + " seeds expanded to " +
       std::to_string(report.final_set.size()) + " hashtags");
}

const std::vector<KeySpec> kSampleKeys = {
    {"corpus", "work/corpus.jsonl", "canonical corpus"},
    {"pro_hashtags", "data/hashtags/pro.txt", "pro-trans hashtag list"},
    {"anti_hashtags", "data/hashtags/anti.txt", "anti-trans hashtag list"},
    {"context_rules", "", "ambiguous-tag context rules (JSON)"},
    {"per_bucket", 100, "posts drawn per bucket"},
    {"buckets", json::array({"pro-only", "anti-only", "both"}), "buckets to draw from"},
    {"seed", 42, "sampling seed"},
    {"output", "work/sample.jsonl", "sampled posts"},
};

void run_sample(const Settings& s) {
  auto posts = load_posts(s.path("corpus"), "ingest");
  require_input(s.path("pro_hashtags"), "pro hashtag list", "expand-hashtags");
  require_input(s.path("anti_hashtags"), "anti hashtag list", "expand-hashtags");
  config::Manifest manifest("sample", s);
  for (const char* k : {"corpus", "pro_hashtags", "anti_hashtags", "context_rules"}) {
    manifest.input(s.path(k));
  }
  const auto pro = load_hashtag_list(s.path("pro_hashtags"));
  const auto anti = load_hashtag_list(s.path("anti_hashtags"));
  if (!s.str("context_rules").empty()) {
    require_input(s.path("context_rules"), "context rules", "sample");
    const auto rules = snowball::parse_context_rules(json::parse(read_file(s.path("context_rules"))));
    const auto before = posts.size();
    posts = snowball::context_filter(posts, rules);
    info("context rules dropped " + std::to_string(before - posts.size()) + " posts");
  }
  std::vector<HashtagBucket> buckets;
  for (const auto& b : s.list("buckets")) {
    auto parsed = parse_bucket(b);
    if (!parsed) throw ConfigError("unknown bucket '" + b + "'");
    buckets.push_back(*parsed);
  }
  const auto seed = static_cast<std::uint64_t>(s.integer("seed"));
  manifest.seed("sample", seed);
  const auto sample = manifest.stage("sample", [&] {
    return stratified_sample(posts, s.count("per_bucket"), buckets, pro, anti, seed);
  });
  write_jsonl_output(s.path("output"), serialize_corpus(sample), manifest);
  info("sampled " + std::to_string(sample.size()) + " posts");
}

const std::vector<KeySpec> kIndexKeys = {
    {"sample", "work/sample.jsonl", "annotated posts"},
    {"annotations", "work/annotations.jsonl", "annotation records"},
    {"annotator", "a1", "annotator whose labels become examples"},
    {"codebook", "data/codebook.json", "codebook definitions"},
    {"dimension", static_cast<int>(rag::kDefaultDimension), "embedding dimension"},
    {"examples_out", "work/examples_store.json", "example store"},
    {"taxonomy_out", "work/taxonomy_store.json", "taxonomy store"},
};

void run_index(const Settings& s) {
  const auto posts = load_posts(s.path("sample"), "sample");
  require_input(s.path("codebook"), "codebook", "index --codebook <codebook.json>");
  config::Manifest manifest("index", s);
  for (const char* k : {"sample", "annotations", "codebook"}) manifest.input(s.path(k));
  const auto dim = s.count("dimension");
  const auto labels = annotator_labels(s.path("annotations"), s.str("annotator"));
  std::vector<AnnotatedSample> samples;
  for (const auto& [id, a] : labels) samples.push_back(a);
  const auto examples =
      manifest.stage("examples", [&] { return rag::index_examples(samples, posts, dim); });
  const auto taxonomy = manifest.stage("taxonomy", [&] {
    return rag::index_taxonomy(rag::load_codebook(s.path("codebook")), dim);
  });
  rag::save_store(s.path("examples_out"), examples.store);
  manifest.write_beside(s.path("examples_out"));
  rag::save_store(s.path("taxonomy_out"), taxonomy);
  manifest.write_beside(s.path("taxonomy_out"));
  info("indexed " + std::to_string(examples.store.size()) + " examples (" +
       std::to_string(examples.skipped_neutral.size()) + " neutral skipped) and " +
       std::to_string(taxonomy.size()) + " definitions");
}

const std::vector<KeySpec> kClassifyKeys = {
    {"input", "work/sample.jsonl", "posts to classify"},
    {"strategy", "zero-shot", "zero-shot | rag-examples | rag-full"},
    {"backend", "mock", "mock | http"},
    {"templates", "data/templates", "prompt template directory"},
    {"examples_store", "work/examples_store.json", "example store"},
    {"taxonomy_store", "work/taxonomy_store.json", "taxonomy store"},
    {"best_prompt", "work/best_prompt.json", "best prompt selection"},
    {"prompt", "", "template id overriding the best prompt"},
    {"annotations", "", "ground truth for best prompt selection (zero-shot)"},
    {"annotator", "a1", "annotator providing ground truth"},
    {"k", static_cast<int>(rag::kDefaultTopK), "retrieved entries per query"},
    {"threshold", rag::kDefaultThreshold, "minimum cosine similarity"},
    {"leave_one_out", true, "never retrieve a post's own entry"},
    {"temperature", 0.0, "sampling temperature"},
    {"retry_temperature", 0.2, "temperature on retries"},
    {"retries", 2, "retries after an unparseable answer"},
    {"max_tokens", 16, "completion length limit"},
    {"parallelism", 1, "concurrent requests"},
    {"endpoint", "http://127.0.0.1:8080", "http backend base URL"},
    {"path", "/v1/chat/completions", "http backend route"},
    {"model", "llama3", "http backend model name"},
    {"timeout_s", 60.0, "http backend timeout"},
    {"api_key", "", "http backend bearer token"},
    {"output", "", "records (default work/predictions_<strategy>.jsonl)"},
};

std::unique_ptr<llm::Backend> make_backend(const Settings& s) {
  const auto kind = s.str("backend");
  if (kind == "mock") return std::make_unique<llm::MockBackend>();
  if (kind == "http") {
    llm::HttpConfig cfg;
    cfg.endpoint = s.str("endpoint");
    cfg.path = s.str("path");
    cfg.model = s.str("model");
    cfg.timeout_s = s.number("timeout_s");
    cfg.api_key = s.str("api_key");
    return std::make_unique<llm::HttpBackend>(cfg);
  }
  throw ConfigError("unknown backend '" + kind + "' (expected mock or http)");
}

void write_best_prompt(const fs::path& path, const std::vector<classify::ClassificationRecord>& records,
                       const std::map<std::string, Stance>& truth) {
  std::vector<classify::ClassificationRecord> judged;
  for (const auto& r : records) {
    if (truth.count(r.post_id)) judged.push_back(r);
  }
  if (judged.empty()) throw DataError("no classified post has ground truth; cannot pick a best prompt");
  const auto best = classify::select_best_prompt(judged, truth);
  json acc = json::object();
  std::map<std::string, std::int64_t> correct;
  for (const auto& r : judged) {
    for (const auto& [id, v] : r.votes) correct[id] += (v && *v == truth.at(r.post_id)) ? 1 : 0;
  }
  for (const auto& [id, c] : correct) {
    acc[id] = static_cast<double>(c) / static_cast<double>(judged.size());
  }
  write_file(path, json{{"best_prompt", best}, {"n", judged.size()}, {"per_prompt_accuracy", acc}}.dump(2) + "\n");
  info("best prompt " + best + " written to " + path.string());
}

void run_classify(const Settings& s) {
  const auto strategy_name = s.str("strategy");
  const auto strategy = classify::parse_strategy(strategy_name);
  if (!strategy) {
    throw ConfigError("unknown strategy '" + strategy_name +
                      "' (expected zero-shot, rag-examples or rag-full)");
  }
  const auto posts = load_posts(s.path("input"), "sample");
  config::Manifest manifest("classify", s);
  manifest.input(s.path("input"));
  const auto backend = make_backend(s);

  classify::Options opts;
  opts.temperature = s.number("temperature");
  opts.retry_temperature = s.number("retry_temperature");
  opts.retries = s.count("retries");
  opts.max_tokens = static_cast<int>(s.integer("max_tokens"));
  opts.k = s.count("k");
  opts.threshold = s.number("threshold");
  opts.leave_one_out = s.flag("leave_one_out");
  opts.manifest = manifest.config_hash().substr(0, 16);

  const auto templates = prompt::load_templates(s.path("templates"));
  for (const auto& t : templates) manifest.input(s.path("templates") / (t.id() + ".txt"));
  fs::path output = s.path("output");
  if (output.empty()) output = fs::path("work") / ("predictions_" + strategy_name + ".jsonl");
  const std::size_t parallelism = std::max<std::size_t>(1, s.count("parallelism"));

  std::vector<classify::ClassificationRecord> records;
  if (*strategy == classify::Strategy::ZeroShotEnsemble) {
    records = manifest.stage("classify", [&] {
      return classify::classify_all(
          posts, [&](const Post& p) { return classify::classify_zero_shot(*backend, p, templates, opts); },
          parallelism);
    });
    if (!s.str("annotations").empty()) {
      manifest.input(s.path("annotations"));
      std::map<std::string, Stance> truth;
      for (const auto& [id, a] : annotator_labels(s.path("annotations"), s.str("annotator"))) {
        truth[id] = a.label.primary;
      }
      write_best_prompt(s.path("best_prompt"), records, truth);
    }
  } else {
    std::string prompt_id = s.str("prompt");
    if (prompt_id.empty()) {
      require_input(s.path("best_prompt"), "best prompt selection",
                    "classify --strategy zero-shot --annotations <labels.jsonl>");
      manifest.input(s.path("best_prompt"));
      prompt_id = json::parse(read_file(s.path("best_prompt"))).at("best_prompt").get<std::string>();
    }
    const auto tmpl = std::find_if(templates.begin(), templates.end(),
                                   [&](const auto& t) { return t.id() == prompt_id; });
    if (tmpl == templates.end()) throw ConfigError("no template with id '" + prompt_id + "'");

    require_input(s.path("examples_store"), "example store", "index");
    manifest.input(s.path("examples_store"));
    rag::Store store = rag::load_store(s.path("examples_store"));
    if (*strategy == classify::Strategy::RagExamplesTaxonomy) {
      require_input(s.path("taxonomy_store"), "taxonomy store", "index");
      manifest.input(s.path("taxonomy_store"));
      store = rag::combine(store, rag::load_store(s.path("taxonomy_store")));
    }
    if (store.empty()) {
      warn("retrieval stores are empty; proceeding as single-prompt zero-shot with '" + prompt_id + "'");
    }
    records = manifest.stage("classify", [&] {
      return classify::classify_all(
          posts,
          [&](const Post& p) { return classify::classify_rag(*backend, p, *tmpl, store, *strategy, opts); },
          parallelism);
    });
  }
  std::size_t unclassified = 0;
  for (const auto& r : records) unclassified += r.classified() ? 0 : 1;
  if (unclassified) warn(std::to_string(unclassified) + " posts left unclassified");
  write_jsonl_output(output, classify::serialize_records(records), manifest);
}

const std::vector<KeySpec> kEvaluateKeys = {
    {"predictions",
     json::array({"work/predictions_zero-shot.jsonl", "work/predictions_rag-examples.jsonl",
                  "work/predictions_rag-full.jsonl"}),
     "classification record files"},
    {"annotations", "work/annotations.jsonl", "annotation records"},
    {"annotator", "a1", "annotator providing ground truth"},
    {"validator", "a2", "second annotator for agreement (empty to skip)"},
    {"output_dir", "work/eval", "report directory"},
};

std::string model_name(classify::Strategy s) {
  switch (s) {
    case classify::Strategy::ZeroShotEnsemble: return "Zero-shot ensemble";
    case classify::Strategy::RagExamples: return "RAG examples";
    case classify::Strategy::RagExamplesTaxonomy: return "RAG examples+taxonomy";
  }
  return "model";
}

void run_evaluate(const Settings& s) {
  config::Manifest manifest("evaluate", s);
  const auto labels = annotator_labels(s.path("annotations"), s.str("annotator"));
  manifest.input(s.path("annotations"));
  std::map<std::string, StanceLabel> truth;
  std::map<std::string, Stance> primary;
  std::array<std::int64_t, 3> support{};
  for (const auto& [id, a] : labels) {
    truth[id] = a.label;
    primary[id] = a.label.primary;
    ++support[index_of(a.label.primary)];
  }

  std::vector<eval::ModelRow> rows;
  json models = json::array();
  for (const auto& file : s.list("predictions")) {
    require_input(file, "classification records", "classify");
    manifest.input(file);
    const auto records = classify::parse_records(read_file(file));
    if (records.empty()) throw DataError("'" + file + "' holds no classification records");
    std::map<std::string, std::optional<Stance>> preds;
    std::size_t ignored = 0;
    for (const auto& r : records) {
      if (truth.count(r.post_id)) preds[r.post_id] = r.verdict;
      else ++ignored;
    }
    if (ignored) warn(file + ": " + std::to_string(ignored) + " records without ground truth ignored");
    const auto cm = eval::confusion(preds, primary);
    eval::ModelRow row{model_name(records.front().strategy), eval::metrics(cm.matrix),
                       eval::recall_by_sublabel(preds, truth)};
    models.push_back({{"model", row.model},
                      {"strategy", classify::to_string(records.front().strategy)},
                      {"source", fs::path(file).filename().string()},
                      {"confusion", eval::to_json(cm.matrix)},
                      {"unclassified", cm.unclassified},
                      {"missing_predictions", cm.missing_predictions},
                      {"metrics", eval::to_json(row.metrics)},
                      {"recall_by_sublabel", eval::to_json(row.sublabels)}});
    rows.push_back(std::move(row));
  }

  json report{{"ground_truth", {{"annotator", s.str("annotator")}, {"n", truth.size()}}},
              {"models", models}};
  if (!s.str("validator").empty()) {
    const auto second = annotator_labels(s.path("annotations"), s.str("validator"));
    std::map<std::string, Stance> a;
    std::map<std::string, Stance> b;
    for (const auto& [id, v] : second) {
      if (!labels.count(id)) continue;
      a[id] = labels.at(id).label.primary;
      b[id] = v.label.primary;
    }
    report["agreement"] = eval::to_json(eval::cohen_kappa(a, b));
  }
  std::map<std::string, std::optional<Stance>> everyone;
  for (const auto& [id, l] : truth) everyone[id] = l.primary;
  const auto proportions = eval::recall_by_sublabel(everyone, truth);

  const fs::path dir = s.path("output_dir");
  write_file(dir / "metrics.json", report.dump(2) + "\n");
  manifest.write_beside(dir / "metrics.json");
  write_file(dir / "table.txt", eval::render_tables(rows, support, proportions));
  info("wrote " + (dir / "metrics.json").string() + " and " + (dir / "table.txt").string());
}

const std::vector<KeySpec> kNetworkKeys = {
    {"corpus", "work/corpus.jsonl", "canonical corpus"},
    {"predictions", "work/predictions_rag-full.jsonl", "classification records"},
    {"grouping", "all", "tag-reply | duet-stitch | all | tag | reply | stitch | duet"},
    {"exclude_neutral", false, "drop neutral users from the exported graph"},
    {"component", "largest", "largest | all"},
    {"formats", json::array({"graphml", "dot"}), "export formats"},
    {"output_dir", "work/network", "output directory"},
};

void run_network(const Settings& s) {
  const auto posts = load_posts(s.path("corpus"), "ingest");
  require_input(s.path("predictions"), "classification records", "classify --input <corpus.jsonl>");
  config::Manifest manifest("network", s);
  manifest.input(s.path("corpus"));
  manifest.input(s.path("predictions"));
  const auto grouping = net::parse_grouping(s.str("grouping"));
  if (!grouping) throw ConfigError("unknown grouping '" + s.str("grouping") + "'");
  const auto component = s.str("component");
  if (component != "largest" && component != "all") {
    throw ConfigError("component must be 'largest' or 'all'");
  }

  std::map<std::string, Stance> verdicts;
  for (const auto& r : classify::parse_records(read_file(s.path("predictions")))) {
    if (r.verdict) verdicts[r.post_id] = *r.verdict;
  }
  const auto users = net::aggregate_stances(posts, verdicts);
  const auto stances = net::stance_map(users);
  const auto full = net::build_graph(posts, *grouping);
  auto graph = component == "largest" ? net::largest_component(full) : full;

  json metrics = net::metrics_json(graph, stances);
  metrics["component"] = component;
  metrics["full_graph"] = {{"nodes", full.nodes.size()}, {"edges", full.edges.size()}};
  metrics["exclude_neutral"] = s.flag("exclude_neutral");
  metrics["r"] = s.flag("exclude_neutral") ? metrics["r_without_neutral"] : metrics["r_with_neutral"];

  if (s.flag("exclude_neutral")) {
    std::set<std::string> keep;
    for (const auto& n : graph.nodes) {
      if (net::class_of(stances, n) != net::NodeClass::Neutral) keep.insert(n);
    }
    graph = net::induced(graph, keep);
  }

  const fs::path dir = s.path("output_dir");
  const std::string stem = "network_" + net::to_string(*grouping);
  for (const auto& f : s.list("formats")) {
    net::Format fmt;
    std::string ext;
    if (f == "graphml") {
      fmt = net::Format::GraphML;
      ext = ".graphml";
    } else if (f == "dot") {
      fmt = net::Format::Dot;
      ext = ".dot";
    } else {
      throw ConfigError("unknown export format '" + f + "' (expected graphml or dot)");
    }
    net::export_graph(dir / (stem + ext), graph, stances, fmt);
    info("wrote " + (dir / (stem + ext)).string());
  }
  write_file(dir / (stem + ".metrics.json"), metrics.dump(2) + "\n");
  manifest.write_beside(dir / (stem + ".metrics.json"));
  const auto show = [](const json& v) { return v.is_null() ? std::string("undefined") : fixed(v.get<double>(), 3); };
  info(net::to_string(*grouping) + ": " + std::to_string(graph.nodes.size()) + " nodes, r=" +
       show(metrics["r_with_neutral"]) + " (without neutral " + show(metrics["r_without_neutral"]) + ")");
}

const std::vector<KeySpec> kServeKeys = {
    {"sample", "work/sample.jsonl", "posts to annotate"},
    {"codebook", "data/codebook.json", "codebook shown to annotators"},
    {"codebook_version", "1", "codebook version tag"},
    {"log", "work/annotation_log.jsonl", "append-only event log"},
    {"primary", "a1", "annotator labeling every sample"},
    {"validator", "a2", "annotator labeling the overlap"},
    {"overlap", 50, "overlap size"},
    {"seed", 7, "task order and overlap seed"},
    {"host", "127.0.0.1", "listen address"},
    {"port", 8088, "listen port"},
    {"ui_dir", "", "static UI bundle directory"},
    {"export", "", "write the example export here and exit instead of serving"},
};

void run_serve(const Settings& s) {
  auto posts = load_posts(s.path("sample"), "sample");
  require_input(s.path("codebook"), "codebook", "serve --codebook <codebook.json>");
  annotate::SessionConfig cfg;
  cfg.primary = s.str("primary");
  cfg.validator = s.str("validator");
  cfg.overlap = s.count("overlap");
  cfg.seed = static_cast<std::uint64_t>(s.integer("seed"));
  cfg.codebook_version = s.str("codebook_version");
  auto session = std::make_shared<annotate::AnnotationSession>(cfg, std::move(posts), s.path("log"));
  if (!s.str("export").empty()) {
    write_file(s.path("export"), serialize_annotations(session->export_examples()));
    info("exported " + std::to_string(session->export_examples().size()) + " examples to " +
         s.str("export"));
    return;
  }
  httplib::Server server;
  annotate::mount_api(server, session, rag::load_codebook(s.path("codebook")), s.path("ui_dir"));
  const auto port = static_cast<int>(s.integer("port"));
  info("serving annotation session on http://" + s.str("host") + ":" + std::to_string(port));
  if (!server.listen(s.str("host"), port)) {
    throw IoError("cannot listen on " + s.str("host") + ":" + std::to_string(port));
  }
}

struct Command {
  std::string name;
  std::string section;
  std::string help;
  const std::vector<KeySpec>* keys;
  void (*run)(const Settings&);
  CLI::App* app = nullptr;
  std::map<std::string, std::string> values{};
  std::map<std::string, bool> switches{};
  std::map<std::string, CLI::Option*> options{};
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stance classification and interaction network pipeline"};
  app.require_subcommand(1);
  std::string config_path;
  bool dry_run = false;
  app.add_option("-c,--config", config_path, "JSON config file");
  app.add_flag("--dry-run", dry_run, "print the resolved configuration and exit");
  app.add_flag("-q,--quiet", g_quiet, "only warnings and errors on stderr");

  std::vector<Command> commands = {
      {"ingest", "ingest", "parse and validate raw posts", &kIngestKeys, run_ingest},
      {"expand-hashtags", "expand", "snowball hashtag expansion", &kExpandKeys, run_expand},
      {"sample", "sample", "stratified sample by hashtag bucket", &kSampleKeys, run_sample},
      {"index", "index", "build example and taxonomy stores", &kIndexKeys, run_index},
      {"classify", "classify", "stance classification", &kClassifyKeys, run_classify},
      {"evaluate", "evaluate", "metrics, sublabel recall and agreement", &kEvaluateKeys, run_evaluate},
      {"network", "network", "interaction networks and assortativity", &kNetworkKeys, run_network},
      {"serve", "serve", "annotation HTTP service", &kServeKeys, run_serve},
  };
  for (auto& cmd : commands) {
    cmd.app = app.add_subcommand(cmd.name, cmd.help);
    cmd.app->fallthrough();
    for (const auto& spec : *cmd.keys) {
      const std::string flag = "--" + Settings::flag_name(spec.key);
      if (spec.fallback.is_boolean()) {
        cmd.options[spec.key] =
            cmd.app->add_flag(flag + ",!--no-" + Settings::flag_name(spec.key), cmd.switches[spec.key], spec.help);
      } else {
        cmd.options[spec.key] = cmd.app->add_option(flag, cmd.values[spec.key], spec.help);
      }
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    const json file = config::load_file(config_path);
    for (auto& cmd : commands) {
      if (!cmd.app->parsed()) continue;
      std::map<std::string, std::string> flags;
      for (const auto& [key, opt] : cmd.options) {
        if (opt->count() == 0) continue;
        flags[key] = cmd.switches.count(key) ? (cmd.switches[key] ? "true" : "false") : cmd.values[key];
      }
      const Settings settings(cmd.section, *cmd.keys, file, flags);
      if (dry_run) {
        std::cout << settings.describe();
        return 0;
      }
      for (const auto& spec : *cmd.keys) {
        if (spec.fallback.is_null() && settings.raw(spec.key).is_null()) {
          throw ConfigError("missing required setting --" + Settings::flag_name(spec.key) +
                            " for `" + cmd.name + "`");
        }
      }
      cmd.run(settings);
    }
  } catch (const ConfigError& e) {
    log("error", e.what());
    return 1;
  } catch (const BackendError& e) {
    log("error", e.what());
    return 3;
  } catch (const json::exception& e) {
    log("error", std::string("malformed JSON input: ") + e.what());
    return 2;
  } catch (const Error& e) {
    log("error", e.what());
    return 2;
  } catch (const std::exception& e) {
    log("error", e.what());
    return 2;
  }
  return 0;
}
