#include <gtest/gtest.h>

#include <mutex>
#include <random>

#include "helpers.hpp"
#include "stancenet/classify.hpp"

using namespace stancenet;
using namespace stancenet::classify;

namespace {

std::map<std::string, Vote> votes_of(const std::vector<Vote>& v) {
  std::map<std::string, Vote> out;
  for (std::size_t i = 0; i < v.size(); ++i) out["zs0" + std::to_string(i + 1)] = v[i];
  return out;
}

constexpr auto A = Stance::AntiTrans;
constexpr auto P = Stance::ProTrans;
constexpr auto N = Stance::Neutral;

/// Records every prompt it sees and answers with a fixed script.
class RecordingBackend final : public llm::Backend {
 public:
  explicit RecordingBackend(std::vector<std::string> script) : script_(std::move(script)) {}
  llm::LlmResponse complete(const llm::LlmRequest& r) const override {
    std::lock_guard<std::mutex> lock(mu_);
    prompts.push_back(r.prompt);
    temperatures.push_back(r.temperature);
    const auto& text = script_[std::min(calls_++, script_.size() - 1)];
    return {text, "rec", 0};
  }
  std::string name() const override { return "rec"; }
  mutable std::vector<std::string> prompts;
  mutable std::vector<double> temperatures;

 private:
  std::vector<std::string> script_;
  mutable std::size_t calls_ = 0;
  mutable std::mutex mu_;
};

std::vector<prompt::PromptTemplate> shipped() {
  return prompt::load_templates(testing_support::source_dir() / "data/templates");
}

}  // namespace

TEST(Ensemble, Examples) {
  EXPECT_EQ(ensemble(votes_of({A, A, A, A, A, N, N, P})).verdict, A);
  const auto tie = ensemble(votes_of({P, P, P, P, N, N, N, N}));
  EXPECT_EQ(tie.verdict, P);
  EXPECT_TRUE(tie.tie);
  EXPECT_EQ(ensemble(votes_of({A, P, A, P, N, N, N, std::nullopt})).verdict, N);
  EXPECT_EQ(ensemble(votes_of({A, P, std::nullopt, std::nullopt, std::nullopt})).verdict, A);
  EXPECT_FALSE(ensemble(votes_of(std::vector<Vote>(8, std::nullopt))).verdict);
}

TEST(Ensemble, PermutationInvariant) {
  std::mt19937 gen(31);
  const std::vector<Vote> choices = {A, P, N, std::nullopt};
  for (int iter = 0; iter < 500; ++iter) {
    std::vector<Vote> v(8);
    for (auto& x : v) x = choices[gen() % choices.size()];
    const auto base = ensemble(votes_of(v));
    for (int s = 0; s < 20; ++s) {
      std::shuffle(v.begin(), v.end(), gen);
      const auto again = ensemble(votes_of(v));
      EXPECT_EQ(again.verdict, base.verdict);
      EXPECT_EQ(again.tie, base.tie);
    }
  }
}

TEST(ZeroShot, EightVotesAndRetries) {
  const auto templates = shipped();
  RecordingBackend backend({"Hmm", "Label: Anti-Trans"});
  const Post p = testing_support::post("p1", "u", "desc", {}, "talk");
  const auto rec = classify_zero_shot(backend, p, templates);
  EXPECT_EQ(rec.votes.size(), 8u);
  EXPECT_EQ(rec.verdict, A);
  EXPECT_EQ(rec.responses.at("zs01"), (std::vector<std::string>{"Hmm", "Label: Anti-Trans"}));
  EXPECT_EQ(backend.temperatures[0], 0.0);
  EXPECT_EQ(backend.temperatures[1], 0.2);
  EXPECT_EQ(backend.prompts.size(), 9u);
  for (const auto& pr : backend.prompts) EXPECT_NE(pr.find("<post>\ntalk\n---\ndesc\n</post>"), std::string::npos);

  RecordingBackend silent({"???"});
  const auto none = classify_zero_shot(silent, p, templates);
  EXPECT_FALSE(none.classified());
  EXPECT_EQ(silent.prompts.size(), 8u * 3u);
  EXPECT_FALSE(none.error.empty());

  EXPECT_THROW(classify_zero_shot(backend, p, {templates[0]}), ConfigError);
}

TEST(ZeroShot, MockIsDeterministic) {
  const auto templates = shipped();
  const llm::MockBackend mock;
  std::vector<Post> posts;
  for (int i = 0; i < 40; ++i) {
    posts.push_back(testing_support::post("p" + std::to_string(i), "u",
                                          i % 3 ? "biology agenda" : "transjoy weather", {}, i % 2 ? "allyship" : ""));
  }
  const auto run = [&](std::size_t par) {
    return serialize_records(classify_all(posts, [&](const Post& p) { return classify_zero_shot(mock, p, templates); }, par));
  };
  const auto a = run(1);
  EXPECT_EQ(a, run(1));
  EXPECT_EQ(a, run(4));
}

TEST(SelectBestPrompt, Examples) {
  std::vector<ClassificationRecord> recs;
  std::map<std::string, Stance> truth;
  for (int i = 0; i < 10; ++i) {
    ClassificationRecord r;
    r.post_id = "p" + std::to_string(i);
    const Stance t = i % 2 ? A : P;
    truth[r.post_id] = t;
    r.votes["zs03"] = t;
    r.votes["zs01"] = N;
    r.votes["zs02"] = std::nullopt;
    recs.push_back(r);
  }
  EXPECT_EQ(select_best_prompt(recs, truth), "zs03");
  for (auto& r : recs) r.votes["zs01"] = r.votes["zs03"];
  EXPECT_EQ(select_best_prompt(recs, truth), "zs01");
  EXPECT_THROW(select_best_prompt({}, truth), DataError);
  EXPECT_THROW(select_best_prompt(recs, {}), DataError);
}

TEST(Rag, EmptyStoreEqualsSinglePromptZeroShot) {
  const auto templates = shipped();
  const llm::MockBackend mock;
  const rag::Store empty;
  for (const auto& tmpl : templates) {
    for (const std::string text : {"biology agenda", "affirming", "pasta [[unparseable]]", ""}) {
      const Post p = testing_support::post("q", "u", text, {}, "spoken words");
      RecordingBackend a({"Neutral"});
      RecordingBackend b({"Neutral"});
      classify_rag(a, p, tmpl, empty, Strategy::RagExamples);
      query(b, prompt::render_prompt(tmpl, classification_text(p)), {});
      EXPECT_EQ(a.prompts, b.prompts);
      const auto rec = classify_rag(mock, p, tmpl, empty, Strategy::RagExamplesTaxonomy);
      EXPECT_TRUE(rec.retrieved.empty());
      EXPECT_EQ(rec.verdict, query(mock, prompt::render_prompt(tmpl, classification_text(p)), {}).vote);
    }
  }
}

TEST(Rag, SelfRetrievalAndLeaveOneOut) {
  const auto templates = shipped();
  std::vector<Post> posts = {testing_support::post("a1", "u", "clownworld lunacy wokeness"),
                             testing_support::post("p1", "u", "sparkle bestie glowup"),
                             testing_support::post("p2", "u", "queerjoy hugs valid")};
  const auto idx = rag::index_examples({{"a1", "x", {A, {}}, 0}, {"p1", "x", {P, {}}, 0}, {"p2", "x", {P, {}}, 0}}, posts);
  const llm::MockBackend mock;
  const auto rec = classify_rag(mock, posts[0], templates[0], idx.store, Strategy::RagExamples);
  ASSERT_FALSE(rec.retrieved.empty());
  EXPECT_EQ(rec.retrieved[0].id, "a1");
  EXPECT_NEAR(rec.retrieved[0].score, 1.0, 1e-9);
  EXPECT_EQ(rec.votes.size(), 1u);
  Options loo;
  loo.leave_one_out = true;
  for (const auto& e : classify_rag(mock, posts[0], templates[0], idx.store, Strategy::RagExamples, loo).retrieved) {
    EXPECT_NE(e.id, "a1");
  }
  EXPECT_THROW(classify_rag(mock, posts[0], templates[0], idx.store, Strategy::ZeroShotEnsemble), ConfigError);
}

TEST(Rag, DefinitionsRenderWithSideTag) {
  const rag::Store tax = rag::index_taxonomy(rag::parse_codebook(
      R"([{"id":"d1","side":"anti","sublabel":"TM","definition":"mocking trans women"},
          {"id":"n1","side":"neutral","sublabel":null,"definition":"unrelated content"}])"));
  EXPECT_EQ(format_definition(tax.entries()[0]), "[Anti-Trans: TM] mocking trans women");
  EXPECT_EQ(format_definition(tax.entries()[1]), "[Neutral] unrelated content");
  Options o;
  o.threshold = 0.0;
  o.k = 5;
  RecordingBackend rec({"Anti-Trans"});
  classify_rag(rec, testing_support::post("x", "u", "mocking"), prompt::PromptTemplate("t", "{content}\n"), tax,
               Strategy::RagExamplesTaxonomy, o);
  EXPECT_NE(rec.prompts[0].find("- [Anti-Trans: TM] mocking trans women\n"), std::string::npos);
}

TEST(Records, JsonRoundTrip) {
  ClassificationRecord r;
  r.post_id = "p1";
  r.strategy = Strategy::RagExamplesTaxonomy;
  r.verdict = P;
  r.votes = {{"zs02", P}};
  r.retrieved = {{"e1", 0.5}, {"d2", 0.25}};
  r.responses = {{"zs02", {"x", "Pro-Trans"}}};
  r.manifest = "abc";
  const auto back = parse_records(serialize_records({r, ClassificationRecord{}}));
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(serialize_records(back), serialize_records({r, ClassificationRecord{}}));
  EXPECT_EQ(back[0].retrieved[1].id, "d2");
  EXPECT_THROW(parse_records("{\n"), ParseError);
  EXPECT_EQ(parse_strategy("rag-full"), Strategy::RagExamplesTaxonomy);
}
