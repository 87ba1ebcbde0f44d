#include <gtest/gtest.h>

#include "helpers.hpp"
#include "http_server.hpp"
#include "stancenet/classify.hpp"
#include "stancenet/llm.hpp"
#include "stancenet/prompt.hpp"

using namespace stancenet;
using namespace stancenet::prompt;

namespace {

const PromptTemplate kSlotted("t1", "{definitions}\n{examples}\n{content}\n\nAnswer: one label.\n");
const PromptTemplate kPlain("t2", "{content}\nLabel it.\n");

}  // namespace

TEST(RenderPrompt, NoAugmentationIsContentAndInstructions) {
  EXPECT_EQ(render_prompt(kSlotted, "hello world"), "<post>\nhello world\n</post>\n\nAnswer: one label.\n");
  EXPECT_EQ(render_prompt(kPlain, "x"), "<post>\nx\n</post>\nLabel it.\n");
}

TEST(RenderPrompt, ThreeExamplesPrecedeContent) {
  const std::string want =
      "Labeled examples:\n"
      "<example label=\"Neutral\">\na\n</example>\n"
      "<example label=\"Anti-Trans\">\nb\n</example>\n"
      "<example label=\"Pro-Trans\">\nc\n</example>\n"
      "\n"
      "<post>\nX\n</post>\nLabel it.\n";
  EXPECT_EQ(render_prompt(kPlain, "X", {{"a", Stance::Neutral}, {"b", Stance::AntiTrans}, {"c", Stance::ProTrans}}),
            want);
}

TEST(RenderPrompt, DefinitionsThenExamplesThenContent) {
  const std::string want =
      "Codebook definitions:\n- d one wrapped\n- d two\n\n\n"
      "Labeled examples:\n"
      "<example label=\"Anti-Trans\">\nex one\n</example>\n"
      "<example label=\"Pro-Trans\">\nex two\n</example>\n\n\n"
      "<post>\nc\n</post>\n\nAnswer: one label.\n";
  EXPECT_EQ(render_prompt(kSlotted, "c", {{"ex one", Stance::AntiTrans}, {"  ex two\n", Stance::ProTrans}},
                          {"d  one\nwrapped", "d two"}),
            want);
  const std::string plain =
      "Codebook definitions:\n- d\n\n"
      "Labeled examples:\n<example label=\"Pro-Trans\">\ne\n</example>\n\n"
      "<post>\nc\n</post>\nLabel it.\n";
  EXPECT_EQ(render_prompt(kPlain, "c", {{"e", Stance::ProTrans}}, {"d"}), plain);
}

TEST(RenderPrompt, SplitRecoversParts) {
  const auto text = render_prompt(kSlotted, "line1\n---\nline2", {{"ex\nmulti", Stance::AntiTrans}}, {"[Pro-Trans: CEL] joy"});
  const auto parts = split_prompt(text);
  ASSERT_TRUE(parts.post);
  EXPECT_EQ(*parts.post, "line1\n---\nline2");
  ASSERT_EQ(parts.examples.size(), 1u);
  EXPECT_EQ(parts.examples[0].text, "ex\nmulti");
  EXPECT_EQ(parts.examples[0].label, Stance::AntiTrans);
  EXPECT_EQ(parts.definitions, (std::vector<std::string>{"[Pro-Trans: CEL] joy"}));
  EXPECT_EQ(split_prompt(render_prompt(kSlotted, "z")).instructions, split_prompt(text).instructions);
}

TEST(Templates, PlaceholderRules) {
  EXPECT_THROW(PromptTemplate("a", "no slot"), ConfigError);
  EXPECT_THROW(PromptTemplate("a", "{content}{content}"), ConfigError);
  EXPECT_THROW(PromptTemplate("a", "{content}{examples}"), ConfigError);
  EXPECT_THROW(PromptTemplate("a", "{examples}{definitions}{content}"), ConfigError);
  EXPECT_THROW(PromptTemplate("a", "{examples}{examples}{content}"), ConfigError);
  EXPECT_THROW(PromptTemplate("", "{content}"), ConfigError);
  EXPECT_NO_THROW(PromptTemplate("a", "{definitions}{examples}{content}"));
}

TEST(Templates, ShippedSetLoads) {
  const auto t = load_templates(testing_support::source_dir() / "data/templates");
  ASSERT_EQ(t.size(), 8u);
  EXPECT_EQ(t.front().id(), "zs01");
  EXPECT_EQ(t.back().id(), "zs08");
  std::set<std::string> bodies;
  for (const auto& x : t) bodies.insert(x.text());
  EXPECT_EQ(bodies.size(), 8u);
  EXPECT_THROW(load_templates("/nonexistent"), ConfigError);
}

TEST(ParseLabel, Examples) {
  EXPECT_EQ(classify::parse_label("Label: Pro-Trans"), Stance::ProTrans);
  EXPECT_EQ(classify::parse_label("this is both anti-trans and pro-trans"), std::nullopt);
  EXPECT_EQ(classify::parse_label("NEUTRAL."), Stance::Neutral);
  EXPECT_EQ(classify::parse_label("anti"), Stance::AntiTrans);
  EXPECT_EQ(classify::parse_label("I'd say pro, overall"), Stance::ProTrans);
  EXPECT_EQ(classify::parse_label("antibiotics and protein"), std::nullopt);
  EXPECT_EQ(classify::parse_label("Anti-Trans (not neutral)"), std::nullopt);
  EXPECT_EQ(classify::parse_label("Anti-Trans. Definitely anti-trans"), Stance::AntiTrans);
  EXPECT_EQ(classify::parse_label(""), std::nullopt);
  EXPECT_EQ(classify::parse_label("Hmm, hard to tell."), std::nullopt);
}

TEST(MockBackend, EvidenceRules) {
  const llm::MockBackend mock;
  const PromptTemplate t("t", "{content}\nx\n");
  const auto ask = [&](const std::string& content, const std::vector<LabeledText>& ex = {},
                       const std::vector<std::string>& defs = {}) {
    return classify::parse_label(mock.answer(render_prompt(t, content, ex, defs), 0.0));
  };
  EXPECT_EQ(ask("delusional groomers biology"), Stance::AntiTrans);
  EXPECT_EQ(ask("affirming allyship transjoy"), Stance::ProTrans);
  EXPECT_EQ(ask("pasta recipe tonight"), Stance::Neutral);
  EXPECT_EQ(ask("pasta", {{"a", Stance::ProTrans}, {"b", Stance::ProTrans}}), Stance::ProTrans);
  EXPECT_EQ(ask("pasta", {{"a", Stance::ProTrans}, {"b", Stance::ProTrans}}, {"[Neutral] x", "[Neutral] y"}),
            Stance::Neutral);
  EXPECT_EQ(ask("agenda biology allyship affirming"), Stance::AntiTrans);
  EXPECT_EQ(mock.answer("no post markup, mentions biology and detrans", 0.0), "Label: Anti-Trans");
}

TEST(MockBackend, HooksAndDeterminism) {
  const llm::MockBackend mock;
  const std::string p = render_prompt(kPlain, "biology agenda [[unparseable]]");
  EXPECT_FALSE(classify::parse_label(mock.answer(p, 0.0)));
  EXPECT_TRUE(classify::parse_label(mock.answer(p, 0.2)));
  const std::string g = render_prompt(kPlain, "biology agenda [[garbage]]");
  EXPECT_FALSE(classify::parse_label(mock.answer(g, 0.2)));
  EXPECT_EQ(mock.complete({p, 0.2, 16}).text, mock.complete({p, 0.2, 16}).text);
  EXPECT_THROW(mock.handle(json::object()), BackendError);
}

TEST(HttpBackend, TalksToServedMock) {
  testing_support::LocalServer srv;
  llm::mount_mock(srv.server(), std::make_shared<llm::MockBackend>());
  json seen;
  srv.server().Post("/echo", [&](const httplib::Request& req, httplib::Response& res) {
    seen = json::parse(req.body);
    seen["auth"] = req.get_header_value("Authorization");
    res.set_content(json{{"choices", {{{"message", {{"content", "Neutral"}}}}}}}.dump(), "application/json");
  });
  srv.server().Post("/fail", [](const httplib::Request&, httplib::Response& res) { res.status = 500; });
  srv.server().Post("/junk", [](const httplib::Request&, httplib::Response& res) { res.set_content("{}", "application/json"); });
  srv.start();

  const llm::MockBackend local;
  llm::HttpBackend http({srv.url(), "/v1/chat/completions", "mock", 5, ""});
  for (const std::string content : {"biology agenda", "transjoy affirming", "weather", "agenda [[unparseable]]"}) {
    const std::string p = render_prompt(kPlain, content);
    for (double temp : {0.0, 0.2}) EXPECT_EQ(http.complete({p, temp, 16}).text, local.complete({p, temp, 16}).text);
  }

  llm::HttpBackend echo({srv.url(), "/echo", "llama3", 5, "secret"});
  EXPECT_EQ(echo.complete({"hi", 0.0, 7}).text, "Neutral");
  EXPECT_EQ(seen["model"], "llama3");
  EXPECT_EQ(seen["max_tokens"], 7);
  EXPECT_EQ(seen["temperature"], 0.0);
  EXPECT_EQ(seen["messages"][0]["role"], "user");
  EXPECT_EQ(seen["messages"][0]["content"], "hi");
  EXPECT_EQ(seen["auth"], "Bearer secret");

  EXPECT_THROW(llm::HttpBackend({srv.url(), "/fail", "m", 5, ""}).complete({"x", 0, 1}), BackendError);
  EXPECT_THROW(llm::HttpBackend({srv.url(), "/junk", "m", 5, ""}).complete({"x", 0, 1}), BackendError);
  EXPECT_THROW(llm::HttpBackend({"https://x", "/", "m", 5, ""}), ConfigError);
  const int dead = srv.port();
  srv.stop();
  EXPECT_THROW(llm::HttpBackend({"http://127.0.0.1:" + std::to_string(dead), "/v1/chat/completions", "m", 1, ""})
                   .complete({"x", 0, 1}),
               BackendError);
}
