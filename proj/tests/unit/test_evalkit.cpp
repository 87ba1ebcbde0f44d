#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "stancenet/evalkit.hpp"

using namespace stancenet;
using namespace stancenet::eval;

namespace {

constexpr auto A = Stance::AntiTrans;
constexpr auto P = Stance::ProTrans;
constexpr auto N = Stance::Neutral;

ConfusionMatrix spec_matrix() {
  ConfusionMatrix cm;
  cm.counts = {{{2, 0, 1}, {0, 3, 0}, {1, 0, 3}}};
  return cm;
}

bool is(const Metric& m, std::int64_t num, std::int64_t den) { return m && *m == Ratio::of(num, den); }

}  // namespace

TEST(Confusion, Examples) {
  std::map<std::string, std::optional<Stance>> preds;
  std::map<std::string, Stance> truth;
  for (int i = 0; i < 10; ++i) {
    const Stance s = kStances[i % 3];
    preds["p" + std::to_string(i)] = s;
    truth["p" + std::to_string(i)] = s;
  }
  const auto cm = confusion(preds, truth).matrix;
  EXPECT_EQ(cm.at(A, A) + cm.at(P, P) + cm.at(N, N), 10);
  EXPECT_EQ(confusion({}, {}).matrix.total(), 0);

  const auto three = confusion({{"a", A}, {"b", A}, {"c", N}}, {{"a", A}, {"b", A}, {"c", A}}).matrix;
  EXPECT_EQ(three.counts[0], (std::array<std::int64_t, 3>{2, 0, 1}));

  try {
    confusion({{"x", A}, {"y", A}}, {{"z", A}});
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("x y"), std::string::npos);
  }
  const auto partial = confusion({{"a", std::nullopt}, {"b", P}}, {{"a", A}, {"b", P}, {"c", N}});
  EXPECT_EQ(partial.unclassified, 1u);
  EXPECT_EQ(partial.missing_predictions, 1u);
  EXPECT_EQ(partial.matrix.total(), 1);
}

TEST(Metrics, WorkedMatrix) {
  const auto r = metrics(spec_matrix());
  EXPECT_TRUE(is(r.of(A).precision, 2, 3));
  EXPECT_TRUE(is(r.of(A).recall, 2, 3));
  EXPECT_TRUE(is(r.of(A).f1, 2, 3));
  EXPECT_TRUE(is(r.of(N).precision, 3, 4));
  EXPECT_TRUE(is(r.of(N).f1, 3, 4));
  EXPECT_TRUE(is(r.accuracy, 8, 10));
}

TEST(Metrics, DiagonalAndUndefined) {
  ConfusionMatrix diag;
  diag.counts = {{{4, 0, 0}, {0, 2, 0}, {0, 0, 7}}};
  const auto r = metrics(diag);
  for (auto s : kStances) {
    EXPECT_TRUE(is(r.of(s).precision, 1, 1));
    EXPECT_TRUE(is(r.of(s).recall, 1, 1));
    EXPECT_TRUE(is(r.of(s).f1, 1, 1));
  }
  EXPECT_TRUE(is(r.accuracy, 1, 1));

  ConfusionMatrix none_pro;
  none_pro.counts = {{{1, 0, 1}, {1, 0, 1}, {0, 0, 2}}};
  const auto u = metrics(none_pro);
  EXPECT_FALSE(u.of(P).precision);
  EXPECT_TRUE(is(u.of(P).recall, 0, 1));
  EXPECT_FALSE(u.of(P).f1);
  EXPECT_FALSE(metrics(ConfusionMatrix{}).accuracy);
  EXPECT_EQ(to_json(u)["classes"]["ProTrans"]["precision"], nullptr);
  EXPECT_EQ(metric_cell(u.of(P).precision), "undef");
}

TEST(Metrics, RandomRationalOracle) {
  std::mt19937 gen(1000);
  for (int i = 0; i < 1000; ++i) {
    const auto err = oracle::check_random_metrics(gen);
    ASSERT_TRUE(err.empty()) << "fixture " << i << ": " << err;
  }
}

TEST(Metrics, SampleOrderIrrelevant) {
  std::mt19937 gen(4);
  std::vector<std::pair<std::string, Stance>> items;
  for (int i = 0; i < 30; ++i) items.emplace_back("s" + std::to_string(i), kStances[gen() % 3]);
  std::map<std::string, std::optional<Stance>> preds;
  std::map<std::string, Stance> truth;
  for (const auto& [id, s] : items) {
    truth[id] = s;
    preds[id] = kStances[gen() % 3];
  }
  const auto a = to_json(metrics(confusion(preds, truth).matrix));
  std::shuffle(items.begin(), items.end(), gen);
  std::map<std::string, Stance> truth2;
  for (const auto& [id, s] : items) truth2.emplace(id, s);
  EXPECT_EQ(a, to_json(metrics(confusion(preds, truth2).matrix)));
}

TEST(SublabelRecall, Examples) {
  std::map<std::string, StanceLabel> truth = {
      {"c1", {P, {Sublabel::CEL}}}, {"c2", {P, {Sublabel::CEL, Sublabel::REF}}},
      {"t1", {A, {Sublabel::TM}}},  {"t2", {A, {Sublabel::TM}}},
      {"t3", {A, {Sublabel::TM}}},  {"n1", {N, {}}}};
  std::map<std::string, std::optional<Stance>> preds = {
      {"c1", P}, {"c2", P}, {"t1", A}, {"t2", A}, {"t3", N}, {"n1", N}};
  const auto r = recall_by_sublabel(preds, truth);
  EXPECT_TRUE(is(r.rows.at(Sublabel::CEL).recall, 1, 1));
  EXPECT_TRUE(is(r.rows.at(Sublabel::TM).recall, 2, 3));
  EXPECT_TRUE(is(r.rows.at(Sublabel::TM).proportion, 3, 6));
  EXPECT_EQ(r.rows.at(Sublabel::REF).support, 1);
  EXPECT_FALSE(r.rows.count(Sublabel::XOR));
  EXPECT_EQ(r.notes.size(), 6u);
}

TEST(Kappa, Examples) {
  const std::map<std::string, Stance> a = {{"1", A}, {"2", A}, {"3", P}, {"4", P}};
  const std::map<std::string, Stance> b = {{"1", A}, {"2", A}, {"3", P}, {"4", A}};
  const auto r = cohen_kappa(a, b);
  EXPECT_EQ(*r.observed, 0.75);
  EXPECT_EQ(*r.expected, 0.5);
  EXPECT_EQ(*r.kappa, 0.5);
  EXPECT_EQ(*cohen_kappa(a, a).kappa, 1.0);
  EXPECT_FALSE(cohen_kappa<Stance>({}, {}).kappa);
  const std::map<std::string, Stance> one = {{"1", N}, {"2", N}};
  const auto degenerate = cohen_kappa(one, one);
  EXPECT_FALSE(degenerate.kappa);
  EXPECT_FALSE(degenerate.reason.empty());
  EXPECT_THROW(cohen_kappa(a, one), DataError);
  EXPECT_EQ(to_json(degenerate)["kappa"], nullptr);
}

TEST(Kappa, SymmetricAndBounded) {
  std::mt19937 gen(12);
  for (int iter = 0; iter < 1000; ++iter) {
    std::map<std::string, Stance> a, b;
    const int n = 1 + static_cast<int>(gen() % 60);
    for (int i = 0; i < n; ++i) {
      a[std::to_string(i)] = kStances[gen() % 3];
      b[std::to_string(i)] = gen() % 3 ? a[std::to_string(i)] : kStances[gen() % 3];
    }
    const auto ab = cohen_kappa(a, b);
    const auto ba = cohen_kappa(b, a);
    ASSERT_EQ(ab.kappa.has_value(), ba.kappa.has_value());
    if (!ab.kappa) continue;
    EXPECT_NEAR(*ab.kappa, *ba.kappa, 1e-12);
    EXPECT_LE(*ab.kappa, 1.0 + 1e-12);
    if (a == b) {
      EXPECT_DOUBLE_EQ(*ab.kappa, 1.0);
    }
    const double po = *ab.observed;
    const double pe = *ab.expected;
    EXPECT_NEAR(*ab.kappa, (po - pe) / (1 - pe), 1e-12);
  }
}

TEST(Tables, LayoutHasEveryCell) {
  const auto r = metrics(spec_matrix());
  SublabelReport subs;
  subs.rows[Sublabel::TM] = {Ratio::of(2, 3), 3, Ratio::of(3, 10)};
  const std::string t = render_tables({{"Zero-shot ensemble", r, subs}}, {3, 3, 4}, subs);
  EXPECT_NE(t.find("Classification Performance Metrics\n"), std::string::npos);
  EXPECT_NE(t.find("Anti-Trans (n=3)"), std::string::npos);
  EXPECT_NE(t.find("Neutral (n=4)"), std::string::npos);
  EXPECT_NE(t.find("Accuracy"), std::string::npos);
  EXPECT_NE(t.find("Recall by Sublabel\n"), std::string::npos);
  EXPECT_NE(t.find("Proportion of Sample"), std::string::npos);
  for (const std::string h : {"TM", "ATM", "XOR", "TERF", "RW", "INTRA", "CEL", "REF", "CON"}) {
    EXPECT_NE(t.find(" " + h), std::string::npos) << h;
  }
  EXPECT_NE(t.find("0.67   0.67   0.67"), std::string::npos);
  EXPECT_NE(t.find("0.80\n"), std::string::npos);
  for (auto line : split_lines(t)) {
    if (!line.empty()) {
      EXPECT_NE(line.back(), ' ');
    }
  }
}
