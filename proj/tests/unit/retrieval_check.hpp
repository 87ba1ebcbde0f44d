#pragma once

#include <string>

#include "oracles.hpp"

namespace testing_support {

/// Compares retrieve() against the brute-force oracle; empty string on match.
inline std::string compare_with_oracle(const std::vector<std::pair<std::string, std::string>>& docs,
                                       const stancenet::rag::Store& store, const std::string& query,
                                       std::size_t k, double threshold) {
  const auto got = stancenet::rag::retrieve(store, query, k, threshold).entries;
  const auto want = oracle::brute_force_retrieve(docs, query, k, threshold);
  const auto describe = [&] {
    std::string s = "query '" + query + "' k=" + std::to_string(k) + " t=" + std::to_string(threshold) + ":";
    for (const auto& g : got) s += " " + g.id + "=" + std::to_string(g.score);
    s += " vs";
    for (const auto& w : want) s += " " + w.id + "=" + std::to_string(w.score);
    return s;
  };
  if (got.size() != want.size()) {
    // A score within rounding of the threshold may legitimately fall either side.
    const auto borderline = [&](double s) { return std::abs(s - threshold) < 1e-12; };
    const bool explained = (!got.empty() && borderline(got.back().score)) ||
                           (!want.empty() && borderline(want.back().score));
    if (!explained) return describe();
  }
  for (std::size_t i = 0; i < std::min(got.size(), want.size()); ++i) {
    if (std::abs(got[i].score - want[i].score) > 1e-9) return describe();
    if (got[i].id != want[i].id && std::abs(got[i].score - want[i].score) > 1e-12) return describe();
  }
  for (std::size_t i = 1; i < got.size(); ++i) {
    if (got[i].score > got[i - 1].score) return describe();
  }
  return {};
}

}  // namespace testing_support
