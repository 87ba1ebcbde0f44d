#pragma once

// Prompt templates and the rendered prompt layout.
//
// A rendered prompt is, in order: the codebook definitions section, the
// labeled examples section, then the template body, which holds the post
// content and the task instruction. A template may place {definitions} and
// {examples} itself; if it does not, non-empty sections are prepended.
// Empty sections render to nothing, and a placeholder alone on its line
// takes the line with it.

#include <algorithm>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "stancenet/corpus.hpp"
#include "stancenet/error.hpp"
#include "stancenet/util.hpp"

namespace stancenet::prompt {

inline constexpr std::string_view kContent = "{content}";
inline constexpr std::string_view kExamples = "{examples}";
inline constexpr std::string_view kDefinitions = "{definitions}";

inline constexpr std::string_view kPostOpen = "<post>\n";
inline constexpr std::string_view kPostClose = "\n</post>";
inline constexpr std::string_view kDefinitionsHeader = "Codebook definitions:\n";
inline constexpr std::string_view kExamplesHeader = "Labeled examples:\n";

namespace detail {

inline std::size_t count_of(std::string_view text, std::string_view needle) {
  std::size_t n = 0;
  for (std::size_t pos = text.find(needle); pos != std::string_view::npos;
       pos = text.find(needle, pos + needle.size())) {
    ++n;
  }
  return n;
}

/// Replaces the single occurrence of `placeholder`. When the replacement is
/// empty and the placeholder fills its whole line, the line is removed.
inline void substitute(std::string& text, std::string_view placeholder,
                       std::string_view replacement) {
  const std::size_t pos = text.find(placeholder);
  if (pos == std::string::npos) return;
  std::size_t begin = pos;
  std::size_t end = pos + placeholder.size();
  if (replacement.empty()) {
    const bool line_start = begin == 0 || text[begin - 1] == '\n';
    const bool line_end = end == text.size() || text[end] == '\n';
    if (line_start && line_end && end < text.size()) ++end;
  }
  text.replace(begin, end - begin, replacement);
}

inline std::string collapse_whitespace(std::string_view s) {
  std::string out;
  bool pending_space = false;
  for (char c : trim(s)) {
    if (c == ' ' || c == '\n' || c == '\t' || c == '\r') {
      pending_space = true;
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(c);
  }
  return out;
}

}  // namespace detail

class PromptTemplate {
 public:
  /// Validates placeholders: {content} exactly once; {definitions} and
  /// {examples} at most once and, when present, before {content} in that order.
  PromptTemplate(std::string id, std::string text) : id_(std::move(id)), text_(std::move(text)) {
    if (id_.empty()) throw ConfigError("template id must be nonempty");
    const auto content = detail::count_of(text_, kContent);
    if (content != 1) {
      throw ConfigError("template '" + id_ + "' must contain {content} exactly once (found " +
                        std::to_string(content) + ")");
    }
    for (auto ph : {kExamples, kDefinitions}) {
      if (detail::count_of(text_, ph) > 1) {
        throw ConfigError("template '" + id_ + "' repeats " + std::string(ph));
      }
    }
    const auto c = text_.find(kContent);
    const auto e = text_.find(kExamples);
    const auto d = text_.find(kDefinitions);
    if ((e != std::string::npos && e > c) || (d != std::string::npos && d > c) ||
        (d != std::string::npos && e != std::string::npos && d > e)) {
      throw ConfigError("template '" + id_ +
                        "' must order placeholders {definitions}, {examples}, {content}");
    }
  }

  const std::string& id() const noexcept { return id_; }
  const std::string& text() const noexcept { return text_; }
  bool has_examples_slot() const { return text_.find(kExamples) != std::string::npos; }
  bool has_definitions_slot() const { return text_.find(kDefinitions) != std::string::npos; }

 private:
  std::string id_;
  std::string text_;
};

/// Loads every *.txt file in `dir`; the id is the file stem. Sorted by id.
inline std::vector<PromptTemplate> load_templates(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw ConfigError("template directory '" + dir.string() + "' does not exist");
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".txt") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<PromptTemplate> out;
  for (const auto& f : files) out.emplace_back(f.stem().string(), read_file(f));
  return out;
}

struct LabeledText {
  std::string text;
  Stance label = Stance::Neutral;
};

inline std::string render_definitions(const std::vector<std::string>& definitions) {
  if (definitions.empty()) return {};
  std::string out(kDefinitionsHeader);
  for (const auto& d : definitions) {
    out += "- ";
    out += detail::collapse_whitespace(d);
    out += '\n';
  }
  out += '\n';
  return out;
}

inline std::string render_examples(const std::vector<LabeledText>& examples) {
  if (examples.empty()) return {};
  std::string out(kExamplesHeader);
  for (const auto& ex : examples) {
    out += "<example label=\"" + display_name(ex.label) + "\">\n";
    out += trim(ex.text);
    out += "\n</example>\n";
  }
  out += '\n';
  return out;
}

inline std::string render_prompt(const PromptTemplate& tmpl, std::string_view content,
                                 const std::vector<LabeledText>& examples = {},
                                 const std::vector<std::string>& definitions = {}) {
  const std::string defs = render_definitions(definitions);
  const std::string exs = render_examples(examples);
  std::string body = tmpl.text();
  std::string prefix;
  if (tmpl.has_definitions_slot()) {
    detail::substitute(body, kDefinitions, defs);
  } else {
    prefix += defs;
  }
  if (tmpl.has_examples_slot()) {
    detail::substitute(body, kExamples, exs);
  } else {
    prefix += exs;
  }
  std::string post(kPostOpen);
  post += content;
  post += kPostClose;
  detail::substitute(body, kContent, post);
  return prefix + body;
}

// ---------------------------------------------------------------------------
// Reading a rendered prompt back (used by the mock backend).

struct PromptParts {
  std::optional<std::string> post;
  std::vector<LabeledText> examples;
  std::vector<std::string> definitions;
  std::string instructions;  // nonblank lines outside the post and the two sections
};

inline PromptParts split_prompt(std::string_view prompt) {
  PromptParts parts;
  std::string rest;
  const auto lines = split_lines(prompt);
  std::size_t i = 0;
  while (i < lines.size()) {
    std::string_view line = lines[i];
    if (line == trim(kDefinitionsHeader)) {
      ++i;
      while (i < lines.size() && lines[i].substr(0, 2) == "- ") {
        parts.definitions.emplace_back(lines[i].substr(2));
        ++i;
      }
      continue;
    }
    if (line == trim(kExamplesHeader)) {
      ++i;
      while (i < lines.size() && lines[i].substr(0, 16) == "<example label=\"") {
        const std::string_view open = lines[i];
        const auto q = open.find('"', 16);
        LabeledText ex;
        if (q != std::string_view::npos) {
          if (auto s = parse_stance(open.substr(16, q - 16))) ex.label = *s;
        }
        ++i;
        std::string text;
        while (i < lines.size() && lines[i] != "</example>") {
          if (!text.empty()) text += '\n';
          text += lines[i];
          ++i;
        }
        ++i;  // closing tag
        ex.text = std::move(text);
        parts.examples.push_back(std::move(ex));
      }
      continue;
    }
    if (line == trim(kPostOpen) && !parts.post) {
      ++i;
      std::size_t close = lines.size();
      for (std::size_t k = lines.size(); k > i; --k) {
        if (lines[k - 1] == trim(kPostClose)) {
          close = k - 1;
          break;
        }
      }
      std::string text;
      for (std::size_t k = i; k < close; ++k) {
        if (k > i) text += '\n';
        text += lines[k];
      }
      parts.post = std::move(text);
      i = close + 1;
      continue;
    }
    if (!trim(line).empty()) {
      rest += line;
      rest += '\n';
    }
    ++i;
  }
  parts.instructions = std::move(rest);
  return parts;
}

}  // namespace stancenet::prompt
