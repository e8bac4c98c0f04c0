#pragma once

#include <string>

#include "flowrank/frontend/frontend.hpp"

namespace flowrank::testing {

inline std::string fixture(const std::string& rel) { return std::string(FLOWRANK_FIXTURES) + "/" + rel; }

/// Point at the last '.' of `text`.
inline frontend::RecommendationPoint last_dot(const std::string& text, const std::string& file_id = "t.py") {
  std::size_t at = text.rfind('.');
  frontend::RecommendationPoint p;
  p.file_id = file_id;
  p.line = 1;
  std::size_t line_start = 0;
  for (std::size_t i = 0; i < at; ++i)
    if (text[i] == '\n') {
      ++p.line;
      line_start = i + 1;
    }
  p.column = static_cast<int>(at - line_start);
  return p;
}

inline frontend::SourceContext context_at_end(const std::string& text) {
  return frontend::parse_context(text, last_dot(text));
}

}  // namespace flowrank::testing
