#pragma once

#include <string_view>
#include <vector>

#include "flowrank/frontend/ast.hpp"
#include "flowrank/frontend/lexer.hpp"

namespace flowrank::frontend {

struct ParseOptions {
  /// Accept a final statement cut off at end of input: missing closing
  /// brackets, a missing ':' and an absent block are treated as present.
  bool tolerate_incomplete_tail = false;
};

/// Parses Python 3 source into a Module. Throws ParseError.
Module parse_module(std::string_view source, const ParseOptions& options = {});

/// Same as parse_module but reuses an already lexed token stream.
Module parse_tokens(std::vector<LexToken> tokens, const ParseOptions& options = {});

}  // namespace flowrank::frontend
