#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace randqe {

/// Minimal s-expression tree: an atom (bare or double-quoted) or a list.
struct SExpr {
  enum class Kind { Atom, String, List };
  Kind kind = Kind::Atom;
  std::string text;
  std::vector<SExpr> items;
  std::size_t pos = 0;

  bool is_atom() const { return kind == Kind::Atom; }
  bool is_list() const { return kind == Kind::List; }
  /// Head symbol of a non-empty list whose first item is an atom, else "".
  std::string_view head() const;
};

/// Parses exactly one expression; trailing non-space input is an error.
SExpr parse_sexpr(std::string_view text);

std::string quote_string(std::string_view s);

}  // namespace randqe
