#include "randqe/sexpr.hpp"

#include <cctype>

#include "randqe/rational.hpp"

namespace randqe {

std::string_view SExpr::head() const {
  if (kind != Kind::List || items.empty() || items[0].kind != Kind::Atom) return {};
  return items[0].text;
}

namespace {

class Reader {
 public:
  explicit Reader(std::string_view s) : s_(s) {}

  SExpr read() {
    skip();
    if (pos_ >= s_.size()) throw ParseError("unexpected end of input", pos_);
    char c = s_[pos_];
    if (c == '(') return list();
    if (c == ')') throw ParseError("unexpected ')'", pos_);
    if (c == '"') return string();
    return atom();
  }

  void finish() {
    skip();
    if (pos_ != s_.size()) throw ParseError("trailing input", pos_);
  }

 private:
  void skip() {
    while (pos_ < s_.size()) {
      if (std::isspace(static_cast<unsigned char>(s_[pos_]))) {
        ++pos_;
      } else if (s_[pos_] == ';') {
        while (pos_ < s_.size() && s_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  SExpr list() {
    SExpr e;
    e.kind = SExpr::Kind::List;
    e.pos = pos_++;
    while (true) {
      skip();
      if (pos_ >= s_.size()) throw ParseError("unclosed '('", e.pos);
      if (s_[pos_] == ')') {
        ++pos_;
        return e;
      }
      e.items.push_back(read());
    }
  }

  SExpr string() {
    SExpr e;
    e.kind = SExpr::Kind::String;
    e.pos = pos_++;
    while (true) {
      if (pos_ >= s_.size()) throw ParseError("unterminated string", e.pos);
      char c = s_[pos_++];
      if (c == '"') return e;
      if (c == '\\') {
        if (pos_ >= s_.size()) throw ParseError("unterminated escape", pos_);
        c = s_[pos_++];
      }
      e.text.push_back(c);
    }
  }

  SExpr atom() {
    SExpr e;
    e.pos = pos_;
    while (pos_ < s_.size()) {
      char c = s_[pos_];
      if (std::isspace(static_cast<unsigned char>(c)) || c == '(' || c == ')' || c == '"') break;
      e.text.push_back(c);
      ++pos_;
    }
    return e;
  }

  std::string_view s_;
  std::size_t pos_ = 0;
};

}  // namespace

SExpr parse_sexpr(std::string_view text) {
  Reader r(text);
  SExpr e = r.read();
  r.finish();
  return e;
}

std::string quote_string(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace randqe
