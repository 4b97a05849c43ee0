#pragma once

// R-style model formulas restricted to main effects and two-way interactions:
//   response ~ term (+ term)*     term := name | name*name | name:name

#include <algorithm>
#include <cctype>
#include <string>
#include <string_view>
#include <vector>

#include "ecomem/error.hpp"

namespace ecomem {

struct Term {
  std::vector<std::string> factors;  // one name, or two names in alphabetical order

  bool is_interaction() const { return factors.size() == 2; }

  std::string label() const {
    return is_interaction() ? factors[0] + ":" + factors[1] : factors[0];
  }

  bool involves(const std::string& name) const {
    return std::find(factors.begin(), factors.end(), name) != factors.end();
  }

  friend bool operator==(const Term&, const Term&) = default;
};

struct Formula {
  std::string response;
  std::vector<Term> terms;

  // Distinct covariate names, order of first appearance.
  std::vector<std::string> covariates() const {
    std::vector<std::string> out;
    for (const auto& t : terms)
      for (const auto& f : t.factors)
        if (std::find(out.begin(), out.end(), f) == out.end()) out.push_back(f);
    return out;
  }

  std::string text() const {
    std::string s = response + " ~ ";
    for (std::size_t i = 0; i < terms.size(); ++i) s += (i ? " + " : "") + terms[i].label();
    return s;
  }
};

inline Term make_term(std::string a, std::string b = {}) {
  if (b.empty() || a == b) return Term{{std::move(a)}};
  if (b < a) std::swap(a, b);
  return Term{{std::move(a), std::move(b)}};
}

namespace detail {

class FormulaParser {
 public:
  explicit FormulaParser(std::string_view text) : s_(text) {}

  Formula parse() {
    Formula f;
    f.response = name("response name");
    expect('~');
    do {
      std::string a = name("term");
      skip_ws();
      if (peek() == '*') {
        ++pos_;
        std::string b = name("name after '*'");
        add(f, make_term(a));
        add(f, make_term(b));
        add(f, make_term(a, b));
      } else if (peek() == ':') {
        ++pos_;
        add(f, make_term(a, name("name after ':'")));
      } else {
        add(f, make_term(a));
      }
      skip_ws();
    } while (accept('+'));
    skip_ws();
    if (pos_ != s_.size()) throw ParseError(pos_, "'+' or end of formula");
    return f;
  }

 private:
  static void add(Formula& f, Term t) {
    if (std::find(f.terms.begin(), f.terms.end(), t) == f.terms.end()) f.terms.push_back(std::move(t));
  }

  char peek() const { return pos_ < s_.size() ? s_[pos_] : '\0'; }

  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_ws();
    if (peek() != c) return false;
    ++pos_;
    return true;
  }

  void expect(char c) {
    if (!accept(c)) throw ParseError(pos_, std::string("'") + c + "'");
  }

  std::string name(const char* what) {
    skip_ws();
    auto start = pos_;
    auto head = [](char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == '.'; };
    auto tail = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.'; };
    if (!head(peek())) throw ParseError(pos_, what);
    while (pos_ < s_.size() && tail(s_[pos_])) ++pos_;
    return std::string(s_.substr(start, pos_ - start));
  }

  std::string_view s_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline Formula parse_formula(std::string_view text) { return detail::FormulaParser(text).parse(); }

}  // namespace ecomem
