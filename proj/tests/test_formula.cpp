#include <gtest/gtest.h>

#include "ecomem.hpp"

using namespace ecomem;

namespace {

std::vector<std::string> labels(const Formula& f) {
  std::vector<std::string> out;
  for (const auto& t : f.terms) out.push_back(t.label());
  return out;
}

}  // namespace

TEST(ParseFormula, CrossedTermsExpandInOrder) {
  auto f = parse_formula("y ~ v1*v2 + v2*v3");
  EXPECT_EQ(f.response, "y");
  EXPECT_EQ(labels(f), (std::vector<std::string>{"v1", "v2", "v1:v2", "v3", "v2:v3"}));
  EXPECT_EQ(f.covariates(), (std::vector<std::string>{"v1", "v2", "v3"}));
}

TEST(ParseFormula, MainEffectsOnly) {
  auto f = parse_formula("gr ~ age + ftc");
  EXPECT_EQ(f.response, "gr");
  EXPECT_EQ(labels(f), (std::vector<std::string>{"age", "ftc"}));
  EXPECT_FALSE(f.terms[0].is_interaction());
}

TEST(ParseFormula, EmptyRightHandSide) {
  try {
    parse_formula("y ~");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.code(), ErrorCode::ParseError);
    EXPECT_EQ(e.position(), 3u);
  }
}

TEST(ParseFormula, DuplicatesCollapseAndInteractionsAreCanonical) {
  auto f = parse_formula("y ~ b:a + a + a*b + b + a:b");
  EXPECT_EQ(labels(f), (std::vector<std::string>{"a:b", "a", "b"}));
  EXPECT_EQ(parse_formula("y ~ zed:alpha").terms[0].factors, (std::vector<std::string>{"alpha", "zed"}));
  EXPECT_EQ(labels(parse_formula("y ~ x:x")), (std::vector<std::string>{"x"}));
}

TEST(ParseFormula, WhitespaceInsensitive) {
  EXPECT_EQ(labels(parse_formula("  y~v1 *v2+v3 ")), labels(parse_formula("y ~ v1*v2 + v3")));
}

TEST(ParseFormula, Errors) {
  for (const char* bad : {"", "~ x", "y x", "y ~ x +", "y ~ x y", "y ~ 3x", "y ~ x * ", "y ~ x:"}) {
    EXPECT_THROW(parse_formula(bad), ParseError) << bad;
  }
  try {
    parse_formula("y ~ a b");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.position(), 6u);
    EXPECT_NE(e.expected().find("'+'"), std::string::npos);
  }
}

TEST(ParseFormula, TextRoundTrip) {
  auto f = parse_formula("y ~ v1*v2 + v2*v3");
  EXPECT_EQ(f.text(), "y ~ v1 + v2 + v1:v2 + v3 + v2:v3");
  EXPECT_EQ(labels(parse_formula(f.text())), labels(f));
}
