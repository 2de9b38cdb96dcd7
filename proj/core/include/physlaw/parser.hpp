#pragma once

#include "physlaw/expr.hpp"

#include <stdexcept>
#include <string>

namespace physlaw {

class ParseError : public std::runtime_error {
 public:
  ParseError(int line, int col, const std::string& msg)
      : std::runtime_error("parse error at " + std::to_string(line) + ":" +
                           std::to_string(col) + ": " + msg),
        line(line),
        col(col) {}
  int line, col;
};

// Parses a bare expression in the published grammar. Rational literals
// (including decimals) fold to Number nodes; zero exponents are rejected.
ExprPtr parse_expr(const std::string& text);

// "concept <name> := forall i: <Type>, <expr>" and friends.
ConceptDef parse_concept(const std::string& text);

// "law <name> := conserved(<expr>) in {<exp>, ...}". The subject is returned
// as an expression; whether it names a concept is resolved at registration.
LawDef parse_law(const std::string& text);

// Dispatches on the leading keyword (concept/law) or falls back to an
// expression. Exactly one of the three outputs is set.
struct ParsedDecl {
  enum class What { Expression, Concept, Law } what;
  ExprPtr expr;
  ConceptDef concept_def;
  LawDef law_def;
};
ParsedDecl parse_decl(const std::string& text);

}  // namespace physlaw
