#include "physlaw/parser.hpp"

#include <cctype>
#include <optional>

namespace physlaw {

namespace {

enum class Tok : uint8_t {
  End, Ident, Number, Plus, Minus, Star, Slash, DoubleStar, LParen, RParen,
  LBracket, RBracket, LBrace, RBrace, Comma, Colon, Assign, Arrow
};

struct Token {
  Tok kind;
  std::string text;
  int line, col;
};

class Lexer {
 public:
  explicit Lexer(const std::string& src) : src_(src) { advance(); }

  const Token& peek() const { return tok_; }
  Token take() {
    Token t = tok_;
    advance();
    return t;
  }

 private:
  void advance() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) bump();
    tok_.line = line_;
    tok_.col = col_;
    if (pos_ >= src_.size()) {
      tok_ = {Tok::End, "", line_, col_};
      return;
    }
    const char c = src_[pos_];
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::string s;
      while (pos_ < src_.size() &&
             (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) {
        s += src_[pos_];
        bump();
      }
      tok_ = {Tok::Ident, s, tok_.line, tok_.col};
      return;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      std::string s;
      bool dot = false;
      while (pos_ < src_.size() &&
             (std::isdigit(static_cast<unsigned char>(src_[pos_])) ||
              (!dot && src_[pos_] == '.'))) {
        if (src_[pos_] == '.') dot = true;
        s += src_[pos_];
        bump();
      }
      tok_ = {Tok::Number, s, tok_.line, tok_.col};
      return;
    }
    auto two = [&](char a, char b) {
      return c == a && pos_ + 1 < src_.size() && src_[pos_ + 1] == b;
    };
    if (two('*', '*')) { bump(); bump(); tok_ = {Tok::DoubleStar, "**", tok_.line, tok_.col}; return; }
    if (two(':', '=')) { bump(); bump(); tok_ = {Tok::Assign, ":=", tok_.line, tok_.col}; return; }
    if (two('-', '>')) { bump(); bump(); tok_ = {Tok::Arrow, "->", tok_.line, tok_.col}; return; }
    Tok k;
    switch (c) {
      case '+': k = Tok::Plus; break;
      case '-': k = Tok::Minus; break;
      case '*': k = Tok::Star; break;
      case '/': k = Tok::Slash; break;
      case '(': k = Tok::LParen; break;
      case ')': k = Tok::RParen; break;
      case '[': k = Tok::LBracket; break;
      case ']': k = Tok::RBracket; break;
      case '{': k = Tok::LBrace; break;
      case '}': k = Tok::RBrace; break;
      case ',': k = Tok::Comma; break;
      case ':': k = Tok::Colon; break;
      default:
        throw ParseError(line_, col_, std::string("unexpected character '") + c + "'");
    }
    bump();
    tok_ = {k, std::string(1, c), tok_.line, tok_.col};
  }

  void bump() {
    if (src_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }

  const std::string& src_;
  std::size_t pos_ = 0;
  int line_ = 1, col_ = 1;
  Token tok_{Tok::End, "", 1, 1};
};

class Parser {
 public:
  explicit Parser(const std::string& src) : lex_(src) {}

  ExprPtr expression() {
    ExprPtr e = term();
    while (at(Tok::Plus) || at(Tok::Minus)) {
      const bool plus = at(Tok::Plus);
      lex_.take();
      ExprPtr r = term();
      e = plus ? make_add(e, r) : make_sub(e, r);
    }
    return e;
  }

  void expect_end() {
    if (!at(Tok::End)) fail("trailing input after expression");
  }

  ConceptDef concept_decl() {
    expect_ident("concept");
    ConceptDef c;
    c.symbol = take_ident("concept name");
    expect(Tok::Assign, "':='");
    if (at_ident("sum")) {
      lex_.take();
      expect(Tok::LBracket, "'['");
      c.kind = ConceptKind::Summation;
      c.sum_var = take_ident("summation variable");
      expect(Tok::Colon, "':'");
      c.sum_type = take_ident("object type");
      expect(Tok::RBracket, "']'");
      expect(Tok::Comma, "','");
      c.body = expression();
      expect_end();
      return c;
    }
    while (at_ident("forall")) {
      lex_.take();
      TypedSlot s;
      s.var = take_ident("slot variable");
      expect(Tok::Colon, "':'");
      s.object_type = take_ident("object type");
      expect(Tok::Comma, "','");
      c.slots.push_back(std::move(s));
    }
    if (at_ident("Intrinsic")) {
      lex_.take();
      expect(Tok::LBracket, "'['");
      c.kind = c.slots.empty() ? ConceptKind::UniversalConstant : ConceptKind::Intrinsic;
      c.intrinsic.experiment = take_ident("experiment name");
      expect(Tok::LParen, "'('");
      while (!at(Tok::RParen)) {
        std::string obj = take_ident("experiment object name");
        expect(Tok::Arrow, "'->'");
        std::string var = take_ident("bound name");
        c.intrinsic.bindings.emplace_back(obj, var);
        if (at(Tok::Comma)) lex_.take();
      }
      expect(Tok::RParen, "')'");
      expect(Tok::Comma, "','");
      c.body = expression();
      expect(Tok::RBracket, "']'");
      expect_end();
      // the binding whose name matches a slot variable receives the measured object
      for (const auto& [obj, var] : c.intrinsic.bindings)
        for (const TypedSlot& s : c.slots)
          if (s.var == var) c.intrinsic.measured_var = var;
      if (c.kind == ConceptKind::Intrinsic && c.intrinsic.measured_var.empty())
        fail("intrinsic concept must bind a slot variable to an experiment object");
      return c;
    }
    if (c.slots.empty()) fail("expected 'forall', 'sum' or 'Intrinsic'");
    c.kind = ConceptKind::Dynamical;
    c.body = expression();
    expect_end();
    return c;
  }

  LawDef law_decl() {
    expect_ident("law");
    LawDef l;
    l.name = take_ident("law name");
    expect(Tok::Assign, "':='");
    if (at_ident("conserved")) {
      l.kind = LawKind::Conserved;
    } else if (at_ident("zero")) {
      l.kind = LawKind::Zero;
    } else {
      fail("expected 'conserved' or 'zero'");
    }
    lex_.take();
    expect(Tok::LParen, "'('");
    l.subject_expr = expression();
    expect(Tok::RParen, "')'");
    expect_ident("in");
    expect(Tok::LBrace, "'{'");
    while (!at(Tok::RBrace)) {
      l.scope.insert(take_ident("experiment name"));
      if (at(Tok::Comma)) lex_.take();
    }
    expect(Tok::RBrace, "'}'");
    expect_end();
    return l;
  }

  bool at(Tok k) const { return lex_.peek().kind == k; }
  bool at_ident(const char* s) const {
    return lex_.peek().kind == Tok::Ident && lex_.peek().text == s;
  }

 private:
  ExprPtr term() {
    ExprPtr e = unary();
    while (at(Tok::Star) || at(Tok::Slash)) {
      const bool mul = at(Tok::Star);
      lex_.take();
      ExprPtr r = unary();
      if (!mul && e->kind == NodeKind::Number && r->kind == NodeKind::Number) {
        // fold rational literals such as 1/2 written with a slash
        if (r->value == 0) fail("division of a literal by zero");
        e = make_number(e->value / r->value);
        continue;
      }
      e = mul ? make_mul(e, r) : make_div(e, r);
    }
    return e;
  }

  ExprPtr unary() {
    if (at(Tok::Minus)) {
      const Token t = lex_.take();
      ExprPtr e = unary();
      if (e->kind == NodeKind::Number) return make_number(-e->value);
      return make_mul(make_number(-1), e);
    }
    return postfix();
  }

  ExprPtr postfix() {
    ExprPtr e = primary();
    if (at(Tok::DoubleStar)) {
      const Token t = lex_.take();
      int sign = 1;
      if (at(Tok::Minus)) {
        lex_.take();
        sign = -1;
      }
      if (!at(Tok::Number)) fail("expected integer exponent after '**'");
      const Token n = lex_.take();
      if (n.text.find('.') != std::string::npos)
        throw ParseError(n.line, n.col, "exponent must be an integer");
      const long expn = sign * std::stol(n.text);
      if (expn == 0) throw ParseError(n.line, n.col, "zero exponent is not allowed");
      e = make_pow(e, static_cast<int>(expn));
    }
    return e;
  }

  ExprPtr primary() {
    const Token t = lex_.peek();
    switch (t.kind) {
      case Tok::Number: {
        lex_.take();
        const auto dot = t.text.find('.');
        if (dot == std::string::npos) return make_number(Rational(Integer(t.text)));
        const std::string ip = t.text.substr(0, dot);
        const std::string fp = t.text.substr(dot + 1);
        Integer den = 1;
        for (std::size_t i = 0; i < fp.size(); ++i) den *= 10;
        Integer num = Integer(ip.empty() ? "0" : ip) * den + Integer(fp.empty() ? "0" : fp);
        return make_number(Rational(num, den));
      }
      case Tok::LParen: {
        lex_.take();
        ExprPtr e = expression();
        expect(Tok::RParen, "')'");
        return e;
      }
      case Tok::Ident: {
        if (t.text == "D" || t.text == "Partial") return derivative(t.text);
        return atom();
      }
      default:
        fail("expected expression");
    }
    return nullptr;  // unreachable
  }

  ExprPtr derivative(const std::string& head) {
    lex_.take();
    expect(Tok::LBracket, "'['");
    ExprPtr num = expression();
    expect(Tok::RBracket, "']'");
    expect(Tok::Slash, "'/'");
    const Token h = lex_.peek();
    if (!(h.kind == Tok::Ident && h.text == head))
      throw ParseError(h.line, h.col, "expected matching '" + head + "[' denominator");
    lex_.take();
    expect(Tok::LBracket, "'['");
    ExprPtr den = expression();
    expect(Tok::RBracket, "']'");
    if (head == "D") return make_diff(num, den);
    if (den->kind != NodeKind::Atom)
      throw ParseError(h.line, h.col, "Partial denominator must be a coordinate atom");
    return make_partial(num, den);
  }

  ExprPtr atom() {
    const Token name = lex_.take();
    std::vector<ObjRef> idx;
    if (at(Tok::LBracket)) {
      lex_.take();
      while (!at(Tok::RBracket)) {
        const Token t = lex_.peek();
        if (t.kind == Tok::Number) {
          lex_.take();
          if (t.text.find('.') != std::string::npos)
            throw ParseError(t.line, t.col, "object index must be an integer");
          idx.push_back(ObjRef::concrete(std::stoi(t.text)));
        } else if (t.kind == Tok::Ident) {
          lex_.take();
          idx.push_back(ObjRef::bound(t.text));
        } else {
          throw ParseError(t.line, t.col, "expected object index");
        }
        if (at(Tok::Comma)) lex_.take();
      }
      expect(Tok::RBracket, "']'");
    }
    return make_atom(name.text, std::move(idx));
  }

  void expect(Tok k, const char* what) {
    if (!at(k)) fail(std::string("expected ") + what);
    lex_.take();
  }

  void expect_ident(const char* word) {
    if (!at_ident(word)) fail(std::string("expected '") + word + "'");
    lex_.take();
  }

  std::string take_ident(const char* what) {
    if (!at(Tok::Ident)) fail(std::string("expected ") + what);
    return lex_.take().text;
  }

  [[noreturn]] void fail(const std::string& msg) {
    throw ParseError(lex_.peek().line, lex_.peek().col, msg);
  }

  Lexer lex_;
};

}  // namespace

ExprPtr parse_expr(const std::string& text) {
  Parser p(text);
  ExprPtr e = p.expression();
  p.expect_end();
  return e;
}

ConceptDef parse_concept(const std::string& text) {
  Parser p(text);
  return p.concept_decl();
}

LawDef parse_law(const std::string& text) {
  Parser p(text);
  return p.law_decl();
}

ParsedDecl parse_decl(const std::string& text) {
  Parser probe(text);
  ParsedDecl out;
  if (probe.at_ident("concept")) {
    out.what = ParsedDecl::What::Concept;
    out.concept_def = parse_concept(text);
  } else if (probe.at_ident("law")) {
    out.what = ParsedDecl::What::Law;
    out.law_def = parse_law(text);
  } else {
    out.what = ParsedDecl::What::Expression;
    out.expr = parse_expr(text);
  }
  return out;
}

}  // namespace physlaw
