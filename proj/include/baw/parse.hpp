#pragma once

// Surface syntax: a lexer, a recursive-descent parser, and a canonical
// printer.  print and parse are mutually inverse: parse(print(ast)) == ast,
// and print(parse(text)) reproduces text up to whitespace and redundant
// parentheses.

#include <baw/ast.hpp>

#include <cctype>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace baw {

class parse_error : public std::runtime_error {
 public:
  parse_error(const std::string& what, std::size_t line, std::size_t col)
      : std::runtime_error("parse error at " + std::to_string(line) + ":" +
                           std::to_string(col) + ": " + what) {}
};

namespace detail {

enum class Tok {
  number, eps, ident, lparen, rparen, comma, plus, star_, monus, eq, leq,
  arrow, bang, end
};

struct Token {
  Tok kind;
  std::string text;
  Nat number;
  std::size_t line = 1, col = 1;
};

inline bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == '$'; }
inline bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '$' || c == '\''; }

inline std::vector<Token> lex(const std::string& text) {
  std::vector<Token> out;
  std::size_t line = 1, col = 1;
  std::size_t k = 0;
  auto advance = [&](std::size_t n) {
    for (std::size_t j = 0; j < n; ++j) {
      if (text[k + j] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    k += n;
  };
  while (k < text.size()) {
    char c = text[k];
    if (std::isspace(static_cast<unsigned char>(c))) {
      advance(1);
      continue;
    }
    Token tok;
    tok.line = line;
    tok.col = col;
    if (std::isdigit(static_cast<unsigned char>(c))) {
      std::size_t j = k;
      while (j < text.size() && std::isdigit(static_cast<unsigned char>(text[j]))) ++j;
      // epsilon literal: digits '.' digits 'b'
      if (j < text.size() && text[j] == '.') {
        std::size_t m = j + 1;
        while (m < text.size() && std::isdigit(static_cast<unsigned char>(text[m]))) ++m;
        if (m < text.size() && text[m] == 'b' && m > j + 1) {
          tok.kind = Tok::eps;
          tok.text = text.substr(k, m + 1 - k);
          out.push_back(tok);
          advance(m + 1 - k);
          continue;
        }
        throw parse_error("malformed fraction literal", line, col);
      }
      tok.kind = Tok::number;
      tok.text = text.substr(k, j - k);
      tok.number = Nat(tok.text);
      out.push_back(tok);
      advance(j - k);
      continue;
    }
    if (ident_start(c)) {
      std::size_t j = k;
      while (j < text.size() && ident_char(text[j])) ++j;
      tok.kind = Tok::ident;
      tok.text = text.substr(k, j - k);
      out.push_back(tok);
      advance(j - k);
      continue;
    }
    switch (c) {
      case '(': tok.kind = Tok::lparen; advance(1); break;
      case ')': tok.kind = Tok::rparen; advance(1); break;
      case ',': tok.kind = Tok::comma; advance(1); break;
      case '+': tok.kind = Tok::plus; advance(1); break;
      case '*': tok.kind = Tok::star_; advance(1); break;
      case '!': tok.kind = Tok::bang; advance(1); break;
      case '=': tok.kind = Tok::eq; advance(1); break;
      case '-':
        if (k + 1 < text.size() && text[k + 1] == '.') {
          tok.kind = Tok::monus;
          advance(2);
        } else if (k + 1 < text.size() && text[k + 1] == '>') {
          tok.kind = Tok::arrow;
          advance(2);
        } else {
          throw parse_error("expected '-.' or '->'", line, col);
        }
        break;
      case '<':
        if (k + 1 < text.size() && text[k + 1] == '=') {
          tok.kind = Tok::leq;
          advance(2);
        } else {
          throw parse_error("expected '<='", line, col);
        }
        break;
      default:
        throw parse_error(std::string("unexpected character '") + c + "'", line, col);
    }
    out.push_back(tok);
  }
  Token end;
  end.kind = Tok::end;
  end.line = line;
  end.col = col;
  out.push_back(end);
  return out;
}

class Parser {
 public:
  explicit Parser(const std::string& text) : toks_(lex(text)) {}

  TermPtr parse_term_all() {
    TermPtr t = term();
    expect_end();
    return t;
  }

  FormulaPtr parse_formula_all() {
    FormulaPtr f = formula();
    expect_end();
    return f;
  }

 private:
  std::vector<Token> toks_;
  std::size_t pos_ = 0;

  const Token& peek() const { return toks_[pos_]; }
  Token take() { return toks_[pos_++]; }
  bool at(Tok k) const { return peek().kind == k; }
  bool at_word(const char* w) const {
    return peek().kind == Tok::ident && peek().text == w;
  }
  [[noreturn]] void fail(const std::string& msg) const {
    throw parse_error(msg, peek().line, peek().col);
  }
  void expect(Tok k, const char* what) {
    if (!at(k)) fail(std::string("expected ") + what);
    ++pos_;
  }
  void expect_end() {
    if (!at(Tok::end)) fail("unexpected trailing input");
  }

  static bool reserved(const std::string& w) {
    static const char* words[] = {"S",    "half", "len",  "pad",  "msp",
                                  "smash", "bit",  "lsp",  "bhat", "cond",
                                  "max",  "min",  "pair", "ell",  "exists",
                                  "forall", "not", "and",  "or"};
    for (const char* r : words)
      if (w == r) return true;
    return false;
  }

  // --- terms ---

  TermPtr term() { return sum(); }

  TermPtr sum() {
    TermPtr acc = product();
    for (;;) {
      if (at(Tok::plus)) {
        ++pos_;
        acc = t_add(acc, product());
      } else if (at(Tok::monus)) {
        ++pos_;
        acc = t_monus(acc, product());
      } else {
        return acc;
      }
    }
  }

  TermPtr product() {
    TermPtr acc = primary();
    while (at(Tok::star_)) {
      ++pos_;
      acc = t_mul(acc, primary());
    }
    return acc;
  }

  std::vector<TermPtr> call_args(std::size_t arity, const std::string& who) {
    expect(Tok::lparen, "'('");
    std::vector<TermPtr> args;
    for (std::size_t k = 0; k < arity; ++k) {
      if (k) expect(Tok::comma, "','");
      args.push_back(term());
    }
    if (at(Tok::comma)) fail(who + " takes " + std::to_string(arity) + " arguments");
    expect(Tok::rparen, "')'");
    return args;
  }

  TermPtr primary() {
    if (at(Tok::number)) {
      Token t = take();
      return t.number == 0 ? t_zero() : t_lit(t.number);
    }
    if (at(Tok::lparen)) {
      ++pos_;
      TermPtr t = term();
      expect(Tok::rparen, "')'");
      return t;
    }
    if (!at(Tok::ident)) fail("expected a term");
    Token id = take();
    const std::string& w = id.text;
    if (w == "S") { auto a = call_args(1, w); return t_succ(a[0]); }
    if (w == "half") { auto a = call_args(1, w); return t_half(a[0]); }
    if (w == "len") { auto a = call_args(1, w); return t_len(a[0]); }
    if (w == "pad") { auto a = call_args(2, w); return t_pad(a[0], a[1]); }
    if (w == "msp") { auto a = call_args(2, w); return t_msp(a[0], a[1]); }
    if (w == "smash") { auto a = call_args(2, w); return t_smash(a[0], a[1]); }
    if (w == "bit") { auto a = call_args(2, w); return t_bit(a[0], a[1]); }
    if (w == "lsp") { auto a = call_args(2, w); return t_lsp(a[0], a[1]); }
    if (w == "bhat") { auto a = call_args(3, w); return t_bhat(a[0], a[1], a[2]); }
    if (w == "cond") { auto a = call_args(3, w); return t_cond(a[0], a[1], a[2]); }
    if (w == "max") { auto a = call_args(2, w); return t_max(a[0], a[1]); }
    if (w == "min") { auto a = call_args(2, w); return t_min(a[0], a[1]); }
    if (w == "pair") { auto a = call_args(2, w); return t_pair(a[0], a[1]); }
    if (w == "ell") {
      expect(Tok::lparen, "'('");
      if (!at(Tok::eps)) fail("ell expects a fraction literal like 0.1b");
      EpsilonSpec e = EpsilonSpec::parse(take().text);
      expect(Tok::comma, "','");
      TermPtr a = term();
      expect(Tok::rparen, "')'");
      return t_ell(std::move(e), a);
    }
    if (reserved(w)) fail("'" + w + "' cannot be used here");
    return t_var(w);
  }

  // --- formulas ---

  FormulaPtr formula() { return implication(); }

  FormulaPtr implication() {
    FormulaPtr left = disjunction();
    if (at(Tok::arrow)) {
      ++pos_;
      return f_imp(left, implication());
    }
    return left;
  }

  FormulaPtr disjunction() {
    FormulaPtr acc = conjunction();
    while (at_word("or")) {
      ++pos_;
      acc = f_or(acc, conjunction());
    }
    return acc;
  }

  FormulaPtr conjunction() {
    FormulaPtr acc = unary();
    while (at_word("and")) {
      ++pos_;
      acc = f_and(acc, unary());
    }
    return acc;
  }

  FormulaPtr unary() {
    if (at_word("not")) {
      ++pos_;
      return f_not(unary());
    }
    if (at_word("exists") || at_word("forall")) return quantifier();
    // Either an atom (term rel term) or a parenthesized formula; try the atom
    // first and fall back.
    std::size_t save = pos_;
    try {
      return atom();
    } catch (const parse_error&) {
      pos_ = save;
    }
    expect(Tok::lparen, "'('");
    FormulaPtr f = formula();
    expect(Tok::rparen, "')'");
    return f;
  }

  FormulaPtr atom() {
    TermPtr l = term();
    if (at(Tok::eq)) {
      ++pos_;
      return f_eq(l, term());
    }
    if (at(Tok::leq)) {
      ++pos_;
      return f_leq(l, term());
    }
    fail("expected '=' or '<='");
  }

  FormulaPtr quantifier() {
    bool is_exists = at_word("exists");
    ++pos_;
    bool unique = false;
    if (at(Tok::bang)) {
      if (!is_exists) fail("'!' only follows 'exists'");
      unique = true;
      ++pos_;
    }
    if (!at(Tok::ident) || reserved(peek().text)) fail("expected a variable name");
    std::string var = take().text;
    expect(Tok::leq, "'<='");
    TermPtr bound = term();
    if (contains_var(bound, var)) {
      fail("quantifier bound must not mention '" + var + "'");
    }
    expect(Tok::lparen, "'('");
    FormulaPtr body = formula();
    expect(Tok::rparen, "')'");
    if (!unique) {
      return f_quant(is_exists ? FormulaOp::exists : FormulaOp::forall, var, bound, body);
    }
    // exists! x <= t (F)  expands to
    // exists x <= t (F and forall x' <= t (F[x'/x] -> x' = x))
    std::set<std::string> used = free_vars(body);
    collect_all_names(body, used);
    used.insert(var);
    std::string other = fresh_var(used, "u");
    FormulaPtr shifted = substitute(body, var, t_var(other));
    FormulaPtr inner =
        f_forall(other, bound, f_imp(shifted, f_eq(t_var(other), t_var(var))));
    return f_exists(var, bound, f_and(body, inner));
  }

  static void collect_all_names(const FormulaPtr& f, std::set<std::string>& out) {
    switch (f->op) {
      case FormulaOp::eq:
      case FormulaOp::leq:
        collect_vars(f->lhs, out);
        collect_vars(f->rhs, out);
        return;
      case FormulaOp::fnot:
        collect_all_names(f->a, out);
        return;
      case FormulaOp::fand:
      case FormulaOp::forr:
      case FormulaOp::imp:
        collect_all_names(f->a, out);
        collect_all_names(f->b, out);
        return;
      case FormulaOp::exists:
      case FormulaOp::forall:
        out.insert(f->var);
        collect_vars(f->bound, out);
        collect_all_names(f->body, out);
        return;
    }
  }
};

}  // namespace detail

inline TermPtr parse_term(const std::string& text) {
  return detail::Parser(text).parse_term_all();
}
inline FormulaPtr parse_formula(const std::string& text) {
  return detail::Parser(text).parse_formula_all();
}

// --- printing -------------------------------------------------------------

namespace detail {

// Term precedence: sums 1, products 2, primaries 3.
inline int term_prec(const TermPtr& t) {
  switch (t->op) {
    case TermOp::add:
    case TermOp::monus:
      return 1;
    case TermOp::mul:
      return 2;
    default:
      return 3;
  }
}

inline void print_term_to(const TermPtr& t, std::ostream& os);

inline void print_child(const TermPtr& child, int parent_prec, bool right,
                        std::ostream& os) {
  int cp = term_prec(child);
  bool parens = cp < parent_prec || (cp == parent_prec && right);
  if (parens) os << '(';
  print_term_to(child, os);
  if (parens) os << ')';
}

inline void print_call(const char* name, const std::vector<TermPtr>& args,
                       std::ostream& os) {
  os << name << '(';
  for (std::size_t k = 0; k < args.size(); ++k) {
    if (k) os << ", ";
    print_term_to(args[k], os);
  }
  os << ')';
}

inline void print_term_to(const TermPtr& t, std::ostream& os) {
  switch (t->op) {
    case TermOp::zero: os << '0'; return;
    case TermOp::lit: os << t->value.str(); return;
    case TermOp::var: os << t->name; return;
    case TermOp::succ: print_call("S", t->args, os); return;
    case TermOp::add:
      print_child(t->args[0], 1, false, os);
      os << " + ";
      print_child(t->args[1], 1, true, os);
      return;
    case TermOp::monus:
      print_child(t->args[0], 1, false, os);
      os << " -. ";
      print_child(t->args[1], 1, true, os);
      return;
    case TermOp::mul:
      print_child(t->args[0], 2, false, os);
      os << " * ";
      print_child(t->args[1], 2, true, os);
      return;
    case TermOp::half: print_call("half", t->args, os); return;
    case TermOp::len: print_call("len", t->args, os); return;
    case TermOp::pad: print_call("pad", t->args, os); return;
    case TermOp::msp: print_call("msp", t->args, os); return;
    case TermOp::smash: print_call("smash", t->args, os); return;
    case TermOp::bit: print_call("bit", t->args, os); return;
    case TermOp::lsp: print_call("lsp", t->args, os); return;
    case TermOp::bhat: print_call("bhat", t->args, os); return;
    case TermOp::cond: print_call("cond", t->args, os); return;
    case TermOp::tmax: print_call("max", t->args, os); return;
    case TermOp::tmin: print_call("min", t->args, os); return;
    case TermOp::tpair: print_call("pair", t->args, os); return;
    case TermOp::ell:
      os << "ell(" << t->eps.to_string() << ", ";
      print_term_to(t->args[0], os);
      os << ')';
      return;
  }
}

// Formula precedence: -> 1, or 2, and 3, not 4, atoms/quantifiers 5.
inline int formula_prec(const FormulaPtr& f) {
  switch (f->op) {
    case FormulaOp::imp: return 1;
    case FormulaOp::forr: return 2;
    case FormulaOp::fand: return 3;
    case FormulaOp::fnot: return 4;
    default: return 5;
  }
}

inline void print_formula_to(const FormulaPtr& f, std::ostream& os);

inline void print_fchild(const FormulaPtr& child, int parent_prec, bool right,
                         std::ostream& os) {
  int cp = formula_prec(child);
  bool parens = cp < parent_prec || (cp == parent_prec && right);
  if (parens) os << '(';
  print_formula_to(child, os);
  if (parens) os << ')';
}

inline void print_formula_to(const FormulaPtr& f, std::ostream& os) {
  switch (f->op) {
    case FormulaOp::eq:
      print_term_to(f->lhs, os);
      os << " = ";
      print_term_to(f->rhs, os);
      return;
    case FormulaOp::leq:
      print_term_to(f->lhs, os);
      os << " <= ";
      print_term_to(f->rhs, os);
      return;
    case FormulaOp::fnot:
      os << "not ";
      print_fchild(f->a, 4, false, os);
      return;
    case FormulaOp::fand:
      print_fchild(f->a, 3, false, os);
      os << " and ";
      print_fchild(f->b, 3, true, os);
      return;
    case FormulaOp::forr:
      print_fchild(f->a, 2, false, os);
      os << " or ";
      print_fchild(f->b, 2, true, os);
      return;
    case FormulaOp::imp:
      print_fchild(f->a, 1, true, os);  // left side of -> needs parens at eq prec
      os << " -> ";
      {
        int cp = formula_prec(f->b);
        bool parens = cp < 1;
        if (parens) os << '(';
        print_formula_to(f->b, os);
        if (parens) os << ')';
      }
      return;
    case FormulaOp::exists:
    case FormulaOp::forall:
      os << (f->op == FormulaOp::exists ? "exists " : "forall ") << f->var
         << " <= ";
      print_term_to(f->bound, os);
      os << " (";
      print_formula_to(f->body, os);
      os << ')';
      return;
  }
}

}  // namespace detail

inline std::string print_term(const TermPtr& t) {
  std::ostringstream os;
  detail::print_term_to(t, os);
  return os.str();
}

inline std::string print_formula(const FormulaPtr& f) {
  std::ostringstream os;
  detail::print_formula_to(f, os);
  return os.str();
}

}  // namespace baw
