#include <cctype>
#include <charconv>
#include <limits>
#include <set>

#include "qpa/errors.hpp"
#include "qpa/program.hpp"

namespace qpa {

namespace {

enum class Tok { Ident, Number, Punct, End };

struct Token {
  Tok kind = Tok::End;
  std::string text;
  std::uint64_t number = 0;
  int line = 1;
  int col = 1;
};

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    for (;;) {
      skip_space();
      Token t;
      t.line = line_;
      t.col = col_;
      if (pos_ >= src_.size()) {
        out.push_back(t);
        return out;
      }
      char c = src_[pos_];
      if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        std::size_t start = pos_;
        while (pos_ < src_.size() &&
               (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
          advance();
        t.kind = Tok::Ident;
        t.text = std::string(src_.substr(start, pos_ - start));
      } else if (std::isdigit(static_cast<unsigned char>(c))) {
        lex_number(t);
      } else {
        static constexpr std::string_view two[] = {"==", "!=", "<=", ">=", "<<", ">>", "&&", "||"};
        t.kind = Tok::Punct;
        for (std::string_view op : two)
          if (src_.substr(pos_, 2) == op) t.text = std::string(op);
        if (t.text.empty()) {
          if (std::string_view("(){};:=+-*%&|^~!<>").find(c) == std::string_view::npos)
            throw ParseError(line_, col_, std::string("unexpected character '") + c + "'");
          t.text = std::string(1, c);
        }
        for (std::size_t i = 0; i < t.text.size(); ++i) advance();
      }
      out.push_back(std::move(t));
    }
  }

 private:
  void advance() {
    if (src_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }

  void skip_space() {
    while (pos_ < src_.size()) {
      char c = src_[pos_];
      if (std::isspace(static_cast<unsigned char>(c))) {
        advance();
      } else if (c == '#' || src_.substr(pos_, 2) == "//") {
        while (pos_ < src_.size() && src_[pos_] != '\n') advance();
      } else {
        break;
      }
    }
  }

  void lex_number(Token& t) {
    int base = 10;
    std::size_t start = pos_;
    if (src_.substr(pos_, 2) == "0x" || src_.substr(pos_, 2) == "0X") {
      base = 16;
      advance();
      advance();
      start = pos_;
    }
    while (pos_ < src_.size() && std::isalnum(static_cast<unsigned char>(src_[pos_]))) advance();
    std::string_view digits = src_.substr(start, pos_ - start);
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), t.number, base);
    if (digits.empty() || ec != std::errc() || ptr != digits.data() + digits.size())
      throw ParseError(t.line, t.col, "malformed number '" + std::string(digits) + "'");
    t.kind = Tok::Number;
    t.text = std::string(digits);
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
};

// Untyped expression tree; literal widths are inferred when typing.
struct PExpr {
  enum Kind { Num, Var, Unary, Binary } kind;
  std::string op;
  std::uint64_t value = 0;
  std::string name;
  std::vector<PExpr> kids;
  int line = 0;
  int col = 0;
};

const std::set<std::string> kKeywords = {"input", "var", "if", "else", "repeat", "weight", "return"};

class Parser {
 public:
  Parser(std::vector<Token> toks, SourceProgram& prog) : toks_(std::move(toks)), prog_(prog) {}

  void program() {
    auto inputs = std::make_shared<InputSpace>();
    inputs_ = inputs.get();
    prog_.inputs = inputs;
    prog_.body = block_body(/*top=*/true);
    expect_end();
  }

  BVExpr standalone_expression() {
    PExpr p = expr();
    expect_end();
    return type(p, std::nullopt);
  }

 private:
  const Token& peek(std::size_t k = 0) const { return toks_[std::min(pos_ + k, toks_.size() - 1)]; }
  bool at_punct(std::string_view p) const { return peek().kind == Tok::Punct && peek().text == p; }
  bool at_keyword(std::string_view k) const { return peek().kind == Tok::Ident && peek().text == k; }

  [[noreturn]] void fail(const Token& t, const std::string& msg) const {
    throw ParseError(t.line, t.col, msg);
  }

  Token take() { return toks_[pos_ < toks_.size() - 1 ? pos_++ : pos_]; }

  void expect_punct(std::string_view p) {
    if (!at_punct(p)) fail(peek(), "expected '" + std::string(p) + "'" + found());
    take();
  }

  void expect_end() {
    if (peek().kind != Tok::End) fail(peek(), "unexpected" + found());
  }

  std::string found() const {
    const Token& t = peek();
    if (t.kind == Tok::End) return ", found end of input";
    return ", found '" + t.text + "'";
  }

  Token identifier() {
    if (peek().kind != Tok::Ident || kKeywords.count(peek().text))
      fail(peek(), "expected identifier" + found());
    return take();
  }

  std::uint64_t literal(const char* what) {
    if (peek().kind != Tok::Number) fail(peek(), std::string(what) + " must be an integer literal" + found());
    return take().number;
  }

  std::vector<Stmt> block_body(bool top) {
    std::vector<Stmt> body;
    bool returned = false;
    while (peek().kind != Tok::End && !(!top && at_punct("}"))) {
      const Token& start = peek();
      if (returned) fail(start, "return must be the final statement");
      if (at_keyword("input") || at_keyword("var")) {
        if (!top) fail(start, "declarations are only allowed at top level");
        declaration(body);
        continue;
      }
      if (at_keyword("return") && !top) fail(start, "return must be the final statement");
      Stmt s = statement();
      returned = std::holds_alternative<ReturnStmt>(s.node);
      body.push_back(std::move(s));
    }
    return body;
  }

  std::vector<Stmt> braced() {
    expect_punct("{");
    std::vector<Stmt> body = block_body(false);
    expect_punct("}");
    return body;
  }

  void declaration(std::vector<Stmt>& body) {
    bool is_input = take().text == "input";
    Token name = identifier();
    expect_punct(":");
    Token wtok = peek();
    std::uint64_t width = literal("width");
    if (width == 0 || width > kMaxWidth)
      fail(wtok, "width must be between 1 and " + std::to_string(kMaxWidth));
    if (prog_.find(name.text)) fail(name, "duplicate declaration of '" + name.text + "'");
    VarDecl d;
    d.name = name.text;
    d.width = static_cast<unsigned>(width);
    d.is_input = is_input;
    d.slot = prog_.vars.size();
    d.line = name.line;
    if (is_input) d.input_index = inputs_->add(d.name, d.width);
    prog_.vars.push_back(d);
    if (!is_input && at_punct("=")) {
      take();
      PExpr rhs = expr();
      body.push_back(Stmt{AssignStmt{d.slot, d.name, type_assign(rhs, d)}, name.line});
    }
    expect_punct(";");
  }

  Stmt statement() {
    const Token start = peek();
    if (at_keyword("if")) return if_statement();
    if (at_keyword("repeat")) {
      take();
      if (peek().kind != Tok::Number) fail(peek(), "repeat bound must be an integer literal" + found());
      std::uint64_t n = take().number;
      return Stmt{RepeatStmt{n, braced()}, start.line};
    }
    if (at_keyword("weight")) {
      take();
      Token t = peek();
      std::uint64_t k = literal("weight");
      if (k > static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max() / 4))
        fail(t, "weight too large");
      expect_punct(";");
      return Stmt{WeightStmt{static_cast<std::int64_t>(k)}, start.line};
    }
    if (at_keyword("return")) {
      take();
      PExpr v = expr();
      expect_punct(";");
      return Stmt{ReturnStmt{type(v, std::nullopt)}, start.line};
    }
    if (at_keyword("else")) fail(start, "'else' without 'if'");
    Token name = identifier();
    const VarDecl* d = prog_.find(name.text);
    if (!d) fail(name, "undeclared identifier '" + name.text + "'");
    expect_punct("=");
    PExpr rhs = expr();
    expect_punct(";");
    return Stmt{AssignStmt{d->slot, d->name, type_assign(rhs, *d)}, start.line};
  }

  Stmt if_statement() {
    const Token start = take();
    expect_punct("(");
    PExpr c = expr();
    expect_punct(")");
    IfStmt s{type_bool(c), braced(), {}};
    if (at_keyword("else")) {
      take();
      if (at_keyword("if")) s.else_body.push_back(if_statement());
      else s.else_body = braced();
    }
    return Stmt{std::move(s), start.line};
  }

  // Precedence climbing, C-style levels.
  static int precedence(const std::string& op) {
    if (op == "||") return 1;
    if (op == "&&") return 2;
    if (op == "|") return 3;
    if (op == "^") return 4;
    if (op == "&") return 5;
    if (op == "==" || op == "!=") return 6;
    if (op == "<" || op == "<=" || op == ">" || op == ">=") return 7;
    if (op == "<<" || op == ">>") return 8;
    if (op == "+" || op == "-") return 9;
    if (op == "*" || op == "%") return 10;
    return 0;
  }

  PExpr expr(int min_prec = 1) {
    PExpr lhs = unary();
    for (;;) {
      if (peek().kind != Tok::Punct) break;
      int prec = precedence(peek().text);
      if (prec < min_prec || prec == 0) break;
      Token op = take();
      PExpr rhs = expr(prec + 1);
      PExpr b{PExpr::Binary, op.text, 0, {}, {}, op.line, op.col};
      b.kids.push_back(std::move(lhs));
      b.kids.push_back(std::move(rhs));
      lhs = std::move(b);
    }
    return lhs;
  }

  PExpr unary() {
    const Token t = peek();
    if (t.kind == Tok::Punct && (t.text == "~" || t.text == "!" || t.text == "-")) {
      take();
      PExpr u{PExpr::Unary, t.text, 0, {}, {}, t.line, t.col};
      u.kids.push_back(unary());
      return u;
    }
    if (t.kind == Tok::Number) {
      take();
      return PExpr{PExpr::Num, {}, t.number, {}, {}, t.line, t.col};
    }
    if (t.kind == Tok::Ident && !kKeywords.count(t.text)) {
      take();
      return PExpr{PExpr::Var, {}, 0, t.text, {}, t.line, t.col};
    }
    if (at_punct("(")) {
      take();
      PExpr e = expr();
      expect_punct(")");
      return e;
    }
    fail(t, "expected expression" + found());
  }

  // ---- typing ----

  [[noreturn]] void fail_at(const PExpr& p, const std::string& msg) const {
    throw ParseError(p.line, p.col, msg);
  }

  const VarDecl& lookup(const PExpr& p) const {
    const VarDecl* d = prog_.find(p.name);
    if (!d) fail_at(p, "undeclared identifier '" + p.name + "'");
    return *d;
  }

  static bool is_relational(const std::string& op) {
    return op == "==" || op == "!=" || op == "<" || op == "<=" || op == ">" || op == ">=";
  }
  static bool is_logical(const std::string& op) { return op == "&&" || op == "||"; }

  std::optional<unsigned> natural_width(const PExpr& p) const {
    switch (p.kind) {
      case PExpr::Num: return std::nullopt;
      case PExpr::Var: return lookup(p).width;
      case PExpr::Unary: return p.op == "!" ? std::optional<unsigned>(1) : natural_width(p.kids[0]);
      case PExpr::Binary:
        if (is_relational(p.op) || is_logical(p.op)) return 1;
        if (auto w = natural_width(p.kids[0])) return w;
        return natural_width(p.kids[1]);
    }
    return std::nullopt;
  }

  BVExpr wrap(const PExpr& p, auto&& build) const {
    try {
      return build();
    } catch (const ParseError&) {
      throw;
    } catch (const StructuralError& e) {
      fail_at(p, e.what());
    }
  }

  BVExpr type(const PExpr& p, std::optional<unsigned> expected) const {
    switch (p.kind) {
      case PExpr::Num: {
        unsigned w = expected.value_or(kMaxWidth);
        if (p.value > width_mask(w))
          fail_at(p, "literal " + std::to_string(p.value) + " does not fit in " + std::to_string(w) + " bits");
        return BVExpr::constant(p.value, w);
      }
      case PExpr::Var: {
        const VarDecl& d = lookup(p);
        if (expected && *expected != d.width)
          fail_at(p, "'" + d.name + "' has width " + std::to_string(d.width) + ", expected " +
                         std::to_string(*expected));
        return BVExpr::local(d.slot, d.name, d.width);
      }
      case PExpr::Unary: {
        if (p.op == "!") {
          BVExpr a = type_bool(p.kids[0]);
          return wrap(p, [&] { return BVExpr::unary(Op::LNot, a); });
        }
        std::optional<unsigned> w = natural_width(p.kids[0]);
        if (!w) w = expected;
        BVExpr a = type(p.kids[0], w);
        if (p.op == "~") return wrap(p, [&] { return BVExpr::unary(Op::Not, a); });
        return wrap(p, [&] { return BVExpr::binary(Op::Sub, BVExpr::constant(0, a.width()), a); });
      }
      case PExpr::Binary: break;
    }
    const std::string& op = p.op;
    if (is_logical(op)) {
      BVExpr a = type_bool(p.kids[0]);
      BVExpr b = type_bool(p.kids[1]);
      return wrap(p, [&] { return BVExpr::binary(op == "&&" ? Op::LAnd : Op::LOr, a, b); });
    }
    std::optional<unsigned> w = natural_width(p.kids[0]);
    if (!w) w = natural_width(p.kids[1]);
    if (!w && !is_relational(op)) w = expected;
    if (!w) w = kMaxWidth;
    BVExpr a = type(p.kids[0], w);
    BVExpr b = type(p.kids[1], w);
    return wrap(p, [&] {
      if (op == "==") return BVExpr::binary(Op::Eq, a, b);
      if (op == "!=") return BVExpr::binary(Op::Ne, a, b);
      if (op == "<") return BVExpr::binary(Op::Ult, a, b);
      if (op == ">") return BVExpr::binary(Op::Ult, b, a);
      if (op == "<=") return BVExpr::unary(Op::LNot, BVExpr::binary(Op::Ult, b, a));
      if (op == ">=") return BVExpr::unary(Op::LNot, BVExpr::binary(Op::Ult, a, b));
      static const std::map<std::string, Op> arith = {
          {"&", Op::And}, {"|", Op::Or},  {"^", Op::Xor},   {"+", Op::Add},  {"-", Op::Sub},
          {"*", Op::Mul}, {"%", Op::Urem}, {"<<", Op::Shl}, {">>", Op::Lshr}};
      return BVExpr::binary(arith.at(op), a, b);
    });
  }

  // Conditions: width-1 expressions as-is, anything else compared against 0.
  BVExpr type_bool(const PExpr& p) const {
    if (p.kind == PExpr::Num) return BVExpr::truth(p.value != 0);
    BVExpr e = type(p, std::nullopt);
    if (e.width() == 1) return e;
    return wrap(p, [&] { return BVExpr::binary(Op::Ne, e, BVExpr::constant(0, e.width())); });
  }

  BVExpr type_assign(const PExpr& p, const VarDecl& target) const {
    BVExpr e = type(p, target.width);
    if (e.width() != target.width)
      fail_at(p, "cannot assign a " + std::to_string(e.width()) + "-bit value to '" + target.name +
                     "' (" + std::to_string(target.width) + " bits)");
    return e;
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  SourceProgram& prog_;
  InputSpace* inputs_ = nullptr;
};

}  // namespace

SourceProgram parse(std::string_view text) {
  SourceProgram prog;
  Parser parser(Lexer(text).run(), prog);
  parser.program();
  return prog;
}

BVExpr parse_expression(std::string_view text, const SourceProgram& scope) {
  SourceProgram copy = scope;
  Parser parser(Lexer(text).run(), copy);
  return parser.standalone_expression();
}

}  // namespace qpa
