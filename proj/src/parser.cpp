#include <cctype>
#include <cstdlib>
#include <set>

#include "ellcone/program.hpp"

namespace ellcone::lang {

namespace {

struct Token {
  enum class Kind { Ident, Number, Punct, End };
  Kind kind = Kind::End;
  std::string text;
  double value = 0.0;
  SourceLoc loc;
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
    skip_ws();
    tok_ = Token{};
    tok_.loc = loc_;
    if (pos_ >= src_.size()) return;
    const char c = src_[pos_];
    if (std::isalpha(unsigned(c)) || c == '_') {
      tok_.kind = Token::Kind::Ident;
      while (pos_ < src_.size() &&
             (std::isalnum(unsigned(src_[pos_])) || src_[pos_] == '_'))
        tok_.text += get();
      return;
    }
    if (std::isdigit(unsigned(c)) ||
        (c == '.' && pos_ + 1 < src_.size() &&
         std::isdigit(unsigned(src_[pos_ + 1])))) {
      // Decimal or hexadecimal floating literal; strtod handles both.
      const char* start = src_.c_str() + pos_;
      char* end = nullptr;
      tok_.value = std::strtod(start, &end);
      if (end == start) throw ProgramParseError(loc_, "malformed number");
      tok_.kind = Token::Kind::Number;
      tok_.text.assign(start, size_t(end - start));
      for (long i = 0; i < end - start; ++i) get();
      return;
    }
    if (c == ':' && pos_ + 1 < src_.size() && src_[pos_ + 1] == '=') {
      tok_.kind = Token::Kind::Punct;
      tok_.text = ":=";
      get();
      get();
      return;
    }
    tok_.kind = Token::Kind::Punct;
    tok_.text = std::string(1, get());
  }

  void skip_ws() {
    while (pos_ < src_.size()) {
      const char c = src_[pos_];
      if (c == '#') {
        while (pos_ < src_.size() && src_[pos_] != '\n') get();
      } else if (std::isspace(unsigned(c))) {
        get();
      } else {
        break;
      }
    }
  }

  char get() {
    const char c = src_[pos_++];
    if (c == '\n') {
      ++loc_.line;
      loc_.col = 1;
    } else {
      ++loc_.col;
    }
    return c;
  }

  const std::string& src_;
  size_t pos_ = 0;
  SourceLoc loc_;
  Token tok_;
};

class Parser {
 public:
  explicit Parser(const std::string& src) : lex_(src) {}

  Program run() {
    Program p;
    while (is_ident("var")) parse_decl(p);
    if (is_ident("init")) parse_init(p);
    while (lex_.peek().kind != Token::Kind::End)
      p.body.push_back(parse_stmt(p));
    p.num_points = next_point_;
    return p;
  }

 private:
  bool is_ident(const char* kw) const {
    return lex_.peek().kind == Token::Kind::Ident && lex_.peek().text == kw;
  }

  Token expect_punct(const std::string& t) {
    Token tok = lex_.take();
    if (tok.kind != Token::Kind::Punct || tok.text != t)
      throw ProgramParseError(tok.loc, "expected '" + t + "'");
    return tok;
  }

  Token expect_ident() {
    Token tok = lex_.take();
    if (tok.kind != Token::Kind::Ident)
      throw ProgramParseError(tok.loc, "expected identifier");
    return tok;
  }

  double expect_number() {
    bool neg = false;
    if (lex_.peek().kind == Token::Kind::Punct && lex_.peek().text == "-") {
      lex_.take();
      neg = true;
    }
    Token tok = lex_.take();
    if (tok.kind != Token::Kind::Number)
      throw ProgramParseError(tok.loc, "expected number");
    return neg ? -tok.value : tok.value;
  }

  void parse_decl(Program& p) {
    lex_.take();  // var
    while (true) {
      Token name = expect_ident();
      if (var_index_.count(name.text))
        throw ProgramParseError(name.loc,
                                "duplicate variable '" + name.text + "'");
      var_index_[name.text] = int(p.vars.size());
      p.vars.push_back(name.text);
      Token sep = lex_.take();
      if (sep.kind == Token::Kind::Punct && sep.text == ",") continue;
      if (sep.kind == Token::Kind::Punct && sep.text == ";") break;
      throw ProgramParseError(sep.loc, "expected ',' or ';'");
    }
  }

  void parse_init(Program& p) {
    Token kw = lex_.take();  // init
    const int n = int(p.vars.size());
    if (n == 0)
      throw ProgramParseError(kw.loc, "init before any variable declaration");
    p.init_lo.resize(n);
    p.init_hi.resize(n);
    if (lex_.peek().kind == Token::Kind::Punct && lex_.peek().text == "(") {
      lex_.take();
      for (int i = 0; i < n; ++i) {
        double v = expect_number();
        p.init_lo[i] = v;
        p.init_hi[i] = v;
        if (i + 1 < n) expect_punct(",");
      }
      expect_punct(")");
    } else {
      for (int i = 0; i < n; ++i) {
        expect_punct("[");
        p.init_lo[i] = expect_number();
        expect_punct(",");
        p.init_hi[i] = expect_number();
        expect_punct("]");
        if (p.init_lo[i] > p.init_hi[i])
          throw ProgramParseError(kw.loc, "empty init box");
      }
    }
    expect_punct(";");
    p.has_init = true;
  }

  Statement parse_stmt(Program& p) {
    if (is_ident("choose")) return parse_choose(p);
    if (is_ident("loop")) return parse_loop(p);
    return parse_assign(p);
  }

  Statement parse_assign(Program& p) {
    Token name = expect_ident();
    auto it = var_index_.find(name.text);
    if (it == var_index_.end())
      throw ProgramParseError(name.loc,
                              "undeclared variable '" + name.text + "'");
    expect_punct(":=");
    const int n = int(p.vars.size());
    Statement s;
    s.kind = Statement::Kind::Assign;
    s.loc = name.loc;
    s.point_id = next_point_++;
    s.A = Eigen::MatrixXd::Identity(n, n);
    s.A.row(it->second).setZero();
    s.b = Eigen::VectorXd::Zero(n);

    // affexpr: [sign] term (('+'|'-') term)*, with
    // term = NUM '*' IDENT | NUM | IDENT.
    double sign = 1.0;
    bool first = true;
    while (true) {
      if (first && lex_.peek().kind == Token::Kind::Punct &&
          (lex_.peek().text == "-" || lex_.peek().text == "+")) {
        sign = lex_.take().text == "-" ? -1.0 : 1.0;
      }
      first = false;
      Token t = lex_.take();
      if (t.kind == Token::Kind::Number) {
        if (lex_.peek().kind == Token::Kind::Punct &&
            lex_.peek().text == "*") {
          lex_.take();
          Token v = expect_ident();
          auto vi = var_index_.find(v.text);
          if (vi == var_index_.end())
            throw ProgramParseError(v.loc,
                                    "undeclared variable '" + v.text + "'");
          s.A(it->second, vi->second) += sign * t.value;
        } else {
          s.b[it->second] += sign * t.value;
        }
      } else if (t.kind == Token::Kind::Ident) {
        auto vi = var_index_.find(t.text);
        if (vi == var_index_.end())
          throw ProgramParseError(t.loc,
                                  "undeclared variable '" + t.text + "'");
        s.A(it->second, vi->second) += sign;
      } else {
        throw ProgramParseError(t.loc, "expected term");
      }
      Token sep = lex_.take();
      if (sep.kind == Token::Kind::Punct && sep.text == ";") break;
      if (sep.kind == Token::Kind::Punct &&
          (sep.text == "+" || sep.text == "-")) {
        sign = sep.text == "-" ? -1.0 : 1.0;
        continue;
      }
      throw ProgramParseError(sep.loc, "expected '+', '-' or ';'");
    }
    return s;
  }

  Statement parse_choose(Program& p) {
    Token kw = lex_.take();
    Statement s;
    s.kind = Statement::Kind::Choose;
    s.loc = kw.loc;
    s.point_id = next_point_++;
    expect_punct("{");
    std::vector<Statement> block;
    while (true) {
      const Token& t = lex_.peek();
      if (t.kind == Token::Kind::Punct && (t.text == "|" || t.text == "}")) {
        s.branches.push_back(std::move(block));
        block.clear();
        if (lex_.take().text == "}") break;
        continue;
      }
      if (t.kind == Token::Kind::End)
        throw ProgramParseError(t.loc, "unterminated choose");
      block.push_back(parse_stmt(p));
    }
    return s;
  }

  Statement parse_loop(Program& p) {
    Token kw = lex_.take();
    Statement s;
    s.kind = Statement::Kind::Loop;
    s.loc = kw.loc;
    s.point_id = next_point_++;
    Token name = expect_ident();
    if (var_index_.count(name.text))
      throw ProgramParseError(
          name.loc, "counter '" + name.text + "' shadows a variable");
    if (counters_.count(name.text))
      throw ProgramParseError(name.loc,
                              "duplicate counter '" + name.text + "'");
    counters_.insert(name.text);
    s.counter = name.text;
    if (is_ident("to")) {
      lex_.take();
      s.bound = expect_number();
    }
    expect_punct("{");
    while (true) {
      const Token& t = lex_.peek();
      if (t.kind == Token::Kind::Punct && t.text == "}") {
        lex_.take();
        break;
      }
      if (t.kind == Token::Kind::End)
        throw ProgramParseError(t.loc, "unterminated loop");
      s.body.push_back(parse_stmt(p));
    }
    if (s.body.empty()) {
      Statement nop;
      nop.kind = Statement::Kind::Nop;
      nop.loc = s.loc;
      nop.point_id = next_point_++;
      s.body.push_back(std::move(nop));
    }
    return s;
  }

  Lexer lex_;
  std::map<std::string, int> var_index_;
  std::set<std::string> counters_;
  int next_point_ = 0;
};

void collect_counters(const std::vector<Statement>& stmts, double horizon,
                      std::map<std::string, CounterInterval>& out) {
  for (const Statement& s : stmts) {
    switch (s.kind) {
      case Statement::Kind::Loop: {
        CounterInterval ci;
        ci.lo = 0.0;
        if (s.bound) {
          ci.hi = *s.bound;
        } else {
          ci.hi = horizon;
          ci.horizon_relative = true;
        }
        out[s.counter] = ci;
        collect_counters(s.body, horizon, out);
        break;
      }
      case Statement::Kind::Choose:
        for (const auto& b : s.branches) collect_counters(b, horizon, out);
        break;
      default:
        break;
    }
  }
}

}  // namespace

Program parse(const std::string& text) { return Parser(text).run(); }

std::map<std::string, CounterInterval> counter_intervals(const Program& p,
                                                         double horizon) {
  std::map<std::string, CounterInterval> out;
  collect_counters(p.body, horizon, out);
  return out;
}

}  // namespace ellcone::lang
