#include <cctype>
#include <memory>
#include <optional>

#include "dlint/errors.hpp"
#include "dlint/script.hpp"

namespace dlint {

namespace {

// ---------------------------------------------------------------------------
// Tokenizer
// ---------------------------------------------------------------------------

enum class Tok { Name, Number, String, Op, Newline, Indent, Dedent, End };

struct Token {
  Tok kind = Tok::End;
  std::string text;
  std::int64_t int_val = 0;
  double float_val = 0;
  bool is_float = false;
  int line = 0;
};

bool is_ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool is_ident(char c) { return is_ident_start(c) || std::isdigit(static_cast<unsigned char>(c)); }

bool string_prefix(const std::string& s) {
  if (s.empty() || s.size() > 2) return false;
  for (char c : s) {
    char l = char(std::tolower(static_cast<unsigned char>(c)));
    if (l != 'r' && l != 'b' && l != 'u' && l != 'f') return false;
  }
  return true;
}

class Tokenizer {
 public:
  explicit Tokenizer(const std::string& text) : text_(text) { indents_.push_back(0); }

  std::vector<Token> run() {
    std::vector<Token> out;
    bool line_start = true;
    while (pos_ <= text_.size()) {
      if (pos_ == text_.size()) {
        if (!out.empty() && out.back().kind != Tok::Newline) emit(out, Tok::Newline, "\n");
        while (indents_.back() > 0) {
          indents_.pop_back();
          emit(out, Tok::Dedent, "");
        }
        emit(out, Tok::End, "");
        break;
      }
      if (line_start && depth_ == 0) {
        size_t col = measure_indent();
        if (pos_ == text_.size()) continue;
        char c = text_[pos_];
        if (c == '\n') {  // blank line
          ++pos_;
          ++line_;
          continue;
        }
        if (c == '#') {
          skip_to_eol();
          continue;
        }
        handle_indent(out, col);
        line_start = false;
        continue;
      }
      char c = text_[pos_];
      if (c == '\n') {
        ++pos_;
        ++line_;
        if (depth_ == 0) {
          emit(out, Tok::Newline, "\n", line_ - 1);
          line_start = true;
        }
        continue;
      }
      if (c == ' ' || c == '\t' || c == '\r') {
        ++pos_;
        continue;
      }
      if (c == '#') {
        skip_to_eol();
        continue;
      }
      if (c == '\\' && pos_ + 1 < text_.size() && (text_[pos_ + 1] == '\n' || text_[pos_ + 1] == '\r')) {
        pos_ += text_[pos_ + 1] == '\r' ? 3 : 2;
        ++line_;
        continue;
      }
      if (is_ident_start(c)) {
        size_t start = pos_;
        while (pos_ < text_.size() && is_ident(text_[pos_])) ++pos_;
        std::string name = text_.substr(start, pos_ - start);
        if (pos_ < text_.size() && (text_[pos_] == '\'' || text_[pos_] == '"') &&
            string_prefix(name)) {
          read_string(out);
          continue;
        }
        emit(out, Tok::Name, name);
        continue;
      }
      if (std::isdigit(static_cast<unsigned char>(c)) ||
          (c == '.' && pos_ + 1 < text_.size() &&
           std::isdigit(static_cast<unsigned char>(text_[pos_ + 1])))) {
        read_number(out);
        continue;
      }
      if (c == '\'' || c == '"') {
        read_string(out);
        continue;
      }
      read_op(out);
    }
    return out;
  }

 private:
  void emit(std::vector<Token>& out, Tok k, std::string text, int line = -1) {
    Token t;
    t.kind = k;
    t.text = std::move(text);
    t.line = line < 0 ? line_ : line;
    out.push_back(std::move(t));
  }

  size_t measure_indent() {
    size_t col = 0;
    while (pos_ < text_.size()) {
      char c = text_[pos_];
      if (c == ' ') {
        ++col;
        ++pos_;
      } else if (c == '\t') {
        col += 8 - col % 8;
        ++pos_;
      } else {
        break;
      }
    }
    return col;
  }

  void handle_indent(std::vector<Token>& out, size_t col) {
    if (col > indents_.back()) {
      indents_.push_back(col);
      emit(out, Tok::Indent, "");
      return;
    }
    while (col < indents_.back()) {
      indents_.pop_back();
      emit(out, Tok::Dedent, "");
    }
    if (col != indents_.back()) throw SyntaxError("inconsistent indentation", line_);
  }

  void skip_to_eol() {
    while (pos_ < text_.size() && text_[pos_] != '\n') ++pos_;
  }

  void read_number(std::vector<Token>& out) {
    size_t start = pos_;
    bool is_float = false;
    if (text_.compare(pos_, 2, "0x") == 0 || text_.compare(pos_, 2, "0X") == 0) {
      pos_ += 2;
      while (pos_ < text_.size() && std::isxdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
      Token t;
      t.kind = Tok::Number;
      t.text = text_.substr(start, pos_ - start);
      t.int_val = std::strtoll(t.text.c_str(), nullptr, 16);
      t.line = line_;
      out.push_back(std::move(t));
      return;
    }
    while (pos_ < text_.size() &&
           (std::isdigit(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
      ++pos_;
    if (pos_ < text_.size() && text_[pos_] == '.') {
      is_float = true;
      ++pos_;
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }
    if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
      size_t save = pos_;
      ++pos_;
      if (pos_ < text_.size() && (text_[pos_] == '+' || text_[pos_] == '-')) ++pos_;
      if (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
        is_float = true;
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
      } else {
        pos_ = save;
      }
    }
    Token t;
    t.kind = Tok::Number;
    t.text = text_.substr(start, pos_ - start);
    std::string digits;
    for (char c : t.text)
      if (c != '_') digits += c;
    t.is_float = is_float;
    if (is_float)
      t.float_val = std::strtod(digits.c_str(), nullptr);
    else
      t.int_val = std::strtoll(digits.c_str(), nullptr, 10);
    t.line = line_;
    out.push_back(std::move(t));
  }

  void read_string(std::vector<Token>& out) {
    char quote = text_[pos_];
    int start_line = line_;
    bool triple = text_.compare(pos_, 3, std::string(3, quote)) == 0;
    pos_ += triple ? 3 : 1;
    std::string value;
    while (pos_ < text_.size()) {
      char c = text_[pos_];
      if (c == '\\' && pos_ + 1 < text_.size()) {
        char e = text_[pos_ + 1];
        switch (e) {
          case 'n': value += '\n'; break;
          case 't': value += '\t'; break;
          case '\\': value += '\\'; break;
          case '\'': value += '\''; break;
          case '"': value += '"'; break;
          case '\n': ++line_; break;
          default: value += e;
        }
        pos_ += 2;
        continue;
      }
      if (triple) {
        if (c == quote && text_.compare(pos_, 3, std::string(3, quote)) == 0) {
          pos_ += 3;
          Token t;
          t.kind = Tok::String;
          t.text = std::move(value);
          t.line = start_line;
          out.push_back(std::move(t));
          return;
        }
        if (c == '\n') ++line_;
        value += c;
        ++pos_;
        continue;
      }
      if (c == quote) {
        ++pos_;
        Token t;
        t.kind = Tok::String;
        t.text = std::move(value);
        t.line = start_line;
        out.push_back(std::move(t));
        return;
      }
      if (c == '\n') throw SyntaxError("unterminated string literal", start_line);
      value += c;
      ++pos_;
    }
    throw SyntaxError("unterminated string literal", start_line);
  }

  void read_op(std::vector<Token>& out) {
    static const char* two_char[] = {"**", "//", "==", "!=", "<=", ">=", "->", "+=", "-=", "*=", "/="};
    char c = text_[pos_];
    for (const char* op : two_char) {
      if (text_.compare(pos_, 2, op) == 0) {
        emit(out, Tok::Op, op);
        pos_ += 2;
        return;
      }
    }
    static const std::string singles = "()[]{},:.=+-*/%<>@";
    if (singles.find(c) == std::string::npos)
      throw SyntaxError(std::string("unexpected character '") + c + "'", line_);
    if (c == '(' || c == '[' || c == '{') ++depth_;
    if (c == ')' || c == ']' || c == '}') depth_ = depth_ > 0 ? depth_ - 1 : 0;
    emit(out, Tok::Op, std::string(1, c));
    ++pos_;
  }

  const std::string& text_;
  size_t pos_ = 0;
  int line_ = 1;
  int depth_ = 0;
  std::vector<size_t> indents_;
};

// ---------------------------------------------------------------------------
// AST
// ---------------------------------------------------------------------------

struct Expr;
using ExprPtr = std::unique_ptr<Expr>;

struct Expr {
  enum class Kind {
    Int, Float, Str, Bool, None, Name, Attribute, Call, Tuple, List, Dict,
    BinOp, UnaryOp, Subscript
  };
  Kind kind = Kind::None;
  std::int64_t int_val = 0;
  double float_val = 0;
  bool bool_val = false;
  std::string str_val;
  std::string name;  // Name id / Attribute member
  ExprPtr base;      // Attribute/Call/Subscript base, UnaryOp/BinOp left
  ExprPtr rhs;       // BinOp right
  char op = 0;
  std::vector<ExprPtr> elts;
  std::vector<std::pair<std::string, ExprPtr>> kwargs;
  int line = 0;
};

struct Stmt {
  enum class Kind { Assign, ExprStmt, For, Import, FromImport, Def, Return, With, Pass };
  Kind kind = Kind::Pass;
  std::vector<ExprPtr> targets;
  ExprPtr value;
  std::string name;  // for-loop variable / def name / with as-name
  std::vector<std::pair<std::string, std::string>> imports;  // (dotted, asname)
  bool wildcard = false;
  std::string module;  // FromImport module
  std::vector<Stmt> body;
  std::vector<std::string> params;
  int line = 0;
};

class Parser {
 public:
  explicit Parser(std::vector<Token> toks) : toks_(std::move(toks)) {}

  std::vector<Stmt> parse_module() {
    std::vector<Stmt> stmts;
    skip_newlines();
    while (!at(Tok::End)) {
      stmts.push_back(parse_statement());
      skip_newlines();
    }
    return stmts;
  }

 private:
  const Token& cur() const { return toks_[pos_]; }
  const Token& peek(size_t n = 1) const {
    size_t i = pos_ + n;
    return i < toks_.size() ? toks_[i] : toks_.back();
  }
  bool at(Tok k) const { return cur().kind == k; }
  bool at_op(const char* s) const { return cur().kind == Tok::Op && cur().text == s; }
  bool at_name(const char* s) const { return cur().kind == Tok::Name && cur().text == s; }
  Token take() { return toks_[pos_++]; }
  void expect_op(const char* s) {
    if (!at_op(s)) throw SyntaxError(std::string("expected '") + s + "'", cur().line);
    ++pos_;
  }
  void skip_newlines() {
    while (at(Tok::Newline)) ++pos_;
  }
  void end_statement() {
    if (at(Tok::Newline)) {
      ++pos_;
      return;
    }
    if (at(Tok::End) || at(Tok::Dedent)) return;
    throw SyntaxError("unexpected trailing tokens", cur().line);
  }

  std::vector<Stmt> parse_suite() {
    expect_op(":");
    std::vector<Stmt> body;
    if (!at(Tok::Newline)) {  // single-line suite
      body.push_back(parse_statement());
      return body;
    }
    ++pos_;
    skip_newlines();
    if (!at(Tok::Indent)) throw SyntaxError("expected an indented block", cur().line);
    ++pos_;
    skip_newlines();
    while (!at(Tok::Dedent) && !at(Tok::End)) {
      body.push_back(parse_statement());
      skip_newlines();
    }
    if (at(Tok::Dedent)) ++pos_;
    return body;
  }

  Stmt parse_statement() {
    int line = cur().line;
    if (at_name("import")) return parse_import();
    if (at_name("from")) return parse_from_import();
    if (at_name("for")) return parse_for();
    if (at_name("def")) return parse_def();
    if (at_name("with")) return parse_with();
    if (at_name("pass")) {
      ++pos_;
      end_statement();
      Stmt s;
      s.kind = Stmt::Kind::Pass;
      s.line = line;
      return s;
    }
    if (at_name("return")) {
      ++pos_;
      Stmt s;
      s.kind = Stmt::Kind::Return;
      s.line = line;
      if (!at(Tok::Newline) && !at(Tok::End) && !at(Tok::Dedent)) s.value = parse_testlist();
      end_statement();
      return s;
    }
    if (cur().kind == Tok::Name &&
        (cur().text == "if" || cur().text == "while" || cur().text == "class" ||
         cur().text == "try" || cur().text == "elif" || cur().text == "else" ||
         cur().text == "except" || cur().text == "finally" || cur().text == "lambda" ||
         cur().text == "global" || cur().text == "print" || cur().text == "assert" ||
         cur().text == "del" || cur().text == "raise" || cur().text == "yield")) {
      // `print` is an ordinary call in the supported dialect; everything else
      // here is outside the subset.
      if (cur().text != "print")
        throw SyntaxError("unsupported statement '" + cur().text + "'", line);
    }
    ExprPtr first = parse_testlist();
    if (at_op("=")) {
      Stmt s;
      s.kind = Stmt::Kind::Assign;
      s.line = line;
      s.targets.push_back(std::move(first));
      ++pos_;
      ExprPtr value = parse_testlist();
      while (at_op("=")) {  // chained targets
        ++pos_;
        s.targets.push_back(std::move(value));
        value = parse_testlist();
      }
      s.value = std::move(value);
      end_statement();
      return s;
    }
    if (at_op("+=") || at_op("-=") || at_op("*=") || at_op("/=")) {
      // Augmented assignment: value becomes unresolvable, which is fine.
      ++pos_;
      ExprPtr rhs = parse_testlist();
      Stmt s;
      s.kind = Stmt::Kind::Assign;
      s.line = line;
      s.targets.push_back(std::move(first));
      s.value = std::move(rhs);
      // Mark as augmented by wrapping in an opaque binop with op '?'.
      auto wrap = std::make_unique<Expr>();
      wrap->kind = Expr::Kind::BinOp;
      wrap->op = '?';
      wrap->line = line;
      wrap->base = nullptr;
      wrap->rhs = std::move(s.value);
      s.value = std::move(wrap);
      end_statement();
      return s;
    }
    Stmt s;
    s.kind = Stmt::Kind::ExprStmt;
    s.line = line;
    s.value = std::move(first);
    end_statement();
    return s;
  }

  Stmt parse_import() {
    Stmt s;
    s.kind = Stmt::Kind::Import;
    s.line = cur().line;
    ++pos_;
    while (true) {
      std::string dotted = parse_dotted_name();
      std::string as = dotted.substr(0, dotted.find('.'));
      if (at_name("as")) {
        ++pos_;
        as = take().text;
      }
      s.imports.emplace_back(dotted, as);
      if (at_op(",")) {
        ++pos_;
        continue;
      }
      break;
    }
    end_statement();
    return s;
  }

  Stmt parse_from_import() {
    Stmt s;
    s.kind = Stmt::Kind::FromImport;
    s.line = cur().line;
    ++pos_;
    s.module = parse_dotted_name();
    if (!at_name("import")) throw SyntaxError("expected 'import'", cur().line);
    ++pos_;
    if (at_op("*")) {
      ++pos_;
      s.wildcard = true;
      end_statement();
      return s;
    }
    bool parens = at_op("(");
    if (parens) ++pos_;
    while (true) {
      if (cur().kind != Tok::Name) throw SyntaxError("expected a name", cur().line);
      std::string what = take().text;
      std::string as = what;
      if (at_name("as")) {
        ++pos_;
        as = take().text;
      }
      s.imports.emplace_back(what, as);
      if (at_op(",")) {
        ++pos_;
        continue;
      }
      break;
    }
    if (parens) expect_op(")");
    end_statement();
    return s;
  }

  std::string parse_dotted_name() {
    if (cur().kind != Tok::Name) throw SyntaxError("expected a module name", cur().line);
    std::string out = take().text;
    while (at_op(".")) {
      ++pos_;
      if (cur().kind != Tok::Name) throw SyntaxError("expected a name after '.'", cur().line);
      out += "." + take().text;
    }
    return out;
  }

  Stmt parse_for() {
    Stmt s;
    s.kind = Stmt::Kind::For;
    s.line = cur().line;
    ++pos_;
    // Loop target: a name or a (possibly nested) tuple of names.
    ExprPtr target = parse_testlist();
    if (target->kind == Expr::Kind::Name) {
      s.name = target->name;
    } else {
      s.name = "";  // tuple target: variables stay unknown
      collect_names(*target, s.params);
    }
    if (!at_name("in")) throw SyntaxError("expected 'in'", cur().line);
    ++pos_;
    s.value = parse_testlist();
    s.body = parse_suite();
    return s;
  }

  static void collect_names(const Expr& e, std::vector<std::string>& out) {
    if (e.kind == Expr::Kind::Name) out.push_back(e.name);
    for (const ExprPtr& c : e.elts)
      if (c) collect_names(*c, out);
  }

  Stmt parse_def() {
    Stmt s;
    s.kind = Stmt::Kind::Def;
    s.line = cur().line;
    ++pos_;
    if (cur().kind != Tok::Name) throw SyntaxError("expected a function name", cur().line);
    s.name = take().text;
    expect_op("(");
    while (!at_op(")")) {
      if (cur().kind != Tok::Name) throw SyntaxError("unsupported parameter form", cur().line);
      s.params.push_back(take().text);
      if (at_op("=")) {  // default value; evaluated lazily at the call
        ++pos_;
        parse_test();
      }
      if (at_op(",")) ++pos_;
    }
    expect_op(")");
    s.body = parse_suite();
    return s;
  }

  Stmt parse_with() {
    Stmt s;
    s.kind = Stmt::Kind::With;
    s.line = cur().line;
    ++pos_;
    s.value = parse_test();
    if (at_name("as")) {
      ++pos_;
      if (cur().kind != Tok::Name) throw SyntaxError("expected a name after 'as'", cur().line);
      s.name = take().text;
    }
    s.body = parse_suite();
    return s;
  }

  // testlist: test (',' test)* — a bare comma sequence makes a tuple.
  ExprPtr parse_testlist() {
    ExprPtr first = parse_test();
    if (!at_op(",")) return first;
    auto tuple = std::make_unique<Expr>();
    tuple->kind = Expr::Kind::Tuple;
    tuple->line = first->line;
    tuple->elts.push_back(std::move(first));
    while (at_op(",")) {
      ++pos_;
      if (at(Tok::Newline) || at_op(")") || at_op("]") || at_op("}") || at_op("=")) break;
      tuple->elts.push_back(parse_test());
    }
    return tuple;
  }

  ExprPtr parse_test() { return parse_arith(); }

  ExprPtr parse_arith() {
    ExprPtr left = parse_term();
    while (at_op("+") || at_op("-")) {
      char op = take().text[0];
      ExprPtr right = parse_term();
      left = make_binop(op, std::move(left), std::move(right));
    }
    return left;
  }

  ExprPtr parse_term() {
    ExprPtr left = parse_factor();
    while (at_op("*") || at_op("/") || at_op("//") || at_op("%") || at_op("**")) {
      std::string op = take().text;
      ExprPtr right = parse_factor();
      char c = op == "//" ? 'F' : (op == "**" ? 'P' : op[0]);
      left = make_binop(c, std::move(left), std::move(right));
    }
    return left;
  }

  ExprPtr make_binop(char op, ExprPtr l, ExprPtr r) {
    auto e = std::make_unique<Expr>();
    e->kind = Expr::Kind::BinOp;
    e->op = op;
    e->line = l ? l->line : cur().line;
    e->base = std::move(l);
    e->rhs = std::move(r);
    return e;
  }

  ExprPtr parse_factor() {
    if (at_op("-") || at_op("+")) {
      char op = take().text[0];
      ExprPtr operand = parse_factor();
      auto e = std::make_unique<Expr>();
      e->kind = Expr::Kind::UnaryOp;
      e->op = op;
      e->line = operand->line;
      e->base = std::move(operand);
      return e;
    }
    return parse_postfix();
  }

  ExprPtr parse_postfix() {
    ExprPtr e = parse_atom();
    while (true) {
      if (at_op(".")) {
        ++pos_;
        if (cur().kind != Tok::Name) throw SyntaxError("expected a name after '.'", cur().line);
        auto attr = std::make_unique<Expr>();
        attr->kind = Expr::Kind::Attribute;
        attr->name = take().text;
        attr->line = e->line;
        attr->base = std::move(e);
        e = std::move(attr);
        continue;
      }
      if (at_op("(")) {
        ++pos_;
        auto call = std::make_unique<Expr>();
        call->kind = Expr::Kind::Call;
        call->line = cur().line;
        call->base = std::move(e);
        while (!at_op(")")) {
          if (cur().kind == Tok::Name && peek().kind == Tok::Op && peek().text == "=") {
            std::string key = take().text;
            ++pos_;
            call->kwargs.emplace_back(key, parse_test());
          } else {
            call->elts.push_back(parse_test());
          }
          if (at_op(",")) ++pos_;
        }
        expect_op(")");
        e = std::move(call);
        continue;
      }
      if (at_op("[")) {
        ++pos_;
        auto sub = std::make_unique<Expr>();
        sub->kind = Expr::Kind::Subscript;
        sub->line = e->line;
        sub->base = std::move(e);
        int bracket = 1;
        // Subscripts (including slices) are opaque; skip to the matching ']'.
        while (bracket > 0 && !at(Tok::End)) {
          if (at_op("[")) ++bracket;
          if (at_op("]")) --bracket;
          if (bracket > 0) ++pos_;
        }
        expect_op("]");
        e = std::move(sub);
        continue;
      }
      break;
    }
    return e;
  }

  ExprPtr parse_atom() {
    int line = cur().line;
    if (cur().kind == Tok::Number) {
      Token t = take();
      auto e = std::make_unique<Expr>();
      e->line = line;
      if (t.is_float) {
        e->kind = Expr::Kind::Float;
        e->float_val = t.float_val;
      } else {
        e->kind = Expr::Kind::Int;
        e->int_val = t.int_val;
      }
      return e;
    }
    if (cur().kind == Tok::String) {
      auto e = std::make_unique<Expr>();
      e->kind = Expr::Kind::Str;
      e->str_val = take().text;
      e->line = line;
      // Adjacent string literals concatenate.
      while (cur().kind == Tok::String) e->str_val += take().text;
      return e;
    }
    if (cur().kind == Tok::Name) {
      std::string name = cur().text;
      if (name == "True" || name == "False") {
        ++pos_;
        auto e = std::make_unique<Expr>();
        e->kind = Expr::Kind::Bool;
        e->bool_val = name == "True";
        e->line = line;
        return e;
      }
      if (name == "None") {
        ++pos_;
        auto e = std::make_unique<Expr>();
        e->kind = Expr::Kind::None;
        e->line = line;
        return e;
      }
      ++pos_;
      auto e = std::make_unique<Expr>();
      e->kind = Expr::Kind::Name;
      e->name = name;
      e->line = line;
      return e;
    }
    if (at_op("(")) {
      ++pos_;
      if (at_op(")")) {
        ++pos_;
        auto e = std::make_unique<Expr>();
        e->kind = Expr::Kind::Tuple;
        e->line = line;
        return e;
      }
      ExprPtr first = parse_test();
      if (at_op(",")) {
        auto tuple = std::make_unique<Expr>();
        tuple->kind = Expr::Kind::Tuple;
        tuple->line = line;
        tuple->elts.push_back(std::move(first));
        while (at_op(",")) {
          ++pos_;
          if (at_op(")")) break;
          tuple->elts.push_back(parse_test());
        }
        expect_op(")");
        return tuple;
      }
      expect_op(")");
      return first;
    }
    if (at_op("[")) {
      ++pos_;
      auto list = std::make_unique<Expr>();
      list->kind = Expr::Kind::List;
      list->line = line;
      while (!at_op("]")) {
        list->elts.push_back(parse_test());
        if (at_op(",")) ++pos_;
      }
      expect_op("]");
      return list;
    }
    if (at_op("{")) {
      ++pos_;
      auto dict = std::make_unique<Expr>();
      dict->kind = Expr::Kind::Dict;
      dict->line = line;
      while (!at_op("}")) {
        dict->elts.push_back(parse_test());
        if (at_op(":")) {
          ++pos_;
          dict->elts.push_back(parse_test());
        }
        if (at_op(",")) ++pos_;
      }
      expect_op("}");
      return dict;
    }
    throw SyntaxError("unexpected token '" + cur().text + "'", line);
  }

  std::vector<Token> toks_;
  size_t pos_ = 0;
};

// ---------------------------------------------------------------------------
// Evaluation: statements -> ApiCall stream + binding table
// ---------------------------------------------------------------------------

class Evaluator {
 public:
  Evaluator(const ParseOptions& opts) : opts_(opts) {}

  ParseResult run(const std::vector<Stmt>& module) {
    count_calls(module);
    for (const Stmt& s : module) exec(s);
    ParseResult res;
    res.calls = std::move(calls_);
    res.bindings = std::move(bindings_);
    res.wildcard_modules = std::move(wildcards_);
    res.var_aliases = std::move(var_aliases_);
    return res;
  }

 private:
  void count_calls(const std::vector<Stmt>& stmts) {
    for (const Stmt& s : stmts) {
      if (s.kind == Stmt::Kind::Def) defs_[s.name] = &s;
      if (s.value) count_calls_expr(*s.value);
      for (const ExprPtr& t : s.targets)
        if (t) count_calls_expr(*t);
      count_calls(s.body);
    }
  }

  void count_calls_expr(const Expr& e) {
    if (e.kind == Expr::Kind::Call && e.base && e.base->kind == Expr::Kind::Name)
      ++call_counts_[e.base->name];
    if (e.base) count_calls_expr(*e.base);
    if (e.rhs) count_calls_expr(*e.rhs);
    for (const ExprPtr& c : e.elts)
      if (c) count_calls_expr(*c);
    for (const auto& [k, v] : e.kwargs)
      if (v) count_calls_expr(*v);
  }

  void budget(int line) {
    if (++executed_ > 100000)
      throw UnsupportedConstruct("statement execution budget exceeded", line);
  }

  void exec(const Stmt& s) {
    budget(s.line);
    switch (s.kind) {
      case Stmt::Kind::Pass:
        return;
      case Stmt::Kind::Import:
        for (const auto& [dotted, as] : s.imports) aliases_[as] = dotted;
        return;
      case Stmt::Kind::FromImport: {
        std::string module = expand_leading(s.module);
        if (s.wildcard) {
          wildcards_.push_back(module);
          return;
        }
        for (const auto& [what, as] : s.imports) aliases_[as] = module + "." + what;
        return;
      }
      case Stmt::Kind::Def:
        return;  // bodies run when called
      case Stmt::Kind::Return:
        if (inline_depth_ == 0)
          throw SyntaxError("'return' outside a function", s.line);
        if (s.value) return_value_ = eval_arg(*s.value, "");
        returning_ = true;
        return;
      case Stmt::Kind::With: {
        if (s.value) {
          ArgValue v = eval_arg(*s.value, s.name);
          if (!s.name.empty()) bindings_[s.name] = v.lit;
        }
        exec_block(s.body);
        return;
      }
      case Stmt::Kind::For:
        exec_for(s);
        return;
      case Stmt::Kind::Assign:
        exec_assign(s);
        return;
      case Stmt::Kind::ExprStmt:
        if (s.value) eval_arg(*s.value, "");
        return;
    }
  }

  void exec_block(const std::vector<Stmt>& body) {
    for (const Stmt& st : body) {
      if (returning_) return;
      exec(st);
    }
  }

  void exec_for(const Stmt& s) {
    std::optional<std::vector<std::int64_t>> range_values;
    if (s.value && s.value->kind == Expr::Kind::Call && s.value->base &&
        s.value->base->kind == Expr::Kind::Name && s.value->base->name == "range") {
      std::vector<Literal> args;
      for (const ExprPtr& a : s.value->elts) args.push_back(eval(*a));
      bool all_int = !args.empty();
      for (const Literal& l : args) all_int = all_int && l.is_int();
      if (all_int && args.size() <= 3) {
        std::int64_t start = 0, stop = 0, step = 1;
        if (args.size() == 1) {
          stop = args[0].i;
        } else {
          start = args[0].i;
          stop = args[1].i;
          if (args.size() == 3) step = args[2].i;
        }
        if (step != 0) {
          std::vector<std::int64_t> vals;
          if (step > 0)
            for (std::int64_t v = start; v < stop; v += step) vals.push_back(v);
          else
            for (std::int64_t v = start; v > stop; v += step) vals.push_back(v);
          range_values = std::move(vals);
        }
      }
    }

    if (range_values && int(range_values->size()) <= opts_.max_unroll) {
      ++loop_depth_;
      for (std::int64_t v : *range_values) {
        if (!s.name.empty()) bindings_[s.name] = Literal::of_int(v);
        exec_block(s.body);
        if (returning_) break;
      }
      --loop_depth_;
      return;
    }

    // Over-cap ranges and opaque iterables: run the body once with the loop
    // variable unknown. Layer-building calls in such a body are flagged and
    // rejected downstream; training loops pass through.
    if (s.value) eval_arg(*s.value, "");
    if (!s.name.empty()) bindings_[s.name] = Literal::unknown();
    for (const std::string& n : s.params) bindings_[n] = Literal::unknown();
    ++loop_depth_;
    bool was_overcap = overcap_loop_;
    overcap_loop_ = true;
    exec_block(s.body);
    overcap_loop_ = was_overcap;
    --loop_depth_;
  }

  void exec_assign(const Stmt& s) {
    std::string target;
    if (s.targets.size() == 1 && s.targets[0]->kind == Expr::Kind::Name)
      target = s.targets[0]->name;

    ArgValue value = s.value ? eval_arg(*s.value, target) : ArgValue{};
    for (const ExprPtr& t : s.targets) bind_target(*t, value.lit);
  }

  void bind_target(const Expr& target, const Literal& value) {
    if (target.kind == Expr::Kind::Name) {
      bindings_[target.name] = value;
      return;
    }
    if (target.kind == Expr::Kind::Tuple || target.kind == Expr::Kind::List) {
      for (const ExprPtr& t : target.elts)
        if (t) bind_target(*t, Literal::unknown());
      return;
    }
    // Attribute / subscript targets are legal but tracked nowhere.
  }

  std::string expand_leading(const std::string& dotted) const {
    size_t dot = dotted.find('.');
    std::string head = dot == std::string::npos ? dotted : dotted.substr(0, dot);
    auto it = aliases_.find(head);
    if (it == aliases_.end()) return dotted;
    return dot == std::string::npos ? it->second : it->second + dotted.substr(dot);
  }

  // Dotted path of a callee expression, aliases expanded; a call in the
  // chain contributes "()".
  std::string callee_path(const Expr& e) const {
    switch (e.kind) {
      case Expr::Kind::Name:
        return expand_leading(e.name);
      case Expr::Kind::Attribute:
        return e.base ? callee_path(*e.base) + "." + e.name : e.name;
      case Expr::Kind::Call:
        return e.base ? callee_path(*e.base) + "()" : "()";
      default:
        return "?";
    }
  }

  static std::string root_name(const Expr& e) {
    const Expr* cur = &e;
    while (cur->base) cur = cur->base.get();
    return cur->kind == Expr::Kind::Name ? cur->name : "";
  }

  Literal eval(const Expr& e) {
    switch (e.kind) {
      case Expr::Kind::Int:
        return Literal::of_int(e.int_val);
      case Expr::Kind::Float:
        return Literal::of_float(e.float_val);
      case Expr::Kind::Str:
        return Literal::of_text(e.str_val);
      case Expr::Kind::Bool:
        return Literal::of_bool(e.bool_val);
      case Expr::Kind::None:
        return Literal::none();
      case Expr::Kind::Name: {
        auto it = bindings_.find(e.name);
        return it == bindings_.end() ? Literal::unknown() : it->second;
      }
      case Expr::Kind::Tuple:
      case Expr::Kind::List: {
        std::vector<std::int64_t> xs;
        for (const ExprPtr& c : e.elts) {
          Literal l = eval(*c);
          if (l.is_int())
            xs.push_back(l.i);
          else if (l.kind == Literal::Kind::None)
            xs.push_back(-1);
          else
            return Literal::unknown();
        }
        return Literal::of_ints(std::move(xs));
      }
      case Expr::Kind::UnaryOp: {
        Literal v = eval(*e.base);
        if (v.is_int()) return Literal::of_int(e.op == '-' ? -v.i : v.i);
        if (v.kind == Literal::Kind::Float)
          return Literal::of_float(e.op == '-' ? -v.f : v.f);
        return Literal::unknown();
      }
      case Expr::Kind::BinOp: {
        if (!e.base || !e.rhs) return Literal::unknown();
        Literal a = eval(*e.base), b = eval(*e.rhs);
        if (a.is_int() && b.is_int()) {
          switch (e.op) {
            case '+': return Literal::of_int(a.i + b.i);
            case '-': return Literal::of_int(a.i - b.i);
            case '*': return Literal::of_int(a.i * b.i);
            case 'F': return b.i == 0 ? Literal::unknown() : Literal::of_int(a.i / b.i);
            case '%': return b.i == 0 ? Literal::unknown() : Literal::of_int(a.i % b.i);
            case '/': return b.i == 0 ? Literal::unknown()
                                      : Literal::of_float(double(a.i) / double(b.i));
            default: return Literal::unknown();
          }
        }
        bool numeric = (a.is_int() || a.kind == Literal::Kind::Float) &&
                       (b.is_int() || b.kind == Literal::Kind::Float);
        if (numeric) {
          double x = a.is_int() ? double(a.i) : a.f;
          double y = b.is_int() ? double(b.i) : b.f;
          switch (e.op) {
            case '+': return Literal::of_float(x + y);
            case '-': return Literal::of_float(x - y);
            case '*': return Literal::of_float(x * y);
            case '/': return y == 0 ? Literal::unknown() : Literal::of_float(x / y);
            default: return Literal::unknown();
          }
        }
        if (a.is_text() && b.is_text() && e.op == '+')
          return Literal::of_text(a.s + b.s);
        return Literal::unknown();
      }
      default:
        return Literal::unknown();
    }
  }

  // Evaluates an expression for use as an argument or RHS, emitting ApiCall
  // records for every call inside it (innermost first).
  ArgValue eval_arg(const Expr& e, const std::string& assign_target) {
    if (e.kind == Expr::Kind::Call) return eval_call(e, assign_target);
    if (e.kind == Expr::Kind::Name) {
      ArgValue a;
      a.kind = ArgValue::Kind::NameRef;
      a.name = expand_leading(e.name);
      a.lit = eval(e);
      return a;
    }
    if (e.kind == Expr::Kind::Attribute) {
      ArgValue a;
      a.kind = ArgValue::Kind::NameRef;
      a.name = callee_path(e);
      a.lit = Literal::unknown();
      return a;
    }
    if (e.kind == Expr::Kind::Tuple || e.kind == Expr::Kind::List) {
      Literal whole = eval(e);
      if (!whole.is_unknown()) return ArgValue::of(whole);
      ArgValue a;
      a.kind = ArgValue::Kind::List;
      for (const ExprPtr& c : e.elts) a.items.push_back(eval_arg(*c, ""));
      return a;
    }
    if (e.kind == Expr::Kind::BinOp || e.kind == Expr::Kind::UnaryOp ||
        e.kind == Expr::Kind::Dict || e.kind == Expr::Kind::Subscript) {
      // Walk nested calls for their side effects (e.g. losses wrapped in
      // arithmetic), then resolve the value if it folds to a literal.
      walk_nested_calls(e);
      return ArgValue::of(eval(e));
    }
    return ArgValue::of(eval(e));
  }

  void walk_nested_calls(const Expr& e) {
    if (e.kind == Expr::Kind::Call) {
      eval_call(e, "");
      return;
    }
    if (e.base) walk_nested_calls(*e.base);
    if (e.rhs) walk_nested_calls(*e.rhs);
    for (const ExprPtr& c : e.elts)
      if (c) walk_nested_calls(*c);
    for (const auto& [k, v] : e.kwargs)
      if (v) walk_nested_calls(*v);
  }

  ArgValue eval_call(const Expr& e, const std::string& assign_target) {
    budget(e.line);
    // Single-use function definitions are inlined at their call site.
    if (e.base && e.base->kind == Expr::Kind::Name) {
      auto def = defs_.find(e.base->name);
      if (def != defs_.end() && call_counts_[e.base->name] == 1) {
        return inline_def(*def->second, e, assign_target);
      }
    }

    ApiCall call;
    call.source_line = e.line;
    call.in_loop = loop_depth_ > 0;
    call.in_overcap_loop = overcap_loop_;
    call.assign_target = assign_target;
    call.receiver = root_name(*e.base);

    // The callee path must be computed after nested calls in the base chain
    // are emitted, so chained bases resolve left to right.
    if (e.base && e.base->kind == Expr::Kind::Call) eval_call(*e.base, "");
    if (e.base && e.base->kind != Expr::Kind::Call && e.base->base &&
        e.base->base->kind == Expr::Kind::Call)
      eval_call(*e.base->base, "");
    call.callee = e.base ? callee_path(*e.base) : "?";

    for (const ExprPtr& a : e.elts) call.args.push_back(eval_arg(*a, ""));
    for (const auto& [k, v] : e.kwargs) call.kwargs.emplace(k, eval_arg(*v, ""));

    int index = int(calls_.size());
    calls_.push_back(std::move(call));

    ArgValue res;
    res.kind = ArgValue::Kind::CallRef;
    res.call_index = index;
    res.name = calls_.back().callee;  // lets consumers match without the call table
    res.lit = Literal::unknown();
    return res;
  }

  ArgValue inline_def(const Stmt& def, const Expr& call, const std::string& assign_target) {
    if (inline_depth_ >= 8)
      throw UnsupportedConstruct("function inlining too deep", call.line);
    ++inline_depth_;
    for (size_t i = 0; i < def.params.size(); ++i) {
      if (i < call.elts.size())
        bindings_[def.params[i]] = eval(*call.elts[i]);
      else
        bindings_[def.params[i]] = Literal::unknown();
    }
    for (const auto& [k, v] : call.kwargs) bindings_[k] = eval(*v);

    return_value_ = ArgValue::of(Literal::unknown());
    returning_ = false;
    exec_block(def.body);
    returning_ = false;
    --inline_depth_;

    ArgValue res = return_value_;
    if (!assign_target.empty() && res.kind == ArgValue::Kind::CallRef &&
        res.call_index >= 0 && res.call_index < int(calls_.size())) {
      // `m = build()` where build returns a constructed object: the target
      // becomes an alias for that object.
      if (calls_[size_t(res.call_index)].assign_target.empty())
        calls_[size_t(res.call_index)].assign_target = assign_target;
    }
    if (!assign_target.empty() && res.kind == ArgValue::Kind::NameRef)
      var_aliases_.emplace_back(assign_target, res.name);
    return res;
  }

  const ParseOptions& opts_;
  std::vector<ApiCall> calls_;
  BindingTable bindings_;
  std::map<std::string, std::string> aliases_;
  std::vector<std::pair<std::string, std::string>> var_aliases_;
  std::vector<std::string> wildcards_;
  std::map<std::string, const Stmt*> defs_;
  std::map<std::string, int> call_counts_;
  ArgValue return_value_;
  bool returning_ = false;
  int inline_depth_ = 0;
  int loop_depth_ = 0;
  bool overcap_loop_ = false;
  std::int64_t executed_ = 0;
};

}  // namespace

ParseResult parse_script(const ScriptSource& src, const ParseOptions& opts) {
  if (src.text.empty()) return ParseResult{};
  std::string text = src.text;
  if (text.compare(0, 3, "\xEF\xBB\xBF") == 0) text.erase(0, 3);
  Tokenizer tokenizer(text);
  Parser parser(tokenizer.run());
  std::vector<Stmt> module = parser.parse_module();
  Evaluator evaluator(opts);
  return evaluator.run(module);
}

}  // namespace dlint
