#include "selfadapt/engine/parser.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <tuple>

#include "eval.hpp"

namespace selfadapt::engine {

namespace {

enum class Tok {
  End, Ident, Int, Real,
  LBrace, RBrace, LParen, RParen, LBracket, RBracket,
  Semi, Comma, Colon, Question, Bang, Dot, DotDot, Arrow, Assign,
  Eq, Ne, Lt, Le, Gt, Ge, Plus, Minus, Star, Slash, Percent, AndAnd, OrOr,
};

struct Token {
  Tok kind = Tok::End;
  std::string text;
  std::int64_t int_value = 0;
  double real_value = 0.0;
  int line = 1;
  int column = 1;
};

constexpr std::int64_t kDefaultIntLo = std::numeric_limits<std::int32_t>::min();
constexpr std::int64_t kDefaultIntHi = std::numeric_limits<std::int32_t>::max();
constexpr int kMaxDepth = 200;
constexpr int kMaxArraySize = 1 << 20;

const std::set<std::string, std::less<>> kKeywords = {
    "const", "int", "real", "bool", "chan", "broadcast", "automaton", "location", "edge",
    "guard", "sync", "weight", "update", "init", "initial", "committed", "if", "else",
    "for", "return", "true", "false"};

const std::map<std::string, BuiltinFn, std::less<>> kBuiltins = {
    {"floor", BuiltinFn::Floor}, {"ceil", BuiltinFn::Ceil}, {"round", BuiltinFn::Round},
    {"abs", BuiltinFn::Abs},     {"min", BuiltinFn::Min},   {"max", BuiltinFn::Max},
    {"sqrt", BuiltinFn::Sqrt}};

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  std::vector<Token> tokenize() {
    std::vector<Token> out;
    for (;;) {
      skip_space();
      Token t;
      t.line = line_;
      t.column = column_;
      if (pos_ >= src_.size()) {
        out.push_back(t);
        return out;
      }
      const char c = src_[pos_];
      if (is_alpha(c)) {
        const std::size_t start = pos_;
        while (pos_ < src_.size() && (is_alpha(src_[pos_]) || is_digit(src_[pos_]))) advance();
        t.kind = Tok::Ident;
        t.text = std::string(src_.substr(start, pos_ - start));
      } else if (is_digit(c)) {
        lex_number(t);
      } else {
        lex_punct(t);
      }
      out.push_back(std::move(t));
    }
  }

 private:
  static bool is_alpha(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; }
  static bool is_digit(char c) { return c >= '0' && c <= '9'; }

  [[noreturn]] void fail(const std::string& msg) const { throw ParseError(msg, line_, column_); }

  char peek(std::size_t ahead = 0) const {
    return pos_ + ahead < src_.size() ? src_[pos_ + ahead] : '\0';
  }

  void advance() {
    if (src_[pos_] == '\n') {
      ++line_;
      column_ = 1;
    } else {
      ++column_;
    }
    ++pos_;
  }

  void skip_space() {
    while (pos_ < src_.size()) {
      const char c = src_[pos_];
      if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
        advance();
      } else if (c == '/' && peek(1) == '/') {
        while (pos_ < src_.size() && src_[pos_] != '\n') advance();
      } else if (c == '/' && peek(1) == '*') {
        const int l = line_, col = column_;
        advance();
        advance();
        for (;;) {
          if (pos_ >= src_.size()) throw ParseError("unterminated comment", l, col);
          if (src_[pos_] == '*' && peek(1) == '/') {
            advance();
            advance();
            break;
          }
          advance();
        }
      } else {
        break;
      }
    }
  }

  void lex_number(Token& t) {
    const std::size_t start = pos_;
    while (is_digit(peek())) advance();
    bool real = false;
    if (peek() == '.' && is_digit(peek(1))) {
      real = true;
      advance();
      while (is_digit(peek())) advance();
    }
    if (peek() == 'e' || peek() == 'E') {
      const char next = peek(1);
      if (is_digit(next) || ((next == '+' || next == '-') && is_digit(peek(2)))) {
        real = true;
        advance();
        if (peek() == '+' || peek() == '-') advance();
        while (is_digit(peek())) advance();
      }
    }
    if (is_alpha(peek())) fail("malformed number");
    const std::string_view digits = src_.substr(start, pos_ - start);
    t.text = std::string(digits);
    if (real) {
      t.kind = Tok::Real;
      const auto res = std::from_chars(digits.data(), digits.data() + digits.size(), t.real_value);
      if (res.ec != std::errc() || !std::isfinite(t.real_value)) {
        throw ParseError("real literal out of range", t.line, t.column);
      }
    } else {
      t.kind = Tok::Int;
      const auto res = std::from_chars(digits.data(), digits.data() + digits.size(), t.int_value);
      if (res.ec != std::errc()) throw ParseError("integer literal out of range", t.line, t.column);
    }
  }

  void lex_punct(Token& t) {
    const char c = peek();
    const char n = peek(1);
    auto two = [&](Tok k) {
      t.kind = k;
      t.text = std::string{c, n};
      advance();
      advance();
    };
    auto one = [&](Tok k) {
      t.kind = k;
      t.text = std::string(1, c);
      advance();
    };
    switch (c) {
      case '{': return one(Tok::LBrace);
      case '}': return one(Tok::RBrace);
      case '(': return one(Tok::LParen);
      case ')': return one(Tok::RParen);
      case '[': return one(Tok::LBracket);
      case ']': return one(Tok::RBracket);
      case ';': return one(Tok::Semi);
      case ',': return one(Tok::Comma);
      case ':': return one(Tok::Colon);
      case '?': return one(Tok::Question);
      case '+': return one(Tok::Plus);
      case '*': return one(Tok::Star);
      case '/': return one(Tok::Slash);
      case '%': return one(Tok::Percent);
      case '.': return n == '.' ? two(Tok::DotDot) : one(Tok::Dot);
      case '-': return n == '>' ? two(Tok::Arrow) : one(Tok::Minus);
      case '=': return n == '=' ? two(Tok::Eq) : one(Tok::Assign);
      case '!': return n == '=' ? two(Tok::Ne) : one(Tok::Bang);
      case '<': return n == '=' ? two(Tok::Le) : one(Tok::Lt);
      case '>': return n == '=' ? two(Tok::Ge) : one(Tok::Gt);
      case '&':
        if (n == '&') return two(Tok::AndAnd);
        break;
      case '|':
        if (n == '|') return two(Tok::OrOr);
        break;
      default:
        break;
    }
    const auto byte = static_cast<unsigned char>(c);
    if (byte >= 0x20 && byte < 0x7f) fail(std::string("unexpected character '") + c + "'");
    fail("unexpected byte 0x" + std::to_string(byte));
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  int line_ = 1;
  int column_ = 1;
};

struct PendingEdge {
  Token source;
  Token target;
  Edge edge;
};

class Parser {
 public:
  Parser(std::vector<Token> tokens, AutomatonNetwork& net) : toks_(std::move(tokens)), net_(net) {}

  void parse_model() {
    while (!at(Tok::End)) parse_item();
  }

  Expr parse_standalone_expression() {
    Expr e = parse_expr();
    expect(Tok::End, "end of expression");
    return e;
  }

 private:
  // ---- token helpers -----------------------------------------------------
  const Token& cur() const { return toks_[pos_]; }
  bool at(Tok k) const { return cur().kind == k; }
  bool at_word(std::string_view w) const { return cur().kind == Tok::Ident && cur().text == w; }
  Token take() {
    Token t = toks_[pos_];
    if (pos_ + 1 < toks_.size()) ++pos_;
    return t;
  }
  [[noreturn]] void fail(const Token& t, const std::string& msg) const {
    throw ParseError(msg, t.line, t.column);
  }
  [[noreturn]] void fail(const std::string& msg) const { fail(cur(), msg); }
  Token expect(Tok k, const std::string& what) {
    if (!at(k)) fail("expected " + what + found());
    return take();
  }
  void expect_word(std::string_view w) {
    if (!at_word(w)) fail("expected '" + std::string(w) + "'" + found());
    take();
  }
  bool accept(Tok k) {
    if (!at(k)) return false;
    take();
    return true;
  }
  std::string found() const {
    if (at(Tok::End)) return " but reached end of input";
    return " but found '" + cur().text + "'";
  }
  Token expect_name(const std::string& what) {
    const Token t = expect(Tok::Ident, what);
    if (kKeywords.contains(t.text)) fail(t, "'" + t.text + "' is a reserved word");
    return t;
  }

  struct DepthGuard {
    explicit DepthGuard(Parser& p) : p_(p) {
      if (++p_.depth_ > kMaxDepth) p_.fail("nesting too deep");
    }
    ~DepthGuard() { --p_.depth_; }
    Parser& p_;
  };

  // ---- names -------------------------------------------------------------
  void claim_global_name(const Token& t) {
    if (kBuiltins.contains(t.text)) fail(t, "'" + t.text + "' is a builtin function");
    if (!global_names_.insert(t.text).second) fail(t, "duplicate declaration of '" + t.text + "'");
  }

  // ---- top level ---------------------------------------------------------
  void parse_item() {
    if (at_word("const")) {
      take();
      parse_var_decl(true);
    } else if (at_word("int") || at_word("real") || at_word("bool")) {
      // Function if `type name (`.
      std::size_t look = pos_ + 1;
      if (toks_[pos_].text == "int" && toks_[look].kind == Tok::LBracket) {
        int depth = 0;
        for (; look < toks_.size() && toks_[look].kind != Tok::End; ++look) {
          if (toks_[look].kind == Tok::LBracket) ++depth;
          if (toks_[look].kind == Tok::RBracket && --depth == 0) break;
        }
        ++look;
      }
      if (look + 1 < toks_.size() && toks_[look].kind == Tok::Ident && toks_[look + 1].kind == Tok::LParen) {
        parse_function();
      } else {
        parse_var_decl(false);
      }
    } else if (at_word("chan") || at_word("broadcast")) {
      parse_channels();
    } else if (at_word("automaton")) {
      parse_automaton();
    } else {
      fail("expected a declaration" + found());
    }
  }

  struct TypeSpec {
    Type type = Type::Int;
    std::int64_t lo = kDefaultIntLo;
    std::int64_t hi = kDefaultIntHi;
  };

  TypeSpec parse_type() {
    TypeSpec spec;
    const Token t = take();
    if (t.text == "real") {
      spec.type = Type::Real;
    } else if (t.text == "bool") {
      spec.lo = 0;
      spec.hi = 1;
    } else if (t.text == "int") {
      if (accept(Tok::LBracket)) {
        spec.lo = const_int(parse_expr(), "lower bound");
        expect(Tok::Comma, "','");
        spec.hi = const_int(parse_expr(), "upper bound");
        expect(Tok::RBracket, "']'");
        if (spec.lo > spec.hi) fail(t, "empty integer range");
      }
    } else {
      fail(t, "expected a type");
    }
    return spec;
  }

  void parse_var_decl(bool is_const) {
    if (!(at_word("int") || at_word("real") || at_word("bool"))) fail("expected a type" + found());
    const TypeSpec spec = parse_type();
    do {
      const Token name = expect_name("variable name");
      claim_global_name(name);
      VarDecl d;
      d.name = name.text;
      d.type = spec.type;
      d.lo = spec.type == Type::Int ? spec.lo : 0;
      d.hi = spec.type == Type::Int ? spec.hi : 0;
      d.is_const = is_const;
      if (accept(Tok::LBracket)) {
        const Token at_size = cur();
        const std::int64_t size = const_int(parse_expr(), "array size");
        if (size < 1 || size > kMaxArraySize) fail(at_size, "array size out of range");
        expect(Tok::RBracket, "']'");
        d.is_array = true;
        d.size = static_cast<int>(size);
      }
      const Token init_tok = cur();
      std::vector<Value> init;
      if (accept(Tok::Assign)) {
        if (accept(Tok::LBrace)) {
          if (!d.is_array) fail(init_tok, "list initializer for scalar '" + d.name + "'");
          do init.push_back(const_value(parse_expr(), "initializer"));
          while (accept(Tok::Comma));
          expect(Tok::RBrace, "'}'");
          if (static_cast<int>(init.size()) != d.size) fail(init_tok, "initializer length does not match array size");
        } else {
          init.assign(static_cast<std::size_t>(d.size), const_value(parse_expr(), "initializer"));
        }
      } else {
        if (is_const) fail(init_tok, "constant '" + d.name + "' needs an initializer");
        Value dflt = d.type == Type::Real ? Value::of_real(0.0) : Value::of_int(std::clamp<std::int64_t>(0, d.lo, d.hi));
        init.assign(static_cast<std::size_t>(d.size), dflt);
      }
      for (Value& v : init) {
        if (d.type == Type::Int) {
          if (v.is_real()) fail(init_tok, "real initializer for integer '" + d.name + "'");
          if (v.i < d.lo || v.i > d.hi) fail(init_tok, "initializer out of bounds");
        } else {
          v = Value::of_real(v.as_real());
        }
      }
      d.init = std::move(init);
      d.offset = net_.store_size;
      net_.store_size += d.size;
      net_.variables.push_back(std::move(d));
      for (const Value& v : net_.variables.back().init) init_store_.push_back(v);
    } while (accept(Tok::Comma));
    expect(Tok::Semi, "';'");
  }

  void parse_channels() {
    bool broadcast = false;
    if (at_word("broadcast")) {
      take();
      broadcast = true;
    }
    expect_word("chan");
    do {
      const Token name = expect_name("channel name");
      claim_global_name(name);
      net_.channels.push_back(Channel{name.text, broadcast});
    } while (accept(Tok::Comma));
    expect(Tok::Semi, "';'");
  }

  // ---- functions ---------------------------------------------------------
  struct FunctionScope {
    Function* fn = nullptr;
    std::vector<std::map<std::string, int, std::less<>>> blocks;
    std::set<int> loop_vars;
  };

  void parse_function() {
    const Token type_tok = cur();
    const TypeSpec spec = parse_type();
    if (type_tok.text == "int" && (spec.lo != kDefaultIntLo || spec.hi != kDefaultIntHi)) {
      fail(type_tok, "function return types cannot carry bounds");
    }
    const Token name = expect_name("function name");
    claim_global_name(name);
    Function fn;
    fn.name = name.text;
    fn.return_type = spec.type;
    FunctionScope scope;
    scope.fn = &fn;
    scope.blocks.emplace_back();
    fscope_ = &scope;
    expect(Tok::LParen, "'('");
    if (!at(Tok::RParen)) {
      do {
        if (!(at_word("int") || at_word("real") || at_word("bool"))) fail("expected parameter type" + found());
        const Type ptype = take().text == "real" ? Type::Real : Type::Int;
        const Token pname = expect_name("parameter name");
        declare_local(pname, ptype);
        ++fn.param_count;
      } while (accept(Tok::Comma));
    }
    expect(Tok::RParen, "')'");
    if (!at(Tok::LBrace)) fail("expected '{'" + found());
    fn.body = parse_block();
    fscope_ = nullptr;
    net_.functions.push_back(std::move(fn));
  }

  int declare_local(const Token& name, Type type) {
    if (global_names_.contains(name.text) || kBuiltins.contains(name.text)) {
      fail(name, "local '" + name.text + "' shadows a global name");
    }
    for (const auto& block : fscope_->blocks) {
      if (block.contains(name.text)) fail(name, "duplicate local '" + name.text + "'");
    }
    for (const LocalDecl& l : fscope_->fn->locals) {
      if (l.name == name.text) fail(name, "local name '" + name.text + "' reused in function");
    }
    const int slot = static_cast<int>(fscope_->fn->locals.size());
    fscope_->fn->locals.push_back(LocalDecl{name.text, type});
    fscope_->blocks.back()[name.text] = slot;
    return slot;
  }

  Stmt parse_block() {
    DepthGuard guard(*this);
    expect(Tok::LBrace, "'{'");
    fscope_->blocks.emplace_back();
    Stmt block;
    block.kind = StmtKind::Block;
    while (!at(Tok::RBrace)) {
      if (at(Tok::End)) fail("unterminated block");
      block.body.push_back(parse_stmt());
    }
    take();
    fscope_->blocks.pop_back();
    return block;
  }

  Stmt parse_stmt() {
    DepthGuard guard(*this);
    if (at(Tok::LBrace)) return parse_block();
    Stmt s;
    if (at_word("int") || at_word("real") || at_word("bool")) {
      const Token type_tok = take();
      if (at(Tok::LBracket)) fail("local variables cannot carry bounds");
      const Type type = type_tok.text == "real" ? Type::Real : Type::Int;
      const Token name = expect_name("local name");
      Expr init;
      if (accept(Tok::Assign)) {
        init = parse_expr();
        if (type == Type::Int && init.type == Type::Real) fail(name, "cannot initialize int from real (use floor/ceil/round)");
      } else {
        init = type == Type::Real ? real_const(0.0) : int_const(0);
      }
      expect(Tok::Semi, "';'");
      s.kind = StmtKind::Local;
      s.target = VarRef{Scope::Local, declare_local(name, type)};
      s.exprs.push_back(std::move(init));
      return s;
    }
    if (at_word("if")) {
      take();
      expect(Tok::LParen, "'('");
      s.kind = StmtKind::If;
      s.exprs.push_back(parse_expr());
      expect(Tok::RParen, "')'");
      s.body.push_back(parse_stmt());
      if (at_word("else")) {
        take();
        s.else_body.push_back(parse_stmt());
      }
      return s;
    }
    if (at_word("for")) {
      take();
      expect(Tok::LParen, "'('");
      const Token var = expect_name("loop variable");
      expect(Tok::Colon, "':'");
      Expr from = parse_expr();
      expect(Tok::DotDot, "'..'");
      Expr to = parse_expr();
      expect(Tok::RParen, "')'");
      if (from.type != Type::Int || to.type != Type::Int) fail(var, "loop range must be integer");
      fscope_->blocks.emplace_back();
      const int slot = declare_local(var, Type::Int);
      fscope_->loop_vars.insert(slot);
      s.kind = StmtKind::For;
      s.target = VarRef{Scope::Local, slot};
      s.exprs.push_back(std::move(from));
      s.exprs.push_back(std::move(to));
      s.body.push_back(parse_stmt());
      fscope_->loop_vars.erase(slot);
      fscope_->blocks.pop_back();
      return s;
    }
    if (at_word("return")) {
      const Token ret = take();
      s.kind = StmtKind::Return;
      Expr value = parse_expr();
      if (fscope_->fn->return_type == Type::Int && value.type == Type::Real) {
        fail(ret, "returning real from int function (use floor/ceil/round)");
      }
      s.exprs.push_back(std::move(value));
      expect(Tok::Semi, "';'");
      return s;
    }
    const Token name = expect_name("statement");
    const int slot = lookup_local(name.text);
    if (slot < 0) {
      if (net_.variable_index(name.text) >= 0) fail(name, "functions are pure: cannot assign global '" + name.text + "'");
      fail(name, "undeclared identifier '" + name.text + "'");
    }
    if (fscope_->loop_vars.contains(slot)) fail(name, "cannot assign loop variable '" + name.text + "'");
    if (at(Tok::LBracket)) fail("local '" + name.text + "' is not an array");
    expect(Tok::Assign, "'='");
    Expr value = parse_expr();
    if (fscope_->fn->locals[static_cast<std::size_t>(slot)].type == Type::Int && value.type == Type::Real) {
      fail(name, "cannot assign real to int '" + name.text + "' (use floor/ceil/round)");
    }
    expect(Tok::Semi, "';'");
    s.kind = StmtKind::Assign;
    s.target = VarRef{Scope::Local, slot};
    s.exprs.push_back(std::move(value));
    return s;
  }

  int lookup_local(std::string_view name) const {
    if (fscope_ == nullptr) return -1;
    for (auto it = fscope_->blocks.rbegin(); it != fscope_->blocks.rend(); ++it) {
      if (auto f = it->find(name); f != it->end()) return f->second;
    }
    return -1;
  }

  // ---- automata ----------------------------------------------------------
  void parse_automaton() {
    take();
    const Token name = expect_name("automaton name");
    claim_global_name(name);
    Automaton a;
    a.name = name.text;
    current_ = &a;
    std::vector<PendingEdge> pending;
    expect(Tok::LBrace, "'{'");
    while (!at(Tok::RBrace)) {
      if (at_word("location")) {
        take();
        const Token lname = expect_name("location name");
        if (a.location_index(lname.text) >= 0) fail(lname, "duplicate location '" + lname.text + "'");
        Location loc;
        loc.name = lname.text;
        while (at(Tok::Ident)) {
          const Token flag = take();
          if (flag.text == "init" || flag.text == "initial") {
            loc.initial = true;
          } else if (flag.text == "committed") {
            loc.committed = true;
          } else {
            fail(flag, "unknown location flag '" + flag.text + "'");
          }
        }
        expect(Tok::Semi, "';'");
        a.locations.push_back(std::move(loc));
      } else if (at_word("edge")) {
        take();
        pending.push_back(parse_edge());
      } else {
        fail("expected 'location' or 'edge'" + found());
      }
    }
    take();
    current_ = nullptr;

    int initial = -1;
    for (std::size_t i = 0; i < a.locations.size(); ++i) {
      if (!a.locations[i].initial) continue;
      if (initial >= 0) fail(name, "automaton '" + a.name + "' has more than one initial location");
      initial = static_cast<int>(i);
    }
    if (initial < 0) fail(name, "automaton '" + a.name + "' has no initial location");
    a.initial = initial;

    for (PendingEdge& p : pending) {
      p.edge.source = a.location_index(p.source.text);
      if (p.edge.source < 0) fail(p.source, "undeclared location '" + p.source.text + "'");
      p.edge.target = a.location_index(p.target.text);
      if (p.edge.target < 0) fail(p.target, "undeclared location '" + p.target.text + "'");
      a.edges.push_back(std::move(p.edge));
    }
    build_groups(a);
    net_.automata.push_back(std::move(a));
  }

  static void build_groups(Automaton& a) {
    for (std::size_t e = 0; e < a.edges.size(); ++e) {
      const Edge& edge = a.edges[e];
      bool placed = false;
      if (edge.weight) {
        for (BranchGroup& g : a.groups) {
          if (!g.weighted || g.source != edge.source) continue;
          const Edge& first = a.edges[static_cast<std::size_t>(g.edges.front())];
          if (first.guard == edge.guard && first.sync == edge.sync) {
            g.edges.push_back(static_cast<int>(e));
            placed = true;
            break;
          }
        }
      }
      if (!placed) a.groups.push_back(BranchGroup{edge.source, edge.weight.has_value(), {static_cast<int>(e)}});
    }
  }

  PendingEdge parse_edge() {
    PendingEdge p;
    p.source = expect_name("source location");
    expect(Tok::Arrow, "'->'");
    p.target = expect_name("target location");
    if (accept(Tok::Semi)) return p;
    expect(Tok::LBrace, "'{' or ';'");
    bool has_sync = false, has_update = false;
    while (!at(Tok::RBrace)) {
      const Token attr = expect(Tok::Ident, "edge attribute");
      if (attr.text == "guard") {
        if (p.edge.guard) fail(attr, "duplicate guard");
        p.edge.guard = parse_expr();
      } else if (attr.text == "sync") {
        if (has_sync) fail(attr, "duplicate sync");
        has_sync = true;
        const Token ch = expect(Tok::Ident, "channel name");
        const int c = net_.channel_index(ch.text);
        if (c < 0) fail(ch, "undeclared channel '" + ch.text + "'");
        if (accept(Tok::Bang)) {
          p.edge.sync = Sync{SyncKind::Send, c};
        } else if (accept(Tok::Question)) {
          p.edge.sync = Sync{SyncKind::Receive, c};
        } else {
          fail("expected '!' or '?'" + found());
        }
      } else if (attr.text == "weight") {
        if (p.edge.weight) fail(attr, "duplicate weight");
        Expr w = parse_expr();
        if (w.type != Type::Int) fail(attr, "weight must be an integer expression");
        if (is_constant(w) && const_value(w, "weight").i < 0) fail(attr, "negative weight");
        p.edge.weight = std::move(w);
      } else if (attr.text == "update") {
        if (has_update) fail(attr, "duplicate update");
        has_update = true;
        do p.edge.updates.push_back(parse_assignment());
        while (accept(Tok::Comma));
      } else {
        fail(attr, "unknown edge attribute '" + attr.text + "'");
      }
      expect(Tok::Semi, "';'");
    }
    take();
    return p;
  }

  Assignment parse_assignment() {
    const Token name = expect_name("assignment target");
    const int v = net_.variable_index(name.text);
    if (v < 0) fail(name, "undeclared identifier '" + name.text + "'");
    const VarDecl& decl = net_.variables[static_cast<std::size_t>(v)];
    if (decl.is_const) fail(name, "cannot assign constant '" + name.text + "'");
    Assignment a;
    a.variable = v;
    if (decl.is_array) {
      expect(Tok::LBracket, "'[' (array '" + name.text + "' needs an index)");
      Expr idx = parse_expr();
      if (idx.type != Type::Int) fail(name, "array index must be integer");
      a.index = std::move(idx);
      expect(Tok::RBracket, "']'");
    } else if (at(Tok::LBracket)) {
      fail("'" + name.text + "' is not an array");
    }
    expect(Tok::Assign, "'='");
    a.value = parse_expr();
    if (decl.type == Type::Int && a.value.type == Type::Real) {
      fail(name, "cannot assign real to int '" + name.text + "' (use floor/ceil/round)");
    }
    return a;
  }

  // ---- expressions -------------------------------------------------------
  static Expr int_const(std::int64_t v) {
    Expr e;
    e.kind = ExprKind::IntConst;
    e.type = Type::Int;
    e.int_value = v;
    return e;
  }
  static Expr real_const(double v) {
    Expr e;
    e.kind = ExprKind::RealConst;
    e.type = Type::Real;
    e.real_value = v;
    return e;
  }
  static Expr binary(Op op, Expr lhs, Expr rhs, Type type) {
    Expr e;
    e.kind = ExprKind::Binary;
    e.op = op;
    e.type = type;
    e.args.push_back(std::move(lhs));
    e.args.push_back(std::move(rhs));
    return e;
  }
  static Type arith(const Expr& a, const Expr& b) {
    return a.type == Type::Real || b.type == Type::Real ? Type::Real : Type::Int;
  }

  Expr parse_expr() {
    DepthGuard guard(*this);
    Expr cond = parse_or();
    if (!accept(Tok::Question)) return cond;
    Expr a = parse_expr();
    expect(Tok::Colon, "':'");
    Expr b = parse_expr();
    Expr e;
    e.kind = ExprKind::Ternary;
    e.type = arith(a, b);
    e.args.push_back(std::move(cond));
    e.args.push_back(std::move(a));
    e.args.push_back(std::move(b));
    return e;
  }

  Expr parse_or() {
    Expr lhs = parse_and();
    while (accept(Tok::OrOr)) lhs = binary(Op::Or, std::move(lhs), parse_and(), Type::Int);
    return lhs;
  }

  Expr parse_and() {
    Expr lhs = parse_eq();
    while (accept(Tok::AndAnd)) lhs = binary(Op::And, std::move(lhs), parse_eq(), Type::Int);
    return lhs;
  }

  Expr parse_eq() {
    Expr lhs = parse_rel();
    for (;;) {
      Op op;
      if (at(Tok::Eq)) op = Op::Eq;
      else if (at(Tok::Ne)) op = Op::Ne;
      else return lhs;
      take();
      lhs = binary(op, std::move(lhs), parse_rel(), Type::Int);
    }
  }

  Expr parse_rel() {
    Expr lhs = parse_add();
    for (;;) {
      Op op;
      if (at(Tok::Lt)) op = Op::Lt;
      else if (at(Tok::Le)) op = Op::Le;
      else if (at(Tok::Gt)) op = Op::Gt;
      else if (at(Tok::Ge)) op = Op::Ge;
      else return lhs;
      take();
      lhs = binary(op, std::move(lhs), parse_add(), Type::Int);
    }
  }

  Expr parse_add() {
    Expr lhs = parse_mul();
    for (;;) {
      Op op;
      if (at(Tok::Plus)) op = Op::Add;
      else if (at(Tok::Minus)) op = Op::Sub;
      else return lhs;
      take();
      Expr rhs = parse_mul();
      const Type t = arith(lhs, rhs);
      lhs = binary(op, std::move(lhs), std::move(rhs), t);
    }
  }

  Expr parse_mul() {
    Expr lhs = parse_unary();
    for (;;) {
      Op op;
      if (at(Tok::Star)) op = Op::Mul;
      else if (at(Tok::Slash)) op = Op::Div;
      else if (at(Tok::Percent)) op = Op::Mod;
      else return lhs;
      const Token op_tok = take();
      Expr rhs = parse_unary();
      if (op == Op::Mod && (lhs.type == Type::Real || rhs.type == Type::Real)) fail(op_tok, "'%' requires integer operands");
      if (op != Op::Mul && is_constant(rhs) && !const_value(rhs, "divisor").truthy()) {
        fail(op_tok, "division by zero");
      }
      const Type t = arith(lhs, rhs);
      lhs = binary(op, std::move(lhs), std::move(rhs), t);
    }
  }

  Expr parse_unary() {
    DepthGuard guard(*this);
    if (at(Tok::Minus) || at(Tok::Bang)) {
      const bool neg = take().kind == Tok::Minus;
      Expr operand = parse_unary();
      Expr e;
      e.kind = ExprKind::Unary;
      e.op = neg ? Op::Neg : Op::Not;
      e.type = neg ? operand.type : Type::Int;
      e.args.push_back(std::move(operand));
      return e;
    }
    return parse_primary();
  }

  Expr parse_primary() {
    const Token t = cur();
    switch (t.kind) {
      case Tok::Int:
        take();
        return int_const(t.int_value);
      case Tok::Real:
        take();
        return real_const(t.real_value);
      case Tok::LParen: {
        take();
        Expr e = parse_expr();
        expect(Tok::RParen, "')'");
        return e;
      }
      case Tok::Ident:
        break;
      default:
        fail("expected an expression" + found());
    }
    take();
    if (t.text == "true") return int_const(1);
    if (t.text == "false") return int_const(0);
    if (kKeywords.contains(t.text)) fail(t, "unexpected '" + t.text + "'");

    if (at(Tok::LParen)) return parse_call(t);

    if (at(Tok::Dot)) {
      take();
      const Token loc = expect(Tok::Ident, "location name");
      const Automaton* a = nullptr;
      int ai = net_.automaton_index(t.text);
      if (ai >= 0) {
        a = &net_.automata[static_cast<std::size_t>(ai)];
      } else if (current_ != nullptr && current_->name == t.text) {
        a = current_;
        ai = static_cast<int>(net_.automata.size());
      }
      if (a == nullptr) fail(t, "undeclared automaton '" + t.text + "'");
      if (fscope_ != nullptr) fail(t, "location tests are not allowed inside functions");
      const int li = a->location_index(loc.text);
      if (li < 0) fail(loc, "automaton '" + t.text + "' has no location '" + loc.text + "'");
      Expr e;
      e.kind = ExprKind::LocationTest;
      e.type = Type::Int;
      e.automaton = ai;
      e.location = li;
      return e;
    }

    Expr e;
    if (const int slot = lookup_local(t.text); slot >= 0) {
      e.kind = ExprKind::Var;
      e.var = VarRef{Scope::Local, slot};
      e.type = fscope_->fn->locals[static_cast<std::size_t>(slot)].type;
      if (at(Tok::LBracket)) fail("'" + t.text + "' is not an array");
      return e;
    }
    const int v = net_.variable_index(t.text);
    if (v < 0) fail(t, "undeclared identifier '" + t.text + "'");
    const VarDecl& decl = net_.variables[static_cast<std::size_t>(v)];
    e.var = VarRef{Scope::Global, v};
    e.type = decl.type;
    if (decl.is_array) {
      if (!accept(Tok::LBracket)) fail(t, "array '" + t.text + "' needs an index");
      Expr idx = parse_expr();
      if (idx.type != Type::Int) fail(t, "array index must be integer");
      expect(Tok::RBracket, "']'");
      e.kind = ExprKind::Index;
      e.args.push_back(std::move(idx));
    } else {
      if (at(Tok::LBracket)) fail("'" + t.text + "' is not an array");
      e.kind = ExprKind::Var;
    }
    return e;
  }

  Expr parse_call(const Token& name) {
    take();  // (
    std::vector<Expr> args;
    if (!at(Tok::RParen)) {
      do args.push_back(parse_expr());
      while (accept(Tok::Comma));
    }
    expect(Tok::RParen, "')'");
    Expr e;
    if (auto b = kBuiltins.find(name.text); b != kBuiltins.end()) {
      const bool binary_fn = b->second == BuiltinFn::Min || b->second == BuiltinFn::Max;
      if (args.size() != (binary_fn ? 2U : 1U)) fail(name, "wrong number of arguments to '" + name.text + "'");
      e.kind = ExprKind::Builtin;
      e.builtin = b->second;
      switch (b->second) {
        case BuiltinFn::Floor:
        case BuiltinFn::Ceil:
        case BuiltinFn::Round: e.type = Type::Int; break;
        case BuiltinFn::Abs: e.type = args[0].type; break;
        case BuiltinFn::Min:
        case BuiltinFn::Max: e.type = arith(args[0], args[1]); break;
        case BuiltinFn::Sqrt: e.type = Type::Real; break;
      }
      e.args = std::move(args);
      return e;
    }
    const int f = net_.function_index(name.text);
    if (f < 0) {
      if (fscope_ != nullptr && fscope_->fn->name == name.text) fail(name, "recursive call to '" + name.text + "'");
      fail(name, "undeclared function '" + name.text + "'");
    }
    const Function& fn = net_.functions[static_cast<std::size_t>(f)];
    if (static_cast<int>(args.size()) != fn.param_count) fail(name, "wrong number of arguments to '" + name.text + "'");
    for (int i = 0; i < fn.param_count; ++i) {
      if (fn.locals[static_cast<std::size_t>(i)].type == Type::Int && args[static_cast<std::size_t>(i)].type == Type::Real) {
        fail(name, "real argument for int parameter '" + fn.locals[static_cast<std::size_t>(i)].name + "'");
      }
    }
    e.kind = ExprKind::Call;
    e.callee = f;
    e.type = fn.return_type;
    e.args = std::move(args);
    return e;
  }

  // ---- constant evaluation -----------------------------------------------
  bool is_constant(const Expr& e) const {
    switch (e.kind) {
      case ExprKind::IntConst:
      case ExprKind::RealConst: return true;
      case ExprKind::Var:
      case ExprKind::Index:
        if (e.var.scope != Scope::Global || !net_.variables[static_cast<std::size_t>(e.var.index)].is_const) return false;
        break;
      case ExprKind::Call:
      case ExprKind::LocationTest: return false;
      default: break;
    }
    for (const Expr& a : e.args) {
      if (!is_constant(a)) return false;
    }
    return true;
  }

  Value const_value(const Expr& e, const std::string& what) {
    if (!is_constant(e)) fail(what + " must be a constant expression");
    try {
      detail::EvalContext ctx{net_, init_store_, {}};
      return detail::evaluate(ctx, e, {});
    } catch (const RuntimeError& err) {
      fail(what + ": " + err.what());
    }
  }

  std::int64_t const_int(const Expr& e, const std::string& what) {
    const Value v = const_value(e, what);
    if (v.is_real()) fail(what + " must be an integer");
    return v.i;
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  AutomatonNetwork& net_;
  std::vector<Value> init_store_;
  std::set<std::string, std::less<>> global_names_;
  FunctionScope* fscope_ = nullptr;
  Automaton* current_ = nullptr;
  int depth_ = 0;

 public:
  void seed_store(const AutomatonNetwork& net) {
    for (const VarDecl& d : net.variables) {
      for (const Value& v : d.init) init_store_.push_back(v);
      global_names_.insert(d.name);
    }
  }
};

}  // namespace

AutomatonNetwork parse_model(std::string_view text) {
  AutomatonNetwork net;
  Lexer lexer(text);
  Parser parser(lexer.tokenize(), net);
  parser.parse_model();
  return net;
}

Expr parse_expression(const AutomatonNetwork& net, std::string_view text) {
  Lexer lexer(text);
  AutomatonNetwork copy = net;
  Parser parser(lexer.tokenize(), copy);
  parser.seed_store(net);
  return parser.parse_standalone_expression();
}

}  // namespace selfadapt::engine
