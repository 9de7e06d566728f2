#include "kos/surface.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace kos::surface {

namespace {

// ---------------------------------------------------------------------------
// Lexer
// ---------------------------------------------------------------------------

enum class Tok : std::uint8_t {
  Ident, Number, String, TimeTok, DurTok,
  LParen, RParen, LBrace, RBrace, LAngle, RAngle,
  Comma, Dot, Colon, Eq, Backslash, Arrow, Star, Plus,
  End, Error
};

struct Token {
  Tok kind = Tok::End;
  std::string text;
  Nat number;
  std::uint64_t millis = 0;
  SourceSpan span;
};

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  std::vector<Token> run(std::vector<Diagnostic>& diags) {
    std::vector<Token> out;
    for (;;) {
      skip_ws();
      Token t = next(diags);
      out.push_back(t);
      if (t.kind == Tok::End) break;
    }
    return out;
  }

 private:
  void skip_ws() {
    for (;;) {
      while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) advance();
      if (pos_ + 1 < src_.size() && src_[pos_] == '/' && src_[pos_ + 1] == '/') {
        while (pos_ < src_.size() && src_[pos_] != '\n') advance();
        continue;
      }
      break;
    }
  }

  void advance() {
    if (pos_ >= src_.size()) return;
    if (src_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }

  SourcePos here() const { return {line_, col_}; }

  Token next(std::vector<Diagnostic>& diags) {
    Token t;
    t.span.begin = here();
    if (pos_ >= src_.size()) {
      t.kind = Tok::End;
      t.span.end = here();
      return t;
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
      std::size_t start = pos_;
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) advance();
      t.kind = Tok::Number;
      t.number = Nat(std::string(src_.substr(start, pos_ - start)));
    } else if (c == '"') {
      advance();
      std::string s;
      bool closed = false;
      while (pos_ < src_.size()) {
        char d = src_[pos_];
        if (d == '"') {
          advance();
          closed = true;
          break;
        }
        if (d == '\\' && pos_ + 1 < src_.size()) {
          advance();
          s.push_back(src_[pos_]);
          advance();
          continue;
        }
        s.push_back(d);
        advance();
      }
      if (!closed) {
        t.kind = Tok::Error;
        t.span.end = here();
        diags.push_back({Severity::Error, t.span, "unterminated string literal", {}});
        return t;
      }
      t.kind = Tok::String;
      t.text = std::move(s);
    } else if (c == '@') {
      advance();
      // @HH:MM or @ms(N)
      if (pos_ + 2 < src_.size() && src_.substr(pos_, 3) == "ms(") {
        advance(); advance(); advance();
        std::size_t start = pos_;
        while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) advance();
        std::string digits(src_.substr(start, pos_ - start));
        if (digits.empty() || pos_ >= src_.size() || src_[pos_] != ')') {
          t.kind = Tok::Error;
          t.span.end = here();
          diags.push_back({Severity::Error, t.span, "malformed @ms(...) time literal", {}});
          return t;
        }
        advance();
        t.kind = Tok::TimeTok;
        t.millis = std::stoull(digits);
      } else {
        auto read_digits = [&]() -> std::optional<std::uint64_t> {
          std::size_t start = pos_;
          while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) advance();
          if (pos_ == start) return std::nullopt;
          return std::stoull(std::string(src_.substr(start, pos_ - start)));
        };
        auto hh = read_digits();
        if (!hh || pos_ >= src_.size() || src_[pos_] != ':') {
          t.kind = Tok::Error;
          t.span.end = here();
          diags.push_back({Severity::Error, t.span, "malformed time literal (expected @HH:MM)", {}});
          return t;
        }
        advance();
        auto mm = read_digits();
        if (!mm || *mm > 59) {
          t.kind = Tok::Error;
          t.span.end = here();
          diags.push_back({Severity::Error, t.span, "malformed time literal (bad minutes)", {}});
          return t;
        }
        t.kind = Tok::TimeTok;
        t.millis = (*hh * 60 + *mm) * 60000ull;
      }
    } else if (c == '~') {
      advance();
      std::size_t start = pos_;
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) advance();
      if (pos_ == start) {
        t.kind = Tok::Error;
        t.span.end = here();
        diags.push_back({Severity::Error, t.span, "malformed duration literal (expected ~N)", {}});
        return t;
      }
      t.kind = Tok::DurTok;
      t.millis = std::stoull(std::string(src_.substr(start, pos_ - start)));
    } else if (c == '-' && pos_ + 1 < src_.size() && src_[pos_ + 1] == '>') {
      advance(); advance();
      t.kind = Tok::Arrow;
    } else {
      advance();
      switch (c) {
        case '(': t.kind = Tok::LParen; break;
        case ')': t.kind = Tok::RParen; break;
        case '{': t.kind = Tok::LBrace; break;
        case '}': t.kind = Tok::RBrace; break;
        case '<': t.kind = Tok::LAngle; break;
        case '>': t.kind = Tok::RAngle; break;
        case ',': t.kind = Tok::Comma; break;
        case '.': t.kind = Tok::Dot; break;
        case ':': t.kind = Tok::Colon; break;
        case '=': t.kind = Tok::Eq; break;
        case '\\': t.kind = Tok::Backslash; break;
        case '*': t.kind = Tok::Star; break;
        case '+': t.kind = Tok::Plus; break;
        default:
          t.kind = Tok::Error;
          t.span.end = here();
          diags.push_back({Severity::Error, t.span,
                           std::string("unexpected character '") + c + "'", {}});
          return t;
      }
    }
    t.span.end = here();
    return t;
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  std::uint32_t line_ = 1, col_ = 1;
};

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

struct ParseFail {};  // diagnostics already recorded

class Parser {
 public:
  Parser(std::string_view src, std::vector<Diagnostic>& diags)
      : diags_(diags), tokens_(Lexer(src).run(diags)) {}

  std::optional<ModuleAst> module() {
    ModuleAst m;
    bool failed = !diags_.empty();
    while (peek().kind != Tok::End) {
      try {
        m.decls.push_back(decl());
      } catch (ParseFail&) {
        failed = true;
        sync_to_decl();
      }
    }
    if (failed || has_errors()) return std::nullopt;
    return m;
  }

  std::optional<Term> single_expr() {
    if (has_errors()) return std::nullopt;
    try {
      Term t = expr();
      if (peek().kind != Tok::End) fail(peek().span, "trailing input after expression");
      return t;
    } catch (ParseFail&) {
      return std::nullopt;
    }
  }

 private:
  bool has_errors() const {
    return std::any_of(diags_.begin(), diags_.end(),
                       [](const Diagnostic& d) { return d.severity == Severity::Error; });
  }

  const Token& peek(std::size_t ahead = 0) const {
    std::size_t i = std::min(idx_ + ahead, tokens_.size() - 1);
    return tokens_[i];
  }
  Token take() {
    Token t = tokens_[idx_];
    if (idx_ + 1 < tokens_.size()) ++idx_;
    return t;
  }

  [[noreturn]] void fail(SourceSpan span, std::string msg) {
    diags_.push_back({Severity::Error, span, std::move(msg), {}});
    throw ParseFail{};
  }

  Token expect(Tok kind, const char* what) {
    if (peek().kind != kind) fail(peek().span, std::string("expected ") + what);
    return take();
  }
  std::string ident(const char* what) {
    if (peek().kind != Tok::Ident) fail(peek().span, std::string("expected ") + what);
    return take().text;
  }
  bool at_kw(const char* kw) const { return peek().kind == Tok::Ident && peek().text == kw; }
  bool eat_kw(const char* kw) {
    if (!at_kw(kw)) return false;
    take();
    return true;
  }
  void expect_kw(const char* kw) {
    if (!eat_kw(kw)) fail(peek().span, std::string("expected keyword '") + kw + "'");
  }

  void sync_to_decl() {
    static const char* kws[] = {"sort", "type", "def", "axiom", "registry",
                                "init", "event", "template", "watcher"};
    while (peek().kind != Tok::End) {
      if (peek().kind == Tok::Ident)
        for (const char* k : kws)
          if (peek().text == k) return;
      take();
    }
  }

  // -- declarations ----------------------------------------------------------

  Decl decl() {
    if (eat_kw("sort")) return SortDecl{ident("sort name")};
    if (eat_kw("axiom")) {
      std::string name = ident("axiom name");
      expect(Tok::Colon, "':'");
      return AxiomDecl{std::move(name), expr()};
    }
    if (eat_kw("type")) {
      std::string name = ident("type name");
      expect(Tok::Eq, "'='");
      return DefDecl{std::move(name), std::nullopt, expr()};
    }
    if (eat_kw("def")) {
      std::string name = ident("definition name");
      expect(Tok::Colon, "':'");
      Term ty = expr();
      expect(Tok::Eq, "'='");
      return DefDecl{std::move(name), std::move(ty), expr()};
    }
    if (eat_kw("registry")) {
      RegistryDecl r{ident("registry name"), {}};
      expect(Tok::LBrace, "'{'");
      if (peek().kind != Tok::RBrace) {
        for (;;) {
          r.members.push_back(expect(Tok::String, "registry member string").text);
          if (peek().kind == Tok::Comma) {
            take();
            continue;
          }
          break;
        }
      }
      expect(Tok::RBrace, "'}'");
      return r;
    }
    if (eat_kw("init")) {
      std::string id = ident("fact id");
      expect(Tok::Colon, "':'");
      Term ty = expr();
      expect(Tok::Eq, "'='");
      return InitDecl{std::move(id), std::move(ty), expr()};
    }
    if (eat_kw("event")) return event_decl();
    if (eat_kw("template")) return template_decl();
    if (eat_kw("watcher")) return watcher_decl();
    fail(peek().span, "expected a declaration (sort, type, def, axiom, registry, init, "
                      "event, template, watcher)");
  }

  kernel::EventDef event_decl() {
    kernel::EventDef ev;
    ev.name = ident("event name");
    expect(Tok::LParen, "'('");
    ev.arg_name = ident("argument name");
    expect(Tok::Colon, "':'");
    ev.args_type = expr();
    expect(Tok::RParen, "')'");
    expect(Tok::LBrace, "'{'");

    Term trivially_true = Term::id_type(Term::base(BaseKind::Val), Term::val(0), Term::val(0));
    std::optional<Term> pre_body, post_body;

    while (peek().kind != Tok::RBrace) {
      if (eat_kw("pre")) {
        pre_body = bound_expr(ev.arg_name);
      } else if (eat_kw("post")) {
        post_body = bound_expr(ev.arg_name);
      } else if (eat_kw("op")) {
        expect(Tok::LBrace, "'{'");
        while (peek().kind != Tok::RBrace) {
          if (eat_kw("add")) {
            kernel::EffectAdd add;
            add.id_stem = ident("fact id");
            // trailing '*' appends the commit clock to keep repeated ids unique
            if (peek().kind == Tok::Star) {
              take();
              add.clock_suffix = true;
            }
            expect(Tok::Colon, "':'");
            add.type_fn = wrap_fn(ev.arg_name, ev.args_type, bound_expr(ev.arg_name));
            expect(Tok::Eq, "'='");
            add.term_fn = wrap_fn(ev.arg_name, ev.args_type, bound_expr(ev.arg_name));
            ev.op.adds.push_back(std::move(add));
          } else if (eat_kw("invalidate")) {
            ev.op.invalidates.push_back(ident("fact id"));
          } else if (eat_kw("enqueue")) {
            kernel::EffectEnqueue enq;
            enq.event = ident("event name");
            expect(Tok::LParen, "'('");
            enq.args_fn = wrap_fn(ev.arg_name, ev.args_type, bound_expr(ev.arg_name));
            expect(Tok::RParen, "')'");
            ev.op.enqueues.push_back(std::move(enq));
          } else if (eat_kw("clock")) {
            Token n = expect(Tok::Number, "clock increment");
            ev.op.clock_increment = n.number.convert_to<std::uint64_t>();
          } else {
            fail(peek().span, "expected add, invalidate, enqueue or clock");
          }
        }
        expect(Tok::RBrace, "'}'");
      } else {
        fail(peek().span, "expected pre, op or post");
      }
    }
    expect(Tok::RBrace, "'}'");
    ev.pre_fn = wrap_fn(ev.arg_name, ev.args_type, pre_body.value_or(trivially_true));
    ev.post_fn = wrap_fn(ev.arg_name, ev.args_type, post_body.value_or(trivially_true));
    return ev;
  }

  TemplateDecl template_decl() {
    TemplateDecl t;
    t.name = ident("template name");
    expect(Tok::LBrace, "'{'");
    while (peek().kind != Tok::RBrace) {
      if (eat_kw("kind")) {
        t.kind = expect(Tok::String, "signal kind string").text;
      } else if (eat_kw("event")) {
        t.event = ident("event name");
      } else if (eat_kw("args")) {
        t.args_recipe = expr();
      } else {
        fail(peek().span, "expected kind, event or args");
      }
    }
    expect(Tok::RBrace, "'}'");
    if (t.kind.empty()) fail(peek().span, "template is missing its kind");
    if (t.event.empty()) fail(peek().span, "template is missing its event");
    return t;
  }

  search::Watcher watcher_decl() {
    search::Watcher w;
    w.name = ident("watcher name");
    expect(Tok::LBrace, "'{'");
    while (peek().kind != Tok::RBrace) {
      if (eat_kw("on")) {
        w.subject_type = ident("subject type");
      } else if (eat_kw("join")) {
        w.partner_type = ident("partner type");
        expect_kw("key");
        w.subject_key = expr();
        expect(Tok::Eq, "'='");
        w.partner_key = expr();
      } else if (eat_kw("guard")) {
        w.guard = expr();
      } else if (eat_kw("emit")) {
        w.emit_event = ident("event name");
        expect(Tok::LParen, "'('");
        w.emit_args = expr();
        expect(Tok::RParen, "')'");
      } else {
        fail(peek().span, "expected on, join, guard or emit");
      }
    }
    expect(Tok::RBrace, "'}'");
    if (w.subject_type.empty()) fail(peek().span, "watcher is missing its subject type");
    if (w.partner_type.empty()) fail(peek().span, "watcher is missing its join partner");
    if (w.emit_event.empty()) fail(peek().span, "watcher is missing its emit clause");
    return w;
  }

  // Parse an expression with one bound name in scope, returning the body.
  Term bound_expr(const std::string& binder) {
    binders_.push_back(binder);
    Term t = expr();
    binders_.pop_back();
    return t;
  }

  static Term wrap_fn(const std::string& arg, const Term& args_type, Term body) {
    return Term::lam(arg, args_type, std::move(body));
  }

  // -- expressions -----------------------------------------------------------

  Term expr() { return arrow_expr(); }

  bool binder_ahead() const {
    return peek().kind == Tok::LParen && peek(1).kind == Tok::Ident &&
           peek(2).kind == Tok::Colon;
  }

  Term arrow_expr() {
    Term l = prod_expr();
    if (peek().kind == Tok::Arrow) {
      take();
      return Term::arrow(l, arrow_expr());
    }
    return l;
  }

  Term prod_expr() {
    if (binder_ahead()) {
      take();  // '('
      std::string name = take().text;
      take();  // ':'
      Term dom = arrow_expr();
      expect(Tok::RParen, "')'");
      if (peek().kind == Tok::Arrow) {
        take();
        binders_.push_back(name);
        Term cod = arrow_expr();
        binders_.pop_back();
        return Term::pi(name, dom, cod);
      }
      if (peek().kind == Tok::Star) {
        take();
        binders_.push_back(name);
        Term snd = prod_expr();
        binders_.pop_back();
        return Term::sigma(name, dom, snd);
      }
      fail(peek().span, "expected '->' or '*' after binder");
    }
    Term l = sum_expr();
    if (peek().kind == Tok::Star) {
      take();
      return Term::product(l, prod_expr());
    }
    return l;
  }

  Term sum_expr() {
    Term l = app_expr();
    while (peek().kind == Tok::Plus) {
      take();
      l = Term::sum(l, app_expr());
    }
    return l;
  }

  // Structural keywords never begin an expression atom; this keeps
  // juxtaposition application from running into the next clause.
  static bool reserved_word(const std::string& s) {
    static const char* kReserved[] = {
        "sort", "type", "def",  "axiom",      "registry", "init",  "event", "template",
        "watcher", "pre", "op", "post", "add", "invalidate", "enqueue", "clock",
        "kind", "args", "on",   "join",       "key",      "guard", "emit",  "in"};
    for (const char* k : kReserved)
      if (s == k) return true;
    return false;
  }

  bool starts_atom() const {
    switch (peek().kind) {
      case Tok::Ident:
        return !reserved_word(peek().text);
      case Tok::Number:
      case Tok::String:
      case Tok::TimeTok:
      case Tok::DurTok:
      case Tok::LParen:
      case Tok::LAngle:
      case Tok::Backslash:
        return true;
      default:
        return false;
    }
  }

  Term app_expr() {
    Term t = atom();
    for (;;) {
      // f(a, b, c) is application sugar for f a b c
      if (peek().kind == Tok::LParen && !binder_ahead()) {
        take();
        t = Term::app(t, expr());
        while (peek().kind == Tok::Comma) {
          take();
          t = Term::app(t, expr());
        }
        expect(Tok::RParen, "')'");
        continue;
      }
      if (!starts_atom() || peek().kind == Tok::LParen) break;
      t = Term::app(t, atom());
    }
    return t;
  }

  Term resolve_name(const std::string& name) {
    for (std::size_t i = binders_.size(); i-- > 0;) {
      if (binders_[i] == name)
        return Term::var(static_cast<std::uint32_t>(binders_.size() - 1 - i));
    }
    return Term::constant(name);
  }

  Term prim_atom(PrimTag tag, bool refuting) {
    expect(Tok::LParen, "'('");
    Term a = expr();
    expect(Tok::Comma, "','");
    Term b = expr();
    expect(Tok::RParen, "')'");
    return Term::prim(tag, refuting, {a, b});
  }

  Term lt_sugar(BaseKind carrier) {
    expect(Tok::LParen, "'('");
    Term a = expr();
    expect(Tok::Comma, "','");
    Term b = expr();
    expect(Tok::RParen, "')'");
    std::string le(carrier == BaseKind::Time ? kConstLeTime : kConstLeVal);
    Term le_app = Term::app(Term::app(Term::constant(le), a), b);
    Term neq = Term::arrow(Term::id_type(Term::base(carrier), a, b), Term::empty());
    return Term::product(le_app, neq);
  }

  Term atom() {
    const Token& tk = peek();
    switch (tk.kind) {
      case Tok::LParen: {
        take();
        Term t = expr();
        expect(Tok::RParen, "')'");
        return t;
      }
      case Tok::LAngle: {
        take();
        Term a = expr();
        expect(Tok::Comma, "','");
        Term b = expr();
        expect(Tok::RAngle, "'>'");
        return Term::pair(a, b);
      }
      case Tok::Backslash: {
        take();
        std::string name = ident("binder name");
        std::optional<Term> annot;
        if (peek().kind == Tok::Colon) {
          take();
          annot = arrow_expr();
        }
        expect(Tok::Dot, "'.'");
        binders_.push_back(name);
        Term body = arrow_expr();
        binders_.pop_back();
        return Term::lam(name, annot, body);
      }
      case Tok::Number: {
        Token n = take();
        return Term::val(n.number);
      }
      case Tok::String: {
        Token s = take();
        return Term::id_lit(s.text);
      }
      case Tok::TimeTok: {
        Token s = take();
        return Term::time(TimeKind::Timestamp, s.millis);
      }
      case Tok::DurTok: {
        Token s = take();
        return Term::time(TimeKind::Duration, s.millis);
      }
      case Tok::Ident:
        break;
      default:
        fail(tk.span, "expected an expression");
    }

    Token name_tok = take();
    const std::string& name = name_tok.text;

    if (name == "split") {
      expect(Tok::LParen, "'('");
      Term scrut = expr();
      expect(Tok::Comma, "','");
      std::string n1 = ident("binder name");
      expect(Tok::Dot, "'.'");
      std::string n2 = ident("binder name");
      expect(Tok::Dot, "'.'");
      binders_.push_back(n1);
      binders_.push_back(n2);
      Term body = expr();
      binders_.pop_back();
      binders_.pop_back();
      expect(Tok::RParen, "')'");
      return Term::split(scrut, n1, n2, body);
    }
    if (name == "case") {
      expect(Tok::LParen, "'('");
      Term scrut = expr();
      expect(Tok::Comma, "','");
      std::string nl = ident("binder name");
      expect(Tok::Dot, "'.'");
      binders_.push_back(nl);
      Term l = expr();
      binders_.pop_back();
      expect(Tok::Comma, "','");
      std::string nr = ident("binder name");
      expect(Tok::Dot, "'.'");
      binders_.push_back(nr);
      Term r = expr();
      binders_.pop_back();
      expect(Tok::RParen, "')'");
      return Term::case_of(scrut, nl, l, nr, r);
    }
    if (name == "inl" || name == "inr") {
      expect(Tok::LParen, "'('");
      Term payload = expr();
      expect(Tok::Comma, "','");
      Term other = expr();
      expect(Tok::RParen, "')'");
      return name == "inl" ? Term::inl(payload, other) : Term::inr(payload, other);
    }
    if (name == "refl") return Term::refl();
    if (name == "Id") {
      expect(Tok::LParen, "'('");
      Term a = expr();
      expect(Tok::Comma, "','");
      Term l = expr();
      expect(Tok::Comma, "','");
      Term r = expr();
      expect(Tok::RParen, "')'");
      return Term::id_type(a, l, r);
    }
    if (name == "let") {
      std::string x = ident("binder name");
      expect(Tok::Colon, "':'");
      Term ty = expr();
      expect(Tok::Eq, "'='");
      Term bound = expr();
      expect_kw("in");
      binders_.push_back(x);
      Term body = arrow_expr();
      binders_.pop_back();
      return Term::let_in(x, bound, ty, body);
    }
    if (name == "p1" || name == "p2") {
      expect(Tok::LParen, "'('");
      Term t = expr();
      expect(Tok::RParen, "')'");
      return name == "p1" ? Term::proj1(t) : Term::proj2(t);
    }
    if (name == "prim_le") return prim_atom(PrimTag::LeVal, false);
    if (name == "prim_le_t") return prim_atom(PrimTag::LeTime, false);
    if (name == "prim_eq") return prim_atom(PrimTag::EqVal, false);
    if (name == "prim_in") return prim_atom(PrimTag::InSet, false);
    if (name == "prim_no_le") return prim_atom(PrimTag::LeVal, true);
    if (name == "prim_no_le_t") return prim_atom(PrimTag::LeTime, true);
    if (name == "prim_no_eq") return prim_atom(PrimTag::EqVal, true);
    if (name == "prim_no_in") return prim_atom(PrimTag::InSet, true);
    if (name == "lt_val") return lt_sugar(BaseKind::Val);
    if (name == "lt_time") return lt_sugar(BaseKind::Time);
    if (name == "Prop") return Term::sort(Sort::prop());
    if (name == "Type" && peek().kind == Tok::LParen) {
      take();
      Token n = expect(Tok::Number, "universe level");
      expect(Tok::RParen, "')'");
      return Term::sort(Sort::type(n.number.convert_to<std::uint32_t>()));
    }
    if (name == "Data" && peek().kind == Tok::LParen) {
      take();
      Token n = expect(Tok::Number, "universe level");
      expect(Tok::RParen, "')'");
      return Term::sort(Sort::data(n.number.convert_to<std::uint32_t>()));
    }
    if (name == "Val") return Term::base(BaseKind::Val);
    if (name == "Time") return Term::base(BaseKind::Time);
    if (name == "ID") return Term::base(BaseKind::Id);
    if (name == "Empty") return Term::empty();
    return resolve_name(name);
  }

  std::vector<Diagnostic>& diags_;
  std::vector<Token> tokens_;
  std::size_t idx_ = 0;
  std::vector<std::string> binders_;
};

}  // namespace

std::string render_diagnostic(const Diagnostic& d) {
  std::ostringstream os;
  switch (d.severity) {
    case Severity::Error: os << "error"; break;
    case Severity::Warning: os << "warning"; break;
    case Severity::Note: os << "note"; break;
  }
  os << " at " << d.span.begin.line << ":" << d.span.begin.col << ": " << d.message;
  for (const auto& [span, note] : d.notes)
    os << "\n  note at " << span.begin.line << ":" << span.begin.col << ": " << note;
  return os.str();
}

ParseResult parse_defs(std::string_view source) {
  ParseResult r;
  Parser p(source, r.diagnostics);
  r.module = p.module();
  return r;
}

ExprParseResult parse_expr(std::string_view source) {
  ExprParseResult r;
  Parser p(source, r.diagnostics);
  r.term = p.single_expr();
  return r;
}

// ---------------------------------------------------------------------------
// Printing
// ---------------------------------------------------------------------------

namespace {

// precedence levels: 0 arrow/lam/let, 1 product, 2 sum, 3 application, 4 atom
constexpr int kArrow = 0, kProd = 1, kSum = 2, kApp = 3, kAtom = 4;

struct Printer {
  std::vector<std::string> names;

  std::string fresh(const std::string& hint) {
    std::string base = hint.empty() ? "x" : hint;
    std::string candidate = base;
    int n = 1;
    while (std::find(names.begin(), names.end(), candidate) != names.end())
      candidate = base + std::to_string(n++);
    return candidate;
  }

  static std::string quote(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
      if (c == '"' || c == '\\') out.push_back('\\');
      out.push_back(c);
    }
    out.push_back('"');
    return out;
  }

  std::string paren(int have, int want, std::string s) const {
    if (have < want) return "(" + std::move(s) + ")";
    return s;
  }

  std::string print(const Term& t, int prec) {
    using namespace node;
    const auto& p = t.payload();

    if (const auto* v = std::get_if<Var>(&p)) {
      if (v->index < names.size()) return names[names.size() - 1 - v->index];
      return "#" + std::to_string(v->index);
    }
    if (const auto* c = std::get_if<Const>(&p)) return c->name;
    if (const auto* lam = std::get_if<Lam>(&p)) {
      std::string n = fresh(lam->name);
      std::string annot = lam->annot ? " : " + print(*lam->annot, kArrow) : "";
      names.push_back(n);
      std::string body = print(lam->body, kArrow);
      names.pop_back();
      return paren(kArrow, prec, "\\" + n + annot + ". " + body);
    }
    if (const auto* a = std::get_if<App>(&p))
      return paren(kApp, prec, print(a->fn, kApp) + " " + print(a->arg, kAtom));
    if (const auto* pr = std::get_if<Pair>(&p))
      return "<" + print(pr->fst, kArrow) + ", " + print(pr->snd, kArrow) + ">";
    if (const auto* sp = std::get_if<Split>(&p)) {
      // projection sugar
      if (const auto* v = sp->body.as<Var>()) {
        if (v->index == 1 && sp->name_fst == "x" && sp->name_snd == "y")
          return "p1(" + print(sp->scrutinee, kArrow) + ")";
        if (v->index == 0 && sp->name_fst == "x" && sp->name_snd == "y")
          return "p2(" + print(sp->scrutinee, kArrow) + ")";
      }
      std::string n1 = fresh(sp->name_fst);
      names.push_back(n1);
      std::string n2 = fresh(sp->name_snd);
      names.push_back(n2);
      std::string body = print(sp->body, kArrow);
      names.pop_back();
      names.pop_back();
      return "split(" + print(sp->scrutinee, kArrow) + ", " + n1 + "." + n2 + ". " + body + ")";
    }
    if (const auto* il = std::get_if<Inl>(&p))
      return "inl(" + print(il->payload, kArrow) + ", " + print(il->other, kArrow) + ")";
    if (const auto* ir = std::get_if<Inr>(&p))
      return "inr(" + print(ir->payload, kArrow) + ", " + print(ir->other, kArrow) + ")";
    if (const auto* cs = std::get_if<Case>(&p)) {
      std::string nl = fresh(cs->name_left);
      names.push_back(nl);
      std::string l = print(cs->left, kArrow);
      names.pop_back();
      std::string nr = fresh(cs->name_right);
      names.push_back(nr);
      std::string r = print(cs->right, kArrow);
      names.pop_back();
      return "case(" + print(cs->scrutinee, kArrow) + ", " + nl + ". " + l + ", " + nr + ". " +
             r + ")";
    }
    if (std::holds_alternative<Refl>(p)) return "refl";
    if (const auto* pi = std::get_if<Pi>(&p)) {
      bool dependent = free_vars(pi->codomain).count(0) > 0;
      if (dependent) {
        std::string n = fresh(pi->name);
        std::string dom = print(pi->domain, kArrow);
        names.push_back(n);
        std::string cod = print(pi->codomain, kArrow);
        names.pop_back();
        return paren(kArrow, prec, "(" + n + " : " + dom + ") -> " + cod);
      }
      std::string dom = print(pi->domain, kProd);
      names.push_back("_");
      std::string cod = print(pi->codomain, kArrow);
      names.pop_back();
      return paren(kArrow, prec, dom + " -> " + cod);
    }
    if (const auto* sg = std::get_if<Sigma>(&p)) {
      bool dependent = free_vars(sg->snd_type).count(0) > 0;
      if (dependent) {
        std::string n = fresh(sg->name);
        std::string fst = print(sg->fst_type, kArrow);
        names.push_back(n);
        std::string snd = print(sg->snd_type, kProd);
        names.pop_back();
        return paren(kProd, prec, "(" + n + " : " + fst + ") * " + snd);
      }
      std::string fst = print(sg->fst_type, kSum);
      names.push_back("_");
      std::string snd = print(sg->snd_type, kProd);
      names.pop_back();
      return paren(kProd, prec, fst + " * " + snd);
    }
    if (const auto* sm = std::get_if<Sum>(&p))
      return paren(kSum, prec, print(sm->left, kSum) + " + " + print(sm->right, kApp));
    if (const auto* id = std::get_if<IdType>(&p))
      return "Id(" + print(id->carrier, kArrow) + ", " + print(id->lhs, kArrow) + ", " +
             print(id->rhs, kArrow) + ")";
    if (const auto* st = std::get_if<SortTerm>(&p)) return st->sort.str();
    if (const auto* b = std::get_if<BaseType>(&p)) return base_kind_name(b->kind);
    if (const auto* v = std::get_if<ValLit>(&p)) return v->value.str();
    if (const auto* tl = std::get_if<TimeLit>(&p)) {
      if (tl->kind == TimeKind::Duration) return "~" + std::to_string(tl->millis);
      return "@" + format_time(*tl);
    }
    if (const auto* s = std::get_if<IdLit>(&p)) return quote(s->value);
    if (const auto* lt = std::get_if<Let>(&p)) {
      std::string n = fresh(lt->name);
      std::string ty = print(lt->bound_type, kArrow);
      std::string bound = print(lt->bound, kArrow);
      names.push_back(n);
      std::string body = print(lt->body, kArrow);
      names.pop_back();
      return paren(kArrow, prec, "let " + n + " : " + ty + " = " + bound + " in " + body);
    }
    if (const auto* pp = std::get_if<PrimProof>(&p)) {
      std::string head;
      switch (pp->tag) {
        case PrimTag::LeVal: head = pp->refuting ? "prim_no_le" : "prim_le"; break;
        case PrimTag::LeTime: head = pp->refuting ? "prim_no_le_t" : "prim_le_t"; break;
        case PrimTag::EqVal: head = pp->refuting ? "prim_no_eq" : "prim_eq"; break;
        case PrimTag::InSet: head = pp->refuting ? "prim_no_in" : "prim_in"; break;
      }
      std::string out = head + "(";
      for (std::size_t i = 0; i < pp->operands.size(); ++i) {
        if (i) out += ", ";
        out += print(pp->operands[i], kArrow);
      }
      return out + ")";
    }
    return "Empty";
  }
};

}  // namespace

std::string format_time(const node::TimeLit& t) {
  if (t.kind == TimeKind::Timestamp && t.millis % 60000 == 0 && t.millis < 86'400'000ull) {
    std::uint64_t minutes = t.millis / 60000;
    std::uint64_t hh = minutes / 60, mm = minutes % 60;
    char buf[8];
    std::snprintf(buf, sizeof buf, "%02llu:%02llu", static_cast<unsigned long long>(hh),
                  static_cast<unsigned long long>(mm));
    return buf;
  }
  return "ms(" + std::to_string(t.millis) + ")";
}

std::string print_term(const Term& t) {
  Printer p;
  return p.print(t, kArrow);
}

std::string print_sort(const Sort& s) { return s.str(); }

namespace {

// Print the body of a one-binder function with the binder name in scope.
std::string print_fn_body(const Term& fn) {
  if (const auto* lam = fn.as<node::Lam>()) {
    Printer p;
    p.names.push_back(lam->name);
    return p.print(lam->body, kArrow);
  }
  return print_term(fn);
}

bool is_trivial_prop(const Term& t) {
  const auto* id = t.as<node::IdType>();
  if (!id) return false;
  const auto* l = id->lhs.as<node::ValLit>();
  const auto* r = id->rhs.as<node::ValLit>();
  return l && r && l->value == 0 && r->value == 0 && id->carrier.is<node::BaseType>();
}

}  // namespace

std::string print_module(const ModuleAst& m) {
  std::ostringstream os;
  bool first = true;
  for (const Decl& d : m.decls) {
    if (!first) os << "\n";
    first = false;
    if (const auto* s = std::get_if<SortDecl>(&d)) {
      os << "sort " << s->name << "\n";
    } else if (const auto* a = std::get_if<AxiomDecl>(&d)) {
      os << "axiom " << a->name << " : " << print_term(a->type) << "\n";
    } else if (const auto* f = std::get_if<DefDecl>(&d)) {
      if (f->type)
        os << "def " << f->name << " : " << print_term(*f->type) << " = "
           << print_term(f->body) << "\n";
      else
        os << "type " << f->name << " = " << print_term(f->body) << "\n";
    } else if (const auto* r = std::get_if<RegistryDecl>(&d)) {
      os << "registry " << r->name << " { ";
      for (std::size_t i = 0; i < r->members.size(); ++i) {
        if (i) os << ", ";
        os << Printer::quote(r->members[i]);
      }
      os << " }\n";
    } else if (const auto* i = std::get_if<InitDecl>(&d)) {
      os << "init " << i->id << " : " << print_term(i->type) << " = " << print_term(i->value)
         << "\n";
    } else if (const auto* ev = std::get_if<kernel::EventDef>(&d)) {
      os << "event " << ev->name << "(" << ev->arg_name << " : " << print_term(ev->args_type)
         << ") {\n";
      const auto* pre_lam = ev->pre_fn.as<node::Lam>();
      if (!pre_lam || !is_trivial_prop(pre_lam->body))
        os << "  pre " << print_fn_body(ev->pre_fn) << "\n";
      if (!ev->op.adds.empty() || !ev->op.invalidates.empty() || !ev->op.enqueues.empty() ||
          ev->op.clock_increment != 1) {
        os << "  op {\n";
        for (const auto& add : ev->op.adds) {
          os << "    add " << add.id_stem << (add.clock_suffix ? "*" : "") << " : "
             << print_fn_body(add.type_fn) << " = " << print_fn_body(add.term_fn) << "\n";
        }
        for (const auto& inv : ev->op.invalidates) os << "    invalidate " << inv << "\n";
        for (const auto& enq : ev->op.enqueues)
          os << "    enqueue " << enq.event << "(" << print_fn_body(enq.args_fn) << ")\n";
        if (ev->op.clock_increment != 1) os << "    clock " << ev->op.clock_increment << "\n";
        os << "  }\n";
      }
      const auto* post_lam = ev->post_fn.as<node::Lam>();
      if (!post_lam || !is_trivial_prop(post_lam->body))
        os << "  post " << print_fn_body(ev->post_fn) << "\n";
      os << "}\n";
    } else if (const auto* t = std::get_if<TemplateDecl>(&d)) {
      os << "template " << t->name << " {\n";
      os << "  kind " << Printer::quote(t->kind) << "\n";
      os << "  event " << t->event << "\n";
      os << "  args " << print_term(t->args_recipe) << "\n";
      os << "}\n";
    } else if (const auto* w = std::get_if<search::Watcher>(&d)) {
      os << "watcher " << w->name << " {\n";
      os << "  on " << w->subject_type << "\n";
      os << "  join " << w->partner_type << " key " << print_term(w->subject_key) << " = "
         << print_term(w->partner_key) << "\n";
      if (w->guard) os << "  guard " << print_term(*w->guard) << "\n";
      os << "  emit " << w->emit_event << "(" << print_term(w->emit_args) << ")\n";
      os << "}\n";
    }
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// AST equality (binder names included; spans are not stored)
// ---------------------------------------------------------------------------

namespace {

bool term_eq(const Term& a, const Term& b);

bool opt_term_eq(const std::optional<Term>& a, const std::optional<Term>& b) {
  if (a.has_value() != b.has_value()) return false;
  return !a || term_eq(*a, *b);
}

bool term_eq(const Term& a, const Term& b) {
  using namespace node;
  if (a.same_node(b)) return true;
  const auto& pa = a.payload();
  const auto& pb = b.payload();
  if (pa.index() != pb.index()) return false;
  if (const auto* x = std::get_if<Lam>(&pa)) {
    const auto& y = std::get<Lam>(pb);
    return x->name == y.name && opt_term_eq(x->annot, y.annot) && term_eq(x->body, y.body);
  }
  if (const auto* x = std::get_if<Split>(&pa)) {
    const auto& y = std::get<Split>(pb);
    return x->name_fst == y.name_fst && x->name_snd == y.name_snd &&
           term_eq(x->scrutinee, y.scrutinee) && term_eq(x->body, y.body);
  }
  if (const auto* x = std::get_if<Case>(&pa)) {
    const auto& y = std::get<Case>(pb);
    return x->name_left == y.name_left && x->name_right == y.name_right &&
           term_eq(x->scrutinee, y.scrutinee) && term_eq(x->left, y.left) &&
           term_eq(x->right, y.right);
  }
  if (const auto* x = std::get_if<Pi>(&pa)) {
    const auto& y = std::get<Pi>(pb);
    // unused binders print in arrow sugar, so their names are unobservable
    bool named = free_vars(x->codomain).count(0) > 0;
    return (!named || x->name == y.name) && term_eq(x->domain, y.domain) &&
           term_eq(x->codomain, y.codomain);
  }
  if (const auto* x = std::get_if<Sigma>(&pa)) {
    const auto& y = std::get<Sigma>(pb);
    bool named = free_vars(x->snd_type).count(0) > 0;
    return (!named || x->name == y.name) && term_eq(x->fst_type, y.fst_type) &&
           term_eq(x->snd_type, y.snd_type);
  }
  if (const auto* x = std::get_if<Let>(&pa)) {
    const auto& y = std::get<Let>(pb);
    return x->name == y.name && term_eq(x->bound, y.bound) &&
           term_eq(x->bound_type, y.bound_type) && term_eq(x->body, y.body);
  }
  return alpha_equal(a, b);
}

bool decl_eq(const Decl& a, const Decl& b) {
  if (a.index() != b.index()) return false;
  if (const auto* x = std::get_if<SortDecl>(&a)) return x->name == std::get<SortDecl>(b).name;
  if (const auto* x = std::get_if<AxiomDecl>(&a)) {
    const auto& y = std::get<AxiomDecl>(b);
    return x->name == y.name && term_eq(x->type, y.type);
  }
  if (const auto* x = std::get_if<DefDecl>(&a)) {
    const auto& y = std::get<DefDecl>(b);
    return x->name == y.name && opt_term_eq(x->type, y.type) && term_eq(x->body, y.body);
  }
  if (const auto* x = std::get_if<RegistryDecl>(&a)) {
    const auto& y = std::get<RegistryDecl>(b);
    return x->name == y.name && x->members == y.members;
  }
  if (const auto* x = std::get_if<InitDecl>(&a)) {
    const auto& y = std::get<InitDecl>(b);
    return x->id == y.id && term_eq(x->type, y.type) && term_eq(x->value, y.value);
  }
  if (const auto* x = std::get_if<kernel::EventDef>(&a)) {
    const auto& y = std::get<kernel::EventDef>(b);
    if (x->name != y.name || x->arg_name != y.arg_name) return false;
    if (!term_eq(x->args_type, y.args_type) || !term_eq(x->pre_fn, y.pre_fn) ||
        !term_eq(x->post_fn, y.post_fn))
      return false;
    if (x->op.adds.size() != y.op.adds.size() || x->op.invalidates != y.op.invalidates ||
        x->op.enqueues.size() != y.op.enqueues.size() ||
        x->op.clock_increment != y.op.clock_increment)
      return false;
    for (std::size_t i = 0; i < x->op.adds.size(); ++i) {
      const auto& xa = x->op.adds[i];
      const auto& ya = y.op.adds[i];
      if (xa.id_stem != ya.id_stem || xa.clock_suffix != ya.clock_suffix ||
          !term_eq(xa.type_fn, ya.type_fn) || !term_eq(xa.term_fn, ya.term_fn))
        return false;
    }
    for (std::size_t i = 0; i < x->op.enqueues.size(); ++i) {
      if (x->op.enqueues[i].event != y.op.enqueues[i].event ||
          !term_eq(x->op.enqueues[i].args_fn, y.op.enqueues[i].args_fn))
        return false;
    }
    return true;
  }
  if (const auto* x = std::get_if<TemplateDecl>(&a)) {
    const auto& y = std::get<TemplateDecl>(b);
    return x->name == y.name && x->kind == y.kind && x->event == y.event &&
           term_eq(x->args_recipe, y.args_recipe);
  }
  if (const auto* x = std::get_if<search::Watcher>(&a)) {
    const auto& y = std::get<search::Watcher>(b);
    if (x->name != y.name || x->subject_type != y.subject_type ||
        x->partner_type != y.partner_type || x->emit_event != y.emit_event)
      return false;
    if (x->guard.has_value() != y.guard.has_value()) return false;
    if (x->guard && !term_eq(*x->guard, *y.guard)) return false;
    return term_eq(x->subject_key, y.subject_key) && term_eq(x->partner_key, y.partner_key) &&
           term_eq(x->emit_args, y.emit_args);
  }
  return false;
}

}  // namespace

bool ast_equal(const ModuleAst& a, const ModuleAst& b) {
  if (a.decls.size() != b.decls.size()) return false;
  for (std::size_t i = 0; i < a.decls.size(); ++i)
    if (!decl_eq(a.decls[i], b.decls[i])) return false;
  return true;
}

// ---------------------------------------------------------------------------
// Report rendering
// ---------------------------------------------------------------------------

namespace {

std::string literal_str(const Term& t) {
  using namespace node;
  if (const auto* v = t.as<ValLit>()) return v->value.str();
  if (const auto* tl = t.as<TimeLit>()) return format_time(*tl);
  if (const auto* s = t.as<IdLit>()) return Printer::quote(s->value);
  return print_term(t);
}

void collect_constraints(const Term& proof, std::vector<std::string>& out) {
  using namespace node;
  if (const auto* pr = proof.as<Pair>()) {
    // strict-comparison sugar: <le(a,b), no_eq(a,b)> renders as a < b
    const auto* le = pr->fst.as<PrimProof>();
    const auto* ne = pr->snd.as<PrimProof>();
    if (le && ne && !le->refuting && ne->refuting && ne->tag == PrimTag::EqVal &&
        (le->tag == PrimTag::LeVal || le->tag == PrimTag::LeTime) &&
        le->operands.size() == 2 && ne->operands.size() == 2 &&
        alpha_equal(le->operands[0], ne->operands[0]) &&
        alpha_equal(le->operands[1], ne->operands[1])) {
      out.push_back(literal_str(le->operands[0]) + " < " + literal_str(le->operands[1]));
      return;
    }
    collect_constraints(pr->fst, out);
    collect_constraints(pr->snd, out);
    return;
  }
  if (const auto* pp = proof.as<PrimProof>()) {
    if (pp->operands.size() == 2) {
      const std::string a = literal_str(pp->operands[0]);
      const std::string b = literal_str(pp->operands[1]);
      switch (pp->tag) {
        case PrimTag::LeVal:
        case PrimTag::LeTime:
          out.push_back(a + (pp->refuting ? " > " : " <= ") + b);
          return;
        case PrimTag::EqVal:
          out.push_back(a + (pp->refuting ? " != " : " = ") + b);
          return;
        case PrimTag::InSet:
          out.push_back(a + (pp->refuting ? " not in " : " in ") + b);
          return;
      }
    }
  }
}

}  // namespace

std::string print_report(const search::RootCauseReport& report) {
  std::ostringstream os;
  os << "root cause report\n";
  os << "  failure: " << report.failure.id << "\n";
  os << "  anomaly: " << report.anomaly.id << "\n";
  if (report.step) os << "  step:    " << report.step->id << "\n";
  os << "  verified constraints:\n";
  std::vector<std::string> lines;
  collect_constraints(report.causal_proof, lines);
  for (const std::string& l : lines) os << "    " << l << "\n";
  os << "  causal proof: " << print_term(report.causal_proof) << "\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// Signals
// ---------------------------------------------------------------------------

SignalParseResult parse_signal(std::string_view line) {
  SignalParseResult r;
  nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
  if (j.is_discarded()) {
    r.error = "malformed record: not valid JSON";
    return r;
  }
  if (!j.is_object()) {
    r.error = "malformed record: expected an object";
    return r;
  }
  static const char* kRequired[] = {"seq", "kind", "payload", "wall_time_ms"};
  for (const char* k : kRequired) {
    if (!j.contains(k)) {
      r.error = std::string("malformed record: missing field '") + k + "'";
      return r;
    }
  }
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* k : kRequired) known = known || it.key() == k;
    if (!known) {
      r.error = "malformed record: unknown field '" + it.key() + "'";
      return r;
    }
  }
  if (!j["seq"].is_number_unsigned()) {
    r.error = "malformed record: seq must be an unsigned integer";
    return r;
  }
  if (!j["kind"].is_string()) {
    r.error = "malformed record: kind must be a string";
    return r;
  }
  if (!j["wall_time_ms"].is_number_unsigned()) {
    r.error = "malformed record: wall_time_ms must be an unsigned integer";
    return r;
  }
  if (!j["payload"].is_object() && !j["payload"].is_string()) {
    r.error = "malformed record: payload must be an object or a hex string";
    return r;
  }
  rt::RawSignal s;
  s.sequence = j["seq"].get<std::uint64_t>();
  s.kind = j["kind"].get<std::string>();
  s.payload = j["payload"];
  s.wall_time_ms = j["wall_time_ms"].get<std::uint64_t>();
  r.signal = std::move(s);
  return r;
}

// ---------------------------------------------------------------------------
// Module elaboration
// ---------------------------------------------------------------------------

namespace {

struct Elab {
  LoadedDefs defs;
  // Checking context: base definitions plus the init facts accepted so far,
  // so later declarations can reference earlier facts. Init facts stay out of
  // defs.ctx itself; at runtime they live in the kernel state.
  Context check_ctx;
  std::vector<Diagnostic> diags;
  FuelState fuel;

  explicit Elab(Fuel f) : fuel(f) {}

  void error(const std::string& msg) { diags.push_back({Severity::Error, {}, msg, {}}); }

  void bind_decl(const std::string& name, const Term& type) {
    defs.ctx.declare(name, type);
    check_ctx.declare(name, type);
  }
  void bind_def(const std::string& name, const Term& body, const Term& type) {
    defs.ctx.define(name, body, type);
    check_ctx.define(name, body, type);
  }

  bool name_free(const std::string& n) {
    if (is_builtin_const(n)) {
      error("'" + n + "' is a built-in name");
      return false;
    }
    if (check_ctx.contains(n)) {
      error("duplicate name '" + n + "'");
      return false;
    }
    return true;
  }

  bool well_sorted(const Term& ty, const std::string& where) {
    SortResult sr = formation_sort(check_ctx, {}, ty, fuel);
    if (const auto* e = std::get_if<TypeError>(&sr)) {
      error(where + ": " + e->message);
      return false;
    }
    if (std::holds_alternative<BudgetOut>(sr)) {
      error(where + ": fuel exhausted while sorting the type");
      return false;
    }
    return true;
  }

  std::optional<Sort> sort_of(const Term& ty, const std::string& where) {
    SortResult sr = formation_sort(check_ctx, {}, ty, fuel);
    if (const auto* e = std::get_if<TypeError>(&sr)) {
      error(where + ": " + e->message);
      return std::nullopt;
    }
    if (std::holds_alternative<BudgetOut>(sr)) {
      error(where + ": fuel exhausted while sorting the type");
      return std::nullopt;
    }
    return std::get<Sort>(sr);
  }

  bool checks(const Term& t, const Term& ty, const std::string& where) {
    CheckResult cr = check(check_ctx, {}, t, ty, fuel);
    if (const auto* e = std::get_if<TypeError>(&cr)) {
      std::string msg = where + ": " + e->message;
      if (e->inferred) msg += " (got " + print_term(*e->inferred) + ")";
      if (e->expected) msg += " (expected " + print_term(*e->expected) + ")";
      error(msg);
      return false;
    }
    if (std::holds_alternative<BudgetOut>(cr)) {
      error(where + ": fuel exhausted while checking");
      return false;
    }
    return true;
  }

  // A one-binder event function: the body must be well-sorted with the
  // argument in scope.
  bool fn_well_sorted(const Term& fn, const std::string& where) {
    const auto* lam = fn.as<node::Lam>();
    if (!lam || !lam->annot) {
      error(where + ": internal: event function is not an annotated lambda");
      return false;
    }
    Locals locals{*lam->annot};
    SortResult sr = formation_sort(check_ctx, locals, lam->body, fuel);
    if (const auto* e = std::get_if<TypeError>(&sr)) {
      error(where + ": " + e->message);
      return false;
    }
    if (std::holds_alternative<BudgetOut>(sr)) {
      error(where + ": fuel exhausted");
      return false;
    }
    return true;
  }

  void run(const ModuleAst& m) {
    for (const Decl& d : m.decls) {
      if (const auto* s = std::get_if<SortDecl>(&d)) {
        if (name_free(s->name)) bind_decl(s->name, Term::sort(Sort::data(0)));
      } else if (const auto* a = std::get_if<AxiomDecl>(&d)) {
        if (name_free(a->name) && well_sorted(a->type, "axiom " + a->name))
          bind_decl(a->name, a->type);
      } else if (const auto* f = std::get_if<DefDecl>(&d)) {
        if (!name_free(f->name)) continue;
        if (f->type) {
          if (well_sorted(*f->type, "def " + f->name) &&
              checks(f->body, *f->type, "def " + f->name))
            bind_def(f->name, f->body, *f->type);
        } else {
          auto s = sort_of(f->body, "type " + f->name);
          if (s) bind_def(f->name, f->body, Term::sort(*s));
        }
      } else if (const auto* r = std::get_if<RegistryDecl>(&d)) {
        if (defs.ctx.registry(r->name)) {
          error("duplicate registry '" + r->name + "'");
        } else {
          defs.ctx.add_registry(r->name, {r->members.begin(), r->members.end()});
          check_ctx.add_registry(r->name, {r->members.begin(), r->members.end()});
        }
      } else if (const auto* i = std::get_if<InitDecl>(&d)) {
        if (!name_free(i->id)) continue;
        if (well_sorted(i->type, "init " + i->id) &&
            checks(i->value, i->type, "init " + i->id)) {
          defs.inits.push_back(*i);
          check_ctx.define(i->id, i->value, i->type);  // later decls may refer to it
        }
      } else if (const auto* ev = std::get_if<kernel::EventDef>(&d)) {
        if (defs.events.count(ev->name)) {
          error("duplicate event '" + ev->name + "'");
          continue;
        }
        bool ok = well_sorted(ev->args_type, "event " + ev->name + " args");
        ok = ok && fn_well_sorted(ev->pre_fn, "event " + ev->name + " pre");
        ok = ok && fn_well_sorted(ev->post_fn, "event " + ev->name + " post");
        for (const auto& add : ev->op.adds)
          ok = ok && fn_well_sorted(add.type_fn, "event " + ev->name + " add " + add.id_stem);
        for (const auto& enq : ev->op.enqueues) {
          if (enq.event != ev->name && !defs.events.count(enq.event)) {
            error("event " + ev->name + " enqueues undeclared event '" + enq.event + "'");
            ok = false;
          }
        }
        if (ok) defs.events.emplace(ev->name, *ev);
      } else if (const auto* t = std::get_if<TemplateDecl>(&d)) {
        if (!defs.events.count(t->event)) {
          error("template " + t->name + " targets undeclared event '" + t->event + "'");
          continue;
        }
        defs.templates.push_back(*t);
      } else if (const auto* w = std::get_if<search::Watcher>(&d)) {
        if (!defs.ctx.contains(w->subject_type))
          error("watcher " + w->name + " watches undeclared type '" + w->subject_type + "'");
        else if (!defs.ctx.contains(w->partner_type))
          error("watcher " + w->name + " joins undeclared type '" + w->partner_type + "'");
        else if (!defs.events.count(w->emit_event))
          error("watcher " + w->name + " emits undeclared event '" + w->emit_event + "'");
        else
          defs.watchers.push_back(*w);
      }
    }
  }
};

}  // namespace

LoadResult elaborate_module(const ModuleAst& m, Fuel fuel) {
  Elab e(fuel);
  e.run(m);
  LoadResult r;
  r.diagnostics = std::move(e.diags);
  bool bad = std::any_of(r.diagnostics.begin(), r.diagnostics.end(),
                         [](const Diagnostic& d) { return d.severity == Severity::Error; });
  if (!bad) r.defs = std::move(e.defs);
  return r;
}

LoadResult load_defs_text(std::string_view source, Fuel fuel) {
  ParseResult pr = parse_defs(source);
  if (!pr.module) {
    LoadResult r;
    r.diagnostics = std::move(pr.diagnostics);
    return r;
  }
  LoadResult r = elaborate_module(*pr.module, fuel);
  r.diagnostics.insert(r.diagnostics.begin(), pr.diagnostics.begin(), pr.diagnostics.end());
  return r;
}

LoadResult load_defs_file(const std::string& path, Fuel fuel) {
  std::ifstream in(path);
  if (!in) {
    LoadResult r;
    r.diagnostics.push_back({Severity::Error, {}, "cannot open " + path, {}});
    return r;
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return load_defs_text(ss.str(), fuel);
}

}  // namespace kos::surface
