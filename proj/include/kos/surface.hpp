#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "kos/kernel.hpp"
#include "kos/search.hpp"
#include "kos/signal.hpp"
#include "kos/term.hpp"

namespace kos::surface {

struct SourcePos {
  std::uint32_t line = 1;
  std::uint32_t col = 1;
};
struct SourceSpan {
  SourcePos begin;
  SourcePos end;
};

enum class Severity : std::uint8_t { Error, Warning, Note };

struct Diagnostic {
  Severity severity = Severity::Error;
  SourceSpan span;
  std::string message;
  std::vector<std::pair<SourceSpan, std::string>> notes;
};

std::string render_diagnostic(const Diagnostic& d);

// ---------------------------------------------------------------------------
// Module AST. Expressions are lowered to core terms at parse time (names
// resolved, binders positional); declarations keep the surface names needed
// to print the module back out. parse(print(m)) == m.
// ---------------------------------------------------------------------------

struct SortDecl { std::string name; };  // opaque atomic type in Data(0)
struct AxiomDecl {
  std::string name;
  Term type;
};
struct DefDecl {
  std::string name;
  std::optional<Term> type;  // absent for the `type N = ...` form (sort inferred)
  Term body;
};
struct RegistryDecl {
  std::string name;
  std::vector<std::string> members;
};
struct InitDecl {
  std::string id;
  Term type;
  Term value;
};
// Signal elaboration recipe: decode the payload into event args. Inside
// `args_recipe` the constants payload / wall_time and the decode helpers
// num, str, time_field, hexbyte, add, mul are interpreted by the elaborator.
struct TemplateDecl {
  std::string name;
  std::string kind;
  std::string event;
  Term args_recipe;
};

using Decl = std::variant<SortDecl, AxiomDecl, DefDecl, RegistryDecl, InitDecl,
                          kernel::EventDef, TemplateDecl, search::Watcher>;

struct ModuleAst {
  std::vector<Decl> decls;
};

bool ast_equal(const ModuleAst& a, const ModuleAst& b);

struct ParseResult {
  std::optional<ModuleAst> module;
  std::vector<Diagnostic> diagnostics;
};

// Single unambiguous parse; duplicate names and unresolved forward references
// are reported as diagnostics. The same input always yields the same
// diagnostic list.
ParseResult parse_defs(std::string_view source);

struct ExprParseResult {
  std::optional<Term> term;
  std::vector<Diagnostic> diagnostics;
};
// Parse one expression; free names become constants, checked later.
ExprParseResult parse_expr(std::string_view source);

// ---------------------------------------------------------------------------
// Printing
// ---------------------------------------------------------------------------

std::string print_term(const Term& t);
std::string print_module(const ModuleAst& m);
std::string print_sort(const Sort& s);

// Human report for a causal chain: ids of the involved items and every
// verified constraint with its literal comparison (e.g. "07:55 < 10:00").
std::string print_report(const search::RootCauseReport& report);

// Time literal rendering shared with reports ("07:55" for clean minutes).
std::string format_time(const node::TimeLit& t);

// ---------------------------------------------------------------------------
// Signal stream records: {"seq":N,"kind":"...","payload":{...},"wall_time_ms":N}
// ---------------------------------------------------------------------------

struct SignalParseResult {
  std::optional<rt::RawSignal> signal;
  std::string error;  // non-empty on failure; the stream itself is never aborted
};
// Strict field validation; unknown extra fields are rejected.
SignalParseResult parse_signal(std::string_view line);

// ---------------------------------------------------------------------------
// Module elaboration: name/typecheck every declaration and split it into the
// runnable pieces (context, events, templates, watchers, initial facts).
// ---------------------------------------------------------------------------

struct LoadedDefs {
  Context ctx;
  std::map<std::string, kernel::EventDef> events;
  std::vector<TemplateDecl> templates;
  std::vector<search::Watcher> watchers;
  std::vector<InitDecl> inits;
};

struct LoadResult {
  std::optional<LoadedDefs> defs;
  std::vector<Diagnostic> diagnostics;
};

LoadResult elaborate_module(const ModuleAst& m, Fuel fuel);
LoadResult load_defs_text(std::string_view source, Fuel fuel);
LoadResult load_defs_file(const std::string& path, Fuel fuel);

}  // namespace kos::surface
