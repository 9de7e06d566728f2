#include "kos/cli.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>

#include <CLI11.hpp>

#include "kos/runtime.hpp"
#include "kos/search.hpp"
#include "kos/surface.hpp"

namespace kos::cli {

namespace {

constexpr int kExitOk = 0;
constexpr int kExitDiagnostics = 1;
constexpr int kExitUnknown = 2;
constexpr int kExitDivergence = 3;

struct BudgetFlags {
  std::uint64_t fuel = 1'000'000;
  std::uint64_t depth = 64;
  std::uint64_t timeout_ms = 5000;

  Budget budget() const { return Budget{fuel, static_cast<std::uint32_t>(depth), timeout_ms}; }
  Fuel as_fuel() const { return Fuel{fuel}; }

  void attach(CLI::App* app) {
    app->add_option("--fuel", fuel, "reduction step budget")->check(CLI::PositiveNumber);
    app->add_option("--depth", depth, "search depth budget")->check(CLI::PositiveNumber);
    app->add_option("--timeout-ms", timeout_ms, "wall clock budget in milliseconds")
        ->check(CLI::PositiveNumber);
  }
};

std::optional<surface::LoadedDefs> load_or_report(const std::string& path, Fuel fuel,
                                                  std::ostream& err) {
  surface::LoadResult lr = surface::load_defs_file(path, fuel);
  for (const auto& d : lr.diagnostics) err << surface::render_diagnostic(d) << "\n";
  if (!lr.defs) return std::nullopt;
  return std::move(*lr.defs);
}

int cmd_check(const std::string& defs_path, const BudgetFlags& bf, std::ostream& out,
              std::ostream& err) {
  auto defs = load_or_report(defs_path, bf.as_fuel(), err);
  if (!defs) return kExitDiagnostics;
  CheckResult cr = check_context(defs->ctx, bf.as_fuel());
  if (const TypeError* te = errored(cr)) {
    err << "context error";
    if (te->context_index) err << " at entry " << *te->context_index;
    err << ": " << te->message << "\n";
    return kExitDiagnostics;
  }
  if (out_of_budget(cr)) {
    err << "unknown: fuel exhausted while checking the context\n";
    return kExitUnknown;
  }
  out << "ok: " << defs->ctx.entries().size() << " definitions, " << defs->events.size()
      << " events, " << defs->templates.size() << " templates, " << defs->watchers.size()
      << " watchers\n";
  return kExitOk;
}

int cmd_normalize(const std::string& expr_text, const std::string& defs_path,
                  const BudgetFlags& bf, std::ostream& out, std::ostream& err) {
  Context ctx;
  if (!defs_path.empty()) {
    auto defs = load_or_report(defs_path, bf.as_fuel(), err);
    if (!defs) return kExitDiagnostics;
    ctx = std::move(defs->ctx);
  }
  surface::ExprParseResult pr = surface::parse_expr(expr_text);
  for (const auto& d : pr.diagnostics) err << surface::render_diagnostic(d) << "\n";
  if (!pr.term) return kExitDiagnostics;
  NormalizeResult nr = normalize(*pr.term, ctx, bf.as_fuel());
  if (nr.exhausted) {
    err << "unknown: fuel exhausted after " << nr.trace.size() << " steps\n";
    return kExitUnknown;
  }
  std::size_t core = 0;
  for (const auto& s : nr.trace)
    if (!s.aux) ++core;
  out << surface::print_term(nr.term) << "\n";
  out << "steps: " << nr.trace.size() << " (core " << core << ")\n";
  return kExitOk;
}

int cmd_run(const std::string& defs_path, const std::string& signals_path,
            const std::string& wal_path, const BudgetFlags& bf, bool structured,
            std::int64_t fault_at, std::ostream& out, std::ostream& err) {
  auto defs = load_or_report(defs_path, bf.as_fuel(), err);
  if (!defs) return kExitDiagnostics;

  rt::SignalLoad sl = rt::load_signals_file(signals_path);
  for (const std::string& e : sl.errors) err << "signal " << e << "\n";
  if (sl.signals.empty() && !sl.errors.empty()) return kExitDiagnostics;

  {
    std::ofstream truncate(wal_path, std::ios::trunc);  // fresh log per run
    if (!truncate) {
      err << "cannot open WAL for writing: " << wal_path << "\n";
      return kExitDiagnostics;
    }
  }
  auto wal = std::make_unique<rt::FileWal>(wal_path);
  if (fault_at >= 0) wal->arm_fault(static_cast<std::uint64_t>(fault_at));
  rt::Config cfg = rt::make_config(std::move(*defs), std::move(wal));

  for (rt::RawSignal& s : sl.signals) {
    rt::InjectResult ir = rt::inject(cfg, std::move(s));
    if (auto* ooo = std::get_if<rt::OutOfOrderSequence>(&ir))
      err << "signal rejected: sequence " << ooo->got << " not above " << ooo->last << "\n";
  }

  rt::RunReport report = rt::run_to_quiescence(cfg, bf.budget());
  out << rt::render_report(report, structured);
  if (!structured) {
    out << "final state " << kernel::state_hash(cfg.state).hex() << " clock "
        << cfg.state.clock() << " wal records " << (cfg.next_seq - 1) << "\n";
  }
  return kExitOk;
}

int cmd_replay(const std::string& defs_path, const std::string& wal_path,
               const BudgetFlags& bf, std::ostream& out, std::ostream& err) {
  auto defs = load_or_report(defs_path, bf.as_fuel(), err);
  if (!defs) return kExitDiagnostics;
  rt::RecoverResult rr = rt::recover(wal_path, *defs);
  if (auto* div = std::get_if<rt::ReplayDivergence>(&rr)) {
    err << "replay divergence at record " << div->at_record << ": " << div->detail << "\n";
    return kExitDivergence;
  }
  const auto& state = std::get<kernel::KernelState>(rr);
  out << "recovered state " << kernel::state_hash(state).hex() << " clock " << state.clock()
      << "\n";
  return kExitOk;
}

int cmd_trace(const std::string& defs_path, const std::string& wal_path,
              const std::string& failure_id, const BudgetFlags& bf, std::ostream& out,
              std::ostream& err) {
  auto defs = load_or_report(defs_path, bf.as_fuel(), err);
  if (!defs) return kExitDiagnostics;
  kernel::KernelState state = rt::initial_state(*defs);
  if (!wal_path.empty()) {
    rt::RecoverResult rr = rt::recover(wal_path, *defs);
    if (auto* div = std::get_if<rt::ReplayDivergence>(&rr)) {
      err << "replay divergence at record " << div->at_record << ": " << div->detail << "\n";
      return kExitDivergence;
    }
    state = std::get<kernel::KernelState>(std::move(rr));
  }
  const kernel::KnowledgeItem* failure = state.item(failure_id);
  if (!failure) {
    err << "no fact with id '" << failure_id << "'\n";
    return kExitDiagnostics;
  }
  search::RootCauseResult rr =
      search::build_root_cause(defs->ctx, state.active_items(), *failure, bf.budget());
  if (std::holds_alternative<search::Unknown>(rr)) {
    err << "unknown: budget exhausted during causal search\n";
    return kExitUnknown;
  }
  if (std::holds_alternative<search::NotFound>(rr)) {
    out << "no causal chain found for " << failure_id << "\n";
    return kExitOk;
  }
  out << surface::print_report(std::get<search::RootCauseReport>(rr));
  return kExitOk;
}

int cmd_whatif(const std::string& defs_path, const std::string& removed,
               const std::string& set_spec, const std::string& goal_text,
               const BudgetFlags& bf, std::ostream& out, std::ostream& err) {
  auto defs = load_or_report(defs_path, bf.as_fuel(), err);
  if (!defs) return kExitDiagnostics;
  kernel::KernelState state = rt::initial_state(*defs);
  surface::ExprParseResult pr = surface::parse_expr(goal_text);
  for (const auto& d : pr.diagnostics) err << surface::render_diagnostic(d) << "\n";
  if (!pr.term) return kExitDiagnostics;

  std::vector<kernel::KnowledgeItem> facts = state.active_items();
  if (!set_spec.empty()) {
    auto eq = set_spec.find('=');
    if (eq == std::string::npos) {
      err << "--set expects id=expr\n";
      return kExitDiagnostics;
    }
    surface::ExprParseResult vr = surface::parse_expr(set_spec.substr(eq + 1));
    for (const auto& d : vr.diagnostics) err << surface::render_diagnostic(d) << "\n";
    if (!vr.term) return kExitDiagnostics;
    facts = search::shadow_substitute(facts, set_spec.substr(0, eq), *vr.term);
    search::SearchOutcome so = search::search_proof(defs->ctx, facts, *pr.term, bf.budget());
    if (search::found(so)) {
      out << "Provable\n";
      return kExitOk;
    }
    if (search::unknown(so)) {
      out << "Unknown\n";
      return kExitUnknown;
    }
    out << "Collapses\n";
    return kExitOk;
  }

  search::ContribResult cr =
      search::counterfactual_contrib(defs->ctx, facts, removed, *pr.term, bf.budget());
  if (std::holds_alternative<search::PreconditionUnproven>(cr)) {
    err << "precondition unproven: the goal is not provable from the full fact base\n";
    return kExitDiagnostics;
  }
  switch (std::get<search::Contribution>(cr)) {
    case search::Contribution::Necessary: out << "Necessary\n"; return kExitOk;
    case search::Contribution::Redundant: out << "Redundant\n"; return kExitOk;
    case search::Contribution::Unknown: out << "Unknown\n"; return kExitUnknown;
  }
  return kExitOk;
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"dependently typed knowledge kernel with an event-sourced runtime"};
  app.require_subcommand(1);

  BudgetFlags bf;
  std::string defs_path, signals_path, wal_path, expr_text, failure_id, removed, set_spec,
      goal_text;
  std::string format = "text";
  std::int64_t fault_at = -1;

  CLI::App* c_check = app.add_subcommand("check", "typecheck a definitions module");
  c_check->add_option("--defs", defs_path, "definitions file")->required();
  bf.attach(c_check);

  CLI::App* c_norm = app.add_subcommand("normalize", "normalize one expression");
  c_norm->add_option("expr", expr_text, "expression")->required();
  c_norm->add_option("--defs", defs_path, "definitions file");
  bf.attach(c_norm);

  CLI::App* c_run = app.add_subcommand("run", "ingest signals and drive the kernel");
  c_run->add_option("--defs", defs_path, "definitions file")->required();
  c_run->add_option("--signals", signals_path, "signal stream file")->required();
  c_run->add_option("--wal", wal_path, "write-ahead log path")->required();
  c_run->add_option("--format", format, "text|structured")
      ->check(CLI::IsMember({"text", "structured"}));
  c_run->add_option("--inject-commit-fault", fault_at,
                    "force the Nth commit write to fail (testing)");
  bf.attach(c_run);

  CLI::App* c_replay = app.add_subcommand("replay", "recover state from a write-ahead log");
  c_replay->add_option("--defs", defs_path, "definitions file")->required();
  c_replay->add_option("--wal", wal_path, "write-ahead log path")->required();
  bf.attach(c_replay);

  CLI::App* c_trace = app.add_subcommand("trace", "build a root cause report for a failure");
  c_trace->add_option("--defs", defs_path, "definitions file")->required();
  c_trace->add_option("--failure", failure_id, "failure fact id")->required();
  c_trace->add_option("--wal", wal_path, "restore state from this log first");
  bf.attach(c_trace);

  CLI::App* c_whatif = app.add_subcommand("whatif", "counterfactual contribution of a fact");
  c_whatif->add_option("--defs", defs_path, "definitions file")->required();
  c_whatif->add_option("--remove", removed, "fact id to remove in the shadow state");
  c_whatif->add_option("--set", set_spec, "id=expr literal substitution in the shadow state");
  c_whatif->add_option("--goal", goal_text, "goal proposition")->required();
  bf.attach(c_whatif);

  std::vector<std::string> argv = args;
  std::reverse(argv.begin(), argv.end());
  try {
    app.parse(argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return kExitOk;
    }
    err << e.what() << "\n";
    return kExitDiagnostics;
  }

  try {
    if (c_check->parsed()) return cmd_check(defs_path, bf, out, err);
    if (c_norm->parsed()) return cmd_normalize(expr_text, defs_path, bf, out, err);
    if (c_run->parsed())
      return cmd_run(defs_path, signals_path, wal_path, bf, format == "structured", fault_at,
                     out, err);
    if (c_replay->parsed()) return cmd_replay(defs_path, wal_path, bf, out, err);
    if (c_trace->parsed()) return cmd_trace(defs_path, wal_path, failure_id, bf, out, err);
    if (c_whatif->parsed()) {
      if (removed.empty() && set_spec.empty()) {
        err << "whatif needs --remove or --set\n";
        return kExitDiagnostics;
      }
      return cmd_whatif(defs_path, removed, set_spec, goal_text, bf, out, err);
    }
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kExitDiagnostics;
  }
  return kExitDiagnostics;
}

}  // namespace kos::cli
