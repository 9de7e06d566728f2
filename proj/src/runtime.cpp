#include "kos/runtime.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace kos::rt {

using nlohmann::json;

// ---------------------------------------------------------------------------
// FileWal
// ---------------------------------------------------------------------------

FileWal::FileWal(std::string path) : path_(std::move(path)) {}

bool FileWal::append_line(const std::string& line) {
  std::uint64_t n = appends_++;
  if (fault_at_ && *fault_at_ == n) {
    fault_at_.reset();
    return false;  // simulated device failure; nothing reaches the medium
  }
  std::ofstream out(path_, std::ios::app | std::ios::binary);
  if (!out) return false;
  out << line << '\n';
  out.flush();
  return out.good();
}

void FileWal::arm_fault(std::uint64_t at_append) { fault_at_ = appends_ + at_append; }

// ---------------------------------------------------------------------------
// Report
// ---------------------------------------------------------------------------

const char* action_kind_name(Action::Kind k) {
  switch (k) {
    case Action::Kind::Committed: return "committed";
    case Action::Kind::Rejected: return "rejected";
    case Action::Kind::Deferred: return "deferred";
    case Action::Kind::Retried: return "retried";
    case Action::Kind::Abandoned: return "abandoned";
    case Action::Kind::Discarded: return "discarded";
    case Action::Kind::CommitFailed: return "commit_failed";
    case Action::Kind::WatcherEmitted: return "watcher_emitted";
  }
  return "?";
}

std::size_t RunReport::count(Action::Kind k) const {
  return static_cast<std::size_t>(
      std::count_if(actions.begin(), actions.end(),
                    [k](const Action& a) { return a.kind == k; }));
}

std::string render_report(const RunReport& r, bool structured) {
  std::ostringstream os;
  if (structured) {
    for (const Action& a : r.actions) {
      json j;
      j["action"] = action_kind_name(a.kind);
      j["seq"] = a.signal_seq;
      j["event"] = a.event;
      j["detail"] = a.detail;
      j["clock"] = a.clock;
      j["state"] = a.state_digest;
      j["wal_seq"] = a.wal_seq;
      os << j.dump() << "\n";
    }
    return os.str();
  }
  for (const Action& a : r.actions) {
    os << action_kind_name(a.kind);
    if (a.signal_seq) os << " signal=" << a.signal_seq;
    if (!a.event.empty()) os << " event=" << a.event;
    if (a.wal_seq) os << " wal=" << a.wal_seq;
    os << " clock=" << a.clock;
    if (!a.detail.empty()) os << " (" << a.detail << ")";
    os << "\n";
  }
  if (r.halted_on_commit_failure) os << "halted: commit failure, live state kept\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

kernel::KernelState initial_state(const surface::LoadedDefs& defs) {
  kernel::KernelState st;
  for (const surface::InitDecl& i : defs.inits) {
    kernel::KnowledgeItem item{i.id, i.value, i.type, 0, kernel::ItemStatus::Active,
                               std::nullopt};
    st.put_item(std::move(item));
  }
  return st;
}

Config make_config(surface::LoadedDefs defs, std::unique_ptr<WalStorage> wal) {
  Config cfg;
  cfg.state = initial_state(defs);
  cfg.defs = std::move(defs);
  cfg.wal = std::move(wal);
  return cfg;
}

// ---------------------------------------------------------------------------
// inject
// ---------------------------------------------------------------------------

InjectResult inject(Config& cfg, RawSignal s) {
  if (cfg.any_injected && s.sequence <= cfg.last_sequence)
    return OutOfOrderSequence{cfg.last_sequence, s.sequence};
  cfg.any_injected = true;
  cfg.last_sequence = s.sequence;
  cfg.raw_queue.push_back(std::move(s));
  return InjectOk{};
}

// ---------------------------------------------------------------------------
// Payload decoding
// ---------------------------------------------------------------------------

namespace {

struct DecodeError {
  std::string message;
};

std::optional<int> hex_nibble(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return std::nullopt;
}

const json* payload_field(const RawSignal& s, const Term& key, DecodeError& err) {
  const auto* lit = key.as<node::IdLit>();
  if (!lit) {
    err.message = "decode: field name must be a string literal";
    return nullptr;
  }
  if (!s.payload.is_object() || !s.payload.contains(lit->value)) {
    err.message = "decode: payload has no field '" + lit->value + "'";
    return nullptr;
  }
  return &s.payload[lit->value];
}

// Interpret the template recipe against one signal. Decode helpers (num, str,
// time_field, hexbyte, add, mul, wall_time, payload) are folded to literals;
// everything else is rebuilt with decoded children.
std::variant<Term, DecodeError> eval_recipe(const Term& recipe, const RawSignal& s) {
  using R = std::variant<Term, DecodeError>;
  DecodeError err;

  std::vector<Term> args;
  const Term* head = &recipe;
  while (const auto* app = head->as<node::App>()) {
    args.push_back(app->arg);
    head = &app->fn;
  }
  std::reverse(args.begin(), args.end());

  if (const auto* c = head->as<node::Const>()) {
    const std::string& n = c->name;
    if (n == "wall_time" && args.empty())
      return R{Term::time(TimeKind::Timestamp, s.wall_time_ms)};
    if (n == "payload") return R{DecodeError{"decode: bare payload reference"}};
    if (n == "num" && args.size() == 1) {
      const json* f = payload_field(s, args[0], err);
      if (!f) return R{err};
      if (!f->is_number_integer() || f->get<std::int64_t>() < 0)
        return R{DecodeError{"decode: field is not a natural"}};
      return R{Term::val(Nat(f->get<std::uint64_t>()))};
    }
    if (n == "str" && args.size() == 1) {
      const json* f = payload_field(s, args[0], err);
      if (!f) return R{err};
      if (!f->is_string()) return R{DecodeError{"decode: field is not a string"}};
      return R{Term::id_lit(f->get<std::string>())};
    }
    if (n == "time_field" && args.size() == 1) {
      const json* f = payload_field(s, args[0], err);
      if (!f) return R{err};
      if (!f->is_number_integer() || f->get<std::int64_t>() < 0)
        return R{DecodeError{"decode: field is not a time"}};
      return R{Term::time(TimeKind::Timestamp, f->get<std::uint64_t>())};
    }
    if (n == "hexbyte" && args.size() == 1) {
      const auto* idx = args[0].as<node::ValLit>();
      if (!idx) return R{DecodeError{"decode: hexbyte index must be a literal"}};
      if (!s.payload.is_string()) return R{DecodeError{"decode: payload is not a hex string"}};
      std::string hex = s.payload.get<std::string>();
      std::size_t i = idx->value.convert_to<std::size_t>();
      if (2 * i + 1 >= hex.size()) return R{DecodeError{"decode: hexbyte index out of range"}};
      auto hi = hex_nibble(hex[2 * i]);
      auto lo = hex_nibble(hex[2 * i + 1]);
      if (!hi || !lo) return R{DecodeError{"decode: payload is not valid hex"}};
      return R{Term::val(Nat((*hi << 4) | *lo))};
    }
    if ((n == "plus" || n == "mul") && args.size() == 2) {
      Nat vals[2];
      for (int i = 0; i < 2; ++i) {
        auto sub = eval_recipe(args[i], s);
        if (auto* e = std::get_if<DecodeError>(&sub)) return R{*e};
        const auto* v = std::get<Term>(sub).as<node::ValLit>();
        if (!v) return R{DecodeError{"decode: arithmetic on a non-numeric value"}};
        vals[i] = v->value;
      }
      Nat result = (n == "plus") ? Nat(vals[0] + vals[1]) : Nat(vals[0] * vals[1]);
      return R{Term::val(std::move(result))};
    }
  }

  // Structural recipe: decode children in place.
  std::size_t n = child_count(recipe);
  if (n == 0) return R{recipe};
  Term out = recipe;
  for (std::uint32_t i = 0; i < n; ++i) {
    auto ch = child_at(out, i);
    if (!ch) continue;
    auto sub = eval_recipe(*ch, s);
    if (auto* e = std::get_if<DecodeError>(&sub)) return R{*e};
    out = *with_child(out, i, std::get<Term>(sub));
  }
  return R{out};
}

}  // namespace

// ---------------------------------------------------------------------------
// elaborate
// ---------------------------------------------------------------------------

ElabResult elaborate(const RawSignal& s, const surface::LoadedDefs& defs,
                     const kernel::KernelState& state, const Budget& budget) {
  const ElabTemplate* tpl = nullptr;
  for (const ElabTemplate& t : defs.templates) {
    if (t.kind == s.kind) {
      tpl = &t;
      break;
    }
  }
  if (!tpl) return ElabNone{"no template for kind '" + s.kind + "'"};

  auto decoded = eval_recipe(tpl->args_recipe, s);
  if (const auto* e = std::get_if<DecodeError>(&decoded)) return ElabNone{e->message};
  Term args = std::get<Term>(decoded);

  auto defit = defs.events.find(tpl->event);
  if (defit == defs.events.end()) return ElabNone{"template targets unknown event"};
  const kernel::EventDef& def = defit->second;

  FuelState fuel(Fuel{budget.fuel});
  Context view = kernel::state_context(defs.ctx, state);
  CheckResult cr = check(view, {}, args, def.args_type, fuel);
  if (const auto* te = std::get_if<TypeError>(&cr))
    return ElabNone{"decoded args do not check: " + te->message};
  if (std::holds_alternative<BudgetOut>(cr)) return ElabNone{"budget exhausted in decode check"};

  NormalizeResult goal = normalize(Term::app(def.pre_fn, args), view, fuel);
  if (goal.exhausted) return ElabNone{"budget exhausted normalizing the precondition"};

  kernel::Obligation ob = kernel::synthesize_obligation(view, goal.term, fuel);
  switch (ob.status) {
    case kernel::ObligationStatus::Found:
      return ElabSome{kernel::instantiate(def, args, ob.proof)};
    case kernel::ObligationStatus::Refuted:
      // No passport can exist; hand the event to the kernel for the formal
      // rejection so the rollback is part of the causal story.
      return ElabSome{kernel::instantiate(def, args, std::nullopt)};
    case kernel::ObligationStatus::Missing:
      return ElabDeferred{ob.missing_goal, term_hash(ob.missing_goal),
                          surface::print_term(ob.missing_goal)};
    case kernel::ObligationStatus::Unknown:
      return ElabNone{"budget exhausted synthesizing the precondition"};
  }
  return ElabNone{"unreachable"};
}

// ---------------------------------------------------------------------------
// WAL serialization
// ---------------------------------------------------------------------------

namespace {

json op_to_json(const kernel::EventOp& op) {
  json adds = json::array();
  for (const auto& a : op.adds) {
    adds.push_back({{"id", a.id_stem},
                    {"suffix", a.clock_suffix},
                    {"type", surface::print_term(a.type_fn)},
                    {"term", surface::print_term(a.term_fn)}});
  }
  json enqs = json::array();
  for (const auto& e : op.enqueues)
    enqs.push_back({{"event", e.event}, {"args", surface::print_term(e.args_fn)}});
  return {{"adds", adds},
          {"invalidates", op.invalidates},
          {"enqueues", enqs},
          {"clock", op.clock_increment}};
}

json event_to_json(const kernel::Event& e) {
  json j;
  j["name"] = e.name;
  j["args"] = surface::print_term(e.args);
  j["args_type"] = surface::print_term(e.args_type);
  j["pre"] = surface::print_term(e.pre_fn);
  j["post"] = surface::print_term(e.post_fn);
  j["op"] = op_to_json(e.op);
  j["prf"] = e.prf ? json(surface::print_term(*e.prf)) : json(nullptr);
  return j;
}

std::optional<Term> parse_term_checked(const std::string& text) {
  surface::ExprParseResult r = surface::parse_expr(text);
  return r.term;
}

std::optional<kernel::Event> event_from_json(const json& j) {
  if (!j.is_object()) return std::nullopt;
  kernel::Event e;
  try {
    e.name = j.at("name").get<std::string>();
    auto args = parse_term_checked(j.at("args").get<std::string>());
    auto args_type = parse_term_checked(j.at("args_type").get<std::string>());
    auto pre = parse_term_checked(j.at("pre").get<std::string>());
    auto post = parse_term_checked(j.at("post").get<std::string>());
    if (!args || !args_type || !pre || !post) return std::nullopt;
    e.args = *args;
    e.args_type = *args_type;
    e.pre_fn = *pre;
    e.post_fn = *post;
    const json& op = j.at("op");
    for (const json& a : op.at("adds")) {
      kernel::EffectAdd add;
      add.id_stem = a.at("id").get<std::string>();
      add.clock_suffix = a.at("suffix").get<bool>();
      auto ty = parse_term_checked(a.at("type").get<std::string>());
      auto tm = parse_term_checked(a.at("term").get<std::string>());
      if (!ty || !tm) return std::nullopt;
      add.type_fn = *ty;
      add.term_fn = *tm;
      e.op.adds.push_back(std::move(add));
    }
    e.op.invalidates = op.at("invalidates").get<std::vector<std::string>>();
    for (const json& q : op.at("enqueues")) {
      kernel::EffectEnqueue enq;
      enq.event = q.at("event").get<std::string>();
      auto fn = parse_term_checked(q.at("args").get<std::string>());
      if (!fn) return std::nullopt;
      enq.args_fn = *fn;
      e.op.enqueues.push_back(std::move(enq));
    }
    e.op.clock_increment = op.at("clock").get<std::uint64_t>();
    if (!j.at("prf").is_null()) {
      auto prf = parse_term_checked(j.at("prf").get<std::string>());
      if (!prf) return std::nullopt;
      e.prf = *prf;
    }
  } catch (const json::exception&) {
    return std::nullopt;
  }
  return e;
}

json record_to_json(const kernel::TransitionRecord& r, const kernel::Event& e) {
  json j;
  j["seq"] = r.seq;
  j["event"] = event_to_json(e);
  j["event_name"] = r.event_name;
  j["args_digest"] = r.args_digest.hex();
  j["state_before"] = r.state_before.hex();
  j["state_after"] = r.state_after.hex();
  j["clock_before"] = r.clock_before;
  j["clock_after"] = r.clock_after;
  j["pre_proof"] = r.pre_proof.hex();
  j["post_proof"] = r.post_proof.hex();
  j["trace"] = r.trace_digest.hex();
  j["prev"] = r.prev_chain.hex();
  j["chain"] = r.chain.hex();
  return j;
}

std::optional<std::pair<kernel::TransitionRecord, kernel::Event>> record_from_json(
    const json& j) {
  if (!j.is_object()) return std::nullopt;
  kernel::TransitionRecord r;
  try {
    r.seq = j.at("seq").get<std::uint64_t>();
    r.event_name = j.at("event_name").get<std::string>();
    r.args_digest = Digest::parse_hex(j.at("args_digest").get<std::string>());
    r.state_before = Digest::parse_hex(j.at("state_before").get<std::string>());
    r.state_after = Digest::parse_hex(j.at("state_after").get<std::string>());
    r.clock_before = j.at("clock_before").get<std::uint64_t>();
    r.clock_after = j.at("clock_after").get<std::uint64_t>();
    r.pre_proof = Digest::parse_hex(j.at("pre_proof").get<std::string>());
    r.post_proof = Digest::parse_hex(j.at("post_proof").get<std::string>());
    r.trace_digest = Digest::parse_hex(j.at("trace").get<std::string>());
    r.prev_chain = Digest::parse_hex(j.at("prev").get<std::string>());
    r.chain = Digest::parse_hex(j.at("chain").get<std::string>());
  } catch (...) {
    return std::nullopt;
  }
  auto e = event_from_json(j.at("event"));
  if (!e) return std::nullopt;
  return std::make_pair(std::move(r), std::move(*e));
}

}  // namespace

// ---------------------------------------------------------------------------
// commit
// ---------------------------------------------------------------------------

CommitResult commit(Config& cfg, kernel::Transitioned t) {
  t.record.seq = cfg.next_seq;
  kernel::seal_record(t.record, cfg.chain);
  std::string line = record_to_json(t.record, t.event).dump();
  if (!cfg.wal || !cfg.wal->append_line(line))
    return CommitFailed{"write-ahead append failed"};
  // Write acknowledged: adopt the new state and advance the chain.
  cfg.chain = t.record.chain;
  cfg.next_seq += 1;
  cfg.state = std::move(t.state);
  return CommitOk{};
}

// ---------------------------------------------------------------------------
// Scheduler
// ---------------------------------------------------------------------------

namespace {

Action make_action(Action::Kind kind, const Config& cfg, std::uint64_t seq,
                   std::string event, std::string detail) {
  Action a;
  a.kind = kind;
  a.signal_seq = seq;
  a.event = std::move(event);
  a.detail = std::move(detail);
  a.clock = cfg.state.clock();
  a.state_digest = kernel::state_hash(cfg.state).hex();
  a.wal_seq = cfg.next_seq - 1;
  return a;
}

void handle_elab(Config& cfg, const Budget& budget, RunReport& report, const RawSignal& s,
                 int retries_left);

// Drive the pending queue to quiescence, committing each transition and
// servicing watchers plus the deferred pool after every commit.
void drive(Config& cfg, const Budget& budget, RunReport& report, std::uint64_t seq) {
  while (!cfg.halted) {
    kernel::StepResult sr = kernel::kstep(cfg.state, cfg.defs.ctx, budget, &cfg.defs.events);
    if (std::holds_alternative<kernel::Quiescent>(sr)) return;

    if (auto* rej = std::get_if<kernel::Rejected>(&sr)) {
      cfg.state = rej->state;  // event dropped; digest unchanged
      report.actions.push_back(make_action(
          Action::Kind::Rejected, cfg, seq, rej->event ? rej->event->name : "",
          std::string(kernel::reject_reason_name(rej->reason)) + ": " + rej->detail));
      continue;
    }

    auto& tr = std::get<kernel::Transitioned>(sr);
    std::uint64_t new_clock = tr.record.clock_after;
    kernel::KernelState committed_state = tr.state;
    std::string event_name = tr.event.name;
    CommitResult cr = commit(cfg, std::move(tr));
    if (auto* fail = std::get_if<CommitFailed>(&cr)) {
      cfg.halted = true;
      report.halted_on_commit_failure = true;
      report.actions.push_back(
          make_action(Action::Kind::CommitFailed, cfg, seq, event_name, fail->cause));
      return;
    }
    report.actions.push_back(make_action(Action::Kind::Committed, cfg, seq, event_name, ""));

    // Types committed in this transition, for dependency-matched retries.
    std::set<Digest> new_types;
    for (const auto& [id, item] : committed_state.knowledge()) {
      if (item.committed_at == new_clock && item.status == kernel::ItemStatus::Active)
        new_types.insert(term_hash(item.type));
    }

    // Re-attempt deferred signals whose dependency may now be satisfied.
    std::vector<PendingEntry> still_waiting;
    std::vector<PendingEntry> to_retry;
    for (PendingEntry& p : cfg.pool) {
      if (new_types.count(p.dependency))
        to_retry.push_back(std::move(p));
      else
        still_waiting.push_back(std::move(p));
    }
    cfg.pool = std::move(still_waiting);
    for (PendingEntry& p : to_retry) {
      report.actions.push_back(make_action(Action::Kind::Retried, cfg, p.signal.sequence, "",
                                           "dependency satisfied: " + p.description));
      handle_elab(cfg, budget, report, p.signal, p.retries_left - 1);
    }

    // Watchers run after every committed transition, before the next dequeue.
    std::vector<search::WatcherEmission> emissions;
    std::vector<kernel::Event> derived = search::run_watchers(
        cfg.state, cfg.defs.ctx, cfg.defs.events, cfg.defs.watchers, budget, &emissions);
    for (std::size_t i = 0; i < derived.size(); ++i) {
      const auto& em = emissions[i];
      std::string key = em.watcher + "/" + em.subject_id + "/" + em.partner_id;
      if (!cfg.watcher_fired.insert(key).second) continue;
      kernel::ScheduleResult scr =
          kernel::schedule(cfg.state, cfg.defs.ctx, derived[i], budget);
      if (auto* err = std::get_if<kernel::KernelError>(&scr)) {
        report.actions.push_back(make_action(Action::Kind::Discarded, cfg, 0, em.event,
                                             "watcher emission rejected: " + err->detail));
        continue;
      }
      cfg.state = std::get<kernel::KernelState>(std::move(scr));
      report.actions.push_back(
          make_action(Action::Kind::WatcherEmitted, cfg, 0, em.event,
                      em.watcher + " matched " + em.subject_id + " with " + em.partner_id));
    }
  }
}

void handle_elab(Config& cfg, const Budget& budget, RunReport& report, const RawSignal& s,
                 int retries_left) {
  ElabResult er = elaborate(s, cfg.defs, cfg.state, budget);
  if (auto* none = std::get_if<ElabNone>(&er)) {
    report.actions.push_back(
        make_action(Action::Kind::Discarded, cfg, s.sequence, "", none->reason));
    return;
  }
  if (auto* def = std::get_if<ElabDeferred>(&er)) {
    if (retries_left <= 0) {
      report.actions.push_back(make_action(Action::Kind::Abandoned, cfg, s.sequence, "",
                                           "retry limit reached: " + def->description));
      return;
    }
    report.actions.push_back(make_action(Action::Kind::Deferred, cfg, s.sequence, "",
                                         "missing dependency: " + def->description));
    cfg.pool.push_back(PendingEntry{s, def->dependency, def->description, retries_left});
    return;
  }
  auto& some = std::get<ElabSome>(er);
  std::string event_name = some.event.name;
  kernel::ScheduleResult scr = kernel::schedule(cfg.state, cfg.defs.ctx, some.event, budget);
  if (auto* err = std::get_if<kernel::KernelError>(&scr)) {
    report.actions.push_back(make_action(Action::Kind::Discarded, cfg, s.sequence, event_name,
                                         "schedule failed: " + err->detail));
    return;
  }
  cfg.state = std::get<kernel::KernelState>(std::move(scr));
  drive(cfg, budget, report, s.sequence);
}

}  // namespace

void scheduler_tick(Config& cfg, const Budget& budget, RunReport& report) {
  if (cfg.halted || cfg.raw_queue.empty()) return;
  RawSignal s = std::move(cfg.raw_queue.front());
  cfg.raw_queue.pop_front();
  handle_elab(cfg, budget, report, s, cfg.max_retries);
}

RunReport run_to_quiescence(Config& cfg, const Budget& budget) {
  RunReport report;
  while (!cfg.halted && !cfg.raw_queue.empty()) scheduler_tick(cfg, budget, report);
  for (const PendingEntry& p : cfg.pool) {
    report.actions.push_back(make_action(Action::Kind::Abandoned, cfg, p.signal.sequence, "",
                                         "still waiting on: " + p.description));
  }
  return report;
}

// ---------------------------------------------------------------------------
// Recovery
// ---------------------------------------------------------------------------

std::vector<WalEntry> read_wal(const std::string& wal_path, const surface::LoadedDefs& defs) {
  (void)defs;
  std::vector<WalEntry> out;
  std::ifstream in(wal_path, std::ios::binary);
  if (!in) return out;
  std::string line;
  Digest running = Digest::zero();
  std::uint64_t expected_seq = 1;
  while (std::getline(in, line)) {
    if (line.empty()) break;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) break;  // torn tail
    auto parsed = record_from_json(j);
    if (!parsed) break;
    auto& [rec, event] = *parsed;
    if (rec.seq != expected_seq) break;
    if (rec.prev_chain != running) break;
    if (kernel::chain_hash(running, rec) != rec.chain) break;  // chain break
    running = rec.chain;
    expected_seq += 1;
    out.push_back(WalEntry{std::move(rec), std::move(event)});
  }
  return out;
}

RecoverResult recover(const std::string& wal_path, const surface::LoadedDefs& defs) {
  std::vector<WalEntry> entries = read_wal(wal_path, defs);
  kernel::KernelState state = initial_state(defs);
  Budget replay_budget;  // defaults are ample for replay

  for (std::size_t i = 0; i < entries.size(); ++i) {
    const WalEntry& we = entries[i];
    if (kernel::state_hash(state) != we.record.state_before)
      return ReplayDivergence{i + 1, "state digest before record does not match"};

    // Replay exactly the recorded event. The pending queue is bookkeeping
    // only (not part of the digest), so each record is replayed standalone.
    kernel::KernelState staged = state;
    while (staged.pop_pending()) {
    }
    staged.push_pending(we.event);
    kernel::StepResult sr = kernel::kstep(staged, defs.ctx, replay_budget, &defs.events);
    auto* tr = std::get_if<kernel::Transitioned>(&sr);
    if (!tr) {
      std::string why = "event did not transition on replay";
      if (auto* rej = std::get_if<kernel::Rejected>(&sr))
        why += std::string(": ") + kernel::reject_reason_name(rej->reason) + " " + rej->detail;
      return ReplayDivergence{i + 1, why};
    }
    if (tr->record.clock_after != we.record.clock_after)
      return ReplayDivergence{i + 1, "clock divergence on replay"};
    if (kernel::state_hash(tr->state) != we.record.state_after)
      return ReplayDivergence{i + 1, "state digest after record does not match"};
    state = tr->state;
  }
  return state;
}

SignalLoad load_signals_file(const std::string& path) {
  SignalLoad out;
  std::ifstream in(path);
  if (!in) {
    out.errors.push_back("cannot open " + path);
    return out;
  }
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    surface::SignalParseResult r = surface::parse_signal(line);
    if (r.signal)
      out.signals.push_back(std::move(*r.signal));
    else
      out.errors.push_back("line " + std::to_string(lineno) + ": " + r.error);
  }
  return out;
}

}  // namespace kos::rt
