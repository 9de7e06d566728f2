#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>

#include "helpers.hpp"
#include "kos/runtime.hpp"

using namespace kos;
using namespace kos::rt;
using kth::load;
using kth::parse;

namespace {

const Budget kBudget{};

RawSignal sig(std::uint64_t seq, const std::string& kind, nlohmann::json payload,
              std::uint64_t wall = 0) {
  return RawSignal{seq, kind, std::move(payload), wall};
}

Config fresh_config(const char* corpus_name, std::unique_ptr<WalStorage> wal) {
  return make_config(load(corpus_name), std::move(wal));
}

}  // namespace

TEST_CASE("inject appends to the raw queue and nothing else") {
  Config cfg = fresh_config("temperature.kos", std::make_unique<kth::MemWal>());
  Digest before = kernel::state_hash(cfg.state);
  auto r = inject(cfg, sig(1, "temp_alarm", "4a02"));
  CHECK(std::holds_alternative<InjectOk>(r));
  CHECK(cfg.raw_queue.size() == 1);
  CHECK(kernel::state_hash(cfg.state) == before);
}

TEST_CASE("duplicate or regressing sequences are refused") {
  Config cfg = fresh_config("temperature.kos", std::make_unique<kth::MemWal>());
  (void)inject(cfg, sig(5, "reading", {{"v", 10}}));
  auto dup = inject(cfg, sig(5, "reading", {{"v", 11}}));
  auto* e = std::get_if<OutOfOrderSequence>(&dup);
  REQUIRE(e);
  CHECK(e->last == 5);
  CHECK(e->got == 5);
  CHECK(cfg.raw_queue.size() == 1);
}

TEST_CASE("the alarm frame elaborates to a stop event with its passport") {
  auto defs = load("temperature.kos");
  auto st = initial_state(defs);
  ElabResult er = elaborate(sig(1, "temp_alarm", "4a02"), defs, st, kBudget);
  auto* some = std::get_if<ElabSome>(&er);
  REQUIRE(some);
  CHECK(some->event.name == "e_stop");
  // decoded reading: base 80 plus the 0x02 excess byte
  const auto* v = some->event.args.as<node::ValLit>();
  REQUIRE(v);
  CHECK(v->value == Nat(82));
  REQUIRE(some->event.prf);
  // the passport proves the instantiated precondition
  Context view = kernel::state_context(defs.ctx, st);
  NormalizeResult goal =
      normalize(Term::app(some->event.pre_fn, some->event.args), view, Fuel{100000});
  CHECK(is_ok(check(view, *some->event.prf, goal.term, Fuel{100000})));
}

TEST_CASE("a refuted precondition still elaborates, without a passport") {
  auto defs = load("pump.kos");
  auto st = initial_state(defs);
  ElabResult er = elaborate(sig(1, "pressure", {{"kpa", 120}}), defs, st, kBudget);
  auto* some = std::get_if<ElabSome>(&er);
  REQUIRE(some);
  CHECK_FALSE(some->event.prf.has_value());
}

TEST_CASE("a missing dependency defers the signal") {
  auto defs = load("dependency.kos");
  auto st = initial_state(defs);
  ElabResult er = elaborate(sig(1, "quality", {{"b", "B1"}, {"v", 3}}), defs, st, kBudget);
  auto* deferred = std::get_if<ElabDeferred>(&er);
  REQUIRE(deferred);
  CHECK(deferred->description.find("ID * Time") != std::string::npos);
}

TEST_CASE("unknown kinds are discarded by the firewall") {
  auto defs = load("temperature.kos");
  auto st = initial_state(defs);
  ElabResult er = elaborate(sig(1, "0xFF", "beef"), defs, st, kBudget);
  auto* none = std::get_if<ElabNone>(&er);
  REQUIRE(none);
  CHECK(none->reason.find("no template") != std::string::npos);
}

TEST_CASE("malformed payloads are discarded, not fatal") {
  auto defs = load("temperature.kos");
  auto st = initial_state(defs);
  // reading template expects a numeric field v
  ElabResult er = elaborate(sig(1, "reading", {{"v", "NaN"}}), defs, st, kBudget);
  CHECK(std::get_if<ElabNone>(&er));
  er = elaborate(sig(2, "temp_alarm", "zz"), defs, st, kBudget);
  CHECK(std::get_if<ElabNone>(&er));
}

TEST_CASE("no sequence of malformed signals changes the kernel state") {
  Config cfg = fresh_config("temperature.kos", std::make_unique<kth::MemWal>());
  Digest before = kernel::state_hash(cfg.state);
  (void)inject(cfg, sig(1, "garbage", "00"));
  (void)inject(cfg, sig(2, "reading", {{"v", "text"}}));
  (void)inject(cfg, sig(3, "temp_alarm", nlohmann::json::object()));
  RunReport rep = run_to_quiescence(cfg, kBudget);
  CHECK(rep.count(Action::Kind::Discarded) == 3);
  CHECK(rep.count(Action::Kind::Committed) == 0);
  CHECK(kernel::state_hash(cfg.state) == before);
}

TEST_CASE("commit appends one chained record and adopts the state") {
  auto mem = std::make_unique<kth::MemWal>();
  kth::MemWal* wal = mem.get();
  Config cfg = fresh_config("temperature.kos", std::move(mem));
  (void)inject(cfg, sig(1, "reading", {{"v", 10}}));
  (void)inject(cfg, sig(2, "reading", {{"v", 20}}));
  RunReport rep = run_to_quiescence(cfg, kBudget);
  CHECK(rep.count(Action::Kind::Committed) == 2);
  REQUIRE(wal->lines.size() == 2);

  // chain: record 2 covers record 1 through its prev digest
  auto j1 = nlohmann::json::parse(wal->lines[0]);
  auto j2 = nlohmann::json::parse(wal->lines[1]);
  CHECK(j1["prev"] == Digest::zero().hex());
  CHECK(j2["prev"] == j1["chain"]);
  CHECK(cfg.state.clock() == 2);
}

TEST_CASE("a commit write failure keeps the live state") {
  auto file = std::make_unique<FileWal>(kth::tmp_path("fault"));
  file->arm_fault(1);  // second record fails
  Config cfg = fresh_config("temperature.kos", std::move(file));
  (void)inject(cfg, sig(1, "reading", {{"v", 10}}));
  (void)inject(cfg, sig(2, "reading", {{"v", 20}}));
  (void)inject(cfg, sig(3, "reading", {{"v", 30}}));
  RunReport rep = run_to_quiescence(cfg, kBudget);
  CHECK(rep.halted_on_commit_failure);
  CHECK(rep.count(Action::Kind::Committed) == 1);
  CHECK(rep.count(Action::Kind::CommitFailed) == 1);
  CHECK(cfg.state.clock() == 1);  // live state equals the last successful commit
}

TEST_CASE("the out-of-order pair defers then completes after its dependency") {
  std::string wal_path = kth::tmp_path("dep");
  Config cfg = fresh_config("dependency.kos", std::make_unique<FileWal>(wal_path));
  (void)inject(cfg, sig(1, "quality", {{"b", "B1"}, {"v", 3}}, 100));
  (void)inject(cfg, sig(2, "equip_status", {{"m", "M03"}, {"t", 1000}}, 200));
  RunReport rep = run_to_quiescence(cfg, kBudget);
  CHECK(rep.count(Action::Kind::Deferred) == 1);
  CHECK(rep.count(Action::Kind::Retried) == 1);
  CHECK(rep.count(Action::Kind::Committed) == 2);

  // in-order control run: same commits, same final state
  std::string wal2 = kth::tmp_path("dep2");
  Config cfg2 = fresh_config("dependency.kos", std::make_unique<FileWal>(wal2));
  (void)inject(cfg2, sig(1, "equip_status", {{"m", "M03"}, {"t", 1000}}, 100));
  (void)inject(cfg2, sig(2, "quality", {{"b", "B1"}, {"v", 3}}, 200));
  RunReport rep2 = run_to_quiescence(cfg2, kBudget);
  CHECK(rep2.count(Action::Kind::Deferred) == 0);
  CHECK(kernel::state_hash(cfg.state) == kernel::state_hash(cfg2.state));

  auto defs = load("dependency.kos");
  auto entries1 = read_wal(wal_path, defs);
  auto entries2 = read_wal(wal2, defs);
  REQUIRE(entries1.size() == 2);
  REQUIRE(entries2.size() == 2);
  CHECK(entries1[0].event.name == "note_anomaly");
  CHECK(entries1[1].event.name == "note_finding");
  CHECK(entries2[0].event.name == "note_anomaly");
  CHECK(entries2[1].event.name == "note_finding");
  std::remove(wal_path.c_str());
  std::remove(wal2.c_str());
}

TEST_CASE("a signal waiting on a dependency that never arrives is left pending") {
  Config cfg = fresh_config("dependency.kos", std::make_unique<kth::MemWal>());
  (void)inject(cfg, sig(1, "quality", {{"b", "B1"}, {"v", 3}}));
  RunReport rep = run_to_quiescence(cfg, kBudget);
  CHECK(rep.count(Action::Kind::Deferred) == 1);
  CHECK(rep.count(Action::Kind::Abandoned) == 1);  // reported unresolved at end of run
  CHECK(cfg.pool.size() == 1);
}

TEST_CASE("recover replays a clean log to the live digest") {
  std::string wal_path = kth::tmp_path("recover");
  Config cfg = fresh_config("temperature.kos", std::make_unique<FileWal>(wal_path));
  (void)inject(cfg, sig(1, "reading", {{"v", 10}}));
  (void)inject(cfg, sig(2, "reading", {{"v", 20}}));
  (void)inject(cfg, sig(3, "temp_alarm", "4a05"));
  RunReport rep = run_to_quiescence(cfg, kBudget);
  CHECK(rep.count(Action::Kind::Committed) == 3);

  // independent oracle: the same events through an in-memory run
  Config mem_cfg = fresh_config("temperature.kos", std::make_unique<kth::MemWal>());
  (void)inject(mem_cfg, sig(1, "reading", {{"v", 10}}));
  (void)inject(mem_cfg, sig(2, "reading", {{"v", 20}}));
  (void)inject(mem_cfg, sig(3, "temp_alarm", "4a05"));
  (void)run_to_quiescence(mem_cfg, kBudget);
  CHECK(kernel::state_hash(mem_cfg.state) == kernel::state_hash(cfg.state));

  auto defs = load("temperature.kos");
  RecoverResult rr = recover(wal_path, defs);
  auto* st = std::get_if<kernel::KernelState>(&rr);
  REQUIRE(st);
  CHECK(st->clock() == 3);
  CHECK(kernel::state_hash(*st) == kernel::state_hash(cfg.state));
  std::remove(wal_path.c_str());
}

TEST_CASE("a torn tail is discarded without error") {
  std::string wal_path = kth::tmp_path("torn");
  Config cfg = fresh_config("temperature.kos", std::make_unique<FileWal>(wal_path));
  for (std::uint64_t i = 1; i <= 3; ++i)
    (void)inject(cfg, sig(i, "reading", {{"v", 10 * i}}));
  (void)run_to_quiescence(cfg, kBudget);

  std::string content = kth::slurp(wal_path);
  // cut the last record in half
  std::size_t last_line = content.rfind('\n', content.size() - 2);
  std::string torn = content.substr(0, last_line + 40);
  kth::spit(wal_path, torn);

  auto defs = load("temperature.kos");
  RecoverResult rr = recover(wal_path, defs);
  auto* st = std::get_if<kernel::KernelState>(&rr);
  REQUIRE(st);
  CHECK(st->clock() == 2);  // two intact records replayed
  std::remove(wal_path.c_str());
}

TEST_CASE("a flipped byte breaks the chain at that record") {
  std::string wal_path = kth::tmp_path("flip");
  Config cfg = fresh_config("temperature.kos", std::make_unique<FileWal>(wal_path));
  for (std::uint64_t i = 1; i <= 3; ++i)
    (void)inject(cfg, sig(i, "reading", {{"v", 10 * i}}));
  (void)run_to_quiescence(cfg, kBudget);

  std::string content = kth::slurp(wal_path);
  std::size_t second_line = content.find('\n') + 1;
  std::size_t pos = content.find("\"clock_after\":", second_line);
  REQUIRE(pos != std::string::npos);
  content[pos + 14] = content[pos + 14] == '2' ? '3' : '2';
  kth::spit(wal_path, content);

  auto defs = load("temperature.kos");
  RecoverResult rr = recover(wal_path, defs);
  auto* st = std::get_if<kernel::KernelState>(&rr);
  REQUIRE(st);
  CHECK(st->clock() == 1);  // only the first record survives
  std::remove(wal_path.c_str());
}

TEST_CASE("scheduler_tick with nothing to do is a no-op") {
  Config cfg = fresh_config("temperature.kos", std::make_unique<kth::MemWal>());
  RunReport rep;
  scheduler_tick(cfg, kBudget, rep);
  CHECK(rep.actions.empty());
}

TEST_CASE("structured reports are deterministic byte for byte") {
  auto run_once = [&]() {
    Config cfg = fresh_config("temperature.kos", std::make_unique<kth::MemWal>());
    (void)inject(cfg, sig(1, "reading", {{"v", 10}}));
    (void)inject(cfg, sig(2, "reading", {{"v", 95}}));
    (void)inject(cfg, sig(3, "temp_alarm", "4a02"));
    RunReport rep = run_to_quiescence(cfg, kBudget);
    return render_report(rep, true);
  };
  std::string a = run_once();
  std::string b = run_once();
  CHECK(a == b);
  CHECK_FALSE(a.empty());
}

TEST_CASE("the full shutdown scenario commits running to stopped") {
  std::string wal_path = kth::tmp_path("shutdown");
  Config cfg = fresh_config("temperature.kos", std::make_unique<FileWal>(wal_path));
  auto loaded = load_signals_file(kth::corpus("signals_54.jsonl"));
  REQUIRE(loaded.errors.empty());
  for (auto& s : loaded.signals) (void)inject(cfg, std::move(s));
  RunReport rep = run_to_quiescence(cfg, kBudget);
  CHECK(rep.count(Action::Kind::Committed) == 1);
  REQUIRE(cfg.state.item("status_stopped"));
  CHECK(cfg.state.item("status_stopped")->status == kernel::ItemStatus::Active);
  CHECK(cfg.state.item("status_running")->status == kernel::ItemStatus::Invalidated);
  std::remove(wal_path.c_str());
}

TEST_CASE("the finance run emits exactly one audit lock") {
  Config cfg = fresh_config("finance.kos", std::make_unique<kth::MemWal>());
  (void)inject(cfg, sig(1, "quality_report", {{"x", 1}}));
  RunReport rep = run_to_quiescence(cfg, kBudget);
  CHECK(rep.count(Action::Kind::WatcherEmitted) == 1);
  CHECK(rep.count(Action::Kind::Committed) == 2);
  bool lock_found = false;
  for (const auto& [id, item] : cfg.state.knowledge())
    lock_found = lock_found || id.rfind("lock_", 0) == 0;
  CHECK(lock_found);
}
