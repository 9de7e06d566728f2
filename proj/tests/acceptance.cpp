// Acceptance suite: reproduces the worked scenarios and system properties
// end to end and prints one pass/fail line per criterion.

#include <chrono>
#include <cstdio>
#include <random>
#include <sstream>

#include "helpers.hpp"
#include "oracle.hpp"
#include "kos/cli.hpp"
#include "kos/runtime.hpp"
#include "kos/search.hpp"

using namespace kos;
using kth::load;
using kth::parse;

namespace {

int g_failures = 0;

struct Criterion {
  std::string name;
  bool ok = true;
  std::string detail;

  void expect(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      if (!detail.empty()) detail += "; ";
      detail += what;
    }
  }

  ~Criterion() {
    std::printf("criterion %-58s %s%s%s\n", name.c_str(), ok ? "PASS" : "FAIL",
                detail.empty() ? "" : "  -- ", detail.c_str());
    if (!ok) ++g_failures;
  }
};

struct CliRun {
  int exit_code;
  std::string out;
  std::string err;
};

CliRun run_cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  int rc = cli::dispatch(args, out, err);
  return {rc, out.str(), err.str()};
}

std::string temperature_defs() { return kth::corpus("temperature.kos"); }

// A mixed 100-event stream over the temperature module: routine readings,
// out-of-range readings (rejected), and alarm frames.
std::string write_mixed_stream(std::size_t count, const std::string& stem) {
  std::string path = kth::tmp_path(stem);
  std::ostringstream os;
  for (std::size_t i = 1; i <= count; ++i) {
    if (i % 25 == 7) {
      os << "{\"seq\":" << i << ",\"kind\":\"temp_alarm\",\"payload\":\"4a0" << (i % 8)
         << "\",\"wall_time_ms\":" << i * 10 << "}\n";
    } else {
      std::uint64_t v = (i * 37) % 120;  // roughly a third land above the threshold
      os << "{\"seq\":" << i << ",\"kind\":\"reading\",\"payload\":{\"v\":" << v
         << "},\"wall_time_ms\":" << i * 10 << "}\n";
    }
  }
  kth::spit(path, os.str());
  return path;
}

std::string final_digest_line(const std::string& text) {
  std::size_t pos = text.find("final state ");
  if (pos == std::string::npos) return "";
  std::size_t end = text.find('\n', pos);
  return text.substr(pos, end - pos);
}

// ---------------------------------------------------------------------------

void criterion_1_metatheory() {
  Criterion c{"1 metatheory properties (1000 seed-fixed terms)"};
  auto start = std::chrono::steady_clock::now();
  constexpr Fuel kFuel{1'000'000};

  kth::TermGen gen(424242);
  std::vector<Term> hash_sample;
  for (int i = 0; i < 1000 && c.ok; ++i) {
    auto [t, ty] = gen.well_typed(4);
    c.expect(is_ok(check(gen.ctx(), t, ty, kFuel)), "generated term failed to check");

    // (a) subject reduction
    Term cur = t;
    int guard = 0;
    for (;;) {
      auto step = step_once(cur, gen.ctx());
      if (!step) break;
      cur = step->first;
      if (!is_ok(check(gen.ctx(), cur, ty, kFuel))) {
        c.expect(false, "subject reduction failed");
        break;
      }
      if (++guard > 100000) {
        c.expect(false, "reduction chain did not terminate");
        break;
      }
    }

    // (b) strategy confluence and (c) termination within the fuel bound
    NormalizeResult lo = normalize(t, gen.ctx(), kFuel);
    c.expect(!lo.exhausted, "leftmost-outermost normalization exhausted fuel");
    NormalizeResult rnd = normalize_random(t, gen.ctx(), kFuel, 1000 + i);
    c.expect(!rnd.exhausted, "random-redex normalization exhausted fuel");
    c.expect(alpha_equal(lo.term, rnd.term), "strategies disagree on the normal form");

    if (i % 25 == 0) hash_sample.push_back(t);
  }

  // (d) hash/alpha coherence
  for (const Term& a : hash_sample)
    for (const Term& b : hash_sample) {
      if (alpha_equal(a, b) && term_hash(a) != term_hash(b))
        c.expect(false, "alpha-equal terms hash differently");
      if (term_hash(a) == term_hash(b) && !alpha_equal(a, b))
        c.expect(false, "hash collision across alpha classes");
    }

  auto secs =
      std::chrono::duration_cast<std::chrono::seconds>(std::chrono::steady_clock::now() - start);
  c.expect(secs.count() < 60, "metatheory suite exceeded 60 s");
}

void criterion_2_consistency_smoke() {
  Criterion c{"2 consistency smoke (50 randomized bases, never Found)"};
  std::mt19937_64 rng(777);
  const Budget budget{10'000, 6, 2000};

  for (int round = 0; round < 50; ++round) {
    Context ctx;
    constexpr int kProps = 5;
    for (int i = 0; i < kProps; ++i)
      ctx.declare("P" + std::to_string(i), Term::sort(Sort::prop()));

    // inhabit a random subset
    std::set<int> inhabited;
    for (int i = 0; i < kProps; ++i)
      if (rng() % 2) {
        ctx.declare("w" + std::to_string(i), Term::constant("P" + std::to_string(i)));
        inhabited.insert(i);
      }
    // random implications, then close the inhabited set under them
    std::vector<std::pair<int, int>> impls;
    for (int k = 0; k < 4; ++k) {
      int from = static_cast<int>(rng() % kProps), to = static_cast<int>(rng() % kProps);
      impls.emplace_back(from, to);
      ctx.declare("imp" + std::to_string(k),
                  Term::arrow(Term::constant("P" + std::to_string(from)),
                              Term::constant("P" + std::to_string(to))));
    }
    bool grew = true;
    while (grew) {
      grew = false;
      for (auto [f, t] : impls)
        if (inhabited.count(f) && !inhabited.count(t)) {
          inhabited.insert(t);
          grew = true;
        }
    }
    // negations only for unreachable propositions, keeping the base consistent
    int negs = 0;
    for (int i = 0; i < kProps && negs < 2; ++i) {
      if (!inhabited.count(i)) {
        ctx.declare("neg" + std::to_string(i),
                    Term::arrow(Term::constant("P" + std::to_string(i)), Term::empty()));
        ++negs;
      }
    }
    // a few data facts
    std::vector<kernel::KnowledgeItem> facts;
    facts.push_back({"d1", Term::val(static_cast<std::uint64_t>(rng() % 100)),
                     Term::base(BaseKind::Val), 0, kernel::ItemStatus::Active, std::nullopt});

    search::SearchOutcome o = search::search_proof(ctx, facts, Term::empty(), budget);
    c.expect(!search::found(o), "Empty was Found over a consistent base");
  }
}

void criterion_3_goldens() {
  {
    Criterion c{"3a qualified temperature accepted, failed batch rejected"};
    auto defs = load("env.kos");
    c.expect(is_ok(check(defs.ctx, parse("obj"), parse("QualifiedTemp"), Fuel{100000})),
             "obj does not check against QualifiedTemp");
    CheckResult bad = check(defs.ctx, parse("<\"B2\", <Failure, refl>>"),
                            parse("QualifiedBatch"), Fuel{100000});
    const TypeError* e = errored(bad);
    c.expect(e && e->kind == TypeErrorKind::IdEndpointsUnequal,
             "Failure-result batch was not rejected");
  }
  {
    Criterion c{"3b fusion normalizes in two beta steps; wrong domain rejected"};
    auto defs = load("env.kos");
    NormalizeResult nr = normalize(parse("combine(ku1)(ku2)"), defs.ctx, Fuel{1000});
    std::size_t betas = 0;
    for (const auto& s : nr.trace)
      if (s.rule == Rule::Beta) ++betas;
    c.expect(!nr.exhausted && betas == 2, "expected exactly two beta steps");
    c.expect(alpha_equal(nr.term, parse("<ku1, ku2>")), "unexpected normal form");
    InferResult ir = infer(defs.ctx, parse("combine(ku1)(p)"), Fuel{100000});
    const TypeError* e = errored(ir);
    c.expect(e && e->kind == TypeErrorKind::DomainMismatch,
             "pressure argument was not a domain mismatch");
  }
  {
    Criterion c{"3c alarm frame elaborates and commits running to stopped"};
    std::string wal = kth::tmp_path("c3c");
    CliRun r = run_cli({"run", "--defs", temperature_defs(), "--signals",
                        kth::corpus("signals_54.jsonl"), "--wal", wal});
    c.expect(r.exit_code == 0, "run exited " + std::to_string(r.exit_code));
    c.expect(r.out.find("committed signal=1 event=e_stop") != std::string::npos,
             "e_stop did not commit");
    c.expect(r.out.find("wal records 1") != std::string::npos, "expected one WAL record");
    auto defs = load("temperature.kos");
    auto entries = rt::read_wal(wal, defs);
    c.expect(entries.size() == 1 && entries[0].event.name == "e_stop", "WAL content wrong");
    std::remove(wal.c_str());
  }
  {
    Criterion c{"3d unsafe pump reading rejected, digest unchanged"};
    auto defs = load("pump.kos");
    rt::Config cfg = rt::make_config(std::move(defs), std::make_unique<kth::MemWal>());
    Digest before = kernel::state_hash(cfg.state);
    (void)rt::inject(cfg, rt::RawSignal{1, "pressure", {{"kpa", 120}}, 0});
    rt::RunReport rep = rt::run_to_quiescence(cfg, Budget{});
    c.expect(rep.count(rt::Action::Kind::Rejected) == 1, "expected one rejection");
    bool pre_refuted = false;
    for (const auto& a : rep.actions)
      pre_refuted = pre_refuted || a.detail.find("PreRefuted") != std::string::npos;
    c.expect(pre_refuted, "rejection reason was not PreRefuted");
    c.expect(kernel::state_hash(cfg.state) == before, "state digest changed");
  }
  {
    Criterion c{"3e bearing corpus yields the 07:55 < 10:00 report"};
    CliRun r = run_cli({"trace", "--defs", kth::corpus("bearing.kos"), "--failure", "f_fail"});
    c.expect(r.exit_code == 0, "trace exited " + std::to_string(r.exit_code));
    c.expect(r.out.find("anomaly: a_temp") != std::string::npos, "anomaly missing");
    c.expect(r.out.find("07:55 < 10:00") != std::string::npos,
             "temporal witness missing from the report");
  }
  {
    Criterion c{"3f dual-anomaly rule turns the voltage-only corpus into NotFound"};
    auto dual = load("bearing_dual.kos");
    auto st = rt::initial_state(dual);
    search::RootCauseResult rr = search::build_root_cause(
        dual.ctx, st.active_items(), *st.item("f_fail"), Budget{2'000'000, 64, 30'000});
    c.expect(std::holds_alternative<search::NotFound>(rr), "expected NotFound");
    CliRun r =
        run_cli({"trace", "--defs", kth::corpus("bearing_dual.kos"), "--failure", "f_fail",
                 "--fuel", "2000000", "--timeout-ms", "30000"});
    c.expect(r.out.find("no causal chain found") != std::string::npos,
             "CLI did not report the missing chain");
  }
  {
    Criterion c{"3g matched report and invoice emit exactly one audit lock"};
    auto run_fin = [](const char* name) {
      rt::Config cfg = rt::make_config(load(name), std::make_unique<kth::MemWal>());
      (void)rt::inject(cfg, rt::RawSignal{1, "quality_report", {{"x", 1}}, 0});
      return rt::run_to_quiescence(cfg, Budget{});
    };
    rt::RunReport matched = run_fin("finance.kos");
    c.expect(matched.count(rt::Action::Kind::WatcherEmitted) == 1,
             "matched corpus emitted != 1");
    rt::RunReport mismatch = run_fin("finance_mismatch.kos");
    c.expect(mismatch.count(rt::Action::Kind::WatcherEmitted) == 0,
             "mismatched batch still emitted");
    rt::RunReport lowloss = run_fin("finance_lowloss.kos");
    c.expect(lowloss.count(rt::Action::Kind::WatcherEmitted) == 0,
             "failed guard still emitted");
  }
  {
    Criterion c{"3h counterfactual removal: Necessary vs Redundant"};
    CliRun single = run_cli({"whatif", "--defs", kth::corpus("counterfactual_single.kos"),
                             "--remove", "a_volt", "--goal",
                             "(a : Anomaly) * causal_proof(a)(f0)"});
    c.expect(single.exit_code == 0 && single.out == "Necessary\n",
             "single-cause corpus: got '" + single.out + "'");
    CliRun dual = run_cli({"whatif", "--defs", kth::corpus("counterfactual_dual.kos"),
                           "--remove", "a_volt", "--goal",
                           "(a : Anomaly) * causal_proof(a)(f0)"});
    c.expect(dual.exit_code == 0 && dual.out == "Redundant\n",
             "two-cause corpus: got '" + dual.out + "'");
  }
}

void criterion_4_determinism() {
  Criterion c{"4 kernel determinism (10 runs, one digest)"};
  std::string stream = write_mixed_stream(100, "mixed100");
  std::set<std::string> digests;
  std::string structured_first;
  for (int i = 0; i < 10; ++i) {
    std::string wal = kth::tmp_path("det" + std::to_string(i));
    CliRun r = run_cli({"run", "--defs", temperature_defs(), "--signals", stream, "--wal", wal});
    c.expect(r.exit_code == 0, "run exited " + std::to_string(r.exit_code));
    digests.insert(final_digest_line(r.out));
    CliRun s = run_cli({"run", "--defs", temperature_defs(), "--signals", stream, "--wal", wal,
                        "--format", "structured"});
    if (i == 0)
      structured_first = s.out;
    else
      c.expect(s.out == structured_first, "structured output differs between runs");
    std::remove(wal.c_str());
  }
  c.expect(digests.size() == 1 && !digests.begin()->empty(),
           "expected one unique final digest, saw " + std::to_string(digests.size()));
  std::remove(stream.c_str());
}

void criterion_5_clock_atomicity() {
  Criterion c{"5 clock monotonicity and atomic rollback (>=20 rejections)"};
  std::string stream = write_mixed_stream(100, "rejections");
  rt::Config cfg = rt::make_config(load("temperature.kos"), std::make_unique<kth::MemWal>());
  auto loaded = rt::load_signals_file(stream);
  for (auto& s : loaded.signals) (void)rt::inject(cfg, std::move(s));
  std::string initial = kernel::state_hash(cfg.state).hex();
  rt::RunReport rep = rt::run_to_quiescence(cfg, Budget{});

  std::size_t rejections = rep.count(rt::Action::Kind::Rejected);
  c.expect(rejections >= 20,
           "needed >= 20 rejections, saw " + std::to_string(rejections));

  // every rejection leaves the digest exactly where it was
  std::string last = initial;
  for (const auto& a : rep.actions) {
    if (a.kind == rt::Action::Kind::Rejected)
      c.expect(a.state_digest == last, "a rejection changed the state digest");
    if (!a.state_digest.empty()) last = a.state_digest;
  }

  // WAL records: clock strictly advances
  std::string wal_path = kth::tmp_path("clock");
  CliRun r = run_cli({"run", "--defs", temperature_defs(), "--signals", stream, "--wal",
                      wal_path});
  c.expect(r.exit_code == 0, "run failed");
  auto defs = load("temperature.kos");
  auto entries = rt::read_wal(wal_path, defs);
  c.expect(!entries.empty(), "no WAL records");
  for (const auto& e : entries)
    c.expect(e.record.clock_after > e.record.clock_before, "clock did not advance");
  std::remove(wal_path.c_str());
  std::remove(stream.c_str());
}

void criterion_6_durability() {
  Criterion c{"6 durability: fault injection and corrupted-log recovery"};
  std::string stream = write_mixed_stream(60, "durable");

  // full run to learn the commit count
  std::string wal_full = kth::tmp_path("walfull");
  CliRun full = run_cli({"run", "--defs", temperature_defs(), "--signals", stream, "--wal",
                         wal_full});
  auto defs = load("temperature.kos");
  auto full_entries = rt::read_wal(wal_full, defs);
  c.expect(full_entries.size() >= 10, "scenario produced too few commits");

  // inject a commit fault at a (seeded) random record
  std::mt19937_64 rng(2718);
  std::uint64_t fault_at = rng() % full_entries.size();
  std::string wal_fault = kth::tmp_path("walfault");
  CliRun faulted = run_cli({"run", "--defs", temperature_defs(), "--signals", stream, "--wal",
                            wal_fault, "--inject-commit-fault", std::to_string(fault_at)});
  c.expect(faulted.out.find("halted: commit failure") != std::string::npos,
           "fault did not halt the run");
  auto fault_entries = rt::read_wal(wal_fault, defs);
  c.expect(fault_entries.size() == fault_at, "WAL grew past the failed record");
  // live state equals the last successful commit
  rt::RecoverResult rec = rt::recover(wal_fault, defs);
  auto* rec_state = std::get_if<kernel::KernelState>(&rec);
  c.expect(rec_state != nullptr, "recover failed on the faulted log");
  if (rec_state) {
    std::string live = final_digest_line(faulted.out);
    c.expect(live.find(kernel::state_hash(*rec_state).hex()) != std::string::npos,
             "live state is not the last durable commit");
  }

  // three corrupted variants of the full log, each recovering a clean prefix
  std::string content = kth::slurp(wal_full);
  std::vector<std::string> lines;
  {
    std::istringstream is(content);
    std::string line;
    while (std::getline(is, line)) lines.push_back(line);
  }
  c.expect(lines.size() == full_entries.size(), "log line count mismatch");

  // torn tail: last record half-written
  std::string torn1;
  for (std::size_t i = 0; i + 1 < lines.size(); ++i) torn1 += lines[i] + "\n";
  torn1 += lines.back().substr(0, lines.back().size() / 2);
  // flipped byte inside record 2
  std::string flipped = content;
  std::size_t second = flipped.find('\n') + 1;
  std::size_t digit = flipped.find("\"clock_after\":", second) + 14;
  flipped[digit] = flipped[digit] == '9' ? '8' : '9';
  // a record deleted from the middle breaks the chain there
  std::string gap;
  for (std::size_t i = 0; i < lines.size(); ++i)
    if (i != 3) gap += lines[i] + "\n";

  struct Variant {
    std::string content;
    std::size_t expect_records;
  };
  std::vector<Variant> variants = {
      {torn1, lines.size() - 1}, {flipped, 1}, {gap, 3}};
  for (std::size_t i = 0; i < variants.size(); ++i) {
    std::string path = kth::tmp_path("corrupt" + std::to_string(i));
    kth::spit(path, variants[i].content);
    rt::RecoverResult rr = rt::recover(path, defs);
    auto* st = std::get_if<kernel::KernelState>(&rr);
    c.expect(st != nullptr, "ReplayDivergence raised on an uncorrupted prefix");
    auto entries = rt::read_wal(path, defs);
    c.expect(entries.size() == variants[i].expect_records,
             "variant " + std::to_string(i) + " recovered " +
                 std::to_string(entries.size()) + " records");
    if (st && !entries.empty())
      c.expect(kernel::state_hash(*st) == entries.back().record.state_after,
               "recovered state is not the committed prefix");
    std::remove(path.c_str());
  }
  std::remove(wal_full.c_str());
  std::remove(wal_fault.c_str());
  std::remove(stream.c_str());
}

void criterion_7_causal_ordering() {
  Criterion c{"7 causal ordering across input permutations"};
  auto run_order = [&](bool in_order) {
    std::string wal = kth::tmp_path(in_order ? "ord1" : "ord2");
    CliRun r = run_cli({"run", "--defs", kth::corpus("dependency.kos"), "--signals",
                        kth::corpus(in_order ? "dependency_inorder.jsonl"
                                             : "dependency_outoforder.jsonl"),
                        "--wal", wal});
    auto defs = load("dependency.kos");
    auto entries = rt::read_wal(wal, defs);
    std::remove(wal.c_str());
    return std::make_pair(r, entries);
  };
  auto [r1, e1] = run_order(true);
  auto [r2, e2] = run_order(false);
  c.expect(e1.size() == 2 && e2.size() == 2, "expected two commits in each run");
  if (e1.size() == 2 && e2.size() == 2) {
    c.expect(e1[0].event.name == "note_anomaly" && e1[1].event.name == "note_finding",
             "in-order run violated the dependency");
    c.expect(e2[0].event.name == "note_anomaly" && e2[1].event.name == "note_finding",
             "out-of-order run violated the dependency");
    c.expect(e1.back().record.state_after == e2.back().record.state_after,
             "final states differ across orderings");
  }
  c.expect(r2.out.find("deferred signal=1") != std::string::npos,
           "out-of-order run did not defer");
  c.expect(r2.out.find("retried signal=1") != std::string::npos &&
               r2.out.find("committed signal=1 event=note_finding") != std::string::npos,
           "deferred signal did not complete");
}

void criterion_8_bounded_decidability() {
  Criterion c{"8 bounded decidability: zero fuel is Unknown, more fuel decides"};
  auto defs = load("bearing.kos");
  auto st = rt::initial_state(defs);
  auto facts = st.active_items();
  Term goal = parse("causal_proof(a_temp)(f_fail)");

  auto timed = [&](auto&& fn) {
    auto start = std::chrono::steady_clock::now();
    fn();
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::steady_clock::now() - start)
        .count();
  };

  long ms = timed([&] {
    search::SearchOutcome o = search::search_proof(defs.ctx, facts, goal, Budget{0, 64, 5000});
    c.expect(search::unknown(o), "zero-fuel search was not Unknown");
  });
  c.expect(ms < 10, "zero-fuel search took " + std::to_string(ms) + " ms");

  ms = timed([&] {
    Term tuple = parse("<\"B2310\", <HARD_ERR, <@10:00, <prim_le_t(@06:00, @10:00), "
                       "prim_le_t(@10:00, @18:00)>>>>");
    c.expect(out_of_budget(check(defs.ctx, tuple, parse("FailEvt"), Fuel{0})),
             "zero-fuel check was not Unknown");
  });
  c.expect(ms < 10, "zero-fuel check took " + std::to_string(ms) + " ms");

  ms = timed([&] {
    kernel::KnowledgeItem item{"extra", Term::val(1), Term::base(BaseKind::Val), 0,
                               kernel::ItemStatus::Active, std::nullopt};
    kernel::UnifyResult r = kernel::unify(st, defs.ctx, item, Budget{0, 4, 5000});
    c.expect(std::holds_alternative<kernel::UnifyUnknown>(r), "zero-fuel unify not Unknown");
  });
  c.expect(ms < 10, "zero-fuel unify took " + std::to_string(ms) + " ms");

  // growing the budget converts Unknown into definite answers
  search::SearchOutcome tiny = search::search_proof(defs.ctx, facts, goal, Budget{50, 64, 5000});
  c.expect(search::unknown(tiny), "tiny budget unexpectedly definite");
  search::SearchOutcome big =
      search::search_proof(defs.ctx, facts, goal, Budget{2'000'000, 64, 30'000});
  c.expect(search::found(big) != nullptr, "larger budget did not find the proof");

  kernel::KnowledgeItem item{"extra", Term::val(1), Term::base(BaseKind::Val), 0,
                             kernel::ItemStatus::Active, std::nullopt};
  kernel::UnifyResult merged = kernel::unify(st, defs.ctx, item, Budget{200'000, 4, 5000});
  c.expect(std::holds_alternative<kernel::Merged>(merged), "larger unify budget not definite");
}

void criterion_9_oracle_equivalence() {
  Criterion c{"9 search matches the exhaustive size-8 enumerator"};
  auto cases = kor::standard_cases();
  for (auto& oc : cases) {
    kor::CaseVerdict v = kor::compare_case(oc, Budget{2'000'000, 64, 20'000});
    c.expect(v.comparable, oc.name + ": search hit its budget");
    c.expect(v.impl_found == v.oracle_found, oc.name + ": verdicts disagree");
    c.expect(v.impl_found == oc.expect_found, oc.name + ": unexpected verdict");
  }
}

}  // namespace

int main() {
  criterion_1_metatheory();
  criterion_2_consistency_smoke();
  criterion_3_goldens();
  criterion_4_determinism();
  criterion_5_clock_atomicity();
  criterion_6_durability();
  criterion_7_causal_ordering();
  criterion_8_bounded_decidability();
  criterion_9_oracle_equivalence();
  if (g_failures) {
    std::printf("ACCEPTANCE: %d criterion(s) failed\n", g_failures);
    return 1;
  }
  std::printf("ACCEPTANCE: all criteria passed\n");
  return 0;
}
