#pragma once

#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "kos/budget.hpp"
#include "kos/kernel.hpp"
#include "kos/signal.hpp"
#include "kos/surface.hpp"

namespace kos::rt {

using ElabTemplate = surface::TemplateDecl;

// ---------------------------------------------------------------------------
// Write-ahead log storage. The file backend is the only implementation; the
// interface keeps materialization pluggable.
// ---------------------------------------------------------------------------
class WalStorage {
 public:
  virtual ~WalStorage() = default;
  // Durable append of one record line; returns false on write failure.
  virtual bool append_line(const std::string& line) = 0;
};

class FileWal : public WalStorage {
 public:
  explicit FileWal(std::string path);
  bool append_line(const std::string& line) override;

  // Force the Nth append (0-based from now) to fail once. Simulates a commit
  // write failure for durability testing.
  void arm_fault(std::uint64_t at_append);

 private:
  std::string path_;
  std::uint64_t appends_ = 0;
  std::optional<std::uint64_t> fault_at_;
};

// ---------------------------------------------------------------------------
// Deferred signals waiting for a fact to commit (causal ordering).
// ---------------------------------------------------------------------------
struct PendingEntry {
  RawSignal signal;
  Digest dependency;        // hash of the missing goal
  std::string description;  // printed missing goal
  int retries_left = 16;
};

// ---------------------------------------------------------------------------
// Run report
// ---------------------------------------------------------------------------
struct Action {
  enum class Kind : std::uint8_t {
    Committed,
    Rejected,
    Deferred,
    Retried,
    Abandoned,
    Discarded,
    CommitFailed,
    WatcherEmitted,
  };
  Kind kind;
  std::uint64_t signal_seq = 0;  // 0 when not signal-driven
  std::string event;
  std::string detail;
  std::uint64_t clock = 0;
  std::string state_digest;
  std::uint64_t wal_seq = 0;
};
const char* action_kind_name(Action::Kind k);

struct RunReport {
  std::vector<Action> actions;
  bool halted_on_commit_failure = false;

  std::size_t count(Action::Kind k) const;
};

std::string render_report(const RunReport& r, bool structured);

// ---------------------------------------------------------------------------
// Runtime configuration <Sigma, Q_raw, Env, M>
// ---------------------------------------------------------------------------
struct Config {
  surface::LoadedDefs defs;
  kernel::KernelState state;
  std::deque<RawSignal> raw_queue;
  std::vector<PendingEntry> pool;
  std::set<std::string> watcher_fired;  // dedup: watcher/subject/partner
  std::unique_ptr<WalStorage> wal;
  std::uint64_t next_seq = 1;
  Digest chain = Digest::zero();
  std::uint64_t last_sequence = 0;
  bool any_injected = false;
  bool halted = false;
  int max_retries = 16;
};

kernel::KernelState initial_state(const surface::LoadedDefs& defs);
Config make_config(surface::LoadedDefs defs, std::unique_ptr<WalStorage> wal);

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------
struct InjectOk {};
struct OutOfOrderSequence {
  std::uint64_t last;
  std::uint64_t got;
};
using InjectResult = std::variant<InjectOk, OutOfOrderSequence>;

// Append a raw signal to Q_raw; nothing else changes.
InjectResult inject(Config& cfg, RawSignal s);

struct ElabSome { kernel::Event event; };
struct ElabDeferred {
  Term missing_goal;
  Digest dependency;
  std::string description;
};
struct ElabNone { std::string reason; };
using ElabResult = std::variant<ElabSome, ElabDeferred, ElabNone>;

// Match a template, decode the payload, anchor time, and synthesize the
// precondition passport. Missing facts defer the signal; anything
// unintelligible is discarded (the logical firewall). A refuted precondition
// still elaborates, without a passport, so the kernel records the formal
// rejection.
ElabResult elaborate(const RawSignal& s, const surface::LoadedDefs& defs,
                     const kernel::KernelState& state, const Budget& budget);

struct CommitOk {};
struct CommitFailed { std::string cause; };
using CommitResult = std::variant<CommitOk, CommitFailed>;

// Two-phase fence: serialize, append with flush, and only then adopt the new
// state. On write failure the live state is unchanged.
CommitResult commit(Config& cfg, kernel::Transitioned t);

// Pop one raw signal, elaborate, drive the kernel to quiescence for it
// (committing every transition), then service the pending pool and watchers.
void scheduler_tick(Config& cfg, const Budget& budget, RunReport& report);

// Drain the raw queue.
RunReport run_to_quiescence(Config& cfg, const Budget& budget);

// ---------------------------------------------------------------------------
// Recovery
// ---------------------------------------------------------------------------
struct ReplayDivergence {
  std::size_t at_record;
  std::string detail;
};
using RecoverResult = std::variant<kernel::KernelState, ReplayDivergence>;

// Validate the chain record by record, discard the torn tail, and re-apply
// every event through the kernel, asserting each recorded digest.
RecoverResult recover(const std::string& wal_path, const surface::LoadedDefs& defs);

// Chain-verified records of a log file (stops at the first broken record).
struct WalEntry {
  kernel::TransitionRecord record;
  kernel::Event event;
};
std::vector<WalEntry> read_wal(const std::string& wal_path, const surface::LoadedDefs& defs);

// Signal stream loading; malformed lines are reported, never fatal.
struct SignalLoad {
  std::vector<RawSignal> signals;
  std::vector<std::string> errors;
};
SignalLoad load_signals_file(const std::string& path);

}  // namespace kos::rt
