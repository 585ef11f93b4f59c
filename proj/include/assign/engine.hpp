#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "assign/dense.hpp"
#include "assign/problem.hpp"

namespace assign {

// Protocol messages. The transport here is in-process queues, but the
// contract is wire-shaped: workers and orchestrator exchange only these.
struct AssignPartition {
  std::size_t partition_id;
  std::size_t t;
  std::uint64_t attempt;  // incremented on every reassignment
};

// Raw fixed-point partial sums; slot meaning belongs to the caller of
// run_iteration. Order-independent to merge, so acceptance order cannot
// change results.
struct PartialSumsMsg {
  std::size_t partition_id;
  std::size_t t;
  std::size_t worker_id;
  std::vector<__int128> slots;
};

// Owner-side state pushed to every worker at the start of an iteration:
// the penalty residual vectors r_s plus the objective's column aggregates
// sigma_j, all computed by the aggregator from the previous reduction.
struct DualBroadcast {
  std::size_t t;
  std::vector<std::vector<double>> r;  // per combined constraint s, size J
  std::vector<double> sigma;           // per owner j
  double beta;
  double rho;
};

struct Heartbeat {
  std::size_t worker_id;
  std::size_t t;
};

// Two-way handshake around a reassignment. Orchestrator to worker: your
// partition moved on, drop it. Worker to orchestrator: dropped and back in
// service; the orchestrator revives the slot on receipt, which is how a
// replacement worker joins.
struct ReassignAck {
  std::size_t worker_id;
  std::size_t partition_id;
};

using EngineMessage = std::variant<AssignPartition, PartialSumsMsg,
                                   DualBroadcast, Heartbeat, ReassignAck>;

// Orchestrator bookkeeping as a plain state machine: messages in, decisions
// out, no threads and no clock. One instance drives one iteration at a
// time. The engine pump feeds it from real queues; protocol tests feed it
// synthetic message sequences.
class OrchestratorState {
 public:
  OrchestratorState(std::size_t workers, std::size_t partitions,
                    std::size_t miss_limit = 3);

  void begin_iteration(std::size_t t, std::size_t slot_count);

  // Returns true if the message advanced the iteration (a PartialSums that
  // was accepted); duplicates, stale iterations, and messages from workers
  // already declared dead are discarded.
  bool feed(const EngineMessage& msg);

  // One heartbeat period elapses.
  void advance_tick();

  // Workers whose last heartbeat is at least miss_limit ticks old.
  std::vector<std::size_t> stale_workers() const;

  // Requeues every unfinished partition held by the worker and discards its
  // future messages for this iteration. Returns the requeued partitions.
  std::vector<std::size_t> declare_dead(std::size_t worker);

  // Next partition for an idle worker, with its attempt number.
  std::optional<AssignPartition> next_assignment(std::size_t worker);

  bool iteration_complete() const;
  std::span<const __int128> merged() const;

  std::size_t accepted_count(std::size_t partition) const;
  std::size_t discarded_messages() const;
  std::size_t reassign_acks() const;
  std::uint64_t attempt_of(std::size_t partition) const;
  bool worker_alive(std::size_t worker) const;
  std::size_t live_worker_count() const;

 private:
  struct WorkerSlot {
    bool alive = true;
    bool busy = false;
    std::size_t partition = 0;
    std::size_t last_heartbeat_tick = 0;
  };

  std::size_t partitions_;
  std::size_t miss_limit_;
  std::size_t t_ = 0;
  std::size_t tick_ = 0;
  std::vector<WorkerSlot> workers_;
  std::vector<std::uint64_t> attempt_;
  std::vector<std::size_t> queue_;
  std::vector<std::size_t> accepted_;  // per partition count
  std::size_t accepted_total_ = 0;
  std::size_t discarded_ = 0;
  std::size_t acks_ = 0;
  std::vector<__int128> merged_;
};

struct EngineConfig {
  std::size_t workers = 1;
  std::size_t partitions = 0;  // 0 = four per worker, capped by item count
  // Probability that an assignment attempt crashes its worker for the rest
  // of the iteration. Drawn from the failure_injection stream keyed by
  // (t, partition, attempt), so the chaos is identical for any worker
  // count.
  double inject_failure = 0.0;
  std::uint64_t failure_seed = 0;
  std::size_t heartbeat_chunk = 4096;  // items per heartbeat
  std::size_t miss_limit = 3;
  // Reassignment budget per partition per iteration before the engine gives
  // up with no-available-worker. Every failed attempt consumes a
  // replacement worker, so this bounds the chaos a run will absorb.
  std::uint64_t max_attempts = 20;
};

// work(partition, broadcast, slots): solve the partition's items against
// the broadcast snapshot and add raw fixed-point partials into slots
// (pre-zeroed, sized per run_iteration's slot_count). It must be a pure
// function of (partition, broadcast) so a reassigned attempt reproduces the
// exact same result.
using PartitionWork = std::function<void(const Partition&, const DualBroadcast&,
                                         std::span<__int128> slots)>;

struct IterationReport {
  std::size_t reassignments = 0;
  std::size_t zombie_events = 0;
  std::size_t discarded_messages = 0;
};

// In-process realization of the orchestrator / worker farm / aggregator
// loop. Worker threads own no shared mutable state: they read the
// broadcast, write disjoint row ranges through the work closure, and send
// messages. Crash injection parks the worker thread without letting it
// send anything; the parked flag doubles as the health probe (threads in
// one process share a clock domain, so heartbeat staleness, which the
// OrchestratorState also tracks, would only add wall-clock flakiness
// here). Once the orchestrator has reassigned the dropped partition it
// notifies the parked thread, which rejoins as the replacement worker on
// the same slot; a pool of W threads therefore models W machine slots with
// automatic replacement, and determinism holds because acceptance is
// exactly-once per partition and crash draws depend only on
// (t, partition, attempt).
class Engine {
 public:
  Engine(const ProblemSpec& spec, EngineConfig cfg);
  ~Engine();

  Engine(const Engine&) = delete;
  Engine& operator=(const Engine&) = delete;

  std::size_t worker_count() const { return config_.workers; }
  const std::vector<Partition>& partitions() const { return partitions_; }

  std::vector<__int128> run_iteration(const DualBroadcast& broadcast,
                                      const PartitionWork& work,
                                      std::size_t slot_count);

  const IterationReport& last_report() const { return report_; }
  std::uint64_t peak_worker_bytes() const;

 private:
  struct Impl;
  EngineConfig config_;
  std::vector<Partition> partitions_;
  IterationReport report_;
  std::unique_ptr<Impl> impl_;
};

// Checkpoint records: checkpoints/ckpt-<t>-<partition>.bin holds that
// partition's X rows; the coordinator record (partition id 0xFFFFFFFF)
// stacks xi, lambda, mu. Layout: 16-byte header {t: u64, partition_id: u32,
// row_count: u32}, row_count * J little-endian float64 rows, then a CRC-64
// trailer over header plus payload.
inline constexpr std::uint32_t kCoordinatorRecord = 0xFFFFFFFFu;

struct CheckpointData {
  std::size_t t = 0;
  MatrixD X;
  MatrixD xi;
  MatrixD lam;
  MatrixD mu;
};

void write_checkpoint(const std::filesystem::path& dir, std::size_t t,
                      const ProblemSpec& spec,
                      const std::vector<Partition>& partitions,
                      const MatrixD& X, const MatrixD& xi, const MatrixD& lam,
                      const MatrixD& mu);

CheckpointData read_checkpoint(const std::filesystem::path& dir, std::size_t t,
                               const ProblemSpec& spec);

std::vector<std::size_t> list_checkpoints(const std::filesystem::path& dir);

}  // namespace assign
