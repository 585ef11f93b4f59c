#include "assign/engine.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <mutex>
#include <string>
#include <thread>

#include "assign/errors.hpp"
#include "assign/io_util.hpp"
#include "assign/log.hpp"
#include "assign/rng.hpp"

namespace assign {

OrchestratorState::OrchestratorState(std::size_t workers, std::size_t partitions,
                                     std::size_t miss_limit)
    : partitions_(partitions), miss_limit_(miss_limit), workers_(workers) {
  attempt_.assign(partitions_, 0);
  accepted_.assign(partitions_, 0);
}

void OrchestratorState::begin_iteration(std::size_t t, std::size_t slot_count) {
  t_ = t;
  tick_ = 0;
  for (auto& w : workers_) w = WorkerSlot{};
  attempt_.assign(partitions_, 0);
  accepted_.assign(partitions_, 0);
  accepted_total_ = 0;
  queue_.clear();
  for (std::size_t p = 0; p < partitions_; ++p) queue_.push_back(p);
  merged_.assign(slot_count, 0);
}

bool OrchestratorState::feed(const EngineMessage& msg) {
  if (const auto* ps = std::get_if<PartialSumsMsg>(&msg)) {
    if (ps->t != t_ || ps->worker_id >= workers_.size() ||
        !workers_[ps->worker_id].alive || ps->partition_id >= partitions_ ||
        accepted_[ps->partition_id] > 0) {
      ++discarded_;
      return false;
    }
    if (ps->slots.size() != merged_.size())
      fail("engine-protocol", "partial sums carry " +
                                  std::to_string(ps->slots.size()) +
                                  " slots, expected " +
                                  std::to_string(merged_.size()));
    for (std::size_t k = 0; k < merged_.size(); ++k) merged_[k] += ps->slots[k];
    ++accepted_[ps->partition_id];
    ++accepted_total_;
    workers_[ps->worker_id].busy = false;
    workers_[ps->worker_id].last_heartbeat_tick = tick_;
    return true;
  }
  if (const auto* hb = std::get_if<Heartbeat>(&msg)) {
    if (hb->t == t_ && hb->worker_id < workers_.size() &&
        workers_[hb->worker_id].alive)
      workers_[hb->worker_id].last_heartbeat_tick = tick_;
    else
      ++discarded_;
    return false;
  }
  if (const auto* ack = std::get_if<ReassignAck>(&msg)) {
    // A confirmed drop doubles as the replacement joining on the same slot.
    ++acks_;
    if (ack->worker_id < workers_.size() && !workers_[ack->worker_id].alive) {
      workers_[ack->worker_id] = WorkerSlot{};
      workers_[ack->worker_id].last_heartbeat_tick = tick_;
    }
    return false;
  }
  ++discarded_;  // orchestrator-bound channels never carry the other variants
  return false;
}

void OrchestratorState::advance_tick() { ++tick_; }

std::vector<std::size_t> OrchestratorState::stale_workers() const {
  std::vector<std::size_t> out;
  for (std::size_t w = 0; w < workers_.size(); ++w) {
    const auto& slot = workers_[w];
    if (slot.alive && slot.busy &&
        tick_ - slot.last_heartbeat_tick >= miss_limit_)
      out.push_back(w);
  }
  return out;
}

std::vector<std::size_t> OrchestratorState::declare_dead(std::size_t worker) {
  std::vector<std::size_t> requeued;
  if (worker >= workers_.size() || !workers_[worker].alive) return requeued;
  auto& slot = workers_[worker];
  slot.alive = false;
  if (slot.busy) {
    std::size_t p = slot.partition;
    slot.busy = false;
    if (accepted_[p] == 0) {
      ++attempt_[p];
      queue_.push_back(p);
      requeued.push_back(p);
    }
  }
  return requeued;
}

std::optional<AssignPartition> OrchestratorState::next_assignment(
    std::size_t worker) {
  if (worker >= workers_.size()) return std::nullopt;
  auto& slot = workers_[worker];
  if (!slot.alive || slot.busy || queue_.empty()) return std::nullopt;
  std::size_t p = queue_.front();
  queue_.erase(queue_.begin());
  slot.busy = true;
  slot.partition = p;
  slot.last_heartbeat_tick = tick_;
  return AssignPartition{p, t_, attempt_[p]};
}

bool OrchestratorState::iteration_complete() const {
  return accepted_total_ == partitions_;
}

std::span<const __int128> OrchestratorState::merged() const { return merged_; }

std::size_t OrchestratorState::accepted_count(std::size_t partition) const {
  return accepted_[partition];
}

std::size_t OrchestratorState::discarded_messages() const { return discarded_; }

std::size_t OrchestratorState::reassign_acks() const { return acks_; }

std::uint64_t OrchestratorState::attempt_of(std::size_t partition) const {
  return attempt_[partition];
}

bool OrchestratorState::worker_alive(std::size_t worker) const {
  return worker < workers_.size() && workers_[worker].alive;
}

std::size_t OrchestratorState::live_worker_count() const {
  std::size_t n = 0;
  for (const auto& w : workers_)
    if (w.alive) ++n;
  return n;
}

namespace {

// Injection counter packs (t, partition, attempt) so the draw is a pure
// function of the retry, never of which worker ran it or how many exist.
std::uint64_t injection_counter(std::size_t t, std::size_t partition,
                                std::uint64_t attempt) {
  return (static_cast<std::uint64_t>(t) << 32) ^
         (static_cast<std::uint64_t>(partition) << 12) ^
         std::min<std::uint64_t>(attempt, 0xFFF);
}

struct Channel {
  std::mutex mu;
  std::condition_variable cv;
  std::deque<EngineMessage> inbox;
  bool stop = false;

  void push(EngineMessage msg) {
    {
      std::lock_guard<std::mutex> lock(mu);
      inbox.push_back(std::move(msg));
    }
    cv.notify_one();
  }
};

std::uint64_t broadcast_bytes(const DualBroadcast& b) {
  std::uint64_t n = b.sigma.size() * sizeof(double);
  for (const auto& r : b.r) n += r.size() * sizeof(double);
  return n;
}

}  // namespace

struct Engine::Impl {
  EngineConfig cfg;
  const std::vector<Partition>& parts;

  std::vector<std::unique_ptr<Channel>> worker_channels;
  Channel orch;
  std::atomic<std::size_t> zombie_pending{0};
  std::vector<std::atomic<bool>> zombie_flag;

  const PartitionWork* work = nullptr;
  std::size_t slot_count = 0;

  std::vector<std::uint64_t> peak_bytes;
  std::vector<std::thread> threads;

  Impl(EngineConfig c, const std::vector<Partition>& p)
      : cfg(c), parts(p), zombie_flag(c.workers), peak_bytes(c.workers, 0) {
    for (std::size_t w = 0; w < cfg.workers; ++w)
      worker_channels.push_back(std::make_unique<Channel>());
    for (std::size_t w = 0; w < cfg.workers; ++w)
      threads.emplace_back([this, w] { worker_main(w); });
  }

  ~Impl() {
    for (auto& ch : worker_channels) {
      {
        std::lock_guard<std::mutex> lock(ch->mu);
        ch->stop = true;
      }
      ch->cv.notify_all();
    }
    for (auto& t : threads) t.join();
  }

  bool dies(std::size_t t, std::size_t partition, std::uint64_t attempt) const {
    if (cfg.inject_failure <= 0.0) return false;
    return rng_uniform01(cfg.failure_seed, RngStream::failure_injection,
                         injection_counter(t, partition, attempt)) <
           cfg.inject_failure;
  }

  void notify_orchestrator_of_crash() {
    {
      std::lock_guard<std::mutex> lock(orch.mu);
      zombie_pending.fetch_add(1);
    }
    orch.cv.notify_one();
  }

  void worker_main(std::size_t w) {
    Channel& ch = *worker_channels[w];
    DualBroadcast bcast{};
    for (;;) {
      EngineMessage msg;
      {
        std::unique_lock<std::mutex> lock(ch.mu);
        ch.cv.wait(lock, [&] { return ch.stop || !ch.inbox.empty(); });
        if (ch.stop && ch.inbox.empty()) return;
        msg = std::move(ch.inbox.front());
        ch.inbox.pop_front();
      }
      if (const auto* b = std::get_if<DualBroadcast>(&msg)) {
        bcast = *b;
        continue;
      }
      if (const auto* notice = std::get_if<ReassignAck>(&msg)) {
        // The orchestrator reassigned our partition after the crash. Coming
        // back clean models the replacement worker taking over this slot;
        // the confirm ack below is what revives it orchestrator-side.
        zombie_flag[w].store(false);
        orch.push(ReassignAck{w, notice->partition_id});
        continue;
      }
      const auto* assign = std::get_if<AssignPartition>(&msg);
      if (!assign) continue;

      if (dies(assign->t, assign->partition_id, assign->attempt)) {
        // Crash simulation: drop the work, go silent, wait to be told the
        // partition moved on. The flag is the in-process health probe; a
        // crashed worker sends nothing.
        zombie_flag[w].store(true);
        notify_orchestrator_of_crash();
        continue;
      }

      const Partition& part = parts[assign->partition_id];
      std::vector<__int128> slots(slot_count, 0);
      orch.push(Heartbeat{w, assign->t});
      for (std::size_t lo = part.lo; lo < part.hi;) {
        std::size_t hi = std::min(part.hi, lo + cfg.heartbeat_chunk);
        (*work)(Partition{part.partition_id, lo, hi}, bcast, slots);
        lo = hi;
        orch.push(Heartbeat{w, assign->t});
      }
      std::uint64_t owned =
          slots.size() * sizeof(__int128) + broadcast_bytes(bcast);
      peak_bytes[w] = std::max(peak_bytes[w], owned);
      orch.push(PartialSumsMsg{assign->partition_id, assign->t, w,
                               std::move(slots)});
    }
  }
};

Engine::Engine(const ProblemSpec& spec, EngineConfig cfg) : config_(cfg) {
  if (config_.workers == 0)
    fail("invalid-config", "engine needs at least one worker");
  // Default granularity: four partitions per worker, so reassignment after
  // a failure moves a quarter of one worker's share, capped by item count.
  if (config_.partitions == 0)
    config_.partitions = std::min<std::size_t>(config_.workers * 4, spec.I);
  if (config_.heartbeat_chunk == 0) config_.heartbeat_chunk = 4096;
  partitions_ = partition_items(spec, config_.partitions);
  impl_ = std::make_unique<Impl>(config_, partitions_);
}

Engine::~Engine() = default;

std::vector<__int128> Engine::run_iteration(const DualBroadcast& broadcast,
                                            const PartitionWork& work,
                                            std::size_t slot_count) {
  auto& impl = *impl_;
  report_ = IterationReport{};
  impl.work = &work;
  impl.slot_count = slot_count;

  OrchestratorState state(config_.workers, partitions_.size(),
                          config_.miss_limit);
  state.begin_iteration(broadcast.t, slot_count);
  std::size_t discarded_before = state.discarded_messages();

  for (auto& ch : impl.worker_channels) ch->push(broadcast);
  auto assign_idle = [&] {
    for (std::size_t w = 0; w < config_.workers; ++w) {
      if (impl.zombie_flag[w].load()) continue;
      if (auto a = state.next_assignment(w)) impl.worker_channels[w]->push(*a);
    }
  };
  assign_idle();

  while (!state.iteration_complete()) {
    std::deque<EngineMessage> batch;
    {
      std::unique_lock<std::mutex> lock(impl.orch.mu);
      bool woke = impl.orch.cv.wait_for(lock, std::chrono::seconds(120), [&] {
        return !impl.orch.inbox.empty() || impl.zombie_pending.load() > 0;
      });
      if (!woke)
        fail("iteration-timeout", "no worker progress for 120 s in iteration " +
                                      std::to_string(broadcast.t));
      batch.swap(impl.orch.inbox);
    }
    if (impl.zombie_pending.exchange(0) > 0) {
      for (std::size_t w = 0; w < config_.workers; ++w) {
        if (!impl.zombie_flag[w].load() || !state.worker_alive(w)) continue;
        auto requeued = state.declare_dead(w);
        report_.zombie_events += 1;
        report_.reassignments += requeued.size();
        for (std::size_t p : requeued) {
          if (state.attempt_of(p) > config_.max_attempts)
            fail("no-available-worker",
                 "partition " + std::to_string(p) + " failed " +
                     std::to_string(config_.max_attempts) +
                     " replacement workers in iteration " +
                     std::to_string(broadcast.t));
          impl.worker_channels[w]->push(ReassignAck{w, p});
          log_debug("worker ", w, " failed health check; partition ", p,
                    " requeued as attempt ", state.attempt_of(p));
        }
        if (requeued.empty()) impl.worker_channels[w]->push(ReassignAck{w, 0});
      }
    }
    for (auto& msg : batch) state.feed(msg);
    state.advance_tick();
    assign_idle();
  }

  report_.discarded_messages = state.discarded_messages() - discarded_before;
  auto merged = state.merged();
  return std::vector<__int128>(merged.begin(), merged.end());
}

std::uint64_t Engine::peak_worker_bytes() const {
  std::uint64_t peak = 0;
  for (auto b : impl_->peak_bytes) peak = std::max(peak, b);
  return peak;
}

namespace {

void append_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i)
    out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void append_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i)
    out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint64_t read_u64(const std::string& s, std::size_t off) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i)
    v = (v << 8) | static_cast<unsigned char>(s[off + static_cast<std::size_t>(i)]);
  return v;
}

std::uint32_t read_u32(const std::string& s, std::size_t off) {
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i)
    v = (v << 8) | static_cast<unsigned char>(s[off + static_cast<std::size_t>(i)]);
  return v;
}

std::filesystem::path record_path(const std::filesystem::path& dir,
                                  std::size_t t, std::uint32_t partition) {
  return dir / ("ckpt-" + std::to_string(t) + "-" + std::to_string(partition) +
                ".bin");
}

void write_record(const std::filesystem::path& dir, std::size_t t,
                  std::uint32_t partition, const double* rows,
                  std::uint32_t row_count, std::size_t J) {
  std::string buf;
  buf.reserve(24 + static_cast<std::size_t>(row_count) * J * 8);
  append_u64(buf, t);
  append_u32(buf, partition);
  append_u32(buf, row_count);
  for (std::size_t k = 0; k < static_cast<std::size_t>(row_count) * J; ++k)
    append_u64(buf, std::bit_cast<std::uint64_t>(rows[k]));
  append_u64(buf, crc64(buf.data(), buf.size()));
  write_text_file(record_path(dir, t, partition), buf);
}

struct RawRecord {
  std::uint32_t partition;
  std::uint32_t row_count;
  std::vector<double> rows;
};

RawRecord read_record(const std::filesystem::path& path, std::size_t t,
                      std::size_t J) {
  std::string buf = read_text_file(path);
  if (buf.size() < 24)
    fail("checksum-mismatch", path.string() + " is truncated");
  std::uint64_t stored = read_u64(buf, buf.size() - 8);
  std::uint64_t actual = crc64(buf.data(), buf.size() - 8);
  if (stored != actual)
    fail("checksum-mismatch", path.string() + " checksum " + to_hex16(actual) +
                                  " does not match trailer " + to_hex16(stored));
  RawRecord rec;
  std::uint64_t rec_t = read_u64(buf, 0);
  rec.partition = read_u32(buf, 8);
  rec.row_count = read_u32(buf, 12);
  if (rec_t != t ||
      buf.size() != 24 + static_cast<std::size_t>(rec.row_count) * J * 8)
    fail("checksum-mismatch", path.string() + " header is inconsistent");
  rec.rows.resize(static_cast<std::size_t>(rec.row_count) * J);
  for (std::size_t k = 0; k < rec.rows.size(); ++k)
    rec.rows[k] = std::bit_cast<double>(read_u64(buf, 16 + k * 8));
  return rec;
}

}  // namespace

void write_checkpoint(const std::filesystem::path& dir, std::size_t t,
                      const ProblemSpec& spec,
                      const std::vector<Partition>& partitions,
                      const MatrixD& X, const MatrixD& xi, const MatrixD& lam,
                      const MatrixD& mu) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail("io-failure", "cannot create " + dir.string());
  for (const auto& part : partitions)
    write_record(dir, t, static_cast<std::uint32_t>(part.partition_id),
                 X.data().data() + part.lo * spec.J,
                 static_cast<std::uint32_t>(part.hi - part.lo), spec.J);
  std::vector<double> coord;
  coord.reserve((2 * spec.M + spec.N) * spec.J);
  for (const auto* m : {&xi, &lam, &mu})
    coord.insert(coord.end(), m->data().begin(), m->data().end());
  write_record(dir, t, kCoordinatorRecord, coord.data(),
               static_cast<std::uint32_t>(2 * spec.M + spec.N), spec.J);
}

CheckpointData read_checkpoint(const std::filesystem::path& dir, std::size_t t,
                               const ProblemSpec& spec) {
  std::string prefix = "ckpt-" + std::to_string(t) + "-";
  std::vector<RawRecord> parts;
  std::optional<RawRecord> coord;
  if (!std::filesystem::is_directory(dir))
    fail("missing-record", "no checkpoint directory " + dir.string());
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    std::string name = entry.path().filename().string();
    if (!name.starts_with(prefix) || !name.ends_with(".bin")) continue;
    RawRecord rec = read_record(entry.path(), t, spec.J);
    if (rec.partition == kCoordinatorRecord)
      coord = std::move(rec);
    else
      parts.push_back(std::move(rec));
  }
  if (parts.empty() || !coord.has_value())
    fail("missing-record",
         "no complete checkpoint for iteration " + std::to_string(t));
  std::sort(parts.begin(), parts.end(),
            [](const RawRecord& a, const RawRecord& b) {
              return a.partition < b.partition;
            });

  CheckpointData data;
  data.t = t;
  data.X = MatrixD(spec.I, spec.J);
  std::size_t row = 0;
  for (const auto& rec : parts) {
    if (row + rec.row_count > spec.I)
      fail("missing-record", "checkpoint rows exceed item count");
    std::copy(rec.rows.begin(), rec.rows.end(),
              data.X.data().begin() + row * spec.J);
    row += rec.row_count;
  }
  if (row != spec.I)
    fail("missing-record", "checkpoint holds " + std::to_string(row) +
                               " rows, expected " + std::to_string(spec.I));
  if (coord->row_count != 2 * spec.M + spec.N)
    fail("missing-record", "coordinator record has wrong shape");
  data.xi = MatrixD(spec.M, spec.J);
  data.lam = MatrixD(spec.M, spec.J);
  data.mu = MatrixD(spec.N, spec.J);
  const double* src = coord->rows.data();
  auto take = [&](MatrixD& dst) {
    std::copy(src, src + dst.data().size(), dst.data().begin());
    src += dst.data().size();
  };
  take(data.xi);
  take(data.lam);
  take(data.mu);
  return data;
}

std::vector<std::size_t> list_checkpoints(const std::filesystem::path& dir) {
  std::vector<std::size_t> out;
  if (!std::filesystem::is_directory(dir)) return out;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    std::string name = entry.path().filename().string();
    if (!name.starts_with("ckpt-") || !name.ends_with(".bin")) continue;
    std::size_t dash = name.find('-', 5);
    if (dash == std::string::npos) continue;
    try {
      out.push_back(std::stoull(name.substr(5, dash - 5)));
    } catch (...) {
      continue;
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace assign
