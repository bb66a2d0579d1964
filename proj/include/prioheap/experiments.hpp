#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <unordered_set>
#include <vector>

#include "prioheap/baseline_cache.hpp"
#include "prioheap/runtime.hpp"
#include "prioheap/sache.hpp"
#include "prioheap/trace.hpp"

namespace prioheap {

struct RunReport {
  double total_time = 0.0;
  double mutator_time = 0.0;
  double gc_time = 0.0;
  double miss_service_time = 0.0;
  std::uint64_t hits = 0;
  std::uint64_t misses = 0;
  std::uint64_t gc_count = 0;
  Bytes total_allocation = 0;
  Bytes gc_marked_bytes = 0;  // cumulative marking work
  bool crashed = false;

  double hit_rate() const {
    const auto n = hits + misses;
    return n == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(n);
  }
};

struct DriverOptions {
  Bytes node_bytes = 1024;  // request size of one value-tree node
};

/// Serves one request: get; on a miss, charge the fetch, build the value and
/// put it; on a hit, charge a visit of every node of the value.
template <class Cache>
void serve_event(Runtime& rt, Cache& cache, const TraceEvent& ev, const DriverOptions& opt,
                 RunReport& report) {
  if (const ObjectRef value = cache.get(ev.key)) {
    ++report.hits;
    rt.charge_mutator(rt.costs().hit_cost_per_node *
                      static_cast<double>(count_nodes(rt.heap(), *value)));
    return;
  }
  ++report.misses;
  const double fetch = static_cast<double>(ev.bytes) / rt.costs().bandwidth_bytes_per_sec;
  report.miss_service_time += fetch;
  rt.charge_mutator(fetch);
  const ObjectId root = build_value(rt, ev.bytes, opt.node_bytes);
  // Miss cost handed to the cache in simulated nanoseconds.
  cache.put(ev.key, root, fetch * 1e9, ev.bytes);
}

// Fills the runtime-wide fields of a report from the runtime's totals.
inline void finish_report(const Runtime& rt, Bytes allocated_at_start, RunReport& report) {
  report.mutator_time = rt.mutator_time();
  report.gc_time = rt.gc_time();
  report.total_time = report.mutator_time + report.gc_time;
  report.gc_count = rt.gc_count();
  report.gc_marked_bytes = rt.gc_marked_bytes();
  report.total_allocation = rt.heap().total_allocated() - allocated_at_start;
}

// Runs before each event with its index.
using EventHook = std::function<void(std::size_t)>;

template <class Cache>
RunReport run_trace(Runtime& rt, Cache& cache, const Trace& trace,
                    const DriverOptions& opt = {}, const EventHook& before_event = {}) {
  RunReport report;
  const Bytes start = rt.heap().total_allocated();
  try {
    for (std::size_t i = 0; i < trace.size(); ++i) {
      rt.set_event_index(i);
      if (before_event) before_event(i);
      serve_event(rt, cache, trace[i], opt, report);
    }
  } catch (const SimulatedCrash&) {
    report.crashed = true;
  }
  finish_report(rt, start, report);
  return report;
}

// ---------------------------------------------------------------------------
// Memory pressure

/// A rooted singly linked list of chunks standing in for program data that
/// competes with the cache.
class PressureStructure {
 public:
  explicit PressureStructure(Runtime& rt) : rt_(&rt) {
    anchor_ = rt.allocate(16, 1);
    rt.heap().add_root(anchor_);
  }

  void grow(Bytes bytes) {
    Heap& heap = rt_->heap();
    const ObjectId chunk = rt_->allocate(bytes, 1);
    heap.set_slot(chunk, 0, heap.slot(anchor_, 0));
    heap.set_slot(anchor_, 0, chunk);
    ++chunks_;
  }

  void shrink() {
    Heap& heap = rt_->heap();
    const ObjectRef head = heap.slot(anchor_, 0);
    if (!head) return;
    heap.set_slot(anchor_, 0, heap.slot(*head, 0));
    --chunks_;
  }

  std::size_t chunks() const noexcept { return chunks_; }

 private:
  Runtime* rt_;
  ObjectId anchor_;
  std::size_t chunks_ = 0;
};

struct PressureOptions {
  Bytes bytes_per_event = 0;  // growth per event during the middle third
  Bytes reserve = 0;          // free-memory target to check against
};

struct PressurePoint {
  std::uint64_t gc_index = 0;
  std::size_t event_index = 0;
  int phase = 1;  // 1: no pressure, 2: growing, 3: dismantling
  double time = 0.0;
  double gc_time = 0.0;
  Bytes non_cache_live = 0;
  Bytes free_after = 0;
  Bytes cache_bytes = 0;
  // Free bytes reached the reserve, or the non-cache data alone left no room.
  bool reserve_met = true;
};

struct PressureResult {
  RunReport report;
  std::vector<PressurePoint> series;
};

inline int pressure_phase(std::size_t event, std::size_t length) {
  if (event < length / 3) return 1;
  if (event < 2 * length / 3) return 2;
  return 3;
}

/// No extra data for the first third of the trace, one chunk per event
/// during the middle third, one chunk released per event in the last third.
template <class Cache>
PressureResult run_pressure(Runtime& rt, Cache& cache, const Trace& trace,
                            const PressureOptions& pressure, const DriverOptions& opt = {}) {
  PressureStructure structure(rt);
  const std::size_t first_gc = rt.gc_log().size();
  const std::size_t n = trace.size();
  auto hook = [&](std::size_t i) {
    if (pressure.bytes_per_event == 0) return;
    const int phase = pressure_phase(i, n);
    if (phase == 2) structure.grow(pressure.bytes_per_event);
    if (phase == 3) structure.shrink();
  };
  PressureResult result;
  result.report = run_trace(rt, cache, trace, opt, hook);

  const Bytes capacity = rt.heap().capacity();
  for (std::size_t g = first_gc; g < rt.gc_log().size(); ++g) {
    const GcRecord& rec = rt.gc_log()[g];
    PressurePoint p;
    p.gc_index = rec.stats.gc_index;
    p.event_index = rec.event_index;
    p.phase = pressure_phase(rec.event_index, n);
    p.time = rec.time;
    p.gc_time = rec.gc_time;
    p.non_cache_live = rec.stats.non_space_live_bytes;
    p.free_after = rec.free_after;
    for (const SpaceStats& s : rec.stats.spaces) p.cache_bytes += s.retained_bytes;
    const bool room = p.non_cache_live + pressure.reserve <= capacity;
    p.reserve_met = !room || p.free_after >= pressure.reserve;
    result.series.push_back(p);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Two caches at different request frequencies

enum class MultiCacheMode {
  kSoftRef,         // one shared space, priorities are global access times
  kSeparateSpaces,  // one Sache and one space per cache
};

struct MultiFrequencyOptions {
  std::size_t ratio = 1;  // fast-cache requests per slow-cache request
  std::size_t total_requests = 15'000;
  MultiCacheMode mode = MultiCacheMode::kSeparateSpaces;
  double softref_free_fraction = 0.5;
  BoundSpec space_bound = HeapFraction{0.2};
  EvictionMode eviction = EvictionMode::kStrict;
  DriverOptions driver;
};

struct CacheOutcome {
  RunReport report;
  // Hit rate of the same cache serving the same requests with no competing
  // cache in the heap.
  double max_hit_rate = 0.0;
  double normalized_hit_rate = 0.0;
};

struct MultiFrequencyResult {
  CacheOutcome fast;
  CacheOutcome slow;
};

struct RuntimeSpec {
  Bytes capacity = 64ull << 20;
  SizeClassTable classes = SizeClassTable::standard();
  CostModel costs;
};

namespace detail {

class MultiCacheSet {
 public:
  MultiCacheSet(Runtime& rt, const MultiFrequencyOptions& opt, std::size_t count) {
    if (opt.mode == MultiCacheMode::kSoftRef) {
      const SoftRefDomain domain =
          softref_emulation(rt.collector(), opt.softref_free_fraction, opt.eviction);
      for (std::size_t i = 0; i < count; ++i) {
        caches_.push_back(
            std::make_unique<Sache<std::string>>(rt.heap(), rt.collector(), domain));
      }
    } else {
      for (std::size_t i = 0; i < count; ++i) {
        caches_.push_back(std::make_unique<Sache<std::string>>(
            rt.heap(), rt.collector(), opt.space_bound, LruPolicy{}, opt.eviction));
      }
    }
  }
  Sache<std::string>& operator[](std::size_t i) { return *caches_[i]; }

 private:
  std::vector<std::unique_ptr<Sache<std::string>>> caches_;
};

inline double normalized(double hit, double max_hit) {
  return max_hit > 0.0 ? hit / max_hit : 1.0;
}

inline RunReport run_solo(const RuntimeSpec& spec, const MultiFrequencyOptions& opt,
                          const Trace& requests) {
  Runtime rt(spec.capacity, spec.classes, spec.costs);
  MultiCacheSet caches(rt, opt, 1);
  return run_trace(rt, caches[0], requests, opt.driver);
}

}  // namespace detail

/// Interleaves `ratio` requests from the fast stream with one from the slow
/// stream until `total_requests` have been served. Streams wrap around.
inline MultiFrequencyResult run_multi_frequency(const RuntimeSpec& spec, const Trace& fast_stream,
                                                const Trace& slow_stream,
                                                const MultiFrequencyOptions& opt) {
  if (opt.ratio < 1) throw ConfigError("frequency ratio must be at least 1");
  if (fast_stream.empty() || slow_stream.empty()) throw ConfigError("empty request stream");

  Runtime rt(spec.capacity, spec.classes, spec.costs);
  detail::MultiCacheSet caches(rt, opt, 2);
  MultiFrequencyResult result;
  Trace served_fast, served_slow;
  const Bytes start = rt.heap().total_allocated();
  bool crashed = false;
  try {
    std::size_t served = 0;
    while (served < opt.total_requests) {
      for (std::size_t k = 0; k < opt.ratio && served < opt.total_requests; ++k, ++served) {
        const TraceEvent& ev = fast_stream[served_fast.size() % fast_stream.size()];
        rt.set_event_index(served);
        serve_event(rt, caches[0], ev, opt.driver, result.fast.report);
        served_fast.push_back(ev);
      }
      if (served < opt.total_requests) {
        const TraceEvent& ev = slow_stream[served_slow.size() % slow_stream.size()];
        rt.set_event_index(served);
        serve_event(rt, caches[1], ev, opt.driver, result.slow.report);
        served_slow.push_back(ev);
        ++served;
      }
    }
  } catch (const SimulatedCrash&) {
    crashed = true;
  }
  for (CacheOutcome* c : {&result.fast, &result.slow}) {
    const RunReport counts = c->report;
    finish_report(rt, start, c->report);
    c->report.hits = counts.hits;
    c->report.misses = counts.misses;
    c->report.miss_service_time = counts.miss_service_time;
    c->report.crashed = crashed;
  }

  result.fast.max_hit_rate = detail::run_solo(spec, opt, served_fast).hit_rate();
  result.slow.max_hit_rate = detail::run_solo(spec, opt, served_slow).hit_rate();
  result.fast.normalized_hit_rate =
      detail::normalized(result.fast.report.hit_rate(), result.fast.max_hit_rate);
  result.slow.normalized_hit_rate =
      detail::normalized(result.slow.report.hit_rate(), result.slow.max_hit_rate);
  return result;
}

}  // namespace prioheap
