#pragma once

#include <charconv>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "prioheap/errors.hpp"
#include "prioheap/experiments.hpp"
#include "prioheap/trace.hpp"

namespace prioheap {

using Json = nlohmann::ordered_json;

enum class ExperimentKind { kTrace, kPressure, kMultiFrequency };
enum class CacheKind { kSache, kBaseline };
enum class PolicyKind { kLru, kGreedyDual };
enum class BaselineMode { kEntries, kWeight };

struct HeapConfig {
  Bytes capacity_bytes = 64ull << 20;
  std::vector<Bytes> size_classes = SizeClassTable::standard().classes();
  Bytes large_object_threshold = SizeClassTable::standard().large_object_threshold();
};

struct CacheConfig {
  CacheKind kind = CacheKind::kSache;
  PolicyKind policy = PolicyKind::kLru;
  BoundSpec bound = HeapFraction{0.4};
  EvictionMode eviction = EvictionMode::kStrict;
  double greedy_dual_scale = 65536.0;
  BaselineMode baseline_mode = BaselineMode::kEntries;
  std::uint64_t baseline_capacity = 350;
};

struct WorkloadConfig {
  std::string trace_file;  // empty: generate from the fields below
  TraceSpec trace;
  Bytes node_bytes = 1024;
};

struct PressureConfig {
  Bytes bytes_per_event = 0;
  Bytes reserve_bytes = 0;
  std::string series_file;  // empty: derived from the report path
};

struct MultiFrequencyConfig {
  std::size_t ratio = 1;
  std::size_t total_requests = 15'000;
  MultiCacheMode mode = MultiCacheMode::kSeparateSpaces;
  double softref_free_fraction = 0.5;
};

struct RunConfig {
  std::string config_id = "default";
  std::uint64_t seed = 1;
  ExperimentKind experiment = ExperimentKind::kTrace;
  HeapConfig heap;
  CacheConfig cache;
  WorkloadConfig workload;
  CostModel costs;
  PressureConfig pressure;
  MultiFrequencyConfig multi_frequency;
};

namespace detail {

template <class E>
struct EnumName {
  E value;
  const char* name;
};

inline constexpr EnumName<ExperimentKind> kExperimentNames[] = {
    {ExperimentKind::kTrace, "trace"},
    {ExperimentKind::kPressure, "pressure"},
    {ExperimentKind::kMultiFrequency, "multi_frequency"}};
inline constexpr EnumName<CacheKind> kCacheNames[] = {{CacheKind::kSache, "sache"},
                                                      {CacheKind::kBaseline, "baseline"}};
inline constexpr EnumName<PolicyKind> kPolicyNames[] = {{PolicyKind::kLru, "lru"},
                                                        {PolicyKind::kGreedyDual, "greedy_dual"}};
inline constexpr EnumName<EvictionMode> kEvictionNames[] = {
    {EvictionMode::kStrict, "strict"}, {EvictionMode::kEntryBoundary, "entry_boundary"}};
inline constexpr EnumName<BaselineMode> kBaselineNames[] = {{BaselineMode::kEntries, "entries"},
                                                            {BaselineMode::kWeight, "weight"}};
inline constexpr EnumName<MultiCacheMode> kMultiModeNames[] = {
    {MultiCacheMode::kSoftRef, "softref"}, {MultiCacheMode::kSeparateSpaces, "separate_spaces"}};

template <class E, std::size_t N>
const char* enum_name(const EnumName<E> (&table)[N], E v) {
  for (const auto& e : table) {
    if (e.value == v) return e.name;
  }
  return "?";
}

template <class E, std::size_t N>
E enum_value(const EnumName<E> (&table)[N], const std::string& s, const std::string& where) {
  for (const auto& e : table) {
    if (s == e.name) return e.value;
  }
  std::string allowed;
  for (const auto& e : table) allowed += std::string(allowed.empty() ? "" : ", ") + e.name;
  throw ConfigError(where + ": unknown value '" + s + "' (expected one of " + allowed + ")");
}

inline void reject_unknown(const Json& obj, const std::string& where,
                           std::initializer_list<std::string_view> allowed) {
  if (!obj.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, _] : obj.items()) {
    bool ok = false;
    for (std::string_view a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError(where + ": unknown field '" + key + "'");
  }
}

template <class T>
void read(const Json& obj, const char* key, T& out, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) return;
  try {
    if constexpr (std::is_unsigned_v<T>) {
      if (!it->is_number_unsigned()) throw ConfigError("expected a non-negative integer");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!it->is_number()) throw ConfigError("expected a number");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!it->is_string()) throw ConfigError("expected a string");
    }
    out = it->template get<T>();
  } catch (const std::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

template <class E, std::size_t N>
void read_enum(const Json& obj, const char* key, E& out, const EnumName<E> (&table)[N],
               const std::string& where) {
  std::string s;
  read(obj, key, s, where);
  if (!s.empty()) out = enum_value(table, s, where + "." + key);
}

inline Json bound_to_json(const BoundSpec& b) {
  if (const auto* x = std::get_if<FixedBound>(&b)) return {{"kind", "fixed_bytes"}, {"value", x->bytes}};
  if (const auto* x = std::get_if<HeapFraction>(&b)) {
    return {{"kind", "heap_fraction"}, {"value", x->fraction}};
  }
  if (const auto* x = std::get_if<FreeFraction>(&b)) {
    return {{"kind", "free_fraction"}, {"value", x->fraction}};
  }
  return {{"kind", "adaptive_reserve"}, {"value", std::get<AdaptiveReserve>(b).reserve}};
}

inline BoundSpec bound_from_json(const Json& j, const std::string& where) {
  reject_unknown(j, where, {"kind", "value"});
  std::string kind;
  read(j, "kind", kind, where);
  if (!j.contains("value")) throw ConfigError(where + ": missing field 'value'");
  BoundSpec out;
  if (kind == "fixed_bytes" || kind == "adaptive_reserve") {
    Bytes v = 0;
    read(j, "value", v, where);
    out = kind == "fixed_bytes" ? BoundSpec{FixedBound{v}} : BoundSpec{AdaptiveReserve{v}};
  } else if (kind == "heap_fraction" || kind == "free_fraction") {
    double v = 0.0;
    read(j, "value", v, where);
    out = kind == "heap_fraction" ? BoundSpec{HeapFraction{v}} : BoundSpec{FreeFraction{v}};
  } else {
    throw ConfigError(where + ".kind: unknown bound kind '" + kind +
                      "' (expected fixed_bytes, heap_fraction, free_fraction or adaptive_reserve)");
  }
  try {
    validate_bound(out);
  } catch (const InvalidBound& e) {
    throw ConfigError(where + ": " + e.what());
  }
  return out;
}

}  // namespace detail

inline Json to_json(const RunConfig& c) {
  using namespace detail;
  return Json{
      {"config_id", c.config_id},
      {"seed", c.seed},
      {"experiment", enum_name(kExperimentNames, c.experiment)},
      {"heap",
       {{"capacity_bytes", c.heap.capacity_bytes},
        {"size_classes", c.heap.size_classes},
        {"large_object_threshold", c.heap.large_object_threshold}}},
      {"cache",
       {{"kind", enum_name(kCacheNames, c.cache.kind)},
        {"policy", enum_name(kPolicyNames, c.cache.policy)},
        {"bound", bound_to_json(c.cache.bound)},
        {"eviction", enum_name(kEvictionNames, c.cache.eviction)},
        {"greedy_dual_scale", c.cache.greedy_dual_scale},
        {"baseline_mode", enum_name(kBaselineNames, c.cache.baseline_mode)},
        {"baseline_capacity", c.cache.baseline_capacity}}},
      {"workload",
       {{"trace_file", c.workload.trace_file},
        {"keys", c.workload.trace.unique_keys},
        {"min_bytes", c.workload.trace.min_value},
        {"max_bytes", c.workload.trace.max_value},
        {"size_alpha", c.workload.trace.size_alpha},
        {"request_alpha", c.workload.trace.request_alpha},
        {"length", c.workload.trace.length},
        {"node_bytes", c.workload.node_bytes}}},
      {"costs",
       {{"bandwidth_bytes_per_sec", c.costs.bandwidth_bytes_per_sec},
        {"hit_cost_per_node", c.costs.hit_cost_per_node},
        {"gc_cost_per_marked_byte", c.costs.gc_cost_per_marked_byte},
        {"gc_fixed_cost", c.costs.gc_fixed_cost},
        {"gc_interval_bytes", c.costs.gc_interval_bytes}}},
      {"pressure",
       {{"bytes_per_event", c.pressure.bytes_per_event},
        {"reserve_bytes", c.pressure.reserve_bytes},
        {"series_file", c.pressure.series_file}}},
      {"multi_frequency",
       {{"ratio", c.multi_frequency.ratio},
        {"total_requests", c.multi_frequency.total_requests},
        {"mode", enum_name(kMultiModeNames, c.multi_frequency.mode)},
        {"softref_free_fraction", c.multi_frequency.softref_free_fraction}}},
  };
}

/// Reads a config; every field is optional and unknown fields are errors.
inline RunConfig config_from_json(const Json& j) {
  using namespace detail;
  RunConfig c;
  reject_unknown(j, "config",
                 {"config_id", "seed", "experiment", "heap", "cache", "workload", "costs",
                  "pressure", "multi_frequency"});
  read(j, "config_id", c.config_id, "config");
  read(j, "seed", c.seed, "config");
  read_enum(j, "experiment", c.experiment, kExperimentNames, "config");

  if (auto it = j.find("heap"); it != j.end()) {
    reject_unknown(*it, "heap", {"capacity_bytes", "size_classes", "large_object_threshold"});
    read(*it, "capacity_bytes", c.heap.capacity_bytes, "heap");
    if (auto sc = it->find("size_classes"); sc != it->end()) {
      if (!sc->is_array()) throw ConfigError("heap.size_classes: expected an array");
      c.heap.size_classes.clear();
      for (const auto& v : *sc) {
        if (!v.is_number_unsigned()) throw ConfigError("heap.size_classes: expected integers");
        c.heap.size_classes.push_back(v.get<Bytes>());
      }
    }
    read(*it, "large_object_threshold", c.heap.large_object_threshold, "heap");
  }

  if (auto it = j.find("cache"); it != j.end()) {
    reject_unknown(*it, "cache",
                   {"kind", "policy", "bound", "eviction", "greedy_dual_scale", "baseline_mode",
                    "baseline_capacity"});
    read_enum(*it, "kind", c.cache.kind, kCacheNames, "cache");
    read_enum(*it, "policy", c.cache.policy, kPolicyNames, "cache");
    if (auto b = it->find("bound"); b != it->end()) c.cache.bound = bound_from_json(*b, "cache.bound");
    read_enum(*it, "eviction", c.cache.eviction, kEvictionNames, "cache");
    read(*it, "greedy_dual_scale", c.cache.greedy_dual_scale, "cache");
    read_enum(*it, "baseline_mode", c.cache.baseline_mode, kBaselineNames, "cache");
    read(*it, "baseline_capacity", c.cache.baseline_capacity, "cache");
  }

  if (auto it = j.find("workload"); it != j.end()) {
    reject_unknown(*it, "workload",
                   {"trace_file", "keys", "min_bytes", "max_bytes", "size_alpha", "request_alpha",
                    "length", "node_bytes"});
    read(*it, "trace_file", c.workload.trace_file, "workload");
    read(*it, "keys", c.workload.trace.unique_keys, "workload");
    read(*it, "min_bytes", c.workload.trace.min_value, "workload");
    read(*it, "max_bytes", c.workload.trace.max_value, "workload");
    read(*it, "size_alpha", c.workload.trace.size_alpha, "workload");
    read(*it, "request_alpha", c.workload.trace.request_alpha, "workload");
    read(*it, "length", c.workload.trace.length, "workload");
    read(*it, "node_bytes", c.workload.node_bytes, "workload");
  }

  if (auto it = j.find("costs"); it != j.end()) {
    reject_unknown(*it, "costs",
                   {"bandwidth_bytes_per_sec", "hit_cost_per_node", "gc_cost_per_marked_byte",
                    "gc_fixed_cost", "gc_interval_bytes"});
    read(*it, "bandwidth_bytes_per_sec", c.costs.bandwidth_bytes_per_sec, "costs");
    read(*it, "hit_cost_per_node", c.costs.hit_cost_per_node, "costs");
    read(*it, "gc_cost_per_marked_byte", c.costs.gc_cost_per_marked_byte, "costs");
    read(*it, "gc_fixed_cost", c.costs.gc_fixed_cost, "costs");
    read(*it, "gc_interval_bytes", c.costs.gc_interval_bytes, "costs");
  }

  if (auto it = j.find("pressure"); it != j.end()) {
    reject_unknown(*it, "pressure", {"bytes_per_event", "reserve_bytes", "series_file"});
    read(*it, "bytes_per_event", c.pressure.bytes_per_event, "pressure");
    read(*it, "reserve_bytes", c.pressure.reserve_bytes, "pressure");
    read(*it, "series_file", c.pressure.series_file, "pressure");
  }

  if (auto it = j.find("multi_frequency"); it != j.end()) {
    reject_unknown(*it, "multi_frequency",
                   {"ratio", "total_requests", "mode", "softref_free_fraction"});
    read(*it, "ratio", c.multi_frequency.ratio, "multi_frequency");
    read(*it, "total_requests", c.multi_frequency.total_requests, "multi_frequency");
    read_enum(*it, "mode", c.multi_frequency.mode, kMultiModeNames, "multi_frequency");
    read(*it, "softref_free_fraction", c.multi_frequency.softref_free_fraction,
         "multi_frequency");
  }
  return c;
}

inline void validate(const RunConfig& c) {
  if (c.config_id.empty()) throw ConfigError("config_id must not be empty");
  if (c.config_id.find_first_of(",\"\n") != std::string::npos) {
    throw ConfigError("config_id must not contain commas, quotes or newlines");
  }
  if (c.heap.capacity_bytes == 0) throw ConfigError("heap.capacity_bytes must be positive");
  SizeClassTable(c.heap.size_classes, c.heap.large_object_threshold);
  if (c.workload.trace_file.empty()) validate(c.workload.trace);
  if (c.workload.node_bytes == 0) throw ConfigError("workload.node_bytes must be positive");
  if (!(c.costs.bandwidth_bytes_per_sec > 0.0)) {
    throw ConfigError("costs.bandwidth_bytes_per_sec must be positive");
  }
  for (double v : {c.costs.hit_cost_per_node, c.costs.gc_cost_per_marked_byte, c.costs.gc_fixed_cost}) {
    if (!(v >= 0.0)) throw ConfigError("cost coefficients must be non-negative");
  }
  if (c.cache.greedy_dual_scale <= 0.0) throw ConfigError("cache.greedy_dual_scale must be positive");
  if (c.multi_frequency.ratio == 0) throw ConfigError("multi_frequency.ratio must be at least 1");
  if (c.multi_frequency.softref_free_fraction < 0.0 || c.multi_frequency.softref_free_fraction > 1.0) {
    throw ConfigError("multi_frequency.softref_free_fraction must be in [0, 1]");
  }
  if (c.experiment == ExperimentKind::kMultiFrequency && c.cache.kind != CacheKind::kSache) {
    throw ConfigError("the multi_frequency experiment needs cache.kind = sache");
  }
}

inline RunConfig parse_config(std::string_view text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  RunConfig c = config_from_json(j);
  validate(c);
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_config(text);
}

// Reads PRIOHEAP_SEED if set; malformed values are config errors.
inline std::optional<std::uint64_t> seed_from_environment() {
  const char* v = std::getenv("PRIOHEAP_SEED");
  if (!v || !*v) return std::nullopt;
  std::uint64_t seed = 0;
  const std::string_view s(v);
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), seed);
  if (ec != std::errc() || end != s.data() + s.size()) {
    throw ConfigError("PRIOHEAP_SEED is not an unsigned integer: " + std::string(s));
  }
  return seed;
}

// ---------------------------------------------------------------------------
// Report CSV

inline std::string format_double(double v) {
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

inline const char* policy_label(const RunConfig& c) {
  if (c.experiment == ExperimentKind::kMultiFrequency) {
    return c.multi_frequency.mode == MultiCacheMode::kSoftRef ? "softref" : "lru";
  }
  if (c.cache.kind == CacheKind::kBaseline) return "baseline_lru";
  return detail::enum_name(detail::kPolicyNames, c.cache.policy);
}

inline std::string bound_label(const RunConfig& c) {
  if (c.experiment == ExperimentKind::kMultiFrequency &&
      c.multi_frequency.mode == MultiCacheMode::kSoftRef) {
    return "free_fraction=" + format_double(c.multi_frequency.softref_free_fraction);
  }
  if (c.cache.kind == CacheKind::kBaseline) {
    return (c.cache.baseline_mode == BaselineMode::kEntries ? "entries=" : "weight=") +
           std::to_string(c.cache.baseline_capacity);
  }
  return describe_bound(c.cache.bound);
}

inline constexpr const char* kReportHeader =
    "config_id,bound,policy,total_time,mutator_time,gc_time,hits,misses,miss_service_time,"
    "gc_count,total_allocation,crashed";

inline void write_report_header(std::ostream& os) { os << kReportHeader << '\n'; }

inline void write_report_row(std::ostream& os, const std::string& config_id, const std::string& bound,
                             const std::string& policy, const RunReport& r) {
  os << config_id << ',' << bound << ',' << policy << ',' << format_double(r.total_time) << ','
     << format_double(r.mutator_time) << ',' << format_double(r.gc_time) << ',' << r.hits << ','
     << r.misses << ',' << format_double(r.miss_service_time) << ',' << r.gc_count << ','
     << r.total_allocation << ',' << (r.crashed ? 1 : 0) << '\n';
}

struct ReportRow {
  std::string config_id;
  std::string bound;
  std::string policy;
  RunReport report;
};

/// Parses one data row written by write_report_row.
inline ReportRow parse_report_row(const std::string& line) {
  std::vector<std::string> f;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    f.push_back(line.substr(start, comma - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  if (f.size() != 12) throw ParseError(1, "expected 12 report columns, got " + std::to_string(f.size()));
  auto num = [&](const std::string& s, auto& out) {
    const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    if (ec != std::errc() || end != s.data() + s.size()) throw ParseError(1, "bad report field '" + s + "'");
  };
  ReportRow row{f[0], f[1], f[2], {}};
  num(f[3], row.report.total_time);
  num(f[4], row.report.mutator_time);
  num(f[5], row.report.gc_time);
  num(f[6], row.report.hits);
  num(f[7], row.report.misses);
  num(f[8], row.report.miss_service_time);
  num(f[9], row.report.gc_count);
  num(f[10], row.report.total_allocation);
  int crashed = 0;
  num(f[11], crashed);
  row.report.crashed = crashed != 0;
  return row;
}

// ---------------------------------------------------------------------------
// Running a config

inline Trace workload_trace(const RunConfig& c) {
  if (!c.workload.trace_file.empty()) {
    try {
      return parse_trace(c.workload.trace_file);
    } catch (const ParseError& e) {
      throw ConfigError("trace file " + c.workload.trace_file + ": " + e.what());
    } catch (const Error& e) {
      throw ConfigError(e.what());
    }
  }
  TraceSpec spec = c.workload.trace;
  spec.seed = c.seed;
  return generate_trace(spec);
}

inline RuntimeSpec runtime_spec(const RunConfig& c) {
  return RuntimeSpec{c.heap.capacity_bytes,
                     SizeClassTable(c.heap.size_classes, c.heap.large_object_threshold), c.costs};
}

inline Policy make_policy(const CacheConfig& c) {
  if (c.policy == PolicyKind::kGreedyDual) return GreedyDualPolicy{0.0, c.greedy_dual_scale};
  return LruPolicy{};
}

struct RunOutcome {
  RunReport report;
  std::vector<PressurePoint> pressure_series;  // pressure experiment only
  std::optional<MultiFrequencyResult> multi;   // multi_frequency experiment only
};

/// Calls `f(runtime, cache)` with the cache the config describes.
template <class F>
auto with_cache(Runtime& rt, const RunConfig& c, F&& f) {
  if (c.cache.kind == CacheKind::kBaseline) {
    auto cache = c.cache.baseline_mode == BaselineMode::kEntries
                     ? BaselineCache<std::string>::with_max_entries(rt.heap(), c.cache.baseline_capacity)
                     : BaselineCache<std::string>::with_max_weight(rt.heap(), c.cache.baseline_capacity);
    return f(cache);
  }
  Sache<std::string> cache(rt.heap(), rt.collector(), c.cache.bound, make_policy(c.cache),
                           c.cache.eviction);
  return f(cache);
}

inline RunOutcome run_config(const RunConfig& c, const Trace& trace) {
  const RuntimeSpec spec = runtime_spec(c);
  const DriverOptions driver{c.workload.node_bytes};
  RunOutcome out;
  if (c.experiment == ExperimentKind::kMultiFrequency) {
    MultiFrequencyOptions opt;
    opt.ratio = c.multi_frequency.ratio;
    opt.total_requests = c.multi_frequency.total_requests;
    opt.mode = c.multi_frequency.mode;
    opt.softref_free_fraction = c.multi_frequency.softref_free_fraction;
    opt.space_bound = c.cache.bound;
    opt.eviction = c.cache.eviction;
    opt.driver = driver;
    out.multi = run_multi_frequency(spec, trace, trace, opt);
    // The combined row: both caches share one runtime.
    out.report = out.multi->fast.report;
    out.report.hits += out.multi->slow.report.hits;
    out.report.misses += out.multi->slow.report.misses;
    out.report.miss_service_time += out.multi->slow.report.miss_service_time;
    return out;
  }
  Runtime rt(spec.capacity, spec.classes, spec.costs);
  with_cache(rt, c, [&](auto& cache) {
    if (c.experiment == ExperimentKind::kPressure) {
      PressureResult r = run_pressure(
          rt, cache, trace, {c.pressure.bytes_per_event, c.pressure.reserve_bytes}, driver);
      out.report = r.report;
      out.pressure_series = std::move(r.series);
    } else {
      out.report = run_trace(rt, cache, trace, driver);
    }
  });
  return out;
}

inline void write_pressure_series(std::ostream& os, const std::vector<PressurePoint>& series) {
  os << "gc_index,event_index,phase,time,gc_time,non_cache_live,free_after,cache_bytes,reserve_met\n";
  for (const PressurePoint& p : series) {
    os << p.gc_index << ',' << p.event_index << ',' << p.phase << ',' << format_double(p.time) << ','
       << format_double(p.gc_time) << ',' << p.non_cache_live << ',' << p.free_after << ','
       << p.cache_bytes << ',' << (p.reserve_met ? 1 : 0) << '\n';
  }
}

}  // namespace prioheap
