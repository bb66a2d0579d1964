#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "prioheap/errors.hpp"
#include "prioheap/heap.hpp"

namespace prioheap {

struct TraceSpec {
  std::size_t unique_keys = 2000;
  Bytes min_value = 50'000;
  Bytes max_value = 100'000;
  double size_alpha = 1.0;     // Pareto shape of the value sizes
  double request_alpha = 0.1;  // Pareto shape of the key ranks
  std::size_t length = 10'000;
  std::uint64_t seed = 1;
};

inline void validate(const TraceSpec& spec) {
  if (spec.unique_keys == 0) throw ConfigError("trace needs at least one key");
  if (spec.min_value == 0) throw ConfigError("minimum value size must be positive");
  if (spec.min_value >= spec.max_value) {
    throw ConfigError("minimum value size must be below the maximum");
  }
  if (!(spec.size_alpha > 0.0) || !(spec.request_alpha > 0.0)) {
    throw ConfigError("Pareto alphas must be positive");
  }
  if (spec.length == 0) throw ConfigError("trace length must be positive");
}

struct TraceEvent {
  std::string key;
  Bytes bytes = 0;

  friend bool operator==(const TraceEvent&, const TraceEvent&) = default;
};

using Trace = std::vector<TraceEvent>;

// Uniform on (0, 1], built from the top 53 bits so results do not depend on
// the standard library's distribution implementations.
inline double unit_open_closed(std::mt19937_64& rng) {
  return (static_cast<double>(rng() >> 11) + 1.0) * 0x1.0p-53;
}

// Pareto(scale, alpha) by inversion.
inline double pareto_sample(std::mt19937_64& rng, double scale, double alpha) {
  return scale * std::pow(unit_open_closed(rng), -1.0 / alpha);
}

inline std::string key_name(std::size_t rank) { return "key_" + std::to_string(rank); }

/// Value size for every key rank, Pareto distributed and clipped to range.
inline std::vector<Bytes> value_size_table(const TraceSpec& spec, std::mt19937_64& rng) {
  std::vector<Bytes> sizes(spec.unique_keys);
  const auto lo = static_cast<double>(spec.min_value);
  const auto hi = static_cast<double>(spec.max_value);
  for (Bytes& s : sizes) {
    const double x = std::min(pareto_sample(rng, lo, spec.size_alpha), hi);
    s = std::clamp(static_cast<Bytes>(std::llround(x)), spec.min_value, spec.max_value);
  }
  return sizes;
}

/// Key rank for one request: a Pareto(1, alpha) sample floored to a rank,
/// resampling when it falls past the last key.
inline std::size_t sample_key_rank(std::mt19937_64& rng, const TraceSpec& spec) {
  for (;;) {
    const double x = pareto_sample(rng, 1.0, spec.request_alpha);
    const double rank = std::floor(x) - 1.0;
    if (rank < static_cast<double>(spec.unique_keys)) return static_cast<std::size_t>(rank);
  }
}

inline Trace generate_trace(const TraceSpec& spec) {
  validate(spec);
  std::mt19937_64 rng(spec.seed);
  const std::vector<Bytes> sizes = value_size_table(spec, rng);
  Trace trace;
  trace.reserve(spec.length);
  for (std::size_t i = 0; i < spec.length; ++i) {
    const std::size_t rank = sample_key_rank(rng, spec);
    trace.push_back(TraceEvent{key_name(rank), sizes[rank]});
  }
  return trace;
}

inline void write_trace(std::ostream& os, const Trace& trace) {
  for (const TraceEvent& e : trace) os << e.key << ' ' << e.bytes << '\n';
}

inline void write_trace(const std::string& path, const Trace& trace) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open trace file for writing: " + path);
  write_trace(out, trace);
  if (!out) throw Error("failed writing trace file: " + path);
}

/// One event per line: a key token, whitespace, a decimal byte count.
/// Blank lines are skipped.
inline Trace parse_trace(std::istream& is) {
  Trace trace;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    std::istringstream fields(line);
    std::string key, count, extra;
    if (!(fields >> key)) continue;
    if (!(fields >> count)) throw ParseError(line_no, "missing byte count");
    if (fields >> extra) throw ParseError(line_no, "unexpected token '" + extra + "'");
    Bytes bytes = 0;
    const auto [end, ec] = std::from_chars(count.data(), count.data() + count.size(), bytes);
    if (ec != std::errc() || end != count.data() + count.size()) {
      throw ParseError(line_no, "invalid byte count '" + count + "'");
    }
    trace.push_back(TraceEvent{std::move(key), bytes});
  }
  return trace;
}

inline Trace parse_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open trace file: " + path);
  return parse_trace(in);
}

}  // namespace prioheap
