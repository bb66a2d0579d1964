#include <CLI11.hpp>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "prioheap/config.hpp"

namespace {

using namespace prioheap;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitCrash = 3;

// Appends rows to a file, writing the header first if the file is new or
// empty; without a path, writes header and rows to stdout.
class ReportSink {
 public:
  explicit ReportSink(const std::string& path) : path_(path) {
    if (path_.empty()) {
      write_report_header(std::cout);
      return;
    }
    std::error_code ec;
    const bool fresh = !std::filesystem::exists(path_, ec) || std::filesystem::file_size(path_, ec) == 0;
    file_.open(path_, std::ios::app);
    if (!file_) throw ConfigError("cannot open report file for writing: " + path_);
    if (fresh) write_report_header(file_);
  }

  std::ostream& stream() { return path_.empty() ? std::cout : file_; }

 private:
  std::string path_;
  std::ofstream file_;
};

std::string series_path(const RunConfig& c, const std::string& out) {
  if (!c.pressure.series_file.empty()) return c.pressure.series_file;
  if (out.empty()) return c.config_id + ".series.csv";
  return out + ".series.csv";
}

RunConfig load_with_seed(const std::string& path) {
  RunConfig c = load_config(path);
  if (auto seed = seed_from_environment()) c.seed = *seed;
  return c;
}

bool run_one(const RunConfig& c, const Trace& trace, ReportSink& sink, const std::string& out) {
  const RunOutcome r = run_config(c, trace);
  write_report_row(sink.stream(), c.config_id, bound_label(c), policy_label(c), r.report);
  if (c.experiment == ExperimentKind::kPressure) {
    const std::string path = series_path(c, out);
    std::ofstream series(path);
    if (!series) throw ConfigError("cannot open series file for writing: " + path);
    write_pressure_series(series, r.pressure_series);
  }
  if (r.multi) {
    std::cerr << "fast: hit_rate=" << format_double(r.multi->fast.report.hit_rate())
              << " normalized=" << format_double(r.multi->fast.normalized_hit_rate)
              << "  slow: hit_rate=" << format_double(r.multi->slow.report.hit_rate())
              << " normalized=" << format_double(r.multi->slow.normalized_hit_rate) << '\n';
  }
  return r.report.crashed;
}

std::vector<std::string> split_values(const std::string& list) {
  std::vector<std::string> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (item.empty()) throw ConfigError("empty value in --values");
    if (std::find(out.begin(), out.end(), item) == out.end()) out.push_back(item);
  }
  if (out.empty()) throw ConfigError("--values needs at least one value");
  return out;
}

template <class T>
T parse_number(const std::string& s) {
  T v{};
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size()) {
    throw ConfigError("invalid sweep value '" + s + "'");
  }
  return v;
}

// Applies one sweep value. Bound sweeps are heap fractions for a Sache and
// capacities for the baseline cache.
void apply_sweep_value(RunConfig& c, const std::string& param, const std::string& value) {
  if (param == "bound") {
    if (c.cache.kind == CacheKind::kBaseline) {
      c.cache.baseline_capacity = parse_number<std::uint64_t>(value);
    } else {
      const double f = parse_number<double>(value);
      if (!(f >= 0.0 && f <= 1.0)) throw ConfigError("heap fraction out of [0, 1]: " + value);
      c.cache.bound = HeapFraction{f};
    }
  } else if (param == "ratio") {
    c.multi_frequency.ratio = parse_number<std::size_t>(value);
  } else {
    throw ConfigError("unknown sweep parameter '" + param + "' (expected bound or ratio)");
  }
  validate(c);
}

int cmd_gen_trace(const TraceSpec& spec, const std::string& out) {
  validate(spec);
  const Trace trace = generate_trace(spec);
  if (out.empty()) {
    write_trace(std::cout, trace);
  } else {
    write_trace(out, trace);
  }
  Bytes lo = trace.front().bytes, hi = lo;
  for (const TraceEvent& e : trace) {
    lo = std::min(lo, e.bytes);
    hi = std::max(hi, e.bytes);
  }
  (out.empty() ? std::cerr : std::cout)
      << "keys=" << spec.unique_keys << " length=" << trace.size() << " bytes=[" << lo << ','
      << hi << "]\n";
  return kExitOk;
}

int cmd_run(const std::string& config_path, const std::string& out) {
  const RunConfig c = load_with_seed(config_path);
  const Trace trace = workload_trace(c);
  ReportSink sink(out);
  return run_one(c, trace, sink, out) ? kExitCrash : kExitOk;
}

int cmd_sweep(const std::string& config_path, const std::string& param, const std::string& values,
              const std::string& out) {
  const RunConfig base = load_with_seed(config_path);
  std::vector<RunConfig> runs;
  for (const std::string& v : split_values(values)) {
    RunConfig c = base;
    apply_sweep_value(c, param, v);
    runs.push_back(std::move(c));
  }
  const Trace trace = workload_trace(base);
  ReportSink sink(out);
  bool crashed = false;
  for (const RunConfig& c : runs) crashed = run_one(c, trace, sink, out) || crashed;
  return crashed ? kExitCrash : kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Prioritized garbage collection simulator"};
  app.require_subcommand(1);

  TraceSpec spec;
  std::string out;
  auto* gen = app.add_subcommand("gen-trace", "Write a synthetic request trace");
  gen->add_option("--keys", spec.unique_keys, "Number of unique keys")->capture_default_str();
  gen->add_option("--min", spec.min_value, "Smallest value size in bytes")->capture_default_str();
  gen->add_option("--max", spec.max_value, "Largest value size in bytes")->capture_default_str();
  gen->add_option("--alpha-size", spec.size_alpha, "Pareto shape of value sizes")->capture_default_str();
  gen->add_option("--alpha-req", spec.request_alpha, "Pareto shape of key popularity")
      ->capture_default_str();
  gen->add_option("--length", spec.length, "Number of requests")->capture_default_str();
  gen->add_option("--seed", spec.seed, "Random seed")->capture_default_str();
  gen->add_option("--out", out, "Output file (default: stdout)");

  std::string config_path;
  auto* run = app.add_subcommand("run", "Run one experiment from a config file");
  run->add_option("--config", config_path, "Config file")->required();
  run->add_option("--out", out, "Report CSV to append to (default: stdout)");

  std::string param = "bound", values;
  auto* sweep = app.add_subcommand("sweep", "Run a config once per parameter value");
  sweep->add_option("--config", config_path, "Config file")->required();
  sweep->add_option("--param", param, "Parameter to vary: bound or ratio")->capture_default_str();
  sweep->add_option("--values", values, "Comma-separated values")->required();
  sweep->add_option("--out", out, "Report CSV to append to (default: stdout)");

  app.add_subcommand("print-defaults", "Print the default config");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*gen) return cmd_gen_trace(spec, out);
    if (*run) return cmd_run(config_path, out);
    if (*sweep) return cmd_sweep(config_path, param, values, out);
    std::cout << to_json(RunConfig{}).dump(2) << '\n';
    return kExitOk;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  }
}
