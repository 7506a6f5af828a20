#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "spcp/blocking.hpp"
#include "spcp/cp_als.hpp"
#include "spcp/ktensor.hpp"
#include "spcp/mttkrp.hpp"
#include "spcp/sptensor.hpp"
#include "spcp/thread_pool.hpp"
#include "spcp/tns_io.hpp"

namespace spcp::bench {

/// Bytes per second moved by one MTTKRP if every value is read from memory
/// once: ((d*R + 3)*s_r + d*s_o) * P / t.
inline double bandwidth_estimate(std::size_t d, std::size_t rank, std::size_t nnz, std::size_t real_bytes,
                                 std::size_t ordinal_bytes, double seconds) {
  if (!(seconds > 0)) throw Error("bandwidth_estimate: time must be positive");
  const double bytes_per_nonzero =
      static_cast<double>((d * rank + 3) * real_bytes + d * ordinal_bytes);
  return bytes_per_nonzero * static_cast<double>(nnz) / seconds;
}

/// Per-repetition bandwidths (bytes/s) of the triad a = b + s*c, counting three
/// array traversals per repetition. array_bytes is the total over all three
/// arrays.
inline std::vector<double> triad_samples(std::size_t array_bytes, std::size_t repetitions, std::size_t threads = 1) {
  const std::size_t n = array_bytes / (3 * sizeof(double));
  if (n == 0) throw Error("measure_peak_bandwidth: arrays too small");
  std::unique_ptr<double[]> a(new double[n]);
  std::unique_ptr<double[]> b(new double[n]);
  std::unique_ptr<double[]> c(new double[n]);

  ThreadPool& pool = shared_pool(threads);
  const std::size_t chunks = pool.width();
  auto chunk = [&](std::size_t t) {
    return std::pair{n * t / chunks, n * (t + 1) / chunks};
  };
  // First touch from the workers that will stream the data.
  pool.parallel_for(chunks, [&](std::size_t t, std::size_t) {
    auto [lo, hi] = chunk(t);
    for (std::size_t i = lo; i < hi; ++i) {
      a[i] = 1.0;
      b[i] = 2.0;
      c[i] = 0.5;
    }
  });

  const double scalar = 3.0;
  std::vector<double> out;
  out.reserve(repetitions);
  for (std::size_t r = 0; r < repetitions; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    pool.parallel_for(chunks, [&](std::size_t t, std::size_t) {
      auto [lo, hi] = chunk(t);
      double* __restrict pa = a.get();
      const double* __restrict pb = b.get();
      const double* __restrict pc = c.get();
      for (std::size_t i = lo; i < hi; ++i) pa[i] = pb[i] + scalar * pc[i];
    });
    const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.push_back(3.0 * sizeof(double) * static_cast<double>(n) / std::max(dt, 1e-12));
  }
  // Keep the stores observable.
  volatile double sink = a[n / 2];
  (void)sink;
  return out;
}

/// Best-of-repetitions triad bandwidth in bytes/s.
inline double measure_peak_bandwidth(std::size_t array_bytes = std::size_t{256} << 20, std::size_t repetitions = 5,
                                     std::size_t threads = 1) {
  const auto samples = triad_samples(array_bytes, repetitions, threads);
  return *std::max_element(samples.begin(), samples.end());
}

struct SyntheticSpec {
  std::vector<ordinal_t> dims;
  std::size_t nnz = 0;
  std::uint64_t seed = 1;
};

enum class ReportFormat { csv, json };

struct BenchConfig {
  std::optional<std::string> input_path;
  std::optional<SyntheticSpec> synthetic;
  std::size_t rank = 16;
  std::size_t iters = 10;
  std::vector<Variant> variants{Variant::blocked};
  std::vector<std::size_t> threads{1};
  std::size_t real_bytes = sizeof(real_t);
  std::size_t ordinal_bytes = sizeof(ordinal_t);
  bool mttkrp_only = false;
  std::optional<double> peak_gbps;   // skips the triad measurement when set
  std::uint64_t model_seed = 1;      // factor initialization
  std::size_t peak_array_bytes = std::size_t{256} << 20;
  std::size_t peak_repetitions = 5;
  std::optional<std::string> out_path;
  ReportFormat format = ReportFormat::csv;

  void validate() const {
    if (input_path.has_value() == synthetic.has_value()) {
      throw Error("bench: specify exactly one of an input file or a synthetic tensor");
    }
    if (iters < 1) throw Error("bench: iters must be at least 1");
    if (rank < 1) throw Error("bench: rank must be at least 1");
    if (variants.empty()) throw Error("bench: at least one variant is required");
    if (threads.empty()) throw Error("bench: at least one thread count is required");
    for (auto t : threads) {
      if (t < 1) throw Error("bench: thread counts must be positive");
    }
    if (real_bytes != 4 && real_bytes != 8) throw Error("bench: float bytes must be 4 or 8");
    if (ordinal_bytes != 4 && ordinal_bytes != 8) throw Error("bench: ordinal bytes must be 4 or 8");
    if (peak_gbps && !(*peak_gbps > 0)) throw Error("bench: peak bandwidth must be positive");
  }
};

/// One measurement. mode is empty for the all-modes aggregate row.
struct BenchRow {
  Variant variant = Variant::blocked;
  std::optional<std::size_t> mode;
  std::size_t threads = 1;
  std::size_t iters = 1;
  double seconds = 0;  // summed over iterations
  double gbps = 0;
  double peak_fraction = 0;
  std::optional<double> sort_seconds;
  std::optional<double> sort_ratio;
  std::uint64_t storage_base_bytes = 0;
  std::uint64_t storage_perm_bytes = 0;

  bool above_peak() const noexcept { return peak_fraction > 1.0; }

  friend bool operator==(const BenchRow&, const BenchRow&) = default;
};

struct BenchReport {
  std::vector<BenchRow> rows;
  double peak_gbps = 0;
  bool peak_measured = false;
};

inline SparseTensor load_tensor(const BenchConfig& config) {
  if (config.input_path) {
    std::ifstream in(*config.input_path);
    if (!in) throw Error("bench: cannot open '" + *config.input_path + "'");
    return read_tns(in);
  }
  const auto& s = *config.synthetic;
  return random_sparse(s.dims, s.nnz, s.seed);
}

/// Runs every (variant, thread count) pair on X and collects per-mode rows
/// plus one aggregate row per pair.
inline BenchReport run_benchmark(const SparseTensor& X, const BenchConfig& config) {
  using clock = std::chrono::steady_clock;
  auto seconds_since = [](clock::time_point t0) { return std::chrono::duration<double>(clock::now() - t0).count(); };

  config.validate();
  if (X.nnz() == 0) throw Error("bench: tensor has no nonzeros");

  BenchReport report;
  if (config.peak_gbps) {
    report.peak_gbps = *config.peak_gbps;
  } else {
    const std::size_t width = *std::max_element(config.threads.begin(), config.threads.end());
    report.peak_gbps = measure_peak_bandwidth(config.peak_array_bytes, config.peak_repetitions, width) / 1e9;
    report.peak_measured = true;
  }

  const std::size_t d = X.ndims();
  const std::size_t R = config.rank;
  const std::size_t P = X.nnz();
  const auto base_bytes = storage_bytes(X, false, config.real_bytes, config.ordinal_bytes);
  const auto perm_bytes = storage_bytes(X, true, config.real_bytes, config.ordinal_bytes);
  const BlockingPolicy policy = blocking_policy(R, Profile::cpu_like, P);

  for (Variant variant : config.variants) {
    for (std::size_t threads : config.threads) {
      PermutationSet perms;
      std::optional<double> sort_seconds;
      if (variant == Variant::permuted) {
        const auto t0 = clock::now();
        perms = build_perm(X, threads);
        sort_seconds = seconds_since(t0);
      }
      const PermutationSet* perms_ptr = variant == Variant::permuted ? &perms : nullptr;

      // Untimed warm-up, one call per mode.
      const KTensor warm = normalize_columns(random_ktensor(X.dims(), R, config.model_seed)).model;
      FactorMatrix V;
      for (std::size_t n = 0; n < d; ++n) mttkrp(X, warm, n, variant, policy, perms_ptr, threads, V);

      std::vector<double> mode_seconds(d, 0);
      double iteration_seconds = 0;
      if (config.mttkrp_only) {
        for (std::size_t it = 0; it < config.iters; ++it) {
          const auto t_iter = clock::now();
          for (std::size_t n = 0; n < d; ++n) {
            const auto t0 = clock::now();
            mttkrp(X, warm, n, variant, policy, perms_ptr, threads, V);
            mode_seconds[n] += seconds_since(t0);
          }
          iteration_seconds += seconds_since(t_iter);
        }
      } else {
        AlsOptions opts;
        opts.rank = R;
        opts.max_iters = config.iters;
        opts.fit_tolerance = 0;
        opts.variant = variant;
        opts.threads = threads;
        opts.seed = config.model_seed;
        const auto result = cp_als(X, opts, perms_ptr);
        for (const auto& per_mode : result.trace.mttkrp_seconds) {
          for (std::size_t n = 0; n < d; ++n) mode_seconds[n] += per_mode[n];
        }
        for (double t : result.trace.iteration_seconds) iteration_seconds += t;
      }
      const std::size_t iters_run = config.iters;
      const double mean_iteration = iteration_seconds / static_cast<double>(iters_run);

      auto make_row = [&](std::optional<std::size_t> mode, double seconds, std::size_t calls) {
        BenchRow row;
        row.variant = variant;
        row.mode = mode;
        row.threads = threads;
        row.iters = iters_run;
        row.seconds = seconds;
        row.gbps = bandwidth_estimate(d, R, P, config.real_bytes, config.ordinal_bytes,
                                      seconds / static_cast<double>(calls)) /
                   1e9;
        row.peak_fraction = row.gbps / report.peak_gbps;
        if (sort_seconds) {
          row.sort_seconds = *sort_seconds;
          row.sort_ratio = *sort_seconds / mean_iteration;
        }
        row.storage_base_bytes = base_bytes;
        row.storage_perm_bytes = perm_bytes;
        return row;
      };

      double total = 0;
      for (std::size_t n = 0; n < d; ++n) {
        report.rows.push_back(make_row(n, mode_seconds[n], iters_run));
        total += mode_seconds[n];
      }
      report.rows.push_back(make_row(std::nullopt, total, iters_run * d));
    }
  }
  return report;
}

inline BenchReport run_benchmark(const BenchConfig& config) {
  config.validate();
  return run_benchmark(load_tensor(config), config);
}

inline constexpr std::array<std::string_view, 11> csv_columns{
    "variant", "mode", "threads", "iters", "seconds", "gbps", "peak_fraction",
    "sort_seconds", "sort_ratio", "storage_base_bytes", "storage_perm_bytes"};

namespace detail {

inline std::string format_double(double v) {
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

inline std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(',', start);
    out.push_back(line.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

template <typename T>
T parse_field(std::string_view s, std::string_view column) {
  T v{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ParseError("report: bad value '" + std::string(s) + "' in column " + std::string(column));
  }
  return v;
}

}  // namespace detail

inline void write_csv(const BenchReport& report, std::ostream& out) {
  for (std::size_t c = 0; c < csv_columns.size(); ++c) out << (c ? "," : "") << csv_columns[c];
  out << '\n';
  using detail::format_double;
  for (const auto& r : report.rows) {
    out << to_string(r.variant) << ',' << (r.mode ? std::to_string(*r.mode) : "all") << ',' << r.threads << ','
        << r.iters << ',' << format_double(r.seconds) << ',' << format_double(r.gbps) << ','
        << format_double(r.peak_fraction) << ',' << (r.sort_seconds ? format_double(*r.sort_seconds) : "") << ','
        << (r.sort_ratio ? format_double(*r.sort_ratio) : "") << ',' << r.storage_base_bytes << ','
        << r.storage_perm_bytes << '\n';
  }
  if (!out) throw Error("report: write failure");
}

inline std::vector<BenchRow> read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("report: missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = detail::split_commas(line);
  if (!std::equal(header.begin(), header.end(), csv_columns.begin(), csv_columns.end())) {
    throw ParseError("report: unexpected header '" + line + "'");
  }
  std::vector<BenchRow> rows;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = detail::split_commas(line);
    if (f.size() != csv_columns.size()) throw ParseError("report: wrong field count in '" + line + "'");
    using detail::parse_field;
    BenchRow r;
    r.variant = parse_variant(f[0]);
    if (f[1] != "all") r.mode = parse_field<std::size_t>(f[1], "mode");
    r.threads = parse_field<std::size_t>(f[2], "threads");
    r.iters = parse_field<std::size_t>(f[3], "iters");
    r.seconds = parse_field<double>(f[4], "seconds");
    r.gbps = parse_field<double>(f[5], "gbps");
    r.peak_fraction = parse_field<double>(f[6], "peak_fraction");
    if (!f[7].empty()) r.sort_seconds = parse_field<double>(f[7], "sort_seconds");
    if (!f[8].empty()) r.sort_ratio = parse_field<double>(f[8], "sort_ratio");
    r.storage_base_bytes = parse_field<std::uint64_t>(f[9], "storage_base_bytes");
    r.storage_perm_bytes = parse_field<std::uint64_t>(f[10], "storage_perm_bytes");
    rows.push_back(r);
  }
  return rows;
}

inline nlohmann::json to_json(const BenchReport& report) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : report.rows) {
    nlohmann::json j;
    j["variant"] = std::string(to_string(r.variant));
    j["mode"] = r.mode ? nlohmann::json(*r.mode) : nlohmann::json("all");
    j["threads"] = r.threads;
    j["iters"] = r.iters;
    j["seconds"] = r.seconds;
    j["gbps"] = r.gbps;
    j["peak_fraction"] = r.peak_fraction;
    j["sort_seconds"] = r.sort_seconds ? nlohmann::json(*r.sort_seconds) : nlohmann::json(nullptr);
    j["sort_ratio"] = r.sort_ratio ? nlohmann::json(*r.sort_ratio) : nlohmann::json(nullptr);
    j["storage_base_bytes"] = r.storage_base_bytes;
    j["storage_perm_bytes"] = r.storage_perm_bytes;
    rows.push_back(std::move(j));
  }
  return {{"peak_gbps", report.peak_gbps}, {"peak_measured", report.peak_measured}, {"rows", std::move(rows)}};
}

inline void emit_report(const BenchReport& report, ReportFormat format, std::ostream& out) {
  if (format == ReportFormat::csv) {
    write_csv(report, out);
  } else {
    out << to_json(report).dump(2) << '\n';
    if (!out) throw Error("report: write failure");
  }
}

inline void emit_report(const BenchReport& report, ReportFormat format, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("report: cannot open '" + path + "' for writing");
  emit_report(report, format, out);
}

}  // namespace spcp::bench
