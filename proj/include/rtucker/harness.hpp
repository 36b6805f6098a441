#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "rtucker/cp.hpp"
#include "rtucker/io.hpp"
#include "rtucker/synth.hpp"
#include "rtucker/tucker.hpp"

namespace rtucker {

enum class Algorithm {
  hooi,
  sketched_tucker_ts,
  sketched_tucker_lev,
  sketched_tucker_lev_det,
  ref_ts,
  cp_als,
  sketched_cp,
  tucker_cp,
  sketched_tucker_cp,
};

inline const std::vector<std::pair<Algorithm, const char*>>& algorithm_names() {
  static const std::vector<std::pair<Algorithm, const char*>> names = {
      {Algorithm::hooi, "hooi"},
      {Algorithm::sketched_tucker_ts, "sketched-tucker-ts"},
      {Algorithm::sketched_tucker_lev, "sketched-tucker-lev"},
      {Algorithm::sketched_tucker_lev_det, "sketched-tucker-lev-det"},
      {Algorithm::ref_ts, "ref-ts"},
      {Algorithm::cp_als, "cp-als"},
      {Algorithm::sketched_cp, "sketched-cp"},
      {Algorithm::tucker_cp, "tucker+cp"},
      {Algorithm::sketched_tucker_cp, "sketched-tucker+cp"},
  };
  return names;
}

inline const char* to_string(Algorithm a) {
  for (const auto& [alg, name] : algorithm_names()) {
    if (alg == a) return name;
  }
  return "?";
}

inline Algorithm parse_algorithm(const std::string& name) {
  for (const auto& [alg, n] : algorithm_names()) {
    if (name == n) return alg;
  }
  throw std::invalid_argument("unknown algorithm '" + name + "'");
}

inline SketchKind parse_sketch(const std::string& name) {
  for (SketchKind k : {SketchKind::none, SketchKind::tensorsketch, SketchKind::leverage_random, SketchKind::leverage_deterministic}) {
    if (name == to_string(k)) return k;
  }
  throw std::invalid_argument("unknown sketch '" + name + "'");
}

inline InitKind parse_init(const std::string& name) {
  for (InitKind k : {InitKind::random, InitKind::hosvd, InitKind::rrf}) {
    if (name == to_string(k)) return k;
  }
  throw std::invalid_argument("unknown init '" + name + "'");
}

inline bool is_cp(Algorithm a) {
  return a == Algorithm::cp_als || a == Algorithm::sketched_cp || a == Algorithm::tucker_cp || a == Algorithm::sketched_tucker_cp;
}

struct ExperimentSpec {
  SynthSpec synth;
  Algorithm algorithm = Algorithm::hooi;
  std::size_t rank = 5;
  double K = 16.0;
  std::optional<SketchKind> sketch;  // overrides the algorithm's default sketch
  std::optional<InitKind> init;      // overrides the algorithm's default init
  std::optional<std::size_t> sweeps;
  std::size_t repetitions = 10;
  std::uint64_t base_seed = 0;
  unsigned threads = 1;

  SketchKind resolved_sketch() const {
    if (sketch) return *sketch;
    switch (algorithm) {
      case Algorithm::sketched_tucker_ts:
      case Algorithm::ref_ts: return SketchKind::tensorsketch;
      case Algorithm::sketched_tucker_lev:
      case Algorithm::sketched_cp:
      case Algorithm::sketched_tucker_cp: return SketchKind::leverage_random;
      case Algorithm::sketched_tucker_lev_det: return SketchKind::leverage_deterministic;
      default: return SketchKind::none;
    }
  }

  InitKind resolved_init() const {
    if (init) return *init;
    return algorithm == Algorithm::hooi ? InitKind::hosvd : InitKind::rrf;
  }

  void validate() const {
    synth.validate();
    if (repetitions < 1) throw std::invalid_argument("experiment: repetitions must be >= 1");
    if (rank < 1) throw std::invalid_argument("experiment: rank must be >= 1");
    const SketchKind sk = resolved_sketch();
    const bool sketched_alg = algorithm != Algorithm::hooi && algorithm != Algorithm::cp_als && algorithm != Algorithm::tucker_cp;
    if (sketched_alg == (sk == SketchKind::none)) {
      throw std::invalid_argument(std::string("experiment: sketch '") + to_string(sk) + "' incompatible with " + to_string(algorithm));
    }
    if (algorithm == Algorithm::ref_ts && sk != SketchKind::tensorsketch) {
      throw std::invalid_argument("experiment: ref-ts requires tensorsketch");
    }
    if (is_cp(algorithm) && sk == SketchKind::tensorsketch) throw std::invalid_argument("experiment: CP algorithms use leverage sampling");
  }

  TuckerConfig tucker_config(std::uint64_t seed) const {
    TuckerConfig c;
    c.ranks.assign(synth.order, rank);
    c.sketch = resolved_sketch();
    c.K = K;
    c.init = resolved_init();
    c.seed = seed;
    if (sweeps) c.max_sweeps = *sweeps;
    return c;
  }

  CPConfig cp_config(std::uint64_t seed) const {
    CPConfig c;
    c.rank = rank;
    c.sketch = resolved_sketch();
    c.K = K;
    c.init = resolved_init();
    c.seed = seed;
    if (algorithm == Algorithm::tucker_cp || algorithm == Algorithm::sketched_tucker_cp) {
      if (sweeps) c.core_sweeps = *sweeps;
    } else if (sweeps) {
      c.max_sweeps = *sweeps;
    }
    return c;
  }

  // Canonical one-line description; hashed into RunRecord::spec_hash.
  std::string describe() const {
    std::ostringstream os;
    os << "family=" << to_string(synth.family) << ";s=" << synth.s << ";order=" << synth.order << ";rtrue=" << synth.rtrue
       << ";p=" << format_double(synth.p) << ";n_sig=" << synth.n_sig << ";c_sig=" << format_double(synth.c_sig)
       << ";eta=" << format_double(synth.eta) << ";n_coh=" << synth.n_coh << ";sparse_base=" << synth.sparse_base
       << ";alg=" << to_string(algorithm) << ";rank=" << rank << ";K=" << format_double(K)
       << ";sketch=" << to_string(resolved_sketch()) << ";init=" << to_string(resolved_init())
       << ";sweeps=" << (sweeps ? std::to_string(*sweeps) : "default") << ";reps=" << repetitions << ";seed=" << base_seed;
    return os.str();
  }

  std::string hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : describe()) {
      h ^= static_cast<unsigned char>(c);
      h *= 0x100000001b3ULL;
    }
    std::ostringstream os;
    os << std::hex << h;
    return os.str();
  }
};

struct RunRecord {
  std::string spec_hash;
  std::uint64_t seed = 0;
  std::vector<double> fitness;  // per sweep
  double final_fitness = std::numeric_limits<double>::quiet_NaN();
  double wall_ms = 0.0;
  std::vector<double> sweep_ms;
  std::size_t sketch_size = 0;
  std::string error;  // empty on success

  bool ok() const { return error.empty(); }
};

// Seed of repetition i.
inline std::uint64_t run_seed(std::uint64_t base, std::size_t i) { return base + i; }

namespace detail {

inline SweepTrace run_algorithm(const ExperimentSpec& spec, const AnyTensor& tensor, std::uint64_t seed) {
  return std::visit(
      [&](const auto& t) -> SweepTrace {
        switch (spec.algorithm) {
          case Algorithm::hooi: return hooi(t, spec.tucker_config(seed)).second;
          case Algorithm::sketched_tucker_ts:
          case Algorithm::sketched_tucker_lev:
          case Algorithm::sketched_tucker_lev_det: return sketched_tucker_als(t, spec.tucker_config(seed)).second;
          case Algorithm::ref_ts: return ref_tucker_ts(t, spec.tucker_config(seed)).second;
          case Algorithm::cp_als: return cp_als(t, spec.cp_config(seed)).second;
          case Algorithm::sketched_cp: return sketched_cp_als(t, spec.cp_config(seed)).second;
          case Algorithm::tucker_cp:
          case Algorithm::sketched_tucker_cp: return cp_via_sketched_tucker(t, spec.cp_config(seed)).trace;
        }
        throw std::invalid_argument("run_algorithm: unknown algorithm");
      },
      tensor);
}

}  // namespace detail

inline RunRecord run_once(const ExperimentSpec& spec, std::size_t index) {
  RunRecord rec;
  rec.spec_hash = spec.hash();
  rec.seed = run_seed(spec.base_seed, index);
  const auto start = detail::Clock::now();
  try {
    SynthSpec synth = spec.synth;
    synth.seed = rec.seed;
    const AnyTensor tensor = generate(synth);
    const SweepTrace trace = detail::run_algorithm(spec, tensor, CounterRng(rec.seed).split("algorithm").key());
    rec.fitness = trace.fitness;
    rec.sweep_ms = trace.wall_ms;
    rec.sketch_size = trace.sketch_size;
    rec.final_fitness = trace.fitness.empty() ? std::numeric_limits<double>::quiet_NaN() : trace.fitness.back();
  } catch (const std::exception& e) {
    rec.error = e.what();
    rec.fitness.clear();
    rec.final_fitness = std::numeric_limits<double>::quiet_NaN();
  }
  rec.wall_ms = detail::elapsed_ms(start);
  return rec;
}

// One record per repetition, in index order regardless of thread count.
// Failures are captured in the record instead of aborting the batch.
inline std::vector<RunRecord> run_experiment(const ExperimentSpec& spec) {
  spec.validate();
  std::vector<RunRecord> records(spec.repetitions);
  const unsigned threads = std::max(1u, std::min<unsigned>(spec.threads, static_cast<unsigned>(spec.repetitions)));
  if (threads == 1) {
    for (std::size_t i = 0; i < spec.repetitions; ++i) records[i] = run_once(spec, i);
    return records;
  }
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < spec.repetitions; i += threads) records[i] = run_once(spec, i);
    });
  }
  for (auto& th : pool) th.join();
  return records;
}

// Trace CSV: one row per sweep; a failed run is a single NaN row at sweep 0.
// wall_ms stays empty unless timing is requested, so untimed output is a
// pure function of the spec.
inline void write_trace_csv(std::ostream& os, const std::vector<RunRecord>& records, bool timing = false) {
  os << "seed,sweep,fitness,wall_ms\n";
  for (const auto& r : records) {
    if (!r.ok() || r.fitness.empty()) {
      os << r.seed << ",0,nan," << (timing ? format_double(r.wall_ms) : "") << '\n';
      continue;
    }
    for (std::size_t k = 0; k < r.fitness.size(); ++k) {
      os << r.seed << ',' << k + 1 << ',' << format_double(r.fitness[k]) << ',';
      if (timing && k < r.sweep_ms.size()) os << format_double(r.sweep_ms[k]);
      os << '\n';
    }
  }
}

struct Summary {
  std::size_t count = 0;     // successful runs
  std::size_t failures = 0;  // NaN runs
  double mean = 0.0;
  double q25 = 0.0;
  double median = 0.0;
  double q75 = 0.0;
  double min = 0.0;
  double max = 0.0;
  std::vector<double> outliers;  // beyond quartile -/+ 1.5 IQR
};

// Percentile by linear interpolation between order statistics.
inline double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("percentile: empty input");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

inline Summary summarize_values(const std::vector<double>& raw) {
  if (raw.empty()) throw std::invalid_argument("summarize: no records");
  Summary s;
  std::vector<double> v;
  for (double x : raw) {
    if (std::isnan(x)) {
      ++s.failures;
    } else {
      v.push_back(x);
    }
  }
  s.count = v.size();
  if (v.empty()) {
    s.mean = s.q25 = s.median = s.q75 = s.min = s.max = std::numeric_limits<double>::quiet_NaN();
    return s;
  }
  std::sort(v.begin(), v.end());
  double acc = 0.0;
  for (double x : v) acc += x;
  s.mean = acc / static_cast<double>(v.size());
  s.q25 = percentile(v, 0.25);
  s.median = percentile(v, 0.5);
  s.q75 = percentile(v, 0.75);
  s.min = v.front();
  s.max = v.back();
  const double iqr = s.q75 - s.q25;
  for (double x : v) {
    if (x < s.q25 - 1.5 * iqr || x > s.q75 + 1.5 * iqr) s.outliers.push_back(x);
  }
  return s;
}

inline Summary summarize(const std::vector<RunRecord>& records) {
  std::vector<double> finals;
  for (const auto& r : records) finals.push_back(r.final_fitness);
  return summarize_values(finals);
}

inline void write_summary_header(std::ostream& os) { os << "label,count,failures,mean,q25,median,q75,min,max,outliers\n"; }

inline void write_summary_row(std::ostream& os, const std::string& label, const Summary& s) {
  os << label << ',' << s.count << ',' << s.failures << ',' << format_double(s.mean) << ',' << format_double(s.q25) << ','
     << format_double(s.median) << ',' << format_double(s.q75) << ',' << format_double(s.min) << ','
     << format_double(s.max) << ',';
  for (std::size_t i = 0; i < s.outliers.size(); ++i) os << (i ? ";" : "") << format_double(s.outliers[i]);
  os << '\n';
}

// Reads a trace CSV back into records (final fitness = last sweep per seed).
inline std::vector<RunRecord> read_trace_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line.rfind("seed,sweep,fitness", 0) != 0) throw format_error("trace csv: missing header");
  std::vector<RunRecord> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string seed, sweep, fit;
    if (!std::getline(ss, seed, ',') || !std::getline(ss, sweep, ',') || !std::getline(ss, fit, ',')) {
      throw format_error("trace csv: malformed row '" + line + "'");
    }
    const auto sd = std::stoull(seed);
    if (out.empty() || out.back().seed != sd) {
      out.emplace_back();
      out.back().seed = sd;
    }
    const double f = fit == "nan" ? std::numeric_limits<double>::quiet_NaN() : std::stod(fit);
    if (std::isnan(f)) {
      out.back().error = "failed";
    } else {
      out.back().fitness.push_back(f);
    }
    out.back().final_fitness = f;
  }
  return out;
}

}  // namespace rtucker
