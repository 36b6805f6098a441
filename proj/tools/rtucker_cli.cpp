// rtucker: generate synthetic tensors, run decompositions, batch benchmarks.
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "rtucker/rtucker.hpp"

namespace {

using namespace rtucker;

struct Options {
  // tensor
  std::string family = "tucker-dense";
  std::size_t s = 50;
  std::size_t order = 3;
  std::size_t rtrue = 5;
  double p = 1.0;
  std::size_t n_sig = 5;
  double c_sig = 3.0;
  double eta = 0.5;
  std::size_t n_coh = 10;
  bool sparse_base = false;
  std::string input;
  // algorithm
  std::string alg = "hooi";
  std::size_t rank = 5;
  std::string sketch;
  double K = 16.0;
  std::string init;
  std::size_t sweeps = 0;
  // batch
  std::size_t reps = 10;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  bool timing = false;
  std::string out;
  std::string summary;
  std::vector<std::string> traces;
};

void add_tensor_flags(CLI::App* app, Options& o) {
  const std::string g = "Tensor";
  app->add_option("--family", o.family, "tucker-dense | tucker-lowrank-signal | tucker-sparse | coherent | cp-sparse")
      ->capture_default_str()
      ->group(g);
  app->add_option("--s", o.s, "extent of every mode")->capture_default_str()->group(g);
  app->add_option("--n", o.order, "tensor order")->capture_default_str()->group(g);
  app->add_option("--rtrue", o.rtrue, "true rank of the generator")->capture_default_str()->group(g);
  app->add_option("--p", o.p, "density of generator factors and core")->capture_default_str()->group(g);
  app->add_option("--nsig", o.n_sig, "signal terms (tucker-lowrank-signal)")->capture_default_str()->group(g);
  app->add_option("--csig", o.c_sig, "signal scale c (tucker-lowrank-signal)")->capture_default_str()->group(g);
  app->add_option("--eta", o.eta, "signal decay eta (tucker-lowrank-signal)")->capture_default_str()->group(g);
  app->add_option("--ncoh", o.n_coh, "number of spikes (coherent)")->capture_default_str()->group(g);
  app->add_flag("--sparse-base", o.sparse_base, "coherent: sparse base tensor")->group(g);
}

void add_algorithm_flags(CLI::App* app, Options& o) {
  const std::string g = "Algorithm";
  app->add_option("--alg", o.alg,
                  "hooi | sketched-tucker-ts | sketched-tucker-lev | sketched-tucker-lev-det | ref-ts | cp-als | "
                  "sketched-cp | tucker+cp | sketched-tucker+cp")
      ->capture_default_str()
      ->group(g);
  app->add_option("--rank", o.rank, "target rank R")->capture_default_str()->group(g);
  app->add_option("--sketch", o.sketch, "override sketch: none | tensorsketch | leverage-random | leverage-deterministic")->group(g);
  app->add_option("--K", o.K, "sketch size factor, m = K R^2")->capture_default_str()->group(g);
  app->add_option("--init", o.init, "override init: random | hosvd | rrf")->group(g);
  app->add_option("--sweeps", o.sweeps, "ALS sweeps (0 keeps the algorithm default)")->group(g);
}

SynthSpec synth_spec(const Options& o, std::uint64_t seed) {
  SynthSpec s;
  s.family = parse_family(o.family);
  s.s = o.s;
  s.order = o.order;
  s.rtrue = o.rtrue;
  s.p = o.p;
  s.n_sig = o.n_sig;
  s.c_sig = o.c_sig;
  s.eta = o.eta;
  s.n_coh = o.n_coh;
  s.sparse_base = o.sparse_base;
  s.seed = seed;
  s.validate();
  return s;
}

ExperimentSpec experiment_spec(const Options& o) {
  ExperimentSpec e;
  e.synth = synth_spec(o, o.seed);
  e.algorithm = parse_algorithm(o.alg);
  e.rank = o.rank;
  e.K = o.K;
  if (!o.sketch.empty()) e.sketch = parse_sketch(o.sketch);
  if (!o.init.empty()) e.init = parse_init(o.init);
  if (o.sweeps > 0) e.sweeps = o.sweeps;
  e.repetitions = o.reps;
  e.base_seed = o.seed;
  e.threads = o.threads;
  e.validate();
  return e;
}

// Writes to the named file, or stdout when the name is empty.
template <class F>
void emit(const std::string& path, F&& body) {
  if (path.empty()) {
    body(std::cout);
    return;
  }
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  body(os);
}

int run_gen(const Options& o) {
  const AnyTensor t = generate(synth_spec(o, o.seed));
  emit(o.out, [&](std::ostream& os) { write_tensor(os, t); });
  return 0;
}

int run_decompose(const Options& o) {
  ExperimentSpec e = experiment_spec(o);
  const AnyTensor t = o.input.empty() ? generate(e.synth) : load_tensor(o.input);
  const std::uint64_t alg_seed = CounterRng(o.seed).split("algorithm").key();
  nlohmann::json manifest = {{"algorithm", to_string(e.algorithm)}, {"seed", o.seed}, {"spec", e.describe()}};

  SweepTrace trace;
  std::visit(
      [&](const auto& x) {
        if (is_cp(e.algorithm)) {
          const CPConfig cfg = e.cp_config(alg_seed);
          CPModel model;
          if (e.algorithm == Algorithm::cp_als) {
            std::tie(model, trace) = cp_als(x, cfg);
          } else if (e.algorithm == Algorithm::sketched_cp) {
            std::tie(model, trace) = sketched_cp_als(x, cfg);
          } else {
            auto res = cp_via_sketched_tucker(x, cfg);
            model = std::move(res.model);
            trace = std::move(res.trace);
          }
          if (!o.out.empty()) save_cp_model(o.out, model, manifest);
        } else {
          const TuckerConfig cfg = e.tucker_config(alg_seed);
          TuckerModel model;
          if (e.algorithm == Algorithm::ref_ts) {
            std::tie(model, trace) = ref_tucker_ts(x, cfg);
          } else {
            std::tie(model, trace) = tucker_als(x, cfg);
          }
          if (!o.out.empty()) save_tucker_model(o.out, model, manifest);
        }
      },
      t);

  std::cout << "sweep,fitness" << (o.timing ? ",wall_ms" : "") << '\n';
  for (std::size_t k = 0; k < trace.fitness.size(); ++k) {
    std::cout << k + 1 << ',' << format_double(trace.fitness[k]);
    if (o.timing) std::cout << ',' << format_double(trace.wall_ms[k]);
    std::cout << '\n';
  }
  return 0;
}

int run_bench(const Options& o) {
  const ExperimentSpec e = experiment_spec(o);
  const auto records = run_experiment(e);
  emit(o.out, [&](std::ostream& os) { write_trace_csv(os, records, o.timing); });
  if (!o.summary.empty()) {
    emit(o.summary, [&](std::ostream& os) {
      write_summary_header(os);
      write_summary_row(os, to_string(e.algorithm), summarize(records));
    });
  }
  std::size_t failed = 0;
  for (const auto& r : records) {
    if (!r.ok()) {
      ++failed;
      std::cerr << "seed " << r.seed << " failed: " << r.error << '\n';
    }
  }
  if (failed) std::cerr << failed << " of " << records.size() << " runs failed\n";
  return 0;
}

int run_summarize(const Options& o) {
  emit(o.out, [&](std::ostream& os) {
    write_summary_header(os);
    for (const auto& path : o.traces) {
      std::ifstream is(path);
      if (!is) throw std::runtime_error("cannot read " + path);
      write_summary_row(os, std::filesystem::path(path).stem().string(), summarize(read_trace_csv(is)));
    }
  });
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Randomized Tucker and CP decompositions of synthetic tensors"};
  app.set_config("--config", "", "INI file; keys mirror flags, [section] per subcommand, flags override it");
  app.require_subcommand(1);
  Options o;

  auto* gen = app.add_subcommand("gen", "emit a synthetic tensor");
  add_tensor_flags(gen, o);
  gen->add_option("--seed", o.seed, "generator seed")->capture_default_str();
  gen->add_option("--out", o.out, "output file (default stdout)");

  auto* dec = app.add_subcommand("decompose", "one run; prints the per-sweep fitness trace");
  add_tensor_flags(dec, o);
  add_algorithm_flags(dec, o);
  dec->add_option("--input", o.input, "read the tensor from a file instead of generating it")->check(CLI::ExistingFile);
  dec->add_option("--seed", o.seed, "tensor and algorithm seed")->capture_default_str();
  dec->add_option("--out", o.out, "directory for the fitted model");
  dec->add_flag("--timing", o.timing, "add per-sweep wall time");

  auto* bench = app.add_subcommand("bench", "batch of seeded runs; trace CSV");
  add_tensor_flags(bench, o);
  add_algorithm_flags(bench, o);
  bench->add_option("--reps", o.reps, "repetitions, seeds base..base+reps-1")->capture_default_str();
  bench->add_option("--seed", o.seed, "base seed")->capture_default_str();
  bench->add_option("--threads", o.threads, "worker threads")->capture_default_str();
  bench->add_option("--out", o.out, "trace CSV (default stdout)");
  bench->add_option("--summary", o.summary, "also write a quartile summary CSV here");
  bench->add_flag("--timing", o.timing, "fill the wall_ms column (output is then not reproducible)");

  auto* summ = app.add_subcommand("summarize", "trace CSVs to a quartile CSV, one row per file");
  summ->add_option("traces", o.traces, "trace CSV files")->required()->check(CLI::ExistingFile);
  summ->add_option("--out", o.out, "summary CSV (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return run_gen(o);
    if (dec->parsed()) return run_decompose(o);
    if (bench->parsed()) return run_bench(o);
    return run_summarize(o);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
