// Command-line front end. Talks to the library only through the C API.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "ttspin/ttspin.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

enum Exit {
  kOk = 0,
  kFailure = 1,
  kInput = 2,
  kNotConverged = 3,
  kSpectrum = 4,
  kValidate = 5,
  kOracleCap = 6,
};

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

/// Thrown to unwind with a specific exit code after printing `what`.
struct Abort {
  int code;
  std::string what;
};

int exit_for(ttspin_status s) {
  switch (s) {
  case TTSPIN_OK: return kOk;
  case TTSPIN_ERR_SCHEMA:
  case TTSPIN_ERR_IO:
  case TTSPIN_ERR_INVALID_ARGUMENT: return kInput;
  case TTSPIN_ERR_DIMENSION_CAP: return kOracleCap;
  default: return kFailure;
  }
}

void check(ttspin_status s) {
  if (s != TTSPIN_OK) {
    throw Abort{exit_for(s), std::string(ttspin_status_name(s)) + ": " + ttspin_last_error()};
  }
}

template <class T, void (*Free)(T*)>
struct Deleter {
  void operator()(T* p) const { Free(p); }
};
using System = std::unique_ptr<ttspin_system, Deleter<ttspin_system, ttspin_system_free>>;
using Operator =
    std::unique_ptr<ttspin_operator, Deleter<ttspin_operator, ttspin_operator_free>>;
using Spectrum =
    std::unique_ptr<ttspin_spectrum, Deleter<ttspin_spectrum, ttspin_spectrum_free>>;

std::string take(char* s) {
  std::string out = s ? s : "";
  ttspin_string_free(s);
  return out;
}

System load_system(const std::string& path) {
  ttspin_system* raw = nullptr;
  check(ttspin_system_load(path.c_str(), &raw));
  return System(raw);
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream os(p, std::ios::binary | std::ios::trunc);
  os << text;
  os.close();
  if (!os) throw Abort{kFailure, "cannot write " + p.string()};
}

/// Collects what a run did and writes it as <subcommand>.manifest.json.
struct Manifest {
  std::string subcommand;
  std::string input;
  json config = json::object();
  json timings = json::object();
  std::vector<std::string> outputs;
  std::vector<std::string> command;

  fs::path write(const fs::path& dir, int exit_code) {
    const fs::path path = dir / (subcommand + ".manifest.json");
    json j;
    j["subcommand"] = subcommand;
    if (!input.empty()) j["input"] = fs::absolute(input).string();
    j["config"] = config;
    j["tool"] = {{"name", "ttspin"}, {"version", ttspin_version()}};
    j["timings_ms"] = timings;
    j["outputs"] = outputs;
    j["command"] = command;
    j["exit_code"] = exit_code;
    write_file(path, j.dump(2) + "\n");
    return path;
  }
};

fs::path prepare_dir(const std::string& out) {
  const fs::path dir(out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Abort{kFailure, "cannot create " + dir.string() + ": " + ec.message()};
  return dir;
}

std::string fmt(double v, const char* spec = "%.6g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::string join_ranks(const json& ranks) {
  std::string s;
  for (const auto& r : ranks) s += (s.empty() ? "" : " ") + std::to_string(r.get<long>());
  return s;
}

unsigned threads_from_env() {
  const char* v = std::getenv("TTSPIN_THREADS");
  if (!v || !*v) return 0;
  char* end = nullptr;
  const long n = std::strtol(v, &end, 10);
  if (*end != '\0' || n < 0) throw Abort{kInput, "TTSPIN_THREADS must be a non-negative integer"};
  return static_cast<unsigned>(n);
}

// ------------------------------------------------------------------ build

struct BuildArgs {
  std::string input;
  double eps = 1e-12;
  std::string method = "amen";
  std::string out = ".";
  std::size_t max_rank = 0;
};

int run_build(const BuildArgs& a, Manifest& m) {
  const auto t0 = Clock::now();
  m.input = a.input;
  System sys = load_system(a.input);
  ttspin_build_options opts;
  ttspin_build_options_default(&opts);
  opts.eps = a.eps;
  opts.method = a.method == "binary" ? TTSPIN_SUM_BINARY : TTSPIN_SUM_AMEN;
  opts.max_rank = a.max_rank;
  m.config = {{"eps", a.eps},
              {"method", a.method},
              {"max_rank", a.max_rank},
              {"max_sweeps", opts.max_sweeps},
              {"enrichment_rank", opts.enrichment_rank},
              {"out", a.out}};
  m.command = {"build", a.input, "--eps", fmt(a.eps, "%.17g"), "--method", a.method,
               "--max-rank", std::to_string(a.max_rank), "--out", a.out};
  m.timings["load"] = ms_since(t0);

  ttspin_operator* raw = nullptr;
  char* report_raw = nullptr;
  int converged = 0;
  const auto tb = Clock::now();
  check(ttspin_build_liouvillian(sys.get(), &opts, &raw, &report_raw, &converged));
  Operator op(raw);
  const std::string report = take(report_raw);
  m.timings["summation"] = ms_since(tb);

  const fs::path dir = prepare_dir(a.out);
  const fs::path tt_path = dir / "liouvillian.tt";
  const fs::path rep_path = dir / "summation.json";
  check(ttspin_operator_save(op.get(), tt_path.string().c_str()));
  write_file(rep_path, report + "\n");
  m.outputs = {tt_path.string(), rep_path.string()};

  const json doc = json::parse(report);
  std::printf("%-6s %10s  %s\n", "sweep", "eff_rank", "ranks");
  std::size_t k = 0;
  for (const auto& p : doc["rank_history"]) {
    std::printf("%-6zu %10.4f  %s\n", ++k, p["effective_rank"].get<double>(),
                join_ranks(p["ranks"]).c_str());
  }
  if (doc.contains("max_intermediate")) {
    std::printf("max intermediate effective rank %.4f (before rounding %.4f)\n",
                doc["max_intermediate"]["effective_rank"].get<double>(),
                doc["max_intermediate_unrounded"]["effective_rank"].get<double>());
  }
  std::printf("method %s  terms %zu  final effective rank %.4f  error estimate %.3e%s\n",
              a.method.c_str(), doc["terms"].get<std::size_t>(),
              ttspin_operator_effective_rank(op.get()),
              doc["final_rel_error_estimate"].get<double>(),
              doc["cap_limited"].get<bool>() ? "  (rank cap hit)" : "");
  m.timings["total"] = ms_since(t0);
  if (!converged) {
    std::fprintf(stderr, "summation did not converge within the sweep budget\n");
    return kNotConverged;
  }
  return kOk;
}

// --------------------------------------------------------------- spectrum

struct SpectrumArgs {
  std::string input;
  std::string isotope;
  double from_hz = -1000.0;
  double to_hz = 1000.0;
  std::size_t points = 200;
  double eps = 1e-6;
  std::string solver = "amen";
  std::string out = ".";
  std::size_t max_sweeps = 0;
  bool cold = false;
};

int run_spectrum(const SpectrumArgs& a, Manifest& m) {
  const auto t0 = Clock::now();
  m.input = a.input;
  System sys = load_system(a.input);
  ttspin_spectrum_options opts;
  ttspin_spectrum_options_default(&opts);
  opts.isotope = a.isotope.c_str();
  opts.from_hz = a.from_hz;
  opts.to_hz = a.to_hz;
  opts.points = a.points;
  opts.eps = a.eps;
  opts.solver = a.solver == "dmrg" ? TTSPIN_SOLVER_DMRG : TTSPIN_SOLVER_AMEN;
  if (a.max_sweeps > 0) opts.max_sweeps = a.max_sweeps;
  opts.warm_start = a.cold ? 0 : 1;
  opts.threads = threads_from_env();
  m.config = {{"isotope", a.isotope},
              {"from_hz", a.from_hz},
              {"to_hz", a.to_hz},
              {"points", a.points},
              {"eps", a.eps},
              {"solver", a.solver},
              {"max_sweeps", opts.max_sweeps},
              {"enrichment_rank", opts.enrichment_rank},
              {"warm_start", opts.warm_start != 0},
              {"chunk", opts.chunk},
              {"threads", opts.threads},
              {"seed", opts.seed},
              {"out", a.out}};
  m.command = {"spectrum", a.input, "--isotope", a.isotope,
               "--from-hz", fmt(a.from_hz, "%.17g"), "--to-hz", fmt(a.to_hz, "%.17g"),
               "--points", std::to_string(a.points), "--eps", fmt(a.eps, "%.17g"),
               "--solver", a.solver, "--max-sweeps", std::to_string(opts.max_sweeps),
               "--out", a.out};
  if (a.cold) m.command.push_back("--cold");

  ttspin_spectrum* raw = nullptr;
  const auto ts = Clock::now();
  check(ttspin_spectrum_run(sys.get(), &opts, &raw));
  Spectrum spec(raw);
  m.timings["spectrum"] = ms_since(ts);

  const fs::path dir = prepare_dir(a.out);
  const fs::path csv_path = dir / "spectrum.csv";
  const fs::path json_path = dir / "spectrum.json";
  char* text = nullptr;
  check(ttspin_spectrum_csv(spec.get(), &text));
  write_file(csv_path, take(text));
  check(ttspin_spectrum_json(spec.get(), &text));
  write_file(json_path, take(text) + "\n");
  m.outputs = {csv_path.string(), json_path.string()};

  const std::size_t n = ttspin_spectrum_points(spec.get());
  const std::size_t ok = ttspin_spectrum_converged(spec.get());
  std::size_t failed = 0;
  for (std::size_t k = 0; k < n; ++k) {
    ttspin_point_status st;
    check(ttspin_spectrum_point(spec.get(), k, nullptr, nullptr, &st));
    if (st == TTSPIN_POINT_FAILED) ++failed;
  }
  std::printf("%zu points, %zu converged, %zu failed, %.1f ms\n", n, ok, failed,
              ms_since(ts));
  m.timings["total"] = ms_since(t0);
  if (10 * ok < 9 * n) {
    std::fprintf(stderr, "fewer than 90%% of the grid points converged\n");
    return kSpectrum;
  }
  return kOk;
}

// --------------------------------------------------------------- validate

struct ValidateArgs {
  std::string input;
  double eps = 1e-6;
  std::string out = ".";
};

int run_validate(const ValidateArgs& a, Manifest& m) {
  const auto t0 = Clock::now();
  m.input = a.input;
  m.config = {{"eps", a.eps}, {"out", a.out}};
  m.command = {"validate", a.input, "--eps", fmt(a.eps, "%.17g"), "--out", a.out};
  System sys = load_system(a.input);
  char* raw = nullptr;
  int passed = 0;
  check(ttspin_validate(sys.get(), a.eps, &raw, &passed));
  const std::string report = take(raw);
  m.timings["validate"] = ms_since(t0);

  const fs::path dir = prepare_dir(a.out);
  const fs::path path = dir / "validation.json";
  write_file(path, report + "\n");
  m.outputs = {path.string()};

  const json doc = json::parse(report);
  std::printf("%-28s %12s %12s  %s\n", "check", "deviation", "tolerance", "result");
  for (const auto& c : doc["checks"]) {
    const double dev = c["deviation"].is_number() ? c["deviation"].get<double>() : INFINITY;
    std::printf("%-28s %12.3e %12.3e  %s\n", c["name"].get<std::string>().c_str(), dev,
                c["tolerance"].get<double>(), c["passed"].get<bool>() ? "PASS" : "FAIL");
  }
  auto num = [&](const char* key) {
    return doc[key].is_number() ? doc[key].get<double>() : INFINITY;
  };
  std::printf("max operator deviation %.3e\nmax spectrum deviation %.3e\n",
              num("max_operator_deviation"), num("max_spectrum_deviation"));
  m.timings["total"] = ms_since(t0);
  return passed ? kOk : kValidate;
}

// --------------------------------------------------------------- generate

struct GenerateArgs {
  std::size_t spins = 20;
  std::uint64_t seed = 1;
  std::string out = "system.json";
};

int run_generate(const GenerateArgs& a, Manifest& m) {
  const auto t0 = Clock::now();
  m.config = {{"spins", a.spins}, {"seed", a.seed}, {"out", a.out}};
  m.command = {"generate", "--spins", std::to_string(a.spins), "--seed",
               std::to_string(a.seed), "--out", a.out};
  ttspin_system* raw = nullptr;
  check(ttspin_system_synthetic(a.spins, a.seed, &raw));
  System sys(raw);
  char* text = nullptr;
  check(ttspin_system_to_json(sys.get(), &text));
  const fs::path path(a.out);
  if (path.has_parent_path()) prepare_dir(path.parent_path().string());
  write_file(path, take(text) + "\n");
  m.outputs = {path.string()};
  m.timings["total"] = ms_since(t0);
  std::printf("wrote %zu spins to %s\n", a.spins, path.string().c_str());
  return kOk;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tensor-train NMR spin dynamics: compress Liouvillians, sweep spectra."};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(ttspin_version()));

  BuildArgs build;
  auto* b = app.add_subcommand("build", "Compress the commutation superoperator of a system");
  b->add_option("input", build.input, "Spin system JSON")->required();
  b->add_option("--eps", build.eps, "Relative Frobenius tolerance")
      ->capture_default_str()->check(CLI::PositiveNumber);
  b->add_option("--method", build.method, "Summation strategy")
      ->capture_default_str()->check(CLI::IsMember({"amen", "binary"}));
  b->add_option("--max-rank", build.max_rank, "Bond rank cap, 0 for none")->capture_default_str();
  b->add_option("--out", build.out, "Output directory")->capture_default_str();

  SpectrumArgs spec;
  auto* s = app.add_subcommand("spectrum", "Frequency-domain spectrum on a uniform Hz grid");
  s->add_option("input", spec.input, "Spin system JSON")->required();
  s->add_option("--isotope", spec.isotope, "Detected isotope, e.g. 15N")->required();
  s->add_option("--from-hz", spec.from_hz, "Low end of the window")->capture_default_str();
  s->add_option("--to-hz", spec.to_hz, "High end of the window")->capture_default_str();
  s->add_option("--points", spec.points, "Grid points")
      ->capture_default_str()->check(CLI::PositiveNumber);
  s->add_option("--eps", spec.eps, "Solver relative residual tolerance")
      ->capture_default_str()->check(CLI::PositiveNumber);
  s->add_option("--solver", spec.solver, "Linear solver")
      ->capture_default_str()->check(CLI::IsMember({"amen", "dmrg"}));
  s->add_option("--max-sweeps", spec.max_sweeps, "Sweep budget per point, 0 for the default");
  s->add_flag("--cold", spec.cold, "Start every point from a rank-1 guess instead of the previous solution");
  s->add_option("--out", spec.out, "Output directory")->capture_default_str();

  ValidateArgs val;
  auto* v = app.add_subcommand("validate", "Cross-check every construction against dense matrices");
  v->add_option("input", val.input, "Spin system JSON")->required();
  v->add_option("--eps", val.eps, "Solver tolerance for the spectrum check")
      ->capture_default_str()->check(CLI::PositiveNumber);
  v->add_option("--out", val.out, "Output directory")->capture_default_str();

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "Write a synthetic backbone-like spin chain");
  g->add_option("--spins", gen.spins, "Number of nuclei")
      ->capture_default_str()->check(CLI::PositiveNumber);
  g->add_option("--seed", gen.seed, "Generator seed")->capture_default_str();
  g->add_option("--out", gen.out, "Output JSON path")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInput;
  }

  Manifest m;
  int code = kFailure;
  fs::path out_dir = ".";
  try {
    if (b->parsed()) {
      m.subcommand = "build";
      out_dir = build.out;
      code = run_build(build, m);
    } else if (s->parsed()) {
      m.subcommand = "spectrum";
      out_dir = spec.out;
      code = run_spectrum(spec, m);
    } else if (v->parsed()) {
      m.subcommand = "validate";
      out_dir = val.out;
      code = run_validate(val, m);
    } else {
      m.subcommand = "generate";
      out_dir = fs::path(gen.out).has_parent_path() ? fs::path(gen.out).parent_path()
                                                    : fs::path(".");
      code = run_generate(gen, m);
    }
  } catch (const Abort& e) {
    std::fprintf(stderr, "ttspin %s: %s\n", m.subcommand.c_str(), e.what.c_str());
    code = e.code;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "ttspin %s: %s\n", m.subcommand.c_str(), e.what());
    code = kFailure;
  }

  try {
    m.write(prepare_dir(out_dir.string()), code);
  } catch (const Abort& e) {
    std::fprintf(stderr, "ttspin: %s\n", e.what.c_str());
    if (code == kOk) code = kFailure;
  }
  return code;
}
