#include "hjhom/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "hjhom/cell_solver.hpp"
#include "hjhom/corrector.hpp"
#include "hjhom/evolution.hpp"

namespace hjhom {

namespace {

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

uint64_t fnv1a(const std::string& s) {
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string short_hash(const nlohmann::json& j) {
  uint64_t h = fnv1a(j.dump());
  char buf[20];
  std::snprintf(buf, sizeof buf, "%08x",
                static_cast<uint32_t>(h ^ (h >> 32)));
  return buf;
}

void write_file(const std::filesystem::path& path, const std::string& body,
                RunResult& result) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), "cli_output", "cannot open " + path.string());
  out << body;
  result.artifacts.push_back(path.string());
}

std::function<double(double)> build_initial_data(const nlohmann::json& g) {
  std::string type = g.value("type", "tent");
  if (type == "tent") {
    return [](double x) { return std::max(0.0, 1.0 - std::abs(x)); };
  }
  if (type == "plane") {
    require(g.contains("momentum"), "cli_config",
            "plane-wave data needs a momentum");
    double q = g.at("momentum").get<double>();
    return [q](double x) { return q * x; };
  }
  throw InvariantError("cli_config", "unknown initial data type: " + type);
}

std::vector<double> number_list(const nlohmann::json& params,
                                const char* key) {
  require(params.contains(key) && params.at(key).is_array() &&
              !params.at(key).empty(),
          "cli_config", std::string("params.") + key +
                            " must be a nonempty array of numbers");
  std::vector<double> out;
  for (const auto& v : params.at(key)) out.push_back(v.get<double>());
  return out;
}

const char* kind_name(SegmentKind kind) {
  switch (kind) {
    case SegmentKind::Flat: return "flat";
    case SegmentKind::Implicit: return "implicit";
    default: return "swept";
  }
}

std::string gnuplot_header(const std::string& ylabel) {
  return "set datafile separator ','\nset grid\nset xlabel 'p'\nset ylabel '" +
         ylabel + "'\n";
}

// ---------------------------------------------------------------------------
// Commands.  Each writes <command>_<hash>.{csv,json,gp} (plus optional
// extras) with all floats at full %.17g precision; nothing in these files
// depends on the clock, so reruns are byte-identical.

void run_effective(const RunConfig& cfg, const std::string& tag,
                   const std::filesystem::path& dir, RunResult& result) {
  auto H = build_hamiltonian(cfg.hamiltonian);
  auto V = build_potential(cfg.potential, cfg.seed);
  EffectiveCurve curve = compute_effective(H, V);

  double p_lo = cfg.params.value("p_min", -2.0);
  double p_hi = cfg.params.value("p_max", 4.0);
  long points = cfg.params.value("points", 301L);
  require(p_hi > p_lo && points >= 2, "cli_config",
          "effective needs p_min < p_max and points >= 2");

  std::string csv = "p,Hbar,segment_kind,provenance\n";
  for (long i = 0; i < points; ++i) {
    double p = p_lo + (p_hi - p_lo) * static_cast<double>(i) / (points - 1);
    const CurveSegment& seg = curve.segment_at(p);
    csv += fmt(p) + "," + fmt(curve.evaluate(p)) + "," +
           kind_name(seg.kind) + "," + seg.provenance + "\n";
  }

  std::vector<double> breakpoints;
  for (const auto& seg : curve.segments()) {
    for (double b : {seg.span.lo, seg.span.hi}) {
      if (std::abs(b) > 1e8) continue;
      if (breakpoints.empty() || b > breakpoints.back() + 1e-12) {
        breakpoints.push_back(b);
      }
    }
  }

  nlohmann::json summary;
  summary["config"] = cfg.resolved();
  summary["curve"] = curve.to_json();
  summary["breakpoints"] = breakpoints;
  write_file(dir / (tag + ".csv"), csv, result);
  write_file(dir / (tag + ".json"), summary.dump(2) + "\n", result);
  write_file(dir / (tag + ".gp"),
             gnuplot_header("effective level") + "plot '" + tag +
                 ".csv' every ::1 using 1:2 with lines title 'Hbar'\n",
             result);
}

void run_cell(const RunConfig& cfg, const std::string& tag,
              const std::filesystem::path& dir, RunResult& result) {
  auto H = build_hamiltonian(cfg.hamiltonian);
  auto V = build_potential(cfg.potential, cfg.seed);
  auto momenta = number_list(cfg.params, "momenta");
  std::vector<double> lambdas;
  if (cfg.params.contains("lambdas")) {
    lambdas = number_list(cfg.params, "lambdas");
  }
  double h = cfg.params.value("h", 0.0);

  CellOptions opt;
  opt.seed = cfg.seed;
  std::string csv = "p,lambda,estimate,residual\n";
  nlohmann::json rows = nlohmann::json::array();
  for (double p : momenta) {
    HbarEstimate est = estimate_Hbar(*H, *V, p, lambdas, h, opt);
    for (std::size_t i = 0; i < est.lambdas.size(); ++i) {
      csv += fmt(p) + "," + fmt(est.lambdas[i]) + "," + fmt(est.raw[i]) +
             "," + fmt(est.residuals[i]) + "\n";
    }
    nlohmann::json row;
    row["p"] = p;
    row["value"] = est.value;
    row["error_bar"] = est.error_bar;
    row["lambdas"] = est.lambdas;
    row["raw"] = est.raw;
    rows.push_back(row);
  }

  nlohmann::json summary;
  summary["config"] = cfg.resolved();
  summary["estimates"] = rows;
  write_file(dir / (tag + ".csv"), csv, result);
  write_file(dir / (tag + ".json"), summary.dump(2) + "\n", result);
  write_file(dir / (tag + ".gp"),
             gnuplot_header("discounted estimate") + "plot '" + tag +
                 ".csv' every ::1 using 1:3 with points pt 7 title 'raw'\n",
             result);
}

void run_evolve(const RunConfig& cfg, const std::string& tag,
                const std::filesystem::path& dir, RunResult& result) {
  auto H = build_hamiltonian(cfg.hamiltonian);
  auto V = build_potential(cfg.potential, cfg.seed);
  EffectiveCurve curve = compute_effective(H, V);
  auto eps_list = number_list(cfg.params, "eps_list");
  double T = cfg.params.value("T", 1.0);
  double k = cfg.params.value("k", 1.0);
  auto g = build_initial_data(cfg.params.value("g", nlohmann::json::object()));

  ConvergenceReport report =
      convergence_report(*H, *V, curve, g, T, k, eps_list, cfg.seed);

  std::string csv = "eps,h,sup_error,scheme_bound\n";
  for (const auto& row : report.rows) {
    csv += fmt(row.eps) + "," + fmt(row.h) + "," + fmt(row.sup_error) + "," +
           fmt(row.scheme_bound) + "\n";
  }

  // Final-time profiles for plotting: homogenized reference plus each eps.
  EvolutionSolution ref = solve_homogenized(curve, g, T, {-k, k});
  std::vector<EvolutionSolution> runs;
  for (double eps : eps_list) {
    runs.push_back(solve_oscillatory(*H, *V, eps, g, T, {-k, k}, 0.0,
                                     cfg.seed));
  }
  std::string profiles = "x,u_hom";
  for (double eps : eps_list) profiles += ",u_eps_" + fmt(eps);
  profiles += "\n";
  const long samples = 256;
  for (long i = 0; i <= samples; ++i) {
    double x = -k + 2.0 * k * static_cast<double>(i) / samples;
    profiles += fmt(x) + "," + fmt(ref.value_at(x));
    for (const auto& run : runs) profiles += "," + fmt(run.value_at(x));
    profiles += "\n";
  }

  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : report.rows) {
    rows.push_back({{"eps", row.eps},
                    {"h", row.h},
                    {"sup_error", row.sup_error},
                    {"scheme_bound", row.scheme_bound}});
  }
  nlohmann::json summary;
  summary["config"] = cfg.resolved();
  summary["rows"] = rows;
  summary["nonincreasing"] = report.nonincreasing;
  summary["reference_h"] = report.reference_h;
  write_file(dir / (tag + ".csv"), csv, result);
  write_file(dir / (tag + "_profiles.csv"), profiles, result);
  write_file(dir / (tag + ".json"), summary.dump(2) + "\n", result);
  write_file(dir / (tag + ".gp"),
             "set datafile separator ','\nset grid\nset logscale xy\n"
             "set xlabel 'eps'\nset ylabel 'sup error'\nplot '" +
                 tag + ".csv' every ::1 using 1:3 with linespoints title "
                       "'measured', '" +
                 tag + ".csv' every ::1 using 1:4 with lines title 'bound'\n",
             result);
}

void run_corrector(const RunConfig& cfg, const std::string& tag,
                   const std::filesystem::path& dir, RunResult& result) {
  auto H = build_hamiltonian(cfg.hamiltonian);
  auto V = build_potential(cfg.potential, cfg.seed);
  auto mu_list = number_list(cfg.params, "mu_list");

  std::string csv = "mu,flat_lo,flat_hi,resonant,is_point,verified,residual\n";
  nlohmann::json rows = nlohmann::json::array();
  for (double mu : mu_list) {
    FlatIntervalResult flat = flat_interval(*H, *V, mu);
    SlopeField field = transition_slope(*H, *V, mu, 0.5);
    VerifyReport report = verify_metric_solution(field, *H, *V, mu);
    csv += fmt(mu) + "," + fmt(flat.span.lo) + "," + fmt(flat.span.hi) + "," +
           (flat.resonant ? "1" : "0") + "," + (flat.is_point ? "1" : "0") +
           "," + (report.pass ? "1" : "0") + "," + fmt(report.max_residual) +
           "\n";
    rows.push_back({{"mu", flat.mu},
                    {"flat", {flat.span.lo, flat.span.hi}},
                    {"resonant", flat.resonant},
                    {"is_point", flat.is_point},
                    {"components", flat.component_count},
                    {"verified", report.pass},
                    {"residual", report.max_residual}});
  }

  nlohmann::json summary;
  summary["config"] = cfg.resolved();
  summary["levels"] = rows;
  write_file(dir / (tag + ".csv"), csv, result);
  write_file(dir / (tag + ".json"), summary.dump(2) + "\n", result);
  write_file(dir / (tag + ".gp"),
             "set datafile separator ','\nset grid\nset xlabel 'mu'\n"
             "set ylabel 'slope average'\nplot '" +
                 tag + ".csv' every ::1 using 1:2 with lines title 'inf', '" +
                 tag + ".csv' every ::1 using 1:3 with lines title 'sup'\n",
             result);
}

void run_compare(const RunConfig& cfg, const std::string& tag,
                 const std::filesystem::path& dir, RunResult& result) {
  auto H = build_hamiltonian(cfg.hamiltonian);
  auto V = build_potential(cfg.potential, cfg.seed);
  EffectiveCurve curve = compute_effective(H, V);
  auto momenta = number_list(cfg.params, "momenta");
  std::vector<double> lambdas;
  if (cfg.params.contains("lambdas")) {
    lambdas = number_list(cfg.params, "lambdas");
  }

  CellOptions opt;
  opt.seed = cfg.seed;
  std::string csv = "p,formula,cell,diff,error_bar\n";
  nlohmann::json rows = nlohmann::json::array();
  for (double p : momenta) {
    double formula = curve.evaluate(p);
    HbarEstimate est = estimate_Hbar(*H, *V, p, lambdas, 0.0, opt);
    const CurveSegment& seg = curve.segment_at(p);
    csv += fmt(p) + "," + fmt(formula) + "," + fmt(est.value) + "," +
           fmt(est.value - formula) + "," + fmt(est.error_bar) + "\n";
    rows.push_back({{"p", p},
                    {"formula", formula},
                    {"cell", est.value},
                    {"error_bar", est.error_bar},
                    {"segment_kind", kind_name(seg.kind)},
                    {"provenance", seg.provenance}});
  }

  nlohmann::json summary;
  summary["config"] = cfg.resolved();
  summary["triples"] = rows;
  write_file(dir / (tag + ".csv"), csv, result);
  write_file(dir / (tag + ".json"), summary.dump(2) + "\n", result);
  write_file(dir / (tag + ".gp"),
             gnuplot_header("effective level") + "plot '" + tag +
                 ".csv' every ::1 using 1:2 with lines title 'formula', '" +
                 tag +
                 ".csv' every ::1 using 1:3:5 with yerrorbars title 'cell'\n",
             result);
}

}  // namespace

nlohmann::json RunConfig::resolved() const {
  nlohmann::json j;
  j["command"] = command;
  j["hamiltonian"] = hamiltonian;
  j["potential"] = potential;
  j["params"] = params;
  j["out_dir"] = out_dir;
  j["seed"] = seed;
  j["workers"] = workers;
  return j;
}

RunConfig parse_config(const nlohmann::json& j) {
  require(j.is_object(), "cli_config", "run config must be a JSON object");
  RunConfig cfg;
  require(j.contains("command") && j.at("command").is_string(), "cli_config",
          "run config needs a command string");
  cfg.command = j.at("command").get<std::string>();
  const std::vector<std::string> known = {"effective", "cell", "evolve",
                                          "corrector", "compare"};
  require(std::find(known.begin(), known.end(), cfg.command) != known.end(),
          "cli_config", "unknown command: " + cfg.command);
  require(j.contains("hamiltonian"), "cli_config",
          "run config needs a hamiltonian spec");
  cfg.hamiltonian = j.at("hamiltonian");
  require(j.contains("potential"), "cli_config",
          "run config needs a potential spec");
  cfg.potential = j.at("potential");
  cfg.params = j.value("params", nlohmann::json::object());
  cfg.out_dir = j.value("out_dir", std::string("."));
  cfg.seed = j.value("seed", uint64_t{1});
  cfg.workers = j.value("workers", 1);
  require(cfg.workers >= 1, "cli_config", "workers must be at least 1");
  return cfg;
}

HamiltonianPtr build_hamiltonian(const nlohmann::json& spec) {
  require(spec.is_object() && spec.contains("type"), "cli_config",
          "hamiltonian spec needs a type");
  std::string type = spec.at("type").get<std::string>();
  if (type == "w_well") return make_w_well_hamiltonian();
  if (type == "table") {
    require(spec.contains("points") && spec.at("points").is_array() &&
                spec.at("points").size() >= 2,
            "cli_config", "table hamiltonian needs >= 2 [p, value] points");
    std::vector<std::pair<double, double>> pts;
    for (const auto& row : spec.at("points")) {
      require(row.is_array() && row.size() == 2, "cli_config",
              "table points are [p, value] pairs");
      pts.emplace_back(row[0].get<double>(), row[1].get<double>());
    }
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
      require(pts[i].first < pts[i + 1].first, "cli_config",
              "table momenta must increase");
    }
    auto f = [pts](double p) {
      // Linear interpolation inside, extrapolation by the end slopes.
      std::size_t n = pts.size();
      std::size_t i = 0;
      if (p >= pts[n - 2].first) {
        i = n - 2;
      } else {
        while (i + 2 < n && pts[i + 1].first <= p) ++i;
      }
      double t = (p - pts[i].first) / (pts[i + 1].first - pts[i].first);
      return (1.0 - t) * pts[i].second + t * pts[i + 1].second;
    };
    return PiecewiseMonotoneHamiltonian::normalize(f).hamiltonian;
  }
  throw InvariantError("cli_config", "unknown hamiltonian type: " + type);
}

PotentialModelPtr build_potential(const nlohmann::json& spec, uint64_t seed) {
  require(spec.is_object() && spec.contains("type"), "cli_config",
          "potential spec needs a type");
  std::string type = spec.at("type").get<std::string>();
  if (type == "cosine") {
    return PotentialModel::cosine(spec.value("mbar", 1.0));
  }
  if (type == "random_phase") {
    return PotentialModel::random_phase_cosine(spec.value("mbar", 1.0), seed);
  }
  if (type == "block_random") {
    return PotentialModel::block_random(spec.value("depth_lo", 0.5),
                                        spec.value("depth_hi", 1.5), seed);
  }
  throw InvariantError("cli_config", "unknown potential type: " + type);
}

RunResult run_command(const RunConfig& cfg) {
  RunResult result;
  std::filesystem::path dir(cfg.out_dir);
  std::filesystem::create_directories(dir);
  std::string tag = cfg.command + "_" + short_hash(cfg.resolved());

  if (cfg.command == "effective") {
    run_effective(cfg, tag, dir, result);
  } else if (cfg.command == "cell") {
    run_cell(cfg, tag, dir, result);
  } else if (cfg.command == "evolve") {
    run_evolve(cfg, tag, dir, result);
  } else if (cfg.command == "corrector") {
    run_corrector(cfg, tag, dir, result);
  } else {
    run_compare(cfg, tag, dir, result);
  }

  // Timestamps live only in the sidecar log so the data artifacts above stay
  // byte-reproducible for a fixed config and seed.
  {
    std::time_t now = std::time(nullptr);
    char stamp[64];
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ",
                  std::gmtime(&now));
    std::string log = std::string("run ") + tag + " at " + stamp + "\n";
    std::ofstream out(dir / (tag + ".log"), std::ios::binary);
    out << log;
  }

  result.summary = nlohmann::json{{"tag", tag},
                                  {"artifacts", result.artifacts},
                                  {"config", cfg.resolved()}};
  return result;
}

int run_cli(int argc, const char* const* argv) {
  std::string config_path;
  std::string out_override;
  int64_t seed_override = -1;
  int workers_override = 0;

  CLI::App app{"effective Hamiltonian toolbox"};
  app.add_option("--config", config_path, "run configuration JSON file")
      ->required();
  app.add_option("--out", out_override, "override the output directory");
  app.add_option("--seed", seed_override, "override the RNG seed");
  app.add_option("--workers", workers_override, "override the worker count");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    std::ifstream in(config_path);
    require(in.good(), "cli_config", "cannot read config: " + config_path);
    nlohmann::json j = nlohmann::json::parse(in, nullptr,
                                             /*allow_exceptions=*/true);
    RunConfig cfg = parse_config(j);
    if (!out_override.empty()) cfg.out_dir = out_override;
    if (seed_override >= 0) cfg.seed = static_cast<uint64_t>(seed_override);
    if (workers_override > 0) cfg.workers = workers_override;
    RunResult result = run_command(cfg);
    std::printf("%s\n", result.summary.dump().c_str());
    return 0;
  } catch (const InvariantError& e) {
    nlohmann::json err{
        {"error", {{"invariant", e.invariant()}, {"message", e.what()}}}};
    std::printf("%s\n", err.dump().c_str());
    return 2;
  } catch (const std::exception& e) {
    nlohmann::json err{
        {"error", {{"invariant", "unhandled"}, {"message", e.what()}}}};
    std::printf("%s\n", err.dump().c_str());
    return 2;
  }
}

}  // namespace hjhom
