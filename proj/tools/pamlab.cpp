#include <pamlab/pamlab.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitPass = 0;
constexpr int kExitGate = 1;
constexpr int kExitUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Carries a C API status out of nested calls.
struct ApiError : std::runtime_error {
  int status;
  ApiError(int s, const std::string& what) : std::runtime_error(what), status(s) {}
};

void check(int status) {
  if (status != PAM_OK) throw ApiError(status, std::string(pam_status_name(status)) + ": " + pam_last_error());
}

struct FieldDeleter {
  void operator()(pam_field* p) const { pam_field_free(p); }
};
struct SnapshotDeleter {
  void operator()(pam_snapshot* p) const { pam_snapshot_free(p); }
};
struct ExperimentDeleter {
  void operator()(pam_experiment* p) const { pam_experiment_free(p); }
};
using FieldPtr = std::unique_ptr<pam_field, FieldDeleter>;
using SnapshotPtr = std::unique_ptr<pam_snapshot, SnapshotDeleter>;
using ExperimentPtr = std::unique_ptr<pam_experiment, ExperimentDeleter>;

std::string take(char* s) {
  std::string out = s ? s : "";
  pam_string_free(s);
  return out;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw UsageError("cannot read " + p.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::string content_hash(const std::string& bytes) {
  char hex[41];
  check(pam_content_hash(bytes.data(), bytes.size(), hex));
  return hex;
}

std::string utc_now() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> output_dir;
  std::optional<std::size_t> realizations;
  int workers = 1;
};

json load_config(const CommonFlags& flags) {
  json cfg;
  try {
    cfg = json::parse(read_file(flags.config));
  } catch (const json::exception& e) {
    throw UsageError("config is not valid JSON: " + std::string(e.what()));
  }
  if (!cfg.is_object()) throw UsageError("config must be a JSON object");
  if (const char* env = std::getenv("PAM_SEED")) {
    try {
      std::size_t used = 0;
      const std::string s(env);
      const auto v = std::stoull(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      cfg["base_seed"] = v;
    } catch (const std::exception&) {
      throw UsageError("PAM_SEED must be an unsigned integer");
    }
  }
  if (flags.seed) cfg["base_seed"] = *flags.seed;
  if (flags.output_dir) cfg["output_dir"] = *flags.output_dir;
  if (flags.realizations) cfg["realizations"] = *flags.realizations;
  return cfg;
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw UsageError(std::string("config key '") + key + "' has the wrong type");
  }
}

void reject_unknown(const json& j, const std::vector<std::string>& keys, const std::string& where) {
  if (!j.is_object()) throw UsageError(where + " must be an object");
  for (const auto& item : j.items())
    if (std::find(keys.begin(), keys.end(), item.key()) == keys.end())
      throw UsageError("unknown key '" + item.key() + "' in " + where);
}

void write_manifest(const fs::path& dir, const CommonFlags& flags, const json& resolved, const std::string& started,
                    const std::vector<fs::path>& outputs) {
  json files = json::array();
  for (const auto& p : outputs) files.push_back({{"path", p.string()}, {"git_blob_sha1", content_hash(read_file(p))}});
  const json manifest = {{"config_path", flags.config},
                         {"resolved_config", resolved},
                         {"base_seed", resolved.value("base_seed", json(nullptr))},
                         {"tool_version", pam_version()},
                         {"started", started},
                         {"finished", utc_now()},
                         {"outputs", files}};
  std::ofstream(dir / "manifest.json") << manifest.dump(2) << "\n";
}

// Potential from the "potential" block: weibull (default), constant, or csv.
FieldPtr make_field(const json& cfg) {
  const json pot = cfg.value("potential", json::object());
  reject_unknown(pot, {"kind", "value", "path"}, "potential");
  const std::string kind = get_or<std::string>(pot, "kind", "weibull");
  const int d = get_or<int>(cfg, "d", 1);
  const double gamma = get_or<double>(cfg, "gamma", 2.0);
  const auto seed = get_or<std::uint64_t>(cfg, "base_seed", 1);
  pam_field* raw = nullptr;
  if (kind == "weibull") {
    if (!cfg.contains("side")) throw UsageError("config lacks 'side'");
    check(pam_field_sample(d, get_or<int>(cfg, "side", 0), gamma, seed, &raw));
  } else if (kind == "constant") {
    if (!cfg.contains("side")) throw UsageError("config lacks 'side'");
    check(pam_field_constant(d, get_or<int>(cfg, "side", 0), get_or<double>(pot, "value", 0.0), &raw));
  } else if (kind == "csv") {
    const auto path = get_or<std::string>(pot, "path", "");
    check(pam_field_read_csv(path.c_str(), gamma, seed, &raw));
  } else {
    throw UsageError("unknown potential kind '" + kind + "'");
  }
  return FieldPtr(raw);
}

int cmd_sample(const CommonFlags& flags) {
  const std::string started = utc_now();
  json cfg = load_config(flags);
  reject_unknown(cfg, {"schema", "gamma", "d", "side", "base_seed", "output_dir", "potential"}, "config");
  if (get_or<int>(cfg, "schema", 0) != 1) throw UsageError("config schema must be 1");
  const fs::path dir = get_or<std::string>(cfg, "output_dir", "out");
  FieldPtr field = make_field(cfg);
  fs::create_directories(dir);
  const fs::path out = dir / "field.csv";
  check(pam_field_write_csv(field.get(), out.string().c_str()));
  write_manifest(dir, flags, cfg, started, {out});
  std::cout << out.string() << "\n";
  return kExitPass;
}

struct SolveSettings {
  std::string method;
  double t = 0.0;
  bool cross_check = false;
  pam_solve_options options{};
};

SolveSettings solve_settings(const json& cfg, int workers) {
  const json s = cfg.value("solve", json::object());
  reject_unknown(s, {"method", "t", "cross_check", "walkers", "spectral_k", "eigen_tol", "ode_rel_tol"}, "solve");
  SolveSettings out;
  pam_solve_options_default(&out.options);
  out.method = get_or<std::string>(s, "method", "spectral");
  if (!s.contains("t")) throw UsageError("solve block lacks 't'");
  out.t = get_or<double>(s, "t", 0.0);
  out.cross_check = get_or<bool>(s, "cross_check", false);
  out.options.walkers = get_or<std::size_t>(s, "walkers", out.options.walkers);
  out.options.spectral_k = get_or<std::size_t>(s, "spectral_k", 0);
  out.options.eigen_tol = get_or<double>(s, "eigen_tol", out.options.eigen_tol);
  out.options.ode_rel_tol = get_or<double>(s, "ode_rel_tol", out.options.ode_rel_tol);
  out.options.seed = get_or<std::uint64_t>(cfg, "base_seed", 1);
  out.options.workers = workers;
  return out;
}

struct Solved {
  SnapshotPtr snap;
  std::vector<double> u, se;
  double log_scale = 0.0, mass = 0.0, mass_se = 0.0;
};

Solved run_solve(const pam_field* field, const std::string& method, const SolveSettings& s, std::size_t sites) {
  pam_snapshot* raw = nullptr;
  const int status = pam_solve(field, method.c_str(), s.t, &s.options, &raw);
  if (status == PAM_ERR_PARAMETER && std::string(pam_last_error()).rfind("unknown method", 0) == 0)
    throw UsageError(pam_last_error());
  check(status);
  Solved out;
  out.snap.reset(raw);
  double t = 0.0;
  int has_se = 0;
  check(pam_snapshot_info(raw, &t, &out.log_scale, &out.mass, &out.mass_se, &has_se));
  out.u.resize(sites);
  if (has_se) out.se.resize(sites);
  check(pam_snapshot_values(raw, out.u.data(), has_se ? out.se.data() : nullptr, sites));
  return out;
}

int cmd_solve(const CommonFlags& flags) {
  const std::string started = utc_now();
  json cfg = load_config(flags);
  reject_unknown(cfg, {"schema", "gamma", "d", "side", "base_seed", "output_dir", "potential", "solve"}, "config");
  if (get_or<int>(cfg, "schema", 0) != 1) throw UsageError("config schema must be 1");
  const SolveSettings s = solve_settings(cfg, flags.workers);
  const fs::path dir = get_or<std::string>(cfg, "output_dir", "out");
  FieldPtr field = make_field(cfg);
  std::size_t sites = 0;
  check(pam_field_info(field.get(), nullptr, nullptr, &sites));
  fs::create_directories(dir);

  std::vector<fs::path> outputs;
  auto save = [&](const Solved& r, const std::string& name) {
    const fs::path csv = dir / ("solution_" + name + ".csv");
    check(pam_snapshot_write(r.snap.get(), field.get(), csv.string().c_str()));
    outputs.push_back(csv);
    outputs.push_back(fs::path(csv).replace_extension(".json"));
  };

  int code = kExitPass;
  if (!s.cross_check) {
    save(run_solve(field.get(), s.method, s, sites), s.method);
  } else {
    const Solved sp = run_solve(field.get(), "spectral", s, sites);
    const Solved od = run_solve(field.get(), "ode", s, sites);
    const Solved fk = run_solve(field.get(), "fk", s, sites);
    save(sp, "spectral");
    save(od, "ode");
    save(fk, "fk");
    // Compare on the spectral scale.
    const double to_od = std::exp(od.log_scale - sp.log_scale), to_fk = std::exp(fk.log_scale - sp.log_scale);
    double top = 0.0, dev_ode = 0.0, worst_sigma = 0.0;
    for (std::size_t z = 0; z < sites; ++z) {
      top = std::max(top, sp.u[z]);
      dev_ode = std::max(dev_ode, std::abs(sp.u[z] - od.u[z] * to_od));
      if (fk.se[z] > 0.0) worst_sigma = std::max(worst_sigma, std::abs(sp.u[z] - fk.u[z] * to_fk) / (fk.se[z] * to_fk));
    }
    const double mass_sigma = std::abs(sp.mass - fk.mass * to_fk) / (fk.mass_se * to_fk);
    const json report = {{"ode_vs_spectral_sup_relative", dev_ode / top},
                         {"fk_mass_deviation_sigma", mass_sigma},
                         {"fk_max_site_deviation_sigma", worst_sigma},
                         {"passed", dev_ode / top <= 1e-7 && mass_sigma <= 3.0}};
    const fs::path rp = dir / "cross_check.json";
    std::ofstream(rp) << report.dump(2) << "\n";
    outputs.push_back(rp);
    std::cout << report.dump(2) << "\n";
    if (!report["passed"].get<bool>()) code = kExitGate;
  }
  write_manifest(dir, flags, cfg, started, outputs);
  for (const auto& p : outputs) std::cout << p.string() << "\n";
  return code;
}

int cmd_experiment(const CommonFlags& flags) {
  const std::string started = utc_now();
  const json cfg = load_config(flags);
  pam_experiment* raw = nullptr;
  check(pam_experiment_run(cfg.dump().c_str(), flags.workers, &raw));
  ExperimentPtr exp(raw);
  char* csv = nullptr;
  char* summary = nullptr;
  check(pam_experiment_write(exp.get(), &csv, &summary));
  const fs::path csv_path = take(csv), summary_path = take(summary);
  write_manifest(csv_path.parent_path(), flags, cfg, started, {csv_path, summary_path});
  int passed = 0;
  check(pam_experiment_passed(exp.get(), &passed));
  const json s = json::parse(read_file(summary_path));
  for (const auto& g : s["gates"])
    std::cout << (g["passed"].get<bool>() ? "PASS " : "FAIL ") << g["name"].get<std::string>() << " value="
              << (g["value"].is_number() ? fmt(g["value"].get<double>()) : std::string("nan")) << "\n";
  std::cout << csv_path.string() << "\n" << summary_path.string() << "\n";
  return passed ? kExitPass : kExitGate;
}

int cmd_scales(double t, int d, double gamma, double theta, std::optional<int> side, const std::string& overrides) {
  json o = json::object();
  if (!overrides.empty()) {
    try {
      o = json::parse(overrides);
    } catch (const json::exception&) {
      throw UsageError("--overrides is not valid JSON");
    }
  }
  if (side) o["side"] = *side;
  char* out = nullptr;
  check(pam_scales_json(t, d, gamma, theta, o.dump().c_str(), &out));
  std::cout << take(out) << "\n";
  return kExitPass;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Parabolic Anderson model laboratory"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(pam_version()));

  CommonFlags flags;
  auto add_common = [&flags](CLI::App* sub, bool realizations) {
    sub->add_option("-c,--config", flags.config, "JSON config file")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", flags.seed, "Override the base seed");
    sub->add_option("-o,--output-dir", flags.output_dir, "Override the output directory");
    sub->add_option("--workers", flags.workers, "Worker threads; never changes results")->check(CLI::PositiveNumber);
    if (realizations) sub->add_option("--realizations", flags.realizations, "Override the realization count");
  };

  auto* sample = app.add_subcommand("sample", "Sample one potential field and dump it as CSV");
  add_common(sample, false);
  auto* solve = app.add_subcommand("solve", "Solve the Cauchy problem and dump a snapshot");
  add_common(solve, false);
  auto* experiment = app.add_subcommand("experiment", "Run a registered experiment");
  add_common(experiment, true);
  bool list = false;
  auto* list_cmd = app.add_subcommand("list", "List registered experiments");
  list_cmd->callback([&list] { list = true; });

  auto* scales = app.add_subcommand("scales", "Print the scale set as JSON");
  double t = 0.0, gamma = 2.0, theta = 0.25;
  int d = 1;
  std::optional<int> side;
  std::string overrides;
  scales->add_option("-t,--t", t, "Time")->required();
  scales->add_option("-d,--d", d, "Dimension");
  scales->add_option("-g,--gamma", gamma, "Weibull shape");
  scales->add_option("--theta", theta, "Macrobox level parameter");
  scales->add_option("--side", side, "Side override");
  scales->add_option("--overrides", overrides, "JSON object of auxiliary overrides");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitPass : kExitUsage;
  }

  try {
    if (*sample) return cmd_sample(flags);
    if (*solve) return cmd_solve(flags);
    if (*experiment) return cmd_experiment(flags);
    if (*scales) return cmd_scales(t, d, gamma, theta, side, overrides);
    if (list) {
      for (std::size_t i = 0; i < pam_experiment_count(); ++i) std::cout << pam_experiment_name(i) << "\n";
      return kExitPass;
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ApiError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
