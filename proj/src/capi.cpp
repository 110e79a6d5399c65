#include "pamlab/pamlab.h"

#include <cstring>
#include <fstream>
#include <new>
#include <sstream>
#include <string>

#include "pamlab/error.hpp"
#include "pamlab/experiments.hpp"
#include "pamlab/io.hpp"
#include "pamlab/potential.hpp"
#include "pamlab/scales.hpp"
#include "pamlab/solver.hpp"

struct pam_field {
  pamlab::PotentialField field;
};

struct pam_snapshot {
  pamlab::SolutionSnapshot snap;
};

struct pam_experiment {
  pamlab::ExperimentConfig config;
  pamlab::ExperimentResult result;
};

namespace {

thread_local std::string last_error;

template <class Fn>
int guarded(Fn&& fn) {
  try {
    last_error.clear();
    fn();
    return PAM_OK;
  } catch (const pamlab::Error& e) {
    last_error = e.what();
    return static_cast<int>(e.code());
  } catch (const nlohmann::json::exception& e) {
    last_error = std::string("config: ") + e.what();
    return PAM_ERR_INPUT;
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
    return PAM_ERR_INTERNAL;
  } catch (const std::exception& e) {
    last_error = e.what();
    return PAM_ERR_INTERNAL;
  }
}

void need(const void* p, const char* what) {
  pamlab::require(p != nullptr, pamlab::ErrorCode::parameter, std::string(what) + " is null");
}

char* duplicate(const std::string& s) {
  char* out = new char[s.size() + 1];
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

}  // namespace

extern "C" {

const char* pam_version(void) { return "0.1.0"; }

const char* pam_status_name(int status) {
  if (status == PAM_ERR_INTERNAL) return "InternalError";
  if (status < 0 || status > PAM_ERR_INTERNAL) return "UnknownError";
  return pamlab::error_code_name(static_cast<pamlab::ErrorCode>(status));
}

const char* pam_last_error(void) { return last_error.c_str(); }

void pam_string_free(char* s) { delete[] s; }

int pam_scales_json(double t, int d, double gamma, double theta, const char* overrides_json, char** out_json) {
  return guarded([&] {
    need(out_json, "out_json");
    pamlab::ScaleOverrides o;
    if (overrides_json && *overrides_json) o = pamlab::overrides_from_json(nlohmann::json::parse(overrides_json));
    *out_json = duplicate(pamlab::to_json(pamlab::compute_scales(t, d, gamma, theta, o)).dump(2));
  });
}

int pam_content_hash(const char* bytes, size_t length, char out_hex[41]) {
  return guarded([&] {
    need(out_hex, "out_hex");
    pamlab::require(bytes != nullptr || length == 0, pamlab::ErrorCode::parameter, "bytes is null");
    const std::string h = pamlab::git_blob_hash(std::string_view(bytes ? bytes : "", length));
    std::memcpy(out_hex, h.c_str(), 41);
  });
}

int pam_field_sample(int d, int side, double gamma, uint64_t seed, pam_field** out) {
  return guarded([&] {
    need(out, "out");
    pamlab::require(gamma > 0.0, pamlab::ErrorCode::parameter, "gamma must be positive");
    *out = new pam_field{pamlab::sample_field(pamlab::TorusGeometry(d, side), gamma, seed)};
  });
}

int pam_field_constant(int d, int side, double value, pam_field** out) {
  return guarded([&] {
    need(out, "out");
    *out = new pam_field{pamlab::constant_field(pamlab::TorusGeometry(d, side), value)};
  });
}

int pam_field_read_csv(const char* path, double gamma, uint64_t seed, pam_field** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    std::ifstream in(path);
    pamlab::require(static_cast<bool>(in), pamlab::ErrorCode::io, std::string("cannot open ") + path);
    *out = new pam_field{pamlab::read_field_csv(in, gamma, seed)};
  });
}

int pam_field_write_csv(const pam_field* field, const char* path) {
  return guarded([&] {
    need(field, "field");
    need(path, "path");
    std::ostringstream os;
    pamlab::write_field_csv(os, field->field);
    pamlab::write_text_file(path, os.str());
  });
}

int pam_field_info(const pam_field* field, int* d, int* side, size_t* sites) {
  return guarded([&] {
    need(field, "field");
    const auto& g = field->field.geometry();
    if (d) *d = g.dim();
    if (side) *side = g.side();
    if (sites) *sites = g.size();
  });
}

int pam_field_values(const pam_field* field, double* out, size_t length) {
  return guarded([&] {
    need(field, "field");
    need(out, "out");
    const auto v = field->field.values();
    pamlab::require(length == v.size(), pamlab::ErrorCode::parameter, "length does not match the field");
    std::copy(v.begin(), v.end(), out);
  });
}

void pam_field_free(pam_field* field) { delete field; }

void pam_solve_options_default(pam_solve_options* o) {
  if (!o) return;
  o->spectral_k = 0;
  o->eigen_tol = 1e-10;
  o->ode_rel_tol = 1e-10;
  o->walkers = 100000;
  o->seed = 1;
  o->workers = 1;
}

int pam_solve(const pam_field* field, const char* method, double t, const pam_solve_options* options,
              pam_snapshot** out) {
  return guarded([&] {
    need(field, "field");
    need(method, "method");
    need(out, "out");
    pam_solve_options o;
    pam_solve_options_default(&o);
    if (options) o = *options;
    const auto m = pamlab::parse_method(method);
    pamlab::require(m.has_value(), pamlab::ErrorCode::parameter, std::string("unknown method '") + method + "'");
    const auto& f = field->field;
    auto solve = [&]() -> pamlab::SolutionSnapshot {
      switch (*m) {
        case pamlab::SolveMethod::spectral:
          return pamlab::solve_spectral(f, t, o.spectral_k ? o.spectral_k : std::min<std::size_t>(50, f.size()),
                                        o.eigen_tol);
        case pamlab::SolveMethod::ode:
          return pamlab::solve_ode(f, t, o.ode_rel_tol);
        case pamlab::SolveMethod::feynman_kac:
          return pamlab::feynman_kac_mc(f, t, o.walkers, o.seed, o.workers);
        case pamlab::SolveMethod::propagator:
          break;
      }
      return pamlab::solve_propagator(f, t);
    };
    pamlab::SolutionSnapshot s = solve();
    *out = new pam_snapshot{std::move(s)};
  });
}

int pam_snapshot_info(const pam_snapshot* snap, double* t, double* log_scale, double* total_mass, double* mass_stderr,
                      int* has_stderr) {
  return guarded([&] {
    need(snap, "snapshot");
    const auto& s = snap->snap;
    if (t) *t = s.t;
    if (log_scale) *log_scale = s.log_scale;
    if (total_mass) *total_mass = s.total_mass;
    if (mass_stderr) *mass_stderr = s.mass_stderr;
    if (has_stderr) *has_stderr = s.mc_stderr.has_value() ? 1 : 0;
  });
}

int pam_snapshot_values(const pam_snapshot* snap, double* values, double* stderr_or_null, size_t length) {
  return guarded([&] {
    need(snap, "snapshot");
    need(values, "values");
    const auto& s = snap->snap;
    pamlab::require(length == s.u.size(), pamlab::ErrorCode::parameter, "length does not match the snapshot");
    std::copy(s.u.begin(), s.u.end(), values);
    if (stderr_or_null) {
      pamlab::require(s.mc_stderr.has_value(), pamlab::ErrorCode::parameter, "snapshot carries no standard errors");
      std::copy(s.mc_stderr->begin(), s.mc_stderr->end(), stderr_or_null);
    }
  });
}

int pam_snapshot_write(const pam_snapshot* snap, const pam_field* field, const char* csv_path) {
  return guarded([&] {
    need(snap, "snapshot");
    need(field, "field");
    need(csv_path, "csv_path");
    pamlab::write_snapshot(csv_path, snap->snap, field->field.geometry());
  });
}

void pam_snapshot_free(pam_snapshot* snap) { delete snap; }

size_t pam_experiment_count(void) { return pamlab::experiment_registry().size(); }

const char* pam_experiment_name(size_t index) {
  const auto& r = pamlab::experiment_registry();
  return index < r.size() ? r[index].c_str() : nullptr;
}

int pam_experiment_run(const char* config_json, int workers, pam_experiment** out) {
  return guarded([&] {
    need(config_json, "config_json");
    need(out, "out");
    auto cfg = pamlab::config_from_json(nlohmann::json::parse(config_json));
    auto res = pamlab::run_experiment(cfg, workers);
    *out = new pam_experiment{std::move(cfg), std::move(res)};
  });
}

int pam_experiment_passed(const pam_experiment* exp, int* passed) {
  return guarded([&] {
    need(exp, "experiment");
    need(passed, "passed");
    *passed = exp->result.passed() ? 1 : 0;
  });
}

int pam_experiment_csv(const pam_experiment* exp, char** out_csv) {
  return guarded([&] {
    need(exp, "experiment");
    need(out_csv, "out_csv");
    *out_csv = duplicate(pamlab::experiment_csv(exp->config, exp->result));
  });
}

int pam_experiment_summary(const pam_experiment* exp, char** out_json) {
  return guarded([&] {
    need(exp, "experiment");
    need(out_json, "out_json");
    *out_json = duplicate(pamlab::experiment_summary(exp->config, exp->result).dump(2));
  });
}

int pam_experiment_write(const pam_experiment* exp, char** csv_path, char** summary_path) {
  return guarded([&] {
    need(exp, "experiment");
    const auto paths = pamlab::write_experiment_outputs(exp->config, exp->result);
    if (csv_path) *csv_path = duplicate(paths.csv.string());
    if (summary_path) *summary_path = duplicate(paths.summary.string());
  });
}

void pam_experiment_free(pam_experiment* exp) { delete exp; }

}  // extern "C"
