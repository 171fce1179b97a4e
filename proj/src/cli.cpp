#include "cbf/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cbf/diagnose.hpp"
#include "cbf/factor.hpp"
#include "cbf/forecast.hpp"
#include "cbf/io.hpp"
#include "cbf/replicate.hpp"

namespace cbf {
namespace {

using nlohmann::json;

// ---------------------------------------------------------------------------
// small file / json helpers

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw io_error("read failure: " + path);
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot create file: " + path);
  out << content;
  out.flush();
  if (!out) throw io_error("write failure: " + path);
}

json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(what + " is not valid JSON: " + e.what());
  }
}

// JSON has no literal for non-finite doubles; encode them as null.
json num_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double num_from(const json& j) {
  if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
  if (!j.is_number()) throw std::invalid_argument("expected a number in report JSON");
  return j.get<double>();
}

json matrix_to_json(const MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(num_or_null(m(i, j)));
    rows.push_back(std::move(row));
  }
  return rows;
}

MatrixXd matrix_from_json(const json& j, const std::string& what) {
  if (!j.is_array()) throw std::invalid_argument(what + ": expected an array of rows");
  const int rows = static_cast<int>(j.size());
  if (rows == 0) return MatrixXd();
  if (!j[0].is_array()) throw std::invalid_argument(what + ": expected an array of rows");
  const int cols = static_cast<int>(j[0].size());
  MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    if (!j[i].is_array() || static_cast<int>(j[i].size()) != cols) {
      throw std::invalid_argument(what + ": ragged matrix");
    }
    for (int c = 0; c < cols; ++c) m(i, c) = num_from(j[i][c]);
  }
  return m;
}

json vector_to_json(const VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(num_or_null(v[i]));
  return a;
}

VectorXd vector_from_json(const json& j, const std::string& what) {
  if (!j.is_array()) throw std::invalid_argument(what + ": expected an array");
  VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = num_from(j[static_cast<std::size_t>(i)]);
  return v;
}

// ---------------------------------------------------------------------------
// enum <-> string

std::string structure_name(Structure s) { return s == Structure::full ? "full" : "diagonal"; }

Structure structure_from(const std::string& s) {
  if (s == "full") return Structure::full;
  if (s == "diagonal" || s == "diag") return Structure::diagonal;
  throw std::invalid_argument("unknown structure: " + s);
}

std::string family_name(Family f) { return f == Family::matrix_f ? "matrix_f" : "wishart"; }

Family family_from(const std::string& s) {
  if (s == "matrix_f" || s == "matrix-f" || s == "f") return Family::matrix_f;
  if (s == "wishart" || s == "caw") return Family::wishart;
  throw std::invalid_argument("unknown family: " + s);
}

std::string dynamics_name(Dynamics d) { return d == Dynamics::har ? "har" : "bekk"; }

Dynamics dynamics_from(const std::string& s) {
  if (s == "bekk") return Dynamics::bekk;
  if (s == "har") return Dynamics::har;
  throw std::invalid_argument("unknown dynamics: " + s);
}

// ---------------------------------------------------------------------------
// model specification documents

json spec_to_json(const AnySpec& any) {
  json j;
  if (std::holds_alternative<CbfSpec>(any)) {
    const CbfSpec& s = std::get<CbfSpec>(any);
    j["type"] = "bekk";
    j["n"] = s.n;
    j["structure"] = structure_name(s.structure);
    j["omega"] = matrix_to_json(s.omega.m());
    json ja = json::array();
    for (const auto& row : s.A) {
      json jr = json::array();
      for (const auto& m : row) jr.push_back(matrix_to_json(m));
      ja.push_back(std::move(jr));
    }
    j["A"] = std::move(ja);
    json jb = json::array();
    for (const auto& row : s.B) {
      json jr = json::array();
      for (const auto& m : row) jr.push_back(matrix_to_json(m));
      jb.push_back(std::move(jr));
    }
    j["B"] = std::move(jb);
    j["nu1"] = s.nu1;
    j["nu2"] = num_or_null(s.nu2);
  } else {
    const HarSpec& s = std::get<HarSpec>(any);
    j["type"] = "har";
    j["n"] = s.n;
    j["structure"] = structure_name(s.structure);
    j["omega"] = matrix_to_json(s.omega.m());
    j["Ad"] = matrix_to_json(s.Ad);
    j["Aw"] = matrix_to_json(s.Aw);
    j["Am"] = matrix_to_json(s.Am);
    j["nu1"] = s.nu1;
    j["nu2"] = num_or_null(s.nu2);
  }
  return j;
}

double nu2_from_json(const json& j) {
  if (!j.contains("nu2") || j["nu2"].is_null()) return std::numeric_limits<double>::infinity();
  if (j["nu2"].is_string()) {
    const std::string s = j["nu2"].get<std::string>();
    if (s == "inf" || s == "Inf" || s == "infinity") return std::numeric_limits<double>::infinity();
    throw std::invalid_argument("spec: nu2 must be a number, null, or \"inf\"");
  }
  return num_from(j["nu2"]);
}

AnySpec spec_from_json(const json& j) {
  if (!j.is_object()) throw std::invalid_argument("spec: expected a JSON object");
  const std::string type = j.value("type", std::string("bekk"));
  const Structure structure = structure_from(j.value("structure", std::string("full")));
  if (!j.contains("omega")) throw std::invalid_argument("spec: missing omega");
  MatrixXd omega = matrix_from_json(j["omega"], "spec omega");
  if (!j.contains("nu1")) throw std::invalid_argument("spec: missing nu1");
  const double nu1 = num_from(j["nu1"]);
  const double nu2 = nu2_from_json(j);

  if (type == "har") {
    HarSpec s;
    s.n = static_cast<int>(omega.rows());
    s.omega = SpdMatrix(omega);
    for (const char* key : {"Ad", "Aw", "Am"}) {
      if (!j.contains(key)) throw std::invalid_argument(std::string("spec: missing ") + key);
    }
    s.Ad = matrix_from_json(j["Ad"], "spec Ad");
    s.Aw = matrix_from_json(j["Aw"], "spec Aw");
    s.Am = matrix_from_json(j["Am"], "spec Am");
    s.nu1 = nu1;
    s.nu2 = nu2;
    s.structure = structure;
    s.validate();
    return s;
  }
  if (type != "bekk") throw std::invalid_argument("spec: unknown type: " + type);

  CbfSpec s;
  s.n = static_cast<int>(omega.rows());
  s.omega = SpdMatrix(omega);
  s.structure = structure;
  s.nu1 = nu1;
  s.nu2 = nu2;
  auto read_block = [&](const char* key, std::vector<std::vector<MatrixXd>>& dst) -> int {
    dst.clear();
    if (!j.contains(key) || j[key].is_null()) return 0;
    const json& block = j[key];
    if (!block.is_array()) throw std::invalid_argument(std::string("spec ") + key + ": expected an array");
    int lag_count = -1;
    for (const auto& row : block) {
      if (!row.is_array()) throw std::invalid_argument(std::string("spec ") + key + ": expected nested arrays");
      std::vector<MatrixXd> mats;
      for (const auto& m : row) mats.push_back(matrix_from_json(m, std::string("spec ") + key));
      if (lag_count < 0) lag_count = static_cast<int>(mats.size());
      if (static_cast<int>(mats.size()) != lag_count) {
        throw std::invalid_argument(std::string("spec ") + key + ": uneven lag counts");
      }
      dst.push_back(std::move(mats));
    }
    return lag_count < 0 ? 0 : lag_count;
  };
  s.P = read_block("A", s.A);
  s.Q = read_block("B", s.B);
  s.K = std::max<int>(1, static_cast<int>(std::max(s.A.size(), s.B.size())));
  // validate() requires exactly K groups in both blocks; pad empty lag lists.
  while (static_cast<int>(s.A.size()) < s.K) s.A.emplace_back(s.P, MatrixXd::Zero(s.n, s.n));
  while (static_cast<int>(s.B.size()) < s.K) s.B.emplace_back(s.Q, MatrixXd::Zero(s.n, s.n));
  s.validate();
  return s;
}

// ---------------------------------------------------------------------------
// fit reports

json shape_to_json(const ModelShape& shape) {
  return json{{"n", shape.n},           {"dynamics", dynamics_name(shape.dyn)},
              {"P", shape.P},           {"Q", shape.Q},
              {"K", shape.K},           {"structure", structure_name(shape.structure)},
              {"family", family_name(shape.family)}};
}

ModelShape shape_from_json(const json& j) {
  ModelShape s;
  s.n = j.at("n").get<int>();
  s.dyn = dynamics_from(j.at("dynamics").get<std::string>());
  s.P = j.at("P").get<int>();
  s.Q = j.at("Q").get<int>();
  s.K = j.at("K").get<int>();
  s.structure = structure_from(j.at("structure").get<std::string>());
  s.family = family_from(j.at("family").get<std::string>());
  s.validate();
  return s;
}

std::string coef_entry_suffix(int n, Structure structure, int e) {
  char buf[32];
  if (structure == Structure::full) {
    std::snprintf(buf, sizeof(buf), "[%d,%d]", e % n + 1, e / n + 1);
  } else {
    std::snprintf(buf, sizeof(buf), "[%d,%d]", e + 1, e + 1);
  }
  return buf;
}

std::vector<std::string> param_names(const ModelShape& shape) {
  std::vector<std::string> names;
  names.reserve(static_cast<std::size_t>(shape.dim()));
  char buf[64];
  for (int jcol = 0; jcol < shape.n; ++jcol) {
    for (int i = jcol; i < shape.n; ++i) {
      std::snprintf(buf, sizeof(buf), "omega[%d,%d]", i + 1, jcol + 1);
      names.emplace_back(buf);
    }
  }
  const int per = shape.per_coef();
  if (shape.dyn == Dynamics::har) {
    for (const char* label : {"Ad", "Aw", "Am"}) {
      for (int e = 0; e < per; ++e) {
        names.emplace_back(std::string(label) + coef_entry_suffix(shape.n, shape.structure, e));
      }
    }
  } else {
    for (const char* label : {"A", "B"}) {
      const int lag_count = label[0] == 'A' ? shape.P : shape.Q;
      for (int k = 0; k < shape.K; ++k) {
        for (int lag = 0; lag < lag_count; ++lag) {
          for (int e = 0; e < per; ++e) {
            std::snprintf(buf, sizeof(buf), "%s%d%d", label, k + 1, lag + 1);
            names.emplace_back(buf + coef_entry_suffix(shape.n, shape.structure, e));
          }
        }
      }
    }
  }
  names.emplace_back("nu1");
  if (shape.n_nu() == 2) names.emplace_back("nu2");
  return names;
}

json fit_to_json(const FitResult& fit) {
  json j;
  j["schema"] = "rcov-fit v1";
  j["model"] = shape_to_json(fit.shape);
  j["names"] = param_names(fit.shape);
  j["theta"] = vector_to_json(fit.theta);
  j["se"] = vector_to_json(fit.se);
  j["cov"] = matrix_to_json(fit.cov);
  j["nll"] = num_or_null(fit.nll);
  j["loglik"] = num_or_null(fit.loglik);
  j["converged"] = fit.converged;
  j["iterations"] = fit.iterations;
  j["evaluations"] = fit.evaluations;
  j["restarts_used"] = fit.restarts_used;
  j["grad_norm"] = num_or_null(fit.grad_norm);
  j["stationarity_rho"] = num_or_null(fit.stationarity_rho);
  j["vt"] = fit.vt;
  if (fit.vt) {
    j["s_target"] = matrix_to_json(fit.s_target);
    j["joint_cov_vt"] = matrix_to_json(fit.joint_cov_vt);
  }
  j["flags"] = fit.flags;
  return j;
}

FitResult fit_from_json(const json& j, const MatrixSeries& series) {
  if (!j.is_object() || j.value("schema", std::string()) != "rcov-fit v1") {
    throw std::invalid_argument("fit report: missing or unsupported schema tag");
  }
  FitResult fit;
  fit.shape = shape_from_json(j.at("model"));
  if (series.n != fit.shape.n) {
    throw std::invalid_argument("fit report: model dimension does not match the series");
  }
  fit.theta = vector_from_json(j.at("theta"), "fit theta");
  if (fit.theta.size() != fit.shape.dim()) {
    throw std::invalid_argument("fit report: theta length does not match the model shape");
  }
  fit.se = vector_from_json(j.value("se", json::array()), "fit se");
  fit.cov = matrix_from_json(j.value("cov", json::array()), "fit cov");
  fit.nll = num_from(j.value("nll", json(nullptr)));
  fit.loglik = num_from(j.value("loglik", json(nullptr)));
  fit.converged = j.value("converged", false);
  fit.iterations = j.value("iterations", 0);
  fit.evaluations = j.value("evaluations", 0);
  fit.restarts_used = j.value("restarts_used", 0);
  fit.grad_norm = num_from(j.value("grad_norm", json(nullptr)));
  fit.stationarity_rho = num_from(j.value("stationarity_rho", json(nullptr)));
  fit.vt = j.value("vt", false);
  if (fit.vt) {
    fit.s_target = matrix_from_json(j.at("s_target"), "fit s_target");
    fit.joint_cov_vt = matrix_from_json(j.at("joint_cov_vt"), "fit joint_cov_vt");
  }
  if (j.contains("flags")) fit.flags = j["flags"].get<std::vector<std::string>>();
  fit.init = sample_mean_init(series, fit.shape.lags());
  return fit;
}

// ---------------------------------------------------------------------------
// output plumbing

void emit_report(const std::string& out_path, const json& report) {
  const std::string text = report.dump(2) + "\n";
  if (out_path.empty()) {
    std::cout << text;
  } else {
    write_text_file(out_path, text);
    std::cout << "report written to " << out_path << "\n";
  }
}

// ---------------------------------------------------------------------------
// subcommand option bags

struct GlobalOpts {
  std::uint64_t seed = 1;
  int threads = 1;
  std::string out;
  double ridge = 0.0;
};

MatrixSeries load_series(const std::string& path, const GlobalOpts& g, LoadReport* rep) {
  LoadOptions lo;
  lo.ridge = g.ridge;
  return read_rcov(path, lo, rep);
}

json load_report_json(const std::string& path, const LoadReport& rep) {
  return json{{"path", path}, {"repaired", rep.repaired}, {"ridge", rep.ridge}};
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateOpts {
  std::string spec_path;
  std::string design;     // "" or "study"
  double nu1 = 10.0;
  double nu2 = 8.0;
  double lambda = 0.0;
  int T = 1000;
  int burnin = 500;
  std::string manifest;
};

int cmd_simulate(const GlobalOpts& g, const SimulateOpts& o) {
  if (g.out.empty()) throw std::invalid_argument("simulate: --out <path> is required");
  AnySpec spec;
  if (!o.spec_path.empty()) {
    if (!o.design.empty()) {
      throw std::invalid_argument("simulate: give either --spec or --design, not both");
    }
    spec = spec_from_json(parse_json(read_text_file(o.spec_path), "spec file"));
  } else if (o.design == "study") {
    spec = study_dgp(o.nu1, o.nu2, o.lambda);
  } else if (o.design.empty()) {
    throw std::invalid_argument("simulate: need --spec <file> or --design study");
  } else {
    throw std::invalid_argument("simulate: unknown design: " + o.design);
  }
  if (o.T < 1) throw std::invalid_argument("simulate: T must be positive");
  if (o.burnin < 0) throw std::invalid_argument("simulate: burnin must be nonnegative");

  RngStream rng(g.seed, 0);
  SimulateInfo info;
  MatrixSeries series = std::visit(
      [&](const auto& s) { return simulate(s, o.T, o.burnin, rng, &info); }, spec);
  write_rcov(g.out, series);

  json manifest;
  manifest["schema"] = "rcov-sim v1";
  manifest["seed"] = g.seed;
  manifest["T"] = o.T;
  manifest["burnin"] = o.burnin;
  manifest["rho"] = num_or_null(info.rho);
  manifest["stationary"] = info.stationary;
  manifest["spec"] = spec_to_json(spec);
  manifest["output"] = g.out;
  const std::string manifest_path = o.manifest.empty() ? g.out + ".manifest.json" : o.manifest;
  write_text_file(manifest_path, manifest.dump(2) + "\n");

  std::cout << "wrote " << g.out << " (n=" << series.n << ", T=" << series.T()
            << "), rho=" << info.rho << ", manifest " << manifest_path << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// fit

struct FitCmdOpts {
  std::string input;
  std::string family = "matrix_f";
  bool har = false;
  int P = 1, Q = 1, K = 1;
  std::string structure = "diagonal";
  bool vt = false;
  double grad_tol = 1e-6;
  int max_iter = 2000;
  int restarts = 5;
};

FitOptions make_fit_options(const FitCmdOpts& o, const GlobalOpts& g) {
  FitOptions fo;
  fo.family = family_from(o.family);
  fo.dyn = o.har ? Dynamics::har : Dynamics::bekk;
  fo.structure = structure_from(o.structure);
  fo.P = o.P;
  fo.Q = o.Q;
  fo.K = o.K;
  fo.grad_tol = o.grad_tol;
  fo.max_iter = o.max_iter;
  fo.restarts = o.restarts;
  fo.seed = g.seed;
  return fo;
}

void print_fit_summary(const FitResult& fit) {
  const std::vector<std::string> names = param_names(fit.shape);
  std::printf("%-14s %12s %12s\n", "parameter", "estimate", "std.err");
  for (int i = 0; i < fit.theta.size(); ++i) {
    const double se = i < fit.se.size() ? fit.se[i] : std::numeric_limits<double>::quiet_NaN();
    std::printf("%-14s %12.6f %12.6f\n", names[static_cast<std::size_t>(i)].c_str(),
                fit.theta[i], se);
  }
  std::printf("loglik %.6f  rho %.4f  converged %s\n", fit.loglik, fit.stationarity_rho,
              fit.converged ? "yes" : "no");
}

int cmd_fit(const GlobalOpts& g, const FitCmdOpts& o) {
  LoadReport lrep;
  MatrixSeries series = load_series(o.input, g, &lrep);
  FitOptions fo = make_fit_options(o, g);
  FitResult fit = o.vt ? fit_vt(series, fo) : fit_mle(series, fo);

  json report = fit_to_json(fit);
  report["input"] = load_report_json(o.input, lrep);
  if (fit.shape.structure == Structure::diagonal) {
    try {
      const AnySpec spec = fit.spec();
      json pj = json::array();
      for (int i = 0; i < fit.shape.n; ++i) {
        pj.push_back(std::visit([&](const auto& s) { return persistence(s, i); }, spec));
      }
      report["persistence"] = std::move(pj);
    } catch (const std::invalid_argument&) {
      // persistence is only defined for single-group diagonal recursions
    }
  }
  print_fit_summary(fit);
  emit_report(g.out, report);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// diagnose

struct DiagnoseOpts {
  std::string input;
  std::string fit_path;
  std::vector<int> lags = {2, 3, 4, 5, 6};
  bool scalar_square = false;
  double fd_step = 1e-5;
};

int cmd_diagnose(const GlobalOpts& g, const DiagnoseOpts& o) {
  LoadReport lrep;
  MatrixSeries series = load_series(o.input, g, &lrep);
  FitResult fit = fit_from_json(parse_json(read_text_file(o.fit_path), "fit report"), series);

  DiagnoseOptions dopts;
  dopts.reading =
      o.scalar_square ? InnerVarianceReading::scalar_square : InnerVarianceReading::outer_trace;
  dopts.fd_step = o.fd_step;
  const std::vector<PortmanteauResult> results =
      fit.vt ? pi_v_tests(series, fit, o.lags, dopts) : pi_tests(series, fit, o.lags, dopts);

  std::printf("%-4s %12s %10s %5s\n", "l", "statistic", "p-value", "dof");
  json table = json::array();
  for (const PortmanteauResult& r : results) {
    std::printf("%-4d %12.4f %10.4f %5d\n", r.lags, r.stat, r.pvalue, r.dof);
    json row;
    row["lags"] = r.lags;
    row["statistic"] = num_or_null(r.stat);
    row["pvalue"] = num_or_null(r.pvalue);
    row["dof"] = r.dof;
    row["pinv_used"] = r.pinv_used;
    row["autocovs"] = vector_to_json(r.autocovs);
    row["flags"] = r.flags;
    table.push_back(std::move(row));
  }
  json report;
  report["schema"] = "rcov-diagnose v1";
  report["input"] = load_report_json(o.input, lrep);
  report["fit"] = o.fit_path;
  report["vt"] = fit.vt;
  report["tests"] = std::move(table);
  emit_report(g.out, report);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// forecast

struct ForecastOpts {
  std::string input;
  std::vector<std::string> models = {"cbf", "sample_mean"};
  int window = 800;
  std::vector<int> horizons = {1, 5, 10};
  int refit_every = 1;
  std::string dm_ref;
  int factor_r = -1;
  FitCmdOpts model_flags;   // shared P/Q/K/structure/tolerances for model tokens
};

std::shared_ptr<Forecaster> make_forecaster(const std::string& token, const ForecastOpts& o,
                                            const GlobalOpts& g) {
  if (token == "sample_mean" || token == "mean") return std::make_shared<SampleMeanForecaster>();
  if (token == "var_har") return std::make_shared<VarHarForecaster>();
  std::string t = token;
  int factor_r = 0;
  if (t.rfind("f:", 0) == 0) {
    factor_r = o.factor_r == 0 ? -1 : o.factor_r;
    t = t.substr(2);
  }
  bool vt = false;
  if (t.rfind("vt-", 0) == 0) {
    vt = true;
    t = t.substr(3);
  }
  FitCmdOpts fc = o.model_flags;
  fc.har = false;
  if (t.size() > 4 && t.compare(t.size() - 4, 4, "-har") == 0) {
    fc.har = true;
    t = t.substr(0, t.size() - 4);
  }
  if (t == "cbf") {
    fc.family = "matrix_f";
  } else if (t == "caw") {
    fc.family = "wishart";
  } else {
    throw std::invalid_argument("forecast: unknown model token: " + token);
  }
  FitOptions fo = make_fit_options(fc, g);
  fo.compute_cov = false;   // rolling refits only need point estimates
  return std::make_shared<CbfForecaster>(token, fo, vt, factor_r);
}

int cmd_forecast(const GlobalOpts& g, const ForecastOpts& o) {
  LoadReport lrep;
  MatrixSeries series = load_series(o.input, g, &lrep);
  if (o.models.empty()) throw std::invalid_argument("forecast: need at least one model");

  std::vector<std::shared_ptr<Forecaster>> models;
  models.reserve(o.models.size());
  for (const std::string& token : o.models) models.push_back(make_forecaster(token, o, g));

  RollingConfig cfg;
  cfg.window = o.window;
  cfg.horizons = o.horizons;
  cfg.refit_every = o.refit_every;
  EvalReport eval = rolling_eval(series, cfg, models);

  const std::string ref_name = o.dm_ref.empty() ? eval.model_names.front() : o.dm_ref;
  int ref = -1;
  for (std::size_t m = 0; m < eval.model_names.size(); ++m) {
    if (eval.model_names[m] == ref_name) ref = static_cast<int>(m);
  }
  if (ref < 0) throw std::invalid_argument("forecast: --dm-ref names an unknown model");

  json jmodels = json::array();
  std::printf("%-18s", "model");
  for (int h : eval.horizons) std::printf("  h=%-3d frob    spec", h);
  std::printf("\n");
  for (std::size_t m = 0; m < eval.model_names.size(); ++m) {
    json jm;
    jm["name"] = eval.model_names[m];
    json jh = json::array();
    std::printf("%-18s", eval.model_names[m].c_str());
    for (std::size_t hi = 0; hi < eval.horizons.size(); ++hi) {
      const LossCell& cell = eval.cells[m][hi];
      std::printf("  %10.6f %7.4f", cell.avg_frobenius, cell.avg_spectral);
      jh.push_back(json{{"horizon", eval.horizons[hi]},
                        {"avg_frobenius", num_or_null(cell.avg_frobenius)},
                        {"avg_spectral", num_or_null(cell.avg_spectral)},
                        {"count", cell.count}});
    }
    std::printf("\n");
    jm["losses"] = std::move(jh);
    jmodels.push_back(std::move(jm));
  }

  json jdm = json::array();
  for (std::size_t m = 0; m < eval.model_names.size(); ++m) {
    if (static_cast<int>(m) == ref) continue;
    for (std::size_t hi = 0; hi < eval.horizons.size(); ++hi) {
      const int h = eval.horizons[hi];
      for (const char* kind : {"frobenius", "spectral"}) {
        const bool frob = kind[0] == 'f';
        const std::vector<double>& la =
            frob ? eval.cells[static_cast<std::size_t>(ref)][hi].frobenius
                 : eval.cells[static_cast<std::size_t>(ref)][hi].spectral;
        const std::vector<double>& lb = frob ? eval.cells[m][hi].frobenius : eval.cells[m][hi].spectral;
        json row;
        row["model"] = eval.model_names[m];
        row["reference"] = ref_name;
        row["horizon"] = h;
        row["loss"] = kind;
        try {
          const DmResult dm = dm_test(la, lb, h);
          row["statistic"] = num_or_null(dm.statistic);
          row["pvalue"] = num_or_null(dm.pvalue);
          row["bartlett_fallback"] = dm.bartlett_fallback;
        } catch (const std::exception& e) {
          row["statistic"] = nullptr;
          row["pvalue"] = nullptr;
          row["error"] = e.what();
        }
        jdm.push_back(std::move(row));
      }
    }
  }

  json report;
  report["schema"] = "rcov-forecast v1";
  report["input"] = load_report_json(o.input, lrep);
  report["config"] = json{{"window", cfg.window},
                          {"horizons", cfg.horizons},
                          {"refit_every", cfg.refit_every},
                          {"seed", g.seed}};
  report["models"] = std::move(jmodels);
  report["dm"] = std::move(jdm);
  report["failed_windows"] = eval.failed_windows;
  report["failed_origins"] = eval.failed_origins;
  report["flags"] = eval.flags;
  emit_report(g.out, report);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// factor

struct FactorOpts {
  std::string input;
  int r = 0;                // 0: pick by eigenvalue ratios
  std::string ratios_csv;
  std::string yf_out;
};

int cmd_factor(const GlobalOpts& g, const FactorOpts& o) {
  LoadReport lrep;
  MatrixSeries series = load_series(o.input, g, &lrep);
  RankDiagnostics diag = eigen_ratios(series);
  const int r = o.r > 0 ? o.r : diag.suggested_r;
  FactorDecomp decomp = extract_factors(series, r);

  if (!o.ratios_csv.empty()) {
    std::ostringstream csv;
    csv << "i,eigenvalue,ratio\n";
    for (Eigen::Index i = 0; i < diag.eigenvalues.size(); ++i) {
      csv << (i + 1) << "," << format_double(diag.eigenvalues[i]) << ",";
      if (i < diag.ratios.size()) csv << format_double(diag.ratios[i]);
      csv << "\n";
    }
    write_text_file(o.ratios_csv, csv.str());
  }
  if (!o.yf_out.empty()) write_rcov(o.yf_out, decomp.yf);

  std::printf("%-4s %14s %10s\n", "i", "eigenvalue", "ratio");
  for (Eigen::Index i = 0; i < diag.eigenvalues.size(); ++i) {
    if (i < diag.ratios.size()) {
      std::printf("%-4d %14.6f %10.4f\n", static_cast<int>(i + 1), diag.eigenvalues[i],
                  diag.ratios[i]);
    } else {
      std::printf("%-4d %14.6f %10s\n", static_cast<int>(i + 1), diag.eigenvalues[i], "");
    }
  }
  std::printf("suggested r = %d, extracted r = %d\n", diag.suggested_r, r);

  json report;
  report["schema"] = "rcov-factor v1";
  report["input"] = load_report_json(o.input, lrep);
  report["eigenvalues"] = vector_to_json(diag.eigenvalues);
  report["ratios"] = vector_to_json(diag.ratios);
  report["suggested_r"] = diag.suggested_r;
  report["r"] = r;
  report["f_hat"] = matrix_to_json(decomp.f_hat);
  report["y0_hat"] = matrix_to_json(decomp.y0_hat);
  if (!o.yf_out.empty()) report["yf"] = o.yf_out;
  if (!o.ratios_csv.empty()) report["ratios_csv"] = o.ratios_csv;
  emit_report(g.out, report);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// replicate

struct ReplicateOpts {
  std::string study = "table1";
  int reps = 0;             // 0: study default
  int T = 1000;
  int burnin = 500;
  double nu1 = 10.0;
  double nu2 = 8.0;
  std::vector<double> lambdas = {0.0, 0.05, 0.1, 0.15, 0.2};
  std::vector<int> lags = {2, 3, 4, 5, 6};
  double alpha = 0.05;
  bool scalar_square = false;
};

json summary_to_json(const ParamSummary& s) {
  return json{{"name", s.name},
              {"truth", num_or_null(s.truth)},
              {"bias", num_or_null(s.bias)},
              {"esd", num_or_null(s.esd)},
              {"asd_mean", num_or_null(s.asd_mean)},
              {"coverage95", num_or_null(s.coverage95)},
              {"paper_bias", num_or_null(s.paper_bias)},
              {"paper_esd", num_or_null(s.paper_esd)},
              {"paper_asd", num_or_null(s.paper_asd)}};
}

void print_table1_block(const char* title, const std::vector<ParamSummary>& rows) {
  std::printf("%s\n%-12s %9s %9s %9s %9s %9s %9s %9s\n", title, "parameter", "bias", "ref.bias",
              "esd", "ref.esd", "asd", "ref.asd", "cover95");
  for (const ParamSummary& s : rows) {
    std::printf("%-12s %9.4f %9.4f %9.4f %9.4f %9.4f %9.4f %9.4f\n", s.name.c_str(), s.bias,
                s.paper_bias, s.esd, s.paper_esd, s.asd_mean, s.paper_asd, s.coverage95);
  }
}

int cmd_replicate(const GlobalOpts& g, const ReplicateOpts& o) {
  json report;
  report["schema"] = "rcov-replicate v1";
  report["study"] = o.study;
  if (o.study == "table1") {
    Table1Config cfg;
    cfg.T = o.T;
    if (o.reps > 0) cfg.reps = o.reps;
    cfg.nu1 = o.nu1;
    cfg.nu2 = o.nu2;
    cfg.burnin = o.burnin;
    cfg.seed = g.seed;
    cfg.threads = g.threads;
    Table1Result res = run_table1(cfg);
    print_table1_block("full likelihood", res.mle);
    print_table1_block("variance targeted", res.vt);
    std::printf("replications used %d, failures %d\n", res.reps_used, res.failures);
    report["config"] = json{{"T", cfg.T},       {"reps", cfg.reps},   {"nu1", cfg.nu1},
                            {"nu2", cfg.nu2},   {"burnin", cfg.burnin}, {"seed", cfg.seed},
                            {"threads", cfg.threads}};
    json jm = json::array(), jv = json::array();
    for (const ParamSummary& s : res.mle) jm.push_back(summary_to_json(s));
    for (const ParamSummary& s : res.vt) jv.push_back(summary_to_json(s));
    report["mle"] = std::move(jm);
    report["vt"] = std::move(jv);
    report["reps_used"] = res.reps_used;
    report["failures"] = res.failures;
  } else if (o.study == "table2") {
    Table2Config cfg;
    cfg.T = o.T;
    if (o.reps > 0) cfg.reps = o.reps;
    cfg.lambdas = o.lambdas;
    cfg.lags = o.lags;
    cfg.alpha = o.alpha;
    cfg.burnin = o.burnin;
    cfg.seed = g.seed;
    cfg.threads = g.threads;
    cfg.reading =
        o.scalar_square ? InnerVarianceReading::scalar_square : InnerVarianceReading::outer_trace;
    Table2Result res = run_table2(cfg);
    std::printf("%-8s %-4s %9s %9s %9s %9s %6s\n", "lambda", "l", "rej.", "ref.", "rej.(vt)",
                "ref.(vt)", "reps");
    json cells = json::array();
    for (const Table2Cell& c : res.cells) {
      std::printf("%-8.2f %-4d %9.4f %9.4f %9.4f %9.4f %6d\n", c.lambda, c.lags, c.reject_pi,
                  c.paper_pi, c.reject_piv, c.paper_piv, c.reps_used);
      cells.push_back(json{{"lambda", c.lambda},
                           {"lags", c.lags},
                           {"reject_pi", num_or_null(c.reject_pi)},
                           {"reject_piv", num_or_null(c.reject_piv)},
                           {"paper_pi", num_or_null(c.paper_pi)},
                           {"paper_piv", num_or_null(c.paper_piv)},
                           {"reps_used", c.reps_used}});
    }
    report["config"] = json{{"T", cfg.T},         {"reps", cfg.reps},   {"lambdas", cfg.lambdas},
                            {"lags", cfg.lags},   {"alpha", cfg.alpha}, {"burnin", cfg.burnin},
                            {"seed", cfg.seed},   {"threads", cfg.threads}};
    report["cells"] = std::move(cells);
    report["failures"] = res.failures;
  } else {
    throw std::invalid_argument("replicate: unknown study: " + o.study);
  }
  emit_report(g.out, report);
  return kExitOk;
}

}  // namespace

// ---------------------------------------------------------------------------
// public helpers

AnySpec spec_from_json_text(const std::string& text) {
  return spec_from_json(parse_json(text, "spec"));
}

std::string spec_to_json_text(const AnySpec& spec) { return spec_to_json(spec).dump(2) + "\n"; }

std::string fit_report_to_json_text(const FitResult& fit) { return fit_to_json(fit).dump(2) + "\n"; }

FitResult fit_report_from_json_text(const std::string& text, const MatrixSeries& series) {
  return fit_from_json(parse_json(text, "fit report"), series);
}

// ---------------------------------------------------------------------------
// argument wiring

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Matrix-variate conditional-covariance toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "Read options from an INI file (command line overrides)");

  GlobalOpts g;
  app.add_option("--seed", g.seed, "RNG seed")->capture_default_str();
  app.add_option("--threads", g.threads, "Worker threads for replication studies")
      ->capture_default_str();
  app.add_option("--out", g.out, "Write the JSON report/series here (default: stdout)");
  app.add_option("--ridge", g.ridge,
                 "Diagonal repair added to non-SPD input records, recorded in the report")
      ->capture_default_str();

  SimulateOpts so;
  CLI::App* sim = app.add_subcommand("simulate", "Simulate a realized-covariance series");
  sim->add_option("--spec", so.spec_path, "Model specification JSON file");
  sim->add_option("--design", so.design, "Built-in design name (study)");
  sim->add_option("--nu1", so.nu1, "Design degrees of freedom (first)")->capture_default_str();
  sim->add_option("--nu2", so.nu2, "Design degrees of freedom (second)")->capture_default_str();
  sim->add_option("--lambda", so.lambda, "Design second-lag quadratic weight")->capture_default_str();
  sim->add_option("--T", so.T, "Observations to keep")->capture_default_str();
  sim->add_option("--burnin", so.burnin, "Burn-in length")->capture_default_str();
  sim->add_option("--manifest", so.manifest, "Manifest path (default: <out>.manifest.json)");

  FitCmdOpts fco;
  CLI::App* fit = app.add_subcommand("fit", "Estimate the conditional model");
  fit->add_option("--input", fco.input, "Input series file")->required();
  fit->add_option("--family", fco.family, "matrix_f | wishart")->capture_default_str();
  fit->add_flag("--har", fco.har, "HAR lag structure");
  fit->add_option("--P", fco.P, "Observation lags")->capture_default_str();
  fit->add_option("--Q", fco.Q, "Covariance lags")->capture_default_str();
  fit->add_option("--K", fco.K, "Summands per lag")->capture_default_str();
  fit->add_option("--structure", fco.structure, "full | diagonal")->capture_default_str();
  fit->add_flag("--vt", fco.vt, "Two-step variance-targeted estimator");
  fit->add_option("--grad-tol", fco.grad_tol, "Relative gradient tolerance")
      ->capture_default_str();
  fit->add_option("--max-iter", fco.max_iter, "Iteration cap")->capture_default_str();
  fit->add_option("--restarts", fco.restarts, "Jittered restarts")->capture_default_str();

  DiagnoseOpts diag;
  CLI::App* dg = app.add_subcommand("diagnose", "Portmanteau adequacy tests for a fitted model");
  dg->add_option("--input", diag.input, "Input series file")->required();
  dg->add_option("--fit", diag.fit_path, "Fit report JSON produced by `fit`")->required();
  dg->add_option("--lags", diag.lags, "Lag counts to test")->capture_default_str();
  dg->add_flag("--scalar-square", diag.scalar_square,
               "Use the additive squared-mean variance instead of the composed form");
  dg->add_option("--fd-step", diag.fd_step, "Residual sensitivity step")->capture_default_str();

  ForecastOpts fo;
  CLI::App* fc = app.add_subcommand("forecast", "Rolling out-of-sample comparison");
  fc->add_option("--input", fo.input, "Input series file")->required();
  fc->add_option("--models", fo.models,
                 "Model tokens: [f:][vt-]cbf|caw[-har], var_har, sample_mean")
      ->capture_default_str();
  fc->add_option("--window", fo.window, "Estimation window length")->capture_default_str();
  fc->add_option("--horizons", fo.horizons, "Forecast horizons")->capture_default_str();
  fc->add_option("--refit-every", fo.refit_every, "Refit cadence")->capture_default_str();
  fc->add_option("--dm-ref", fo.dm_ref, "Reference model for the accuracy tests");
  fc->add_option("--factor-r", fo.factor_r, "Factor count for f: tokens (-1 = by ratios)")
      ->capture_default_str();
  fc->add_option("--P", fo.model_flags.P, "Observation lags")->capture_default_str();
  fc->add_option("--Q", fo.model_flags.Q, "Covariance lags")->capture_default_str();
  fc->add_option("--K", fo.model_flags.K, "Summands per lag")->capture_default_str();
  fc->add_option("--structure", fo.model_flags.structure, "full | diagonal")
      ->capture_default_str();
  fc->add_option("--restarts", fo.model_flags.restarts, "Jittered restarts per refit")
      ->capture_default_str();

  FactorOpts fa;
  CLI::App* fx = app.add_subcommand("factor", "Eigenvalue-ratio rank choice and factor extraction");
  fx->add_option("--input", fa.input, "Input series file")->required();
  fx->add_option("--r", fa.r, "Factor count (0 = choose by eigenvalue ratios)")
      ->capture_default_str();
  fx->add_option("--ratios-csv", fa.ratios_csv, "Write the eigenvalue/ratio table as CSV");
  fx->add_option("--yf", fa.yf_out, "Write the projected factor series here");

  ReplicateOpts ro;
  CLI::App* rp = app.add_subcommand("replicate", "Monte Carlo studies with published references");
  rp->add_option("--study", ro.study, "table1 | table2")->capture_default_str();
  rp->add_option("--reps", ro.reps, "Replications (0 = study default)")->capture_default_str();
  rp->add_option("--T", ro.T, "Sample length")->capture_default_str();
  rp->add_option("--burnin", ro.burnin, "Burn-in length")->capture_default_str();
  rp->add_option("--nu1", ro.nu1, "Design degrees of freedom (first)")->capture_default_str();
  rp->add_option("--nu2", ro.nu2, "Design degrees of freedom (second)")->capture_default_str();
  rp->add_option("--lambdas", ro.lambdas, "Misspecification second-lag weights")->capture_default_str();
  rp->add_option("--lags", ro.lags, "Lag counts to test")->capture_default_str();
  rp->add_option("--alpha", ro.alpha, "Nominal test level")->capture_default_str();
  rp->add_flag("--scalar-square", ro.scalar_square,
               "Use the additive squared-mean variance instead of the composed form");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (sim->parsed()) return cmd_simulate(g, so);
    if (fit->parsed()) return cmd_fit(g, fco);
    if (dg->parsed()) return cmd_diagnose(g, diag);
    if (fc->parsed()) return cmd_forecast(g, fo);
    if (fx->parsed()) return cmd_factor(g, fa);
    if (rp->parsed()) return cmd_replicate(g, ro);
    std::cerr << "error: no subcommand given\n";
    return kExitValidation;
  } catch (const io_error& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid request: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  }
}

}  // namespace cbf
