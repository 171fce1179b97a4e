#include "cbf/replicate.hpp"

#include "cbf/specfun.hpp"

#include <atomic>
#include <cmath>
#include <thread>

namespace cbf {

const std::array<double, 14> kPaperMleBias = {0.0320, 0.0160, -0.0014, -0.0029, -0.0009,
                                              -0.0151, -0.0112, -0.0102, -0.0005, 0.0028,
                                              0.0057,  -0.0009, 0.0037,  0.0053};
const std::array<double, 14> kPaperMleEsd = {0.3914, 0.2452, 0.0255, 0.0249, 0.0240,
                                             0.1170, 0.0964, 0.0728, 0.0600, 0.0188,
                                             0.0337, 0.0419, 0.0248, 0.0601};
const std::array<double, 14> kPaperMleAsd = {0.4111, 0.2563, 0.0258, 0.0259, 0.0241,
                                             0.1103, 0.0892, 0.0652, 0.0586, 0.0179,
                                             0.0323, 0.0402, 0.0232, 0.0562};
const std::array<double, 14> kPaperVtBias = {-0.0080, 0.0382, -0.0005, -0.0030, 0.0000,
                                             -0.0130, -0.0088, -0.0096, -0.0020, 0.0020,
                                             0.0047,  -0.0030, 0.0033,  0.0040};
const std::array<double, 14> kPaperVtEsd = {0.3884, 0.2607, 0.0263, 0.0272, 0.0255,
                                            0.1165, 0.0956, 0.0728, 0.0614, 0.0229,
                                            0.0366, 0.0433, 0.0291, 0.0615};
const std::array<double, 8> kPaperVtAsd = {0.4024, 0.2619, 0.0266, 0.0282,
                                           0.0258, 0.1207, 0.1046, 0.0742};

namespace {

// Published T=1000 rejection rates, rows over lambda, columns over l=2..6.
struct PaperRates {
  double lambda;
  double pi[5];
  double piv[5];
};
constexpr PaperRates kPaperTable2[] = {
    {0.00, {0.043, 0.048, 0.052, 0.047, 0.049}, {0.037, 0.045, 0.054, 0.048, 0.054}},
    {0.05, {0.048, 0.051, 0.058, 0.060, 0.061}, {0.045, 0.048, 0.053, 0.052, 0.062}},
    {0.10, {0.238, 0.210, 0.196, 0.196, 0.179}, {0.238, 0.211, 0.199, 0.199, 0.183}},
    {0.15, {0.885, 0.847, 0.818, 0.784, 0.768}, {0.854, 0.818, 0.793, 0.762, 0.746}},
    {0.20, {0.976, 0.972, 0.964, 0.961, 0.956}, {0.924, 0.916, 0.893, 0.889, 0.887}},
};

// Deterministic worker pool: tasks are indexed, outputs land in slots keyed
// by the index, so the merged result does not depend on the thread count.
void run_parallel(int n_tasks, int threads, const std::function<void(int)>& task) {
  threads = std::max(1, threads);
  if (threads == 1) {
    for (int i = 0; i < n_tasks; ++i) task(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(threads));
  for (int w = 0; w < threads; ++w) {
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < n_tasks; i = next.fetch_add(1)) task(i);
    });
  }
  for (auto& th : pool) th.join();
}

FitOptions study_fit_options() {
  FitOptions opts;
  opts.family = Family::matrix_f;
  opts.dyn = Dynamics::bekk;
  opts.structure = Structure::diagonal;
  opts.P = 1;
  opts.Q = 1;
  opts.K = 1;
  return opts;
}

ParamSummary summarize(const std::string& name, double truth, const std::vector<double>& est,
                       const std::vector<double>& asd) {
  ParamSummary s;
  s.name = name;
  s.truth = truth;
  const int n = static_cast<int>(est.size());
  double mean = 0.0;
  for (double v : est) mean += v;
  mean /= n;
  s.bias = mean - truth;
  double var = 0.0;
  for (double v : est) var += (v - mean) * (v - mean);
  s.esd = n > 1 ? std::sqrt(var / (n - 1)) : 0.0;
  double asd_sum = 0.0;
  int asd_n = 0, cover = 0, cover_n = 0;
  for (size_t i = 0; i < est.size(); ++i) {
    const double a = asd[i];
    if (std::isfinite(a)) {
      asd_sum += a;
      ++asd_n;
      if (std::abs(est[i] - truth) <= 1.96 * a) ++cover;
      ++cover_n;
    }
  }
  s.asd_mean = asd_n > 0 ? asd_sum / asd_n : std::numeric_limits<double>::quiet_NaN();
  s.coverage95 = cover_n > 0 ? static_cast<double>(cover) / cover_n
                             : std::numeric_limits<double>::quiet_NaN();
  return s;
}

}  // namespace

CbfSpec study_dgp(double nu1, double nu2, double lambda) {
  CbfSpec spec;
  spec.n = 3;
  spec.K = 1;
  spec.P = lambda != 0.0 ? 2 : 1;
  spec.Q = 1;
  spec.structure = Structure::diagonal;
  MatrixXd omega(3, 3);
  omega << 0.5, 0.2, 0.3, 0.2, 0.5, 0.25, 0.3, 0.25, 0.5;
  spec.omega = SpdMatrix(omega);
  MatrixXd a1 = VectorXd::Zero(3).asDiagonal();
  a1(0, 0) = 0.4;
  a1(1, 1) = 0.55;
  a1(2, 2) = 0.5;
  MatrixXd b1 = MatrixXd::Zero(3, 3);
  b1(0, 0) = 0.4;
  b1(1, 1) = 0.3;
  b1(2, 2) = 0.5;
  spec.A.push_back({a1});
  // The second-lag loading is sqrt(lambda) I, so the recursion gains the term
  // lambda * Y_{t-2}: the published size/power table is only consistent with
  // lambda entering the covariance recursion linearly (a diag{lambda} loading
  // would contribute lambda^2 * Y_{t-2}, which the one-lag fit absorbs almost
  // entirely through B, leaving next to no rejection power at any tabulated
  // lambda).
  if (spec.P == 2) spec.A[0].push_back(std::sqrt(lambda) * MatrixXd::Identity(3, 3));
  spec.B.push_back({b1});
  spec.nu1 = nu1;
  spec.nu2 = nu2;
  spec.validate();
  return spec;
}

std::vector<int> report_order(const ModelShape& shape) {
  std::vector<int> order;
  order.push_back(shape.dim_gamma());                         // nu1
  if (shape.n_nu() == 2) order.push_back(shape.dim_gamma() + 1);  // nu2
  for (int c = 0; c < shape.dim_u(); ++c) order.push_back(shape.n_omega() + c);
  for (int w = 0; w < shape.n_omega(); ++w) order.push_back(w);
  return order;
}

Table1Result run_table1(const Table1Config& cfg) {
  const CbfSpec dgp = study_dgp(cfg.nu1, cfg.nu2);
  const ModelShape shape = [] {
    ModelShape s;
    s.n = 3;
    s.structure = Structure::diagonal;
    return s;
  }();
  const std::vector<int> order = report_order(shape);
  const int d = static_cast<int>(order.size());

  VectorXd truth_packed = pack(AnySpec{dgp}, shape);
  std::vector<double> truth(static_cast<size_t>(d));
  for (int i = 0; i < d; ++i) truth[static_cast<size_t>(i)] = truth_packed(order[static_cast<size_t>(i)]);

  struct RepOut {
    bool ok = false;
    VectorXd est_mle, asd_mle, est_vt, asd_vt;
  };
  std::vector<RepOut> outs(static_cast<size_t>(cfg.reps));

  run_parallel(cfg.reps, cfg.threads, [&](int r) {
    RngStream rng(cfg.seed, static_cast<std::uint64_t>(r));
    try {
      const MatrixSeries series = simulate(dgp, cfg.T, cfg.burnin, rng);
      FitOptions opts = study_fit_options();
      opts.seed = cfg.seed ^ (0x9e3779b97f4a7c15ULL + static_cast<std::uint64_t>(r));
      const FitResult mle = fit_mle(series, opts);
      const FitResult vt = fit_vt(series, opts);
      RepOut& o = outs[static_cast<size_t>(r)];
      o.est_mle.resize(d);
      o.asd_mle.resize(d);
      o.est_vt.resize(d);
      o.asd_vt.resize(d);
      for (int i = 0; i < d; ++i) {
        const int j = order[static_cast<size_t>(i)];
        o.est_mle(i) = mle.theta(j);
        o.asd_mle(i) = mle.se(j);
        o.est_vt(i) = vt.theta(j);
        o.asd_vt(i) = vt.se(j);
      }
      o.ok = true;
    } catch (const std::exception&) {
      outs[static_cast<size_t>(r)].ok = false;
    }
  });

  const char* names[] = {"nu1",     "nu2",     "A_11",    "A_22",    "A_33",
                         "B_11",    "B_22",    "B_33",    "Omega_11", "Omega_21",
                         "Omega_31", "Omega_22", "Omega_32", "Omega_33"};
  Table1Result res;
  for (int i = 0; i < d; ++i) {
    std::vector<double> em, am, ev, av;
    for (const auto& o : outs) {
      if (!o.ok) continue;
      em.push_back(o.est_mle(i));
      am.push_back(o.asd_mle(i));
      ev.push_back(o.est_vt(i));
      av.push_back(o.asd_vt(i));
    }
    res.reps_used = static_cast<int>(em.size());
    ParamSummary sm = summarize(names[i], truth[static_cast<size_t>(i)], em, am);
    ParamSummary sv = summarize(names[i], truth[static_cast<size_t>(i)], ev, av);
    sm.paper_bias = kPaperMleBias[static_cast<size_t>(i)];
    sm.paper_esd = kPaperMleEsd[static_cast<size_t>(i)];
    sm.paper_asd = kPaperMleAsd[static_cast<size_t>(i)];
    sv.paper_bias = kPaperVtBias[static_cast<size_t>(i)];
    sv.paper_esd = kPaperVtEsd[static_cast<size_t>(i)];
    if (i < 8) sv.paper_asd = kPaperVtAsd[static_cast<size_t>(i)];
    res.mle.push_back(std::move(sm));
    res.vt.push_back(std::move(sv));
  }
  res.failures = cfg.reps - res.reps_used;
  return res;
}

double paper_table2(double lambda, int lags, bool vt) {
  if (lags < 2 || lags > 6) return std::numeric_limits<double>::quiet_NaN();
  for (const auto& row : kPaperTable2) {
    if (std::abs(row.lambda - lambda) < 1e-12) {
      return vt ? row.piv[lags - 2] : row.pi[lags - 2];
    }
  }
  return std::numeric_limits<double>::quiet_NaN();
}

Table2Result run_table2(const Table2Config& cfg) {
  const int n_lambda = static_cast<int>(cfg.lambdas.size());
  const int n_lags = static_cast<int>(cfg.lags.size());

  struct RepOut {
    bool ok = false;
    std::vector<double> pi, piv;  // statistics per lag
  };
  // Task index = lambda index * reps + rep.
  std::vector<std::vector<RepOut>> outs(
      static_cast<size_t>(n_lambda), std::vector<RepOut>(static_cast<size_t>(cfg.reps)));

  DiagnoseOptions dopts;
  dopts.reading = cfg.reading;

  run_parallel(n_lambda * cfg.reps, cfg.threads, [&](int task) {
    const int li = task / cfg.reps;
    const int r = task % cfg.reps;
    const double lambda = cfg.lambdas[static_cast<size_t>(li)];
    RngStream rng(cfg.seed + static_cast<std::uint64_t>(li), static_cast<std::uint64_t>(r));
    try {
      const CbfSpec dgp = study_dgp(10.0, 8.0, lambda);
      const MatrixSeries series = simulate(dgp, cfg.T, cfg.burnin, rng);
      FitOptions opts = study_fit_options();
      opts.seed = cfg.seed ^ static_cast<std::uint64_t>(task * 2654435761ULL + 17);
      const FitResult mle = fit_mle(series, opts);
      const FitResult vt = fit_vt(series, opts);
      const auto pi = pi_tests(series, mle, cfg.lags, dopts);
      const auto piv = pi_v_tests(series, vt, cfg.lags, dopts);
      RepOut& o = outs[static_cast<size_t>(li)][static_cast<size_t>(r)];
      for (int k = 0; k < n_lags; ++k) {
        o.pi.push_back(pi[static_cast<size_t>(k)].stat);
        o.piv.push_back(piv[static_cast<size_t>(k)].stat);
      }
      o.ok = true;
    } catch (const std::exception&) {
      outs[static_cast<size_t>(li)][static_cast<size_t>(r)].ok = false;
    }
  });

  Table2Result res;
  for (int li = 0; li < n_lambda; ++li) {
    for (int k = 0; k < n_lags; ++k) {
      const int l = cfg.lags[static_cast<size_t>(k)];
      Table2Cell cell;
      cell.lambda = cfg.lambdas[static_cast<size_t>(li)];
      cell.lags = l;
      const double crit = chisq_quantile(1.0 - cfg.alpha, l);
      int rej_pi = 0, rej_piv = 0, used = 0;
      for (const auto& o : outs[static_cast<size_t>(li)]) {
        if (!o.ok) continue;
        ++used;
        cell.stats_pi.push_back(o.pi[static_cast<size_t>(k)]);
        cell.stats_piv.push_back(o.piv[static_cast<size_t>(k)]);
        if (o.pi[static_cast<size_t>(k)] > crit) ++rej_pi;
        if (o.piv[static_cast<size_t>(k)] > crit) ++rej_piv;
      }
      cell.reps_used = used;
      cell.reject_pi = used > 0 ? static_cast<double>(rej_pi) / used : 0.0;
      cell.reject_piv = used > 0 ? static_cast<double>(rej_piv) / used : 0.0;
      cell.paper_pi = paper_table2(cell.lambda, l, false);
      cell.paper_piv = paper_table2(cell.lambda, l, true);
      res.cells.push_back(std::move(cell));
      if (k == 0) res.failures += cfg.reps - used;
    }
  }
  return res;
}

}  // namespace cbf
