#include "cbf/forecast.hpp"

#include <cmath>

#include "cbf/specfun.hpp"

namespace cbf {

namespace {

int spec_lags(const AnySpec& spec) {
  if (const auto* c = std::get_if<CbfSpec>(&spec)) return std::max(c->M(), 1);
  return kHarMonth;
}

MatrixSeries slice(const MatrixSeries& series, int begin, int end) {  // 0-based, half-open
  MatrixSeries out;
  out.n = series.n;
  for (int t = begin; t < end; ++t) out.push(series[t]);
  return out;
}

VectorXd vech_row(const MatrixXd& m) { return vech(m); }

}  // namespace

SpdMatrix forecast_sigma(const AnySpec& spec, const MatrixSeries& series, const InitState& init,
                         int h) {
  if (h < 1) throw std::invalid_argument("forecast: horizon must be at least 1");
  const CbfSpec cspec = std::holds_alternative<CbfSpec>(spec)
                            ? std::get<CbfSpec>(spec)
                            : har_expand(std::get<HarSpec>(spec));
  const int T = series.T();
  const std::vector<MatrixXd> sig = sigma_path(cspec, series, init);
  std::vector<MatrixXd> fut;  // fut[j-1] = forecast of Sigma_{T+j}
  fut.reserve(static_cast<size_t>(h));

  const auto y_at = [&](int s) -> const MatrixXd& {
    if (s >= 1) {
      return s <= T ? series[s - 1].m() : fut[static_cast<size_t>(s - T - 1)];
    }
    return init.Y0[static_cast<size_t>(-s)];
  };
  const auto sig_at = [&](int s) -> const MatrixXd& {
    if (s >= 1) {
      return s <= T ? sig[static_cast<size_t>(s - 1)] : fut[static_cast<size_t>(s - T - 1)];
    }
    return init.S0[static_cast<size_t>(-s)];
  };

  const int n = cspec.n;
  MatrixXd acc(n, n), tmp(n, n);
  for (int j = 1; j <= h; ++j) {
    acc = cspec.omega.m();
    for (int k = 0; k < cspec.K; ++k) {
      for (int i = 1; i <= cspec.P; ++i) {
        const MatrixXd& a = cspec.A[static_cast<size_t>(k)][static_cast<size_t>(i - 1)];
        tmp.noalias() = a * y_at(T + j - i);
        acc.noalias() += tmp * a.transpose();
      }
      for (int q = 1; q <= cspec.Q; ++q) {
        const MatrixXd& b = cspec.B[static_cast<size_t>(k)][static_cast<size_t>(q - 1)];
        tmp.noalias() = b * sig_at(T + j - q);
        acc.noalias() += tmp * b.transpose();
      }
    }
    acc = 0.5 * (acc + acc.transpose()).eval();
    fut.push_back(acc);
  }
  return SpdMatrix(fut.back());
}

SpdMatrix forecast_sigma(const FitResult& fit, const MatrixSeries& series, int h) {
  return forecast_sigma(fit.spec(), series, sample_mean_init(series, fit.shape.lags()), h);
}

double loss(const MatrixXd& pred, const MatrixXd& realized, MatNorm kind) {
  if (pred.rows() != realized.rows() || pred.cols() != realized.cols()) {
    throw std::invalid_argument("loss: dimension mismatch");
  }
  return mat_norm(pred - realized, kind);
}

CbfForecaster::CbfForecaster(std::string name, FitOptions opts, bool vt, int factor_r)
    : name_(std::move(name)), opts_(std::move(opts)), vt_(vt), factor_r_(factor_r) {}

void CbfForecaster::fit(const MatrixSeries& window) {
  if (factor_r_ != 0) {
    const int r = factor_r_ > 0 ? factor_r_ : eigen_ratios(window).suggested_r;
    decomp_ = extract_factors(window, r);
    fit_ = fit_f_cbf(*decomp_, opts_, vt_);
  } else {
    decomp_.reset();
    fit_ = vt_ ? fit_vt(window, opts_) : fit_mle(window, opts_);
  }
}

MatrixXd CbfForecaster::predict(const MatrixSeries& window, int h) const {
  if (fit_.theta.size() == 0) throw std::runtime_error("forecast: model has not been fitted");
  if (decomp_) {
    MatrixSeries yf;
    yf.n = decomp_->r;
    MatrixXd proj(decomp_->r, decomp_->r);
    for (int t = 0; t < window.T(); ++t) {
      proj.noalias() = decomp_->f_hat.transpose() * window[t].m() * decomp_->f_hat;
      yf.push(SpdMatrix(proj));
    }
    const SpdMatrix sf = forecast_sigma(fit_.spec(), yf, sample_mean_init(yf, fit_.shape.lags()), h);
    return reconstruct(*decomp_, sf.m());
  }
  return forecast_sigma(fit_.spec(), window, sample_mean_init(window, fit_.shape.lags()), h).m();
}

FixedSpecForecaster::FixedSpecForecaster(std::string name, AnySpec spec)
    : name_(std::move(name)), spec_(std::move(spec)) {}

MatrixXd FixedSpecForecaster::predict(const MatrixSeries& window, int h) const {
  return forecast_sigma(spec_, window, sample_mean_init(window, spec_lags(spec_)), h).m();
}

MatrixXd SampleMeanForecaster::predict(const MatrixSeries& window, int /*h*/) const {
  return sample_mean(window);
}

void VarHarForecaster::fit(const MatrixSeries& window) {
  const int T = window.T();
  if (T <= kHarMonth) throw std::invalid_argument("var_har: window shorter than the monthly lag");
  n_ = window.n;
  const int d = n_ * (n_ + 1) / 2;
  MatrixXd x(T, d);
  for (int t = 0; t < T; ++t) x.row(t) = vech_row(window[t].m()).transpose();

  const int rows = T - kHarMonth;
  beta_.resize(4, d);
  rank_deficient_ = false;
  MatrixXd design(rows, 4);
  VectorXd target(rows);
  for (int c = 0; c < d; ++c) {
    for (int t = kHarMonth; t < T; ++t) {
      const int r = t - kHarMonth;
      double yw = 0.0, ym = 0.0;
      for (int i = 1; i <= kHarMonth; ++i) {
        const double v = x(t - i, c);
        if (i <= kHarWeek) yw += v;
        ym += v;
      }
      design(r, 0) = 1.0;
      design(r, 1) = x(t - 1, c);
      design(r, 2) = yw / kHarWeek;
      design(r, 3) = ym / kHarMonth;
      target(r) = x(t, c);
    }
    Eigen::ColPivHouseholderQR<MatrixXd> qr(design);
    qr.setThreshold(1e-10);
    if (qr.rank() < 4) rank_deficient_ = true;
    beta_.col(c) = qr.solve(target);
  }
}

MatrixXd VarHarForecaster::predict(const MatrixSeries& window, int h) const {
  if (beta_.size() == 0) throw std::runtime_error("var_har: model has not been fitted");
  if (window.n != n_) throw std::invalid_argument("var_har: dimension mismatch");
  const int T = window.T();
  if (T < kHarMonth) throw std::invalid_argument("var_har: window shorter than the monthly lag");
  const int d = n_ * (n_ + 1) / 2;
  std::vector<VectorXd> hist;
  hist.reserve(static_cast<size_t>(kHarMonth + h));
  for (int t = T - kHarMonth; t < T; ++t) hist.push_back(vech_row(window[t].m()));
  for (int j = 0; j < h; ++j) {
    const int m = static_cast<int>(hist.size());
    VectorXd next(d);
    for (int c = 0; c < d; ++c) {
      double yw = 0.0, ym = 0.0;
      for (int i = 1; i <= kHarMonth; ++i) {
        const double v = hist[static_cast<size_t>(m - i)](c);
        if (i <= kHarWeek) yw += v;
        ym += v;
      }
      next(c) = beta_(0, c) + beta_(1, c) * hist[static_cast<size_t>(m - 1)](c) +
                beta_(2, c) * (yw / kHarWeek) + beta_(3, c) * (ym / kHarMonth);
    }
    hist.push_back(next);
  }
  const MatrixXd out = unvech_sym(hist.back());
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(out);
  last_psd_ = eig.info() == Eigen::Success && eig.eigenvalues()(0) >= -1e-12;
  return out;
}

EvalReport rolling_eval(const MatrixSeries& series, const RollingConfig& cfg,
                        const std::vector<std::shared_ptr<Forecaster>>& models) {
  const int T = series.T();
  if (cfg.window < 1 || cfg.window >= T) throw std::invalid_argument("rolling: bad window size");
  if (cfg.refit_every < 1) throw std::invalid_argument("rolling: refit interval must be >= 1");
  if (cfg.horizons.empty()) throw std::invalid_argument("rolling: no horizons requested");
  for (int h : cfg.horizons) {
    if (h < 1) throw std::invalid_argument("rolling: horizons must be >= 1");
  }
  const int n_models = static_cast<int>(models.size());
  const int n_h = static_cast<int>(cfg.horizons.size());

  EvalReport rep;
  rep.horizons = cfg.horizons;
  for (const auto& m : models) rep.model_names.push_back(m->name());
  rep.cells.assign(static_cast<size_t>(n_models), std::vector<LossCell>(static_cast<size_t>(n_h)));

  std::vector<bool> valid(static_cast<size_t>(n_models), false);
  const int h_min = *std::min_element(cfg.horizons.begin(), cfg.horizons.end());

  for (int t = cfg.window; t + h_min <= T; ++t) {  // 1-based forecast origin
    const MatrixSeries window = slice(series, t - cfg.window, t);
    bool origin_ok = true;
    const bool refit_due = (t - cfg.window) % cfg.refit_every == 0;
    for (int m = 0; m < n_models && origin_ok; ++m) {
      if (refit_due || !valid[static_cast<size_t>(m)]) {
        try {
          models[static_cast<size_t>(m)]->fit(window);
          valid[static_cast<size_t>(m)] = true;
        } catch (const std::exception&) {
          valid[static_cast<size_t>(m)] = false;
          origin_ok = false;
        }
      }
    }

    // Predictions buffered per (model, horizon); committed only if the whole
    // origin succeeds so every model's loss series stays aligned.
    std::vector<std::vector<std::pair<double, double>>> buf(
        static_cast<size_t>(n_models),
        std::vector<std::pair<double, double>>(static_cast<size_t>(n_h), {-1.0, -1.0}));
    for (int m = 0; m < n_models && origin_ok; ++m) {
      for (int hi = 0; hi < n_h && origin_ok; ++hi) {
        const int h = cfg.horizons[static_cast<size_t>(hi)];
        if (t + h > T) continue;
        try {
          const MatrixXd pred = models[static_cast<size_t>(m)]->predict(window, h);
          if (!pred.allFinite()) throw std::runtime_error("non-finite prediction");
          const MatrixXd& realized = series[t + h - 1].m();
          buf[static_cast<size_t>(m)][static_cast<size_t>(hi)] = {
              loss(pred, realized, MatNorm::frobenius), loss(pred, realized, MatNorm::spectral)};
        } catch (const std::exception&) {
          origin_ok = false;
        }
      }
    }

    if (!origin_ok) {
      ++rep.failed_windows;
      rep.failed_origins.push_back(t);
      continue;
    }
    for (int m = 0; m < n_models; ++m) {
      for (int hi = 0; hi < n_h; ++hi) {
        const auto& pr = buf[static_cast<size_t>(m)][static_cast<size_t>(hi)];
        if (pr.first < 0.0) continue;  // horizon ran past the sample end
        LossCell& cell = rep.cells[static_cast<size_t>(m)][static_cast<size_t>(hi)];
        cell.frobenius.push_back(pr.first);
        cell.spectral.push_back(pr.second);
        ++cell.count;
      }
    }
  }

  for (auto& row : rep.cells) {
    for (auto& cell : row) {
      if (cell.count > 0) {
        cell.avg_frobenius = 0.0;
        cell.avg_spectral = 0.0;
        for (double v : cell.frobenius) cell.avg_frobenius += v;
        for (double v : cell.spectral) cell.avg_spectral += v;
        cell.avg_frobenius /= cell.count;
        cell.avg_spectral /= cell.count;
      }
    }
  }
  if (rep.failed_windows > 0) rep.flags.push_back("windows_excluded_after_failures");
  return rep;
}

DmResult dm_test(const std::vector<double>& loss_a, const std::vector<double>& loss_b, int h) {
  if (loss_a.size() != loss_b.size()) throw std::invalid_argument("dm: unequal loss series");
  const int N = static_cast<int>(loss_a.size());
  if (N < 10) throw std::invalid_argument("dm: need at least 10 aligned losses");
  if (h < 1) throw std::invalid_argument("dm: horizon must be >= 1");

  VectorXd d(N);
  for (int i = 0; i < N; ++i) d(i) = loss_a[static_cast<size_t>(i)] - loss_b[static_cast<size_t>(i)];
  const double dbar = d.mean();
  const VectorXd e = d.array() - dbar;
  const auto gamma = [&](int k) {
    double acc = 0.0;
    for (int t = k; t < N; ++t) acc += e(t) * e(t - k);
    return acc / N;
  };
  const double g0 = gamma(0);
  double v = g0;
  for (int k = 1; k < h; ++k) v += 2.0 * gamma(k);

  DmResult out;
  out.horizon = h;
  if (v <= 0.0) {
    v = g0;
    for (int k = 1; k < h; ++k) v += 2.0 * (1.0 - static_cast<double>(k) / h) * gamma(k);
    out.bartlett_fallback = true;
  }
  if (v <= 0.0) {
    throw std::invalid_argument("dm: degenerate loss differential with no variance");
  }
  out.statistic = dbar / std::sqrt(v / N);
  out.pvalue = 2.0 * normal_sf(std::abs(out.statistic));
  return out;
}

}  // namespace cbf
