#pragma once

#include <memory>

#include "cbf/estimate.hpp"
#include "cbf/factor.hpp"

namespace cbf {

// h-step conditional-mean forecast. One step ahead is the recursion itself;
// further steps substitute the forecast for the unobserved Y, which is exact
// for the conditional expectation because the recursion is linear in the
// quadratic forms of Y.
SpdMatrix forecast_sigma(const AnySpec& spec, const MatrixSeries& series, const InitState& init,
                         int h);
SpdMatrix forecast_sigma(const FitResult& fit, const MatrixSeries& series, int h);

double loss(const MatrixXd& pred, const MatrixXd& realized, MatNorm kind);

// One model slot in a rolling evaluation: refit on a window, then produce
// h-step predictions of the next realized matrix.
class Forecaster {
 public:
  virtual ~Forecaster() = default;
  virtual std::string name() const = 0;
  virtual void fit(const MatrixSeries& window) = 0;
  virtual MatrixXd predict(const MatrixSeries& window, int h) const = 0;
};

// Conditional-model forecaster (optionally variance-targeted, optionally on
// an extracted factor series with full-dimension reconstruction).
class CbfForecaster : public Forecaster {
 public:
  CbfForecaster(std::string name, FitOptions opts, bool vt, int factor_r = 0);
  std::string name() const override { return name_; }
  void fit(const MatrixSeries& window) override;
  MatrixXd predict(const MatrixSeries& window, int h) const override;
  const FitResult& last_fit() const { return fit_; }

 private:
  std::string name_;
  FitOptions opts_;
  bool vt_;
  int factor_r_;                 // 0: plain model; >0: fixed rank; -1: rank by eigen ratios
  FitResult fit_;
  std::optional<FactorDecomp> decomp_;
};

// Fixed-parameter forecaster: no refitting, used for known-spec experiments.
class FixedSpecForecaster : public Forecaster {
 public:
  FixedSpecForecaster(std::string name, AnySpec spec);
  std::string name() const override { return name_; }
  void fit(const MatrixSeries&) override {}
  MatrixXd predict(const MatrixSeries& window, int h) const override;

 private:
  std::string name_;
  AnySpec spec_;
};

// Window sample mean, constant across horizons.
class SampleMeanForecaster : public Forecaster {
 public:
  std::string name() const override { return "sample_mean"; }
  void fit(const MatrixSeries&) override {}
  MatrixXd predict(const MatrixSeries& window, int h) const override;
};

// Componentwise least squares of vech(Y_t) on daily/weekly/monthly lagged
// averages (diagonal coefficient matrices), iterated for multi-step
// forecasts. Predictions need not be PSD; rank deficiencies fall back to the
// minimum-norm solution and are flagged.
class VarHarForecaster : public Forecaster {
 public:
  std::string name() const override { return "var_har"; }
  void fit(const MatrixSeries& window) override;
  MatrixXd predict(const MatrixSeries& window, int h) const override;
  bool rank_deficient() const { return rank_deficient_; }
  bool last_prediction_psd() const { return last_psd_; }

 private:
  MatrixXd beta_;                // 4 x d: intercept, daily, weekly, monthly per component
  bool rank_deficient_ = false;
  mutable bool last_psd_ = true;
  int n_ = 0;
};

struct RollingConfig {
  int window = 800;
  std::vector<int> horizons = {1, 5, 10};
  int refit_every = 1;
};

struct LossCell {
  double avg_frobenius = 0.0;
  double avg_spectral = 0.0;
  std::vector<double> frobenius;   // aligned across models per horizon
  std::vector<double> spectral;
  int count = 0;
};

struct EvalReport {
  std::vector<std::string> model_names;
  std::vector<int> horizons;
  std::vector<std::vector<LossCell>> cells;   // [model][horizon index]
  int failed_windows = 0;
  std::vector<int> failed_origins;            // forecast-origin times (1-based)
  std::vector<std::string> flags;
};

// Rolling out-of-sample evaluation. A window where any model fails to fit or
// predict is dropped for every model so the loss series stay aligned.
EvalReport rolling_eval(const MatrixSeries& series, const RollingConfig& cfg,
                        const std::vector<std::shared_ptr<Forecaster>>& models);

struct DmResult {
  double statistic = std::numeric_limits<double>::quiet_NaN();
  double pvalue = std::numeric_limits<double>::quiet_NaN();
  int horizon = 1;
  bool bartlett_fallback = false;
};

// Diebold-Mariano equal-predictive-accuracy test on a loss differential,
// with a rectangular-kernel long-run variance through lag h-1 and a Bartlett
// fallback when the truncated estimate is not positive.
DmResult dm_test(const std::vector<double>& loss_a, const std::vector<double>& loss_b, int h);

}  // namespace cbf
