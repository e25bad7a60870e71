#pragma once

#include <string>
#include <vector>

#include "tvnet/tensor.hpp"

namespace tvnet::metrics {

struct MetricReport {
  std::string name;
  double value = 0.0;
  size_t count = 0;
  std::string tag;  // task / horizon annotation
};

// point metrics, averaged over all elements
double mse(const std::vector<double>& pred, const std::vector<double>& actual);
double mae(const std::vector<double>& pred, const std::vector<double>& actual);

// symmetric percentage error in [0, 200]; 0/0 terms contribute 0
double smape(const std::vector<double>& pred, const std::vector<double>& actual);

// scale-free error; the denominator is the seasonal-naive error of the
// in-sample (training) series at lag p
double mase(const std::vector<double>& pred, const std::vector<double>& actual,
            const std::vector<double>& insample, size_t p);

// seasonal-adjusted naive reference: when the lag-p autocorrelation passes
// |r_p| > 1.645/sqrt(T), classically decompose (multiplicative, centered
// moving average), extend the last deseasonalized value, reseasonalize;
// otherwise repeat the last value. p = 1 always takes the naive branch.
std::vector<double> naive2_forecast(const std::vector<double>& insample,
                                    size_t p, size_t horizon);

double owa(double smape_model, double mase_model, double smape_naive2,
           double mase_naive2);

struct Prf1 {
  double precision;
  double recall;
  double f1;
};
// positive class = 1; empty prediction/reference sides score 0
Prf1 prf1(const std::vector<int>& pred_labels,
          const std::vector<int>& true_labels);

double accuracy(const std::vector<int>& pred_classes,
                const std::vector<int>& true_classes);

// differentiable losses
Tensor mse_loss(const Tensor& pred, const Tensor& target);
Tensor smape_loss(const Tensor& pred, const Tensor& target);
// masked mean squared error; mask entries are 0/1, gradient flows only
// through pred at masked positions
Tensor masked_mse_loss(const Tensor& pred, const Tensor& target,
                       const Tensor& mask);

}  // namespace tvnet::metrics
