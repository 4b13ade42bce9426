#ifndef D2SIM_METRICS_HPP_
#define D2SIM_METRICS_HPP_

#include <vector>

#include "d2sim/problems.hpp"
#include "d2sim/types.hpp"

namespace d2sim {

/// Exact (full-batch) convergence quantities of one iterate X_t.
struct MetricRecord {
  Index t = 0;
  double loss_mean_model = 0.0;          // f(mean of X)
  double grad_norm_sq_mean_model = 0.0;  // ||grad f(mean of X)||^2
  double grad_norm_sq_avg = 0.0;         // ||(1/n) sum_i grad f_i(x_i)||^2
  double consensus_err = 0.0;            // sum_i ||mean - x_i||^2
};

MetricRecord evaluate(const ProblemInstance& problem, const Matrix& X, Index t = 0);

/// sum_i ||mean(X) - x_i||^2.
double consensus_error(const Matrix& X);

/// (1/n) sum_i ||grad f_i(0) - grad f(0)||^2.
double zeta0(const ProblemInstance& problem);

struct MetricSummary {
  MetricRecord final;
  MetricRecord running_mean;  // field-wise mean over the records; t is the final t
  double min_grad_norm_sq_mean_model = 0.0;
  Index records = 0;
};

/// Throws std::invalid_argument on an empty record list.
MetricSummary summarize(const std::vector<MetricRecord>& records);

}  // namespace d2sim

#endif  // D2SIM_METRICS_HPP_
