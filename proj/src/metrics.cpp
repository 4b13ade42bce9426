#include "d2sim/metrics.hpp"

#include <algorithm>
#include <stdexcept>

namespace d2sim {

double consensus_error(const Matrix& X) {
  const Vector mean = X.rowwise().mean();
  return (X.colwise() - mean).squaredNorm();
}

MetricRecord evaluate(const ProblemInstance& problem, const Matrix& X, Index t) {
  if (X.rows() != problem.dim() || X.cols() != problem.workers())
    throw std::invalid_argument("evaluate: state shape does not match the problem");
  MetricRecord r;
  r.t = t;
  const Vector mean = X.rowwise().mean();
  r.loss_mean_model = problem.loss(mean);
  r.grad_norm_sq_mean_model = problem.full_gradient(mean).squaredNorm();
  Vector avg = Vector::Zero(problem.dim());
  for (Index i = 0; i < problem.workers(); ++i) avg += problem.full_local_gradient(i, X.col(i));
  avg /= static_cast<double>(problem.workers());
  r.grad_norm_sq_avg = avg.squaredNorm();
  r.consensus_err = consensus_error(X);
  return r;
}

double zeta0(const ProblemInstance& problem) { return heterogeneity_at_origin(problem); }

MetricSummary summarize(const std::vector<MetricRecord>& records) {
  if (records.empty()) throw std::invalid_argument("summarize: empty trajectory");
  MetricSummary s;
  s.records = static_cast<Index>(records.size());
  s.final = records.back();
  s.min_grad_norm_sq_mean_model = records.front().grad_norm_sq_mean_model;
  MetricRecord& m = s.running_mean;
  for (const auto& r : records) {
    m.loss_mean_model += r.loss_mean_model;
    m.grad_norm_sq_mean_model += r.grad_norm_sq_mean_model;
    m.grad_norm_sq_avg += r.grad_norm_sq_avg;
    m.consensus_err += r.consensus_err;
    s.min_grad_norm_sq_mean_model = std::min(s.min_grad_norm_sq_mean_model, r.grad_norm_sq_mean_model);
  }
  const auto count = static_cast<double>(records.size());
  m.t = records.back().t;
  m.loss_mean_model /= count;
  m.grad_norm_sq_mean_model /= count;
  m.grad_norm_sq_avg /= count;
  m.consensus_err /= count;
  return s;
}

}  // namespace d2sim
