#pragma once

// Explained variance, relative error, ensemble statistics, Welch's t-test
// and per-stage evaluation reports.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mfcal/data.hpp"
#include "mfcal/tables.hpp"

namespace mfcal::metrics {

/// 1 - Var(y_true - y_pred) / Var(y_true) with population variances.
/// Throws DegenerateError when Var(y_true) == 0.
double explained_variance(std::span<const double> y_true, std::span<const double> y_pred);

/// (pred - truth) / truth. Throws DegenerateError when truth == 0.
double relative_error(double pred, double truth);

struct MeanSd {
  double mean = 0.0;
  double sd = 0.0;
};

/// Arithmetic mean and sample SD (n - 1 divisor); needs >= 2 values.
MeanSd ensemble_stats(std::span<const double> values);

/// Regularized incomplete beta I_x(a, b), continued-fraction evaluation.
double incomplete_beta(double a, double b, double x);

/// CDF of Student's t with df degrees of freedom (df > 0, not necessarily integer).
double student_t_cdf(double t, double df);

struct WelchResult {
  double t = 0.0;
  double df = 0.0;
  double p = 1.0;
};

/// Two-sided Welch unequal-variance t-test with Welch-Satterthwaite df.
WelchResult welch_test(std::span<const double> a, std::span<const double> b);
double welch_p_value(std::span<const double> a, std::span<const double> b);

struct OutputScore {
  std::string name;
  std::optional<double> explained_variance;  // empty when the truth column has zero variance
  double mean_rel_error = 0.0;                // signed, over rows with nonzero truth
  double mean_abs_rel_error = 0.0;
  std::size_t count = 0;     // rows scored
  std::size_t excluded = 0;  // rows dropped because truth == 0
};

/// Scores of one model on one split, observed outputs only.
struct MemberScore {
  std::size_t member = 0;
  std::vector<OutputScore> outputs;
  std::size_t rows = 0;

  /// Uniform average over outputs with a defined explained variance.
  double mean_explained_variance() const;
  double mean_abs_rel_error() const;
};

/// predictions and truth are in physical units; only outputs observed in
/// `truth` are scored.
MemberScore score_predictions(const Eigen::MatrixXd& predictions, const data::Dataset& truth,
                              std::size_t member = 0);

struct OutputSummary {
  std::string name;
  double ev_mean = 0.0;
  std::optional<double> ev_sd;  // empty with fewer than 2 members
  double rel_error_mean = 0.0;
  std::optional<double> rel_error_sd;
};

struct EvalReport {
  std::string stage;
  std::string truth_tag;  // fidelity of the ground truth
  std::string split;      // "train", "test", "test_uncalibrated", ...
  std::vector<MemberScore> members;

  std::vector<OutputSummary> summary() const;
  /// Per-member mean explained variance.
  std::vector<double> member_mean_ev() const;
  double mean_ev() const;
};

/// Columns of every emitted report table.
std::vector<std::string> report_header();
void append_report(CsvTable& table, const EvalReport& report);

}  // namespace mfcal::metrics
