#include "mfcal/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mfcal/errors.hpp"

namespace mfcal::metrics {

namespace {

double mean_of(std::span<const double> v) {
  double s = 0.0;
  for (const double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// Population variance, two-pass.
double pop_variance(std::span<const double> v) {
  const double m = mean_of(v);
  double s = 0.0;
  for (const double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size());
}

double sample_variance(std::span<const double> v) {
  const double m = mean_of(v);
  double s = 0.0;
  for (const double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

}  // namespace

double explained_variance(std::span<const double> y_true, std::span<const double> y_pred) {
  if (y_true.size() != y_pred.size()) throw ArgumentError("explained_variance: length mismatch");
  if (y_true.size() < 2) throw ArgumentError("explained_variance: need at least 2 values");
  const double var_true = pop_variance(y_true);
  if (var_true == 0.0) throw DegenerateError("explained_variance: target variance is zero");
  std::vector<double> residual(y_true.size());
  for (std::size_t i = 0; i < y_true.size(); ++i) residual[i] = y_true[i] - y_pred[i];
  return 1.0 - pop_variance(residual) / var_true;
}

double relative_error(double pred, double truth) {
  if (truth == 0.0) throw DegenerateError("relative_error: truth is zero");
  return (pred - truth) / truth;
}

MeanSd ensemble_stats(std::span<const double> values) {
  if (values.size() < 2) throw DegenerateError("ensemble_stats: SD undefined for fewer than 2 members");
  return {mean_of(values), std::sqrt(sample_variance(values))};
}

// ---- incomplete beta / t distribution ---------------------------------------

namespace {

// Continued fraction for I_x(a, b), modified Lentz.
double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIter = 10000;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) return h;
  }
  throw NumericOverflowError("incomplete_beta: continued fraction did not converge");
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0)) throw ArgumentError("incomplete_beta: a and b must be positive");
  if (!(x >= 0.0 && x <= 1.0)) throw ArgumentError("incomplete_beta: x must lie in [0, 1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) +
                           b * std::log1p(-x);
  const double front = std::exp(log_front);
  // The continued fraction converges fast for x < (a + 1) / (a + b + 2).
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double student_t_cdf(double t, double df) {
  if (!(df > 0.0)) throw ArgumentError("student_t_cdf: df must be positive");
  if (std::isinf(t)) return t > 0 ? 1.0 : 0.0;
  const double tail = 0.5 * incomplete_beta(0.5 * df, 0.5, df / (df + t * t));
  return t > 0.0 ? 1.0 - tail : tail;
}

WelchResult welch_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) throw ArgumentError("welch_test: each sample needs at least 2 values");
  const double va = sample_variance(a), vb = sample_variance(b);
  if (va == 0.0 && vb == 0.0) throw DegenerateError("welch_test: both samples have zero variance");
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  const double sa = va / na, sb = vb / nb;
  WelchResult r;
  r.t = (mean_of(a) - mean_of(b)) / std::sqrt(sa + sb);
  r.df = (sa + sb) * (sa + sb) / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
  r.p = std::clamp(incomplete_beta(0.5 * r.df, 0.5, r.df / (r.df + r.t * r.t)), 0.0, 1.0);
  return r;
}

double welch_p_value(std::span<const double> a, std::span<const double> b) { return welch_test(a, b).p; }

// ---- evaluation reports -----------------------------------------------------

double MemberScore::mean_explained_variance() const {
  double s = 0.0;
  std::size_t n = 0;
  for (const auto& o : outputs)
    if (o.explained_variance) {
      s += *o.explained_variance;
      ++n;
    }
  return n ? s / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN();
}

double MemberScore::mean_abs_rel_error() const {
  double s = 0.0;
  std::size_t n = 0;
  for (const auto& o : outputs)
    if (o.count > 0) {
      s += o.mean_abs_rel_error;
      ++n;
    }
  return n ? s / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN();
}

MemberScore score_predictions(const Eigen::MatrixXd& predictions, const data::Dataset& truth, std::size_t member) {
  if (predictions.rows() != truth.outputs.rows() || predictions.cols() != truth.outputs.cols())
    throw ShapeError("score_predictions: prediction shape does not match the truth dataset");
  MemberScore score;
  score.member = member;
  score.rows = truth.rows();
  const auto n = static_cast<std::size_t>(truth.outputs.rows());
  for (std::size_t j = 0; j < truth.output_dim(); ++j) {
    if (!truth.observed[j]) continue;
    const auto c = static_cast<Eigen::Index>(j);
    OutputScore o;
    o.name = truth.output_names[j];
    std::vector<double> yt(n), yp(n);
    double rel = 0.0, abs_rel = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      yt[i] = truth.outputs(r, c);
      yp[i] = predictions(r, c);
      if (yt[i] == 0.0) {
        ++o.excluded;
        continue;
      }
      const double e = relative_error(yp[i], yt[i]);
      rel += e;
      abs_rel += std::abs(e);
      ++o.count;
    }
    if (o.count) {
      o.mean_rel_error = rel / static_cast<double>(o.count);
      o.mean_abs_rel_error = abs_rel / static_cast<double>(o.count);
    } else {
      o.mean_rel_error = o.mean_abs_rel_error = std::numeric_limits<double>::quiet_NaN();
    }
    if (n >= 2) {
      try {
        o.explained_variance = explained_variance(yt, yp);
      } catch (const DegenerateError&) {
        o.explained_variance.reset();
      }
    }
    score.outputs.push_back(std::move(o));
  }
  return score;
}

std::vector<OutputSummary> EvalReport::summary() const {
  std::vector<OutputSummary> out;
  if (members.empty()) return out;
  for (std::size_t j = 0; j < members.front().outputs.size(); ++j) {
    OutputSummary s;
    s.name = members.front().outputs[j].name;
    std::vector<double> ev, rel;
    for (const auto& m : members) {
      if (m.outputs[j].explained_variance) ev.push_back(*m.outputs[j].explained_variance);
      if (m.outputs[j].count) rel.push_back(m.outputs[j].mean_rel_error);
    }
    const double nan = std::numeric_limits<double>::quiet_NaN();
    s.ev_mean = ev.empty() ? nan : mean_of(ev);
    if (ev.size() >= 2) s.ev_sd = ensemble_stats(ev).sd;
    s.rel_error_mean = rel.empty() ? nan : mean_of(rel);
    if (rel.size() >= 2) s.rel_error_sd = ensemble_stats(rel).sd;
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<double> EvalReport::member_mean_ev() const {
  std::vector<double> v;
  for (const auto& m : members) v.push_back(m.mean_explained_variance());
  return v;
}

double EvalReport::mean_ev() const {
  const auto v = member_mean_ev();
  return v.empty() ? std::numeric_limits<double>::quiet_NaN() : mean_of(v);
}

std::vector<std::string> report_header() {
  return {"stage", "member", "output_name", "split", "explained_variance", "mean_rel_error"};
}

void append_report(CsvTable& table, const EvalReport& report) {
  for (const auto& m : report.members)
    for (const auto& o : m.outputs)
      table.add_row({report.stage, std::to_string(m.member), o.name, report.split,
                     o.explained_variance ? format_double(*o.explained_variance) : "NA",
                     format_double(o.mean_rel_error)});
}

}  // namespace mfcal::metrics
