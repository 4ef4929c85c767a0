#include "mfcal/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mfcal/errors.hpp"
#include "mfcal/metrics.hpp"
#include "mfcal/parallel.hpp"
#include "mfcal/rng.hpp"

namespace mfcal::optimize {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

double itfx(double yield, double rhor) {
  if (!(yield > 0.0) || !(rhor > 0.0)) throw ArgumentError("itfx: yield and rhor must be positive");
  return yield * rhor * rhor;
}

Objective Objective::itfx(const std::string& yield_name, const std::string& rhor_name) {
  return {"itfx(" + yield_name + "," + rhor_name + ")", {yield_name, rhor_name}, [](std::span<const double> v) {
            if (!(v[0] > 0.0) || !(v[1] > 0.0)) return kNegInf;
            return optimize::itfx(v[0], v[1]);
          }};
}

Objective Objective::single(const std::string& output_name) {
  return {output_name, {output_name}, [](std::span<const double> v) { return v[0]; }};
}

Objective Objective::scaled(double factor) const {
  if (!(factor > 0.0) || !std::isfinite(factor)) throw ArgumentError("objective scale factor must be positive");
  Objective o = *this;
  o.name = format_double(factor) + "*" + name;
  o.combine = [inner = combine, factor](std::span<const double> v) { return factor * inner(v); };
  return o;
}

std::vector<std::size_t> Objective::resolve(const std::vector<std::string>& names) const {
  if (outputs.empty() || !combine) throw ArgumentError("objective '" + name + "' is empty");
  std::vector<std::size_t> cols;
  for (const auto& o : outputs) {
    const auto it = std::find(names.begin(), names.end(), o);
    if (it == names.end()) throw ArgumentError("objective references unknown output '" + o + "'");
    cols.push_back(static_cast<std::size_t>(it - names.begin()));
  }
  return cols;
}

namespace {

void check_point(const transfer::CalibratedEnsemble& ensemble, const Eigen::VectorXd& x) {
  if (ensemble.members.empty()) throw ArgumentError("empty ensemble");
  if (x.size() != ensemble.members.front().input_width())
    throw ArgumentError("input has " + std::to_string(x.size()) + " entries; the ensemble expects " +
                        std::to_string(ensemble.members.front().input_width()));
  if (!x.allFinite()) throw ArgumentError("input is not finite");
}

// [member](output) in physical units.
std::vector<Eigen::VectorXd> member_outputs(const transfer::CalibratedEnsemble& ensemble, const Eigen::VectorXd& x) {
  std::vector<Eigen::VectorXd> out;
  out.reserve(ensemble.size());
  for (const auto& m : ensemble.members) {
    Eigen::VectorXd y = net::forward(m, x);
    for (Eigen::Index j = 0; j < y.size(); ++j)
      y(j) = data::unscale_value(y(j), ensemble.scaling.outputs[static_cast<std::size_t>(j)]);
    out.push_back(std::move(y));
  }
  return out;
}

std::vector<OutputPrediction> summarize(const transfer::CalibratedEnsemble& ensemble, const Eigen::VectorXd& x) {
  const auto ys = member_outputs(ensemble, x);
  std::vector<OutputPrediction> out;
  for (std::size_t j = 0; j < ensemble.scaling.output_names.size(); ++j) {
    std::vector<double> v;
    for (const auto& y : ys) v.push_back(y(static_cast<Eigen::Index>(j)));
    OutputPrediction p{ensemble.scaling.output_names[j], 0.0, std::nullopt};
    if (v.size() >= 2) {
      const auto s = metrics::ensemble_stats(v);
      p.mean = s.mean;
      p.sd = s.sd;
    } else {
      p.mean = v.front();
    }
    out.push_back(std::move(p));
  }
  return out;
}

bool lex_less(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(), b.data() + b.size());
}

}  // namespace

std::vector<OutputPrediction> predict_with_uncertainty(const transfer::CalibratedEnsemble& ensemble,
                                                        const Eigen::VectorXd& scaled_x) {
  check_point(ensemble, scaled_x);
  if (ensemble.size() < 2) throw DegenerateError("predict_with_uncertainty: SD needs at least 2 members");
  return summarize(ensemble, scaled_x);
}

BoxResult maximize_box(const std::function<double(const Eigen::VectorXd&)>& f, std::size_t d, std::size_t budget,
                       std::uint64_t seed, const SearchOptions& options) {
  if (d < 1) throw ArgumentError("maximize: dimension must be positive");
  if (budget < 10 * d)
    throw ArgumentError("maximize: budget " + std::to_string(budget) + " is below 10*d = " + std::to_string(10 * d));
  if (!(options.initial_step > 0.0) || !(options.min_step > 0.0)) throw ArgumentError("maximize: steps must be positive");

  auto score = [&](const Eigen::VectorXd& x) {
    const double v = f(x);
    return std::isnan(v) ? kNegInf : v;
  };

  BoxResult res;
  auto& tr = res.trace;
  const std::size_t n_seed = budget / 2;
  const Eigen::MatrixXd lhs = data::latin_hypercube(n_seed, d, derive_seed(seed, {stream::design}));
  std::vector<double> vals(n_seed);
  parallel_for(n_seed, options.threads, [&](std::size_t i) {
    vals[i] = score(lhs.row(static_cast<Eigen::Index>(i)).transpose());
  });

  double best = kNegInf;
  Eigen::VectorXd x;
  for (std::size_t i = 0; i < n_seed; ++i) {
    const Eigen::VectorXd p = lhs.row(static_cast<Eigen::Index>(i)).transpose();
    if (x.size() == 0 || vals[i] > best || (vals[i] == best && lex_less(p, x))) {
      best = vals[i];
      x = p;
    }
    tr.incumbent.push_back(best);
    if (options.record_points) tr.points.push_back(p);
  }
  tr.seed_evaluations = n_seed;

  std::size_t evals = n_seed;
  double h = options.initial_step;
  while (evals < budget && h >= options.min_step) {
    bool improved = false;
    for (std::size_t i = 0; i < d && evals < budget; ++i) {
      for (const double dir : {1.0, -1.0}) {
        if (evals >= budget) break;
        Eigen::VectorXd c = x;
        const auto k = static_cast<Eigen::Index>(i);
        c(k) = std::clamp(x(k) + dir * h, 0.0, 1.0);
        if (c(k) == x(k)) continue;
        const double v = score(c);
        ++evals;
        if (options.record_points) tr.points.push_back(c);
        if (v > best) {
          best = v;
          x = std::move(c);
          improved = true;
        }
        tr.incumbent.push_back(best);
      }
    }
    if (!improved) h *= 0.5;
  }
  tr.final_step = h;
  res.x = std::move(x);
  res.value = best;
  res.evaluations = evals;
  return res;
}

DesignResult maximize(const transfer::CalibratedEnsemble& ensemble, const Objective& objective, std::size_t budget,
                      std::uint64_t seed, const SearchOptions& options) {
  ensemble.validate();
  const auto cols = objective.resolve(ensemble.scaling.output_names);
  const auto d = static_cast<std::size_t>(ensemble.members.front().input_width());
  auto f = [&](const Eigen::VectorXd& x) {
    const auto ys = member_outputs(ensemble, x);
    std::vector<double> v(cols.size(), 0.0);
    for (std::size_t c = 0; c < cols.size(); ++c) {
      for (const auto& y : ys) v[c] += y(static_cast<Eigen::Index>(cols[c]));
      v[c] /= static_cast<double>(ys.size());
    }
    return objective.combine(v);
  };
  auto box = maximize_box(f, d, budget, seed, options);

  DesignResult r;
  r.objective = objective.name;
  r.scaled = box.x;
  r.physical = data::unscale_inputs(box.x, ensemble.scaling);
  r.value = box.value;
  r.outputs = summarize(ensemble, box.x);
  r.budget = budget;
  r.evaluations = box.evaluations;
  r.trace = std::move(box.trace);
  return r;
}

double nearest_distance(const Eigen::VectorXd& scaled_x, const Eigen::MatrixXd& scaled_rows) {
  if (scaled_rows.rows() == 0) throw ArgumentError("nearest_distance: no rows");
  if (scaled_rows.cols() != scaled_x.size()) throw ShapeError("nearest_distance: dimension mismatch");
  return std::sqrt((scaled_rows.rowwise() - scaled_x.transpose()).rowwise().squaredNorm().minCoeff());
}

}  // namespace mfcal::optimize
