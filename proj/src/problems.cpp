#include "mfcal/problems.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "mfcal/errors.hpp"
#include "mfcal/rng.hpp"

namespace mfcal::problems {

namespace {

void check_taylor(const TaylorPoint& p) {
  if (!(p.x >= -1.0 && p.x <= 1.0)) throw ArgumentError("Taylor point x must lie in [-1, 1]");
  if (!(p.a >= 0.0 && p.a <= 1.0)) throw ArgumentError("Taylor point a must lie in [0, 1]");
}

}  // namespace

double taylor_true(const TaylorPoint& p) {
  check_taylor(p);
  return p.x * std::exp(p.a * p.x);
}

double taylor_low(const TaylorPoint& p) {
  check_taylor(p);
  return p.x;
}

double taylor_high(const TaylorPoint& p) {
  check_taylor(p);
  return p.x + p.a * p.x * p.x;
}

namespace {

data::Dataset taylor_dataset(std::size_t n, std::uint64_t seed, double (*f)(const TaylorPoint&),
                             const char* tag) {
  const auto unit = data::latin_hypercube(n, 2, seed);
  data::Dataset d;
  d.inputs.resize(static_cast<Eigen::Index>(n), 2);
  d.outputs.resize(static_cast<Eigen::Index>(n), 1);
  for (Eigen::Index i = 0; i < unit.rows(); ++i) {
    const TaylorPoint p{-1.0 + 2.0 * unit(i, 0), unit(i, 1)};
    d.inputs(i, 0) = p.x;
    d.inputs(i, 1) = p.a;
    d.outputs(i, 0) = f(p);
  }
  d.input_names = {"x", "a"};
  d.output_names = {"f"};
  d.observed = {true};
  d.fidelity_tag = tag;
  return d;
}

}  // namespace

Ladder generate_taylor_datasets(std::size_t n_low, std::size_t n_high, std::size_t n_exp, std::uint64_t seed) {
  if (n_low < 1 || n_high < 1 || n_exp < 1) throw ArgumentError("Taylor dataset sizes must be >= 1");
  return {taylor_dataset(n_low, derive_seed(seed, {stream::design, 0}), taylor_low, "low"),
          taylor_dataset(n_high, derive_seed(seed, {stream::design, 1}), taylor_high, "high"),
          taylor_dataset(n_exp, derive_seed(seed, {stream::design, 2}), taylor_true, "experiment")};
}

// ---- synthetic campaign -----------------------------------------------------

namespace {

struct NamedRange {
  const char* name;
  double lo, hi;
};

constexpr std::array<NamedRange, 9> kInputs{{
    {"avg_drive", 8.0, 30.0},
    {"drive_rise_time", 0.05, 0.3},
    {"energy_on_target", 15.0, 30.0},
    {"picket_power", 0.5, 5.0},
    {"foot_power", 0.5, 4.0},
    {"foot_width", 0.2, 1.2},
    {"foot_picket_width", 0.05, 0.3},
    {"ice_thickness", 30.0, 60.0},
    {"outer_radius", 400.0, 500.0},
}};

struct NamedScale {
  const char* name;
  double scale;
};

constexpr std::array<NamedScale, 19> kOutputs{{
    {"AbsorptionFraction", 0.3}, {"Adiabat", 2.5},        {"BW", 0.06},
    {"BangTime", 1.2},           {"ConvergenceInner", 10.0}, {"ConvergenceOuter", 8.0},
    {"IFAR", 12.0},              {"PeakKineticEnergy", 0.8}, {"Pressure", 40.0},
    {"R0", 430.0},               {"RhoR", 0.05},          {"ShockMass", 5.0},
    {"rhomaxbt", 15.0},          {"Tion", 1.3},           {"Tion_DD", 1.2},
    {"Vi", 250.0},               {"Yield", 2.0e13},       {"Yield_DD", 3.0e10},
    {"rhonave", 3.0},
}};

// Observables available in the experiment.
constexpr std::array<const char*, 5> kObserved{"BW", "BangTime", "RhoR", "Tion", "Yield"};

constexpr std::size_t kWaves = 3;
// Index of the input that drifts with experiment recency (ice thickness).
constexpr std::size_t kDriftInput = 7;

}  // namespace

void SyntheticCampaignSpec::validate() const {
  if (input_dim < 1 || output_dim < 1) throw ArgumentError("campaign dimensions must be >= 1");
  if (observed_count < 1 || observed_count > output_dim)
    throw ArgumentError("campaign observed_count must lie in [1, output_dim]");
  if (!(fidelity_gap >= 0.0) || !(experiment_distortion >= 0.0) || !(noise_sd >= 0.0))
    throw ArgumentError("campaign gap, distortion and noise must be non-negative");
  if (!(experiment_margin >= 0.0 && experiment_margin < 0.5))
    throw ArgumentError("campaign experiment_margin must lie in [0, 0.5)");
}

double CampaignModel::Term::eval(const Eigen::VectorXd& u) const {
  const Eigen::ArrayXd c = u.array() - 0.5;
  double v = offset + linear.dot(c.matrix()) + quadratic.dot((c * c).matrix());
  for (std::size_t k = 0; k < amp.size(); ++k)
    v += amp[k] * std::sin(std::numbers::pi * freq[k].dot(u) + phase[k]);
  return v;
}

CampaignModel::Term CampaignModel::make_term(std::size_t d, std::uint64_t seed) {
  Rng rng(seed);
  const auto n = static_cast<Eigen::Index>(d);
  Term t{Eigen::VectorXd(n), Eigen::VectorXd(n), {}, {}, {}};
  for (Eigen::Index i = 0; i < n; ++i) t.linear(i) = rng.uniform(-1.0, 1.0);
  for (Eigen::Index i = 0; i < n; ++i) t.quadratic(i) = rng.uniform(-1.0, 1.0);
  for (std::size_t k = 0; k < kWaves; ++k) {
    Eigen::VectorXd f(n);
    for (Eigen::Index i = 0; i < n; ++i) f(i) = rng.uniform(-1.0, 1.0) / std::sqrt(static_cast<double>(d));
    t.freq.push_back(f);
    t.amp.push_back(rng.uniform(-0.5, 0.5));
    t.phase.push_back(rng.uniform(0.0, 2.0 * std::numbers::pi));
  }
  // Normalize so |eval(u)| <= 1 on the unit box: |u - 0.5| <= 0.5.
  double bound = 0.5 * t.linear.cwiseAbs().sum() + 0.25 * t.quadratic.cwiseAbs().sum();
  for (const double a : t.amp) bound += std::abs(a);
  t.linear /= bound;
  t.quadratic /= bound;
  for (auto& a : t.amp) a /= bound;
  return t;
}

CampaignModel::Term CampaignModel::make_trend(std::size_t d, std::uint64_t seed) {
  Rng rng(seed);
  const auto n = static_cast<Eigen::Index>(d);
  Term t{Eigen::VectorXd(n), Eigen::VectorXd::Zero(n), {}, {}, {}};
  t.offset = rng.uniform(0.5, 1.0) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
  for (Eigen::Index i = 0; i < n; ++i) t.linear(i) = rng.uniform(-1.0, 1.0);
  t.linear *= (1.0 - std::abs(t.offset)) / (0.5 * t.linear.cwiseAbs().sum());
  return t;
}

CampaignModel::CampaignModel(const SyntheticCampaignSpec& spec) : spec_(spec) {
  spec_.validate();
  const std::size_t d = spec_.input_dim, m = spec_.output_dim;
  for (std::size_t i = 0; i < d; ++i) {
    if (d == kInputs.size()) {
      input_names_.emplace_back(kInputs[i].name);
      input_ranges_.emplace_back(kInputs[i].lo, kInputs[i].hi);
    } else {
      input_names_.push_back("input" + std::to_string(i));
      input_ranges_.emplace_back(0.0, 1.0);
    }
  }
  for (std::size_t j = 0; j < m; ++j) {
    if (m == kOutputs.size()) {
      output_names_.emplace_back(kOutputs[j].name);
      output_scale_.push_back(kOutputs[j].scale);
    } else {
      output_names_.push_back("output" + std::to_string(j));
      output_scale_.push_back(1.0);
    }
  }
  observed_.assign(m, false);
  if (m == kOutputs.size() && spec_.observed_count == kObserved.size()) {
    for (const char* name : kObserved)
      for (std::size_t j = 0; j < m; ++j)
        if (output_names_[j] == name) observed_[j] = true;
  } else {
    for (std::size_t j = 0; j < spec_.observed_count; ++j) observed_[j] = true;
  }
  for (std::size_t j = 0; j < m; ++j) {
    base_.push_back(make_term(d, derive_seed(spec_.seed, {stream::coeffs, 0, j})));
    gap_.push_back(make_term(d, derive_seed(spec_.seed, {stream::coeffs, 1, j})));
    distortion_.push_back(make_trend(d, derive_seed(spec_.seed, {stream::coeffs, 2, j})));
  }
}

Eigen::VectorXd CampaignModel::to_physical(const Eigen::VectorXd& unit) const {
  if (static_cast<std::size_t>(unit.size()) != spec_.input_dim)
    throw ArgumentError("campaign input has the wrong dimension");
  Eigen::VectorXd x(unit.size());
  for (Eigen::Index i = 0; i < unit.size(); ++i) {
    const auto [lo, hi] = input_ranges_[static_cast<std::size_t>(i)];
    x(i) = lo + unit(i) * (hi - lo);
  }
  return x;
}

Eigen::VectorXd CampaignModel::low(const Eigen::VectorXd& unit) const {
  if (static_cast<std::size_t>(unit.size()) != spec_.input_dim)
    throw ArgumentError("campaign input has the wrong dimension");
  Eigen::VectorXd y(static_cast<Eigen::Index>(spec_.output_dim));
  for (std::size_t j = 0; j < spec_.output_dim; ++j)
    y(static_cast<Eigen::Index>(j)) = output_scale_[j] * (2.0 + base_[j].eval(unit));
  return y;
}

Eigen::VectorXd CampaignModel::high(const Eigen::VectorXd& unit) const {
  Eigen::VectorXd y = low(unit);
  if (spec_.fidelity_gap == 0.0) return y;
  for (std::size_t j = 0; j < spec_.output_dim; ++j)
    y(static_cast<Eigen::Index>(j)) += spec_.fidelity_gap * output_scale_[j] * gap_[j].eval(unit);
  return y;
}

Eigen::VectorXd CampaignModel::experiment(const Eigen::VectorXd& unit) const {
  Eigen::VectorXd y = high(unit);
  if (spec_.experiment_distortion == 0.0) return y;
  for (std::size_t j = 0; j < spec_.output_dim; ++j)
    y(static_cast<Eigen::Index>(j)) += spec_.experiment_distortion * output_scale_[j] * distortion_[j].eval(unit);
  return y;
}

namespace {

data::Dataset campaign_frame(const CampaignModel& model, std::size_t n, const char* tag) {
  data::Dataset d;
  d.inputs.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(model.spec().input_dim));
  d.outputs.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(model.spec().output_dim));
  d.input_names = model.input_names();
  d.output_names = model.output_names();
  d.observed.assign(model.spec().output_dim, true);
  d.fidelity_tag = tag;
  return d;
}

}  // namespace

Ladder generate_campaign(const SyntheticCampaignSpec& spec, std::size_t n_low, std::size_t n_high, std::size_t n_exp) {
  if (n_low < 1 || n_high < 1 || n_exp < 1) throw ArgumentError("campaign dataset sizes must be >= 1");
  const CampaignModel model(spec);
  const auto d = static_cast<Eigen::Index>(spec.input_dim);
  Ladder out{campaign_frame(model, n_low, "low"), campaign_frame(model, n_high, "high"),
             campaign_frame(model, n_exp, "experiment")};

  auto fill = [&](data::Dataset& ds, const Eigen::MatrixXd& unit, int level) {
    for (Eigen::Index i = 0; i < unit.rows(); ++i) {
      const Eigen::VectorXd u = unit.row(i).transpose();
      ds.inputs.row(i) = model.to_physical(u).transpose();
      const Eigen::VectorXd y = level == 0 ? model.low(u) : level == 1 ? model.high(u) : model.experiment(u);
      ds.outputs.row(i) = y.transpose();
    }
  };
  fill(out.low, data::latin_hypercube(n_low, spec.input_dim, derive_seed(spec.seed, {stream::design, 0})), 0);
  fill(out.high, data::latin_hypercube(n_high, spec.input_dim, derive_seed(spec.seed, {stream::design, 1})), 1);

  // Experiments cover an interior sub-box and are ordered by one drifting
  // input, so later (newer) rows extrapolate along it.
  Eigen::MatrixXd unit = data::latin_hypercube(n_exp, spec.input_dim, derive_seed(spec.seed, {stream::design, 2}));
  unit = (spec.experiment_margin + (1.0 - 2.0 * spec.experiment_margin) * unit.array()).matrix();
  const std::size_t drift = std::min<std::size_t>(kDriftInput, spec.input_dim - 1);
  std::vector<std::size_t> order(n_exp);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return unit(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(drift)) <
           unit(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(drift));
  });
  Eigen::MatrixXd ordered(unit.rows(), d);
  for (std::size_t i = 0; i < n_exp; ++i) ordered.row(static_cast<Eigen::Index>(i)) = unit.row(static_cast<Eigen::Index>(order[i]));
  fill(out.experiment, ordered, 2);

  Rng noise(derive_seed(spec.seed, {stream::noise}));
  auto& ex = out.experiment;
  ex.observed = model.observed();
  for (std::size_t j = 0; j < spec.output_dim; ++j) {
    auto col = ex.outputs.col(static_cast<Eigen::Index>(j));
    if (!ex.observed[j]) {
      col.setConstant(std::numeric_limits<double>::quiet_NaN());
      continue;
    }
    if (spec.noise_sd > 0.0) {
      const double s = spec.noise_sd * model.output_scales()[j];
      for (Eigen::Index i = 0; i < col.size(); ++i) col(i) += s * noise.normal();
    }
  }
  std::vector<long long> recency(n_exp);
  std::iota(recency.begin(), recency.end(), 0LL);
  ex.recency = std::move(recency);
  return out;
}

}  // namespace mfcal::problems
