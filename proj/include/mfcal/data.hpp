#pragma once

// Dataset container, Latin hypercube sampling, fixed-range [0,1] scaling,
// seeded splits and the comma-separated dataset file format.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace mfcal::data {

using Matrix = Eigen::MatrixXd;

/// Rows are samples. Unobserved output columns hold NaN and are never read.
struct Dataset {
  Matrix inputs;   // N x d
  Matrix outputs;  // N x m
  std::vector<std::string> input_names;
  std::vector<std::string> output_names;
  std::vector<bool> observed;                  // per output column
  std::optional<std::vector<long long>> recency;  // larger = newer
  std::string fidelity_tag;

  std::size_t rows() const { return static_cast<std::size_t>(inputs.rows()); }
  std::size_t input_dim() const { return static_cast<std::size_t>(inputs.cols()); }
  std::size_t output_dim() const { return static_cast<std::size_t>(outputs.cols()); }
  std::size_t observed_count() const;

  /// Throws ArgumentError on inconsistent sizes, duplicate names, or
  /// non-finite entries outside unobserved output columns.
  void validate() const;

  /// New dataset holding the given rows in the given order.
  Dataset select_rows(const std::vector<std::size_t>& rows) const;

  std::optional<std::size_t> output_index(const std::string& name) const;
};

/// n points in [0,1)^d with exactly one point per stratum [i/n, (i+1)/n)
/// in every dimension.
Matrix latin_hypercube(std::size_t n, std::size_t d, std::uint64_t seed);

struct ColumnRange {
  double min = 0.0;
  double max = 1.0;
  bool degenerate = false;  // max == min
};

/// Per-column affine ranges fitted once on the base dataset and reused for
/// every later stage.
struct ScalingRanges {
  std::vector<std::string> input_names;
  std::vector<std::string> output_names;
  std::vector<ColumnRange> inputs;
  std::vector<ColumnRange> outputs;
};

/// Min/max per column of `base`. Unobserved output columns get the identity
/// range (0, 1).
ScalingRanges fit_scaling(const Dataset& base);

/// Count of scaled values that fell outside [0, 1] (no clipping is applied).
struct ScaleWarnings {
  std::size_t out_of_range = 0;
  std::vector<std::string> columns;  // names of the affected columns
};

double scale_value(double x, const ColumnRange& r);
double unscale_value(double s, const ColumnRange& r);

/// Scales every column. Columns are matched by name; a column missing from
/// `ranges` is an ArgumentError. Degenerate columns map to 0.
Dataset scale(const Dataset& data, const ScalingRanges& ranges, ScaleWarnings* warnings = nullptr);
Dataset unscale(const Dataset& scaled, const ScalingRanges& ranges);

/// Row-vector helpers for prediction paths.
Eigen::VectorXd scale_inputs(const Eigen::VectorXd& x, const ScalingRanges& ranges);
Eigen::VectorXd unscale_inputs(const Eigen::VectorXd& s, const ScalingRanges& ranges);
Matrix unscale_outputs(const Matrix& scaled, const ScalingRanges& ranges);
Matrix scale_inputs(const Matrix& x, const ScalingRanges& ranges);

struct SplitSpec {
  double train_fraction = 0.8;
  std::uint64_t seed = 0;
};

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Training-set size for n rows: floor(fraction * n) (with a 1e-9 guard
/// against representation error), so 80% of 100 is 80 and 90% of 23 is 20.
std::size_t train_size(std::size_t n, double train_fraction);

/// Seeded disjoint, exhaustive partition of 0..n-1.
SplitIndices split_indices(std::size_t n, const SplitSpec& spec);
std::pair<Dataset, Dataset> split(const Dataset& data, const SplitSpec& spec);

/// Seeded subsample of `count` rows (without replacement).
Dataset subsample(const Dataset& data, std::size_t count, std::uint64_t seed);

/// Comma-separated text. Header roles: `in:<name>`, `out:<name>`, `recency`.
/// An optional first line `# fidelity=<tag>` carries the fidelity tag. An
/// output column whose every cell is `NA` is unobserved; `NA` anywhere else
/// is a parse error.
Dataset load_dataset(const std::filesystem::path& path);
Dataset parse_dataset(const std::string& text);
void save_dataset(const Dataset& data, const std::filesystem::path& path);
std::string format_dataset(const Dataset& data);

}  // namespace mfcal::data
