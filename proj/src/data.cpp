#include "mfcal/data.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "mfcal/errors.hpp"
#include "mfcal/rng.hpp"
#include "mfcal/tables.hpp"

namespace mfcal::data {

std::size_t Dataset::observed_count() const {
  std::size_t n = 0;
  for (const bool o : observed) n += o ? 1 : 0;
  return n;
}

void Dataset::validate() const {
  if (inputs.rows() < 1) throw ArgumentError("dataset has no rows");
  if (outputs.rows() != inputs.rows()) throw ArgumentError("dataset input/output row counts differ");
  if (input_names.size() != input_dim() || output_names.size() != output_dim() ||
      observed.size() != output_dim())
    throw ArgumentError("dataset column names/flags do not match matrix widths");
  if (recency && recency->size() != rows()) throw ArgumentError("recency tag count != row count");
  std::set<std::string> names;
  for (const auto& n : input_names)
    if (!names.insert("in:" + n).second) throw ArgumentError("duplicate input column '" + n + "'");
  for (const auto& n : output_names)
    if (!names.insert("out:" + n).second) throw ArgumentError("duplicate output column '" + n + "'");
  if (!inputs.allFinite()) throw ArgumentError("dataset inputs contain non-finite values");
  for (std::size_t j = 0; j < output_dim(); ++j)
    if (observed[j] && !outputs.col(static_cast<Eigen::Index>(j)).allFinite())
      throw ArgumentError("observed output '" + output_names[j] + "' contains non-finite values");
}

Dataset Dataset::select_rows(const std::vector<std::size_t>& rows) const {
  Dataset out;
  out.inputs.resize(static_cast<Eigen::Index>(rows.size()), inputs.cols());
  out.outputs.resize(static_cast<Eigen::Index>(rows.size()), outputs.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= this->rows()) throw ArgumentError("select_rows: row index out of range");
    out.inputs.row(static_cast<Eigen::Index>(i)) = inputs.row(static_cast<Eigen::Index>(rows[i]));
    out.outputs.row(static_cast<Eigen::Index>(i)) = outputs.row(static_cast<Eigen::Index>(rows[i]));
  }
  out.input_names = input_names;
  out.output_names = output_names;
  out.observed = observed;
  out.fidelity_tag = fidelity_tag;
  if (recency) {
    std::vector<long long> r;
    r.reserve(rows.size());
    for (const auto i : rows) r.push_back((*recency)[i]);
    out.recency = std::move(r);
  }
  return out;
}

std::optional<std::size_t> Dataset::output_index(const std::string& name) const {
  for (std::size_t j = 0; j < output_names.size(); ++j)
    if (output_names[j] == name) return j;
  return std::nullopt;
}

Matrix latin_hypercube(std::size_t n, std::size_t d, std::uint64_t seed) {
  if (n < 1 || d < 1) throw ArgumentError("latin_hypercube: n and d must be >= 1");
  Rng rng(seed);
  Matrix out(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  const double nd = static_cast<double>(n);
  for (std::size_t j = 0; j < d; ++j) {
    const auto perm = rng.permutation(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double k = static_cast<double>(perm[i]);
      double v = (k + rng.uniform()) / nd;
      // (k + u) / n can round onto the next stratum boundary.
      while (std::floor(v * nd) > k) v = std::nextafter(v, 0.0);
      while (std::floor(v * nd) < k) v = std::nextafter(v, 1.0);
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
    }
  }
  return out;
}

namespace {

ColumnRange fit_column(const Eigen::Ref<const Eigen::VectorXd>& col) {
  ColumnRange r{col.minCoeff(), col.maxCoeff(), false};
  r.degenerate = r.max == r.min;
  return r;
}

std::size_t find_name(const std::vector<std::string>& names, const std::string& name, const char* role) {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return i;
  throw ArgumentError(std::string("unknown ") + role + " column '" + name + "' (not in scaling ranges)");
}

}  // namespace

ScalingRanges fit_scaling(const Dataset& base) {
  if (base.rows() < 1) throw ArgumentError("fit_scaling: empty base dataset");
  ScalingRanges r;
  r.input_names = base.input_names;
  r.output_names = base.output_names;
  for (Eigen::Index j = 0; j < base.inputs.cols(); ++j) r.inputs.push_back(fit_column(base.inputs.col(j)));
  for (Eigen::Index j = 0; j < base.outputs.cols(); ++j)
    r.outputs.push_back(base.observed[static_cast<std::size_t>(j)] ? fit_column(base.outputs.col(j))
                                                                   : ColumnRange{0.0, 1.0, false});
  return r;
}

double scale_value(double x, const ColumnRange& r) {
  if (r.degenerate) return 0.0;
  return (x - r.min) / (r.max - r.min);
}

double unscale_value(double s, const ColumnRange& r) {
  if (r.degenerate) return r.min;
  return r.min + s * (r.max - r.min);
}

Dataset scale(const Dataset& data, const ScalingRanges& ranges, ScaleWarnings* warnings) {
  Dataset out = data;
  auto note = [&](const std::string& name) {
    if (!warnings) return;
    ++warnings->out_of_range;
    if (std::find(warnings->columns.begin(), warnings->columns.end(), name) == warnings->columns.end())
      warnings->columns.push_back(name);
  };
  for (std::size_t j = 0; j < data.input_dim(); ++j) {
    const auto& r = ranges.inputs[find_name(ranges.input_names, data.input_names[j], "input")];
    auto col = out.inputs.col(static_cast<Eigen::Index>(j));
    for (Eigen::Index i = 0; i < col.size(); ++i) {
      col(i) = scale_value(col(i), r);
      if (col(i) < 0.0 || col(i) > 1.0) note(data.input_names[j]);
    }
  }
  for (std::size_t j = 0; j < data.output_dim(); ++j) {
    const auto& r = ranges.outputs[find_name(ranges.output_names, data.output_names[j], "output")];
    if (!data.observed[j]) continue;  // sentinel column, never read
    auto col = out.outputs.col(static_cast<Eigen::Index>(j));
    for (Eigen::Index i = 0; i < col.size(); ++i) {
      col(i) = scale_value(col(i), r);
      if (col(i) < 0.0 || col(i) > 1.0) note(data.output_names[j]);
    }
  }
  return out;
}

Dataset unscale(const Dataset& scaled, const ScalingRanges& ranges) {
  Dataset out = scaled;
  for (std::size_t j = 0; j < scaled.input_dim(); ++j) {
    const auto& r = ranges.inputs[find_name(ranges.input_names, scaled.input_names[j], "input")];
    auto col = out.inputs.col(static_cast<Eigen::Index>(j));
    for (Eigen::Index i = 0; i < col.size(); ++i) col(i) = unscale_value(col(i), r);
  }
  for (std::size_t j = 0; j < scaled.output_dim(); ++j) {
    const auto& r = ranges.outputs[find_name(ranges.output_names, scaled.output_names[j], "output")];
    if (!scaled.observed[j]) continue;
    auto col = out.outputs.col(static_cast<Eigen::Index>(j));
    for (Eigen::Index i = 0; i < col.size(); ++i) col(i) = unscale_value(col(i), r);
  }
  return out;
}

Eigen::VectorXd scale_inputs(const Eigen::VectorXd& x, const ScalingRanges& ranges) {
  if (static_cast<std::size_t>(x.size()) != ranges.inputs.size())
    throw ArgumentError("scale_inputs: input length does not match scaling ranges");
  Eigen::VectorXd s(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) s(i) = scale_value(x(i), ranges.inputs[static_cast<std::size_t>(i)]);
  return s;
}

Eigen::VectorXd unscale_inputs(const Eigen::VectorXd& s, const ScalingRanges& ranges) {
  if (static_cast<std::size_t>(s.size()) != ranges.inputs.size())
    throw ArgumentError("unscale_inputs: input length does not match scaling ranges");
  Eigen::VectorXd x(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i) x(i) = unscale_value(s(i), ranges.inputs[static_cast<std::size_t>(i)]);
  return x;
}

Matrix scale_inputs(const Matrix& x, const ScalingRanges& ranges) {
  if (static_cast<std::size_t>(x.cols()) != ranges.inputs.size())
    throw ArgumentError("scale_inputs: input width does not match scaling ranges");
  Matrix s(x.rows(), x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j)
    for (Eigen::Index i = 0; i < x.rows(); ++i)
      s(i, j) = scale_value(x(i, j), ranges.inputs[static_cast<std::size_t>(j)]);
  return s;
}

Matrix unscale_outputs(const Matrix& scaled, const ScalingRanges& ranges) {
  if (static_cast<std::size_t>(scaled.cols()) != ranges.outputs.size())
    throw ArgumentError("unscale_outputs: output width does not match scaling ranges");
  Matrix out(scaled.rows(), scaled.cols());
  for (Eigen::Index j = 0; j < scaled.cols(); ++j)
    for (Eigen::Index i = 0; i < scaled.rows(); ++i)
      out(i, j) = unscale_value(scaled(i, j), ranges.outputs[static_cast<std::size_t>(j)]);
  return out;
}

std::size_t train_size(std::size_t n, double train_fraction) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw ArgumentError("train_fraction must lie in (0, 1)");
  return static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(n) + 1e-9));
}

SplitIndices split_indices(std::size_t n, const SplitSpec& spec) {
  if (n < 2) throw ArgumentError("split: need at least 2 rows");
  const std::size_t n_train = train_size(n, spec.train_fraction);
  if (n_train == 0 || n_train >= n)
    throw ArgumentError("split: fraction " + format_double(spec.train_fraction) + " of " + std::to_string(n) +
                        " rows leaves an empty train or test set");
  Rng rng(derive_seed(spec.seed, {stream::split}));
  const auto perm = rng.permutation(n);
  SplitIndices s;
  s.train.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.test.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train), perm.end());
  return s;
}

std::pair<Dataset, Dataset> split(const Dataset& data, const SplitSpec& spec) {
  const auto idx = split_indices(data.rows(), spec);
  return {data.select_rows(idx.train), data.select_rows(idx.test)};
}

Dataset subsample(const Dataset& data, std::size_t count, std::uint64_t seed) {
  if (count < 1 || count > data.rows())
    throw ArgumentError("subsample: requested " + std::to_string(count) + " rows of " +
                        std::to_string(data.rows()));
  Rng rng(derive_seed(seed, {stream::sample}));
  auto perm = rng.permutation(data.rows());
  perm.resize(count);
  return data.select_rows(perm);
}

// ---- file format ----------------------------------------------------------

namespace {

enum class Role { input, output, recency };

struct Column {
  Role role;
  std::string name;
};

}  // namespace

Dataset parse_dataset(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  Dataset d;

  std::vector<Column> columns;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto pos = line.find("fidelity=");
      if (pos != std::string::npos) d.fidelity_tag = line.substr(pos + 9);
      continue;
    }
    std::set<std::string> seen;
    bool has_recency = false;
    for (const auto& cell : split_csv_line(line)) {
      if (!seen.insert(cell).second) throw ParseError(lineno, "duplicated column name '" + cell + "'");
      if (cell == "recency") {
        if (has_recency) throw ParseError(lineno, "more than one recency column");
        has_recency = true;
        columns.push_back({Role::recency, cell});
      } else if (cell.rfind("in:", 0) == 0 && cell.size() > 3) {
        columns.push_back({Role::input, cell.substr(3)});
      } else if (cell.rfind("out:", 0) == 0 && cell.size() > 4) {
        columns.push_back({Role::output, cell.substr(4)});
      } else {
        throw ParseError(lineno, "malformed header cell '" + cell + "' (expected in:<name>, out:<name> or recency)");
      }
    }
    break;
  }
  if (columns.empty()) throw ParseError(lineno, "missing header row");

  std::vector<std::vector<double>> in_rows, out_rows;
  std::vector<long long> recency;
  std::vector<std::size_t> na_count;
  std::vector<std::size_t> first_number_line, first_na_line;
  std::size_t n_out = 0;
  for (const auto& c : columns) {
    if (c.role == Role::input) d.input_names.push_back(c.name);
    if (c.role == Role::output) {
      d.output_names.push_back(c.name);
      ++n_out;
    }
  }
  if (d.input_names.empty()) throw ParseError(lineno, "header declares no input columns");
  if (d.output_names.empty()) throw ParseError(lineno, "header declares no output columns");
  na_count.assign(n_out, 0);
  first_number_line.assign(n_out, 0);
  first_na_line.assign(n_out, 0);

  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != columns.size())
      throw ParseError(lineno, "expected " + std::to_string(columns.size()) + " cells, found " +
                                   std::to_string(cells.size()));
    std::vector<double> xin, xout;
    std::size_t oj = 0;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const auto& cell = cells[c];
      if (columns[c].role == Role::output && cell == "NA") {
        xout.push_back(std::numeric_limits<double>::quiet_NaN());
        if (!na_count[oj]++) first_na_line[oj] = lineno;
        ++oj;
        continue;
      }
      double v = 0.0;
      if (!parse_double(cell, v) || !std::isfinite(v))
        throw ParseError(lineno, "non-numeric cell '" + cell + "' in column '" + columns[c].name + "'");
      switch (columns[c].role) {
        case Role::input: xin.push_back(v); break;
        case Role::output:
          if (!first_number_line[oj]) first_number_line[oj] = lineno;
          xout.push_back(v);
          ++oj;
          break;
        case Role::recency:
          if (v != std::floor(v)) throw ParseError(lineno, "recency must be an integer, got '" + cell + "'");
          recency.push_back(static_cast<long long>(v));
          break;
      }
    }
    in_rows.push_back(std::move(xin));
    out_rows.push_back(std::move(xout));
  }
  if (in_rows.empty()) throw ParseError(lineno, "dataset has no data rows");

  const std::size_t n = in_rows.size();
  d.observed.assign(n_out, true);
  for (std::size_t j = 0; j < n_out; ++j) {
    if (na_count[j] == n) d.observed[j] = false;
    else if (na_count[j] > 0)
      throw ParseError(first_na_line[j], "NA in observed output column '" + d.output_names[j] +
                                             "' (NA is only allowed in fully unobserved columns)");
  }
  d.inputs.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d.input_names.size()));
  d.outputs.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n_out));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d.input_names.size(); ++j)
      d.inputs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = in_rows[i][j];
    for (std::size_t j = 0; j < n_out; ++j)
      d.outputs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = out_rows[i][j];
  }
  if (!recency.empty()) d.recency = std::move(recency);
  return d;
}

Dataset load_dataset(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  try {
    return parse_dataset(text);
  } catch (const ParseError& e) {
    throw ParseError(e.line(), path.string() + ": " + std::string(e.what()));
  }
}

std::string format_dataset(const Dataset& data) {
  data.validate();
  std::vector<std::string> header;
  for (const auto& n : data.input_names) header.push_back("in:" + n);
  for (const auto& n : data.output_names) header.push_back("out:" + n);
  if (data.recency) header.push_back("recency");
  CsvTable t(header);
  for (std::size_t i = 0; i < data.rows(); ++i) {
    std::vector<std::string> cells;
    cells.reserve(header.size());
    const auto r = static_cast<Eigen::Index>(i);
    for (Eigen::Index j = 0; j < data.inputs.cols(); ++j) cells.push_back(format_double(data.inputs(r, j)));
    for (Eigen::Index j = 0; j < data.outputs.cols(); ++j)
      cells.push_back(data.observed[static_cast<std::size_t>(j)] ? format_double(data.outputs(r, j)) : "NA");
    if (data.recency) cells.push_back(std::to_string((*data.recency)[i]));
    t.add_row(std::move(cells));
  }
  std::string out;
  if (!data.fidelity_tag.empty()) out = "# fidelity=" + data.fidelity_tag + "\n";
  return out + t.str();
}

void save_dataset(const Dataset& data, const std::filesystem::path& path) {
  write_text_file(path, format_dataset(data));
}

}  // namespace mfcal::data
