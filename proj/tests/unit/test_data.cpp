#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "helpers.hpp"
#include "mfcal/data.hpp"
#include "mfcal/errors.hpp"

using namespace mfcal;
using namespace mfcal::data;

namespace {

Dataset toy(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  Dataset d;
  d.inputs = testutil::random_matrix(rng, static_cast<Eigen::Index>(n), 2, -3.0, 5.0);
  d.outputs = testutil::random_matrix(rng, static_cast<Eigen::Index>(n), 3, 1.0, 2.0);
  d.input_names = {"u", "v"};
  d.output_names = {"p", "q", "r"};
  d.observed = {true, false, true};
  d.outputs.col(1).setConstant(std::nan(""));
  d.fidelity_tag = "experiment";
  std::vector<long long> rec(n);
  for (std::size_t i = 0; i < n; ++i) rec[i] = static_cast<long long>(n - i);
  d.recency = rec;
  return d;
}

}  // namespace

TEST_CASE("LHS puts exactly one point in every stratum") {
  for (std::uint64_t seed : {1ULL, 2ULL, 99ULL}) {
    const auto m = latin_hypercube(100, 9, seed);
    for (Eigen::Index j = 0; j < 9; ++j) {
      std::vector<int> hits(100, 0);
      for (Eigen::Index i = 0; i < 100; ++i) {
        const double v = m(i, j);
        REQUIRE(v >= 0.0);
        REQUIRE(v < 1.0);
        ++hits[static_cast<std::size_t>(std::floor(v * 100))];
      }
      CHECK(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
    }
  }
  const auto four = latin_hypercube(4, 1, 5);
  std::set<int> strata;
  for (Eigen::Index i = 0; i < 4; ++i) strata.insert(static_cast<int>(four(i, 0) * 4));
  CHECK(strata == std::set<int>{0, 1, 2, 3});
  const auto one = latin_hypercube(1, 3, 5);
  CHECK((one.array() >= 0.0).all());
  CHECK((one.array() < 1.0).all());
  CHECK(latin_hypercube(10, 2, 7) == latin_hypercube(10, 2, 7));
  CHECK_THROWS_AS(latin_hypercube(0, 2, 1), ArgumentError);
}

TEST_CASE("LHS marginals are uniform over seeds") {
  const int seeds = 400, n = 5;
  for (Eigen::Index j = 0; j < 3; ++j) {
    double sum = 0.0;
    for (int s = 0; s < seeds; ++s) sum += latin_hypercube(n, 3, static_cast<std::uint64_t>(s)).col(j).sum();
    const double mean = sum / (seeds * n);
    // Per-point variance is at most 1/12; stratification only shrinks it.
    const double se = std::sqrt(1.0 / 12.0 / (seeds * n));
    CHECK(std::abs(mean - 0.5) < 3 * se);
  }
}

TEST_CASE("scaling endpoints, degenerate columns and round trip") {
  Dataset d;
  d.inputs.resize(2, 2);
  d.inputs << 2, 7, 4, 7;
  d.outputs.resize(2, 1);
  d.outputs << 10, 30;
  d.input_names = {"a", "c"};
  d.output_names = {"y"};
  d.observed = {true};
  const auto r = fit_scaling(d);
  CHECK(r.inputs[0].min == 2.0);
  CHECK(r.inputs[0].max == 4.0);
  CHECK(r.inputs[1].degenerate);
  const auto s = scale(d, r);
  CHECK(s.inputs(0, 0) == 0.0);
  CHECK(s.inputs(1, 0) == 1.0);
  CHECK(s.inputs(0, 1) == 0.0);
  CHECK(unscale(s, r).inputs(1, 1) == 7.0);

  Dataset out = d;
  out.inputs(0, 0) = 5.0;
  ScaleWarnings w;
  const auto so = scale(out, r, &w);
  CHECK(so.inputs(0, 0) == 1.5);
  CHECK(w.out_of_range == 1);
  CHECK(w.columns == std::vector<std::string>{"a"});

  Dataset renamed = d;
  renamed.input_names[1] = "zz";
  CHECK_THROWS_AS(scale(renamed, r), ArgumentError);

  const auto big = toy(50, 3);
  const auto rb = fit_scaling(big);
  const auto sb = scale(big, rb);
  for (Eigen::Index j = 0; j < 2; ++j) {
    CHECK(sb.inputs.col(j).minCoeff() == 0.0);
    CHECK(sb.inputs.col(j).maxCoeff() == 1.0);
  }
  CHECK(sb.outputs.col(0).minCoeff() == 0.0);
  CHECK(sb.outputs.col(2).maxCoeff() == 1.0);
  const auto back = unscale(sb, rb);
  CHECK(((back.inputs - big.inputs).array().abs() / big.inputs.array().abs().max(1.0)).maxCoeff() < 1e-12);
  CHECK((back.outputs.col(0) - big.outputs.col(0)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("splits are seeded, disjoint and exhaustive") {
  CHECK(train_size(100, 0.8) == 80);
  CHECK(train_size(23, 0.9) == 20);
  CHECK(train_size(25, 0.8) == 20);
  for (std::size_t n : {2u, 3u, 5u, 23u, 100u, 137u})
    for (double f : {0.5, 0.8, 0.9})
      for (std::uint64_t seed : {0ULL, 1ULL, 42ULL}) {
        if (train_size(n, f) == 0 || train_size(n, f) >= n) {
          CHECK_THROWS_AS(split_indices(n, {f, seed}), ArgumentError);
          continue;
        }
        const auto s = split_indices(n, {f, seed});
        CHECK(s.train.size() == train_size(n, f));
        std::vector<std::size_t> all = s.train;
        all.insert(all.end(), s.test.begin(), s.test.end());
        std::sort(all.begin(), all.end());
        std::vector<std::size_t> expect(n);
        for (std::size_t i = 0; i < n; ++i) expect[i] = i;
        CHECK(all == expect);
        const auto again = split_indices(n, {f, seed});
        CHECK(again.train == s.train);
        CHECK(again.test == s.test);
      }
  CHECK_THROWS_AS(split_indices(1, {0.5, 1}), ArgumentError);
  CHECK_THROWS_AS(split_indices(10, {1.0, 1}), ArgumentError);
}

TEST_CASE("subsamples are nested across sizes") {
  const auto d = toy(40, 1);
  const auto small = subsample(d, 10, 5);
  const auto large = subsample(d, 25, 5);
  CHECK(small.inputs == large.inputs.topRows(10));
  CHECK_THROWS_AS(subsample(d, 41, 5), ArgumentError);
}

TEST_CASE("dataset file round trip") {
  const auto d = toy(30, 8);
  const auto back = parse_dataset(format_dataset(d));
  CHECK(back.inputs == d.inputs);
  CHECK(back.outputs.col(0) == d.outputs.col(0));
  CHECK(back.outputs.col(2) == d.outputs.col(2));
  CHECK(back.observed == d.observed);
  CHECK(back.recency == d.recency);
  CHECK(back.fidelity_tag == "experiment");
  CHECK(back.input_names == d.input_names);
  CHECK(back.output_names == d.output_names);

  const auto dir = testutil::scratch_dir("data");
  save_dataset(d, dir / "d.csv");
  CHECK(load_dataset(dir / "d.csv").inputs == d.inputs);
  CHECK_THROWS_AS(load_dataset(dir / "missing.csv"), IoError);
}

TEST_CASE("dataset parse errors carry line numbers") {
  auto line_of = [](const std::string& text) {
    try {
      parse_dataset(text);
    } catch (const ParseError& e) {
      return e.line();
    }
    return std::size_t{9999};
  };
  CHECK(line_of("in:x,in:x,out:y\n1,2,3\n") == 1);
  CHECK(line_of("in:x,weird,out:y\n1,2,3\n") == 1);
  CHECK(line_of("in:x,out:y\n1,2\n3\n") == 3);
  CHECK(line_of("in:x,out:y\n1,2\nabc,4\n") == 3);
  CHECK(line_of("# fidelity=low\nin:x,out:y\n1,2\n2,NA\n") == 4);
  const auto na = parse_dataset("in:x,out:y,out:z\n1,NA,2\n2,NA,3\n");
  CHECK(na.observed == std::vector<bool>{false, true});
}
