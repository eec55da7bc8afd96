// Copyright 2026 The peace-engine Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Wilcoxon signed-rank test and Krippendorff's alpha.

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "peace/error.hpp"

namespace peace {

using json = nlohmann::json;

enum class ZeroPolicy { wilcox, pratt };
enum class StatMethod { exact, normal_approx };

struct StatResult {
  double statistic = 0.0;  // min(W+, W-)
  double p_value = 1.0;
  StatMethod method = StatMethod::exact;
  std::size_t n_effective = 0;
  double w_plus = 0.0;
  double w_minus = 0.0;
};

inline void to_json(json& j, const StatResult& r) {
  j = json{{"statistic", r.statistic},
           {"p_value", r.p_value},
           {"method", r.method == StatMethod::exact ? "exact" : "normal_approx"},
           {"n_effective", r.n_effective},
           {"w_plus", r.w_plus},
           {"w_minus", r.w_minus}};
}

/// Average ranks (1-based) of `v`; ties share the mean of their positions.
inline std::vector<double> average_ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i + 1;
    while (j < idx.size() && v[idx[j]] == v[idx[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j) + 1.0) / 2.0;
    for (std::size_t t = i; t < j; ++t) r[idx[t]] = avg;
    i = j;
  }
  return r;
}

/// Paired two-sided test on d = x - y. Exact null distribution for
/// n_effective <= 25 (subset-sum DP over doubled ranks, so tied half ranks
/// stay integral); otherwise normal approximation with tie-aware variance
/// sum(r^2)/4 and a 0.5 continuity correction.
inline StatResult wilcoxon_signed_rank(const std::vector<double>& x, const std::vector<double>& y,
                                       ZeroPolicy zeros = ZeroPolicy::wilcox,
                                       std::optional<StatMethod> force = std::nullopt) {
  require(!x.empty() && x.size() == y.size(), "wilcoxon needs two equal-length non-empty samples");
  std::vector<double> d;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double di = x[i] - y[i];
    require(std::isfinite(di), "wilcoxon inputs must be finite");
    if (di != 0.0 || zeros == ZeroPolicy::pratt) d.push_back(di);
  }
  std::vector<double> mag(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) mag[i] = std::abs(d[i]);
  const auto ranks = average_ranks(mag);

  StatResult res;
  std::vector<double> r;  // ranks of non-zero differences
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (d[i] == 0.0) continue;
    r.push_back(ranks[i]);
    (d[i] > 0 ? res.w_plus : res.w_minus) += ranks[i];
  }
  res.n_effective = r.size();
  if (r.empty()) fail(Errc::all_zero_differences, "all paired differences are zero");
  res.statistic = std::min(res.w_plus, res.w_minus);
  res.method = force.value_or(r.size() <= 25 ? StatMethod::exact : StatMethod::normal_approx);

  if (res.method == StatMethod::exact) {
    std::vector<long> twice(r.size());
    long total = 0;
    for (std::size_t i = 0; i < r.size(); ++i) {
      twice[i] = std::lround(2.0 * r[i]);
      total += twice[i];
    }
    // ways[s] = number of sign assignments with 2*W+ = s
    std::vector<double> ways(static_cast<std::size_t>(total) + 1, 0.0);
    ways[0] = 1.0;
    long reach = 0;
    for (long t : twice) {
      for (long s = reach; s >= 0; --s) ways[static_cast<std::size_t>(s + t)] += ways[static_cast<std::size_t>(s)];
      reach += t;
    }
    const long w = std::lround(2.0 * res.w_plus);
    double le = 0.0, ge = 0.0, all = 0.0;
    for (long s = 0; s <= total; ++s) {
      const double c = ways[static_cast<std::size_t>(s)];
      all += c;
      if (s <= w) le += c;
      if (s >= w) ge += c;
    }
    res.p_value = std::min(1.0, 2.0 * std::min(le, ge) / all);
  } else {
    double mean = 0.0, var = 0.0;
    for (double ri : r) {
      mean += ri / 2.0;
      var += ri * ri / 4.0;
    }
    const double dev = std::max(0.0, std::abs(res.w_plus - mean) - 0.5);
    res.p_value = std::min(1.0, std::erfc(dev / std::sqrt(var) / std::sqrt(2.0)));
  }
  return res;
}

enum class AlphaLevel { nominal, ordinal, interval };

inline AlphaLevel parse_alpha_level(std::string_view s) {
  if (s == "nominal") return AlphaLevel::nominal;
  if (s == "ordinal") return AlphaLevel::ordinal;
  if (s == "interval") return AlphaLevel::interval;
  fail(Errc::invalid_argument, "unknown alpha level '" + std::string(s) + "'");
}

/// Ratings matrix: rows are items (units), columns annotators; nullopt is a
/// missing cell. Coincidence-matrix formulation, alpha = 1 - D_o / D_e.
inline double krippendorff_alpha(const std::vector<std::vector<std::optional<double>>>& ratings,
                                 AlphaLevel level = AlphaLevel::ordinal) {
  std::vector<std::vector<double>> units;
  for (const auto& row : ratings) {
    std::vector<double> vals;
    for (const auto& c : row) {
      if (c) {
        require(std::isfinite(*c), "ratings must be finite");
        vals.push_back(*c);
      }
    }
    if (vals.size() >= 2) units.push_back(std::move(vals));
  }
  if (units.size() < 2) fail(Errc::insufficient_data, "alpha needs at least two items with two or more ratings");

  std::vector<double> values;
  for (const auto& u : units) values.insert(values.end(), u.begin(), u.end());
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());
  const std::size_t V = values.size();
  auto index_of = [&](double v) {
    return static_cast<std::size_t>(std::lower_bound(values.begin(), values.end(), v) - values.begin());
  };

  std::vector<std::vector<double>> o(V, std::vector<double>(V, 0.0));
  for (const auto& u : units) {
    const double w = 1.0 / static_cast<double>(u.size() - 1);
    for (std::size_t i = 0; i < u.size(); ++i)
      for (std::size_t j = 0; j < u.size(); ++j)
        if (i != j) o[index_of(u[i])][index_of(u[j])] += w;
  }
  std::vector<double> nc(V, 0.0);
  double n = 0.0;
  for (std::size_t c = 0; c < V; ++c) {
    for (std::size_t k = 0; k < V; ++k) nc[c] += o[c][k];
    n += nc[c];
  }
  auto delta = [&](std::size_t c, std::size_t k) -> double {
    if (c == k) return 0.0;
    switch (level) {
      case AlphaLevel::nominal: return 1.0;
      case AlphaLevel::interval: return (values[c] - values[k]) * (values[c] - values[k]);
      case AlphaLevel::ordinal: {
        const auto lo = std::min(c, k), hi = std::max(c, k);
        double s = 0.0;
        for (std::size_t g = lo; g <= hi; ++g) s += nc[g];
        s -= (nc[lo] + nc[hi]) / 2.0;
        return s * s;
      }
    }
    return 0.0;
  };
  double observed = 0.0, expected = 0.0;
  for (std::size_t c = 0; c < V; ++c) {
    for (std::size_t k = 0; k < V; ++k) {
      const double dk = delta(c, k);
      observed += o[c][k] * dk;
      expected += nc[c] * nc[k] * dk;
    }
  }
  if (expected == 0.0) fail(Errc::no_variance, "expected disagreement is zero; alpha is undefined");
  return 1.0 - (n - 1.0) * observed / expected;
}

}  // namespace peace
