// Copyright 2026 The latg2p Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Edit distance, phoneme error rate and the binomial statistics used to
// report it.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "latg2p/error.hpp"

namespace latg2p {

/// Unit-cost Levenshtein distance over arbitrary token sequences.
template <typename Seq>
std::size_t levenshtein(const Seq& a, const Seq& b) {
  const std::size_t n = b.size();
  std::vector<std::size_t> prev(n + 1), cur(n + 1);
  for (std::size_t j = 0; j <= n; ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= n; ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({sub, prev[j] + 1, cur[j - 1] + 1});
    }
    std::swap(prev, cur);
  }
  return prev[n];
}

struct PerResult {
  std::size_t n_errors = 0;
  std::size_t n_ref = 0;
  double per = 0.0;  ///< percent
};

/// Total edit distance over total reference length, as a percentage.
template <typename Seq>
PerResult per(const std::vector<Seq>& hyps, const std::vector<Seq>& refs) {
  if (hyps.size() != refs.size()) {
    throw Error(ErrorCode::LengthMismatch, std::to_string(hyps.size()) + " hypotheses for " + std::to_string(refs.size()) + " references");
  }
  PerResult out;
  for (std::size_t i = 0; i < refs.size(); ++i) {
    out.n_errors += levenshtein(hyps[i], refs[i]);
    out.n_ref += refs[i].size();
  }
  if (out.n_ref == 0) throw Error(ErrorCode::EmptyReferenceSet, "references contain no phonemes");
  out.per = 100.0 * static_cast<double>(out.n_errors) / static_cast<double>(out.n_ref);
  return out;
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

inline constexpr double kZ95 = 1.959964;

/// Two-sided critical value for `confidence`; exactly kZ95 at 0.95.
inline double normal_quantile_two_sided(double confidence) {
  if (confidence == 0.95) return kZ95;
  if (!(confidence > 0.0 && confidence < 1.0)) throw Error(ErrorCode::InvalidConfig, "confidence must be in (0, 1)");
  const double target = 1.0 - (1.0 - confidence) / 2.0;
  double lo = 0.0, hi = 40.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (normal_cdf(mid) < target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

/// Wilson score interval for errors/trials, as proportions. The observed
/// proportion is clamped to 1 because edit-distance error counts can exceed
/// the number of reference phonemes.
inline Interval wilson_ci(std::size_t errors, std::size_t trials, double confidence = 0.95) {
  if (trials == 0) throw Error(ErrorCode::ZeroTrials, "Wilson interval needs at least one trial");
  const double z = normal_quantile_two_sided(confidence);
  const double n = static_cast<double>(trials);
  const double p = std::min(static_cast<double>(errors) / n, 1.0);
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double center = (p + z2 / (2.0 * n)) / denom;
  const double half = z / denom * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n));
  // The endpoints at p = 0 and p = 1 are exact; computing them would leave
  // cancellation residue.
  return {p == 0.0 ? 0.0 : std::max(0.0, center - half), p == 1.0 ? 1.0 : std::min(1.0, center + half)};
}

struct SignificanceResult {
  std::string language;
  std::size_t e1 = 0, n1 = 0;
  std::size_t e2 = 0, n2 = 0;
  double z = 0.0;
  double p = 0.5;           ///< one-sided, H1: system 1 has the lower error proportion
  bool degenerate = false;  ///< pooled proportion was 0 or 1
};

/// Pooled two-proportion z-test. p = Phi(z) so p < 0.5 favors system 1.
/// The tail that is closer to zero is evaluated directly, which keeps tiny
/// p-values accurate and makes p(a,b) + p(b,a) == 1 exactly.
inline SignificanceResult two_prop_ztest(std::size_t e1, std::size_t n1, std::size_t e2, std::size_t n2, std::string language = {}) {
  if (n1 == 0 || n2 == 0) throw Error(ErrorCode::ZeroTrials, "z-test needs at least one trial per system");
  SignificanceResult r{std::move(language), e1, n1, e2, n2};
  const double p1 = std::min(static_cast<double>(e1) / static_cast<double>(n1), 1.0);
  const double p2 = std::min(static_cast<double>(e2) / static_cast<double>(n2), 1.0);
  const double pooled = std::min((static_cast<double>(e1) + static_cast<double>(e2)) / (static_cast<double>(n1) + static_cast<double>(n2)), 1.0);
  if (pooled <= 0.0 || pooled >= 1.0) {
    r.degenerate = true;
    return r;
  }
  const double se = std::sqrt(pooled * (1.0 - pooled) * (1.0 / static_cast<double>(n1) + 1.0 / static_cast<double>(n2)));
  r.z = (p1 - p2) / se;
  const double lower_tail = 0.5 * std::erfc(std::abs(r.z) / std::sqrt(2.0));
  r.p = r.z <= 0.0 ? lower_tail : 1.0 - lower_tail;
  return r;
}

}  // namespace latg2p
