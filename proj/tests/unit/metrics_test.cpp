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

#include <gtest/gtest.h>

#include <deque>
#include <map>
#include <string>

#include "latg2p/metrics.hpp"

namespace latg2p {
namespace {

using Tokens = std::vector<std::string>;

/// Fewest single-token edits from a to b, by breadth-first search over
/// strings no longer than `bound`.
std::size_t bfs_distance(const std::string& a, const std::string& b, const std::string& alphabet, std::size_t bound) {
  std::map<std::string, std::size_t> seen{{a, 0}};
  std::deque<std::string> queue{a};
  while (!queue.empty()) {
    const std::string s = queue.front();
    queue.pop_front();
    const std::size_t d = seen[s];
    if (s == b) return d;
    std::vector<std::string> next;
    for (std::size_t i = 0; i < s.size(); ++i) next.push_back(s.substr(0, i) + s.substr(i + 1));
    for (char c : alphabet) {
      for (std::size_t i = 0; i < s.size(); ++i) {
        std::string t = s;
        t[i] = c;
        next.push_back(t);
      }
      if (s.size() < bound) {
        for (std::size_t i = 0; i <= s.size(); ++i) next.push_back(s.substr(0, i) + c + s.substr(i));
      }
    }
    for (auto& t : next) {
      if (seen.emplace(t, d + 1).second) queue.push_back(t);
    }
  }
  return SIZE_MAX;
}

std::vector<std::string> all_strings(const std::string& alphabet, std::size_t max_len) {
  std::vector<std::string> out{""};
  for (std::size_t begin = 0; begin < out.size(); ++begin) {
    if (out[begin].size() == max_len) continue;
    for (char c : alphabet) out.push_back(out[begin] + c);
  }
  return out;
}

TEST(Levenshtein, Examples) {
  EXPECT_EQ(levenshtein(Tokens{"p", "ɛ", "t", "o"}, Tokens{"p", "ɛ", "tː", "o"}), 1u);
  EXPECT_EQ(levenshtein(std::string("kitten"), std::string("sitting")), 3u);
  EXPECT_EQ(levenshtein(Tokens{}, Tokens{"a", "b"}), 2u);
  EXPECT_EQ(levenshtein(Tokens{"a", "b"}, Tokens{}), 2u);
  EXPECT_EQ(levenshtein(Tokens{"ab"}, Tokens{"a", "b"}), 2u);
}

TEST(Levenshtein, MatchesExhaustiveSearch) {
  const std::string alphabet = "abc";
  const auto strings = all_strings(alphabet, 3);
  for (const auto& a : strings) {
    for (const auto& b : strings) {
      ASSERT_EQ(levenshtein(a, b), bfs_distance(a, b, alphabet, 5)) << a << " -> " << b;
    }
  }
}

TEST(Levenshtein, MetricProperties) {
  const auto strings = all_strings("ab", 4);
  for (const auto& a : strings) {
    EXPECT_EQ(levenshtein(a, a), 0u);
    for (const auto& b : strings) {
      const auto ab = levenshtein(a, b);
      EXPECT_EQ(ab, levenshtein(b, a));
      EXPECT_LE(ab, std::max(a.size(), b.size()));
      EXPECT_GE(ab, a.size() > b.size() ? a.size() - b.size() : b.size() - a.size());
      if (a != b) EXPECT_GT(ab, 0u);
    }
  }
  for (const auto& a : all_strings("ab", 2)) {
    for (const auto& b : all_strings("ab", 2)) {
      for (const auto& c : all_strings("ab", 2)) EXPECT_LE(levenshtein(a, c), levenshtein(a, b) + levenshtein(b, c));
    }
  }
}

TEST(Per, PoolsErrorsOverReferences) {
  const auto r = per(std::vector<Tokens>{{"a", "b"}, {"c"}}, std::vector<Tokens>{{"a", "x"}, {"c", "d", "e"}});
  EXPECT_EQ(r.n_errors, 3u);
  EXPECT_EQ(r.n_ref, 5u);
  EXPECT_DOUBLE_EQ(r.per, 60.0);
  EXPECT_DOUBLE_EQ(per(std::vector<Tokens>{{"a"}}, std::vector<Tokens>{{"a"}}).per, 0.0);
  // Insertions can push PER past 100.
  EXPECT_DOUBLE_EQ(per(std::vector<Tokens>{{"x", "y", "z"}}, std::vector<Tokens>{{"a"}}).per, 300.0);
}

TEST(Per, Errors) {
  try {
    per(std::vector<Tokens>{{"a"}}, std::vector<Tokens>{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::LengthMismatch);
  }
  try {
    per(std::vector<Tokens>{{"a"}}, std::vector<Tokens>{{}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyReferenceSet);
  }
}

TEST(Wilson, Examples) {
  auto ci = wilson_ci(0, 100);
  EXPECT_EQ(ci.lo, 0.0);
  EXPECT_NEAR(ci.hi, 0.036993, 1e-6);
  ci = wilson_ci(50, 100);
  EXPECT_NEAR(ci.lo, 0.403832, 1e-6);
  EXPECT_NEAR(ci.hi, 0.596168, 1e-6);
  ci = wilson_ci(100, 100);
  EXPECT_NEAR(ci.lo, 1.0 - 0.036993, 1e-6);
  EXPECT_EQ(ci.hi, 1.0);
  ci = wilson_ci(150, 100);  // clamped proportion
  EXPECT_EQ(ci.hi, 1.0);
  try {
    wilson_ci(0, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ZeroTrials);
  }
}

TEST(Wilson, ContainsObservedProportion) {
  for (std::size_t n : {1u, 7u, 100u, 3500u}) {
    for (std::size_t e = 0; e <= n; e += std::max<std::size_t>(1, n / 13)) {
      const auto ci = wilson_ci(e, n);
      const double p = static_cast<double>(e) / static_cast<double>(n);
      EXPECT_LE(ci.lo, p + 1e-12);
      EXPECT_GE(ci.hi, p - 1e-12);
      EXPECT_GE(ci.lo, 0.0);
      EXPECT_LE(ci.hi, 1.0);
    }
  }
}

TEST(Wilson, QuantileForOtherConfidence) {
  EXPECT_EQ(normal_quantile_two_sided(0.95), kZ95);
  EXPECT_NEAR(normal_quantile_two_sided(0.99), 2.5758293, 1e-6);
  EXPECT_NEAR(normal_quantile_two_sided(0.90), 1.6448536, 1e-6);
}

TEST(ZTest, Example) {
  const auto r = two_prop_ztest(30, 3500, 95, 3500, "pt");
  EXPECT_NEAR(r.z, -5.866, 1e-3);
  EXPECT_NEAR(r.p / 2.227e-9, 1.0, 1e-3);
  EXPECT_EQ(r.language, "pt");
  EXPECT_FALSE(r.degenerate);
}

TEST(ZTest, AntisymmetricAndEqualRates) {
  const auto a = two_prop_ztest(40, 1000, 55, 900);
  const auto b = two_prop_ztest(55, 900, 40, 1000);
  EXPECT_DOUBLE_EQ(a.z, -b.z);
  EXPECT_DOUBLE_EQ(a.p + b.p, 1.0);
  const auto same = two_prop_ztest(10, 100, 20, 200);
  EXPECT_DOUBLE_EQ(same.z, 0.0);
  EXPECT_DOUBLE_EQ(same.p, 0.5);
}

TEST(ZTest, DegeneratePool) {
  const auto zero = two_prop_ztest(0, 500, 0, 500);
  EXPECT_TRUE(zero.degenerate);
  EXPECT_EQ(zero.p, 0.5);
  EXPECT_TRUE(two_prop_ztest(500, 500, 500, 500).degenerate);
  try {
    two_prop_ztest(1, 0, 1, 5);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ZeroTrials);
  }
}

}  // namespace
}  // namespace latg2p
