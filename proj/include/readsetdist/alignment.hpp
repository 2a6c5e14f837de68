#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "core_model.hpp"
#include "log.hpp"

namespace rsd {

// Edit distance with unit costs, two-row Wagner-Fischer over the shorter string.
inline std::size_t levenshtein(std::string_view a, std::string_view b) {
  if (a.size() < b.size()) std::swap(a, b);
  // b is now the shorter one; the row is indexed by it.
  std::vector<std::size_t> row(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    const char ai = a[i - 1];
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      const std::size_t best = std::min({diag + (ai != b[j - 1] ? 1u : 0u), up + 1, row[j - 1] + 1});
      diag = up;
      row[j] = best;
    }
  }
  return row[b.size()];
}

// Grace margin t for the margin-gap penalty schedule. Real valued; the
// schedule compares integer positions against it directly.
struct MarginGapParams {
  double t = 0.0;

  // Throws unless 0 <= t < length/2.
  void check_applicable(std::size_t length) const {
    if (!(t >= 0.0) || !std::isfinite(t)) {
      throw std::invalid_argument("margin grace size t must be a finite nonnegative number");
    }
    if (!(t < static_cast<double>(length) / 2.0)) {
      throw std::invalid_argument("margin grace size t = " + std::to_string(t) +
                                  " is not below half the string length " + std::to_string(length));
    }
  }
};

// t = (l/alpha - 1) / 2, clamped at 0. Callers still have to check t < l/2
// (MarginGapParams::check_applicable) before using it.
inline double compute_margin_t(std::size_t read_length, double alpha) {
  if (read_length == 0) throw std::invalid_argument("read length must be positive");
  if (!(alpha > 0.0)) throw std::invalid_argument("coverage must be positive");
  const double t = 0.5 * (static_cast<double>(read_length) / alpha - 1.0);
  if (t < 0.0) {
    warn("margin grace size formula is negative for l=" + std::to_string(read_length) +
         ", coverage=" + std::to_string(alpha) + "; using t = 0");
    return 0.0;
  }
  return t;
}

// Cost of the x-th symbol (0-based, counted inward from the string boundary)
// of a margin gap in a string of length l:
//   0                          if x <= t - 1
//   2 (x - t + 1) / (l + 1 - 2t)  if t - 1 < x <= l - t
//   2                          if l - t < x < l
// For every valid t the l costs sum to exactly l.
inline double margin_gap_penalty(std::size_t x, std::size_t l, double t) {
  if (x >= l) throw std::invalid_argument("margin gap position must be below the string length");
  MarginGapParams{t}.check_applicable(l);
  const double xd = static_cast<double>(x);
  const double ld = static_cast<double>(l);
  if (xd <= t - 1.0) return 0.0;
  if (xd <= ld - t) return 2.0 * (xd - t + 1.0) / (ld + 1.0 - 2.0 * t);
  return 2.0;
}

namespace detail {

inline std::vector<double> margin_schedule(std::size_t l, double t) {
  std::vector<double> g(l);
  for (std::size_t x = 0; x < l; ++x) g[x] = margin_gap_penalty(x, l, t);
  return g;
}

}  // namespace detail

// Global alignment cost where gaps touching either end of either string are
// charged by the margin schedule of the string whose symbols they skip, and
// every other edit costs 1. The first row/column accumulate g(0), g(1), ...
// from the leading boundary; steps along the last row/column that consume
// position j of a string of length n cost g(n - 1 - j). The distance from a
// word w to the empty word is |w|.
inline double margin_gap_levenshtein(std::string_view a, std::string_view b, const MarginGapParams& params) {
  if (!a.empty()) params.check_applicable(a.size());
  if (!b.empty()) params.check_applicable(b.size());

  const std::size_t n = a.size();
  const std::size_t m = b.size();
  const auto ga = detail::margin_schedule(n, params.t);
  const auto gb = detail::margin_schedule(m, params.t);

  std::vector<double> prev(m + 1), cur(m + 1);
  prev[0] = 0.0;
  for (std::size_t j = 1; j <= m; ++j) prev[j] = prev[j - 1] + gb[j - 1];

  for (std::size_t i = 1; i <= n; ++i) {
    const bool last_row = (i == n);
    const char ai = a[i - 1];
    cur[0] = prev[0] + ga[i - 1];
    for (std::size_t j = 1; j <= m; ++j) {
      const double diag = prev[j - 1] + (ai != b[j - 1] ? 1.0 : 0.0);
      const double up = prev[j] + (j == m ? ga[n - i] : 1.0);
      const double left = cur[j - 1] + (last_row ? gb[m - j] : 1.0);
      cur[j] = std::min({diag, up, left});
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

// Dense occurrence counts of all |Σ|^q q-grams, indexed by the base-4 value of
// the q-gram (A=0, C=1, G=2, T=3; first symbol most significant).
struct QGramProfile {
  std::size_t q = 0;
  std::vector<std::uint32_t> counts;

  std::uint32_t count(std::string_view gram) const {
    if (gram.size() != q) throw std::invalid_argument("q-gram has the wrong length");
    std::size_t index = 0;
    for (const char c : gram) {
      if (!is_nucleotide(c)) throw InvalidSymbol(c, 0);
      index = index * 4 + nucleotide_code(c);
    }
    return counts[index];
  }

  std::uint64_t total() const {
    std::uint64_t sum = 0;
    for (const auto c : counts) sum += c;
    return sum;
  }
};

inline constexpr std::size_t kMaxQ = 12;

inline QGramProfile qgram_profile(std::string_view a, std::size_t q) {
  if (q == 0 || q > kMaxQ) throw std::invalid_argument("q must be in [1, " + std::to_string(kMaxQ) + "]");
  QGramProfile profile{q, std::vector<std::uint32_t>(std::size_t{1} << (2 * q), 0)};
  if (a.size() < q) return profile;
  const std::size_t mask = profile.counts.size() - 1;
  std::size_t window = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    window = ((window << 2) | nucleotide_code(a[i])) & mask;
    if (i + 1 >= q) ++profile.counts[window];
  }
  return profile;
}

// Manhattan distance between two profiles of the same q.
inline std::uint64_t qgram_distance(const QGramProfile& x, const QGramProfile& y) {
  if (x.q != y.q) throw std::invalid_argument("q-gram profiles have different q");
  std::uint64_t sum = 0;
  for (std::size_t i = 0; i < x.counts.size(); ++i) {
    const auto u = x.counts[i], v = y.counts[i];
    sum += u > v ? u - v : v - u;
  }
  return sum;
}

inline std::uint64_t qgram_distance(std::string_view a, std::string_view b, std::size_t q) {
  return qgram_distance(qgram_profile(a, q), qgram_profile(b, q));
}

}  // namespace rsd
