#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "alignment.hpp"
#include "core_model.hpp"
#include "rng.hpp"

namespace rsd {

struct EmbeddingConfig {
  std::size_t q = 3;
  std::size_t candidate_count = 5;
};

// Which rung of the estimator ladder is active, plus what is known about the
// sequencing protocol. All options off is plain symmetric Monge-Elkan.
struct MatchConfig {
  bool strand_known = true;
  bool orientation_known = true;
  bool use_scaling = false;
  std::optional<MarginGapParams> margin_gaps;
  // Missing-read rule: a best match at distance >= theta' * |a| counts as |a|.
  std::optional<double> threshold_fraction;
  std::optional<EmbeddingConfig> embedding;
  std::optional<double> sample_to_coverage;
  std::uint64_t rng_seed = 0;
  // Exact search only: skip candidates whose q-gram lower bound already
  // reaches the current best. Sound for plain Levenshtein only, so it is
  // ignored when margin gaps are on.
  bool prune_with_qgram_bound = false;
  // Trivial estimator max(|R_A|, |R_B|).
  bool baseline_max_size = false;

  void validate() const {
    if (threshold_fraction && !(*threshold_fraction > 0.0 && *threshold_fraction < 1.0)) {
      throw std::invalid_argument("threshold fraction must lie in (0, 1)");
    }
    if (embedding && (embedding->q == 0 || embedding->q > kMaxQ || embedding->candidate_count == 0)) {
      throw std::invalid_argument("embedding needs 1 <= q <= " + std::to_string(kMaxQ) + " and a positive candidate count");
    }
    if (sample_to_coverage && !(*sample_to_coverage > 0.0)) {
      throw std::invalid_argument("sampling target coverage must be positive");
    }
    if (margin_gaps && (!(margin_gaps->t >= 0.0) || !std::isfinite(margin_gaps->t))) {
      throw std::invalid_argument("margin grace size must be finite and nonnegative");
    }
  }
};

inline constexpr double kDefaultThresholdFraction = 0.35;
inline constexpr double kDefaultSampleCoverage = 2.0;

enum class Preset { baseline, me, mes, mess, messg, messgm, messgq };

inline std::optional<Preset> parse_preset(std::string_view name) {
  if (name == "baseline" || name == "maxsize") return Preset::baseline;
  if (name == "me") return Preset::me;
  if (name == "mes") return Preset::mes;
  if (name == "mess") return Preset::mess;
  if (name == "messg") return Preset::messg;
  if (name == "messgm") return Preset::messgm;
  if (name == "messgq") return Preset::messgq;
  return std::nullopt;
}

// Builds the configuration for a named rung. The margin-gap rungs need the
// grace size, which is derived from coverage and read length unless given.
// "me" maps to the same configuration as "mes": a distance matrix is always
// built from the symmetric form.
inline MatchConfig make_preset(Preset preset, std::optional<double> margin_t = std::nullopt) {
  MatchConfig cfg;
  switch (preset) {
    case Preset::baseline:
      cfg.baseline_max_size = true;
      break;
    case Preset::me:
    case Preset::mes:
      break;
    case Preset::messgq:
      cfg.embedding = EmbeddingConfig{};
      cfg.sample_to_coverage = kDefaultSampleCoverage;
      [[fallthrough]];
    case Preset::messgm:
      cfg.threshold_fraction = kDefaultThresholdFraction;
      [[fallthrough]];
    case Preset::messg:
      if (!margin_t) throw std::invalid_argument("margin-gap presets need the grace size t (or coverage and read length)");
      cfg.margin_gaps = MarginGapParams{*margin_t};
      [[fallthrough]];
    case Preset::mess:
      cfg.use_scaling = true;
      break;
  }
  return cfg;
}

enum class Transform { identity, complement, reverse, reverse_complement };

inline Read apply(Transform transform, const Read& r) {
  switch (transform) {
    case Transform::identity: return r;
    case Transform::complement: return complement(r);
    case Transform::reverse: return reverse(r);
    case Transform::reverse_complement: return reverse_complement(r);
  }
  return r;
}

// A read from the opposite strand is seen reverse-complemented; a read of
// unknown 5'/3' direction may be reversed. With both unknown all four
// combinations are possible.
inline std::vector<Transform> applicable_transforms(const MatchConfig& cfg) {
  std::vector<Transform> transforms{Transform::identity};
  if (!cfg.strand_known) transforms.push_back(Transform::reverse_complement);
  if (!cfg.orientation_known) transforms.push_back(Transform::reverse);
  if (!cfg.strand_known && !cfg.orientation_known) transforms.push_back(Transform::complement);
  return transforms;
}

inline double base_distance(std::string_view a, std::string_view b, const MatchConfig& cfg) {
  if (cfg.margin_gaps) return margin_gap_levenshtein(a, b, *cfg.margin_gaps);
  return static_cast<double>(levenshtein(a, b));
}

// Minimum base distance between a and the applicable transforms of b.
inline double variant_distance(const Read& a, const Read& b, const MatchConfig& cfg) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto transform : applicable_transforms(cfg)) {
    best = std::min(best, base_distance(a, apply(transform, b), cfg));
  }
  return best;
}

// Missing-read rule applied to a best-match distance.
inline double apply_threshold(double best, std::size_t read_length, const MatchConfig& cfg) {
  if (!cfg.threshold_fraction) return best;
  const double l = static_cast<double>(read_length);
  return best >= *cfg.threshold_fraction * l ? l : best;
}

// Uniform sample without replacement of round(|R| * target / coverage) reads,
// kept in their original order. A set already at or below the target is
// returned unchanged.
inline ReadSet downsample(const ReadSet& reads, double target_coverage, std::uint64_t seed) {
  if (!(target_coverage > 0.0)) throw std::invalid_argument("target coverage must be positive");
  const auto coverage = reads.declared_coverage();
  if (!coverage) {
    throw Error("read set '" + reads.label() +
                "' has no declared coverage; supply it (--coverage or a #coverage= line) or disable sampling");
  }
  if (*coverage <= target_coverage) return reads;

  const auto n = reads.size();
  auto keep = static_cast<std::size_t>(std::llround(static_cast<double>(n) * target_coverage / *coverage));
  keep = std::clamp<std::size_t>(keep, n == 0 ? 0 : 1, n);

  std::vector<std::size_t> index(n);
  std::iota(index.begin(), index.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t i = 0; i < keep; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.below(n - i));
    std::swap(index[i], index[j]);
  }
  index.resize(keep);
  std::sort(index.begin(), index.end());

  std::vector<Read> sampled;
  sampled.reserve(keep);
  for (const auto i : index) sampled.push_back(reads[i]);
  return ReadSet(reads.label(), std::move(sampled), target_coverage, reads.declared_read_length());
}

// Seed used when down-sampling a particular set under cfg.
inline std::uint64_t sampling_seed(const ReadSet& reads, const MatchConfig& cfg) {
  return derive_seed(cfg.rng_seed, reads.label());
}

// A read set after down-sampling, with its transform variants and (if
// needed) their q-gram profiles computed once.
struct PreparedSet {
  std::string label;
  std::vector<Read> reads;
  std::size_t original_size = 0;
  std::vector<Transform> transforms;
  std::vector<std::vector<Read>> variants;                 // [transform][read]
  std::vector<std::vector<QGramProfile>> variant_profiles;  // [transform][read], if profiles are kept
  std::size_t profile_q = 0;

  const QGramProfile& profile(std::size_t read) const { return variant_profiles.front()[read]; }
};

inline bool needs_profiles(const MatchConfig& cfg) {
  return cfg.embedding.has_value() || (cfg.prune_with_qgram_bound && !cfg.margin_gaps);
}

inline PreparedSet prepare(const ReadSet& source, const MatchConfig& cfg) {
  cfg.validate();
  if (source.empty()) throw Error("empty read set '" + source.label() + "'");
  PreparedSet prepared;
  prepared.label = source.label();
  prepared.original_size = source.size();
  if (cfg.sample_to_coverage) {
    prepared.reads = downsample(source, *cfg.sample_to_coverage, sampling_seed(source, cfg)).reads();
  } else {
    prepared.reads = source.reads();
  }
  prepared.transforms = applicable_transforms(cfg);
  for (const auto transform : prepared.transforms) {
    std::vector<Read> variant;
    variant.reserve(prepared.reads.size());
    for (const auto& r : prepared.reads) variant.push_back(apply(transform, r));
    prepared.variants.push_back(std::move(variant));
  }
  if (needs_profiles(cfg)) {
    prepared.profile_q = cfg.embedding ? cfg.embedding->q : EmbeddingConfig{}.q;
    for (const auto& variant : prepared.variants) {
      std::vector<QGramProfile> profiles;
      profiles.reserve(variant.size());
      for (const auto& r : variant) profiles.push_back(qgram_profile(r, prepared.profile_q));
      prepared.variant_profiles.push_back(std::move(profiles));
    }
  }
  return prepared;
}

// Approximate best match: per transform, the c reads of `others` closest to a
// in q-gram distance (ties by read index) are candidates; the result is the
// smallest variant distance over the candidates. Never below the exact
// minimum, and equal to it once c >= |others|.
inline double best_match_approx(const Read& a, const QGramProfile& a_profile, const PreparedSet& others,
                                const MatchConfig& cfg) {
  if (!cfg.embedding) throw std::invalid_argument("best_match_approx needs an embedding configuration");
  if (others.variant_profiles.empty()) throw std::invalid_argument("prepared set has no q-gram profiles");
  const auto n = others.reads.size();
  const auto c = std::min(cfg.embedding->candidate_count, n);

  std::vector<char> chosen(n, 0);
  std::vector<std::pair<std::uint64_t, std::size_t>> ranked(n);
  for (const auto& profiles : others.variant_profiles) {
    for (std::size_t j = 0; j < n; ++j) ranked[j] = {qgram_distance(a_profile, profiles[j]), j};
    std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(c), ranked.end());
    for (std::size_t k = 0; k < c; ++k) chosen[ranked[k].second] = 1;
  }

  double best = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < n; ++j) {
    if (!chosen[j]) continue;
    for (const auto& variant : others.variants) best = std::min(best, base_distance(a, variant[j], cfg));
  }
  return best;
}

inline double best_match_approx(const Read& a, const ReadSet& others, const MatchConfig& cfg) {
  MatchConfig no_sampling = cfg;
  no_sampling.sample_to_coverage.reset();
  const auto prepared = prepare(others, no_sampling);
  return best_match_approx(a, qgram_profile(a, cfg.embedding ? cfg.embedding->q : 3), prepared, cfg);
}

namespace detail {

inline double best_match_exact(const Read& a, const PreparedSet& others, const MatchConfig& cfg,
                               const QGramProfile* a_profile) {
  const bool prune = cfg.prune_with_qgram_bound && !cfg.margin_gaps && a_profile && !others.variant_profiles.empty();
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t v = 0; v < others.variants.size(); ++v) {
    const auto& variant = others.variants[v];
    for (std::size_t j = 0; j < variant.size(); ++j) {
      if (prune && best < std::numeric_limits<double>::infinity()) {
        const double lower = static_cast<double>(qgram_distance(*a_profile, others.variant_profiles[v][j])) / 6.0;
        if (lower >= best) continue;
      }
      best = std::min(best, base_distance(a, variant[j], cfg));
      if (best == 0.0) return best;
    }
  }
  return best;
}

// Directed Monge-Elkan over prepared sets: mean over reads of `from` of the
// (thresholded) best-match distance into `to`.
inline double me_directed_prepared(const PreparedSet& from, const PreparedSet& to, const MatchConfig& cfg) {
  double sum = 0.0;
  for (std::size_t i = 0; i < from.reads.size(); ++i) {
    const auto& a = from.reads[i];
    const QGramProfile* a_profile = from.variant_profiles.empty() ? nullptr : &from.profile(i);
    const double best = cfg.embedding ? best_match_approx(a, *a_profile, to, cfg) : best_match_exact(a, to, cfg, a_profile);
    sum += apply_threshold(best, a.size(), cfg);
  }
  return sum / static_cast<double>(from.reads.size());
}

// Symmetric Monge-Elkan over prepared sets. In the exact case the read-pair
// distances are symmetric under the transform group, so one |A| x |B| table
// serves both directions.
inline double mes_prepared(const PreparedSet& a, const PreparedSet& b, const MatchConfig& cfg) {
  if (cfg.embedding || cfg.prune_with_qgram_bound) {
    return 0.5 * (me_directed_prepared(a, b, cfg) + me_directed_prepared(b, a, cfg));
  }
  const auto n = a.reads.size(), m = b.reads.size();
  std::vector<double> row_best(n, std::numeric_limits<double>::infinity());
  std::vector<double> col_best(m, std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      double d = std::numeric_limits<double>::infinity();
      for (const auto& variant : b.variants) d = std::min(d, base_distance(a.reads[i], variant[j], cfg));
      row_best[i] = std::min(row_best[i], d);
      col_best[j] = std::min(col_best[j], d);
    }
  }
  double sum_a = 0.0, sum_b = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum_a += apply_threshold(row_best[i], a.reads[i].size(), cfg);
  for (std::size_t j = 0; j < m; ++j) sum_b += apply_threshold(col_best[j], b.reads[j].size(), cfg);
  return 0.5 * (sum_a / static_cast<double>(n) + sum_b / static_cast<double>(m));
}

inline double set_distance_prepared(const PreparedSet& a, const PreparedSet& b, const MatchConfig& cfg) {
  if (cfg.baseline_max_size) return static_cast<double>(std::max(a.original_size, b.original_size));
  const double value = mes_prepared(a, b, cfg);
  if (!cfg.use_scaling) return value;
  return static_cast<double>(std::max(a.original_size, b.original_size)) * value;
}

inline MatchConfig without_sampling(MatchConfig cfg) {
  cfg.sample_to_coverage.reset();
  return cfg;
}

}  // namespace detail

// (1/|R_A|) Σ_a min_b variant_distance(a, b), with the missing-read rule when
// configured. Sampling is not applied here.
inline double me_directed(const ReadSet& from, const ReadSet& to, const MatchConfig& cfg) {
  const auto plain = detail::without_sampling(cfg);
  return detail::me_directed_prepared(prepare(from, plain), prepare(to, plain), plain);
}

// ½ (ME(A, B) + ME(B, A)). Sampling is not applied here.
inline double mes(const ReadSet& a, const ReadSet& b, const MatchConfig& cfg) {
  const auto plain = detail::without_sampling(cfg);
  return detail::mes_prepared(prepare(a, plain), prepare(b, plain), plain);
}

// The configured estimator: optional down-sampling, symmetric Monge-Elkan,
// optional scaling by the original max cardinality.
inline double set_distance(const ReadSet& a, const ReadSet& b, const MatchConfig& cfg) {
  return detail::set_distance_prepared(prepare(a, cfg), prepare(b, cfg), cfg);
}

// Symmetric matrix over labeled items, row-major, zero diagonal.
class DistanceMatrix {
 public:
  DistanceMatrix() = default;
  explicit DistanceMatrix(std::vector<std::string> labels)
      : labels_(std::move(labels)), values_(labels_.size() * labels_.size(), 0.0) {}

  std::size_t size() const noexcept { return labels_.size(); }
  const std::vector<std::string>& labels() const noexcept { return labels_; }

  double operator()(std::size_t i, std::size_t j) const noexcept { return values_[i * size() + j]; }

  void set(std::size_t i, std::size_t j, double value) {
    if (!std::isfinite(value) || value < 0.0) throw std::invalid_argument("distance must be finite and nonnegative");
    values_[i * size() + j] = value;
    values_[j * size() + i] = value;
  }

  std::optional<std::size_t> index_of(std::string_view label) const {
    const auto it = std::find(labels_.begin(), labels_.end(), label);
    if (it == labels_.end()) return std::nullopt;
    return static_cast<std::size_t>(it - labels_.begin());
  }

  // Same items, rows and columns permuted to follow `order` (a permutation of labels()).
  DistanceMatrix reordered(const std::vector<std::string>& order) const {
    if (order.size() != size()) throw std::invalid_argument("reordering must list every label once");
    std::vector<std::size_t> source(order.size());
    std::vector<char> used(size(), 0);
    for (std::size_t i = 0; i < order.size(); ++i) {
      std::optional<std::size_t> found;
      for (std::size_t k = 0; k < size(); ++k) {
        if (!used[k] && labels_[k] == order[i]) {
          found = k;
          break;
        }
      }
      if (!found) throw std::invalid_argument("label '" + order[i] + "' is not in the matrix");
      used[*found] = 1;
      source[i] = *found;
    }
    DistanceMatrix out(order);
    for (std::size_t i = 0; i < size(); ++i) {
      for (std::size_t j = i + 1; j < size(); ++j) out.set(i, j, (*this)(source[i], source[j]));
    }
    return out;
  }

  friend bool operator==(const DistanceMatrix&, const DistanceMatrix&) = default;

 private:
  std::vector<std::string> labels_;
  std::vector<double> values_;
};

inline std::size_t default_thread_count() {
  const auto n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : n;
}

namespace detail {

// Runs job(k) for k in [0, count) on up to `threads` workers. The first
// exception (lowest k) is rethrown after all workers finish.
template <typename Job>
void parallel_for(std::size_t count, std::size_t threads, Job&& job) {
  threads = std::max<std::size_t>(1, std::min(threads, count));
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k; (k = next.fetch_add(1)) < count;) {
      try {
        job(k);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace detail

// Pairwise set distances. Each unordered pair is computed once by whichever
// worker claims it; sampling seeds depend on set labels only, so the result
// is identical for any thread count.
inline DistanceMatrix distance_matrix(const std::vector<ReadSet>& sets, const MatchConfig& cfg,
                                      std::size_t threads = 1) {
  cfg.validate();
  if (sets.size() < 2) throw std::invalid_argument("a distance matrix needs at least two read sets");
  for (const auto& s : sets) {
    if (s.empty()) throw Error("empty read set '" + s.label() + "'");
  }

  std::vector<PreparedSet> prepared(sets.size());
  detail::parallel_for(sets.size(), threads, [&](std::size_t i) { prepared[i] = prepare(sets[i], cfg); });

  std::vector<std::string> labels;
  labels.reserve(sets.size());
  for (const auto& s : sets) labels.push_back(s.label());
  DistanceMatrix matrix(std::move(labels));

  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < sets.size(); ++i) {
    for (std::size_t j = i + 1; j < sets.size(); ++j) pairs.emplace_back(i, j);
  }
  std::vector<double> values(pairs.size());
  detail::parallel_for(pairs.size(), threads, [&](std::size_t k) {
    const auto [i, j] = pairs[k];
    try {
      values[k] = detail::set_distance_prepared(prepared[i], prepared[j], cfg);
    } catch (const std::exception& e) {
      throw Error("pair (" + sets[i].label() + ", " + sets[j].label() + "): " + e.what());
    }
  });
  for (std::size_t k = 0; k < pairs.size(); ++k) matrix.set(pairs[k].first, pairs[k].second, values[k]);
  return matrix;
}

}  // namespace rsd
