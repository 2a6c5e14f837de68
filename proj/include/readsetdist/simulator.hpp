#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "alignment.hpp"
#include "core_model.hpp"
#include "readset_distance.hpp"
#include "rng.hpp"

namespace rsd {

struct SimulationParams {
  double alpha = 2.0;
  std::size_t read_length = 100;
  bool strand_noise = false;
  bool orientation_noise = false;
  std::uint64_t rng_seed = 0;
};

// floor(alpha * |A| / l) reads, each a uniformly placed length-l substring of
// A drawn with replacement. Strand noise reverse-complements a read with
// probability 1/2; orientation noise independently reverses it with
// probability 1/2.
inline ReadSet sample_reads(const SequenceRecord& source, const SimulationParams& p) {
  const auto& seq = source.sequence;
  if (p.read_length == 0) throw std::invalid_argument("read length must be positive");
  if (!(p.alpha > 0.0)) throw std::invalid_argument("coverage must be positive");
  if (seq.size() < p.read_length) {
    throw Error("sequence '" + source.identifier + "' (length " + std::to_string(seq.size()) +
                ") is shorter than the read length " + std::to_string(p.read_length));
  }
  const double expected = p.alpha * static_cast<double>(seq.size()) / static_cast<double>(p.read_length);
  const auto count = static_cast<std::size_t>(std::floor(expected));
  if (count == 0) throw Error("coverage too low: sequence '" + source.identifier + "' would get no reads");

  const std::uint64_t positions = seq.size() - p.read_length + 1;
  Rng rng(p.rng_seed);
  std::vector<Read> reads;
  reads.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const auto start = static_cast<std::size_t>(rng.below(positions));
    Read r(seq.view().substr(start, p.read_length));
    if (p.strand_noise && rng.coin()) r = reverse_complement(r);
    if (p.orientation_noise && rng.coin()) r = reverse(r);
    reads.push_back(std::move(r));
  }
  return ReadSet(source.identifier, std::move(reads), p.alpha, p.read_length);
}

struct MutationParams {
  double substitution_rate = 0.0;
  double insertion_rate = 0.0;
  double deletion_rate = 0.0;
  std::uint64_t rng_seed = 0;

  void validate() const {
    for (const double r : {substitution_rate, insertion_rate, deletion_rate}) {
      if (!(r >= 0.0 && r < 1.0)) throw std::invalid_argument("mutation rates must lie in [0, 1)");
    }
    if (!(substitution_rate + insertion_rate + deletion_rate < 1.0)) {
      throw std::invalid_argument("mutation rates must sum to less than 1");
    }
  }
};

// Independent per-site edits: each source position is substituted (to a
// different symbol), deleted, or preceded by a random inserted symbol, with
// the given probabilities; otherwise it is copied.
inline SequenceRecord mutate(const SequenceRecord& source, const MutationParams& m) {
  m.validate();
  Rng rng(m.rng_seed);
  std::string out;
  out.reserve(source.sequence.size() + source.sequence.size() / 8 + 1);
  const double sub_end = m.substitution_rate;
  const double del_end = sub_end + m.deletion_rate;
  const double ins_end = del_end + m.insertion_rate;
  for (const char c : source.sequence) {
    const double u = rng.unit();
    if (u < sub_end) {
      // One of the three other symbols.
      const auto shift = 1 + rng.below(3);
      out.push_back(kAlphabet[(nucleotide_code(c) + shift) % 4]);
    } else if (u < del_end) {
      continue;
    } else if (u < ins_end) {
      out.push_back(kAlphabet[rng.below(4)]);
      out.push_back(c);
    } else {
      out.push_back(c);
    }
  }
  return SequenceRecord{source.identifier, Read(std::move(out))};
}

inline Read random_sequence(std::size_t length, std::uint64_t seed) {
  Rng rng(seed);
  std::string s(length, 'A');
  for (auto& c : s) c = kAlphabet[rng.below(4)];
  return Read(std::move(s));
}

// One edge of a family tree: node `label` is derived from its parent by
// mutation. parent == std::nullopt means the random ancestor.
struct FamilyEdge {
  std::string label;
  std::optional<std::size_t> parent;
  MutationParams mutation;  // rng_seed is ignored; make_family derives per-edge seeds
};

struct FamilySpec {
  std::vector<FamilyEdge> edges;  // parents must precede children
};

struct Family {
  std::vector<SequenceRecord> sequences;  // one per edge, in edge order
  DistanceMatrix reference;               // exact pairwise Levenshtein
};

inline DistanceMatrix levenshtein_matrix(const std::vector<SequenceRecord>& sequences, std::size_t threads = 1) {
  std::vector<std::string> labels;
  for (const auto& s : sequences) labels.push_back(s.identifier);
  DistanceMatrix matrix(std::move(labels));
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < sequences.size(); ++i) {
    for (std::size_t j = i + 1; j < sequences.size(); ++j) pairs.emplace_back(i, j);
  }
  std::vector<double> values(pairs.size());
  detail::parallel_for(pairs.size(), threads, [&](std::size_t k) {
    values[k] = static_cast<double>(levenshtein(sequences[pairs[k].first].sequence, sequences[pairs[k].second].sequence));
  });
  for (std::size_t k = 0; k < pairs.size(); ++k) matrix.set(pairs[k].first, pairs[k].second, values[k]);
  return matrix;
}

inline Family make_family(std::size_t ancestor_length, const FamilySpec& spec, std::uint64_t rng_seed,
                          std::size_t threads = 1) {
  if (ancestor_length == 0) throw std::invalid_argument("ancestor length must be positive");
  const SequenceRecord ancestor{"ancestor", random_sequence(ancestor_length, derive_seed(rng_seed, "ancestor"))};
  Family family;
  for (std::size_t i = 0; i < spec.edges.size(); ++i) {
    const auto& edge = spec.edges[i];
    if (edge.parent && *edge.parent >= i) throw std::invalid_argument("family edge '" + edge.label + "' precedes its parent");
    const auto& parent = edge.parent ? family.sequences[*edge.parent] : ancestor;
    auto params = edge.mutation;
    params.rng_seed = derive_seed(rng_seed, static_cast<std::uint64_t>(i));
    auto child = mutate(parent, params);
    child.identifier = edge.label;
    family.sequences.push_back(std::move(child));
  }
  family.reference = levenshtein_matrix(family.sequences, threads);
  return family;
}

// A chain of `chain_length` sequences, each mutated from the previous one at
// `chain_rate`, plus `star_rates.size()` sequences mutated directly from the
// ancestor at the given rates. Rates split 80/10/10 into substitutions,
// insertions and deletions.
inline FamilySpec star_plus_chain(std::size_t chain_length, double chain_rate, const std::vector<double>& star_rates) {
  auto split = [](double rate) { return MutationParams{0.8 * rate, 0.1 * rate, 0.1 * rate, 0}; };
  FamilySpec spec;
  for (std::size_t i = 0; i < chain_length; ++i) {
    std::optional<std::size_t> parent;
    if (i > 0) parent = i - 1;
    spec.edges.push_back({"chain" + std::to_string(i + 1), parent, split(chain_rate)});
  }
  for (std::size_t i = 0; i < star_rates.size(); ++i) {
    spec.edges.push_back({"star" + std::to_string(i + 1), std::nullopt, split(star_rates[i])});
  }
  return spec;
}

}  // namespace rsd
