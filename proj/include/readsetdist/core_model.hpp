#pragma once

#include <algorithm>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace rsd {

// Domain errors: bad input data, missing metadata, failed I/O.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A symbol outside {A, C, G, T} was found where a nucleotide was required.
class InvalidSymbol : public Error {
 public:
  InvalidSymbol(char symbol, std::size_t position)
      : Error(std::string("invalid nucleotide '") + symbol + "' at position " + std::to_string(position)),
        symbol_(symbol),
        position_(position) {}

  char symbol() const noexcept { return symbol_; }
  std::size_t position() const noexcept { return position_; }

 private:
  char symbol_;
  std::size_t position_;
};

inline constexpr std::string_view kAlphabet = "ACGT";

constexpr bool is_nucleotide(char c) noexcept { return c == 'A' || c == 'C' || c == 'G' || c == 'T'; }

// A=0, C=1, G=2, T=3. Undefined for non-nucleotides.
constexpr unsigned nucleotide_code(char c) noexcept {
  switch (c) {
    case 'A': return 0;
    case 'C': return 1;
    case 'G': return 2;
    default: return 3;
  }
}

constexpr char complement_symbol(char c) noexcept {
  switch (c) {
    case 'A': return 'T';
    case 'T': return 'A';
    case 'C': return 'G';
    case 'G': return 'C';
    default: return c;
  }
}

// A DNA string over {A, C, G, T}. Immutable once constructed; the constructor
// rejects anything else, so every Read in the program is valid.
class Read {
 public:
  Read() = default;

  explicit Read(std::string symbols) : symbols_(std::move(symbols)) {
    for (std::size_t i = 0; i < symbols_.size(); ++i) {
      if (!is_nucleotide(symbols_[i])) throw InvalidSymbol(symbols_[i], i);
    }
  }

  explicit Read(std::string_view symbols) : Read(std::string(symbols)) {}
  explicit Read(const char* symbols) : Read(std::string(symbols)) {}

  // Upper-cases the input before validating it.
  static Read normalized(std::string_view raw) {
    std::string upper(raw);
    std::transform(upper.begin(), upper.end(), upper.begin(), [](unsigned char c) {
      return static_cast<char>(c >= 'a' && c <= 'z' ? c - 'a' + 'A' : c);
    });
    return Read(std::move(upper));
  }

  const std::string& str() const noexcept { return symbols_; }
  std::string_view view() const noexcept { return symbols_; }
  operator std::string_view() const noexcept { return symbols_; }

  std::size_t size() const noexcept { return symbols_.size(); }
  bool empty() const noexcept { return symbols_.empty(); }
  char operator[](std::size_t i) const noexcept { return symbols_[i]; }

  auto begin() const noexcept { return symbols_.begin(); }
  auto end() const noexcept { return symbols_.end(); }

  friend bool operator==(const Read&, const Read&) = default;
  friend auto operator<=>(const Read&, const Read&) = default;

 private:
  struct Unchecked {};
  Read(std::string symbols, Unchecked) : symbols_(std::move(symbols)) {}

  friend Read complement(const Read&);
  friend Read reverse(const Read&);
  friend Read reverse_complement(const Read&);

  std::string symbols_;
};

inline Read complement(const Read& r) {
  std::string out(r.symbols_);
  std::transform(out.begin(), out.end(), out.begin(), complement_symbol);
  return Read(std::move(out), Read::Unchecked{});
}

inline Read reverse(const Read& r) { return Read(std::string(r.symbols_.rbegin(), r.symbols_.rend()), Read::Unchecked{}); }

inline Read reverse_complement(const Read& r) {
  std::string out(r.symbols_.rbegin(), r.symbols_.rend());
  std::transform(out.begin(), out.end(), out.begin(), complement_symbol);
  return Read(std::move(out), Read::Unchecked{});
}

// A labeled multiset of reads. Duplicates are kept and counted. Coverage and
// read length are optional sequencing metadata used by sampling and by the
// margin-gap grace size.
class ReadSet {
 public:
  ReadSet() = default;

  ReadSet(std::string label, std::vector<Read> reads, std::optional<double> declared_coverage = std::nullopt,
          std::optional<std::size_t> declared_read_length = std::nullopt)
      : label_(std::move(label)),
        reads_(std::move(reads)),
        declared_coverage_(declared_coverage),
        declared_read_length_(declared_read_length) {
    if (declared_coverage_ && !(*declared_coverage_ > 0.0)) {
      throw std::invalid_argument("read set '" + label_ + "': declared coverage must be positive");
    }
    if (declared_read_length_ && *declared_read_length_ == 0) {
      throw std::invalid_argument("read set '" + label_ + "': declared read length must be positive");
    }
    for (const auto& r : reads_) {
      if (r.empty()) throw std::invalid_argument("read set '" + label_ + "' contains an empty read");
    }
  }

  const std::string& label() const noexcept { return label_; }
  const std::vector<Read>& reads() const noexcept { return reads_; }
  std::size_t size() const noexcept { return reads_.size(); }
  bool empty() const noexcept { return reads_.empty(); }
  const Read& operator[](std::size_t i) const noexcept { return reads_[i]; }

  auto begin() const noexcept { return reads_.begin(); }
  auto end() const noexcept { return reads_.end(); }

  std::optional<double> declared_coverage() const noexcept { return declared_coverage_; }
  std::optional<std::size_t> declared_read_length() const noexcept { return declared_read_length_; }

  // Multiset union R ⊎ S, keeping this set's label and metadata.
  ReadSet merged_with(const ReadSet& other) const {
    std::vector<Read> all(reads_);
    all.insert(all.end(), other.reads_.begin(), other.reads_.end());
    return ReadSet(label_, std::move(all), declared_coverage_, declared_read_length_);
  }

 private:
  std::string label_;
  std::vector<Read> reads_;
  std::optional<double> declared_coverage_;
  std::optional<std::size_t> declared_read_length_;
};

// Order-insensitive multiset comparison of the reads (labels are ignored).
inline bool same_multiset(const ReadSet& a, const ReadSet& b) {
  if (a.size() != b.size()) return false;
  std::vector<Read> x(a.reads()), y(b.reads());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  return x == y;
}

struct SequenceRecord {
  std::string identifier;
  Read sequence;
};

}  // namespace rsd
