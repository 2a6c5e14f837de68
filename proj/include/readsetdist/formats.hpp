#pragma once

#include <cctype>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "core_model.hpp"
#include "log.hpp"
#include "phylo.hpp"
#include "readset_distance.hpp"

namespace rsd {

// Text formats: FASTA and one-read-per-line read sets (with an optional
// "#coverage=... #readlen=..." metadata line), square PHYLIP matrices, and
// Newick trees with branch lengths.

struct FastaRecord {
  std::string identifier;
  std::string sequence;  // raw, as found in the file (line breaks removed)
  std::size_t line = 0;  // line of the header
};

struct ReadMetadata {
  std::optional<double> coverage;
  std::optional<std::size_t> read_length;
};

// How to treat reads or sequences containing symbols outside {A, C, G, T}.
enum class AmbiguityPolicy {
  reject,     // drop the record with a warning
  replace_n,  // turn N into A; other symbols still reject
};

namespace detail {

inline std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

inline std::string located(const std::string& source, std::size_t line, const std::string& message) {
  return source + ":" + std::to_string(line) + ": " + message;
}

// Parses "#coverage=2.5 #readlen=100" (either key optional, any order).
inline void parse_metadata_line(std::string_view line, ReadMetadata& meta, const std::string& source, std::size_t line_no) {
  std::istringstream in{std::string(line)};
  std::string token;
  while (in >> token) {
    while (!token.empty() && token.front() == '#') token.erase(token.begin());
    const auto eq = token.find('=');
    if (eq == std::string::npos) continue;
    const auto key = token.substr(0, eq);
    const auto value = token.substr(eq + 1);
    try {
      std::size_t used = 0;
      if (key == "coverage") {
        meta.coverage = std::stod(value, &used);
        if (!(*meta.coverage > 0.0)) throw std::invalid_argument("nonpositive");
      } else if (key == "readlen") {
        const auto v = std::stoll(value, &used);
        if (v <= 0) throw std::invalid_argument("nonpositive");
        meta.read_length = static_cast<std::size_t>(v);
      } else {
        continue;
      }
      if (used != value.size()) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      throw Error(located(source, line_no, "bad metadata value '" + token + "'"));
    }
  }
}

inline std::optional<Read> to_read(std::string raw, AmbiguityPolicy policy, const std::string& what) {
  for (auto& c : raw) {
    c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    if (c == 'N' && policy == AmbiguityPolicy::replace_n) c = 'A';
  }
  try {
    return Read(std::move(raw));
  } catch (const InvalidSymbol& e) {
    warn(what + ": " + e.what() + "; record skipped");
    return std::nullopt;
  }
}

}  // namespace detail

// Reads FASTA records. Leading '#' lines are parsed as metadata into `meta`
// when given. Blank lines are ignored. Sequence data before the first header
// or an empty identifier is an error naming the line.
inline std::vector<FastaRecord> parse_fasta(std::istream& in, const std::string& source, ReadMetadata* meta = nullptr) {
  std::vector<FastaRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto text = detail::trim(line);
    if (text.empty()) continue;
    if (text.front() == '#') {
      if (!records.empty()) throw Error(detail::located(source, line_no, "metadata line after the first record"));
      if (meta) detail::parse_metadata_line(text, *meta, source, line_no);
      continue;
    }
    if (text.front() == '>') {
      std::istringstream header(text.substr(1));
      std::string id;
      header >> id;
      if (id.empty()) throw Error(detail::located(source, line_no, "FASTA header without an identifier"));
      records.push_back(FastaRecord{id, {}, line_no});
      continue;
    }
    if (records.empty()) throw Error(detail::located(source, line_no, "sequence data before the first FASTA header"));
    for (const char c : text) {
      if (std::isspace(static_cast<unsigned char>(c))) continue;
      if (!std::isalpha(static_cast<unsigned char>(c)) && c != '*' && c != '-') {
        throw Error(detail::located(source, line_no, std::string("unexpected character '") + c + "' in sequence"));
      }
      records.back().sequence.push_back(c);
    }
  }
  if (in.bad()) throw Error(source + ": read error");
  return records;
}

inline std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(path.string() + ": cannot open for reading");
  return in;
}

// Sequence FASTA; records with symbols outside the alphabet are skipped with a warning.
inline std::vector<SequenceRecord> read_sequences(std::istream& in, const std::string& source,
                                                  AmbiguityPolicy policy = AmbiguityPolicy::reject) {
  std::vector<SequenceRecord> out;
  for (auto& rec : parse_fasta(in, source)) {
    if (rec.sequence.empty()) throw Error(detail::located(source, rec.line, "record '" + rec.identifier + "' is empty"));
    auto read = detail::to_read(std::move(rec.sequence), policy, detail::located(source, rec.line, "sequence '" + rec.identifier + "'"));
    if (read) out.push_back(SequenceRecord{rec.identifier, std::move(*read)});
  }
  return out;
}

inline std::vector<SequenceRecord> read_sequences(const std::filesystem::path& path,
                                                  AmbiguityPolicy policy = AmbiguityPolicy::reject) {
  auto in = open_input(path);
  return read_sequences(in, path.string(), policy);
}

// A read set from FASTA (first content line starts with '>') or plain text
// with one read per line. Metadata from "#coverage=... #readlen=..." lines at
// the top is attached unless `overrides` supplies a value.
inline ReadSet read_read_set(std::istream& in, const std::string& source, std::string label,
                             AmbiguityPolicy policy = AmbiguityPolicy::reject, const ReadMetadata& overrides = {}) {
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string content = buffer.str();

  bool fasta = false;
  {
    std::istringstream probe(content);
    std::string line;
    while (std::getline(probe, line)) {
      const auto text = detail::trim(line);
      if (text.empty() || text.front() == '#') continue;
      fasta = text.front() == '>';
      break;
    }
  }

  ReadMetadata meta;
  std::vector<Read> reads;
  std::istringstream body(content);
  if (fasta) {
    for (auto& rec : parse_fasta(body, source, &meta)) {
      if (rec.sequence.empty()) {
        warn(detail::located(source, rec.line, "empty read '" + rec.identifier + "' skipped"));
        continue;
      }
      auto read = detail::to_read(std::move(rec.sequence), policy, detail::located(source, rec.line, "read '" + rec.identifier + "'"));
      if (read) reads.push_back(std::move(*read));
    }
  } else {
    std::string line;
    std::size_t line_no = 0;
    bool seen_read = false;
    while (std::getline(body, line)) {
      ++line_no;
      const auto text = detail::trim(line);
      if (text.empty()) continue;
      if (text.front() == '#') {
        if (seen_read) throw Error(detail::located(source, line_no, "metadata line after the first read"));
        detail::parse_metadata_line(text, meta, source, line_no);
        continue;
      }
      seen_read = true;
      auto read = detail::to_read(text, policy, detail::located(source, line_no, "read"));
      if (read) reads.push_back(std::move(*read));
    }
  }
  if (overrides.coverage) meta.coverage = overrides.coverage;
  if (overrides.read_length) meta.read_length = overrides.read_length;
  if (reads.empty()) throw Error(source + ": no valid reads");
  return ReadSet(std::move(label), std::move(reads), meta.coverage, meta.read_length);
}

// Label derived from a read-set path: the file name without ".reads.fa",
// ".fa", ".fasta", ".txt" and similar suffixes.
inline std::string label_from_path(const std::filesystem::path& path) {
  std::string name = path.filename().string();
  for (const std::string_view suffix : {".fasta", ".fa", ".fna", ".txt", ".reads"}) {
    if (name.size() > suffix.size() && name.ends_with(suffix)) name.erase(name.size() - suffix.size());
  }
  return name;
}

inline ReadSet read_read_set(const std::filesystem::path& path, AmbiguityPolicy policy = AmbiguityPolicy::reject,
                             const ReadMetadata& overrides = {}) {
  auto in = open_input(path);
  return read_read_set(in, path.string(), label_from_path(path), policy, overrides);
}

inline void write_read_set_fasta(std::ostream& out, const ReadSet& reads) {
  if (reads.declared_coverage() || reads.declared_read_length()) {
    std::string line;
    char buf[64];
    if (reads.declared_coverage()) {
      std::snprintf(buf, sizeof buf, "#coverage=%.17g", *reads.declared_coverage());
      line += buf;
    }
    if (reads.declared_read_length()) {
      if (!line.empty()) line += ' ';
      line += "#readlen=" + std::to_string(*reads.declared_read_length());
    }
    out << line << '\n';
  }
  for (std::size_t i = 0; i < reads.size(); ++i) {
    out << '>' << reads.label() << '_' << i << '\n' << reads[i].str() << '\n';
  }
}

inline void write_sequences_fasta(std::ostream& out, const std::vector<SequenceRecord>& records) {
  for (const auto& r : records) {
    out << '>' << r.identifier << '\n';
    const auto& s = r.sequence.str();
    for (std::size_t i = 0; i < s.size(); i += 70) out << s.substr(i, 70) << '\n';
  }
}

inline std::string format_fixed6(double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", value == 0.0 ? 0.0 : value);
  return buf;
}

inline constexpr std::size_t kMaxPhylipLabel = 64;

inline void check_phylip_label(const std::string& label) {
  if (label.empty() || label.size() > kMaxPhylipLabel) {
    throw Error("label '" + label + "' must have 1 to " + std::to_string(kMaxPhylipLabel) + " characters");
  }
  for (const char c : label) {
    if (std::isspace(static_cast<unsigned char>(c))) throw Error("label '" + label + "' contains whitespace");
  }
}

// Square PHYLIP: n, then per row the label and n values with 6 decimals.
inline void write_phylip(std::ostream& out, const DistanceMatrix& m) {
  out << m.size() << '\n';
  for (std::size_t i = 0; i < m.size(); ++i) {
    check_phylip_label(m.labels()[i]);
    out << m.labels()[i];
    for (std::size_t j = 0; j < m.size(); ++j) out << ' ' << format_fixed6(m(i, j));
    out << '\n';
  }
}

inline std::string to_phylip(const DistanceMatrix& m) {
  std::ostringstream out;
  write_phylip(out, m);
  return out.str();
}

inline DistanceMatrix parse_phylip(std::istream& in, const std::string& source) {
  std::string line;
  std::size_t line_no = 0;
  auto next_line = [&]() -> std::optional<std::string> {
    while (std::getline(in, line)) {
      ++line_no;
      auto text = detail::trim(line);
      if (!text.empty()) return text;
    }
    return std::nullopt;
  };
  const auto header = next_line();
  if (!header) throw Error(source + ": empty matrix file");
  std::size_t n = 0;
  try {
    std::size_t used = 0;
    const auto v = std::stoll(*header, &used);
    if (used != header->size() || v < 1) throw std::invalid_argument("bad count");
    n = static_cast<std::size_t>(v);
  } catch (const std::exception&) {
    throw Error(detail::located(source, line_no, "first line must be the number of items"));
  }
  std::vector<std::string> labels(n);
  std::vector<std::vector<double>> values(n, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = next_line();
    if (!row) throw Error(source + ": expected " + std::to_string(n) + " rows, found " + std::to_string(i));
    std::istringstream tokens(*row);
    tokens >> labels[i];
    for (std::size_t j = 0; j < n; ++j) {
      std::string token;
      if (!(tokens >> token)) throw Error(detail::located(source, line_no, "row has fewer than " + std::to_string(n) + " values"));
      try {
        std::size_t used = 0;
        values[i][j] = std::stod(token, &used);
        if (used != token.size()) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        throw Error(detail::located(source, line_no, "bad number '" + token + "'"));
      }
    }
    std::string extra;
    if (tokens >> extra) throw Error(detail::located(source, line_no, "row has more than " + std::to_string(n) + " values"));
  }
  DistanceMatrix m(labels);
  for (std::size_t i = 0; i < n; ++i) {
    if (values[i][i] != 0.0) throw Error(source + ": diagonal entry for '" + labels[i] + "' is not zero");
    for (std::size_t j = i + 1; j < n; ++j) {
      if (values[i][j] != values[j][i]) {
        throw Error(source + ": matrix is not symmetric at (" + labels[i] + ", " + labels[j] + ")");
      }
      if (values[i][j] < 0.0) throw Error(source + ": negative distance at (" + labels[i] + ", " + labels[j] + ")");
      m.set(i, j, values[i][j]);
    }
  }
  return m;
}

inline DistanceMatrix read_phylip(const std::filesystem::path& path) {
  auto in = open_input(path);
  return parse_phylip(in, path.string());
}

namespace detail {

inline void write_newick_node(std::ostream& out, const PhyloTree& tree, std::size_t v) {
  const auto& node = tree.nodes[v];
  if (!node.children.empty()) {
    out << '(';
    for (std::size_t i = 0; i < node.children.size(); ++i) {
      if (i) out << ',';
      write_newick_node(out, tree, node.children[i]);
    }
    out << ')';
  }
  out << node.label;
  if (node.parent) out << ':' << format_fixed6(node.branch_length);
}

}  // namespace detail

inline std::string to_newick(const PhyloTree& tree) {
  std::ostringstream out;
  detail::write_newick_node(out, tree, tree.root);
  out << ";\n";
  return out.str();
}

namespace detail {

class NewickParser {
 public:
  NewickParser(std::string_view text, std::string source) : text_(text), source_(std::move(source)) {}

  PhyloTree parse() {
    skip_space();
    tree_.root = parse_node(std::nullopt);
    skip_space();
    expect(';');
    skip_space();
    if (pos_ != text_.size()) fail("unexpected text after ';'");
    return std::move(tree_);
  }

 private:
  std::size_t parse_node(std::optional<std::size_t> parent) {
    const std::size_t id = tree_.nodes.size();
    tree_.nodes.emplace_back();
    tree_.nodes[id].parent = parent;
    skip_space();
    if (peek() == '(') {
      ++pos_;
      while (true) {
        const auto child = parse_node(id);
        tree_.nodes[id].children.push_back(child);
        skip_space();
        if (peek() == ',') {
          ++pos_;
          continue;
        }
        expect(')');
        break;
      }
    }
    skip_space();
    std::string label;
    while (pos_ < text_.size() && !is_delimiter(text_[pos_])) label.push_back(text_[pos_++]);
    tree_.nodes[id].label = trim(label);
    skip_space();
    if (peek() == ':') {
      ++pos_;
      skip_space();
      std::string number;
      while (pos_ < text_.size() && !is_delimiter(text_[pos_]) && !std::isspace(static_cast<unsigned char>(text_[pos_]))) {
        number.push_back(text_[pos_++]);
      }
      try {
        std::size_t used = 0;
        tree_.nodes[id].branch_length = std::stod(number, &used);
        if (used != number.size()) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        fail("bad branch length '" + number + "'");
      }
    }
    if (tree_.nodes[id].children.empty() && tree_.nodes[id].label.empty()) fail("leaf without a label");
    return id;
  }

  static bool is_delimiter(char c) { return c == '(' || c == ')' || c == ',' || c == ':' || c == ';'; }
  char peek() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }
  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }
  void expect(char c) {
    if (peek() != c) fail(std::string("expected '") + c + "'");
    ++pos_;
  }
  [[noreturn]] void fail(const std::string& message) const {
    throw Error(source_ + ": Newick parse error at offset " + std::to_string(pos_) + ": " + message);
  }

  std::string_view text_;
  std::string source_;
  std::size_t pos_ = 0;
  PhyloTree tree_;
};

}  // namespace detail

// Parses a Newick tree. Ultrametric trees (within `ultrametric_tolerance`)
// get node heights, so they are cut by height like UPGMA output.
inline PhyloTree parse_newick(std::string_view text, const std::string& source = "<newick>",
                              double ultrametric_tolerance = 1e-6) {
  auto tree = detail::NewickParser(text, source).parse();
  if (tree.is_ultrametric(ultrametric_tolerance)) tree.assign_heights_from_branch_lengths();
  return tree;
}

inline PhyloTree read_newick(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_newick(buffer.str(), path.string());
}

}  // namespace rsd
