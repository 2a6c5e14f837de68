#pragma once

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "alignment.hpp"
#include "core_model.hpp"
#include "formats.hpp"
#include "log.hpp"
#include "phylo.hpp"
#include "readset_distance.hpp"
#include "simulator.hpp"

namespace rsd::cli {

inline constexpr const char* kThreadsEnv = "READSET_DIST_THREADS";

struct SimulateOptions {
  std::filesystem::path input;
  std::filesystem::path out_dir = ".";
  double coverage = 2.0;
  std::size_t read_length = 100;
  bool strand_noise = false;
  bool orientation_noise = false;
  std::uint64_t seed = 0;
  bool replace_n = false;
};

// Flags that shape a MatchConfig. Unset optionals defer to the preset.
struct DistOptions {
  std::vector<std::filesystem::path> inputs;
  std::optional<std::filesystem::path> output;
  std::string preset = "mes";
  bool baseline_maxsize = false;
  bool strand_unknown = false;
  bool orientation_unknown = false;
  std::optional<bool> scaling;
  std::optional<double> margin_t;
  bool no_margin_gaps = false;
  std::optional<double> theta;
  bool no_threshold = false;
  std::optional<std::size_t> q;
  std::optional<std::size_t> candidates;
  bool no_embedding = false;
  std::optional<double> sample_coverage;
  bool no_sampling = false;
  bool prune = false;
  std::optional<double> coverage;
  std::optional<std::size_t> read_length;
  std::uint64_t seed = 0;
  std::optional<std::size_t> threads;
  bool replace_n = false;
};

struct ClusterOptions {
  std::filesystem::path matrix;
  std::optional<std::filesystem::path> output;
  std::string method = "upgma";
};

struct EvalOptions {
  std::string metric = "pearson";
  std::filesystem::path first, second;
  std::optional<std::filesystem::path> output;
  std::string cut = "auto";
};

struct PipelineOptions {
  SimulateOptions simulate;
  DistOptions dist;
  std::string method = "upgma";
};

namespace detail {

inline void note(const std::string& message) { warn(message); }

inline void write_output(const std::optional<std::filesystem::path>& path, const std::string& text) {
  if (!path) {
    std::cout << text;
    std::cout.flush();
    if (!std::cout) throw Error("failed to write to standard output");
    return;
  }
  if (path->has_parent_path()) std::filesystem::create_directories(path->parent_path());
  std::ofstream out(*path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(path->string() + ": cannot open for writing");
  out << text;
  out.close();
  if (!out) throw Error(path->string() + ": write failed");
}

inline std::size_t resolve_threads(const std::optional<std::size_t>& flag) {
  if (flag) return std::max<std::size_t>(1, *flag);
  if (const char* env = std::getenv(kThreadsEnv)) {
    try {
      const auto v = std::stoll(env);
      if (v >= 1) return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
    }
    warn(std::string(kThreadsEnv) + "='" + env + "' is not a positive integer; ignored");
  }
  return default_thread_count();
}

inline void check_file_safe(const std::string& id) {
  if (id.empty() || id.find('/') != std::string::npos || id.find('\\') != std::string::npos || id == "." || id == "..") {
    throw Error("sequence identifier '" + id + "' cannot be used as a file name");
  }
}

}  // namespace detail

inline std::vector<std::filesystem::path> cmd_simulate(const SimulateOptions& o) {
  const auto policy = o.replace_n ? AmbiguityPolicy::replace_n : AmbiguityPolicy::reject;
  const auto sequences = read_sequences(o.input, policy);
  if (sequences.empty()) throw Error(o.input.string() + ": no usable sequences");
  std::filesystem::create_directories(o.out_dir);
  std::vector<std::filesystem::path> written;
  for (const auto& seq : sequences) {
    detail::check_file_safe(seq.identifier);
    SimulationParams p{o.coverage, o.read_length, o.strand_noise, o.orientation_noise, derive_seed(o.seed, seq.identifier)};
    const auto reads = sample_reads(seq, p);
    std::ostringstream text;
    write_read_set_fasta(text, reads);
    const auto path = o.out_dir / (seq.identifier + ".reads.fa");
    detail::write_output(path, text.str());
    written.push_back(path);
  }
  return written;
}

// Turns preset plus override flags into a configuration. Overrides win over
// the preset and each one that changes a preset setting is reported.
inline MatchConfig build_config(const DistOptions& o, const std::vector<ReadSet>& sets) {
  auto preset = parse_preset(o.preset);
  if (!preset) throw Error("unknown preset '" + o.preset + "' (expected me, mes, mess, messg, messgm, messgq)");
  if (o.baseline_maxsize) preset = Preset::baseline;

  const bool preset_margin = *preset == Preset::messg || *preset == Preset::messgm || *preset == Preset::messgq;
  const bool preset_sampling = *preset == Preset::messgq;
  const bool wants_margin = (preset_margin && !o.no_margin_gaps) || o.margin_t.has_value();

  std::optional<double> t = o.margin_t;
  if (wants_margin && !t) {
    auto coverage = o.coverage;
    auto read_length = o.read_length;
    for (const auto& s : sets) {
      if (!coverage && s.declared_coverage()) coverage = s.declared_coverage();
      if (!read_length && s.declared_read_length()) read_length = s.declared_read_length();
    }
    if (!o.coverage || !o.read_length) {
      for (const auto& s : sets) {
        if ((!o.coverage && s.declared_coverage() && *s.declared_coverage() != *coverage) ||
            (!o.read_length && s.declared_read_length() && *s.declared_read_length() != *read_length)) {
          warn("read sets declare different coverage or read length; using coverage " + std::to_string(*coverage) +
               " and read length " + std::to_string(*read_length) + " for the margin grace size");
          break;
        }
      }
    }
    if (!coverage || !read_length) {
      throw Error("margin gaps need the coverage and read length: pass --coverage and --read-length, "
                  "add a '#coverage=... #readlen=...' line to the read files, or give --margin-t");
    }
    double effective_coverage = *coverage;
    const bool sampling_on = (preset_sampling && !o.no_sampling) || o.sample_coverage.has_value();
    if (sampling_on) {
      const double target = o.sample_coverage.value_or(kDefaultSampleCoverage);
      effective_coverage = std::min(effective_coverage, target);
    }
    t = compute_margin_t(*read_length, effective_coverage);
    MarginGapParams{*t}.check_applicable(*read_length);
  }

  MatchConfig cfg = make_preset(*preset, preset_margin ? std::optional<double>(t.value_or(0.0)) : std::nullopt);
  cfg.strand_known = !o.strand_unknown;
  cfg.orientation_known = !o.orientation_unknown;
  cfg.rng_seed = o.seed;
  cfg.prune_with_qgram_bound = o.prune;
  if (cfg.baseline_max_size) return cfg;

  auto overridden = [&](const std::string& what) { detail::note("override: " + what + " (preset " + o.preset + ")"); };
  if (o.scaling && *o.scaling != cfg.use_scaling) {
    cfg.use_scaling = *o.scaling;
    overridden(std::string("scaling ") + (*o.scaling ? "on" : "off"));
  }
  if (o.no_margin_gaps && cfg.margin_gaps) {
    cfg.margin_gaps.reset();
    overridden("margin gaps off");
  } else if (t) {
    if (!cfg.margin_gaps) overridden("margin gaps on");
    cfg.margin_gaps = MarginGapParams{*t};
  }
  if (o.no_threshold && cfg.threshold_fraction) {
    cfg.threshold_fraction.reset();
    overridden("missing-read threshold off");
  } else if (o.theta) {
    if (cfg.threshold_fraction != o.theta) overridden("threshold fraction " + std::to_string(*o.theta));
    cfg.threshold_fraction = o.theta;
  }
  if (o.no_embedding && cfg.embedding) {
    cfg.embedding.reset();
    overridden("embedding off");
  } else if (o.q || o.candidates) {
    if (!cfg.embedding) {
      overridden("embedding on");
      cfg.embedding = EmbeddingConfig{};
    }
    if (o.q) cfg.embedding->q = *o.q;
    if (o.candidates) cfg.embedding->candidate_count = *o.candidates;
  }
  if (o.no_sampling && cfg.sample_to_coverage) {
    cfg.sample_to_coverage.reset();
    overridden("sampling off");
  } else if (o.sample_coverage) {
    if (cfg.sample_to_coverage != o.sample_coverage) overridden("sampling coverage " + std::to_string(*o.sample_coverage));
    cfg.sample_to_coverage = o.sample_coverage;
  }
  cfg.validate();
  return cfg;
}

inline std::vector<ReadSet> load_read_sets(const DistOptions& o) {
  if (o.inputs.size() < 2) throw Error("dist needs at least two read-set files");
  const auto policy = o.replace_n ? AmbiguityPolicy::replace_n : AmbiguityPolicy::reject;
  ReadMetadata overrides{o.coverage, o.read_length};
  std::vector<ReadSet> sets;
  for (const auto& path : o.inputs) sets.push_back(read_read_set(path, policy, overrides));
  return sets;
}

inline DistanceMatrix compute_distances(const DistOptions& o, const std::vector<ReadSet>& sets) {
  const auto cfg = build_config(o, sets);
  return distance_matrix(sets, cfg, detail::resolve_threads(o.threads));
}

inline DistanceMatrix cmd_dist(const DistOptions& o) {
  const auto sets = load_read_sets(o);
  const auto matrix = compute_distances(o, sets);
  detail::write_output(o.output, to_phylip(matrix));
  return matrix;
}

inline PhyloTree build_tree(const DistanceMatrix& m, const std::string& method) {
  if (method == "upgma") return upgma(m);
  if (method == "nj") return neighbor_joining(m);
  throw Error("unknown clustering method '" + method + "' (expected upgma or nj)");
}

inline PhyloTree cmd_cluster(const ClusterOptions& o) {
  const auto tree = build_tree(read_phylip(o.matrix), o.method);
  detail::write_output(o.output, to_newick(tree));
  return tree;
}

namespace detail {

inline void require_same_labels(std::vector<std::string> a, std::vector<std::string> b, const std::string& name_a,
                                const std::string& name_b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  if (a == b) return;
  std::vector<std::string> only_a, only_b;
  std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(only_a));
  std::set_difference(b.begin(), b.end(), a.begin(), a.end(), std::back_inserter(only_b));
  auto join = [](const std::vector<std::string>& xs) {
    std::string s;
    for (const auto& x : xs) s += (s.empty() ? "" : ", ") + x;
    return s.empty() ? std::string("(none)") : s;
  };
  throw Error("label sets differ: missing from " + name_b + ": " + join(only_a) + "; missing from " + name_a + ": " +
              join(only_b));
}

}  // namespace detail

inline std::string pearson_report(const DistanceMatrix& a, const DistanceMatrix& b) {
  const auto r = pearson(a, b.reordered(a.labels()));
  return "pearson " + (r ? format_fixed6(*r) : std::string("undefined")) + "\n";
}

// One line per k = 2..n-1 with B_k for the two trees cut the same way.
inline std::string fowlkes_mallows_report(const PhyloTree& a, const PhyloTree& b) {
  const auto n = a.leaves().size();
  std::string out = "k B_k\n";
  for (std::size_t k = 2; k + 1 <= n; ++k) {
    out += std::to_string(k) + " " + format_fixed6(fowlkes_mallows(cut_tree(a, k), cut_tree(b, k))) + "\n";
  }
  return out;
}

inline PhyloTree with_cut_mode(PhyloTree tree, const std::string& cut) {
  if (cut == "height") {
    tree.assign_heights_from_branch_lengths();
  } else if (cut == "edge") {
    tree.has_heights = false;
  } else if (cut != "auto") {
    throw Error("unknown cut mode '" + cut + "' (expected auto, height or edge)");
  }
  return tree;
}

inline std::string cmd_eval(const EvalOptions& o) {
  std::string report;
  if (o.metric == "pearson") {
    const auto a = read_phylip(o.first);
    const auto b = read_phylip(o.second);
    detail::require_same_labels(a.labels(), b.labels(), o.first.string(), o.second.string());
    report = pearson_report(a, b);
  } else if (o.metric == "fm") {
    const auto a = with_cut_mode(read_newick(o.first), o.cut);
    const auto b = with_cut_mode(read_newick(o.second), o.cut);
    detail::require_same_labels(a.leaf_labels(), b.leaf_labels(), o.first.string(), o.second.string());
    if (a.leaves().size() < 3) throw Error("Fowlkes-Mallows evaluation needs trees with at least 3 leaves");
    report = fowlkes_mallows_report(a, b);
  } else {
    throw Error("unknown metric '" + o.metric + "' (expected pearson or fm)");
  }
  detail::write_output(o.output, report);
  return report;
}

// simulate -> reference and estimated matrices -> trees -> report.
inline std::string cmd_pipeline(const PipelineOptions& o) {
  const auto& out_dir = o.simulate.out_dir;
  auto sim = o.simulate;
  sim.out_dir = out_dir / "reads";
  const auto read_files = cmd_simulate(sim);

  const auto policy = sim.replace_n ? AmbiguityPolicy::replace_n : AmbiguityPolicy::reject;
  const auto sequences = read_sequences(sim.input, policy);
  const auto threads = detail::resolve_threads(o.dist.threads);
  const auto reference = levenshtein_matrix(sequences, threads);
  detail::write_output(out_dir / "reference.phy", to_phylip(reference));

  auto dist = o.dist;
  dist.seed = o.simulate.seed;
  dist.inputs = read_files;
  dist.output = out_dir / "distances.phy";
  const auto estimate = cmd_dist(dist);

  const auto ref_tree = build_tree(reference, o.method);
  const auto est_tree = build_tree(estimate, o.method);
  detail::write_output(out_dir / ("reference." + o.method + ".nwk"), to_newick(ref_tree));
  detail::write_output(out_dir / ("distances." + o.method + ".nwk"), to_newick(est_tree));

  std::string report = "preset " + (o.dist.baseline_maxsize ? std::string("baseline") : o.dist.preset) + "\n";
  report += "method " + o.method + "\n";
  if (reference.size() >= 3) {
    report += pearson_report(reference, estimate);
    report += fowlkes_mallows_report(ref_tree, est_tree);
  }
  detail::write_output(out_dir / "report.txt", report);
  return report;
}

namespace detail {

inline void add_dist_flags(CLI::App* app, DistOptions& o) {
  app->add_option("--preset", o.preset, "Estimator: me, mes, mess, messg, messgm, messgq")->capture_default_str();
  app->add_flag("--baseline-maxsize", o.baseline_maxsize, "Use max(|R_A|, |R_B|) as the distance");
  app->add_flag("--strand-unknown", o.strand_unknown, "Reads may come from either strand");
  app->add_flag("--orientation-unknown", o.orientation_unknown, "Read direction (5'/3') is unknown");
  app->add_flag("--scaling,!--no-scaling", o.scaling, "Scale by the larger read-set cardinality");
  app->add_option("--margin-t", o.margin_t, "Margin grace size t (enables margin gaps)");
  app->add_flag("--no-margin-gaps", o.no_margin_gaps, "Disable margin gaps");
  app->add_option("--theta", o.theta, "Missing-read threshold fraction in (0, 1)");
  app->add_flag("--no-threshold", o.no_threshold, "Disable the missing-read threshold");
  app->add_option("--q", o.q, "q for the q-gram embedding (enables it)");
  app->add_option("--candidates", o.candidates, "Candidates per read for the embedding (enables it)");
  app->add_flag("--no-embedding", o.no_embedding, "Disable the q-gram embedding");
  app->add_option("--sample-coverage", o.sample_coverage, "Down-sample read sets to this coverage");
  app->add_flag("--no-sampling", o.no_sampling, "Disable down-sampling");
  app->add_flag("--prune", o.prune, "Exact search with q-gram lower-bound pruning (plain Levenshtein only)");
  app->add_option("--coverage", o.coverage, "Declared coverage (overrides file metadata)");
  app->add_option("--read-length", o.read_length, "Declared read length (overrides file metadata)");
  app->add_option("--seed", o.seed, "Random seed")->capture_default_str();
  app->add_option("--threads", o.threads, std::string("Worker threads (fallback: $") + kThreadsEnv + ")");
  app->add_flag("--replace-n", o.replace_n, "Replace N by A instead of rejecting the read");
}

inline void add_simulation_flags(CLI::App* app, SimulateOptions& o, bool with_out_dir) {
  app->add_option("-i,--input", o.input, "Sequences (FASTA)")->required()->check(CLI::ExistingFile);
  if (with_out_dir) app->add_option("--out-dir", o.out_dir, "Output directory")->capture_default_str();
  app->add_option("--coverage", o.coverage, "Coverage alpha")->capture_default_str()->check(CLI::PositiveNumber);
  app->add_option("--read-length", o.read_length, "Read length l")->capture_default_str()->check(CLI::PositiveNumber);
  app->add_flag("--strand-noise", o.strand_noise, "Reverse-complement each read with probability 1/2");
  app->add_flag("--orientation-noise", o.orientation_noise, "Reverse each read with probability 1/2");
  app->add_option("--seed", o.seed, "Random seed for read sampling and down-sampling")->capture_default_str();
}

}  // namespace detail

// Entry point shared by the executable and the tests. Returns the exit code.
inline int run(int argc, const char* const* argv) {
  CLI::App app{"Read-set distance estimation and clustering"};
  app.require_subcommand(1);
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "Suppress warnings");

  SimulateOptions sim;
  auto* simulate = app.add_subcommand("simulate", "Sample read sets from sequences");
  simulate->add_option("-i,--input", sim.input, "Sequences (FASTA)")->required()->check(CLI::ExistingFile);
  simulate->add_option("-o,--out-dir", sim.out_dir, "Output directory")->capture_default_str();
  simulate->add_option("--coverage", sim.coverage, "Coverage alpha")->capture_default_str()->check(CLI::PositiveNumber);
  simulate->add_option("--read-length", sim.read_length, "Read length l")->capture_default_str()->check(CLI::PositiveNumber);
  simulate->add_flag("--strand-noise", sim.strand_noise, "Reverse-complement each read with probability 1/2");
  simulate->add_flag("--orientation-noise", sim.orientation_noise, "Reverse each read with probability 1/2");
  simulate->add_option("--seed", sim.seed, "Random seed")->capture_default_str();
  simulate->add_flag("--replace-n", sim.replace_n, "Replace N by A instead of rejecting the sequence");

  DistOptions dist;
  auto* dist_cmd = app.add_subcommand("dist", "Distance matrix between read sets (PHYLIP)");
  dist_cmd->add_option("reads", dist.inputs, "Read-set files (FASTA or one read per line)")->required()->check(CLI::ExistingFile);
  dist_cmd->add_option("-o,--output", dist.output, "Output PHYLIP file (default: stdout)");
  detail::add_dist_flags(dist_cmd, dist);

  ClusterOptions cluster;
  auto* cluster_cmd = app.add_subcommand("cluster", "Hierarchical clustering of a PHYLIP matrix (Newick)");
  cluster_cmd->add_option("matrix", cluster.matrix, "PHYLIP matrix")->required()->check(CLI::ExistingFile);
  cluster_cmd->add_option("--method", cluster.method, "upgma or nj")->capture_default_str()->check(CLI::IsMember({"upgma", "nj"}));
  cluster_cmd->add_option("-o,--output", cluster.output, "Output Newick file (default: stdout)");

  EvalOptions eval;
  auto* eval_cmd = app.add_subcommand("eval", "Compare two matrices (pearson) or two trees (fm)");
  eval_cmd->add_option("first", eval.first, "Matrix or tree")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("second", eval.second, "Matrix or tree")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--metric", eval.metric, "pearson or fm")->capture_default_str()->check(CLI::IsMember({"pearson", "fm"}));
  eval_cmd->add_option("--cut", eval.cut, "Tree cut for fm: auto, height or edge")->capture_default_str()->check(CLI::IsMember({"auto", "height", "edge"}));
  eval_cmd->add_option("-o,--output", eval.output, "Report file (default: stdout)");

  PipelineOptions pipe;
  auto* pipeline = app.add_subcommand("pipeline", "simulate, dist, cluster and eval in one run");
  detail::add_simulation_flags(pipeline, pipe.simulate, true);
  pipeline->add_flag("--replace-n", pipe.simulate.replace_n, "Replace N by A instead of rejecting the sequence");
  pipeline->add_option("--method", pipe.method, "upgma or nj")->capture_default_str()->check(CLI::IsMember({"upgma", "nj"}));
  {
    auto& o = pipe.dist;
    pipeline->add_option("--preset", o.preset, "Estimator: me, mes, mess, messg, messgm, messgq")->capture_default_str();
    pipeline->add_flag("--baseline-maxsize", o.baseline_maxsize, "Use max(|R_A|, |R_B|) as the distance");
    pipeline->add_flag("--strand-unknown", o.strand_unknown, "Reads may come from either strand");
    pipeline->add_flag("--orientation-unknown", o.orientation_unknown, "Read direction (5'/3') is unknown");
    pipeline->add_flag("--scaling,!--no-scaling", o.scaling, "Scale by the larger read-set cardinality");
    pipeline->add_option("--margin-t", o.margin_t, "Margin grace size t");
    pipeline->add_flag("--no-margin-gaps", o.no_margin_gaps, "Disable margin gaps");
    pipeline->add_option("--theta", o.theta, "Missing-read threshold fraction");
    pipeline->add_flag("--no-threshold", o.no_threshold, "Disable the missing-read threshold");
    pipeline->add_option("--candidates", o.candidates, "Embedding candidates per read");
    pipeline->add_option("--sample-coverage", o.sample_coverage, "Down-sample to this coverage");
    pipeline->add_flag("--no-sampling", o.no_sampling, "Disable down-sampling");
    pipeline->add_option("--threads", o.threads, std::string("Worker threads (fallback: $") + kThreadsEnv + ")");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  std::optional<ScopedWarningSink> silence;
  if (quiet) silence.emplace([](const std::string&) {});

  try {
    if (*simulate) {
      cmd_simulate(sim);
    } else if (*dist_cmd) {
      cmd_dist(dist);
    } else if (*cluster_cmd) {
      cmd_cluster(cluster);
    } else if (*eval_cmd) {
      cmd_eval(eval);
    } else if (*pipeline) {
      std::cout << cmd_pipeline(pipe);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

inline int run(const std::vector<std::string>& args) {
  std::vector<const char*> argv{"readset-dist"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace rsd::cli
