#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <readsetdist/commands.hpp>

namespace rsd {
namespace {

namespace fs = std::filesystem;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void spit(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

struct Outcome {
  int code;
  std::string out, err;
};

Outcome run_cli(const std::vector<std::string>& args) {
  ::testing::internal::CaptureStdout();
  ::testing::internal::CaptureStderr();
  const int code = cli::run(args);
  auto out = ::testing::internal::GetCapturedStdout();
  auto err = ::testing::internal::GetCapturedStderr();
  return {code, out, err};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("rsd_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  void write_counterexample() {
    spit(dir_ / "A.txt", "ATC\nATC\nGGG\n");
    spit(dir_ / "B.txt", "ATA\nGGG\n");
    spit(dir_ / "C.txt", "CTA\nGGG\n");
  }

  void write_family(std::size_t count, std::size_t length) {
    std::string fasta;
    for (std::size_t i = 0; i < count; ++i) {
      MutationParams m{0.02 * static_cast<double>(i + 1), 0.0, 0.0, 0};
      m.rng_seed = i + 100;
      const auto base = SequenceRecord{"s" + std::to_string(i), random_sequence(length, 7)};
      const auto seq = mutate(base, m);
      fasta += ">" + seq.identifier + "\n" + seq.sequence.str() + "\n";
    }
    spit(dir_ / "family.fa", fasta);
  }

  fs::path dir_;
};

TEST_F(CliTest, SimulateWritesOneFilePerSequence) {
  spit(dir_ / "in.fa", ">seq1\n" + random_sequence(1000, 3).str() + "\n>seq2\n" + random_sequence(500, 4).str() + "\n");
  const auto r = run_cli({"simulate", "-i", path("in.fa"), "-o", path("reads"), "--coverage", "2", "--read-length", "100"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto text = slurp(dir_ / "reads" / "seq1.reads.fa");
  EXPECT_EQ(text.rfind("#coverage=2 #readlen=100\n", 0), 0u);
  EXPECT_EQ(std::count(text.begin(), text.end(), '>'), 20);
  const auto set = read_read_set(dir_ / "reads" / "seq2.reads.fa");
  EXPECT_EQ(set.size(), 10u);
  EXPECT_EQ(set.declared_coverage(), 2.0);
}

TEST_F(CliTest, SimulateIsDeterministicPerSeed) {
  spit(dir_ / "in.fa", ">x\n" + random_sequence(800, 5).str() + "\n");
  for (const auto* out : {"a", "b"}) {
    ASSERT_EQ(run_cli({"simulate", "-i", path("in.fa"), "-o", path(out), "--seed", "9", "--strand-noise"}).code, 0);
  }
  ASSERT_EQ(run_cli({"simulate", "-i", path("in.fa"), "-o", path("c"), "--seed", "10", "--strand-noise"}).code, 0);
  EXPECT_EQ(slurp(dir_ / "a" / "x.reads.fa"), slurp(dir_ / "b" / "x.reads.fa"));
  EXPECT_NE(slurp(dir_ / "a" / "x.reads.fa"), slurp(dir_ / "c" / "x.reads.fa"));
}

TEST_F(CliTest, SimulateRejectsShortSequences) {
  spit(dir_ / "in.fa", ">x\nACGT\n");
  const auto r = run_cli({"simulate", "-i", path("in.fa"), "-o", path("out")});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("shorter than the read length"), std::string::npos);
}

TEST_F(CliTest, MalformedFastaNamesTheLine) {
  spit(dir_ / "bad.fa", ">ok\nACGT\n>\nACGT\n");
  const auto r = run_cli({"simulate", "-i", path("bad.fa"), "-o", path("out")});
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.err.find("bad.fa:3:"), std::string::npos) << r.err;
}

TEST_F(CliTest, DistCounterexample) {
  write_counterexample();
  const auto r = run_cli({"dist", path("A.txt"), path("B.txt"), path("C.txt")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out,
            "3\n"
            "A 0.000000 0.583333 1.166667\n"
            "B 0.583333 0.000000 0.500000\n"
            "C 1.166667 0.500000 0.000000\n");
}

TEST_F(CliTest, DistBaseline) {
  write_counterexample();
  ASSERT_EQ(run_cli({"dist", path("A.txt"), path("B.txt"), "--baseline-maxsize", "-o", path("m.phy")}).code, 0);
  EXPECT_EQ(slurp(dir_ / "m.phy"), "2\nA 0.000000 3.000000\nB 3.000000 0.000000\n");
}

TEST_F(CliTest, DistNeedsMetadataForMarginGaps) {
  write_counterexample();
  const auto r = run_cli({"dist", path("A.txt"), path("B.txt"), "--preset", "messg"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("--coverage"), std::string::npos);
}

TEST_F(CliTest, DistOverridesAreReportedAndQuietSilences) {
  write_counterexample();
  auto r = run_cli({"dist", path("A.txt"), path("B.txt"), "--preset", "mess", "--no-scaling"});
  ASSERT_EQ(r.code, 0);
  EXPECT_NE(r.err.find("override: scaling off"), std::string::npos);
  EXPECT_NE(r.out.find("0.583333"), std::string::npos);
  r = run_cli({"-q", "dist", path("A.txt"), path("B.txt"), "--preset", "mess", "--no-scaling"});
  EXPECT_EQ(r.err, "");
}

TEST_F(CliTest, DistRejectsUnknownPresetAndMissingFiles) {
  write_counterexample();
  EXPECT_EQ(run_cli({"dist", path("A.txt"), path("B.txt"), "--preset", "nope"}).code, 1);
  EXPECT_NE(run_cli({"dist", path("A.txt"), path("missing.txt")}).code, 0);
  EXPECT_EQ(run_cli({"dist", path("A.txt")}).code, 1);
}

TEST_F(CliTest, DistThreadCountDoesNotChangeOutput) {
  write_family(5, 600);
  ASSERT_EQ(run_cli({"simulate", "-i", path("family.fa"), "-o", path("reads"), "--coverage", "4", "--read-length", "60",
                     "--strand-noise", "--seed", "3"}).code, 0);
  std::vector<std::string> base{"dist", "--preset", "messgq", "--strand-unknown", "--seed", "11"};
  for (std::size_t i = 0; i < 5; ++i) base.push_back(path("reads/s" + std::to_string(i) + ".reads.fa"));
  auto one = base, eight = base;
  one.insert(one.end(), {"--threads", "1", "-o", path("one.phy")});
  eight.insert(eight.end(), {"--threads", "8", "-o", path("eight.phy")});
  ASSERT_EQ(run_cli(one).code, 0);
  ASSERT_EQ(run_cli(eight).code, 0);
  EXPECT_EQ(slurp(dir_ / "one.phy"), slurp(dir_ / "eight.phy"));
  EXPECT_EQ(slurp(dir_ / "one.phy").substr(0, 2), "5\n");
}

TEST_F(CliTest, ClusterWritesNewick) {
  spit(dir_ / "m.phy", "3\na 0 2 6\nb 2 0 6\nc 6 6 0\n");
  auto r = run_cli({"cluster", path("m.phy")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "((a:1.000000,b:1.000000):2.000000,c:3.000000);\n");
  r = run_cli({"cluster", path("m.phy"), "--method", "nj", "-o", path("t.nwk")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(read_newick(dir_ / "t.nwk").leaves().size(), 3u);
  EXPECT_NE(run_cli({"cluster", path("m.phy"), "--method", "ward"}).code, 0);
}

TEST_F(CliTest, ClusterRejectsAsymmetricMatrix) {
  spit(dir_ / "m.phy", "2\na 0 1\nb 2 0\n");
  const auto r = run_cli({"cluster", path("m.phy")});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("not symmetric"), std::string::npos);
}

TEST_F(CliTest, EvalPearsonAndFowlkesMallows) {
  spit(dir_ / "x.phy", "4\na 0 2 6 7\nb 2 0 6 7\nc 6 6 0 3\nd 7 7 3 0\n");
  spit(dir_ / "y.phy", "4\nd 0 14 14 6\nb 14 0 4 12\na 14 4 0 12\nc 6 12 12 0\n");
  auto r = run_cli({"eval", path("x.phy"), path("y.phy")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "pearson 1.000000\n");

  ASSERT_EQ(run_cli({"cluster", path("x.phy"), "-o", path("x.nwk")}).code, 0);
  ASSERT_EQ(run_cli({"cluster", path("y.phy"), "-o", path("y.nwk")}).code, 0);
  r = run_cli({"eval", "--metric", "fm", path("x.nwk"), path("y.nwk")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "k B_k\n2 1.000000\n3 1.000000\n");
}

TEST_F(CliTest, EvalLabelMismatchNamesLabels) {
  spit(dir_ / "x.phy", "3\na 0 1 2\nb 1 0 3\nc 2 3 0\n");
  spit(dir_ / "y.phy", "3\na 0 1 2\nb 1 0 3\nz 2 3 0\n");
  const auto r = run_cli({"eval", path("x.phy"), path("y.phy")});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("z"), std::string::npos);
  EXPECT_NE(r.err.find(": c"), std::string::npos);
}

TEST_F(CliTest, PipelineProducesAllArtifacts) {
  write_family(4, 500);
  const auto r = run_cli({"pipeline", "-i", path("family.fa"), "--out-dir", path("run"), "--coverage", "3",
                          "--read-length", "50", "--preset", "messg", "--threads", "2"});
  ASSERT_EQ(r.code, 0) << r.err;
  for (const auto* f : {"reference.phy", "distances.phy", "reference.upgma.nwk", "distances.upgma.nwk", "report.txt"}) {
    EXPECT_TRUE(fs::exists(dir_ / "run" / f)) << f;
  }
  EXPECT_TRUE(fs::exists(dir_ / "run" / "reads" / "s0.reads.fa"));
  EXPECT_EQ(slurp(dir_ / "run" / "report.txt"), r.out);
  EXPECT_NE(r.out.find("pearson "), std::string::npos);
  EXPECT_NE(r.out.find("k B_k\n2 "), std::string::npos);
}

TEST_F(CliTest, UsageErrors) {
  EXPECT_NE(run_cli({}).code, 0);
  EXPECT_NE(run_cli({"frobnicate"}).code, 0);
  EXPECT_EQ(run_cli({"--help"}).code, 0);
}

}  // namespace
}  // namespace rsd
