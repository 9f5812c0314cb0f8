#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace {

namespace fs = std::filesystem;

struct RunResult {
  int code = -1;
  std::string output;
};

RunResult run(const std::string& args) {
  const std::string cmd = std::string(SEGCBIR_CLI_PATH) + " " + args + " 2>&1";
  RunResult r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  while (std::fgets(buf, sizeof buf, pipe)) r.output += buf;
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

class CliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new fs::path(fs::temp_directory_path() /
                        ("segcbir_cli_" + std::to_string(std::random_device{}())));
    const auto d = dir_->string();
    ASSERT_EQ(run("synth --out " + d + "/img --categories 2 --per-category 6 --size 64").code, 0);
    ASSERT_EQ(run("index --root " + d + "/img --out " + d + "/db.idx --workers 2").code, 0);
  }
  static void TearDownTestSuite() {
    fs::remove_all(*dir_);
    delete dir_;
  }
  static std::string path(const std::string& leaf) { return (*dir_ / leaf).string(); }

  inline static fs::path* dir_ = nullptr;
};

TEST_F(CliTest, IndexWritesFileAndManifest) {
  EXPECT_TRUE(fs::exists(path("db.idx")));
  std::ifstream in(path("db.idx.manifest.tsv"));
  std::stringstream text;
  text << in.rdbuf();
  EXPECT_EQ(lines(text.str()).size(), 2u);
}

TEST_F(CliTest, UsageErrorsExitTwo) {
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("frobnicate").code, 2);
  EXPECT_EQ(run("query --id 0").code, 2);  // --index missing
  EXPECT_EQ(run("query --index " + path("db.idx")).code, 2);
  EXPECT_EQ(run("query --index " + path("db.idx") + " --id 0 --scheme fancy").code, 2);
  EXPECT_EQ(run("index --root " + path("img") + " --out x --k 9").code, 2);
  EXPECT_EQ(run("eval --index " + path("db.idx") + " --scheme wos,nope").code, 2);
  EXPECT_EQ(run("eval --index " + path("db.idx") + " --queries some").code, 2);
}

TEST_F(CliTest, DomainErrorsExitOne) {
  EXPECT_EQ(run("query --index " + path("db.idx") + " --id 999").code, 1);
  EXPECT_EQ(run("query --index " + path("missing.idx") + " --id 0").code, 1);
  EXPECT_EQ(run("index --root " + path("nowhere") + " --out " + path("x.idx")).code, 1);
  std::ofstream(path("junk.idx")) << "junk";
  const auto r = run("query --index " + path("junk.idx") + " --id 0");
  EXPECT_EQ(r.code, 1);
  EXPECT_FALSE(r.output.empty());
}

TEST_F(CliTest, QueryPrintsRankedRows) {
  const auto r = run("query --index " + path("db.idx") + " --id 3 --scheme wos --scope 5");
  ASSERT_EQ(r.code, 0) << r.output;
  const auto rows = lines(r.output);
  ASSERT_EQ(rows.size(), 5u);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::vector<std::string> cols;
    std::istringstream in(rows[i]);
    for (std::string c; std::getline(in, c, '\t');) cols.push_back(c);
    ASSERT_EQ(cols.size(), 4u) << rows[i];
    EXPECT_EQ(cols[0], std::to_string(i + 1));
    if (i == 0) {
      EXPECT_EQ(cols[1], "3");
      EXPECT_EQ(std::stod(cols[3]), 0.0);
    }
  }
  const auto by_file = run("query --index " + path("db.idx") + " --image " +
                           path("img/c00_stripes/img_003.png") + " --scheme wos --scope 5");
  ASSERT_EQ(by_file.code, 0) << by_file.output;
  EXPECT_EQ(lines(by_file.output)[0], rows[0]);
}

TEST_F(CliTest, QueryEachScheme) {
  for (const char* scheme : {"wos", "ws", "ws-inter", "ws-union", "ws-comb"}) {
    const auto r = run("query --index " + path("db.idx") + " --id 0 --scope 4 --scheme " + scheme);
    EXPECT_EQ(r.code, 0) << scheme << r.output;
    EXPECT_GE(lines(r.output).size(), 4u) << scheme;
  }
}

TEST_F(CliTest, EvalWritesRecordsAndSummary) {
  const auto r = run("eval --index " + path("db.idx") +
                     " --scheme wos,ws-comb --reweight rw,rw-ibcd --queries sample:4 --scope 5"
                     " --r-sweep --out " + path("eval"));
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_TRUE(fs::exists(path("eval/records.jsonl")));
  EXPECT_TRUE(fs::exists(path("eval/summary.txt")));
  std::ifstream in(path("eval/records.jsonl"));
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) ++n;
  EXPECT_EQ(n, 2u * 2u * 4u * 7u);
  EXPECT_NE(r.output.find("ws-comb"), std::string::npos);
  EXPECT_NE(r.output.find("r=4"), std::string::npos);
}

}  // namespace
