#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

namespace {

namespace fs = std::filesystem;

struct Result {
  int code = -1;
  std::string out;
};

Result Shell(const std::string& args, bool merge_stderr = false) {
  std::string cmd = std::string(KEP_CLI_PATH) + " " + args + (merge_stderr ? " 2>&1" : " 2>/dev/null");
  FILE* pipe = ::popen(cmd.c_str(), "r");
  Result r;
  if (pipe == nullptr) return r;
  char buf[4096];
  size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
  const int status = ::pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string Fixture(const std::string& rel) { return (fs::path(KEP_FIXTURE_DIR) / rel).string(); }

std::string Slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path TempDir(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("kep-cli-" + name + "-" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// Starts `kep server` on an ephemeral port and returns the pipe and port.
std::pair<FILE*, int> StartServer(const std::string& args) {
  const std::string cmd = std::string(KEP_CLI_PATH) + " server --bind 127.0.0.1:0 --once " + args + " 2>&1";
  FILE* pipe = ::popen(cmd.c_str(), "r");
  char line[512];
  if (pipe == nullptr || std::fgets(line, sizeof line, pipe) == nullptr) return {pipe, 0};
  std::smatch m;
  const std::string s(line);
  if (!std::regex_search(s, m, std::regex(R"(:(\d+) )"))) return {pipe, 0};
  return {pipe, std::stoi(m[1])};
}

std::vector<Result> RunSession(int port, int parties, const std::vector<std::string>& party_args) {
  std::vector<std::future<Result>> fs;
  for (int p = 1; p <= parties; ++p) {
    fs.push_back(std::async(std::launch::async, [=] {
      return Shell("party --server 127.0.0.1:" + std::to_string(port) + " --party-id " +
                   std::to_string(p) + " --parties " + std::to_string(parties) + " --timeout 120000 " +
                   party_args[p - 1]);
    }));
  }
  std::vector<Result> out;
  for (auto& f : fs) out.push_back(f.get());
  return out;
}

TEST(CliTest, HelpListsSubcommands) {
  const auto r = Shell("--help");
  EXPECT_EQ(r.code, 0);
  for (const char* sub : {"server", "party", "gen", "bench", "solve-clear"}) {
    EXPECT_NE(r.out.find(sub), std::string::npos) << sub;
  }
}

TEST(CliTest, UnknownOptionIsInputError) {
  EXPECT_EQ(Shell("gen --no-such-flag").code, 2);
  EXPECT_EQ(Shell("bench --parties-range 2..x").code, 2);
}

TEST(CliTest, SolveClearThreeCycle) {
  const auto r = Shell("solve-clear --input-dir " + Fixture("three-cycle"));
  ASSERT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("compatibility (1,2) (2,3) (2,4) (3,1) (4,2)"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("max_welfare 3"), std::string::npos);
  EXPECT_NE(r.out.find("optima 1"), std::string::npos);
  EXPECT_NE(r.out.find("{(1,2), (2,3), (3,1)}"), std::string::npos);
}

TEST(CliTest, SolveClearIncompatible) {
  const auto r = Shell("solve-clear --input-dir " + Fixture("incompatible"));
  ASSERT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("max_welfare 0"), std::string::npos) << r.out;
}

TEST(CliTest, GenIsReproducible) {
  const auto a = TempDir("gen-a");
  const auto b = TempDir("gen-b");
  ASSERT_EQ(Shell("gen --parties 5 --seed 11 --out " + a.string()).code, 0);
  ASSERT_EQ(Shell("gen --parties 5 --seed 11 --out " + b.string()).code, 0);
  for (int i = 1; i <= 5; ++i) {
    const std::string f = "party-" + std::to_string(i) + ".json";
    ASSERT_TRUE(fs::exists(a / f));
    EXPECT_EQ(Slurp(a / f), Slurp(b / f));
  }
  EXPECT_FALSE(fs::exists(a / "party-6.json"));
  EXPECT_EQ(Shell("solve-clear --input-dir " + a.string()).code, 0);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(CliTest, MalformedPartyInput) {
  const auto dir = TempDir("bad");
  std::ofstream(dir / "bad.json") << "{\"donor\": {}}";
  const auto r = Shell("party --party-id 1 --parties 2 --input " + (dir / "bad.json").string(), true);
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("missing 'patient'"), std::string::npos) << r.out;
  fs::remove_all(dir);
}

TEST(CliTest, UnreachableServerIsTransportError) {
  const auto r = Shell("party --server 127.0.0.1:1 --party-id 1 --parties 2 --timeout 2000 --input " +
                       Fixture("three-cycle/party-1.json"));
  EXPECT_EQ(r.code, 4);
}

TEST(CliTest, ThreeCycleSessionOverRelay) {
  auto [server, port] = StartServer("--parties 4 --dealer-seed 5");
  ASSERT_NE(server, nullptr);
  ASSERT_GT(port, 0);
  std::vector<std::string> args;
  for (int p = 1; p <= 4; ++p) args.push_back("--input " + Fixture("three-cycle/party-" + std::to_string(p) + ".json"));
  const auto results = RunSession(port, 4, args);
  ::pclose(server);
  const std::vector<std::string> expect{
      R"({"status":"exchange","n_d":3,"n_p":2})",
      R"({"status":"exchange","n_d":1,"n_p":3})",
      R"({"status":"exchange","n_d":2,"n_p":1})",
      R"({"status":"no_exchange"})",
  };
  for (int p = 0; p < 4; ++p) {
    EXPECT_EQ(results[p].code, 0) << "party " << p + 1;
    EXPECT_EQ(results[p].out, expect[p] + "\n") << "party " << p + 1;
  }
}

TEST(CliTest, CatalogMismatchAbortsEveryone) {
  const auto dir = TempDir("catalog");
  // Same version string, different content: only the hash differs.
  std::ofstream(dir / "alt.txt") << "kep-antigen-catalog realized-3\n[X]\nX1\nX2\nX3\nX4\n";
  std::ofstream(dir / "own.txt") << "kep-antigen-catalog realized-3\n[X]\nX1\nX2\nX3\n";
  for (int p = 1; p <= 3; ++p) {
    std::ofstream(dir / ("party-" + std::to_string(p) + ".json"))
        << R"({"catalog_version":"realized-3","donor":{"blood_type":"AB","antigens":[]},)"
        << R"("patient":{"blood_type":"O","antibodies":[]}})";
  }
  auto [server, port] = StartServer("--parties 3");
  ASSERT_GT(port, 0);
  std::vector<std::string> args;
  for (int p = 1; p <= 3; ++p) {
    args.push_back("--input " + (dir / ("party-" + std::to_string(p) + ".json")).string() + " --catalog " +
                   (dir / (p == 3 ? "alt.txt" : "own.txt")).string());
  }
  const auto results = RunSession(port, 3, args);
  ::pclose(server);
  for (const auto& r : results) {
    EXPECT_NE(r.code, 0);
    EXPECT_TRUE(r.out.empty()) << "no output on abort, got " << r.out;
  }
  // The party that notices the mismatch itself reports a protocol abort.
  int aborts = 0;
  for (const auto& r : results) aborts += r.code == 3;
  EXPECT_GE(aborts, 1);
  fs::remove_all(dir);
}

TEST(CliTest, BenchWritesCsv) {
  const auto dir = TempDir("bench");
  const auto csv = dir / "bench.csv";
  ASSERT_EQ(Shell("bench --parties-range 2-3 --reps 1 --out " + csv.string()).code, 0);
  std::ifstream in(csv);
  std::string header, row2, row3, extra;
  std::getline(in, header);
  std::getline(in, row2);
  std::getline(in, row3);
  EXPECT_EQ(header,
            "iota,key_bits,num_graphs,total_ms,t_construct_ms,t_eval_ms,t_prio_ms,t_map_ms,"
            "t_select_ms,t_output_ms,traffic_bytes,reps");
  EXPECT_EQ(row2.rfind("2,512,1,", 0), 0u) << row2;
  EXPECT_EQ(row3.rfind("3,512,5,", 0), 0u) << row3;
  EXPECT_FALSE(std::getline(in, extra) && !extra.empty());
  fs::remove_all(dir);
}

}  // namespace
