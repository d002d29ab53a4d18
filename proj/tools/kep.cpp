// kep: relay server, party client, instance generator, benchmark harness
// and plaintext solver.

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "kep/bench.hpp"
#include "kep/client.hpp"
#include "kep/errors.hpp"
#include "kep/instance.hpp"
#include "kep/medical.hpp"
#include "kep/oracle.hpp"
#include "kep/transport.hpp"

namespace {

constexpr int kExitInput = 2;
constexpr int kExitAbort = 3;
constexpr int kExitTransport = 4;

constexpr const char* kDefaultAddress = "127.0.0.1:7878";
constexpr size_t kFullScaleKeyBits = 2048;

std::string EnvOr(const char* name, const std::string& fallback) {
  const char* v = std::getenv(name);
  return v != nullptr && *v != '\0' ? std::string(v) : fallback;
}

kep::medical::AntigenCatalog LoadCatalog(const std::string& path) {
  if (path.empty()) return kep::medical::AntigenCatalog::Default();
  return kep::medical::AntigenCatalog::Load(path);
}

uint32_t ParseCount(std::string_view text, const std::string& whole) {
  uint32_t v = 0;
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || end != text.data() + text.size() || text.empty()) {
    throw kep::InputError("party range must look like 4-7 or 4..7, got '" + whole + "'");
  }
  return v;
}

std::pair<uint32_t, uint32_t> ParseRange(const std::string& text) {
  const std::string_view t(text);
  if (const auto dots = t.find(".."); dots != std::string_view::npos) {
    return {ParseCount(t.substr(0, dots), text), ParseCount(t.substr(dots + 2), text)};
  }
  if (const auto dash = t.find('-'); dash != std::string_view::npos) {
    return {ParseCount(t.substr(0, dash), text), ParseCount(t.substr(dash + 1), text)};
  }
  const uint32_t v = ParseCount(t, text);
  return {v, v};
}

std::array<double, 4> ParseWeights(const std::string& text) {
  std::array<double, 4> w{};
  std::stringstream ss(text);
  std::string item;
  size_t k = 0;
  while (std::getline(ss, item, ',')) {
    if (k == 4) throw kep::InputError("blood type weights need exactly 4 values");
    try {
      w[k++] = std::stod(item);
    } catch (const std::exception&) {
      throw kep::InputError("invalid blood type weight '" + item + "'");
    }
  }
  if (k != 4) throw kep::InputError("blood type weights need exactly 4 values (O,B,A,AB)");
  return w;
}

struct ServerArgs {
  std::string bind;
  uint32_t parties = 3;
  uint32_t threshold = 0;
  size_t key_bits = 512;
  std::optional<uint64_t> dealer_seed;
  bool once = false;
  bool paper_scale = false;
};

int RunServer(const ServerArgs& a) {
  kep::transport::RelayOptions o;
  o.bind = kep::transport::Endpoint::Parse(a.bind);
  o.parties = static_cast<kep::transport::PartyId>(a.parties);
  o.threshold = a.threshold;
  o.key_bits = a.paper_scale ? kFullScaleKeyBits : a.key_bits;
  o.dealer_seed = a.dealer_seed;
  o.once = a.once;
  if (o.threshold > a.parties) throw kep::InputError("--threshold must not exceed --parties");
  kep::transport::RelayServer server(o);
  const uint16_t port = server.Start();
  std::cerr << "kep relay listening on " << o.bind.host << ":" << port << " (parties "
            << a.parties << ", threshold " << (a.threshold == 0 ? a.parties : a.threshold)
            << ", key bits " << o.key_bits << ")\n";
  server.Wait();
  std::cerr << "session traffic " << server.last_session_traffic() << " bytes\n";
  return 0;
}

struct PartyArgs {
  std::string server;
  uint32_t party = 0;
  uint32_t parties = 0;
  std::string input;
  std::string catalog;
  uint32_t max_cycle = 3;
  std::string session = "kep";
  std::optional<uint64_t> seed;
  std::string cache_dir;
  double timeout_s = 1800;
};

int RunParty(const PartyArgs& a) {
  const auto catalog = LoadCatalog(a.catalog);
  const auto record = kep::medical::LoadPartyRecord(a.input);
  const auto encoded = kep::medical::EncodeQuote(record, catalog);
  if (encoded.own_pair_compatible) {
    std::cerr << "warning: the party's own donor and patient look compatible\n";
  }
  if (a.max_cycle != 3 && a.max_cycle != 2) {
    throw kep::InputError("--max-cycle-size must be 2 or 3");
  }
  if (a.party < 1 || a.party > a.parties) {
    throw kep::InputError("--party-id must lie in [1, --parties]");
  }
  kep::client::ClientOptions o;
  o.server = kep::transport::Endpoint::Parse(a.server);
  o.party = a.party;
  o.parties = a.parties;
  o.session = kep::transport::MakeSessionId(a.session);
  o.max_cycle = a.max_cycle;
  o.seed = a.seed;
  o.cache_dir = a.cache_dir;
  o.timeout = std::chrono::milliseconds(static_cast<int64_t>(a.timeout_s * 1000));
  const auto report = kep::client::RunClient(o, encoded.quote, catalog.size(), catalog.Hash());
  std::cout << report.outcome.ToJson() << "\n";
  return 0;
}

struct GenArgs {
  kep::instance::GeneratorOptions gen;
  std::string weights;
  std::string catalog;
  std::string out = "instance";
};

int RunGen(GenArgs a) {
  const auto catalog = LoadCatalog(a.catalog);
  if (!a.weights.empty()) a.gen.blood_weights = ParseWeights(a.weights);
  const auto records = kep::instance::Generate(a.gen, catalog);
  kep::instance::WriteInstance(a.out, records);
  std::cerr << "wrote " << records.size() << " party files to " << a.out << "\n";
  return 0;
}

struct BenchArgs {
  std::string range = "2-5";
  kep::bench::BenchOptions bench;
  std::string catalog;
  std::string out;
  std::string cache_dir;
  bool paper_scale = false;
};

int RunBenchCmd(BenchArgs a) {
  const auto [lo, hi] = ParseRange(a.range);
  if (lo < 2 || hi < lo) throw kep::InputError("party range must satisfy 2 <= lo <= hi");
  const auto catalog = LoadCatalog(a.catalog);
  a.bench.catalog = &catalog;
  a.bench.cache_dir = a.cache_dir;
  if (a.paper_scale) {
    a.bench.key_bits = kFullScaleKeyBits;
    a.bench.net = true;
  }
  std::ofstream file;
  if (!a.out.empty()) {
    file.open(a.out);
    if (!file) throw kep::InputError("cannot write " + a.out);
  }
  std::ostream& out = a.out.empty() ? std::cout : file;
  out << kep::bench::CsvHeader() << "\n";
  for (uint32_t n = lo; n <= hi; ++n) {
    const auto row = kep::bench::RunBench(n, a.bench);
    out << kep::bench::ToCsvLine(row) << "\n" << std::flush;
    std::cerr << "iota " << n << ": " << row.total_ms << " ms, selection share "
              << kep::bench::SelectionShare(row) << "\n";
  }
  return 0;
}

struct SolveArgs {
  std::string input_dir;
  std::string catalog;
  uint32_t max_cycle = 3;
};

int RunSolve(const SolveArgs& a) {
  const auto catalog = LoadCatalog(a.catalog);
  const auto inst = kep::instance::Encode(kep::instance::ReadInstance(a.input_dir), catalog);
  const auto compat = kep::oracle::ClearCompatibilityGraph(inst);
  const auto solution = kep::oracle::Solve(compat, a.max_cycle);
  std::cout << "parties " << inst.quotes.size() << "\n";
  std::cout << "compatibility";
  for (size_t i = 0; i < compat.size(); ++i) {
    for (size_t j = 0; j < compat.size(); ++j) {
      if (compat[i][j]) std::cout << " (" << i + 1 << "," << j + 1 << ")";
    }
  }
  std::cout << "\nmax_welfare " << solution.max_welfare << "\n";
  std::cout << "optima " << solution.optima.size() << "\n";
  for (const auto& g : solution.optima) std::cout << g.ToString() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Privacy-preserving kidney exchange over threshold Paillier"};
  app.require_subcommand(1);

  ServerArgs server;
  server.bind = EnvOr("KEP_BIND", kDefaultAddress);
  auto* s = app.add_subcommand("server", "Run the relay server that deals keys and forwards frames");
  s->add_option("--bind", server.bind, "host:port to listen on (env KEP_BIND)");
  s->add_option("--parties", server.parties, "Parties per session")->check(CLI::Range(2, 1000));
  s->add_option("--threshold", server.threshold, "Decryption threshold, default = parties");
  s->add_option("--key-bits", server.key_bits, "Paillier modulus size")->check(CLI::Range(512, 8192));
  s->add_option("--dealer-seed", server.dealer_seed, "Deterministic key dealing (testing only)");
  s->add_flag("--once", server.once, "Exit after the first session");
  s->add_flag("--paper-scale", server.paper_scale, "Use 2048-bit keys");

  PartyArgs party;
  party.server = EnvOr("KEP_SERVER", kDefaultAddress);
  auto* p = app.add_subcommand("party", "Join a session as one patient-donor pair");
  p->add_option("--server", party.server, "Relay address host:port (env KEP_SERVER)");
  p->add_option("--party-id", party.party, "This party's index in [1, parties]")->required();
  p->add_option("--parties", party.parties, "Number of parties in the session")->required();
  p->add_option("--input", party.input, "Party input JSON")->required()->check(CLI::ExistingFile);
  p->add_option("--catalog", party.catalog, "Antigen catalog file (default: built in)");
  p->add_option("--max-cycle-size", party.max_cycle, "Longest exchange cycle (2 or 3)");
  p->add_option("--session", party.session, "Session name shared by all parties");
  p->add_option("--seed", party.seed, "Deterministic party randomness (testing only)");
  p->add_option("--cache-dir", party.cache_dir, "Constellation enumeration cache directory");
  p->add_option("--timeout", party.timeout_s, "Receive timeout in seconds");

  GenArgs gen;
  auto* g = app.add_subcommand("gen", "Generate random party input files");
  g->add_option("--parties", gen.gen.parties, "Number of parties")->check(CLI::Range(2, 1000));
  g->add_option("--seed", gen.gen.seed, "Generator seed");
  g->add_option("--antibody-rate", gen.gen.antibody_rate, "Per-antigen antibody probability")
      ->check(CLI::Range(0.0, 1.0));
  g->add_option("--antigen-rate", gen.gen.antigen_rate, "Per-antigen donor antigen probability")
      ->check(CLI::Range(0.0, 1.0));
  g->add_option("--blood-weights", gen.weights, "Weights for O,B,A,AB, e.g. 0.44,0.1,0.42,0.04");
  g->add_option("--catalog", gen.catalog, "Antigen catalog file (default: built in)");
  g->add_option("--out", gen.out, "Output directory");

  BenchArgs bench;
  auto* b = app.add_subcommand("bench", "Run end-to-end sessions and report per-phase timings");
  b->add_option("--parties-range", bench.range, "Party counts, e.g. 4-7");
  b->add_option("--reps", bench.bench.reps, "Repetitions per party count")->check(CLI::Range(1, 1000));
  b->add_option("--key-bits", bench.bench.key_bits, "Paillier modulus size")
      ->check(CLI::Range(512, 8192));
  b->add_option("--seed", bench.bench.seed, "Base seed");
  b->add_option("--antibody-rate", bench.bench.antibody_rate, "Per-antigen antibody probability");
  b->add_option("--antigen-rate", bench.bench.antigen_rate, "Per-antigen donor antigen probability");
  b->add_option("--catalog", bench.catalog, "Antigen catalog file (default: built in)");
  b->add_option("--cache-dir", bench.cache_dir, "Constellation enumeration cache directory");
  b->add_option("--out", bench.out, "CSV output file (default: stdout)");
  b->add_flag("--net", bench.bench.net, "Run over the TCP relay instead of the simulation");
  b->add_flag("--paper-scale", bench.paper_scale, "2048-bit keys over TCP");

  SolveArgs solve;
  auto* c = app.add_subcommand("solve-clear", "Solve an instance directory in the clear");
  c->add_option("--input-dir", solve.input_dir, "Directory with party-<i>.json files")
      ->required()
      ->check(CLI::ExistingDirectory);
  c->add_option("--catalog", solve.catalog, "Antigen catalog file (default: built in)");
  c->add_option("--max-cycle-size", solve.max_cycle, "Longest exchange cycle (2 or 3)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitInput;
  }

  try {
    if (*s) return RunServer(server);
    if (*p) return RunParty(party);
    if (*g) return RunGen(gen);
    if (*b) return RunBenchCmd(bench);
    if (*c) return RunSolve(solve);
  } catch (const kep::InputError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitInput;
  } catch (const kep::TransportError& e) {
    std::cerr << "transport error: " << e.what() << "\n";
    return kExitTransport;
  } catch (const kep::KepError& e) {
    std::cerr << "protocol abort: " << e.what() << "\n";
    return kExitAbort;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitAbort;
  }
  return 0;
}
