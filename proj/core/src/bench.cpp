#include "kep/bench.hpp"

#include <cstdio>
#include <exception>
#include <thread>
#include <vector>

#include "kep/client.hpp"
#include "kep/constellation.hpp"
#include "kep/errors.hpp"
#include "kep/instance.hpp"
#include "kep/protocol.hpp"

namespace kep::bench {
namespace {

struct Sample {
  protocol::RunReport report;
  uint64_t traffic = 0;
};

Sample RunSimulatedOnce(const oracle::ClearInstance& inst, const medical::AntigenCatalog& catalog,
                        const std::vector<constellation::ExchangeGraph>& graphs,
                        const BenchOptions& options, uint64_t seed) {
  protocol::SimulatedRunOptions sim;
  sim.key_bits = options.key_bits;
  sim.seed = seed;
  sim.graphs = &graphs;
  auto run = protocol::RunSimulated(inst.quotes, catalog.size(), catalog.Hash(), sim);
  return Sample{run.reports.front(), run.sim.total_incoming()};
}

Sample RunNetOnce(const oracle::ClearInstance& inst, const medical::AntigenCatalog& catalog,
                  const BenchOptions& options, uint64_t seed) {
  const auto parties = static_cast<transport::PartyId>(inst.quotes.size());
  transport::RelayOptions relay_options;
  relay_options.parties = parties;
  relay_options.key_bits = options.key_bits;
  relay_options.dealer_seed = seed;
  relay_options.once = true;
  transport::RelayServer relay(relay_options);
  const uint16_t port = relay.Start();

  const auto session = transport::MakeSessionId("bench-" + std::to_string(seed));
  std::vector<protocol::RunReport> reports(parties);
  std::vector<std::exception_ptr> errors(parties);
  std::vector<std::thread> threads;
  for (transport::PartyId p = 1; p <= parties; ++p) {
    threads.emplace_back([&, p] {
      try {
        client::ClientOptions co;
        co.server = transport::Endpoint{"127.0.0.1", port};
        co.party = p;
        co.parties = parties;
        co.session = session;
        co.seed = seed;
        co.cache_dir = options.cache_dir;
        reports[p - 1] = client::RunClient(co, inst.quotes[p - 1], catalog.size(), catalog.Hash());
      } catch (...) {
        errors[p - 1] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  relay.Wait();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return Sample{reports.front(), relay.last_session_traffic()};
}

}  // namespace

BenchRow RunBench(uint32_t parties, const BenchOptions& options) {
  if (options.reps == 0) throw InputError("at least one repetition is required");
  const medical::AntigenCatalog& catalog =
      options.catalog != nullptr ? *options.catalog : medical::AntigenCatalog::Default();
  const auto graphs = constellation::EnumerateCached(parties, 3, options.cache_dir);

  BenchRow row;
  row.iota = parties;
  row.key_bits = options.key_bits;
  row.num_graphs = graphs.size();
  row.reps = options.reps;
  for (uint32_t rep = 0; rep < options.reps; ++rep) {
    instance::GeneratorOptions gen;
    gen.parties = parties;
    gen.seed = options.seed + rep;
    gen.antibody_rate = options.antibody_rate;
    gen.antigen_rate = options.antigen_rate;
    const auto inst = instance::Encode(instance::Generate(gen, catalog), catalog);
    const uint64_t seed = options.seed * 1000003 + rep;
    const Sample s = options.net ? RunNetOnce(inst, catalog, options, seed)
                                 : RunSimulatedOnce(inst, catalog, graphs, options, seed);
    using protocol::Phase;
    row.total_ms += s.report.total_ms;
    row.t_construct_ms += s.report.phase(Phase::kConstruction).ms;
    row.t_eval_ms += s.report.phase(Phase::kEvaluation).ms;
    row.t_prio_ms += s.report.phase(Phase::kPrioritization).ms;
    row.t_map_ms += s.report.phase(Phase::kMapping).ms;
    row.t_select_ms += s.report.phase(Phase::kSelection).ms;
    row.t_output_ms += s.report.phase(Phase::kOutput).ms;
    row.traffic_bytes += static_cast<double>(s.traffic);
  }
  const double n = options.reps;
  for (double* v : {&row.total_ms, &row.t_construct_ms, &row.t_eval_ms, &row.t_prio_ms,
                    &row.t_map_ms, &row.t_select_ms, &row.t_output_ms, &row.traffic_bytes}) {
    *v /= n;
  }
  return row;
}

std::string_view CsvHeader() {
  return "iota,key_bits,num_graphs,total_ms,t_construct_ms,t_eval_ms,t_prio_ms,t_map_ms,"
         "t_select_ms,t_output_ms,traffic_bytes,reps";
}

std::string ToCsvLine(const BenchRow& r) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), "%u,%zu,%llu,%.3f,%.3f,%.3f,%.3f,%.3f,%.3f,%.3f,%.0f,%u", r.iota,
                r.key_bits, static_cast<unsigned long long>(r.num_graphs), r.total_ms,
                r.t_construct_ms, r.t_eval_ms, r.t_prio_ms, r.t_map_ms, r.t_select_ms,
                r.t_output_ms, r.traffic_bytes, r.reps);
  return buf;
}

double SelectionShare(const BenchRow& row) {
  return row.total_ms > 0 ? row.t_select_ms / row.total_ms : 0;
}

}  // namespace kep::bench
