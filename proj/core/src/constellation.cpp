#include "kep/constellation.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "kep/errors.hpp"

namespace kep::constellation {
namespace {

void CheckParams(Party parties, uint32_t max_cycle) {
  if (parties < 2) throw InputError("an exchange needs at least 2 parties");
  if (parties > 0xFFFE) throw InputError("too many parties");
  if (max_cycle != 2 && max_cycle != 3) {
    throw InputError("only maximum cycle sizes 2 and 3 are supported");
  }
}

void Recurse(Party parties, uint32_t max_cycle, std::vector<bool>& used, std::vector<Edge>& edges,
             std::vector<ExchangeGraph>& out) {
  Party a = 1;
  while (a <= parties && used[a]) ++a;
  if (a > parties) {
    if (!edges.empty()) out.emplace_back(parties, edges);
    return;
  }
  used[a] = true;
  Recurse(parties, max_cycle, used, edges, out);
  for (Party b = a + 1; b <= parties; ++b) {
    if (used[b]) continue;
    used[b] = true;
    edges.push_back({a, b});
    edges.push_back({b, a});
    Recurse(parties, max_cycle, used, edges, out);
    edges.resize(edges.size() - 2);
    if (max_cycle == 3) {
      for (Party c = b + 1; c <= parties; ++c) {
        if (used[c]) continue;
        used[c] = true;
        for (bool forward : {true, false}) {
          const Party x = forward ? b : c;
          const Party y = forward ? c : b;
          edges.push_back({a, x});
          edges.push_back({x, y});
          edges.push_back({y, a});
          Recurse(parties, max_cycle, used, edges, out);
          edges.resize(edges.size() - 3);
        }
        used[c] = false;
      }
    }
    used[b] = false;
  }
  used[a] = false;
}

uint64_t MulMod(uint64_t a, uint64_t b, uint64_t m) {
  return static_cast<uint64_t>(static_cast<unsigned __int128>(a) * b % m);
}

uint64_t PowMod(uint64_t b, uint64_t e, uint64_t m) {
  uint64_t r = 1;
  b %= m;
  while (e > 0) {
    if (e & 1) r = MulMod(r, b, m);
    b = MulMod(b, b, m);
    e >>= 1;
  }
  return r;
}

std::vector<uint64_t> PrimesIn(const PrimeInterval& iv) {
  std::vector<uint64_t> out;
  for (uint64_t x = iv.lo; x < iv.hi; ++x) {
    if (IsPrime(x)) out.push_back(x);
  }
  return out;
}

constexpr char kCacheMagic[8] = {'K', 'E', 'P', 'E', 'N', 'U', 'M', '1'};

}  // namespace

ExchangeGraph::ExchangeGraph(Party parties, std::vector<Edge> edges)
    : parties_(parties), edges_(std::move(edges)) {
  std::sort(edges_.begin(), edges_.end());
}

bool ExchangeGraph::contains(Edge e) const {
  return std::binary_search(edges_.begin(), edges_.end(), e);
}

std::string ExchangeGraph::ToString() const {
  std::string out = "{";
  for (size_t i = 0; i < edges_.size(); ++i) {
    if (i > 0) out += ", ";
    out += "(" + std::to_string(edges_[i].from) + "," + std::to_string(edges_[i].to) + ")";
  }
  return out + "}";
}

std::string Neighborhood::ToString() const {
  return "(" + std::to_string(donor) + "," + std::to_string(recipient) + ")";
}

void ValidateExchangeGraph(const ExchangeGraph& graph, uint32_t max_cycle) {
  const Party n = graph.parties();
  if (graph.edges().empty()) throw InvariantError("exchange graph has no edges");
  std::vector<Party> succ(n + 1, 0);
  std::vector<Party> pred(n + 1, 0);
  for (const Edge& e : graph.edges()) {
    if (e.from < 1 || e.from > n || e.to < 1 || e.to > n || e.from == e.to) {
      throw InvariantError("edge " + std::to_string(e.from) + "->" + std::to_string(e.to) +
                           " is not between two distinct parties");
    }
    if (succ[e.from] != 0 || pred[e.to] != 0) {
      throw InvariantError("node degree above one in exchange graph " + graph.ToString());
    }
    succ[e.from] = e.to;
    pred[e.to] = e.from;
  }
  for (Party i = 1; i <= n; ++i) {
    if ((succ[i] == 0) != (pred[i] == 0)) {
      throw InvariantError("node " + std::to_string(i) + " has unequal in- and out-degree");
    }
    if (succ[i] == 0) continue;
    uint32_t length = 1;
    for (Party j = succ[i]; j != i; j = succ[j]) {
      if (++length > max_cycle) {
        throw InvariantError("cycle longer than " + std::to_string(max_cycle) + " in " +
                             graph.ToString());
      }
    }
  }
}

std::vector<ExchangeGraph> Enumerate(Party parties, uint32_t max_cycle) {
  CheckParams(parties, max_cycle);
  std::vector<ExchangeGraph> out;
  std::vector<bool> used(parties + 1, false);
  std::vector<Edge> edges;
  Recurse(parties, max_cycle, used, edges, out);
  std::sort(out.begin(), out.end());
  return out;
}

uint64_t Count(Party parties, uint32_t max_cycle) {
  CheckParams(parties, max_cycle);
  // a(n) = a(n-1) + (n-1) a(n-2) [+ (n-1)(n-2) a(n-3)]
  std::vector<uint64_t> a(parties + 1, 0);
  a[0] = 1;
  a[1] = 1;
  for (uint64_t n = 2; n <= parties; ++n) {
    a[n] = a[n - 1] + (n - 1) * a[n - 2];
    if (max_cycle == 3 && n >= 3) a[n] += (n - 1) * (n - 2) * a[n - 3];
  }
  return a[parties] - 1;
}

Neighborhood ExtractNeighborhood(const ExchangeGraph& graph, Party party) {
  if (party < 1 || party > graph.parties()) {
    throw InvariantError("party " + std::to_string(party) + " outside the graph");
  }
  Neighborhood out;
  int in = 0;
  int outdeg = 0;
  for (const Edge& e : graph.edges()) {
    if (e.to == party) {
      out.donor = e.from;
      ++in;
    }
    if (e.from == party) {
      out.recipient = e.to;
      ++outdeg;
    }
  }
  if (in > 1 || outdeg > 1 || in != outdeg) {
    throw InvariantError("party " + std::to_string(party) + " violates the degree constraint in " +
                         graph.ToString());
  }
  return out;
}

std::vector<Neighborhood> NeighborhoodsOf(Party parties, uint32_t max_cycle, Party party) {
  CheckParams(parties, max_cycle);
  if (party < 1 || party > parties) throw InputError("party index out of range");
  // Determined directly: (0,0), every (j, j) and, with 3-cycles, every
  // (j, k) with j != k. Each of these occurs in some enumerated graph.
  std::vector<Neighborhood> out{{0, 0}};
  for (Party j = 1; j <= parties; ++j) {
    if (j == party) continue;
    for (Party k = 1; k <= parties; ++k) {
      if (k == party) continue;
      if (j == k || max_cycle == 3) out.push_back({j, k});
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::vector<Neighborhood>> Neighborhoods(Party parties, uint32_t max_cycle) {
  std::vector<std::vector<Neighborhood>> out;
  for (Party i = 1; i <= parties; ++i) out.push_back(NeighborhoodsOf(parties, max_cycle, i));
  return out;
}

uint32_t Welfare(const ExchangeGraph& graph) { return static_cast<uint32_t>(graph.edges().size()); }

Digest EnumerationHash(const std::vector<ExchangeGraph>& graphs) {
  Bytes data;
  AppendU64Be(graphs.size(), &data);
  for (const auto& g : graphs) {
    AppendU32Be(static_cast<uint32_t>(g.edges().size()), &data);
    for (const Edge& e : g.edges()) {
      AppendU16Be(static_cast<uint16_t>(e.from), &data);
      AppendU16Be(static_cast<uint16_t>(e.to), &data);
    }
  }
  return Sha256(data);
}

bool IsPrime(uint64_t n) {
  if (n < 2) return false;
  for (uint64_t p : {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37}) {
    if (n % p == 0) return n == p;
  }
  uint64_t d = n - 1;
  int s = 0;
  while ((d & 1) == 0) {
    d >>= 1;
    ++s;
  }
  for (uint64_t a : {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37}) {
    uint64_t x = PowMod(a, d, n);
    if (x == 1 || x == n - 1) continue;
    bool composite = true;
    for (int r = 1; r < s; ++r) {
      x = MulMod(x, x, n);
      if (x == n - 1) {
        composite = false;
        break;
      }
    }
    if (composite) return false;
  }
  return true;
}

std::vector<PrimeInterval> PrimeIntervals(Party parties, uint32_t max_cycle) {
  CheckParams(parties, max_cycle);
  const size_t need = NeighborhoodsOf(parties, max_cycle, 1).size();
  for (uint64_t width = 64;; width *= 2) {
    std::vector<PrimeInterval> out;
    bool enough = true;
    for (Party i = 1; i <= parties && enough; ++i) {
      PrimeInterval iv{kPrimeBase + (i - 1) * width, kPrimeBase + i * width};
      enough = PrimesIn(iv).size() >= need;
      out.push_back(iv);
    }
    if (enough) return out;
  }
}

PartyPrimes::PartyPrimes(Party party, PrimeInterval interval,
                         std::map<Neighborhood, uint64_t> primes)
    : party_(party), interval_(interval), primes_(std::move(primes)) {}

uint64_t PartyPrimes::prime(const Neighborhood& n) const {
  auto it = primes_.find(n);
  if (it == primes_.end()) {
    throw InvariantError("neighborhood " + n.ToString() + " is not one of party " +
                         std::to_string(party_) + "'s neighborhoods");
  }
  return it->second;
}

PartyPrimes AssignPartyPrimes(Party parties, uint32_t max_cycle, Party party, Rng& rng) {
  const auto hoods = NeighborhoodsOf(parties, max_cycle, party);
  const PrimeInterval iv = PrimeIntervals(parties, max_cycle).at(party - 1);
  std::vector<uint64_t> pool = PrimesIn(iv);
  // Partial Fisher-Yates: the first |N_i| slots become a uniform ordered
  // sample without replacement.
  std::map<Neighborhood, uint64_t> primes;
  for (size_t k = 0; k < hoods.size(); ++k) {
    const size_t j = k + rng.Uniform(pool.size() - k);
    std::swap(pool[k], pool[j]);
    primes.emplace(hoods[k], pool[k]);
  }
  return PartyPrimes(party, iv, std::move(primes));
}

PrimeAssignment AssignPrimes(Party parties, uint32_t max_cycle, uint64_t seed) {
  PrimeAssignment out;
  for (Party i = 1; i <= parties; ++i) {
    Rng rng = Rng::FromSeed(seed, i);
    out.parties.push_back(AssignPartyPrimes(parties, max_cycle, i, rng));
  }
  return out;
}

mpz_class EncodeGraph(const ExchangeGraph& graph, const PrimeAssignment& assignment) {
  mpz_class product = 1;
  for (Party i = 1; i <= graph.parties(); ++i) {
    product *= static_cast<unsigned long>(assignment.of(i).prime(ExtractNeighborhood(graph, i)));
  }
  return product;
}

Neighborhood ReverseMap(const mpz_class& product, const PartyPrimes& primes) {
  std::optional<Neighborhood> found;
  for (const auto& [hood, p] : primes.primes()) {
    if (mpz_divisible_ui_p(product.get_mpz_t(), static_cast<unsigned long>(p)) != 0) {
      if (found) {
        throw CorruptionError("several primes of party " + std::to_string(primes.party()) +
                              " divide the selected product");
      }
      found = hood;
    }
  }
  if (!found) {
    throw CorruptionError("no prime of party " + std::to_string(primes.party()) +
                          " divides the selected product");
  }
  return *found;
}

Neighborhood ReverseMap(const mpz_class& product, const PrimeAssignment& assignment, Party party) {
  return ReverseMap(product, assignment.of(party));
}

void SaveEnumeration(const std::filesystem::path& path, Party parties, uint32_t max_cycle,
                     const std::vector<ExchangeGraph>& graphs) {
  Bytes data(std::begin(kCacheMagic), std::end(kCacheMagic));
  AppendU32Be(parties, &data);
  AppendU32Be(max_cycle, &data);
  AppendU64Be(graphs.size(), &data);
  for (const auto& g : graphs) {
    AppendU32Be(static_cast<uint32_t>(g.edges().size()), &data);
    for (const Edge& e : g.edges()) {
      AppendU16Be(static_cast<uint16_t>(e.from), &data);
      AppendU16Be(static_cast<uint16_t>(e.to), &data);
    }
  }
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw InputError("cannot write enumeration cache " + tmp);
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
  }
  std::filesystem::rename(tmp, path);
}

std::optional<std::vector<ExchangeGraph>> LoadEnumeration(const std::filesystem::path& path,
                                                          Party parties, uint32_t max_cycle) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  Bytes data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    ByteReader r(data);
    auto magic = r.ReadBytes(sizeof(kCacheMagic));
    if (!std::equal(magic.begin(), magic.end(), std::begin(kCacheMagic))) return std::nullopt;
    if (r.ReadU32() != parties || r.ReadU32() != max_cycle) return std::nullopt;
    const uint64_t count = r.ReadU64();
    if (count != Count(parties, max_cycle)) return std::nullopt;
    std::vector<ExchangeGraph> out;
    out.reserve(count);
    for (uint64_t k = 0; k < count; ++k) {
      const uint32_t m = r.ReadU32();
      if (m > parties) return std::nullopt;
      std::vector<Edge> edges;
      for (uint32_t e = 0; e < m; ++e) {
        const Party from = r.ReadU16();
        const Party to = r.ReadU16();
        edges.push_back({from, to});
      }
      out.emplace_back(parties, std::move(edges));
      ValidateExchangeGraph(out.back(), max_cycle);
    }
    if (!r.done() || !std::is_sorted(out.begin(), out.end())) return std::nullopt;
    return out;
  } catch (const KepError&) {
    return std::nullopt;
  }
}

std::vector<ExchangeGraph> EnumerateCached(Party parties, uint32_t max_cycle,
                                           const std::filesystem::path& cache_dir) {
  if (cache_dir.empty()) return Enumerate(parties, max_cycle);
  const auto path = cache_dir / ("constellations-" + std::to_string(parties) + "-" +
                                 std::to_string(max_cycle) + ".bin");
  if (auto cached = LoadEnumeration(path, parties, max_cycle)) return *std::move(cached);
  auto graphs = Enumerate(parties, max_cycle);
  std::error_code ec;
  std::filesystem::create_directories(cache_dir, ec);
  try {
    SaveEnumeration(path, parties, max_cycle, graphs);
  } catch (const std::exception&) {
    // A read-only cache directory only costs the regeneration next time.
  }
  return graphs;
}

}  // namespace kep::constellation
