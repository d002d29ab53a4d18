#include "kep/instance.hpp"

#include <algorithm>

#include "kep/errors.hpp"

namespace kep::instance {
namespace {

std::filesystem::path PartyFile(const std::filesystem::path& dir, size_t party) {
  return dir / ("party-" + std::to_string(party) + ".json");
}

double Unit(Rng& rng) { return static_cast<double>(rng.NextU64() >> 11) * 0x1.0p-53; }

}  // namespace

std::vector<medical::PartyRecord> Generate(const GeneratorOptions& options,
                                           const medical::AntigenCatalog& catalog) {
  if (options.parties < 2) throw InputError("an instance needs at least 2 parties");
  if (options.antibody_rate < 0 || options.antibody_rate > 1 || options.antigen_rate < 0 ||
      options.antigen_rate > 1) {
    throw InputError("rates must lie in [0, 1]");
  }
  double weight_sum = 0;
  for (double w : options.blood_weights) {
    if (w < 0) throw InputError("blood type weights must be non-negative");
    weight_sum += w;
  }
  if (weight_sum <= 0) throw InputError("blood type weights must not all be zero");

  Rng rng = Rng::FromSeed(options.seed, 0x9e4);
  auto blood = [&] {
    double x = Unit(rng) * weight_sum;
    for (medical::BloodType t : medical::kAllBloodTypes) {
      x -= options.blood_weights[static_cast<size_t>(t)];
      if (x < 0) return t;
    }
    return medical::BloodType::kAB;
  };
  auto subset = [&](double rate) {
    std::vector<std::string> ids;
    for (const auto& e : catalog.entries()) {
      if (Unit(rng) < rate) ids.push_back(e.id);
    }
    return ids;
  };

  std::vector<medical::PartyRecord> out;
  for (uint32_t p = 0; p < options.parties; ++p) {
    medical::PartyRecord r;
    for (uint32_t attempt = 0; attempt < std::max<uint32_t>(1, options.max_attempts); ++attempt) {
      r.catalog_version = catalog.version();
      r.donor_blood = blood();
      r.donor_antigens = subset(options.antigen_rate);
      r.patient_blood = blood();
      r.patient_antibodies = subset(options.antibody_rate);
      if (!medical::EncodeQuote(r, catalog).own_pair_compatible) break;
    }
    out.push_back(std::move(r));
  }
  return out;
}

void WriteInstance(const std::filesystem::path& dir,
                   const std::vector<medical::PartyRecord>& records) {
  std::filesystem::create_directories(dir);
  for (size_t i = 0; i < records.size(); ++i) {
    medical::SavePartyRecord(records[i], PartyFile(dir, i + 1));
  }
}

std::vector<medical::PartyRecord> ReadInstance(const std::filesystem::path& dir) {
  std::vector<medical::PartyRecord> out;
  for (size_t i = 1; std::filesystem::exists(PartyFile(dir, i)); ++i) {
    out.push_back(medical::LoadPartyRecord(PartyFile(dir, i)));
  }
  if (out.empty()) throw InputError("no party-1.json in " + dir.string());
  return out;
}

oracle::ClearInstance Encode(const std::vector<medical::PartyRecord>& records,
                             const medical::AntigenCatalog& catalog) {
  oracle::ClearInstance inst;
  inst.antigen_count = catalog.size();
  for (const auto& r : records) inst.quotes.push_back(medical::EncodeQuote(r, catalog).quote);
  return inst;
}

RealizedInstance RealizeGraph(const oracle::CompatibilityMatrix& compatible) {
  const size_t n = compatible.size();
  if (n < 2) throw InputError("an instance needs at least 2 parties");
  std::vector<medical::CatalogEntry> entries;
  for (size_t i = 1; i <= n; ++i) entries.push_back({"X", "X" + std::to_string(i)});
  medical::AntigenCatalog catalog("realized-" + std::to_string(n), std::move(entries));

  std::vector<medical::PartyRecord> records(n);
  for (size_t j = 0; j < n; ++j) {
    if (compatible[j].size() != n) throw InputError("compatibility matrix must be square");
    auto& r = records[j];
    r.catalog_version = catalog.version();
    r.donor_blood = medical::BloodType::kO;
    r.patient_blood = medical::BloodType::kO;
    r.donor_antigens = {"X" + std::to_string(j + 1)};
    for (size_t i = 0; i < n; ++i) {
      if (i == j || !compatible[i][j]) r.patient_antibodies.push_back("X" + std::to_string(i + 1));
    }
  }
  return RealizedInstance{std::move(catalog), std::move(records)};
}

}  // namespace kep::instance
