#include "kep/medical.hpp"

#include <fstream>
#include "json.hpp"
#include <sstream>

#include "kep/errors.hpp"

namespace kep::medical {
namespace {

constexpr std::string_view kCatalogMagic = "kep-antigen-catalog";

constexpr std::string_view kDefaultCatalogText =
#include "default_catalog.inc"
    ;

std::string Trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

BitVector EncodeSet(std::span<const std::string> ids, const AntigenCatalog& catalog) {
  BitVector out(catalog.size(), 0);
  for (const auto& id : ids) {
    auto idx = catalog.IndexOf(id);
    if (!idx) {
      throw InputError("unknown antigen identifier '" + id + "'");
    }
    out[*idx] = 1;
  }
  return out;
}

}  // namespace

std::string_view ToString(BloodType type) {
  switch (type) {
    case BloodType::kO: return "O";
    case BloodType::kB: return "B";
    case BloodType::kA: return "A";
    case BloodType::kAB: return "AB";
  }
  return "?";
}

BloodType ParseBloodType(std::string_view text) {
  for (BloodType t : kAllBloodTypes) {
    if (text == ToString(t)) return t;
  }
  throw InputError("unknown blood type '" + std::string(text) + "'");
}

bool AboCompatible(BloodType donor, BloodType patient) {
  if (donor == BloodType::kO || patient == BloodType::kAB) return true;
  return donor == patient;
}

BitVector DonorBloodVector(BloodType type) {
  BitVector out(kBloodTypeCount);
  for (BloodType k : kAllBloodTypes) out[static_cast<size_t>(k)] = AboCompatible(type, k) ? 1 : 0;
  return out;
}

BitVector PatientBloodVector(BloodType type) {
  BitVector out(kBloodTypeCount);
  for (BloodType k : kAllBloodTypes) out[static_cast<size_t>(k)] = AboCompatible(k, type) ? 1 : 0;
  return out;
}

AntigenCatalog::AntigenCatalog(std::string version, std::vector<CatalogEntry> entries)
    : version_(std::move(version)), entries_(std::move(entries)) {
  if (version_.empty()) {
    throw InputError("antigen catalog needs a version");
  }
  if (entries_.empty()) {
    throw InputError("antigen catalog is empty");
  }
  for (size_t i = 0; i < entries_.size(); ++i) {
    if (!index_.emplace(entries_[i].id, i).second) {
      throw InputError("duplicate antigen identifier '" + entries_[i].id + "'");
    }
  }
}

AntigenCatalog AntigenCatalog::Parse(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::string version;
  std::string locus;
  std::vector<CatalogEntry> entries;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    const std::string t = Trim(line);
    if (t.empty()) continue;
    if (version.empty()) {
      if (t.rfind(kCatalogMagic, 0) != 0) {
        throw InputError("catalog must start with '" + std::string(kCatalogMagic) + " <version>'");
      }
      version = Trim(std::string_view(t).substr(kCatalogMagic.size()));
      if (version.empty()) throw InputError("catalog version missing");
      continue;
    }
    if (t.front() == '[') {
      if (t.back() != ']' || t.size() < 3) {
        throw InputError("malformed locus header on line " + std::to_string(lineno));
      }
      locus = t.substr(1, t.size() - 2);
      continue;
    }
    if (locus.empty()) {
      throw InputError("antigen '" + t + "' appears before any locus header");
    }
    entries.push_back({locus, t});
  }
  if (version.empty()) throw InputError("empty catalog");
  return AntigenCatalog(version, std::move(entries));
}

AntigenCatalog AntigenCatalog::Load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open catalog " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return Parse(ss.str());
}

const AntigenCatalog& AntigenCatalog::Default() {
  static const AntigenCatalog catalog = Parse(kDefaultCatalogText);
  return catalog;
}

std::optional<size_t> AntigenCatalog::IndexOf(std::string_view id) const {
  auto it = index_.find(id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::string AntigenCatalog::ToText() const {
  std::string out = std::string(kCatalogMagic) + " " + version_ + "\n";
  std::string locus;
  for (const auto& e : entries_) {
    if (e.locus != locus) {
      locus = e.locus;
      out += "[" + locus + "]\n";
    }
    out += e.id + "\n";
  }
  return out;
}

Digest AntigenCatalog::Hash() const { return Sha256(ToText()); }

DonorInput EncodeDonor(BloodType blood, std::span<const std::string> antigens,
                       const AntigenCatalog& catalog) {
  return DonorInput{DonorBloodVector(blood), EncodeSet(antigens, catalog)};
}

PatientInput EncodePatient(BloodType blood, std::span<const std::string> antibodies,
                           const AntigenCatalog& catalog) {
  return PatientInput{PatientBloodVector(blood), EncodeSet(antibodies, catalog)};
}

bool PlaintextCompatible(const DonorInput& donor, const PatientInput& patient) {
  if (donor.blood.size() != kBloodTypeCount || patient.blood.size() != kBloodTypeCount) {
    throw InputError("blood type vectors must have length 4");
  }
  if (donor.antigens.size() != patient.antibodies.size()) {
    throw InputError("antigen and antibody vectors differ in length");
  }
  bool blood_ok = false;
  for (size_t k = 0; k < kBloodTypeCount; ++k) {
    blood_ok = blood_ok || (donor.blood[k] && patient.blood[k]);
  }
  for (size_t k = 0; k < donor.antigens.size(); ++k) {
    if (donor.antigens[k] && patient.antibodies[k]) return false;
  }
  return blood_ok;
}

PartyRecord ParsePartyRecord(std::string_view json_text) {
  using nlohmann::json;
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw InputError(std::string("party input is not valid JSON: ") + e.what());
  }
  auto field = [&](const json& obj, const char* name, const char* path) -> const json& {
    if (!obj.is_object() || !obj.contains(name)) {
      throw InputError(std::string("party input is missing '") + path + "'");
    }
    return obj.at(name);
  };
  auto string_list = [&](const json& arr, const char* path) {
    if (!arr.is_array()) throw InputError(std::string("'") + path + "' must be an array");
    std::vector<std::string> out;
    for (const auto& v : arr) {
      if (!v.is_string()) throw InputError(std::string("'") + path + "' must contain strings");
      out.push_back(v.get<std::string>());
    }
    return out;
  };
  auto string_field = [&](const json& v, const char* path) {
    if (!v.is_string()) throw InputError(std::string("'") + path + "' must be a string");
    return v.get<std::string>();
  };

  PartyRecord r;
  const json& donor = field(j, "donor", "donor");
  const json& patient = field(j, "patient", "patient");
  r.donor_blood = ParseBloodType(string_field(field(donor, "blood_type", "donor.blood_type"),
                                              "donor.blood_type"));
  r.donor_antigens = string_list(field(donor, "antigens", "donor.antigens"), "donor.antigens");
  r.patient_blood = ParseBloodType(string_field(field(patient, "blood_type", "patient.blood_type"),
                                                "patient.blood_type"));
  r.patient_antibodies =
      string_list(field(patient, "antibodies", "patient.antibodies"), "patient.antibodies");
  r.catalog_version = string_field(field(j, "catalog_version", "catalog_version"), "catalog_version");
  return r;
}

PartyRecord LoadPartyRecord(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open input file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return ParsePartyRecord(ss.str());
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

std::string PartyRecordToJson(const PartyRecord& r) {
  nlohmann::ordered_json j;
  j["catalog_version"] = r.catalog_version;
  j["donor"]["blood_type"] = std::string(ToString(r.donor_blood));
  j["donor"]["antigens"] = r.donor_antigens;
  j["patient"]["blood_type"] = std::string(ToString(r.patient_blood));
  j["patient"]["antibodies"] = r.patient_antibodies;
  return j.dump(2) + "\n";
}

void SavePartyRecord(const PartyRecord& record, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out << PartyRecordToJson(record);
}

EncodedQuote EncodeQuote(const PartyRecord& record, const AntigenCatalog& catalog) {
  if (record.catalog_version != catalog.version()) {
    throw InputError("input uses catalog version '" + record.catalog_version +
                     "' but the session catalog is '" + catalog.version() + "'");
  }
  EncodedQuote out;
  out.quote.donor = EncodeDonor(record.donor_blood, record.donor_antigens, catalog);
  out.quote.patient = EncodePatient(record.patient_blood, record.patient_antibodies, catalog);
  out.own_pair_compatible = PlaintextCompatible(out.quote.donor, out.quote.patient);
  return out;
}

}  // namespace kep::medical
