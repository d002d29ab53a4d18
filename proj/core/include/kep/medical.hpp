#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kep/bytes.hpp"

// Indicator-vector encoding of donor and patient medical data and the
// plaintext compatibility predicate (ABO blood type plus HLA antibodies).
namespace kep::medical {

// Vector index order is fixed as (O, B, A, AB).
enum class BloodType : uint8_t { kO = 0, kB = 1, kA = 2, kAB = 3 };
inline constexpr size_t kBloodTypeCount = 4;
inline constexpr BloodType kAllBloodTypes[] = {BloodType::kO, BloodType::kB, BloodType::kA,
                                               BloodType::kAB};

std::string_view ToString(BloodType type);
BloodType ParseBloodType(std::string_view text);

// ABO rule: O donates to everyone, AB receives from everyone, A and B
// donate to themselves and AB.
bool AboCompatible(BloodType donor, BloodType patient);

using BitVector = std::vector<uint8_t>;

struct CatalogEntry {
  std::string locus;
  std::string id;
};

// Ordered antigen identifiers. All parties of a session must use the same
// catalog; Hash() is exchanged to check this.
class AntigenCatalog {
 public:
  AntigenCatalog(std::string version, std::vector<CatalogEntry> entries);

  // Text format: a `kep-antigen-catalog <version>` line, `[LOCUS]` section
  // headers and one identifier per line. `#` starts a comment.
  static AntigenCatalog Parse(std::string_view text);
  static AntigenCatalog Load(const std::filesystem::path& path);
  // The catalog shipped in data/hla_catalog.txt (compiled in).
  static const AntigenCatalog& Default();

  const std::string& version() const { return version_; }
  size_t size() const { return entries_.size(); }
  const std::vector<CatalogEntry>& entries() const { return entries_; }
  std::optional<size_t> IndexOf(std::string_view id) const;
  Digest Hash() const;
  std::string ToText() const;

 private:
  std::string version_;
  std::vector<CatalogEntry> entries_;
  std::map<std::string, size_t, std::less<>> index_;
};

struct DonorInput {
  BitVector blood;     // [k] = 1 iff this donor can donate to blood type k
  BitVector antigens;  // [k] = 1 iff the donor carries antigen k
};

struct PatientInput {
  BitVector blood;       // [k] = 1 iff this patient can receive from blood type k
  BitVector antibodies;  // [k] = 1 iff the patient has an antibody against antigen k
};

struct Quote {
  DonorInput donor;
  PatientInput patient;
};

BitVector DonorBloodVector(BloodType type);
BitVector PatientBloodVector(BloodType type);

// InputError naming the first identifier missing from the catalog.
DonorInput EncodeDonor(BloodType blood, std::span<const std::string> antigens,
                       const AntigenCatalog& catalog);
PatientInput EncodePatient(BloodType blood, std::span<const std::string> antibodies,
                           const AntigenCatalog& catalog);

// (exists k: B_D[k] and B_P[k]) and (forall k: not (A_D[k] and A_P[k])).
bool PlaintextCompatible(const DonorInput& donor, const PatientInput& patient);

// One party's input file.
struct PartyRecord {
  BloodType donor_blood = BloodType::kO;
  std::vector<std::string> donor_antigens;
  BloodType patient_blood = BloodType::kO;
  std::vector<std::string> patient_antibodies;
  std::string catalog_version;
};

PartyRecord ParsePartyRecord(std::string_view json_text);
PartyRecord LoadPartyRecord(const std::filesystem::path& path);
std::string PartyRecordToJson(const PartyRecord& record);
void SavePartyRecord(const PartyRecord& record, const std::filesystem::path& path);

struct EncodedQuote {
  Quote quote;
  // The party's own donor and patient look compatible: the pair would not
  // need an exchange. Reported, not rejected.
  bool own_pair_compatible = false;
};

// InputError if the record names a different catalog version.
EncodedQuote EncodeQuote(const PartyRecord& record, const AntigenCatalog& catalog);

}  // namespace kep::medical
