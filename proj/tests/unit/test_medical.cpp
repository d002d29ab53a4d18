#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "kep/errors.hpp"
#include "kep/medical.hpp"

namespace kep::medical {
namespace {

using BT = BloodType;

TEST(BloodTypeTest, VectorsFollowFixedOrder) {
  // Index order O, B, A, AB.
  EXPECT_EQ(PatientBloodVector(BT::kB), (BitVector{1, 1, 0, 0}));
  EXPECT_EQ(PatientBloodVector(BT::kO), (BitVector{1, 0, 0, 0}));
  EXPECT_EQ(PatientBloodVector(BT::kA), (BitVector{1, 0, 1, 0}));
  EXPECT_EQ(PatientBloodVector(BT::kAB), (BitVector{1, 1, 1, 1}));
  EXPECT_EQ(DonorBloodVector(BT::kO), (BitVector{1, 1, 1, 1}));
  EXPECT_EQ(DonorBloodVector(BT::kB), (BitVector{0, 1, 0, 1}));
  EXPECT_EQ(DonorBloodVector(BT::kA), (BitVector{0, 0, 1, 1}));
  EXPECT_EQ(DonorBloodVector(BT::kAB), (BitVector{0, 0, 0, 1}));
}

TEST(BloodTypeTest, ParseAndPrint) {
  for (auto t : kAllBloodTypes) EXPECT_EQ(ParseBloodType(ToString(t)), t);
  EXPECT_EQ(ParseBloodType("AB"), BT::kAB);
  EXPECT_THROW(ParseBloodType("C"), InputError);
  EXPECT_THROW(ParseBloodType(""), InputError);
}

TEST(BloodTypeTest, VectorsAgreeWithRule) {
  for (auto d : kAllBloodTypes) {
    for (auto p : kAllBloodTypes) {
      const auto dv = DonorBloodVector(d);
      const auto pv = PatientBloodVector(p);
      bool overlap = false;
      for (size_t k = 0; k < kBloodTypeCount; ++k) overlap |= dv[k] && pv[k];
      const bool expected = d == BT::kO || p == BT::kAB || d == p;
      EXPECT_EQ(overlap, expected);
      EXPECT_EQ(AboCompatible(d, p), expected);
    }
  }
}

TEST(CatalogTest, DefaultCatalog) {
  const auto& c = AntigenCatalog::Default();
  EXPECT_EQ(c.version(), "hla-serological-v1");
  EXPECT_GT(c.size(), 100u);
  ASSERT_TRUE(c.IndexOf("A1").has_value());
  EXPECT_EQ(*c.IndexOf("A1"), 0u);
  EXPECT_TRUE(c.IndexOf("DR4").has_value());
  EXPECT_FALSE(c.IndexOf("Z99").has_value());
  std::set<std::string> loci;
  for (const auto& e : c.entries()) loci.insert(e.locus);
  EXPECT_EQ(loci, (std::set<std::string>{"HLA-A", "HLA-B", "HLA-C", "HLA-DQ", "HLA-DR"}));
}

TEST(CatalogTest, ParseTextRoundTrip) {
  const std::string text =
      "# test\n"
      "kep-antigen-catalog tiny-1\n"
      "[L1]\n"
      "a  # trailing comment\n"
      "b\n"
      "\n"
      "[L2]\n"
      "c\n";
  const auto c = AntigenCatalog::Parse(text);
  EXPECT_EQ(c.version(), "tiny-1");
  ASSERT_EQ(c.size(), 3u);
  EXPECT_EQ(c.entries()[2].locus, "L2");
  EXPECT_EQ(*c.IndexOf("c"), 2u);
  const auto again = AntigenCatalog::Parse(c.ToText());
  EXPECT_EQ(again.entries().size(), 3u);
  EXPECT_EQ(again.Hash(), c.Hash());
}

TEST(CatalogTest, HashDependsOnOrderAndVersion) {
  const auto a = AntigenCatalog::Parse("kep-antigen-catalog v\n[L]\nx\ny\n");
  const auto b = AntigenCatalog::Parse("kep-antigen-catalog v\n[L]\ny\nx\n");
  const auto c = AntigenCatalog::Parse("kep-antigen-catalog w\n[L]\nx\ny\n");
  EXPECT_NE(a.Hash(), b.Hash());
  EXPECT_NE(a.Hash(), c.Hash());
}

TEST(CatalogTest, MalformedCatalogsRejected) {
  EXPECT_THROW(AntigenCatalog::Parse(""), InputError);
  EXPECT_THROW(AntigenCatalog::Parse("kep-antigen-catalog v\n"), InputError);
  EXPECT_THROW(AntigenCatalog::Parse("not-a-catalog\n[L]\nx\n"), InputError);
  EXPECT_THROW(AntigenCatalog::Parse("kep-antigen-catalog v\nx\n"), InputError);
  EXPECT_THROW(AntigenCatalog::Parse("kep-antigen-catalog v\n[L]\nx\nx\n"), InputError);
  EXPECT_THROW(AntigenCatalog::Parse("kep-antigen-catalog v\n[L\nx\n"), InputError);
  EXPECT_THROW(AntigenCatalog::Load("/nonexistent/catalog.txt"), InputError);
}

class EncodingTest : public ::testing::Test {
 protected:
  AntigenCatalog catalog_ = AntigenCatalog::Parse("kep-antigen-catalog t\n[L]\nx0\nx1\nx2\nx3\n");
};

TEST_F(EncodingTest, IndicatorVectors) {
  const std::vector<std::string> ag{"x1", "x3"};
  const auto d = EncodeDonor(BT::kA, ag, catalog_);
  EXPECT_EQ(d.blood, DonorBloodVector(BT::kA));
  EXPECT_EQ(d.antigens, (BitVector{0, 1, 0, 1}));
  const std::vector<std::string> ab{"x0"};
  const auto p = EncodePatient(BT::kB, ab, catalog_);
  EXPECT_EQ(p.blood, (BitVector{1, 1, 0, 0}));
  EXPECT_EQ(p.antibodies, (BitVector{1, 0, 0, 0}));
}

TEST_F(EncodingTest, UnknownIdentifierNamed) {
  const std::vector<std::string> ag{"x1", "nope"};
  try {
    EncodeDonor(BT::kO, ag, catalog_);
    FAIL();
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("nope"), std::string::npos);
  }
  EXPECT_THROW(EncodePatient(BT::kO, ag, catalog_), InputError);
}

TEST_F(EncodingTest, PlaintextPredicate) {
  const std::vector<std::string> none;
  const std::vector<std::string> x2{"x2"};
  const auto donor = EncodeDonor(BT::kO, x2, catalog_);
  EXPECT_TRUE(PlaintextCompatible(donor, EncodePatient(BT::kA, none, catalog_)));
  EXPECT_FALSE(PlaintextCompatible(donor, EncodePatient(BT::kA, x2, catalog_)));
  const auto ab_donor = EncodeDonor(BT::kAB, none, catalog_);
  EXPECT_FALSE(PlaintextCompatible(ab_donor, EncodePatient(BT::kA, none, catalog_)));
  EXPECT_TRUE(PlaintextCompatible(ab_donor, EncodePatient(BT::kAB, none, catalog_)));
  PatientInput short_patient{PatientBloodVector(BT::kO), {0}};
  EXPECT_THROW(PlaintextCompatible(donor, short_patient), InputError);
}

TEST(PartyRecordTest, JsonRoundTrip) {
  PartyRecord r;
  r.donor_blood = BT::kAB;
  r.donor_antigens = {"A1", "B8"};
  r.patient_blood = BT::kB;
  r.patient_antibodies = {"DR4"};
  r.catalog_version = "hla-serological-v1";
  const auto back = ParsePartyRecord(PartyRecordToJson(r));
  EXPECT_EQ(back.donor_blood, r.donor_blood);
  EXPECT_EQ(back.donor_antigens, r.donor_antigens);
  EXPECT_EQ(back.patient_blood, r.patient_blood);
  EXPECT_EQ(back.patient_antibodies, r.patient_antibodies);
  EXPECT_EQ(back.catalog_version, r.catalog_version);
}

TEST(PartyRecordTest, MissingFieldIsNamed) {
  const std::string j = R"({"catalog_version":"v","donor":{"blood_type":"O","antigens":[]},
                            "patient":{"blood_type":"A"}})";
  try {
    ParsePartyRecord(j);
    FAIL();
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("patient.antibodies"), std::string::npos) << e.what();
  }
}

TEST(PartyRecordTest, MalformedInputsRejected) {
  EXPECT_THROW(ParsePartyRecord("{"), InputError);
  EXPECT_THROW(ParsePartyRecord("[]"), InputError);
  EXPECT_THROW(ParsePartyRecord(R"({"catalog_version":"v","donor":{"blood_type":"Q","antigens":[]},
                                    "patient":{"blood_type":"A","antibodies":[]}})"),
               InputError);
  EXPECT_THROW(ParsePartyRecord(R"({"catalog_version":"v","donor":{"blood_type":"O","antigens":[1]},
                                    "patient":{"blood_type":"A","antibodies":[]}})"),
               InputError);
  EXPECT_THROW(LoadPartyRecord("/nonexistent/party.json"), InputError);
}

TEST(PartyRecordTest, FixtureLoadsAndEncodes) {
  const auto r = LoadPartyRecord(std::filesystem::path(KEP_FIXTURE_DIR) / "three-cycle" / "party-1.json");
  const auto& cat = AntigenCatalog::Default();
  const auto q = EncodeQuote(r, cat);
  EXPECT_EQ(q.quote.donor.antigens.size(), cat.size());
  EXPECT_EQ(q.quote.donor.antigens[*cat.IndexOf("A1")], 1);
  EXPECT_EQ(q.quote.patient.antibodies[*cat.IndexOf("A11")], 1);
  EXPECT_FALSE(q.own_pair_compatible);
}

TEST(PartyRecordTest, SaveAndLoad) {
  PartyRecord r;
  r.catalog_version = "hla-serological-v1";
  r.donor_antigens = {"A2"};
  const auto path = std::filesystem::temp_directory_path() / "kep-test-record.json";
  SavePartyRecord(r, path);
  EXPECT_EQ(LoadPartyRecord(path).donor_antigens, r.donor_antigens);
  std::filesystem::remove(path);
}

TEST(EncodeQuoteTest, CatalogVersionMustMatch) {
  PartyRecord r;
  r.catalog_version = "other";
  EXPECT_THROW(EncodeQuote(r, AntigenCatalog::Default()), InputError);
}

TEST(EncodeQuoteTest, OwnPairCompatibilityReported) {
  PartyRecord r;
  r.catalog_version = "hla-serological-v1";
  r.donor_blood = BT::kO;
  r.patient_blood = BT::kA;
  EXPECT_TRUE(EncodeQuote(r, AntigenCatalog::Default()).own_pair_compatible);
  r.patient_antibodies = {"A1"};
  r.donor_antigens = {"A1"};
  EXPECT_FALSE(EncodeQuote(r, AntigenCatalog::Default()).own_pair_compatible);
}

}  // namespace
}  // namespace kep::medical
