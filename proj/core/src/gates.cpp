#include "kep/gates.hpp"

#include <algorithm>
#include <map>
#include <mutex>
#include <numeric>
#include <string>

#include "kep/errors.hpp"

namespace kep::gates {
namespace {

using paillier::Add;
using paillier::EncryptPublic;
using paillier::ScalarMul;
using paillier::Sub;

std::string TagText(uint32_t session, uint32_t gate, uint32_t round, uint32_t sender) {
  return "(session " + std::to_string(session) + ", gate " + std::to_string(gate) + ", round " +
         std::to_string(round) + ", sender " + std::to_string(sender) + ")";
}

// Degree split for Paterson-Stockmeyer evaluation of a degree-d polynomial:
// baby steps z^1..z^k, then floor(d / k) Horner steps in z^k.
uint64_t BabyStepCount(uint64_t degree) {
  uint64_t best_k = 1;
  uint64_t best = degree;
  for (uint64_t k = 1; k <= degree; ++k) {
    const uint64_t cost = (k - 1) + degree / k;
    if (cost < best) {
      best = cost;
      best_k = k;
    }
  }
  return best_k;
}

LtPolynomial BuildLessThanPolynomial(uint64_t bound) {
  // Interpolation nodes t = 1..n with n = 2 bound - 1; the target value is 1
  // on (bound, n] and 0 on [1, bound].
  const uint64_t n = 2 * bound - 1;
  // master(t) = prod_{l=1..n} (t - l), ascending coefficients.
  std::vector<mpz_class> master{1};
  for (uint64_t l = 1; l <= n; ++l) {
    std::vector<mpz_class> next(master.size() + 1, 0);
    for (size_t i = 0; i < master.size(); ++i) {
      next[i + 1] += master[i];
      next[i] -= master[i] * static_cast<unsigned long>(l);
    }
    master = std::move(next);
  }

  std::vector<mpq_class> coeffs(n, 0);
  for (uint64_t j = bound + 1; j <= n; ++j) {
    // quotient = master / (t - j) by synthetic division.
    std::vector<mpz_class> q(n);
    mpz_class carry = 0;
    for (size_t i = n; i-- > 0;) {
      carry = master[i + 1] + carry * static_cast<unsigned long>(j);
      q[i] = carry;
    }
    // prod_{l != j} (j - l) = (j - 1)! * (-1)^(n - j) * (n - j)!
    mpz_class denom;
    mpz_class right;
    mpz_fac_ui(denom.get_mpz_t(), j - 1);
    mpz_fac_ui(right.get_mpz_t(), n - j);
    denom *= right;
    if ((n - j) % 2 == 1) denom = -denom;
    for (size_t i = 0; i < n; ++i) {
      mpq_class term(q[i], denom);
      term.canonicalize();
      coeffs[i] += term;
    }
  }

  LtPolynomial out;
  out.scale = 1;
  for (const auto& c : coeffs) {
    mpz_lcm(out.scale.get_mpz_t(), out.scale.get_mpz_t(), c.get_den_mpz_t());
  }
  out.coefficients.reserve(n);
  for (const auto& c : coeffs) {
    mpz_class v = c.get_num() * (out.scale / c.get_den());
    out.coefficients.push_back(std::move(v));
  }
  return out;
}

size_t CheckedCount(size_t a, size_t b, const char* what) {
  if (a != b) {
    throw InputError(std::string(what) + ": length mismatch");
  }
  return a;
}

}  // namespace

std::string_view ToString(DecryptionSite site) {
  switch (site) {
    case DecryptionSite::kMultMask: return "mult-mask";
    case DecryptionSite::kCrsEmptiness: return "crs_c-emptiness-bit";
    case DecryptionSite::kSelectedProduct: return "selected-product";
  }
  return "unknown";
}

GateContext::GateContext(const PublicKey& pk, const KeyShare& share, transport::Channel& channel,
                         Rng& rng, uint32_t session_tag)
    : pk_(pk), share_(share), channel_(channel), rng_(rng), session_tag_(session_tag) {
  if (share.party_index != channel.self()) {
    throw InputError("key share index " + std::to_string(share.party_index) +
                     " does not match channel party " + std::to_string(channel.self()));
  }
  if (pk.parties() != channel.parties()) {
    throw InputError("public key and channel disagree on the party count");
  }
}

uint32_t GateContext::BeginGate() {
  ++stats_.gates;
  return next_gate_++;
}

Bytes GateContext::EncodeMessage(uint32_t gate, uint32_t round,
                                 std::span<const Ciphertext> values) const {
  Bytes out;
  AppendU32Be(session_tag_, &out);
  AppendU32Be(gate, &out);
  AppendU32Be(round, &out);
  AppendU32Be(self(), &out);
  for (const auto& c : values) AppendBigInt(c.value, &out);
  return out;
}

void GateContext::BroadcastValues(uint32_t gate, uint32_t round,
                                  std::span<const Ciphertext> values) {
  channel_.Broadcast(EncodeMessage(gate, round, values));
}

void GateContext::SendValues(PartyIndex to, uint32_t gate, uint32_t round,
                             std::span<const Ciphertext> values) {
  channel_.Send(static_cast<transport::PartyId>(to), EncodeMessage(gate, round, values));
}

std::vector<Ciphertext> GateContext::ReceiveValues(PartyIndex from, uint32_t gate,
                                                   uint32_t round) {
  const Bytes payload = channel_.Receive(static_cast<transport::PartyId>(from));
  std::vector<Ciphertext> out;
  try {
    ByteReader r(payload);
    const uint32_t s = r.ReadU32();
    const uint32_t g = r.ReadU32();
    const uint32_t rd = r.ReadU32();
    const uint32_t sender = r.ReadU32();
    if (s != session_tag_ || g != gate || rd != round || sender != from) {
      throw ProtocolAbort("party " + std::to_string(self()) + " expected message " +
                          TagText(session_tag_, gate, round, from) + " but received " +
                          TagText(s, g, rd, sender));
    }
    while (!r.done()) {
      Ciphertext c{r.ReadBigInt()};
      paillier::Validate(pk_, c);
      out.push_back(std::move(c));
    }
  } catch (const InputError& e) {
    throw ProtocolAbort("malformed gate message from party " + std::to_string(from) + ": " +
                        e.what());
  }
  return out;
}

namespace {

std::vector<Ciphertext> ReceiveCount(GateContext& ctx, PartyIndex from, uint32_t gate,
                                     uint32_t round, size_t count) {
  auto values = ctx.ReceiveValues(from, gate, round);
  if (values.size() != count) {
    throw ProtocolAbort("party " + std::to_string(from) + " sent " +
                        std::to_string(values.size()) + " values, expected " +
                        std::to_string(count));
  }
  return values;
}

}  // namespace

std::vector<mpz_class> GateContext::ThresholdDecrypt(std::span<const Ciphertext> values,
                                                     DecryptionSite site) {
  const uint32_t gate = BeginGate();
  const size_t n = values.size();
  const uint32_t tau = threshold();
  // partials[p - 1][k]: party p's partial decryption of values[k].
  std::vector<std::vector<Ciphertext>> partials(tau);
  if (self() <= tau) {
    std::vector<Ciphertext> mine;
    mine.reserve(n);
    for (const auto& c : values) {
      mine.push_back(Ciphertext{paillier::PartialDecrypt(pk_, share_, c).value});
    }
    BroadcastValues(gate, 1, mine);
    partials[self() - 1] = std::move(mine);
  }
  for (PartyIndex p = 1; p <= tau; ++p) {
    if (p == self()) continue;
    partials[p - 1] = ReceiveCount(*this, p, gate, 1, n);
  }

  std::vector<mpz_class> out;
  out.reserve(n);
  std::vector<paillier::PartialDecryption> set(tau);
  for (size_t k = 0; k < n; ++k) {
    for (PartyIndex p = 1; p <= tau; ++p) {
      set[p - 1] = paillier::PartialDecryption{p, partials[p - 1][k].value};
    }
    out.push_back(paillier::Combine(pk_, values[k], set));
  }
  stats_.decrypted_values += n;
  if (observer_ != nullptr) observer_->OnThresholdDecryption(site, n);
  return out;
}

std::vector<Ciphertext> GateContext::SharedRerandomize(std::span<const Ciphertext> values) {
  const uint32_t gate = BeginGate();
  if (self() == 1) {
    std::vector<Ciphertext> out;
    out.reserve(values.size());
    for (const auto& c : values) out.push_back(paillier::Rerandomize(pk_, c, rng_));
    BroadcastValues(gate, 1, out);
    return out;
  }
  return ReceiveCount(*this, 1, gate, 1, values.size());
}

// ---------------------------------------------------------------------------
// Multiplication

std::vector<Ciphertext> MultMany(GateContext& ctx, std::span<const Ciphertext> xs,
                                 std::span<const Ciphertext> ys) {
  const size_t n = CheckedCount(xs.size(), ys.size(), "mult");
  if (n == 0) return {};
  const PublicKey& pk = ctx.pk();
  const uint32_t parties = ctx.parties();
  const uint32_t gate = ctx.BeginGate();

  // Round 1: [[r_i]] and [[r_i * y]] for every element.
  std::vector<Ciphertext> mine;
  mine.reserve(2 * n);
  for (size_t k = 0; k < n; ++k) {
    const mpz_class r = ctx.rng().UniformBelow(pk.n());
    mine.push_back(paillier::Encrypt(pk, r, ctx.rng()));
    mine.push_back(paillier::Rerandomize(pk, ScalarMul(pk, ys[k], r), ctx.rng()));
  }
  ctx.BroadcastValues(gate, 1, mine);

  std::vector<std::vector<Ciphertext>> shares(parties);
  for (PartyIndex p = 1; p <= parties; ++p) {
    if (p == ctx.self()) {
      shares[p - 1] = std::move(mine);
    } else {
      shares[p - 1] = ReceiveCount(ctx, p, gate, 1, 2 * n);
    }
  }

  // Every party now holds identical [[x + sum r_i]] and [[sum r_i y]].
  std::vector<Ciphertext> masked(n);
  std::vector<Ciphertext> ry(n);
  for (size_t k = 0; k < n; ++k) {
    Ciphertext m = xs[k];
    Ciphertext s = shares[0][2 * k + 1];
    for (PartyIndex p = 1; p <= parties; ++p) {
      m = Add(pk, m, shares[p - 1][2 * k]);
      if (p > 1) s = Add(pk, s, shares[p - 1][2 * k + 1]);
    }
    masked[k] = std::move(m);
    ry[k] = std::move(s);
  }

  const auto e = ctx.ThresholdDecrypt(masked, DecryptionSite::kMultMask);
  std::vector<Ciphertext> out;
  out.reserve(n);
  for (size_t k = 0; k < n; ++k) {
    out.push_back(Sub(pk, ScalarMul(pk, ys[k], e[k]), ry[k]));
  }
  ctx.stats().mult += n;
  return out;
}

Ciphertext Mult(GateContext& ctx, const Ciphertext& x, const Ciphertext& y) {
  return MultMany(ctx, std::span(&x, 1), std::span(&y, 1)).front();
}

std::vector<Ciphertext> UfiMultMany(GateContext& ctx,
                                    const std::vector<std::vector<Ciphertext>>& lists) {
  std::vector<std::vector<Ciphertext>> work = lists;
  std::vector<size_t> singletons;
  for (size_t i = 0; i < work.size(); ++i) {
    if (work[i].empty()) throw InputError("ufi_mult of an empty list");
    if (work[i].size() == 1) singletons.push_back(i);
  }
  ctx.stats().ufi_mult += work.size();

  // One batched round of Mult per tree level, pairing adjacent elements.
  for (;;) {
    std::vector<Ciphertext> xs;
    std::vector<Ciphertext> ys;
    for (const auto& list : work) {
      for (size_t k = 0; k + 1 < list.size(); k += 2) {
        xs.push_back(list[k]);
        ys.push_back(list[k + 1]);
      }
    }
    if (xs.empty()) break;
    const auto products = MultMany(ctx, xs, ys);
    size_t next = 0;
    for (auto& list : work) {
      std::vector<Ciphertext> level;
      level.reserve((list.size() + 1) / 2);
      for (size_t k = 0; k + 1 < list.size(); k += 2) level.push_back(products[next++]);
      if (list.size() % 2 == 1) level.push_back(std::move(list.back()));
      list = std::move(level);
    }
  }

  std::vector<Ciphertext> out;
  out.reserve(work.size());
  for (auto& list : work) out.push_back(std::move(list.front()));
  if (!singletons.empty()) {
    std::vector<Ciphertext> single;
    for (size_t i : singletons) single.push_back(out[i]);
    auto fresh = ctx.SharedRerandomize(single);
    for (size_t k = 0; k < singletons.size(); ++k) out[singletons[k]] = std::move(fresh[k]);
  }
  return out;
}

Ciphertext UfiMult(GateContext& ctx, std::span<const Ciphertext> xs) {
  if (xs.empty()) throw InputError("ufi_mult of an empty list");
  std::vector<std::vector<Ciphertext>> lists(1, std::vector<Ciphertext>(xs.begin(), xs.end()));
  return UfiMultMany(ctx, lists).front();
}

// ---------------------------------------------------------------------------
// Less-than

const LtPolynomial& LessThanPolynomial(uint64_t bound) {
  if (bound == 0) throw InputError("less_than domain bound must be positive");
  static std::mutex mu;
  static std::map<uint64_t, LtPolynomial> cache;
  std::lock_guard lock(mu);
  auto it = cache.find(bound);
  if (it == cache.end()) it = cache.emplace(bound, BuildLessThanPolynomial(bound)).first;
  return it->second;
}

uint64_t LessThanMultCount(uint64_t bound) {
  if (bound == 0) throw InputError("less_than domain bound must be positive");
  const uint64_t degree = 2 * bound - 2;
  if (degree == 0) return 0;
  const uint64_t k = BabyStepCount(degree);
  return (k - 1) + degree / k;
}

EncryptedBit LessThan(GateContext& ctx, const Ciphertext& x, const Ciphertext& y, uint64_t bound) {
  const PublicKey& pk = ctx.pk();
  if (bound == 0) throw InputError("less_than domain bound must be positive");
  if (mpz_class(2) * mpz_class(static_cast<unsigned long>(bound)) >= pk.n()) {
    throw InputError("less_than domain bound must satisfy 2M < N");
  }
  const LtPolynomial& poly = LessThanPolynomial(bound);
  ++ctx.stats().less_than;

  // z = y - x + M lies in [1, 2M - 1].
  const Ciphertext z =
      Add(pk, Sub(pk, y, x), EncryptPublic(pk, mpz_class(static_cast<unsigned long>(bound))));
  const uint64_t degree = poly.coefficients.size() - 1;
  const auto& c = poly.coefficients;

  Ciphertext acc;
  if (degree == 0) {
    acc = EncryptPublic(pk, c[0]);
  } else {
    const uint64_t k = BabyStepCount(degree);
    // powers[i] = [[z^i]] for i in [1, k].
    std::vector<Ciphertext> powers(k + 1);
    powers[1] = z;
    uint64_t have = 1;
    while (have < k) {
      std::vector<Ciphertext> xs;
      std::vector<Ciphertext> ys;
      const uint64_t upto = std::min<uint64_t>(2 * have, k);
      for (uint64_t i = have + 1; i <= upto; ++i) {
        xs.push_back(powers[have]);
        ys.push_back(powers[i - have]);
      }
      auto prods = MultMany(ctx, xs, ys);
      for (uint64_t i = have + 1; i <= upto; ++i) powers[i] = std::move(prods[i - have - 1]);
      have = upto;
    }

    auto block = [&](uint64_t t) {
      const uint64_t lo = t * k;
      const uint64_t hi = std::min<uint64_t>(lo + k - 1, degree);
      Ciphertext sum = EncryptPublic(pk, c[lo]);
      for (uint64_t i = lo + 1; i <= hi; ++i) {
        if (c[i] == 0) continue;
        sum = Add(pk, sum, ScalarMul(pk, powers[i - lo], c[i]));
      }
      return sum;
    };

    const uint64_t top = degree / k;
    acc = block(top);
    for (uint64_t t = top; t-- > 0;) {
      acc = Add(pk, Mult(ctx, acc, powers[k]), block(t));
    }
  }

  mpz_class inv;
  if (mpz_invert(inv.get_mpz_t(), poly.scale.get_mpz_t(), pk.n().get_mpz_t()) == 0) {
    throw InvariantError("less_than scale not invertible modulo N");
  }
  return EncryptedBit{ScalarMul(pk, acc, inv)};
}

// ---------------------------------------------------------------------------
// Conditional random selection

std::optional<Selection> CrsC(GateContext& ctx, std::span<const Ciphertext> u,
                              std::span<const Ciphertext> v, uint64_t bound) {
  const size_t n = CheckedCount(u.size(), v.size(), "crs_c");
  if (n == 0) throw InputError("crs_c needs at least one element");
  const PublicKey& pk = ctx.pk();
  ++ctx.stats().crs_c;

  // Joint shuffle: party 1, 2, ... each permute and rerandomize in turn.
  std::vector<Ciphertext> us(u.begin(), u.end());
  std::vector<Ciphertext> vs(v.begin(), v.end());
  for (PartyIndex p = 1; p <= ctx.parties(); ++p) {
    const uint32_t gate = ctx.BeginGate();
    if (p == ctx.self()) {
      for (size_t i = n; i > 1; --i) {
        const size_t j = ctx.rng().Uniform(i);
        std::swap(us[i - 1], us[j]);
        std::swap(vs[i - 1], vs[j]);
      }
      std::vector<Ciphertext> msg;
      msg.reserve(2 * n);
      for (size_t i = 0; i < n; ++i) {
        us[i] = paillier::Rerandomize(pk, us[i], ctx.rng());
        vs[i] = paillier::Rerandomize(pk, vs[i], ctx.rng());
        msg.push_back(us[i]);
        msg.push_back(vs[i]);
      }
      ctx.BroadcastValues(gate, 1, msg);
    } else {
      auto msg = ReceiveCount(ctx, p, gate, 1, 2 * n);
      for (size_t i = 0; i < n; ++i) {
        us[i] = std::move(msg[2 * i]);
        vs[i] = std::move(msg[2 * i + 1]);
      }
    }
  }

  // Linear tournament; ties keep the current champion.
  Ciphertext cu = us[0];
  Ciphertext cv = vs[0];
  for (size_t l = 1; l < n; ++l) {
    const EncryptedBit b = LessThan(ctx, cu, us[l], bound);
    const Ciphertext du = Sub(pk, us[l], cu);
    const Ciphertext dv = Sub(pk, vs[l], cv);
    const Ciphertext bs[2] = {b.c, b.c};
    const Ciphertext ds[2] = {du, dv};
    const auto prods = MultMany(ctx, bs, ds);
    cu = Add(pk, cu, prods[0]);
    cv = Add(pk, cv, prods[1]);
  }

  const EncryptedBit nonempty = LessThan(ctx, EncryptPublic(pk, 0), cu, bound);
  const auto bit = ctx.ThresholdDecrypt(std::span(&nonempty.c, 1), DecryptionSite::kCrsEmptiness);
  if (bit.front() == 0) return std::nullopt;
  if (bit.front() != 1) {
    throw ProtocolAbort("crs_c emptiness bit decrypted to a non-bit value");
  }
  const Ciphertext pair[2] = {cu, cv};
  auto fresh = ctx.SharedRerandomize(pair);
  return Selection{std::move(fresh[0]), std::move(fresh[1])};
}

// ---------------------------------------------------------------------------
// Compatibility

CompSums CompInputSharing(GateContext& ctx, PartyIndex donor_party, PartyIndex patient_party,
                          const medical::DonorInput* my_donor,
                          const medical::PatientInput* my_patient, size_t antigen_count) {
  const PublicKey& pk = ctx.pk();
  const PartyIndex self = ctx.self();
  if (donor_party == patient_party || donor_party < 1 || patient_party < 1 ||
      donor_party > ctx.parties() || patient_party > ctx.parties()) {
    throw InputError("comp needs two distinct parties in [1, iota]");
  }
  const size_t blood = medical::kBloodTypeCount;
  if (self == donor_party) {
    if (my_donor == nullptr) throw InputError("donor party must supply donor vectors");
    if (my_donor->blood.size() != blood || my_donor->antigens.size() != antigen_count) {
      throw InputError("donor vectors have the wrong length");
    }
  }
  if (self == patient_party) {
    if (my_patient == nullptr) throw InputError("patient party must supply patient vectors");
    if (my_patient->blood.size() != blood || my_patient->antibodies.size() != antigen_count) {
      throw InputError("patient vectors have the wrong length");
    }
  }
  const uint32_t gate = ctx.BeginGate();

  // Round 1: donor -> patient, [[B_D]] then [[A_D]].
  if (self == donor_party) {
    std::vector<Ciphertext> enc;
    enc.reserve(blood + antigen_count);
    for (uint8_t bit : my_donor->blood) enc.push_back(paillier::Encrypt(pk, bit, ctx.rng()));
    for (uint8_t bit : my_donor->antigens) enc.push_back(paillier::Encrypt(pk, bit, ctx.rng()));
    ctx.SendValues(patient_party, gate, 1, enc);
  }

  // Round 2: the patient party accumulates both sums and broadcasts them.
  if (self == patient_party) {
    const auto enc = ReceiveCount(ctx, donor_party, gate, 1, blood + antigen_count);
    Ciphertext sum_b = paillier::Encrypt(pk, 0, ctx.rng());
    Ciphertext sum_a = paillier::Encrypt(pk, 0, ctx.rng());
    for (size_t k = 0; k < blood; ++k) {
      if (my_patient->blood[k]) sum_b = Add(pk, sum_b, enc[k]);
    }
    for (size_t k = 0; k < antigen_count; ++k) {
      if (my_patient->antibodies[k]) sum_a = Add(pk, sum_a, enc[blood + k]);
    }
    const Ciphertext sums[2] = {sum_b, sum_a};
    ctx.BroadcastValues(gate, 2, sums);
    return CompSums{sum_b, sum_a};
  }
  auto sums = ReceiveCount(ctx, patient_party, gate, 2, 2);
  return CompSums{std::move(sums[0]), std::move(sums[1])};
}

EncryptedBit Comp(GateContext& ctx, PartyIndex donor_party, PartyIndex patient_party,
                  const medical::DonorInput* my_donor, const medical::PatientInput* my_patient,
                  size_t antigen_count) {
  const PublicKey& pk = ctx.pk();
  const CompSums sums =
      CompInputSharing(ctx, donor_party, patient_party, my_donor, my_patient, antigen_count);
  // o_B = [0 < sum_B], sum_B <= 4; o_A = [sum_A < 1], sum_A <= L_A.
  const EncryptedBit ob = LessThan(ctx, EncryptPublic(pk, 0), sums.blood, medical::kBloodTypeCount + 1);
  const EncryptedBit oa = LessThan(ctx, sums.antigens, EncryptPublic(pk, 1), antigen_count + 1);
  ++ctx.stats().comp;
  return EncryptedBit{Mult(ctx, ob.c, oa.c)};
}

}  // namespace kep::gates
