#pragma once
// SPDX-License-Identifier: Apache-2.0
//
// Pseudo-bulk protocol harness. A protocol run wires party-local encoders and
// decoders around a quartered ring dynamics: Alice feeds register A into the
// west half, Bob feeds B into the east half, the ring evolves, and the north
// and south halves are decoded into output registers. Every operation is
// logged in a Transcript with exactly one exchange event, and an independent
// audit walks the event list to reject any touch outside the active party's
// half.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "nlqc/channel.hpp"
#include "nlqc/decompose.hpp"
#include "nlqc/dense.hpp"
#include "nlqc/model.hpp"
#include "nlqc/ring.hpp"

namespace nlqc {

// A channel together with the ring sites it is declared to touch. Encoder
// channels map [register (x) sites] -> [sites]; decoder channels map
// [sites] -> [output register]. The register is the most significant factor.
struct PartyMap {
  KrausChannel channel;
  std::vector<int> sites;  // ascending, distinct
};

struct PseudoBulkSpec {
  Ring ring{4};
  ModelSpec model;
  StateVector resource;            // |psi> on the ring
  PartyMap encoder_a, encoder_b;   // A x S_W -> S_W, B x S_E -> S_E
  PartyMap decoder_n, decoder_s;   // S_N -> A~, S_S -> B~
  std::int64_t dim_a = 2, dim_b = 2;
  double time = 0.0;               // protocol clock tau, light speed 1 rad/unit
};

namespace detail {

inline std::int64_t sel_dim(const Ring& ring, const std::vector<int>& sites) {
  std::int64_t d = 1;
  for (size_t i = 0; i < sites.size(); ++i) d *= ring.local_dim;
  return d;
}

inline void check_party_sites(const Ring& ring, const std::vector<int>& sites, Half h,
                              const char* who) {
  for (size_t i = 0; i < sites.size(); ++i) {
    int s = sites[i];
    require(s >= 0 && s < ring.n_sites, who, " site ", s, " out of range");
    require(i == 0 || sites[i - 1] < s, who, " sites must be ascending and distinct");
    require(in_half(ring, s, h), who, " site ", s, " lies outside the ", half_name(h), " half");
  }
}

// Extract the mixed-radix sub-index held by `sites` (ascending) inside `idx`.
inline std::int64_t extract_digits(std::int64_t idx, const std::vector<int>& sites,
                                   const std::vector<std::int64_t>& strides, int d) {
  std::int64_t sub = 0;
  for (int s : sites) sub = sub * d + (idx / strides[size_t(s)]) % d;
  return sub;
}

// Overwrite the digits of `sites` inside `idx` with those of `sub`.
inline std::int64_t replace_digits(std::int64_t idx, const std::vector<int>& sites,
                                   const std::vector<std::int64_t>& strides, int d,
                                   std::int64_t sub) {
  for (auto it = sites.rbegin(); it != sites.rend(); ++it) {
    std::int64_t digit = sub % d;
    sub /= d;
    std::int64_t cur = (idx / strides[size_t(*it)]) % d;
    idx += (digit - cur) * strides[size_t(*it)];
  }
  return idx;
}

}  // namespace detail

inline void validate_pseudo_bulk(const PseudoBulkSpec& spec) {
  const Ring& ring = spec.ring;
  require(ring.n_sites % 4 == 0, "pseudo-bulk ring size must be divisible by 4");
  validate_model(spec.model, ring);
  require(spec.resource.dims == ring.dims(), "resource state does not live on the ring");
  require(std::abs(spec.resource.norm() - 1.0) <= 1e-8, "resource state is not normalized");
  require(spec.dim_a >= 1 && spec.dim_b >= 1, "input register dimensions must be positive");
  require(spec.time >= 0.0, "protocol time must be non-negative");

  detail::check_party_sites(ring, spec.encoder_a.sites, Half::W, "encoder A");
  detail::check_party_sites(ring, spec.encoder_b.sites, Half::E, "encoder B");
  detail::check_party_sites(ring, spec.decoder_n.sites, Half::N, "decoder N");
  detail::check_party_sites(ring, spec.decoder_s.sites, Half::S, "decoder S");

  std::int64_t da_sel = detail::sel_dim(ring, spec.encoder_a.sites);
  std::int64_t db_sel = detail::sel_dim(ring, spec.encoder_b.sites);
  require(spec.encoder_a.channel.dim_in == spec.dim_a * da_sel &&
              spec.encoder_a.channel.dim_out == da_sel,
          "encoder A channel dimensions do not match |A| and its declared sites");
  require(spec.encoder_b.channel.dim_in == spec.dim_b * db_sel &&
              spec.encoder_b.channel.dim_out == db_sel,
          "encoder B channel dimensions do not match |B| and its declared sites");
  require(spec.decoder_n.channel.dim_in == detail::sel_dim(ring, spec.decoder_n.sites),
          "decoder N channel input does not match its declared sites");
  require(spec.decoder_s.channel.dim_in == detail::sel_dim(ring, spec.decoder_s.sites),
          "decoder S channel input does not match its declared sites");
  require(spec.decoder_n.channel.dim_out >= 1 && spec.decoder_s.channel.dim_out >= 1,
          "decoder output registers must be non-trivial");
}

inline ModelSpec model_at_time(const ModelSpec& spec, double t) {
  if (const auto* h = std::get_if<LocalHamiltonian>(&spec)) return at_time(*h, t);
  return spec;  // circuit models carry no clock; tau is bookkeeping only
}

// The full pseudo-bulk map D_N (x) D_S [ U (N_A (x) N_B)(rho_AB (x) psi) U+ ]
// as a channel from the input registers [A (x) B] to the outputs [A~ (x) B~].
// Unread ring sites are traced out after the dynamics.
inline KrausChannel pseudo_bulk_channel(const PseudoBulkSpec& spec) {
  validate_pseudo_bulk(spec);
  const Ring& ring = spec.ring;
  int n = ring.n_sites;
  int d = ring.local_dim;
  require(n <= 10, "pseudo-bulk dense path capped at 10 ring sites");
  std::int64_t dring = checked_product(ring.dims());
  auto strides = strides_of(ring.dims());

  std::int64_t da = spec.dim_a, db = spec.dim_b;
  std::int64_t dao = spec.decoder_n.channel.dim_out, dbo = spec.decoder_s.channel.dim_out;
  std::int64_t da_sel = detail::sel_dim(ring, spec.encoder_a.sites);
  std::int64_t db_sel = detail::sel_dim(ring, spec.encoder_b.sites);

  Mat u = evolve_model(model_at_time(spec.model, spec.time), ring).entries;

  std::vector<int> read;
  std::set_union(spec.decoder_n.sites.begin(), spec.decoder_n.sites.end(),
                 spec.decoder_s.sites.begin(), spec.decoder_s.sites.end(),
                 std::back_inserter(read));
  std::vector<int> rest;
  for (int s = 0; s < n; ++s)
    if (!std::binary_search(read.begin(), read.end(), s)) rest.push_back(s);
  std::int64_t drest = detail::sel_dim(ring, rest);

  std::vector<Mat> total;
  for (const Mat& ka : spec.encoder_a.channel.kraus)
    for (const Mat& kb : spec.encoder_b.channel.kraus) {
      // stage 1+state: [A,B] -> ring, resource already absorbed
      Mat a1 = Mat::Zero(dring, da * db);
      for (std::int64_t s = 0; s < dring; ++s) {
        cx amp = spec.resource.amps(s);
        if (amp == cx(0, 0)) continue;
        std::int64_t sub_a = detail::extract_digits(s, spec.encoder_a.sites, strides, d);
        std::int64_t sub_b = detail::extract_digits(s, spec.encoder_b.sites, strides, d);
        for (std::int64_t a = 0; a < da; ++a)
          for (std::int64_t b = 0; b < db; ++b)
            for (std::int64_t ao = 0; ao < da_sel; ++ao) {
              cx va = ka(ao, a * da_sel + sub_a) * amp;
              if (va == cx(0, 0)) continue;
              std::int64_t mid = detail::replace_digits(s, spec.encoder_a.sites, strides, d, ao);
              for (std::int64_t bo = 0; bo < db_sel; ++bo) {
                cx v = va * kb(bo, b * db_sel + sub_b);
                if (v == cx(0, 0)) continue;
                std::int64_t row = detail::replace_digits(mid, spec.encoder_b.sites, strides, d, bo);
                a1(row, a * db + b) += v;
              }
            }
      }
      Mat a2 = u * a1;
      // stage 3: decoders on the read sites, trace over the rest
      size_t kn_count = spec.decoder_n.channel.kraus.size();
      size_t ks_count = spec.decoder_s.channel.kraus.size();
      std::vector<Mat> ts(kn_count * ks_count * size_t(drest),
                          Mat::Zero(dao * dbo, da * db));
      for (std::int64_t s = 0; s < dring; ++s) {
        bool live = false;
        for (std::int64_t c = 0; c < da * db && !live; ++c) live = a2(s, c) != cx(0, 0);
        if (!live) continue;
        std::int64_t m = detail::extract_digits(s, rest, strides, d);
        std::int64_t sub_n = detail::extract_digits(s, spec.decoder_n.sites, strides, d);
        std::int64_t sub_s = detail::extract_digits(s, spec.decoder_s.sites, strides, d);
        for (size_t kn = 0; kn < kn_count; ++kn)
          for (size_t ks = 0; ks < ks_count; ++ks) {
            Mat& t = ts[(kn * ks_count + ks) * size_t(drest) + size_t(m)];
            for (std::int64_t ao = 0; ao < dao; ++ao) {
              cx vn = spec.decoder_n.channel.kraus[kn](ao, sub_n);
              if (vn == cx(0, 0)) continue;
              for (std::int64_t bo = 0; bo < dbo; ++bo) {
                cx v = vn * spec.decoder_s.channel.kraus[ks](bo, sub_s);
                if (v == cx(0, 0)) continue;
                for (std::int64_t c = 0; c < da * db; ++c) t(ao * dbo + bo, c) += v * a2(s, c);
              }
            }
          }
      }
      for (Mat& t : ts) total.push_back(std::move(t));
    }
  return KrausChannel(da * db, dao * dbo, std::move(total));
}

inline Mat pseudo_bulk_dynamics(const PseudoBulkSpec& spec, const Mat& rho_ab) {
  KrausChannel ch = pseudo_bulk_channel(spec);
  Mat out = apply_channel(ch, rho_ab);
  double tr_in = std::abs(rho_ab.trace());
  require(std::abs(out.trace() - rho_ab.trace()) <= tol_output * std::max(1.0, tr_in),
          "pseudo-bulk dynamics did not preserve the trace (drift ",
          std::abs(out.trace() - rho_ab.trace()), ")");
  return out;
}

// --- stock encoders and decoders --------------------------------------------

// Swap the input register into one ring site; the displaced site content is
// discarded with the register.
inline PartyMap swap_in_encoder(const Ring& ring, int site) {
  int d = ring.local_dim;
  std::vector<Mat> ks;
  for (int a = 0; a < d; ++a) {
    Mat k = Mat::Zero(d, d * d);
    for (int x = 0; x < d; ++x) k(x, x * d + a) = 1.0;
    ks.push_back(std::move(k));
  }
  return {KrausChannel(d * d, d, std::move(ks)), {site}};
}

// Read one ring site wholesale into the output register.
inline PartyMap swap_out_decoder(const Ring& ring, int site) {
  return {identity_channel(ring.local_dim), {site}};
}

// Trace the declared site and emit a fixed basis state.
inline PartyMap trace_replace_decoder(const Ring& ring, int site, int fixed = 0) {
  int d = ring.local_dim;
  require(fixed >= 0 && fixed < d, "replacement basis index out of range");
  std::vector<Mat> ks;
  for (int m = 0; m < d; ++m) {
    Mat k = Mat::Zero(d, d);
    k(fixed, m) = 1.0;
    ks.push_back(std::move(k));
  }
  return {KrausChannel(d, d, std::move(ks)), {site}};
}

// --- transcript and audit ----------------------------------------------------

struct TranscriptEvent {
  std::string party;                   // "Alice", "Bob", or "both"
  std::string op;                      // short descriptor
  std::vector<int> sites;              // lattice sites touched; copies are n..2n-1
  std::vector<std::string> registers;  // side registers touched
  bool is_exchange = false;
};

struct Transcript {
  int n_sites = 0;
  std::vector<TranscriptEvent> events;
};

namespace detail {

inline void check_transcript_prefix(const Transcript& t, const Ring& ring, bool complete) {
  int exchanges = 0;
  for (size_t k = 0; k < t.events.size(); ++k) {
    const TranscriptEvent& ev = t.events[k];
    if (ev.is_exchange) {
      require(ev.party == "both", "exchange event ", k, " must involve both parties");
      ++exchanges;
      require(exchanges == 1, "locality violation at event ", k, " (", ev.party, ": ", ev.op,
              "): a second exchange is not allowed");
      continue;
    }
    bool pre = exchanges == 0;
    Half allowed;
    std::string reg_ok;
    if (ev.party == "Alice") {
      allowed = pre ? Half::W : Half::N;
      reg_ok = pre ? "A" : "A~";
    } else if (ev.party == "Bob") {
      allowed = pre ? Half::E : Half::S;
      reg_ok = pre ? "B" : "B~";
    } else {
      throw error(str("unknown party '", ev.party, "' at event ", k));
    }
    for (int s : ev.sites) {
      require(s >= 0 && s < 2 * t.n_sites, "event ", k, " touches site ", s, " out of range");
      int base = s >= t.n_sites ? s - t.n_sites : s;
      require(in_half(ring, base, allowed), "locality violation at event ", k, " (", ev.party,
              ": ", ev.op, "): site ", s, " lies outside the ", half_name(allowed), " half ",
              pre ? "before" : "after", " the exchange");
    }
    for (const std::string& r : ev.registers)
      require(r == reg_ok, "locality violation at event ", k, " (", ev.party, ": ", ev.op,
              "): register ", r, " is not accessible ", pre ? "before" : "after",
              " the exchange");
  }
  if (complete) require(exchanges == 1, "transcript must contain exactly one exchange event");
}

}  // namespace detail

// Independent post-hoc checker: walks the event list and rejects any touch
// outside the active party's half, plus exchange-count violations.
inline void audit_transcript(const Transcript& t, const Ring& ring) {
  require(t.n_sites == ring.n_sites, "transcript ring size mismatch");
  detail::check_transcript_prefix(t, ring, true);
}

// --- protocol execution ------------------------------------------------------

enum class ProtocolFault { none, early_north, cross_half_encoder, message_reuse };

inline const char* fault_name(ProtocolFault f) {
  switch (f) {
    case ProtocolFault::none: return "none";
    case ProtocolFault::early_north: return "early_north";
    case ProtocolFault::cross_half_encoder: return "cross_half_encoder";
    case ProtocolFault::message_reuse: return "message_reuse";
  }
  return "?";
}

struct NlqcRun {
  Mat output;  // density matrix on [A~ (x) B~]
  Transcript transcript;
};

namespace detail {

// Apply a rectangular encoder Kraus operator that consumes factor 0 (the
// party register) and rewrites the listed ring factors.
inline StateVector consume_register(const StateVector& psi, const Mat& k,
                                    const std::vector<int>& factors) {
  std::int64_t dreg = psi.dims[0];
  std::int64_t dsel = 1;
  for (int f : factors) {
    require(f >= 1 && f < psi.n_factors(), "encoder factor out of range");
    dsel *= psi.dims[size_t(f)];
  }
  require(k.cols() == dreg * dsel && k.rows() == dsel, "encoder Kraus shape mismatch");

  std::vector<int> out_dims(psi.dims.begin() + 1, psi.dims.end());
  auto in_strides = strides_of(psi.dims);
  auto out_strides = strides_of(out_dims);
  Vec out = Vec::Zero(checked_product(out_dims));
  std::vector<std::int64_t> sel_strides;
  for (int f : factors) sel_strides.push_back(in_strides[size_t(f)]);

  for (std::int64_t idx = 0; idx < psi.dim(); ++idx) {
    cx v = psi.amps(idx);
    if (v == cx(0, 0)) continue;
    std::int64_t reg = idx / in_strides[0];
    std::int64_t sub = 0;
    for (size_t j = 0; j < factors.size(); ++j)
      sub = sub * psi.dims[size_t(factors[j])] + (idx / sel_strides[j]) % psi.dims[size_t(factors[j])];
    // base output index: drop the register, zero the selected digits
    std::int64_t base = idx - reg * in_strides[0];
    for (size_t j = 0; j < factors.size(); ++j)
      base -= ((idx / sel_strides[j]) % psi.dims[size_t(factors[j])]) * sel_strides[j];
    for (std::int64_t so = 0; so < dsel; ++so) {
      cx w = k(so, reg * dsel + sub) * v;
      if (w == cx(0, 0)) continue;
      std::int64_t o = base, rem = so;
      for (size_t j = factors.size(); j-- > 0;) {
        o += (rem % psi.dims[size_t(factors[j])]) * sel_strides[j];
        rem /= psi.dims[size_t(factors[j])];
      }
      out(o) += w;
    }
  }
  return StateVector(std::move(out_dims), std::move(out));
}

inline const DecompositionPiece& piece_by_name(const QuarterDecomposition& dec,
                                               const std::string& name) {
  const DecompositionPiece* found = nullptr;
  for (const auto& p : dec.pieces)
    if (p.name == name) {
      require(found == nullptr, "duplicate decomposition piece ", name);
      found = &p;
    }
  require(found != nullptr, "decomposition is missing piece ", name);
  return *found;
}

}  // namespace detail

// Execute the protocol with a quartered decomposition standing in for the
// dynamics: encode, apply U_E and U_W, exchange quarters wholesale, apply U_S
// and U_N, discard the auxiliary copy and unread sites, then decode. Events
// are checked as they are emitted; the optional fault injection deliberately
// breaks locality so the rejection path can be exercised.
inline NlqcRun run_nlqc(const PseudoBulkSpec& spec, const QuarterDecomposition& dec,
                        const Mat& rho_ab, ProtocolFault fault = ProtocolFault::none) {
  validate_pseudo_bulk(spec);
  const Ring& ring = spec.ring;
  int n = ring.n_sites;
  require(dec.n_sites == n && dec.local_dim == ring.local_dim,
          "decomposition geometry does not match the ring");
  std::int64_t da = spec.dim_a, db = spec.dim_b;
  require(rho_ab.rows() == da * db && rho_ab.cols() == da * db,
          "input state dimension does not match |A| x |B|");
  require(std::abs(rho_ab.trace()) > 1e-9, "input state has vanishing trace");

  const DecompositionPiece& uw = detail::piece_by_name(dec, "U_W");
  const DecompositionPiece& ue = detail::piece_by_name(dec, "U_E");
  const DecompositionPiece& un = detail::piece_by_name(dec, "U_N");
  const DecompositionPiece& us = detail::piece_by_name(dec, "U_S");

  Transcript t;
  t.n_sites = n;
  auto emit = [&](TranscriptEvent ev) {
    t.events.push_back(std::move(ev));
    detail::check_transcript_prefix(t, ring, false);
  };

  // spectral decomposition of the input; pure components run as state vectors
  Mat herm = 0.5 * (rho_ab + rho_ab.adjoint());
  require((herm - rho_ab).cwiseAbs().maxCoeff() <= 1e-9, "input state must be Hermitian");
  Eigen::SelfAdjointEigenSolver<Mat> es(herm);
  for (int i = 0; i < es.eigenvalues().size(); ++i)
    require(es.eigenvalues()(i) >= -1e-9, "input state must be positive semidefinite");

  std::vector<int> read;
  std::set_union(spec.decoder_n.sites.begin(), spec.decoder_n.sites.end(),
                 spec.decoder_s.sites.begin(), spec.decoder_s.sites.end(),
                 std::back_inserter(read));
  std::int64_t dread = detail::sel_dim(ring, read);
  Mat rho_read = Mat::Zero(dread, dread);

  std::vector<int> alice_enc_sites = spec.encoder_a.sites;
  if (fault == ProtocolFault::cross_half_encoder)
    for (int& s : alice_enc_sites) s = (s + n / 2) % n;

  bool transcript_done = false;
  for (int comp = 0; comp < es.eigenvalues().size(); ++comp) {
    double lam = es.eigenvalues()(comp);
    if (lam <= 1e-12) continue;
    Vec phi = std::sqrt(lam) * es.eigenvectors().col(comp);

    std::vector<int> dims{int(da), int(db)};
    for (int dd : dec.system_dims()) dims.push_back(dd);
    Vec amps = Vec::Zero(checked_product(dims));
    std::int64_t dsys = checked_product(dec.system_dims());
    std::int64_t dring = checked_product(ring.dims());
    std::int64_t daux = dsys / dring;  // primed copy block, |0...0>
    for (std::int64_t ab = 0; ab < da * db; ++ab) {
      if (phi(ab) == cx(0, 0)) continue;
      for (std::int64_t s = 0; s < dring; ++s)
        amps(ab * dsys + s * daux) = phi(ab) * spec.resource.amps(s);
    }

    std::vector<StateVector> branches;
    branches.emplace_back(dims, std::move(amps));

    auto run_events = !transcript_done;
    auto step = [&](TranscriptEvent ev) {
      if (run_events) emit(std::move(ev));
    };

    // Alice encodes A into her west sites, Bob encodes B into his east sites.
    step({"Alice", "encode A", alice_enc_sites, {"A"}, false});
    {
      std::vector<int> factors;
      for (int s : alice_enc_sites) factors.push_back(2 + s);
      std::vector<StateVector> next;
      for (const auto& br : branches)
        for (const Mat& k : spec.encoder_a.channel.kraus)
          next.push_back(detail::consume_register(br, k, factors));
      branches = std::move(next);
    }
    step({"Bob", "encode B", spec.encoder_b.sites, {"B"}, false});
    {
      std::vector<int> factors;
      for (int s : spec.encoder_b.sites) factors.push_back(1 + s);
      std::vector<StateVector> next;
      for (const auto& br : branches)
        for (const Mat& k : spec.encoder_b.channel.kraus)
          next.push_back(detail::consume_register(br, k, factors));
      branches = std::move(next);
    }

    if (fault == ProtocolFault::early_north) {
      step({"Alice", "apply U_N early", un.declared_support, {}, false});
      for (auto& br : branches) apply_to_state(br, un.op);
    }

    step({"Bob", "apply U_E", ue.declared_support, {}, false});
    for (auto& br : branches) apply_to_state(br, ue.op);
    step({"Alice", "apply U_W", uw.declared_support, {}, false});
    for (auto& br : branches) apply_to_state(br, uw.op);

    step({"both", "exchange quarters", {}, {}, true});

    step({"Bob", "apply U_S", us.declared_support, {}, false});
    for (auto& br : branches) apply_to_state(br, us.op);
    step({"Alice", "apply U_N", un.declared_support, {}, false});
    for (auto& br : branches) apply_to_state(br, un.op);

    if (fault == ProtocolFault::message_reuse) {
      int sw_site = -1;
      for (int s = 0; s < n; ++s)
        if (in_half(ring, s, Half::W) && in_half(ring, s, Half::S)) {
          sw_site = s;
          break;
        }
      step({"Alice", "reuse shipped quarter", {sw_site}, {}, false});
      Mat x = Mat::Zero(ring.local_dim, ring.local_dim);
      for (int i = 0; i < ring.local_dim; ++i) x((i + 1) % ring.local_dim, i) = 1.0;
      DenseOperator op({sw_site}, {ring.local_dim}, std::move(x));
      for (auto& br : branches) apply_to_state(br, op);
    }

    // The auxiliary copy and all unread sites are discarded before decoding.
    step({"Alice", "decode N", spec.decoder_n.sites, {"A~"}, false});
    step({"Bob", "decode S", spec.decoder_s.sites, {"B~"}, false});
    for (const auto& br : branches) rho_read += reduced_density(br, read).entries;
    transcript_done = true;
  }

  // Apply the two decoder channels on the read-site density matrix.
  auto read_sub = [&](std::int64_t idx, const std::vector<int>& sites) {
    std::int64_t sub = 0;
    for (int s : sites) {
      size_t pos = size_t(std::lower_bound(read.begin(), read.end(), s) - read.begin());
      std::int64_t stride = 1;
      for (size_t j = pos + 1; j < read.size(); ++j) stride *= ring.local_dim;
      sub = sub * ring.local_dim + (idx / stride) % ring.local_dim;
    }
    return sub;
  };
  std::int64_t dao = spec.decoder_n.channel.dim_out, dbo = spec.decoder_s.channel.dim_out;
  Mat out = Mat::Zero(dao * dbo, dao * dbo);
  for (const Mat& kn : spec.decoder_n.channel.kraus)
    for (const Mat& ks : spec.decoder_s.channel.kraus) {
      Mat k = Mat::Zero(dao * dbo, dread);
      for (std::int64_t idx = 0; idx < dread; ++idx) {
        std::int64_t sub_n = read_sub(idx, spec.decoder_n.sites);
        std::int64_t sub_s = read_sub(idx, spec.decoder_s.sites);
        for (std::int64_t ao = 0; ao < dao; ++ao)
          for (std::int64_t bo = 0; bo < dbo; ++bo)
            k(ao * dbo + bo, idx) = kn(ao, sub_n) * ks(bo, sub_s);
      }
      out += k * rho_read * k.adjoint();
    }

  double tr_in = std::abs(rho_ab.trace());
  require(std::abs(out.trace() - rho_ab.trace()) <= 1e-9 * std::max(1.0, tr_in),
          "protocol run did not preserve the trace");
  audit_transcript(t, ring);
  return {std::move(out), std::move(t)};
}

// --- time-rewind encoder -----------------------------------------------------

struct RewindEncoder {
  PartyMap map;        // truncated conjugated-swap channel on the site's half
  Half half = Half::W;
  double defect = 0.0;  // operator-norm error of the half-truncation
};

// Encoder U(t') SWAP_{A,site} U(t')+ truncated to the half containing `site`.
// The exact conjugated swap is twirled over the far half and re-unitarized by
// polar decomposition; the reported defect is the operator norm of the
// difference. Requires a light-cone certificate when t' > 0.
inline RewindEncoder time_rewind_encoder(const Ring& ring, const ModelSpec& model, double t_prime,
                                         int site, const LightConeFit* fit = nullptr) {
  int n = ring.n_sites;
  int d = ring.local_dim;
  require(site >= 0 && site < n, "rewind site out of range");
  require(t_prime >= 0.0, "rewind time must be non-negative");
  require(n <= 10, "time-rewind dense path capped at 10 ring sites");
  validate_model(model, ring);
  if (t_prime > 0.0) {
    require(fit != nullptr, "time rewind needs a light-cone certificate for t' > 0");
    require(fit->v * t_prime + ring.spacing() < pi / 2,
            "light-cone radius at t' plus one site must stay below 2*pi/4 (got ",
            fit->v * t_prime + ring.spacing(), ")");
  }

  Half half = in_half(ring, site, Half::W) ? Half::W : Half::E;
  std::vector<int> half_sites = half_region(ring, half).sites;

  // factor space [A, ring]: A is factor 0, ring site s is factor 1+s
  std::vector<int> dims(size_t(n) + 1, d);
  std::int64_t dfull = checked_product(dims);
  Mat u = evolve_model(model_at_time(model, t_prime), ring).entries;
  Mat ufull = Mat::Zero(dfull, dfull);
  std::int64_t dring = dfull / d;
  for (std::int64_t a = 0; a < d; ++a)
    ufull.block(a * dring, a * dring, dring, dring) = u;

  auto strides = strides_of(dims);
  Mat swap = Mat::Zero(dfull, dfull);
  for (std::int64_t idx = 0; idx < dfull; ++idx) {
    std::int64_t a = idx / strides[0];
    std::int64_t s = (idx / strides[size_t(1 + site)]) % d;
    std::int64_t swapped = idx + (s - a) * strides[0] + (a - s) * strides[size_t(1 + site)];
    swap(swapped, idx) = 1.0;
  }
  Mat k = ufull * swap * ufull.adjoint();

  std::vector<int> all(size_t(n) + 1);
  for (size_t i = 0; i < all.size(); ++i) all[i] = int(i);
  DenseOperator kop(all, dims, k);

  std::vector<int> declared{0};
  for (int s : half_sites) declared.push_back(1 + s);
  std::vector<int> outside;
  for (int s = 0; s < n; ++s)
    if (!in_half(ring, s, half)) outside.push_back(1 + s);

  DenseOperator tw = twirl(kop, outside);
  DenseOperator trunc = polar_unitary(restrict_to(tw, declared));
  Mat back = embed_matrix(trunc, all, dims);
  double defect = op_norm_estimate(back - k);

  // channel Kraus: feed the register in, trace it back out
  std::int64_t dsel = trunc.dim() / d;
  std::vector<Mat> ms;
  for (std::int64_t a = 0; a < d; ++a)
    ms.push_back(trunc.entries.block(a * dsel, 0, dsel, d * dsel));
  RewindEncoder enc;
  enc.map = PartyMap{KrausChannel(d * dsel, dsel, std::move(ms)), half_sites};
  enc.half = half;
  enc.defect = defect;
  return enc;
}

}  // namespace nlqc
