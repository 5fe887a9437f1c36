// SPDX-License-Identifier: Apache-2.0

#include "nlqc/protocol.hpp"

#include <catch2/catch_amalgamated.hpp>

#include "nlqc/spread.hpp"
#include "test_helpers.hpp"

using namespace nlqc;
using Catch::Matchers::ContainsSubstring;

namespace {

Mat random_density(int dim, std::uint64_t seed) {
  Rng rng(seed);
  Mat g = testutil::random_matrix(dim, rng);
  Mat rho = g * g.adjoint();
  rho /= rho.trace();
  return rho;
}

Mat pure_density(int dim, std::uint64_t seed) {
  Rng rng(seed);
  Vec v = haar_state(dim, rng);
  return v * v.adjoint();
}

// Swap-in/swap-out spec around a given model. Encoder sites sit in the
// northwest and southeast corners so each party keeps its port through the
// exchange.
PseudoBulkSpec stock_spec(const Ring& ring, ModelSpec model, const StateVector& resource,
                          int site_a, int site_b, int site_n, int site_s) {
  PseudoBulkSpec spec;
  spec.ring = ring;
  spec.model = std::move(model);
  spec.resource = resource;
  spec.encoder_a = swap_in_encoder(ring, site_a);
  spec.encoder_b = swap_in_encoder(ring, site_b);
  spec.decoder_n = swap_out_decoder(ring, site_n);
  spec.decoder_s = swap_out_decoder(ring, site_s);
  return spec;
}

// Permutation that swaps two factors of a multi-factor space.
Mat factor_swap(const std::vector<int>& dims, int fa, int fb) {
  auto strides = strides_of(dims);
  std::int64_t d = checked_product(dims);
  Mat p = Mat::Zero(d, d);
  for (std::int64_t idx = 0; idx < d; ++idx) {
    std::int64_t a = (idx / strides[size_t(fa)]) % dims[size_t(fa)];
    std::int64_t b = (idx / strides[size_t(fb)]) % dims[size_t(fb)];
    std::int64_t to = idx + (b - a) * strides[size_t(fa)] + (a - b) * strides[size_t(fb)];
    p(to, idx) = 1.0;
  }
  return p;
}

// Reverse the two factors of a dA x dB bipartite density matrix.
Mat reorder_pair(const Mat& rho, int d0, int d1) {
  Mat out(rho.rows(), rho.cols());
  for (int a = 0; a < d0; ++a)
    for (int b = 0; b < d1; ++b)
      for (int c = 0; c < d0; ++c)
        for (int e = 0; e < d1; ++e) out(b * d0 + a, e * d0 + c) = rho(a * d1 + b, c * d1 + e);
  return out;
}

}  // namespace

TEST_CASE("pseudo-bulk with identity dynamics is a perfect relay", "[protocol]") {
  Ring ring(4);
  Rng rng(71);
  StateVector resource = random_product_state(ring.dims(), rng);
  // W = {2,3}, E = {0,1}, N = {0,3}, S = {1,2}
  PseudoBulkSpec spec = stock_spec(ring, BrickworkCircuit{}, resource, 3, 1, 3, 1);

  for (std::uint64_t seed : {101u, 102u, 103u}) {
    Mat rho = random_density(4, seed);
    Mat out = pseudo_bulk_dynamics(spec, rho);
    REQUIRE(testutil::maxabs(out - rho) <= 1e-12);
    REQUIRE(std::abs(out.trace() - cx(1, 0)) <= 1e-10);
  }

  SECTION("trace-and-replace decoder pins the output") {
    spec.decoder_n = trace_replace_decoder(ring, 3);
    Mat rho = random_density(4, 7);
    Mat out = pseudo_bulk_dynamics(spec, rho);
    Mat rho_b = Mat::Zero(2, 2);
    for (int b = 0; b < 2; ++b)
      for (int e = 0; e < 2; ++e)
        for (int a = 0; a < 2; ++a) rho_b(b, e) += rho(a * 2 + b, a * 2 + e);
    Mat expected = Mat::Zero(4, 4);
    expected.block(0, 0, 2, 2) = rho_b;  // |0><0| (x) rho_B
    REQUIRE(testutil::maxabs(out - expected) <= 1e-12);
  }
}

TEST_CASE("pseudo-bulk dynamics matches a superoperator composition oracle", "[protocol]") {
  Ring ring(8);
  ModelSpec model = random_brickwork(ring, 1, 4242);
  Rng rng(19);
  StateVector resource = random_product_state(ring.dims(), rng);
  const int site_a = 6, site_b = 2, site_n = 7, site_s = 3;
  PseudoBulkSpec spec = stock_spec(ring, model, resource, site_a, site_b, site_n, site_s);

  Mat u = evolve_model(model, ring).entries;
  std::vector<int> full_dims{2, 2};
  for (int d : ring.dims()) full_dims.push_back(d);

  for (std::uint64_t seed : {501u, 502u}) {
    Mat rho = random_density(4, seed);
    Mat out = pseudo_bulk_dynamics(spec, rho);

    // oracle: explicit composition on the [A,B,ring] space
    Mat psi_proj = resource.amps * resource.amps.adjoint();
    Mat full = Eigen::kroneckerProduct(rho, psi_proj);
    Mat sw = factor_swap(full_dims, 0, 2 + site_a) * factor_swap(full_dims, 1, 2 + site_b);
    full = sw * full * sw.adjoint();
    DenseOperator rho_op(
        [&] {
          std::vector<int> ids(full_dims.size());
          for (size_t i = 0; i < ids.size(); ++i) ids[i] = int(i);
          return ids;
        }(),
        full_dims, std::move(full));
    DenseOperator ring_rho = partial_trace(rho_op, {0, 1});
    Mat evolved = u * ring_rho.entries * u.adjoint();
    DenseOperator ev(ring.all_sites(), ring.dims(), std::move(evolved));
    std::vector<int> traced;
    for (int s = 0; s < ring.n_sites; ++s)
      if (s != site_n && s != site_s) traced.push_back(s);
    Mat read = partial_trace(ev, traced).entries;  // factor order (site_s, site_n)
    Mat expected = reorder_pair(read, 2, 2);       // want (A~, B~) = (site_n, site_s)

    REQUIRE(testutil::maxabs(out - expected) <= 1e-10);
  }
}

TEST_CASE("run_nlqc with the identity decomposition relays the input", "[protocol]") {
  Ring ring(4);
  Rng rng(77);
  StateVector resource = random_product_state(ring.dims(), rng);
  PseudoBulkSpec spec = stock_spec(ring, BrickworkCircuit{}, resource, 3, 1, 3, 1);
  QuarterDecomposition dec = decompose_circuit(BrickworkCircuit{}, ring);

  Mat rho = random_density(4, 11);
  NlqcRun run = run_nlqc(spec, dec, rho);
  REQUIRE(testutil::maxabs(run.output - rho) <= 1e-12);

  REQUIRE_NOTHROW(audit_transcript(run.transcript, ring));
  int exchanges = 0;
  for (const auto& ev : run.transcript.events) exchanges += ev.is_exchange ? 1 : 0;
  REQUIRE(exchanges == 1);
}

TEST_CASE("run_nlqc on the exact swap decomposition matches pseudo-bulk dynamics",
          "[protocol][slow]") {
  Ring ring(8);
  ModelSpec model = random_brickwork(ring, 1, 999);
  Rng rng(23);
  StateVector resource = random_product_state(ring.dims(), rng);
  PseudoBulkSpec spec = stock_spec(ring, model, resource, 6, 2, 7, 3);

  QuarterDecomposition dec = decompose_swap(evolve_model(model, ring), ring, false);

  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    Mat rho = seed <= 8 ? pure_density(4, 900 + seed) : random_density(4, 900 + seed);
    Mat direct = pseudo_bulk_dynamics(spec, rho);
    NlqcRun run = run_nlqc(spec, dec, rho);
    REQUIRE(trace_distance(run.output, direct) <= 1e-9);
  }
}

TEST_CASE("canned locality faults are rejected with a named witness", "[protocol]") {
  Ring ring(8);
  Rng rng(31);
  StateVector resource = random_product_state(ring.dims(), rng);
  PseudoBulkSpec spec = stock_spec(ring, BrickworkCircuit{}, resource, 6, 2, 7, 3);
  QuarterDecomposition dec = decompose_circuit(BrickworkCircuit{}, ring);
  Mat rho = random_density(4, 5);

  REQUIRE_THROWS_WITH(run_nlqc(spec, dec, rho, ProtocolFault::early_north),
                      ContainsSubstring("locality violation") &&
                          ContainsSubstring("before the exchange"));
  REQUIRE_THROWS_WITH(run_nlqc(spec, dec, rho, ProtocolFault::cross_half_encoder),
                      ContainsSubstring("locality violation") &&
                          ContainsSubstring("outside the W half"));
  REQUIRE_THROWS_WITH(run_nlqc(spec, dec, rho, ProtocolFault::message_reuse),
                      ContainsSubstring("locality violation") &&
                          ContainsSubstring("after the exchange"));

  // clean run sails through the same checks
  REQUIRE_NOTHROW(run_nlqc(spec, dec, rho));
}

TEST_CASE("transcript audit is an independent checker", "[protocol]") {
  Ring ring(8);
  Rng rng(37);
  StateVector resource = random_product_state(ring.dims(), rng);
  PseudoBulkSpec spec = stock_spec(ring, BrickworkCircuit{}, resource, 6, 2, 7, 3);
  QuarterDecomposition dec = decompose_circuit(BrickworkCircuit{}, ring);
  NlqcRun run = run_nlqc(spec, dec, random_density(4, 3));

  SECTION("tampered event is flagged") {
    Transcript bad = run.transcript;
    bad.events.insert(bad.events.begin(), {"Alice", "sneak east", {0}, {}, false});
    REQUIRE_THROWS_WITH(audit_transcript(bad, ring), ContainsSubstring("locality violation"));
  }
  SECTION("missing exchange is flagged") {
    Transcript bad = run.transcript;
    auto it = std::find_if(bad.events.begin(), bad.events.end(),
                           [](const TranscriptEvent& e) { return e.is_exchange; });
    bad.events.erase(it, bad.events.end());  // cut the exchange and everything after
    REQUIRE_THROWS_WITH(audit_transcript(bad, ring), ContainsSubstring("exactly one exchange"));
  }
  SECTION("second exchange is flagged") {
    Transcript bad = run.transcript;
    bad.events.push_back({"both", "exchange again", {}, {}, true});
    REQUIRE_THROWS_WITH(audit_transcript(bad, ring), ContainsSubstring("second exchange"));
  }
  SECTION("unknown party is flagged") {
    Transcript bad = run.transcript;
    bad.events.push_back({"Eve", "listen", {}, {}, false});
    REQUIRE_THROWS_WITH(audit_transcript(bad, ring), ContainsSubstring("unknown party"));
  }
}

TEST_CASE("time-rewind encoder at t' = 0 is the plain swap", "[protocol]") {
  Ring ring(6);
  ModelSpec model = tfim_model(ring, 1.0, 1.05, 0.0);
  const int site = 4;  // W half is {3,4,5}
  RewindEncoder enc = time_rewind_encoder(ring, model, 0.0, site);
  REQUIRE(enc.half == Half::W);
  REQUIRE(enc.defect <= 1e-10);
  REQUIRE(enc.map.sites == std::vector<int>{3, 4, 5});

  // expected: swap A with the middle declared factor, identity elsewhere
  std::vector<int> dims{2, 2, 2, 2};  // [A, s3, s4, s5]
  Mat sw = factor_swap(dims, 0, 2);
  std::vector<Mat> ms;
  for (int a = 0; a < 2; ++a) ms.push_back(sw.block(a * 8, 0, 8, 16));
  KrausChannel expected(16, 8, ms);
  REQUIRE(testutil::maxabs(choi_matrix(enc.map.channel) - choi_matrix(expected)) <= 1e-9);
}

TEST_CASE("time-rewind encoder with vanishing Hamiltonian has zero defect", "[protocol]") {
  Ring ring(6);
  LocalHamiltonian h;
  h.time = 0.0;
  ModelSpec model(h);
  std::vector<double> times{0.1, 0.2};
  std::vector<int> dists{1, 2, 3};
  LightConeFit fit = lr_profile(model, ring, times, dists);
  RewindEncoder enc = time_rewind_encoder(ring, model, 0.4, 1, &fit);
  REQUIRE(enc.half == Half::E);
  REQUIRE(enc.defect <= 1e-10);
}

TEST_CASE("time-rewind truncation defect obeys the light-cone bound", "[protocol][slow]") {
  Ring ring(6);
  // weak couplings keep the fitted velocity inside the quarter precondition
  ModelSpec model = tfim_model(ring, 0.25, 0.2625, 0.0);
  std::vector<double> times{0.15, 0.3, 0.45};
  std::vector<int> dists{1, 2, 3};
  LightConeFit fit = lr_profile(model, ring, times, dists);

  const double t_prime = 0.2;
  const int site = 4;
  RewindEncoder enc = time_rewind_encoder(ring, model, t_prime, site, &fit);
  double d_half = pi;  // distance from site 4 to the east half, updated below
  for (int s = 0; s < ring.n_sites; ++s)
    if (!in_half(ring, s, Half::W)) d_half = std::min(d_half, ring.site_distance(site, s));
  double bound = fit.a * std::exp(-fit.b * (d_half - fit.v * t_prime));
  CAPTURE(enc.defect, bound, fit.a, fit.b, fit.v, d_half);
  REQUIRE(enc.defect > 0.0);
  REQUIRE(enc.defect <= bound);

  SECTION("precondition rejects a cone past the quarter") {
    REQUIRE_THROWS_WITH(time_rewind_encoder(ring, model, 2.0, site, &fit),
                        ContainsSubstring("light-cone radius"));
  }
  SECTION("positive time without a certificate is rejected") {
    REQUIRE_THROWS_WITH(time_rewind_encoder(ring, model, 0.1, site),
                        ContainsSubstring("light-cone certificate"));
  }
}

TEST_CASE("pseudo-bulk spec validation catches wiring mistakes", "[protocol]") {
  Ring ring(8);
  Rng rng(41);
  StateVector resource = random_product_state(ring.dims(), rng);

  SECTION("encoder on the wrong half") {
    PseudoBulkSpec spec = stock_spec(ring, BrickworkCircuit{}, resource, 2, 2, 7, 3);
    REQUIRE_THROWS_WITH(validate_pseudo_bulk(spec), ContainsSubstring("outside the W half"));
  }
  SECTION("decoder on the wrong half") {
    PseudoBulkSpec spec = stock_spec(ring, BrickworkCircuit{}, resource, 6, 2, 4, 3);
    REQUIRE_THROWS_WITH(validate_pseudo_bulk(spec), ContainsSubstring("outside the N half"));
  }
  SECTION("resource off the ring") {
    PseudoBulkSpec spec = stock_spec(ring, BrickworkCircuit{}, resource, 6, 2, 7, 3);
    Rng rng2(42);
    spec.resource = random_product_state(std::vector<int>{2, 2}, rng2);
    REQUIRE_THROWS_WITH(validate_pseudo_bulk(spec), ContainsSubstring("does not live on the ring"));
  }
  SECTION("channel shape mismatch") {
    PseudoBulkSpec spec = stock_spec(ring, BrickworkCircuit{}, resource, 6, 2, 7, 3);
    spec.encoder_a.sites = {5, 6};  // two sites, channel still sized for one
    REQUIRE_THROWS_WITH(validate_pseudo_bulk(spec),
                        ContainsSubstring("encoder A channel dimensions"));
  }
}
