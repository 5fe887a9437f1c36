// SPDX-License-Identifier: Apache-2.0
#include "test_helpers.hpp"

#include "nlqc/dense.hpp"

using namespace nlqc;
using testutil::kron_chain;
using testutil::maxabs;
using testutil::random_matrix;

namespace {

Mat swap_gate() {
  Mat s = Mat::Zero(4, 4);
  s(0, 0) = s(1, 2) = s(2, 1) = s(3, 3) = 1;
  return s;
}

}  // namespace

TEST_CASE("embed follows the factor-0-major ordering") {
  DenseOperator z0({0}, {2}, pauli_z());
  Mat full = embed(z0, {2, 2}).entries;
  Mat expect = Mat::Zero(4, 4);
  expect.diagonal() << 1, 1, -1, -1;
  REQUIRE(maxabs(full - expect) < 1e-14);

  DenseOperator id1({1}, {2}, Mat::Identity(2, 2));
  REQUIRE(maxabs(embed(id1, {2, 2}).entries - Mat::Identity(4, 4)) < 1e-14);
}

TEST_CASE("embed SWAP on factors {0,2} of three qubits") {
  DenseOperator sw({0, 2}, {2, 2}, swap_gate());
  Mat full = embed(sw, {2, 2, 2}).entries;
  // oracle: enumerate basis-state images b0 b1 b2 -> b2 b1 b0
  Mat expect = Mat::Zero(8, 8);
  for (int b = 0; b < 8; ++b) {
    int b0 = (b >> 2) & 1, b1 = (b >> 1) & 1, b2 = b & 1;
    int img = (b2 << 2) | (b1 << 1) | b0;
    expect(img, b) = 1;
  }
  REQUIRE(maxabs(full - expect) < 1e-14);
}

TEST_CASE("embed rejects bad input") {
  DenseOperator z0({0}, {2}, pauli_z());
  REQUIRE_THROWS_AS(embed(z0, {3, 2}), nlqc::error);      // dim mismatch on support
  DenseOperator far({5}, {2}, pauli_z());
  REQUIRE_THROWS_AS(embed(far, {2, 2}), nlqc::error);     // support out of range
}

TEST_CASE("partial_trace basics") {
  Rng rng(11);
  Mat a = random_matrix(2, rng), b = random_matrix(2, rng);
  DenseOperator ab({0, 1}, {2, 2}, Eigen::kroneckerProduct(a, b).eval());
  DenseOperator ta = partial_trace(ab, {1});
  REQUIRE(maxabs(ta.entries - a * b.trace()) < 1e-12);
  REQUIRE(ta.support == std::vector<int>{0});

  DenseOperator sw({0, 1}, {2, 2}, swap_gate());
  DenseOperator half = partial_trace(sw, {0});
  REQUIRE(maxabs(half.entries - Mat::Identity(2, 2)) < 1e-14);

  for (int trial = 0; trial < 20; ++trial) {
    Mat x = random_matrix(8, rng);
    DenseOperator op({0, 1, 2}, {2, 2, 2}, x);
    cx t0 = op.entries.trace();
    cx t1 = partial_trace(op, {0, 2}).entries.trace();
    REQUIRE(std::abs(t0 - t1) < 1e-12);
  }
  REQUIRE_THROWS_AS(partial_trace(sw, {3}), nlqc::error);
}

TEST_CASE("twirl matches the Haar identity") {
  DenseOperator sw({0, 1}, {2, 2}, swap_gate());
  DenseOperator t = twirl(sw, {0});
  REQUIRE(t.support == std::vector<int>({0, 1}));
  REQUIRE(maxabs(t.entries - 0.5 * Mat::Identity(4, 4)) < 1e-14);

  DenseOperator one = identity_op({0, 1}, {2, 2});
  REQUIRE(maxabs(twirl(one, {1}).entries - one.entries) < 1e-14);
}

TEST_CASE("twirl equals the Monte-Carlo Haar average") {
  Rng rng(202608);
  Mat k = random_matrix(8, rng);
  DenseOperator op({0, 1, 2}, {2, 2, 2}, k);
  DenseOperator t = twirl(op, {1});
  Mat avg = Mat::Zero(8, 8);
  const int samples = 30000;
  for (int s = 0; s < samples; ++s) {
    Mat u = haar_unitary(2, rng);
    Mat ufull = kron_chain({Mat::Identity(2, 2), u, Mat::Identity(2, 2)});
    avg += ufull * k * ufull.adjoint();
  }
  avg /= double(samples);
  REQUIRE(schatten_norm(Mat(avg - t.entries), Schatten::inf) < 5e-2);
}

TEST_CASE("twirl output commutes with region unitaries") {
  Rng rng(7);
  Mat k = random_matrix(8, rng);
  DenseOperator t = twirl(DenseOperator({0, 1, 2}, {2, 2, 2}, k), {0, 2});
  for (int trial = 0; trial < 100; ++trial) {
    Mat u = Eigen::kroneckerProduct(haar_unitary(2, rng), haar_unitary(2, rng)).eval();
    DenseOperator ur({0, 2}, {2, 2}, u);
    Mat ufull = embed_matrix(ur, t.support, t.dims);
    REQUIRE(maxabs(ufull * t.entries - t.entries * ufull) < 1e-10);
  }
}

TEST_CASE("compose multiplies on the union support") {
  Rng rng(3);
  Mat a = random_matrix(4, rng), b = random_matrix(4, rng);
  DenseOperator opa({0, 1}, {2, 2}, a);
  DenseOperator opb({1, 2}, {2, 2}, b);
  DenseOperator prod = compose(opa, opb);
  Mat ea = kron_chain({a, Mat::Identity(2, 2)});
  // b on factors {1,2}: a kron on the right
  Mat eb = kron_chain({Mat::Identity(2, 2), b});
  REQUIRE(prod.support == std::vector<int>({0, 1, 2}));
  REQUIRE(maxabs(prod.entries - ea * eb) < 1e-12);
}

TEST_CASE("polar_unitary basics") {
  Rng rng(5);
  Mat u = haar_unitary(8, rng);
  DenseOperator opu({0, 1, 2}, {2, 2, 2}, u);
  REQUIRE(maxabs(polar_unitary(opu).entries - u) < 1e-10);
  DenseOperator scaled({0, 1, 2}, {2, 2, 2}, 2.0 * u);
  REQUIRE(maxabs(polar_unitary(scaled).entries - u) < 1e-10);

  Mat sing = Mat::Zero(2, 2);
  sing(0, 0) = 1;
  try {
    polar_unitary(DenseOperator({0}, {2}, sing));
    FAIL("expected singular-input rejection");
  } catch (const nlqc::error& e) {
    REQUIRE(std::string(e.what()).find("singular") != std::string::npos);
  }
}

TEST_CASE("polar_unitary is the Frobenius-closest unitary") {
  Rng rng(17);
  Mat u0 = haar_unitary(8, rng);
  Mat k = u0 + 0.15 * random_matrix(8, rng);
  DenseOperator opk({0, 1, 2}, {2, 2, 2}, k);
  DenseOperator pk = polar_unitary(opk);
  double defect = maxabs(pk.entries.adjoint() * pk.entries - Mat::Identity(8, 8));
  REQUIRE(defect < 1e-10);
  double dist = (pk.entries - k).norm();
  for (int trial = 0; trial < 50; ++trial) {
    Mat v = haar_unitary(8, rng);
    REQUIRE(dist <= (v - k).norm() + 1e-12);
  }
  // idempotence
  REQUIRE(maxabs(polar_unitary(pk).entries - pk.entries) < 1e-10);
}

TEST_CASE("schatten norms") {
  DenseOperator z({0}, {2}, pauli_z());
  REQUIRE(schatten_norm(z, Schatten::inf) == Catch::Approx(1.0));
  REQUIRE(schatten_norm(z, Schatten::one) == Catch::Approx(2.0));
  Rng rng(23);
  Mat a = random_matrix(8, rng);
  double sinf = schatten_norm(a, Schatten::inf);
  double s2 = schatten_norm(a, Schatten::two);
  double s1 = schatten_norm(a, Schatten::one);
  REQUIRE(sinf <= s2 + 1e-12);
  REQUIRE(s2 <= s1 + 1e-12);
  REQUIRE(op_norm_estimate(a) == Catch::Approx(sinf).margin(1e-8));
}

TEST_CASE("entropy of states and densities") {
  StateVector zz = basis_state({2, 2});
  REQUIRE(entropy(zz, {0}) == Catch::Approx(0.0).margin(1e-12));

  Vec bell(4);
  bell << 1 / std::sqrt(2.0), 0, 0, 1 / std::sqrt(2.0);
  StateVector bellstate({2, 2}, bell);
  REQUIRE(entropy(bellstate, {0}) == Catch::Approx(1.0).margin(1e-12));

  Rng rng(31);
  StateVector psi({2, 2, 2, 2}, haar_state(16, rng));
  double sa = entropy(psi, {0, 2});
  double sb = entropy(psi, {1, 3});
  REQUIRE(sa == Catch::Approx(sb).margin(1e-10));
  REQUIRE(sa >= -1e-12);
  REQUIRE(sa <= 2.0 + 1e-12);

  DenseOperator rho = reduced_density(psi, {0, 2});
  REQUIRE(entropy(rho, {0, 2}) == Catch::Approx(sa).margin(1e-10));
  REQUIRE(entropy(rho, {0}) == Catch::Approx(entropy(psi, {0})).margin(1e-10));

  Mat notpsd = Mat::Zero(2, 2);
  notpsd(0, 0) = 1.5;
  notpsd(1, 1) = -0.5;
  REQUIRE_THROWS_AS(entropy(DenseOperator({0}, {2}, notpsd), {0}), nlqc::error);
}

TEST_CASE("apply_to_state matches dense embedding") {
  Rng rng(41);
  Mat g = random_matrix(4, rng);
  DenseOperator op({1, 3}, {2, 2}, g);
  StateVector psi({2, 2, 2, 2}, haar_state(16, rng));
  StateVector out = psi;
  apply_to_state(out, op);
  Mat full = embed(op, psi.dims).entries;
  REQUIRE((out.amps - full * psi.amps).norm() < 1e-12);
}

TEST_CASE("site_mult helpers match dense embedding") {
  Rng rng(43);
  Mat m = random_matrix(8, rng);
  Mat p = random_matrix(2, rng);
  Mat lhs = m;
  site_mult_left(lhs, p, 1, {2, 2, 2});
  Mat pe = testutil::single_site(p, 1, 3);
  REQUIRE(maxabs(lhs - pe * m) < 1e-12);
  Mat rhs = m;
  site_mult_right(rhs, p, 1, {2, 2, 2});
  REQUIRE(maxabs(rhs - m * pe) < 1e-12);
}

TEST_CASE("restrict_to compresses and validates") {
  Rng rng(47);
  Mat g = random_matrix(2, rng);
  DenseOperator wide = compose(DenseOperator({1}, {2}, g), identity_op({0, 2}, {2, 2}));
  DenseOperator narrow = restrict_to(wide, {1});
  REQUIRE(narrow.support == std::vector<int>{1});
  REQUIRE(maxabs(narrow.entries - g) < 1e-12);
  // an operator genuinely acting on factor 0 cannot be restricted away
  DenseOperator z0 = compose(DenseOperator({0}, {2}, pauli_z()), wide);
  REQUIRE_THROWS_AS(restrict_to(z0, {1}), nlqc::error);
}

TEST_CASE("trace_distance on known pairs") {
  Mat rho0 = Mat::Zero(2, 2), rho1 = Mat::Zero(2, 2);
  rho0(0, 0) = 1;
  rho1(1, 1) = 1;
  REQUIRE(trace_distance(rho0, rho1) == Catch::Approx(1.0));
  REQUIRE(trace_distance(rho0, rho0) == Catch::Approx(0.0).margin(1e-14));
  Mat mixed = 0.5 * Mat::Identity(2, 2);
  REQUIRE(trace_distance(rho0, mixed) == Catch::Approx(0.5));
}
