// SPDX-License-Identifier: Apache-2.0
#include "test_helpers.hpp"

#include <functional>
#include <map>
#include <set>

#include "nlqc/stabilizer.hpp"

using namespace nlqc;
using Catch::Matchers::ContainsSubstring;

namespace {

const char* steane_text =
    "code 7 1\n"
    "stab +XIXIXIX\n"
    "stab +IXXIIXX\n"
    "stab +IIIXXXX\n"
    "stab +ZIZIZIZ\n"
    "stab +IZZIIZZ\n"
    "stab +IIIZZZZ\n"
    "logx +XXXXXXX\n"
    "logz +ZZZZZZZ\n";

StabilizerCode steane() { return code_from_text(steane_text); }

// random circuit over the full gate set, deterministic per seed
CliffordCircuit random_circuit(int n, int n_gates, std::uint64_t seed) {
  Rng rng(seed);
  CliffordCircuit out;
  const CliffordGate pool[] = {CliffordGate::h,  CliffordGate::s,    CliffordGate::sdg,
                               CliffordGate::x,  CliffordGate::y,    CliffordGate::z,
                               CliffordGate::cnot, CliffordGate::cz, CliffordGate::swap};
  for (int g = 0; g < n_gates; ++g) {
    CliffordGate gate = pool[rng() % 9];
    int a = int(rng() % std::uint64_t(n));
    if (gate_arity(gate) == 1) {
      out.push_back({gate, {a}});
    } else {
      int b = int(rng() % std::uint64_t(n - 1));
      if (b >= a) ++b;
      out.push_back({gate, {a, b}});
    }
  }
  return out;
}

// dense oracle path: run the circuit on a state vector via embedded matrices
StateVector dense_run(const CliffordCircuit& circuit, int n) {
  StateVector psi = basis_state(std::vector<int>(size_t(n), 2));
  for (const auto& op : circuit) apply_to_state(psi, clifford_dense(op.gate, op.sites, n));
  return psi;
}

// dense Pauli expectation built from kron chains only (independent of the
// bit-mask application path in the library)
cx dense_expectation(const StateVector& psi, const std::vector<int>& letters) {
  std::vector<Mat> factors;
  cx front = 1.0;
  for (int code : letters) {
    switch (code) {
      case 0: factors.push_back(Mat::Identity(2, 2)); break;
      case 1: factors.push_back(pauli_x()); break;
      case 2: factors.push_back(pauli_y()); break;
      case 3: factors.push_back(pauli_z()); break;
    }
  }
  Mat big = testutil::kron_chain(factors);
  return (psi.amps.adjoint() * (big * psi.amps))(0, 0) * front;
}

PauliVec pauli_from_letters(const std::vector<int>& letters) {
  std::string s = "+";
  for (int code : letters) s += "IXYZ"[code];
  return pauli_from_string(s);
}

// exhaustive coset search over all stabilizer subset products
std::optional<PauliVec> brute_clean(const StabilizerCode& code, const PauliVec& op,
                                    const std::vector<int>& region) {
  std::set<int> reg(region.begin(), region.end());
  int m = int(code.generators.size());
  for (int mask = 0; mask < (1 << m); ++mask) {
    PauliVec r = op;
    for (int i = 0; i < m; ++i)
      if (mask & (1 << i)) r = pauli_mul(r, code.generators[size_t(i)]);
    bool inside = true;
    for (int s : r.support())
      if (!reg.count(s)) inside = false;
    if (inside) return r;
  }
  return std::nullopt;
}

std::vector<std::vector<int>> subsets_of_size(int n, int k) {
  std::vector<std::vector<int>> out;
  std::vector<int> idx(static_cast<size_t>(k));
  std::function<void(int, int)> rec = [&](int start, int depth) {
    if (depth == k) {
      out.push_back(idx);
      return;
    }
    for (int s = start; s < n; ++s) {
      idx[size_t(depth)] = s;
      rec(s + 1, depth + 1);
    }
  };
  rec(0, 0);
  return out;
}

}  // namespace

TEST_CASE("pauli vector basics", "[stab]") {
  PauliVec y = pauli_term(3, 1, 'Y');
  REQUIRE(y.phase == 1);
  REQUIRE(y.is_hermitian());
  REQUIRE(y.sign() == +1);
  REQUIRE(pauli_to_string(y) == "+IYI");
  REQUIRE(pauli_from_string("+IYI") == y);
  REQUIRE(pauli_from_string("-XZ").sign() == -1);
  REQUIRE(pauli_to_string(pauli_from_string("-XYZI")) == "-XYZI");

  // X*Z = -iY: phase bookkeeping without hermiticity
  PauliVec xz = pauli_mul(pauli_term(1, 0, 'X'), pauli_term(1, 0, 'Z'));
  REQUIRE(xz.x[0] == 1);
  REQUIRE(xz.z[0] == 1);
  REQUIRE(xz.phase == 0);  // i^0 X Z = -i Y
  REQUIRE_FALSE(xz.is_hermitian());
  // Z*X = +iY
  PauliVec zx = pauli_mul(pauli_term(1, 0, 'Z'), pauli_term(1, 0, 'X'));
  REQUIRE(zx.phase == 2);

  REQUIRE(paulis_commute(pauli_from_string("+XX"), pauli_from_string("+ZZ")));
  REQUIRE_FALSE(paulis_commute(pauli_from_string("+XI"), pauli_from_string("+ZI")));
  REQUIRE(pauli_mul(y, y).is_identity());

  REQUIRE_THROWS_WITH(pauli_from_string("+ABC"), ContainsSubstring("bad Pauli letter"));
  REQUIRE_THROWS_WITH(pauli_term(2, 5, 'X'), ContainsSubstring("out of range"));
}

TEST_CASE("gate conjugation table", "[stab]") {
  // S X Sdg = Y, S Y Sdg = -X, S Z Sdg = Z
  REQUIRE(conjugate_pauli(pauli_term(1, 0, 'X'), CliffordGate::s, {0}) == pauli_term(1, 0, 'Y'));
  PauliVec sy = conjugate_pauli(pauli_term(1, 0, 'Y'), CliffordGate::s, {0});
  REQUIRE(sy.same_bits(pauli_term(1, 0, 'X')));
  REQUIRE(sy.sign() == -1);
  REQUIRE(conjugate_pauli(pauli_term(1, 0, 'Z'), CliffordGate::s, {0}) == pauli_term(1, 0, 'Z'));

  // H swaps X and Z, flips Y
  REQUIRE(conjugate_pauli(pauli_term(1, 0, 'X'), CliffordGate::h, {0}) == pauli_term(1, 0, 'Z'));
  PauliVec hy = conjugate_pauli(pauli_term(1, 0, 'Y'), CliffordGate::h, {0});
  REQUIRE(hy.same_bits(pauli_term(1, 0, 'Y')));
  REQUIRE(hy.sign() == -1);

  // CNOT pushforwards: X0 -> X0 X1, Z1 -> Z0 Z1, X1 and Z0 fixed
  PauliVec x0x1 = pauli_mul(pauli_term(2, 0, 'X'), pauli_term(2, 1, 'X'));
  REQUIRE(conjugate_pauli(pauli_term(2, 0, 'X'), CliffordGate::cnot, {0, 1}) == x0x1);
  PauliVec z0z1 = pauli_mul(pauli_term(2, 0, 'Z'), pauli_term(2, 1, 'Z'));
  REQUIRE(conjugate_pauli(pauli_term(2, 1, 'Z'), CliffordGate::cnot, {0, 1}) == z0z1);
  REQUIRE(conjugate_pauli(pauli_term(2, 1, 'X'), CliffordGate::cnot, {0, 1}) ==
          pauli_term(2, 1, 'X'));

  // CZ: X+X -> Y+Y with a plus sign overall
  PauliVec xx = pauli_from_string("+XX");
  PauliVec yy = pauli_from_string("+YY");
  REQUIRE(conjugate_pauli(xx, CliffordGate::cz, {0, 1}) == yy);

  // Pauli gates conjugate by sign flips only
  PauliVec zx = conjugate_pauli(pauli_term(1, 0, 'X'), CliffordGate::z, {0});
  REQUIRE(zx.sign() == -1);

  REQUIRE_THROWS_WITH(conjugate_pauli(xx, CliffordGate::cnot, {0, 0}),
                      ContainsSubstring("distinct"));
  REQUIRE_THROWS_WITH(conjugate_pauli(xx, CliffordGate::h, {3}), ContainsSubstring("out of range"));
}

TEST_CASE("self-inverse circuits restore random tableaus", "[stab]") {
  for (std::uint64_t seed : {11u, 12u, 13u}) {
    Tableau t = apply_circuit(Tableau(4), random_circuit(4, 25, seed));
    Tableau hh = apply_clifford(apply_clifford(t, CliffordGate::h, {2}), CliffordGate::h, {2});
    REQUIRE(hh.rows == t.rows);
    Tableau s4 = t;
    for (int r = 0; r < 4; ++r) s4 = apply_clifford(s4, CliffordGate::s, {1});
    REQUIRE(s4.rows == t.rows);
    CliffordCircuit c = random_circuit(4, 12, seed + 100);
    Tableau round = apply_circuit(apply_circuit(t, c), inverse_circuit(c));
    REQUIRE(round.rows == t.rows);
  }
}

TEST_CASE("tableau matches dense simulation on all Pauli expectations", "[stab]") {
  // 20 gates on 5 qubits, then the larger invariant at 30 gates on 6 qubits
  for (auto [n, gates, seed] : {std::tuple{5, 20, 301u}, {5, 20, 302u}, {5, 20, 303u},
                                std::tuple{6, 30, 304u}, {6, 30, 305u}}) {
    CliffordCircuit circuit = random_circuit(n, gates, seed);
    Tableau tab = apply_circuit(Tableau(n), circuit);
    StateVector psi = dense_run(circuit, n);
    std::int64_t total = 1;
    for (int i = 0; i < n; ++i) total *= 4;
    for (std::int64_t word = 0; word < total; ++word) {
      std::vector<int> letters(static_cast<size_t>(n));
      std::int64_t rem = word;
      for (int i = n - 1; i >= 0; --i) {
        letters[size_t(i)] = int(rem % 4);
        rem /= 4;
      }
      int got = pauli_expectation(tab, pauli_from_letters(letters));
      cx want = dense_expectation(psi, letters);
      REQUIRE(std::abs(want.imag()) < 1e-9);
      REQUIRE(std::abs(double(got) - want.real()) < 1e-9);
    }
  }
}

TEST_CASE("measurement semantics", "[stab]") {
  Rng rng(99);
  // determinate on |0>
  auto [t0, o0] = measure_z(Tableau(1), 0, rng);
  REQUIRE(o0 == 0);
  REQUIRE(t0.rows == Tableau(1).rows);

  // |+> collapses; both outcomes occur over seeds and repeat deterministically
  Tableau plus = apply_clifford(Tableau(1), CliffordGate::h, {0});
  std::set<int> seen;
  for (int trial = 0; trial < 20; ++trial) {
    auto [t1, o1] = measure_z(plus, 0, rng);
    seen.insert(o1);
    REQUIRE(pauli_expectation(t1, pauli_term(1, 0, 'X')) == 0);
    int z = pauli_expectation(t1, pauli_term(1, 0, 'Z'));
    REQUIRE(z == (o1 ? -1 : 1));
    auto [t2, o2] = measure_z(t1, 0, rng);
    REQUIRE(o2 == o1);  // repeated measurement is determinate
    REQUIRE(t2.rows == t1.rows);
  }
  REQUIRE(seen.size() == 2);

  // Bell pair: second outcome tracks the first
  Tableau bell = apply_clifford(apply_clifford(Tableau(2), CliffordGate::h, {0}),
                                CliffordGate::cnot, {0, 1});
  for (int trial = 0; trial < 8; ++trial) {
    auto [b1, oa] = measure_z(bell, 0, rng);
    auto [b2, ob] = measure_z(b1, 1, rng);
    REQUIRE(ob == oa);
  }
  REQUIRE_THROWS_WITH(measure_z(bell, 5, rng), ContainsSubstring("out of range"));
}

TEST_CASE("dense reconstruction of tableau states", "[stab]") {
  Tableau bell = apply_clifford(apply_clifford(Tableau(2), CliffordGate::h, {0}),
                                CliffordGate::cnot, {0, 1});
  StateVector psi = stabilizer_state_vector(bell);
  Vec ref(4);
  ref << 1 / std::sqrt(2.0), 0, 0, 1 / std::sqrt(2.0);
  REQUIRE(std::abs(std::abs(ref.dot(psi.amps)) - 1.0) < 1e-12);

  // random circuits match the dense run up to global phase
  for (std::uint64_t seed : {41u, 42u}) {
    CliffordCircuit c = random_circuit(5, 18, seed);
    StateVector a = stabilizer_state_vector(apply_circuit(Tableau(5), c));
    StateVector b = dense_run(c, 5);
    REQUIRE(std::abs(std::abs(a.amps.dot(b.amps)) - 1.0) < 1e-9);
  }
}

TEST_CASE("tableau from explicit stabilizer generators", "[stab]") {
  // signed generator: -Z stabilizes |1>
  PauliVec mz = pauli_from_string("-Z");
  Tableau one = tableau_from_stabilizers({mz});
  REQUIRE(pauli_expectation(one, pauli_term(1, 0, 'Z')) == -1);

  // rebuild a random tableau state from its stabilizer rows alone
  for (std::uint64_t seed : {7u, 8u}) {
    Tableau t = apply_circuit(Tableau(4), random_circuit(4, 20, seed));
    std::vector<PauliVec> gens;
    for (int i = 0; i < 4; ++i) gens.push_back(t.stabilizer(i));
    Tableau rebuilt = tableau_from_stabilizers(gens);
    for (int i = 0; i < 4; ++i) {
      REQUIRE(symplectic_product(rebuilt.destabilizer(i), rebuilt.stabilizer(i)) == 1);
      for (int j = 0; j < 4; ++j) {
        if (j != i)
          REQUIRE(symplectic_product(rebuilt.destabilizer(i), rebuilt.stabilizer(j)) == 0);
        REQUIRE(symplectic_product(rebuilt.destabilizer(i), rebuilt.destabilizer(j)) == 0);
      }
    }
    StateVector a = stabilizer_state_vector(t);
    StateVector b = stabilizer_state_vector(rebuilt);
    REQUIRE(std::abs(std::abs(a.amps.dot(b.amps)) - 1.0) < 1e-9);
  }

  REQUIRE_THROWS_WITH(tableau_from_stabilizers({pauli_from_string("+XI"),
                                                pauli_from_string("+ZI")}),
                      ContainsSubstring("anticommute"));
  REQUIRE_THROWS_WITH(tableau_from_stabilizers({pauli_from_string("+ZZ"),
                                                pauli_from_string("+ZZ")}),
                      ContainsSubstring("independent"));
}

TEST_CASE("code text round-trip and validation", "[stab]") {
  StabilizerCode code = steane();
  REQUIRE(code.n == 7);
  REQUIRE(code.k == 1);
  REQUIRE(code.generators.size() == 6);
  REQUIRE(code_to_text(code) == steane_text);

  StabilizerCode again = code_from_text(code_to_text(code));
  REQUIRE(again.generators[2] == code.generators[2]);

  REQUIRE_THROWS_WITH(code_from_text("stab +XX\n"), ContainsSubstring("must start"));
  REQUIRE_THROWS_WITH(code_from_text("code 2 1\nstab +XQ\nlogx +XX\nlogz +ZI\n"),
                      ContainsSubstring("bad Pauli letter"));
  // logical anticommuting with a generator rejected by validate
  REQUIRE_THROWS_WITH(code_from_text("code 2 1\nstab +ZI\nlogx +XX\nlogz +IZ\n"),
                      ContainsSubstring("anticommute"));
}

TEST_CASE("cleaning logical operators over the Steane code", "[stab]") {
  StabilizerCode code = steane();
  std::vector<int> all = {0, 1, 2, 3, 4, 5, 6};

  // full region: the operator itself comes back
  auto full = clean_logical(code, code.logical_x[0], all);
  REQUIRE(full.has_value());
  REQUIRE(*full == code.logical_x[0]);

  // every 5-qubit region supports both logicals; every 2-qubit region neither
  for (const auto& reg : subsets_of_size(7, 5)) {
    for (const PauliVec& op : {code.logical_x[0], code.logical_z[0]}) {
      auto got = clean_logical(code, op, reg);
      auto want = brute_clean(code, op, reg);
      REQUIRE(got.has_value());
      REQUIRE(want.has_value());
      std::set<int> rs(reg.begin(), reg.end());
      for (int s : got->support()) REQUIRE(rs.count(s) == 1);
      for (const auto& g : code.generators) REQUIRE(paulis_commute(*got, g));
      // logical action is preserved: pairings with both logicals unchanged
      REQUIRE(symplectic_product(*got, code.logical_x[0]) ==
              symplectic_product(op, code.logical_x[0]));
      REQUIRE(symplectic_product(*got, code.logical_z[0]) ==
              symplectic_product(op, code.logical_z[0]));
      // deterministic: same call gives the same representative
      REQUIRE(*clean_logical(code, op, reg) == *got);
    }
  }
  for (const auto& reg : subsets_of_size(7, 2)) {
    for (const PauliVec& op : {code.logical_x[0], code.logical_z[0]}) {
      REQUIRE_FALSE(clean_logical(code, op, reg).has_value());
      REQUIRE_FALSE(brute_clean(code, op, reg).has_value());
    }
  }

  // X at one site anticommutes with a Z generator: not a logical operator
  REQUIRE_THROWS_WITH(clean_logical(code, pauli_term(7, 0, 'X'), all),
                      ContainsSubstring("not in the code's logical group"));
}

TEST_CASE("recoverability and no-cloning", "[stab]") {
  StabilizerCode code = steane();
  REQUIRE(recoverable(code, {0, 1, 2, 3, 4, 5, 6}, 0));
  for (const auto& reg : subsets_of_size(7, 5)) REQUIRE(recoverable(code, reg, 0));
  for (const auto& reg : subsets_of_size(7, 2)) REQUIRE_FALSE(recoverable(code, reg, 0));

  // no-cloning: a region and its complement are never both recoverable;
  // recoverable() also cross-checks cleaning against complement erasure
  for (int k = 0; k <= 7; ++k) {
    for (const auto& reg : subsets_of_size(7, k)) {
      std::set<int> rs(reg.begin(), reg.end());
      std::vector<int> comp;
      for (int s = 0; s < 7; ++s)
        if (!rs.count(s)) comp.push_back(s);
      bool r1 = recoverable(code, reg, 0);
      bool r2 = recoverable(code, comp, 0);
      REQUIRE_FALSE((r1 && r2));
    }
  }
  REQUIRE_THROWS_WITH(recoverable(code, {0, 1}, 3), ContainsSubstring("out of range"));
}

TEST_CASE("region entropy of canonical states", "[stab]") {
  // product state: zero across every cut
  Tableau prod = apply_clifford(Tableau(3), CliffordGate::h, {1});
  REQUIRE(region_entropy(prod, {0}) == 0);
  REQUIRE(region_entropy(prod, {1}) == 0);
  REQUIRE(region_entropy(prod, {0, 2}) == 0);

  Tableau bell = apply_clifford(apply_clifford(Tableau(2), CliffordGate::h, {0}),
                                CliffordGate::cnot, {0, 1});
  REQUIRE(region_entropy(bell, {0}) == 1);
  REQUIRE(region_entropy(bell, {1}) == 1);
  REQUIRE(region_entropy(bell, {0, 1}) == 0);

  Tableau ghz = apply_clifford(apply_clifford(apply_clifford(Tableau(3), CliffordGate::h, {0}),
                                              CliffordGate::cnot, {0, 1}),
                               CliffordGate::cnot, {1, 2});
  REQUIRE(region_entropy(ghz, {0}) == 1);
  REQUIRE(region_entropy(ghz, {0, 1}) == 1);
  REQUIRE(region_entropy(ghz, {}) == 0);
}

TEST_CASE("entropy matches the dense oracle and purity symmetry", "[stab]") {
  Rng pick(2026);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Tableau t = apply_circuit(Tableau(6), random_circuit(6, 24, 500 + seed));
    std::vector<int> reg;
    for (int s = 0; s < 6; ++s)
      if (pick() & 1) reg.push_back(s);
    std::vector<int> comp;
    for (int s = 0; s < 6; ++s)
      if (std::find(reg.begin(), reg.end(), s) == reg.end()) comp.push_back(s);
    int sa = region_entropy(t, reg);
    REQUIRE(sa == region_entropy(t, comp));
    if (seed < 8) {
      StateVector psi = stabilizer_state_vector(t);
      REQUIRE(std::abs(entropy(psi, reg) - double(sa)) < 1e-7);
    }
  }
}

TEST_CASE("encoded Steane block entropies", "[stab]") {
  StabilizerCode code = steane();
  std::vector<PauliVec> gens = code.generators;
  gens.push_back(code.logical_z[0]);  // logical |0>
  Tableau enc = tableau_from_stabilizers(gens);

  // any 1 or 2 sites of the encoded block are maximally mixed; a 3-site
  // region drops to 2 exactly when it carries a weight-3 representative of
  // logical Z, i.e. when it is one of the seven Fano lines
  const std::set<std::vector<int>> lines = {{0, 1, 2}, {0, 3, 4}, {0, 5, 6}, {1, 3, 5},
                                            {1, 4, 6}, {2, 3, 6}, {2, 4, 5}};
  for (const auto& reg : subsets_of_size(7, 1)) REQUIRE(region_entropy(enc, reg) == 1);
  for (const auto& reg : subsets_of_size(7, 2)) REQUIRE(region_entropy(enc, reg) == 2);
  for (const auto& reg : subsets_of_size(7, 3))
    REQUIRE(region_entropy(enc, reg) == (lines.count(reg) ? 2 : 3));
  // purity symmetry: a 4-site region mirrors its 3-site complement
  for (const auto& reg : subsets_of_size(7, 4)) {
    std::vector<int> comp;
    for (int s = 0; s < 7; ++s)
      if (std::find(reg.begin(), reg.end(), s) == reg.end()) comp.push_back(s);
    REQUIRE(region_entropy(enc, reg) == (lines.count(comp) ? 2 : 3));
  }

  StateVector psi = stabilizer_state_vector(enc);
  REQUIRE(std::abs(entropy(psi, {0, 1, 2}) - 2.0) < 1e-7);  // a line
  REQUIRE(std::abs(entropy(psi, {0, 1, 3}) - 3.0) < 1e-7);  // not a line
  REQUIRE(std::abs(entropy(psi, {1, 4, 5, 6}) - 3.0) < 1e-7);
}

TEST_CASE("mutual information of stabilizer states", "[stab]") {
  // two independent Bell pairs 0-1 and 2-3
  Tableau two = Tableau(4);
  two = apply_clifford(two, CliffordGate::h, {0});
  two = apply_clifford(two, CliffordGate::cnot, {0, 1});
  two = apply_clifford(two, CliffordGate::h, {2});
  two = apply_clifford(two, CliffordGate::cnot, {2, 3});
  REQUIRE(mutual_information(two, {0}, {2}) == 0);
  REQUIRE(mutual_information(two, {0, 1}, {2, 3}) == 0);
  REQUIRE(mutual_information(two, {0}, {1}) == 2);  // shared Bell pair split

  Tableau ghz = apply_clifford(apply_clifford(apply_clifford(Tableau(3), CliffordGate::h, {0}),
                                              CliffordGate::cnot, {0, 1}),
                               CliffordGate::cnot, {1, 2});
  REQUIRE(mutual_information(ghz, {0}, {1}) == 1);
  REQUIRE(mutual_information(ghz, {0}, {1, 2}) == 2);

  REQUIRE_THROWS_WITH(mutual_information(ghz, {0, 1}, {1, 2}), ContainsSubstring("overlap"));
}
