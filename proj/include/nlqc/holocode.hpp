// SPDX-License-Identifier: Apache-2.0
//
// Stacked holographic CSS blocks on the boundary ring: a Steane-seeded code
// per logical qubit, pole-flow translation swap networks with bounded angular
// spread, transversal logical Cliffords between aligned blocks, and the
// end-to-end non-local Clifford protocol executed under the transcript
// harness from protocol.hpp.
//
// Geometry. Each block lives on its own level of the stack; a physical qubit
// is a (slot, level) pair, and locality is judged by slot angle alone, so
// same-slot gates across levels are spread-free. A block's boundary_sites
// record where its legs sit when the stack is aligned ("center"). Translations
// move every leg one slot along the discrete flow toward a compass pole (legs
// adjacent to the destination pole park there), realized as one layer of
// disjoint swaps into ancilla qubits reserved on the block's level.
#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "nlqc/common.hpp"
#include "nlqc/protocol.hpp"
#include "nlqc/ring.hpp"
#include "nlqc/stabilizer.hpp"

namespace nlqc {

// ---------------------------------------------------------------------------
// Seed code and concatenation.

// The [[7,1,3]] self-dual CSS code. Transversal H implements logical H,
// transversal S-dagger implements logical S (the sign convention below), and
// pairwise transversal CNOT between two blocks implements logical CNOT.
inline StabilizerCode steane_seed() {
  return code_from_text(
      "code 7 1\n"
      "stab +XIXIXIX\n"
      "stab +IXXIIXX\n"
      "stab +IIIXXXX\n"
      "stab +ZIZIZIZ\n"
      "stab +IZZIIZZ\n"
      "stab +IIIZZZZ\n"
      "logx +XXXXXXX\n"
      "logz +ZZZZZZZ\n");
}

// Concatenate two distance-respecting single-logical CSS codes: every qubit
// of `outer` becomes an encoded block of `inner`. Only X-type/Z-type
// operators are lifted, which keeps all signs positive.
inline StabilizerCode concatenated_code(const StabilizerCode& outer, const StabilizerCode& inner) {
  outer.validate();
  inner.validate();
  require(outer.k == 1 && inner.k == 1, "concatenation expects single-logical codes, got k=",
          outer.k, " and k=", inner.k);
  const int n = outer.n * inner.n;

  auto pure_type = [](const PauliVec& p) {
    bool has_x = false, has_z = false;
    for (size_t j = 0; j < p.x.size(); ++j) {
      has_x = has_x || p.x[j];
      has_z = has_z || p.z[j];
    }
    return !(has_x && has_z) && (p.phase & 3) == 0;
  };
  require(pure_type(inner.logical_x[0]) && pure_type(inner.logical_z[0]),
          "concatenation needs X-type/Z-type inner logical representatives");

  // replace a single-site X/Z at outer site j by the inner logical on block j
  auto lift = [&](const PauliVec& p) {
    require(pure_type(p), "concatenation lifts X-type/Z-type operators only");
    PauliVec out(n);
    for (int j = 0; j < outer.n; ++j) {
      const PauliVec* rep = nullptr;
      if (p.x[size_t(j)]) rep = &inner.logical_x[0];
      if (p.z[size_t(j)]) rep = &inner.logical_z[0];
      if (!rep) continue;
      for (int i = 0; i < inner.n; ++i) {
        out.x[size_t(j * inner.n + i)] ^= rep->x[size_t(i)];
        out.z[size_t(j * inner.n + i)] ^= rep->z[size_t(i)];
      }
    }
    return out;
  };

  StabilizerCode cat;
  cat.n = n;
  cat.k = 1;
  for (int j = 0; j < outer.n; ++j)
    for (const PauliVec& g : inner.generators) {
      PauliVec e(n);
      for (int i = 0; i < inner.n; ++i) {
        e.x[size_t(j * inner.n + i)] = g.x[size_t(i)];
        e.z[size_t(j * inner.n + i)] = g.z[size_t(i)];
      }
      require((g.phase & 3) == 0, "concatenation expects positive inner generators");
      cat.generators.push_back(std::move(e));
    }
  for (const PauliVec& g : outer.generators) cat.generators.push_back(lift(g));
  cat.logical_x.push_back(lift(outer.logical_x[0]));
  cat.logical_z.push_back(lift(outer.logical_z[0]));
  cat.validate();
  return cat;
}

// ---------------------------------------------------------------------------
// Holographic code blocks and the stack configuration.

struct HoloCode {
  int layers = 1;
  std::vector<int> boundary_sites;  // aligned (center) slots, ascending, one per leg
  StabilizerCode code;
  int marked_logical = 0;  // the logical the parties act through
};

// `layers` rounds of self-concatenated Steane seeds. boundary_sites may stay
// empty until the code is placed in a stack.
inline HoloCode holo_code(int layers, std::vector<int> boundary_sites = {}, int marked = 0) {
  require(layers >= 1, "holographic code needs layers >= 1, got ", layers);
  HoloCode hc;
  hc.layers = layers;
  hc.code = steane_seed();
  for (int l = 1; l < layers; ++l) hc.code = concatenated_code(steane_seed(), hc.code);
  hc.boundary_sites = std::move(boundary_sites);
  hc.marked_logical = marked;
  return hc;
}

enum class BlockOffset { left, right };

struct BlockSpec {
  HoloCode code;
  BlockOffset offset = BlockOffset::left;  // left parks the home layout toward W
  std::string party = "Alice";             // input party: Alice holds W, Bob holds E
  Half output = Half::N;                   // decode half; Alice -> N, Bob -> S
  int io_slot = 0;                         // party port for encoding and decoding
  int ancilla_budget = 10;                 // free sites reserved on this block's level
};

struct StackConfig {
  std::vector<BlockSpec> blocks;
};

inline Half party_half(const std::string& party) {
  if (party == "Alice") return Half::W;
  if (party == "Bob") return Half::E;
  fail("unknown party \"", party, "\" (expected Alice or Bob)");
}

// Default geometry on a 32-slot ring. The aligned legs interleave the compass
// quarters so that each journey waypoint leaves the marked logical cleanable
// exactly where the protocol needs it; io ports sit in the party's corner
// quarter (W&N for Alice, E&S for Bob), which every translation avoids.
inline Ring toy_stack_ring() { return Ring(32); }

inline StackConfig toy_stack_config(int n_blocks) {
  require(n_blocks >= 1, "stack needs at least one block, got ", n_blocks);
  StackConfig config;
  const std::vector<int> center = {0, 6, 8, 14, 18, 22, 26};
  for (int b = 0; b < n_blocks; ++b) {
    BlockSpec bs;
    bs.code = holo_code(1, center);
    const bool alice = (b % 2 == 0);
    bs.offset = alice ? BlockOffset::left : BlockOffset::right;
    bs.party = alice ? "Alice" : "Bob";
    bs.output = alice ? Half::N : Half::S;
    bs.io_slot = alice ? 28 : 12;
    bs.ancilla_budget = 10;
    config.blocks.push_back(std::move(bs));
  }
  return config;
}

// ---------------------------------------------------------------------------
// Discrete pole flow. One slot along the site's semicircle toward the
// destination pole of `dir`; the two slots adjacent to that pole are fixed
// points (they "park").

inline int flow_step(const Ring& ring, int slot, Half dir) {
  const int n = ring.n_sites;
  require(n % 4 == 0, "pole flow needs a ring divisible by 4, got ", n);
  require(slot >= 0 && slot < n, "flow slot ", slot, " outside ring of ", n);
  const int q = n / 4;
  const int up = (slot + 1) % n;
  const int dn = (slot + n - 1) % n;
  switch (dir) {
    case Half::W:
      if (slot == 3 * q - 1 || slot == 3 * q) return slot;
      return in_half(ring, slot, Half::N) ? dn : up;
    case Half::E:
      if (slot == q - 1 || slot == q) return slot;
      return in_half(ring, slot, Half::N) ? up : dn;
    case Half::N:
      if (slot == n - 1 || slot == 0) return slot;
      return in_half(ring, slot, Half::E) ? dn : up;
    case Half::S:
      if (slot == 2 * q - 1 || slot == 2 * q) return slot;
      return in_half(ring, slot, Half::E) ? up : dn;
  }
  return slot;
}

// ---------------------------------------------------------------------------
// The built stack: registry of (slot, level) qubits, the encoded tableau, the
// derived code on the full qubit set, and per-block displacement bookkeeping.

enum class BlockPos { home, center, out_north, out_south };

struct StackQubit {
  int slot = 0;
  int level = 0;
};

struct Stack {
  Ring ring{4};
  StackConfig config;
  std::vector<StackQubit> qubits;  // tableau order
  Tableau state;                   // encoded stabilizer state (logicals |0>)
  StabilizerCode code;             // block generators plus |0> pins on the rest
  std::vector<std::vector<int>> leg_slot;   // block -> code coordinate -> current slot
  std::vector<BlockPos> pos;                // per-block displacement state
  std::vector<int> io_qubit;                // per-block party port qubit
  std::vector<std::map<int, int>> slot_map; // level -> slot -> qubit id

  int n_qubits() const { return int(qubits.size()); }

  int qubit_at(int level, int slot) const {
    const auto& m = slot_map[size_t(level)];
    auto it = m.find(slot);
    return it == m.end() ? -1 : it->second;
  }

  const BlockSpec& block(int b) const { return config.blocks[size_t(b)]; }
  int n_blocks() const { return int(config.blocks.size()); }
};

namespace detail {

// home/out leg layouts for a block, by flowing the aligned slots
inline std::vector<int> flowed_slots(const Ring& ring, const std::vector<int>& center, Half dir) {
  std::vector<int> out(center.size());
  for (size_t i = 0; i < center.size(); ++i) out[i] = flow_step(ring, center[i], dir);
  return out;
}

}  // namespace detail

inline Stack build_stack(const StackConfig& config, const Ring& ring) {
  require(!config.blocks.empty(), "stack needs at least one block");
  require(ring.n_sites % 4 == 0, "stack ring size must be divisible by 4, got ", ring.n_sites);
  require(ring.local_dim == 2, "stack ring must carry qubits, got local dimension ",
          ring.local_dim);

  Stack st;
  st.ring = ring;
  st.config = config;
  const int nb = int(config.blocks.size());
  st.leg_slot.resize(size_t(nb));
  st.pos.assign(size_t(nb), BlockPos::home);
  st.io_qubit.assign(size_t(nb), -1);
  st.slot_map.resize(size_t(nb));

  std::vector<std::vector<int>> leg_qubit(static_cast<size_t>(nb));
  std::vector<int> pinned;  // ancilla and io qubits, all initialized |0>

  for (int b = 0; b < nb; ++b) {
    const BlockSpec& bs = config.blocks[size_t(b)];
    bs.code.code.validate();
    const StabilizerCode& code = bs.code.code;
    require(bs.code.layers >= 1, "block ", b, " has layers ", bs.code.layers);
    require(bs.code.marked_logical >= 0 && bs.code.marked_logical < code.k, "block ", b,
            " marks logical ", bs.code.marked_logical, " of a k=", code.k, " code");
    require(int(bs.code.boundary_sites.size()) == code.n, "block ", b, " has ",
            bs.code.boundary_sites.size(), " boundary sites for a ", code.n, "-qubit code");
    for (size_t i = 0; i < bs.code.boundary_sites.size(); ++i) {
      int s = bs.code.boundary_sites[i];
      require(s >= 0 && s < ring.n_sites, "block ", b, " boundary site ", s,
              " outside ring of ", ring.n_sites);
      require(i == 0 || s > bs.code.boundary_sites[i - 1],
              "boundary sites of block ", b, " must be distinct and in angular order");
    }
    const Half ph = party_half(bs.party);
    require(bs.output == Half::N || bs.output == Half::S, "block ", b,
            " output half must be N or S");
    require((bs.party == "Alice") == (bs.output == Half::N), "block ", b, " (", bs.party,
            "): the output half must be N for Alice and S for Bob");
    require(bs.io_slot >= 0 && bs.io_slot < ring.n_sites, "block ", b, " io slot ",
            bs.io_slot, " outside ring of ", ring.n_sites);
    require(in_half(ring, bs.io_slot, ph) && in_half(ring, bs.io_slot, bs.output),
            "block ", b, " (", bs.party, "): io port slot ", bs.io_slot,
            " must lie in both the ", half_name(ph), " and ", half_name(bs.output), " halves");

    const Half home_dir = bs.offset == BlockOffset::left ? Half::W : Half::E;
    std::vector<int> home = detail::flowed_slots(ring, bs.code.boundary_sites, home_dir);
    std::vector<int> out = detail::flowed_slots(ring, bs.code.boundary_sites, bs.output);

    std::set<int> journey(home.begin(), home.end());
    journey.insert(bs.code.boundary_sites.begin(), bs.code.boundary_sites.end());
    journey.insert(out.begin(), out.end());
    require(int(journey.size()) >= code.n, "internal: translation journey lost slots");
    require(!journey.count(bs.io_slot), "block ", b, ": io port at slot ", bs.io_slot,
            " collides with its translation journey");

    {
      std::set<int> dedup(home.begin(), home.end());
      require(int(dedup.size()) == code.n, "block ", b, ": home layout collides with itself");
    }

    std::vector<int> anc;
    for (int s : journey)
      if (std::find(home.begin(), home.end(), s) == home.end()) anc.push_back(s);
    require(int(anc.size()) <= bs.ancilla_budget, "block ", b, ": ancilla budget ",
            bs.ancilla_budget, " is below the ", anc.size(),
            " sites its translations require");

    leg_qubit[size_t(b)].resize(size_t(code.n));
    for (int i = 0; i < code.n; ++i) {
      int id = int(st.qubits.size());
      st.qubits.push_back({home[size_t(i)], b});
      leg_qubit[size_t(b)][size_t(i)] = id;
      st.slot_map[size_t(b)][home[size_t(i)]] = id;
    }
    for (int s : anc) {
      int id = int(st.qubits.size());
      st.qubits.push_back({s, b});
      st.slot_map[size_t(b)][s] = id;
      pinned.push_back(id);
    }
    {
      int id = int(st.qubits.size());
      st.qubits.push_back({bs.io_slot, b});
      st.slot_map[size_t(b)][bs.io_slot] = id;
      st.io_qubit[size_t(b)] = id;
      pinned.push_back(id);
    }
    st.leg_slot[size_t(b)] = home;
  }

  const int n_tot = st.n_qubits();
  auto lifted = [&](int b, const PauliVec& p) {
    PauliVec out(n_tot);
    out.phase = p.phase;
    for (int i = 0; i < p.n_sites(); ++i) {
      int q = leg_qubit[size_t(b)][size_t(i)];
      out.x[size_t(q)] = p.x[size_t(i)];
      out.z[size_t(q)] = p.z[size_t(i)];
    }
    return out;
  };

  std::vector<PauliVec> stabs;
  st.code.n = n_tot;
  st.code.k = 0;
  for (int b = 0; b < nb; ++b) {
    const StabilizerCode& code = config.blocks[size_t(b)].code.code;
    for (const PauliVec& g : code.generators) {
      stabs.push_back(lifted(b, g));
      st.code.generators.push_back(stabs.back());
    }
    for (int j = 0; j < code.k; ++j) {
      stabs.push_back(lifted(b, code.logical_z[size_t(j)]));
      st.code.logical_x.push_back(lifted(b, code.logical_x[size_t(j)]));
      st.code.logical_z.push_back(lifted(b, code.logical_z[size_t(j)]));
    }
    st.code.k += code.k;
  }
  for (int q : pinned) {
    stabs.push_back(pauli_term(n_tot, q, 'Z'));
    st.code.generators.push_back(stabs.back());
  }
  st.state = tableau_from_stabilizers(stabs);
  st.code.validate();

  // geometry gate: the marked logical must be cleanable onto the input
  // party's half of the home layout
  for (int b = 0; b < nb; ++b) {
    const BlockSpec& bs = config.blocks[size_t(b)];
    const Half ph = party_half(bs.party);
    std::vector<int> region;
    for (int i = 0; i < bs.code.code.n; ++i)
      if (in_half(ring, st.leg_slot[size_t(b)][size_t(i)], ph)) region.push_back(i);
    require(recoverable(bs.code.code, region, bs.code.marked_logical), "block ", b, " (",
            bs.party, "): marked logical is not recoverable on the ", half_name(ph), " half");
  }
  return st;
}

// ---------------------------------------------------------------------------
// Translations: one layer of disjoint swaps along the pole flow.

enum class TranslateDirection { center_horizontal, north, south };

struct TranslationStep {
  CliffordCircuit circuit;  // disjoint swaps; applying the same layer twice is the identity
  double spread = 0.0;      // max angular displacement over the moved sites
  Stack moved;              // updated layout; the tableau is not advanced here
};

inline TranslationStep translate_circuit(const Stack& stack, int block, TranslateDirection dir) {
  require(block >= 0 && block < stack.n_blocks(), "block ", block, " out of range for ",
          stack.n_blocks(), " blocks");
  const BlockSpec& bs = stack.block(block);
  const std::vector<int>& center = bs.code.boundary_sites;
  const BlockPos cur = stack.pos[size_t(block)];

  Half flow_dir = Half::W;
  BlockPos away = BlockPos::home;  // the non-center endpoint of this toggle
  switch (dir) {
    case TranslateDirection::center_horizontal:
      flow_dir = bs.offset == BlockOffset::left ? Half::W : Half::E;
      away = BlockPos::home;
      require(cur == BlockPos::home || cur == BlockPos::center, "block ", block,
              " must be at home or center for a horizontal translation");
      break;
    case TranslateDirection::north:
      flow_dir = Half::N;
      away = BlockPos::out_north;
      require(cur == BlockPos::center || cur == BlockPos::out_north, "block ", block,
              " must be at center before a north translation");
      break;
    case TranslateDirection::south:
      flow_dir = Half::S;
      away = BlockPos::out_south;
      require(cur == BlockPos::center || cur == BlockPos::out_south, "block ", block,
              " must be at center before a south translation");
      break;
  }

  std::vector<int> endpoint = detail::flowed_slots(stack.ring, center, flow_dir);
  const bool at_center = (cur == BlockPos::center);

  TranslationStep step;
  step.moved = stack;
  std::set<int> used;
  for (size_t i = 0; i < center.size(); ++i) {
    const int c = center[i];
    const int t = endpoint[i];
    require(stack.leg_slot[size_t(block)][i] == (at_center ? c : t),
            "internal: leg layout drifted for block ", block);
    if (t == c) continue;  // parked leg
    const int qc = stack.qubit_at(block, c);
    const int qt = stack.qubit_at(block, t);
    require(qc >= 0, "block ", block, " has insufficient ancillas: no site at slot ", c,
            " on its level");
    require(qt >= 0, "block ", block, " has insufficient ancillas: no site at slot ", t,
            " on its level");
    require(used.insert(c).second && used.insert(t).second, "block ", block,
            ": translation swap layer is not disjoint");
    step.circuit.push_back({CliffordGate::swap, {qc, qt}});
    step.spread = std::max(step.spread, stack.ring.site_distance(c, t));
    step.moved.leg_slot[size_t(block)][i] = at_center ? t : c;
  }
  step.moved.pos[size_t(block)] = at_center ? away : BlockPos::center;
  return step;
}

// Light-cone footprint of a circuit measured on the slot ring: grow each
// slot's reachable set through the gate list and report the largest angular
// distance from an origin to any member of its cone. Same-slot gates across
// levels contribute nothing.
inline double circuit_spread(const Stack& stack, const CliffordCircuit& circuit) {
  std::map<int, std::set<int>> cone;
  for (const CliffordOp& op : circuit) {
    std::set<int> slots;
    for (int q : op.sites) {
      require(q >= 0 && q < stack.n_qubits(), "circuit touches qubit ", q,
              " outside the stack");
      slots.insert(stack.qubits[size_t(q)].slot);
    }
    for (int s : slots)
      if (!cone.count(s)) cone[s] = {s};
    for (auto& [origin, reach] : cone) {
      bool meets = false;
      for (int s : slots)
        if (reach.count(s)) { meets = true; break; }
      if (meets) reach.insert(slots.begin(), slots.end());
    }
  }
  double best = 0.0;
  for (const auto& [origin, reach] : cone)
    for (int s : reach) best = std::max(best, stack.ring.site_distance(origin, s));
  return best;
}

// ---------------------------------------------------------------------------
// Transversal logical Cliffords between aligned blocks.

namespace detail {

// membership of `target` in the group generated by `gens`, sign included;
// returns the reproduced element on success
inline bool in_pauli_group(const std::vector<PauliVec>& gens, const PauliVec& start,
                           const PauliVec& target) {
  const int n = target.n_sites();
  std::vector<int> all(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) all[size_t(i)] = i;
  std::vector<Gf2Row> rows;
  rows.reserve(gens.size());
  for (const PauliVec& g : gens) rows.push_back(restrict_bits(g, all));
  PauliVec diff(n);
  for (int i = 0; i < n; ++i) {
    diff.x[size_t(i)] = target.x[size_t(i)] ^ start.x[size_t(i)];
    diff.z[size_t(i)] = target.z[size_t(i)] ^ start.z[size_t(i)];
  }
  Gf2Combine sol = gf2_combine(rows, restrict_bits(diff, all));
  if (!sol.ok) return false;
  PauliVec recon = start;
  for (size_t i = 0; i < sol.combo.size(); ++i)
    if (sol.combo[i]) recon = pauli_mul(recon, gens[i]);
  return recon == target;
}

}  // namespace detail

// lift a block-coordinate operator onto the stack qubits at the block's
// current layout (translations move the code with the data)
inline PauliVec lift_current(const Stack& stack, int b, const PauliVec& p) {
  PauliVec out(stack.n_qubits());
  out.phase = p.phase;
  for (int i = 0; i < p.n_sites(); ++i) {
    int q = stack.qubit_at(b, stack.leg_slot[size_t(b)][size_t(i)]);
    require(q >= 0, "block ", b, " coordinate ", i, " sits on a missing qubit");
    out.x[size_t(q)] = p.x[size_t(i)];
    out.z[size_t(q)] = p.z[size_t(i)];
  }
  return out;
}

// lifted logical X/Z of block b's marked logical at the current layout
inline PauliVec st_logical(const Stack& stack, int b, char t) {
  const StabilizerCode& code = stack.block(b).code.code;
  const int m = stack.block(b).code.marked_logical;
  return lift_current(stack, b,
                      t == 'X' ? code.logical_x[size_t(m)] : code.logical_z[size_t(m)]);
}

// Compile a logical H/S/CNOT word on the stacked logicals into a transversal
// physical circuit: H -> H on every leg, S -> S-dagger on every leg, CNOT ->
// same-slot CNOTs between the two levels. The logical action is re-verified
// by conjugating the lifted logical generators through the emitted circuit.
inline CliffordCircuit transversal_logical(const Stack& stack, const CliffordCircuit& word) {
  const int nb = stack.n_blocks();
  CliffordCircuit out;
  auto leg_qubits = [&](int b) {
    std::vector<int> q;
    for (int slot : stack.leg_slot[size_t(b)]) q.push_back(stack.qubit_at(b, slot));
    return q;
  };
  for (const CliffordOp& op : word) {
    require(int(op.sites.size()) == gate_arity(op.gate), "word gate ", gate_name(op.gate),
            " has the wrong arity");
    for (int b : op.sites) {
      require(b >= 0 && b < nb, "word gate touches block ", b, " of ", nb);
      require(stack.block(b).code.code.k == 1,
              "transversal words need single-logical blocks; block ", b, " has k=",
              stack.block(b).code.code.k);
      require(stack.pos[size_t(b)] == BlockPos::center, "blocks not aligned: block ", b,
              " is away from its aligned position");
    }
    switch (op.gate) {
      case CliffordGate::h:
        for (int q : leg_qubits(op.sites[0])) out.push_back({CliffordGate::h, {q}});
        break;
      case CliffordGate::s:
        for (int q : leg_qubits(op.sites[0])) out.push_back({CliffordGate::sdg, {q}});
        break;
      case CliffordGate::sdg:
        for (int q : leg_qubits(op.sites[0])) out.push_back({CliffordGate::s, {q}});
        break;
      case CliffordGate::cnot: {
        const int a = op.sites[0], c = op.sites[1];
        require(a != c, "word cnot needs two distinct blocks");
        require(stack.block(a).code.boundary_sites == stack.block(c).code.boundary_sites,
                "blocks not aligned: blocks ", a, " and ", c, " do not share slot columns");
        std::vector<int> qa = leg_qubits(a), qc = leg_qubits(c);
        for (size_t i = 0; i < qa.size(); ++i)
          out.push_back({CliffordGate::cnot, {qa[i], qc[i]}});
        break;
      }
      default:
        fail("transversal words support h, s, sdg, cnot; got ", gate_name(op.gate));
    }
  }

  // verify the logical action: for every block logical, the conjugated lift
  // must equal the word-conjugated label expanded over the lifted logicals,
  // modulo the stack stabilizer group (sign included)
  std::set<int> touched;
  for (const CliffordOp& op : word)
    for (int b : op.sites) touched.insert(b);
  if (!touched.empty()) {
    std::vector<PauliVec> gens;  // stabilizer group at the current layout
    for (int b = 0; b < nb; ++b)
      for (const PauliVec& g : stack.block(b).code.code.generators)
        gens.push_back(lift_current(stack, b, g));
    for (int b : touched) {
      for (char t : {'X', 'Z'}) {
        PauliVec got = conjugate_pauli(st_logical(stack, b, t), out);
        PauliVec label = conjugate_pauli(pauli_term(nb, b, t), word);
        PauliVec want(stack.n_qubits());
        for (int j = 0; j < nb; ++j)
          if (label.x[size_t(j)]) want = pauli_mul(want, st_logical(stack, j, 'X'));
        for (int j = 0; j < nb; ++j)
          if (label.z[size_t(j)]) want = pauli_mul(want, st_logical(stack, j, 'Z'));
        want.phase = (want.phase + label.phase) & 3;
        require(detail::in_pauli_group(gens, want, got),
                "transversal circuit misses the target word on block ", b, " logical ", t);
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Greedy quartering of a slot-local Clifford circuit, mirroring the unitary
// path: clean gates fully in W or E stay in the party pieces; gates fully in
// N or S move to the post-exchange pieces and poison their slots. The result
// satisfies U = U_N U_S U_W U_E with U_E acting first; equality is checked
// exactly by conjugating every single-qubit Pauli through both orderings.

struct QuarteredCircuit {
  CliffordCircuit e, w, s, n;
};

inline QuarteredCircuit quarter_clifford(const Stack& stack, const CliffordCircuit& circuit) {
  QuarteredCircuit out;
  std::set<int> poisoned;
  for (const CliffordOp& op : circuit) {
    std::set<int> slots;
    for (int q : op.sites) slots.insert(stack.qubits[size_t(q)].slot);
    bool clean = true;
    for (int s : slots)
      if (poisoned.count(s)) { clean = false; break; }
    auto all_in = [&](Half h) {
      for (int s : slots)
        if (!in_half(stack.ring, s, h)) return false;
      return true;
    };
    if (clean && all_in(Half::W)) {
      out.w.push_back(op);
    } else if (clean && all_in(Half::E)) {
      out.e.push_back(op);
    } else if (all_in(Half::N)) {
      out.n.push_back(op);
      poisoned.insert(slots.begin(), slots.end());
    } else if (all_in(Half::S)) {
      out.s.push_back(op);
      poisoned.insert(slots.begin(), slots.end());
    } else {
      std::string where;
      for (int s : slots) where += detail::str(s, " ");
      fail("cannot quarter gate ", gate_name(op.gate), " at slots ", where,
           "- it straddles a pole after the halves were shipped");
    }
  }

  CliffordCircuit flat = out.e;
  flat.insert(flat.end(), out.w.begin(), out.w.end());
  flat.insert(flat.end(), out.s.begin(), out.s.end());
  flat.insert(flat.end(), out.n.begin(), out.n.end());
  for (int q = 0; q < stack.n_qubits(); ++q)
    for (char t : {'X', 'Z'}) {
      PauliVec p = pauli_term(stack.n_qubits(), q, t);
      require(conjugate_pauli(p, circuit) == conjugate_pauli(p, flat),
              "quartering changed the circuit action at qubit ", q);
    }
  return out;
}

// ---------------------------------------------------------------------------
// The end-to-end toy protocol.

struct ToyProtocolResult {
  bool exact_match = false;
  std::string mismatch;            // first differing Pauli expectation, empty when exact
  Transcript transcript;
  double horizontal_spread = 0.0;  // largest single horizontal translation
  double journey_spread = 0.0;     // largest composed per-block journey
  double transversal_spread = 0.0;
  Tableau final_state;
  std::vector<int> output_qubits;  // io port qubits, block order
};

namespace detail {

// three-CNOT logical swap between a bare io qubit and a block logical, with
// both representatives cleaned onto `rep_half` of the current layout
inline CliffordCircuit logical_swap_gadget(const Stack& built, const std::vector<int>& slots_now,
                                           int b, Half rep_half, std::vector<int>& sites_out) {
  const StabilizerCode& code = built.block(b).code.code;
  const int marked = built.block(b).code.marked_logical;
  std::vector<int> region;
  for (int i = 0; i < code.n; ++i)
    if (in_half(built.ring, slots_now[size_t(i)], rep_half)) region.push_back(i);
  auto rx = clean_logical(code, code.logical_x[size_t(marked)], region);
  auto rz = clean_logical(code, code.logical_z[size_t(marked)], region);
  require(rx.has_value() && rz.has_value(), "block ", b,
          ": marked logical is not recoverable on the ", half_name(rep_half), " half");
  auto pure_sign = [](const PauliVec& p, bool want_x) {
    if (p.sign() != 1) return false;
    for (size_t j = 0; j < p.x.size(); ++j)
      if (want_x ? p.z[j] : p.x[j]) return false;
    return true;
  };
  require(pure_sign(*rx, true) && pure_sign(*rz, false),
          "block ", b, ": cleaned representatives are not positive CSS type");

  const int io = built.io_qubit[size_t(b)];
  auto leg = [&](int coord) {
    int q = built.qubit_at(b, slots_now[size_t(coord)]);
    require(q >= 0, "block ", b, " coordinate ", coord, " sits on a missing qubit");
    return q;
  };
  CliffordCircuit g;
  std::set<int> sites = {built.block(b).io_slot};
  for (int s : rx->support()) {
    g.push_back({CliffordGate::cnot, {io, leg(s)}});
    sites.insert(slots_now[size_t(s)]);
  }
  for (int s : rz->support()) {
    g.push_back({CliffordGate::cnot, {leg(s), io}});
    sites.insert(slots_now[size_t(s)]);
  }
  for (int s : rx->support()) g.push_back({CliffordGate::cnot, {io, leg(s)}});
  sites_out.assign(sites.begin(), sites.end());
  return g;
}

}  // namespace detail

// Run the full protocol: party-local encodings into the marked logicals,
// translations to center, the transversal Clifford, translations out to the
// poles, all quartered into U_E/U_W (pre-exchange) and U_S/U_N (post), then
// N/S decodings. `input_prep` prepares the logical input state on the io
// ports (gates indexed by block, each within one party). The verdict compares
// every output Pauli expectation against the target acting on the prepared
// inputs; agreement must be exact.
inline ToyProtocolResult run_toy_protocol(const StackConfig& config, const Ring& ring,
                                          const CliffordCircuit& target,
                                          const CliffordCircuit& input_prep) {
  Stack st = build_stack(config, ring);
  const int nb = st.n_blocks();
  for (int b = 0; b < nb; ++b)
    require(st.block(b).code.code.k == 1,
            "toy protocol blocks must encode a single logical qubit; block ", b, " has k=",
            st.block(b).code.code.k);

  // party-locality of the input preparation
  for (const CliffordOp& op : input_prep) {
    require(int(op.sites.size()) == gate_arity(op.gate), "input gate ", gate_name(op.gate),
            " has the wrong arity");
    for (int b : op.sites) require(b >= 0 && b < nb, "input gate touches block ", b);
    for (size_t i = 1; i < op.sites.size(); ++i)
      require(st.block(op.sites[i]).party == st.block(op.sites[0]).party,
              "input preparation gate spans both parties");
  }

  // translation plan: home -> center for every block, the transversal word,
  // then center -> the block's output pole
  std::vector<CliffordCircuit> horiz(static_cast<size_t>(nb)), vert(static_cast<size_t>(nb));
  Stack cursor = st;
  for (int b = 0; b < nb; ++b) {
    TranslationStep t = translate_circuit(cursor, b, TranslateDirection::center_horizontal);
    horiz[size_t(b)] = t.circuit;
    cursor = std::move(t.moved);
  }
  CliffordCircuit word_circ = transversal_logical(cursor, target);
  for (int b = 0; b < nb; ++b) {
    TranslateDirection dir = st.block(b).output == Half::N ? TranslateDirection::north
                                                           : TranslateDirection::south;
    TranslationStep t = translate_circuit(cursor, b, dir);
    vert[size_t(b)] = t.circuit;
    cursor = std::move(t.moved);
  }

  CliffordCircuit bulk;
  for (int b = 0; b < nb; ++b) bulk.insert(bulk.end(), horiz[size_t(b)].begin(), horiz[size_t(b)].end());
  bulk.insert(bulk.end(), word_circ.begin(), word_circ.end());
  for (int b = 0; b < nb; ++b) bulk.insert(bulk.end(), vert[size_t(b)].begin(), vert[size_t(b)].end());

  ToyProtocolResult res;
  for (int b = 0; b < nb; ++b) {
    res.horizontal_spread = std::max(res.horizontal_spread, circuit_spread(st, horiz[size_t(b)]));
    CliffordCircuit journey = horiz[size_t(b)];
    journey.insert(journey.end(), vert[size_t(b)].begin(), vert[size_t(b)].end());
    res.journey_spread = std::max(res.journey_spread, circuit_spread(st, journey));
  }
  res.transversal_spread = circuit_spread(st, word_circ);
  require(res.horizontal_spread < pi / 8, "horizontal translation spread ",
          res.horizontal_spread, " reaches 2*pi/16");
  require(res.journey_spread < pi / 4, "translation journey spread ", res.journey_spread,
          " reaches 2*pi/8");
  require(res.transversal_spread == 0.0, "transversal circuit is not slot-local");

  QuarteredCircuit qc = quarter_clifford(st, bulk);

  // execute with incremental transcript auditing
  Transcript tr;
  tr.n_sites = ring.n_sites;
  Tableau tab = st.state;
  auto emit = [&](std::string party, std::string opname, std::vector<int> sites,
                  bool exchange = false) {
    tr.events.push_back({std::move(party), std::move(opname), std::move(sites), {}, exchange});
    detail::check_transcript_prefix(tr, ring, false);
  };

  // input preparation on the io ports, grouped per party (the two groups act
  // on disjoint qubits, so grouping preserves the order)
  for (const char* who : {"Alice", "Bob"}) {
    CliffordCircuit prep;
    std::set<int> sites;
    for (const CliffordOp& op : input_prep) {
      if (st.block(op.sites[0]).party != who) continue;
      CliffordOp mapped = op;
      for (size_t i = 0; i < mapped.sites.size(); ++i) {
        sites.insert(st.block(mapped.sites[i]).io_slot);
        mapped.sites[i] = st.io_qubit[size_t(mapped.sites[i])];
      }
      prep.push_back(std::move(mapped));
    }
    if (prep.empty()) continue;
    emit(who, "prepare inputs", std::vector<int>(sites.begin(), sites.end()));
    tab = apply_circuit(tab, prep);
  }

  // encodings at the home layout
  for (int b = 0; b < nb; ++b) {
    std::vector<int> sites;
    CliffordCircuit g = detail::logical_swap_gadget(st, st.leg_slot[size_t(b)], b,
                                                    party_half(st.block(b).party), sites);
    emit(st.block(b).party, detail::str("encode block ", b), sites);
    tab = apply_circuit(tab, g);
  }

  auto piece_event = [&](const char* who, const char* opname, const CliffordCircuit& c) {
    std::set<int> sites;
    for (const CliffordOp& op : c)
      for (int q : op.sites) sites.insert(st.qubits[size_t(q)].slot);
    emit(who, opname, std::vector<int>(sites.begin(), sites.end()));
    tab = apply_circuit(tab, c);
  };
  piece_event("Bob", "apply U_E", qc.e);
  piece_event("Alice", "apply U_W", qc.w);
  emit("both", "exchange quarters", {}, true);
  piece_event("Bob", "apply U_S", qc.s);
  piece_event("Alice", "apply U_N", qc.n);

  // decodings at the translated layout
  for (int b = 0; b < nb; ++b) {
    std::vector<int> sites;
    CliffordCircuit g = detail::logical_swap_gadget(st, cursor.leg_slot[size_t(b)], b,
                                                    st.block(b).output, sites);
    emit(st.block(b).party, detail::str("decode block ", b), sites);
    tab = apply_circuit(tab, g);
  }
  audit_transcript(tr, ring);

  // output-side geometry invariants: recoverable on the output half, never on
  // the opposite one
  for (int b = 0; b < nb; ++b) {
    const StabilizerCode& code = st.block(b).code.code;
    std::vector<int> on, off;
    for (int i = 0; i < code.n; ++i) {
      int slot = cursor.leg_slot[size_t(b)][size_t(i)];
      if (in_half(ring, slot, st.block(b).output)) on.push_back(i);
      if (in_half(ring, slot, opposite_half(st.block(b).output))) off.push_back(i);
    }
    require(recoverable(code, on, st.block(b).code.marked_logical), "block ", b,
            ": output logical is not recoverable on the ", half_name(st.block(b).output),
            " half");
    require(!recoverable(code, off, st.block(b).code.marked_logical), "block ", b,
            ": output logical leaks to the ",
            half_name(opposite_half(st.block(b).output)), " half");
  }

  // verdict: every output Pauli expectation must match the target acting on
  // the prepared inputs
  CliffordCircuit logical_full = input_prep;
  logical_full.insert(logical_full.end(), target.begin(), target.end());
  CliffordCircuit logical_inv = inverse_circuit(logical_full);

  res.exact_match = true;
  const std::uint64_t n_paulis = std::uint64_t(1) << (2 * nb);
  for (std::uint64_t m = 0; m < n_paulis; ++m) {
    PauliVec label(nb);
    PauliVec lifted(st.n_qubits());
    for (int b = 0; b < nb; ++b) {
      const int d = int((m >> (2 * b)) & 3);  // 0:I 1:X 2:Z 3:Y
      if (d == 0) continue;
      const int io = st.io_qubit[size_t(b)];
      if (d == 1 || d == 3) { label.x[size_t(b)] = 1; lifted.x[size_t(io)] = 1; }
      if (d == 2 || d == 3) { label.z[size_t(b)] = 1; lifted.z[size_t(io)] = 1; }
      if (d == 3) {
        label.phase = (label.phase + 1) & 3;
        lifted.phase = (lifted.phase + 1) & 3;
      }
    }
    PauliVec back = conjugate_pauli(label, logical_inv);
    bool z_only = true;
    for (int b = 0; b < nb; ++b)
      if (back.x[size_t(b)]) { z_only = false; break; }
    const int want = z_only ? back.sign() : 0;
    const int got = pauli_expectation(tab, lifted);
    if (got != want) {
      res.exact_match = false;
      res.mismatch = detail::str("output expectation of ", pauli_to_string(label), ": expected ",
                         want, ", got ", got);
      break;
    }
  }

  res.transcript = std::move(tr);
  res.final_state = std::move(tab);
  res.output_qubits = st.io_qubit;
  return res;
}

}  // namespace nlqc
