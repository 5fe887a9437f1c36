// SPDX-License-Identifier: Apache-2.0
//
// Spread measurement: exact operator spread of ring unitaries, light-cone
// (Lieb-Robinson) profile fitting, and the lattice simulation-condition
// checker (correlation error, support containment, light cone).
#pragma once

#include <Eigen/Eigenvalues>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "nlqc/common.hpp"
#include "nlqc/dense.hpp"
#include "nlqc/model.hpp"
#include "nlqc/ring.hpp"

namespace nlqc {

struct LightConeFit {
  double a = 0;         // prefactor
  double b = 0;         // decay rate per radian
  double v = 0;         // velocity, radians per unit time
  double residual = 0;  // max relative violation of the bound; <= 0 after inflation

  double bound(double d, double t) const { return a * std::exp(-b * (d - v * t)); }
};

namespace detail {

// Largest-magnitude entry test with a norm fallback for the ambiguous zone.
inline bool noncommuting(const Mat& comm, double tol) {
  double peak = comm.cwiseAbs().maxCoeff();
  if (peak * double(comm.rows()) <= tol) return false;
  if (peak > 1e-6) return true;
  return op_norm_estimate(comm) > tol;
}

}  // namespace detail

// Smallest s such that conjugation by U keeps every single-site basis
// operator supported within angular distance s of its site: the maximum
// distance at which a conjugated probe fails to commute with a single-site
// basis operator. Returned in radians.
inline double exact_spread(const DenseOperator& u, const Ring& ring) {
  require(int(u.support.size()) == ring.n_sites, "unitary must cover the full ring");
  std::int64_t dim = u.dim();
  double udef = (u.entries.adjoint() * u.entries - Mat::Identity(dim, dim)).cwiseAbs().maxCoeff();
  require(udef <= 1e-9, "exact_spread needs a unitary input (defect ", udef, ")");
  require(ring.local_dim == 2, "probe basis implemented for qubits");
  const Mat probes[3] = {pauli_x(), pauli_y(), pauli_z()};
  double spread = 0.0;
  for (int phi = 0; phi < ring.n_sites; ++phi) {
    for (const Mat& p : probes) {
      Mat m = u.entries;
      site_mult_right(m, p, phi, u.dims);   // U P
      m = m * u.entries.adjoint();          // U P U^dag
      for (int psi = 0; psi < ring.n_sites; ++psi) {
        double d = ring.site_distance(phi, psi);
        if (d <= spread) continue;
        for (const Mat& q : probes) {
          Mat c = m;
          site_mult_right(c, q, psi, u.dims);
          Mat c2 = m;
          site_mult_left(c2, q, psi, u.dims);
          c -= c2;
          if (detail::noncommuting(c, 1e-10)) {
            spread = std::max(spread, d);
            break;
          }
        }
      }
    }
  }
  return spread;
}

// Commutator-ratio profile ||[O(t), O']|| / (||O|| ||O'||) of a Hamiltonian
// model over a (time, distance) grid, fitted to a * exp(-b (d - v t)) and
// inflated so the bound dominates every sample.
inline LightConeFit lr_profile(const ModelSpec& spec, const Ring& ring,
                               const std::vector<double>& times,
                               const std::vector<int>& distances) {
  const auto* hp = std::get_if<LocalHamiltonian>(&spec);
  require(hp != nullptr, "lr_profile needs the Hamiltonian model variant");
  validate_model(spec, ring);
  {
    std::vector<int> dd = distances;
    std::sort(dd.begin(), dd.end());
    dd.erase(std::unique(dd.begin(), dd.end()), dd.end());
    require(dd.size() >= 3, "light-cone grid too small: fewer than 3 distinct distances");
    for (int d : dd) require(d >= 1 && d <= ring.n_sites / 2, "distance ", d, " not on the ring");
  }
  std::int64_t dim = checked_product(ring.dims());
  require(dim <= (1 << 12), "lr_profile dense path capped at 2^12 dimensions");

  Mat h = hamiltonian_matrix(*hp, ring);
  Eigen::SelfAdjointEigenSolver<Mat> es(h);
  const Mat& vmat = es.eigenvectors();
  const Eigen::VectorXd& ev = es.eigenvalues();

  const Mat probes[2] = {pauli_x(), pauli_z()};
  struct Sample {
    double t, d, r;
  };
  std::vector<Sample> samples;
  for (double t : times) {
    Vec ph(dim);
    for (std::int64_t i = 0; i < dim; ++i) ph(i) = std::exp(cx(0, -t * ev(i)));
    Mat u = vmat * ph.asDiagonal() * vmat.adjoint();
    for (const Mat& p : probes) {
      Mat m = u.adjoint();
      site_mult_right(m, p, 0, ring.dims());
      m = m * u;  // O(t) in the Heisenberg picture, probe at site 0
      for (int d : distances) {
        for (const Mat& q : probes) {
          Mat c = m;
          site_mult_right(c, q, d, ring.dims());
          Mat c2 = m;
          site_mult_left(c2, q, d, ring.dims());
          c -= c2;
          double nrm = op_norm_estimate(c);
          samples.push_back({t, d * ring.spacing(), nrm});
        }
      }
    }
  }

  LightConeFit fit;
  std::vector<Sample> live;
  for (const auto& s : samples)
    if (s.r > 1e-13) live.push_back(s);
  if (live.empty()) {
    // disconnected or trivial dynamics: report the floor
    fit.a = 1e-12;
    fit.b = 1.0;
    fit.v = 1.0;
    fit.residual = 0.0;
    return fit;
  }
  {
    std::vector<double> tt;
    for (const auto& s : live) tt.push_back(s.t);
    std::sort(tt.begin(), tt.end());
    tt.erase(std::unique(tt.begin(), tt.end(),
                         [](double x, double y) { return std::abs(x - y) < 1e-12; }),
             tt.end());
    require(tt.size() >= 2, "light-cone grid too small: fewer than 2 distinct times with signal");
  }
  Eigen::MatrixXd design(live.size(), 3);
  Eigen::VectorXd rhs(live.size());
  for (size_t i = 0; i < live.size(); ++i) {
    design(Eigen::Index(i), 0) = 1.0;
    design(Eigen::Index(i), 1) = live[i].d;
    design(Eigen::Index(i), 2) = live[i].t;
    rhs(Eigen::Index(i)) = std::log(live[i].r);
  }
  Eigen::VectorXd coef = design.colPivHouseholderQr().solve(rhs);
  fit.a = std::exp(coef(0));
  fit.b = -coef(1);
  fit.v = fit.b > 0 ? coef(2) / fit.b : 0.0;
  require(fit.a > 0 && fit.b > 0 && fit.v > 0,
          "light-cone fit produced non-physical parameters (a=", fit.a, ", b=", fit.b,
          ", v=", fit.v, ")");
  double worst = 0.0;
  for (const auto& s : samples) worst = std::max(worst, s.r / fit.bound(s.d, s.t));
  if (worst > 1.0) fit.a *= worst;
  double resid = -1.0;
  for (const auto& s : samples) resid = std::max(resid, (s.r - fit.bound(s.d, s.t)) / fit.bound(s.d, s.t));
  fit.residual = resid;
  return fit;
}

// --- simulation-condition checker -------------------------------------------

struct DictionaryEntry {
  std::string label;
  DenseOperator op;         // candidate-side operator
  Region declared_support;  // where the entry claims to act
};

struct SimulationCandidate {
  Ring ring;
  ModelSpec model;
  StateVector omega;  // state in which correlators are evaluated
  std::vector<DictionaryEntry> dictionary;
};

// maps (labels, times) of an operator product to the reference correlator
using CorrelatorOracle =
    std::function<cx(const std::vector<std::string>&, const std::vector<double>&)>;

struct SimulationCheckReport {
  double delta_measured = 0;
  bool support_ok = true;
  std::vector<std::string> support_violations;
  LightConeFit lightcone;
  std::vector<double> times_checked;
  int products_checked = 0;
  bool passed = false;
};

// Sites of op.support on which the operator acts nontrivially, decided by
// comparing against its single-site twirl.
inline std::vector<int> actual_support(const DenseOperator& op) {
  std::vector<int> out;
  for (int f : op.support) {
    DenseOperator t = twirl(op, {f});
    if ((t.entries - op.entries).cwiseAbs().maxCoeff() > 1e-10) out.push_back(f);
  }
  return out;
}

inline SimulationCheckReport check_simulation_conditions(
    const SimulationCandidate& cand, const CorrelatorOracle& reference, double delta,
    double t_horizon, const std::vector<double>& times, int max_product_len,
    const std::vector<int>& lr_distances) {
  require(!cand.dictionary.empty(), "empty operator dictionary");
  require(max_product_len >= 1, "max product length must be >= 1");
  for (double t : times) require(t < t_horizon, "time ", t, " is not below the horizon T=", t_horizon);

  SimulationCheckReport rep;
  rep.times_checked = times;

  // (i) support containment
  for (const auto& entry : cand.dictionary) {
    for (int f : actual_support(entry.op)) {
      if (!entry.declared_support.contains(f)) {
        rep.support_ok = false;
        rep.support_violations.push_back(detail::str("operator '", entry.label,
                                                     "' acts on site ", f,
                                                     " outside its declared region"));
      }
    }
  }

  // (ii) correlator comparison against the reference oracle
  std::int64_t dim = checked_product(cand.ring.dims());
  require(cand.omega.dim() == dim, "omega state does not match the ring");
  std::map<double, Mat> umap;
  auto evolved = [&](const DenseOperator& op, double t) {
    auto it = umap.find(t);
    if (it == umap.end()) {
      ModelSpec at = at_time(std::get<LocalHamiltonian>(cand.model), t);
      it = umap.emplace(t, evolve_model(at, cand.ring).entries).first;
    }
    Mat full = embed(op, cand.ring.dims()).entries;
    return (it->second.adjoint() * full * it->second).eval();  // O(t)
  };
  std::map<std::pair<std::string, double>, Mat> heis;
  std::map<std::string, const DenseOperator*> byname;
  std::map<std::string, double> norms;
  for (const auto& e : cand.dictionary) {
    byname[e.label] = &e.op;
    norms[e.label] = schatten_norm(e.op, Schatten::inf);
    for (double t : times) heis[{e.label, t}] = evolved(e.op, t);
  }

  std::vector<std::string> labels;
  for (const auto& e : cand.dictionary) labels.push_back(e.label);
  double worst = 0.0;
  int count = 0;
  std::vector<int> lidx, tidx;
  std::function<void(int)> recurse = [&](int len) {
    if (int(lidx.size()) == len) {
      std::vector<std::string> ls;
      std::vector<double> ts;
      double nprod = 1.0;
      for (size_t k = 0; k < lidx.size(); ++k) {
        ls.push_back(labels[size_t(lidx[k])]);
        ts.push_back(times[size_t(tidx[k])]);
        nprod *= norms[ls.back()];
      }
      Vec s = cand.omega.amps;
      for (int k = len - 1; k >= 0; --k) s = heis[{ls[size_t(k)], ts[size_t(k)]}] * s;
      cx val = (cand.omega.amps.adjoint() * s).value();
      cx ref = reference(ls, ts);
      if (nprod > 0) worst = std::max(worst, std::abs(val - ref) / nprod);
      ++count;
      return;
    }
    for (int li = 0; li < int(labels.size()); ++li)
      for (int ti = 0; ti < int(times.size()); ++ti) {
        lidx.push_back(li);
        tidx.push_back(ti);
        recurse(len);
        lidx.pop_back();
        tidx.pop_back();
      }
  };
  for (int len = 1; len <= max_product_len; ++len) {
    double planned = std::pow(double(labels.size()) * double(times.size()), len);
    require(double(count) + planned <= 200000.0, "correlator product grid too large");
    recurse(len);
  }
  rep.delta_measured = worst;
  rep.products_checked = count;

  // (iii) light cone of the candidate model
  rep.lightcone = lr_profile(cand.model, cand.ring, times, lr_distances);

  rep.passed = rep.support_ok && rep.delta_measured <= delta && rep.lightcone.a > 0 &&
               rep.lightcone.b > 0 && rep.lightcone.v > 0 && rep.lightcone.residual <= 1e-9;
  return rep;
}

}  // namespace nlqc
