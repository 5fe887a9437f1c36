// SPDX-License-Identifier: Apache-2.0
// Code isometries from correlation data: construction, polishing, unitary
// reconstruction, and the composed error certificate.
#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "nlqc/common.hpp"
#include "nlqc/dense.hpp"

namespace nlqc {

// One factor of a correlator query: a dictionary label, a Heisenberg time,
// and an optional adjoint flag.
struct LabeledOperator {
  std::string label;
  double time = 0.0;
  bool dagger = false;
};

// Correlation-function access to a physical system. evaluator returns
// <0| O_1(t_1) ... O_k(t_k) |0> up to the declared error eta; queries longer
// than max_products are refused. image() exposes the exact excitation
// vectors f_i|0>, so an isometry frame can be anchored to the oracle;
// excitations[i] names image i for correlator queries.
struct CorrelationOracle {
  std::function<cx(const std::vector<LabeledOperator>&)> evaluator;
  double eta = 0.0;
  int max_products = 4;
  std::vector<std::string> excitations;
  std::function<Vec(int)> image;
};

namespace detail {

// Exact operator norm via the Gram matrix of the smaller side.
inline double op_norm_exact(const Mat& m) {
  if (m.rows() == 0 || m.cols() == 0) return 0.0;
  Mat g = (m.cols() <= m.rows()) ? Mat(m.adjoint() * m) : Mat(m * m.adjoint());
  g = (g + g.adjoint()) / 2.0;
  Eigen::SelfAdjointEigenSolver<Mat> es(g);
  require(es.info() == Eigen::Success, "eigensolver failed while taking an operator norm");
  return std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
}

inline std::string query_key(const std::vector<LabeledOperator>& ops) {
  std::string key;
  for (const LabeledOperator& o : ops) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "@%.17g%s|", o.time, o.dagger ? "*" : "");
    key += o.label;
    key += buf;
  }
  return key;
}

// Hermitian power of a positive matrix, used for (V^dag V)^{+-1/2}.
inline Mat psd_power(const Mat& g, double power, const char* who) {
  Mat h = (g + g.adjoint()) / 2.0;
  Eigen::SelfAdjointEigenSolver<Mat> es(h);
  require(es.info() == Eigen::Success, who, ": eigensolver failed");
  Eigen::VectorXd ev = es.eigenvalues();
  require(ev.minCoeff() > tol_singular, who, ": matrix is numerically singular (eigenvalue ",
          ev.minCoeff(), ")");
  Eigen::VectorXd powered = ev.array().pow(power);
  return es.eigenvectors() * powered.cast<cx>().asDiagonal() * es.eigenvectors().adjoint();
}

}  // namespace detail

// Desk-scale oracle backed by dense operators. dictionary names every
// operator the evaluator understands; excitations lists the labels whose
// images f_i|0> span the code space, in logical basis order. With eta > 0
// each distinct query gets an additive complex Gaussian kick of scale eta/3,
// frozen by seed, so repeated queries agree and outputs stay inside the
// declared eta budget with margin.
inline CorrelationOracle make_dense_oracle(std::map<std::string, Mat> dictionary, Vec zero,
                                           std::vector<std::string> excitations, double eta,
                                           std::uint64_t seed,
                                           std::function<Mat(double)> evolve = {}) {
  require(eta >= 0.0, "oracle error eta must be nonnegative, got ", eta);
  require(zero.size() > 0, "oracle needs a reference state");
  require(std::abs(zero.norm() - 1.0) <= tol_input, "oracle reference state is not normalized");
  const std::int64_t d = zero.size();
  for (const auto& [label, op] : dictionary)
    require(op.rows() == d && op.cols() == d, "oracle operator ", label, " is ", op.rows(), "x",
            op.cols(), ", expected ", d, "x", d);
  require(!excitations.empty(), "oracle needs at least one excitation label");
  for (const std::string& label : excitations)
    require(dictionary.count(label) > 0, "excitation label ", label, " is not in the dictionary");

  auto dict = std::make_shared<const std::map<std::string, Mat>>(std::move(dictionary));
  auto ref = std::make_shared<const Vec>(std::move(zero));
  auto names = std::make_shared<const std::vector<std::string>>(std::move(excitations));

  CorrelationOracle oracle;
  oracle.eta = eta;
  oracle.max_products = 4;
  oracle.excitations = *names;
  const int max_products = oracle.max_products;
  oracle.evaluator = [dict, ref, eta, seed, evolve,
                      max_products](const std::vector<LabeledOperator>& ops) -> cx {
    require(int(ops.size()) <= max_products, "oracle query of length ", ops.size(),
            " exceeds the declared maximum ", max_products);
    Vec acc = *ref;
    for (auto it = ops.rbegin(); it != ops.rend(); ++it) {
      auto found = dict->find(it->label);
      require(found != dict->end(), "oracle query names unknown operator ", it->label);
      Mat op = found->second;
      if (it->time != 0.0) {
        require(bool(evolve), "oracle has no time evolution but the query asks for t = ", it->time);
        Mat u = evolve(it->time);
        op = Mat(u.adjoint() * op * u);
      }
      if (it->dagger) op = op.adjoint().eval();
      acc = op * acc;
    }
    cx value = ref->dot(acc);
    if (eta > 0.0) {
      Rng rng(seed ^ fnv1a(detail::query_key(ops)));
      value += randn_cx(rng) * (eta / 3.0);
    }
    return value;
  };
  oracle.image = [dict, ref, names](int i) -> Vec {
    require(i >= 0 && i < int(names->size()), "excitation index ", i, " is out of range");
    return dict->at((*names)[size_t(i)]) * *ref;
  };
  return oracle;
}

// An (approximate) isometry from the logical space into the physical space,
// together with its recorded defect and the excitation labels it was built
// from. defect always equals ||V^dag V - 1|| recomputed from v.
struct CodeIsometry {
  Mat v;
  double defect = 0.0;
  std::vector<std::string> labels;
};

inline double isometry_defect(const Mat& v) {
  Mat g = v.adjoint() * v;
  return detail::op_norm_exact(g - Mat::Identity(g.rows(), g.cols()));
}

namespace detail {

inline CodeIsometry finish_isometry(Mat v, std::vector<std::string> labels) {
  CodeIsometry out;
  out.defect = isometry_defect(v);
  require(out.defect <= 0.5, "excitation images are linearly dependent beyond tolerance (defect ",
          out.defect, "), construction rejected");
  out.v = std::move(v);
  out.labels = std::move(labels);
  return out;
}

}  // namespace detail

// Dense path: V = sum_i f_i|0><i|, with the time evolution composed on the
// left when given, so V = U_t sum_i |i><i| in the evolved frame.
inline CodeIsometry build_isometry(const std::vector<Mat>& excitations, const Vec& zero,
                                   int logical_dim, const Mat& evolve = Mat()) {
  require(int(excitations.size()) == logical_dim, "logical dimension ", logical_dim,
          " does not match the ", excitations.size(), " excitation operators");
  const std::int64_t d = zero.size();
  require(d > 0, "reference state is empty");
  Mat v(d, logical_dim);
  for (int i = 0; i < logical_dim; ++i) {
    const Mat& f = excitations[size_t(i)];
    require(f.rows() == d && f.cols() == d, "excitation ", i, " is ", f.rows(), "x", f.cols(),
            ", expected ", d, "x", d);
    v.col(i) = f * zero;
  }
  if (evolve.size() > 0) {
    require(evolve.rows() == d && evolve.cols() == d, "time evolution is ", evolve.rows(), "x",
            evolve.cols(), ", expected ", d, "x", d);
    v = evolve * v;
  }
  std::vector<std::string> labels(static_cast<size_t>(logical_dim));
  for (int i = 0; i < logical_dim; ++i) labels[size_t(i)] = "E" + std::to_string(i);
  return detail::finish_isometry(std::move(v), std::move(labels));
}

// Oracle path: measure the Gram matrix of the excitation images through
// length-2 correlators, then rebuild the columns in the oracle's exact frame
// so that V^dag V reproduces the measured Gram matrix. With an exact oracle
// this coincides with the dense path.
inline CodeIsometry build_isometry(const CorrelationOracle& oracle, int logical_dim) {
  require(bool(oracle.evaluator), "oracle has no evaluator");
  require(bool(oracle.image), "oracle exposes no excitation images");
  const int n = int(oracle.excitations.size());
  require(n == logical_dim, "logical dimension ", logical_dim, " does not match the ", n,
          " oracle excitations");
  Mat gram(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      gram(i, j) = oracle.evaluator({{oracle.excitations[size_t(i)], 0.0, true},
                                     {oracle.excitations[size_t(j)], 0.0, false}});
  gram = (gram + gram.adjoint()) / 2.0;
  double measured = detail::op_norm_exact(gram - Mat::Identity(n, n));
  require(measured <= 0.5, "excitation images are linearly dependent beyond tolerance (defect ",
          measured, "), construction rejected");

  Vec first = oracle.image(0);
  Mat frame(first.size(), n);
  frame.col(0) = first;
  for (int i = 1; i < n; ++i) frame.col(i) = oracle.image(i);
  Mat g0 = frame.adjoint() * frame;
  Mat v = frame * detail::psd_power(g0, -0.5, "build_isometry") *
          detail::psd_power(gram, 0.5, "build_isometry");
  return detail::finish_isometry(std::move(v), oracle.excitations);
}

// Measured estimate of ||V O_L - O_P V|| through correlators of length <= 4:
// expand (V O_L - O_P V)^dag (V O_L - O_P V) in the excitation basis and take
// the top eigenvalue. Exact oracle: zero. Declared error eta: each correlator
// wobbles by O(eta), the squared norm inherits it, and the estimate scales as
// sqrt(eta) -- the Cauchy-Schwarz loss in the push-through lemma.
inline double pushthrough_defect(const CorrelationOracle& oracle, const Mat& o_logical,
                                 const std::string& physical_label) {
  require(bool(oracle.evaluator), "oracle has no evaluator");
  const int n = int(oracle.excitations.size());
  require(o_logical.rows() == n && o_logical.cols() == n, "logical operator is ",
          o_logical.rows(), "x", o_logical.cols(), ", expected ", n, "x", n);
  auto corr = [&](bool p_dag, bool p, int i, int j) {
    std::vector<LabeledOperator> ops;
    ops.push_back({oracle.excitations[size_t(i)], 0.0, true});
    if (p_dag) ops.push_back({physical_label, 0.0, true});
    if (p) ops.push_back({physical_label, 0.0, false});
    ops.push_back({oracle.excitations[size_t(j)], 0.0, false});
    return oracle.evaluator(ops);
  };
  Mat gram(n, n), mid(n, n), quad(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      gram(i, j) = corr(false, false, i, j);
      mid(i, j) = corr(false, true, i, j);
      quad(i, j) = corr(true, true, i, j);
    }
  Mat k = o_logical.adjoint() * gram * o_logical - o_logical.adjoint() * mid -
          mid.adjoint() * o_logical + quad;
  k = (k + k.adjoint()) / 2.0;
  Eigen::SelfAdjointEigenSolver<Mat> es(k);
  require(es.info() == Eigen::Success, "eigensolver failed in pushthrough_defect");
  return std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
}

// V (V^dag V)^{-1/2}: the closest exact isometry. Moves the input by at most
// twice its defect, which is checked with that explicit constant.
inline CodeIsometry polish_isometry(const CodeIsometry& vin) {
  double defect = isometry_defect(vin.v);
  require(defect < 0.5, "polish_isometry: defect ", defect, " risks singularity, rejected");
  Mat g = vin.v.adjoint() * vin.v;
  CodeIsometry out;
  out.v = vin.v * detail::psd_power(g, -0.5, "polish_isometry");
  out.defect = isometry_defect(out.v);
  out.labels = vin.labels;
  require(out.defect <= 1e-12, "polish_isometry failed to reach an exact isometry (defect ",
          out.defect, ")");
  double moved = detail::op_norm_exact(out.v - vin.v);
  require(moved <= 2.0 * defect + tol_output, "polish_isometry moved the input by ", moved,
          ", more than twice the defect ", defect);
  return out;
}

// SVD frame O = sum_i lambda_i |i'><i|; each lambda is normalized to phase
// and vanishing directions are completed with 1, giving a unitary in the
// same frame. SVD magnitudes are nonnegative, so signs ride in the frames.
inline DenseOperator reconstruct_unitary(const DenseOperator& o) {
  Eigen::BDCSVD<Mat> svd(o.entries, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const auto& sing = svd.singularValues();
  Eigen::VectorXd lam(sing.size());
  for (Eigen::Index i = 0; i < sing.size(); ++i)
    lam(i) = sing(i) < tol_singular ? 1.0 : sing(i) / std::abs(sing(i));
  Mat u = svd.matrixU() * lam.cast<cx>().asDiagonal() * svd.matrixV().adjoint();
  double defect = detail::op_norm_exact(Mat(u.adjoint() * u) - Mat::Identity(u.rows(), u.cols()));
  require(defect <= tol_output, "reconstructed operator is not unitary (defect ", defect, ")");
  return DenseOperator(o.support, o.dims, std::move(u));
}

// 2 ||V - W||: upper bound on the diamond distance between the two isometry
// channels. Deliberately loose under a global phase, where the channels
// coincide but the bound does not vanish.
inline double isometry_channel_bound(const Mat& v, const Mat& w) {
  require(v.rows() == w.rows() && v.cols() == w.cols(), "isometry shapes differ: ", v.rows(), "x",
          v.cols(), " vs ", w.rows(), "x", w.cols());
  double dv = isometry_defect(v);
  require(dv <= 1e-8, "first argument is not an isometry (defect ", dv, ")");
  double dw = isometry_defect(w);
  require(dw <= 1e-8, "second argument is not an isometry (defect ", dw, ")");
  return 2.0 * detail::op_norm_exact(v - w);
}

// Physical inputs for the parametric form of the certificate. The three
// c-constants are inputs; 1 is the only default.
struct PhysicalParams {
  double g_newton = 0.0;
  double delta = 0.0;
  double a = 0.0;
  double b = 0.0;
  double delta_tau = 0.0;
  double c_cft = 1.0;
  double c_sim = 1.0;
  double c_spread = 1.0;
};

struct ErrorCertificate {
  double eps_enc = 0.0;
  double eps_rec = 0.0;
  double eps_dyn = 0.0;
  double eps_spread = 0.0;
  double total = 0.0;  // additive form: the sum of the four terms
  std::optional<PhysicalParams> params;
  std::optional<double> parametric;  // c_cft sqrt(G_N) + c_sim sqrt(delta) + c_spread a e^{-b dtau}
};

inline ErrorCertificate compose_certificate(double eps_enc, double eps_rec, double eps_dyn,
                                            double eps_spread,
                                            std::optional<PhysicalParams> params = std::nullopt) {
  require(eps_enc >= 0.0 && eps_rec >= 0.0 && eps_dyn >= 0.0 && eps_spread >= 0.0,
          "certificate terms must be nonnegative, got (", eps_enc, ", ", eps_rec, ", ", eps_dyn,
          ", ", eps_spread, ")");
  ErrorCertificate cert;
  cert.eps_enc = eps_enc;
  cert.eps_rec = eps_rec;
  cert.eps_dyn = eps_dyn;
  cert.eps_spread = eps_spread;
  cert.total = eps_enc + eps_rec + eps_dyn + eps_spread;
  if (params) {
    require(params->g_newton >= 0.0 && params->delta >= 0.0 && params->a >= 0.0,
            "physical parameters G_N, delta, a must be nonnegative");
    cert.params = params;
    cert.parametric = params->c_cft * std::sqrt(params->g_newton) +
                      params->c_sim * std::sqrt(params->delta) +
                      params->c_spread * params->a * std::exp(-params->b * params->delta_tau);
  }
  return cert;
}

// Generalized Paulis on an N-level logical space: X|j> = |j+1 mod N> and
// Z|j> = exp(2 pi i j / N)|j>.
inline Mat shift_matrix(int n) {
  require(n >= 1, "shift matrix needs a positive dimension");
  Mat x = Mat::Zero(n, n);
  for (int j = 0; j < n; ++j) x((j + 1) % n, j) = 1.0;
  return x;
}

inline Mat clock_matrix(int n) {
  require(n >= 1, "clock matrix needs a positive dimension");
  Mat z = Mat::Zero(n, n);
  for (int j = 0; j < n; ++j) z(j, j) = std::exp(cx(0.0, 2.0 * pi * j / n));
  return z;
}

// Least-squares slope of log y against log x, for scaling sweeps.
inline double loglog_slope(const std::vector<double>& xs, const std::vector<double>& ys) {
  require(xs.size() == ys.size() && xs.size() >= 2,
          "log-log slope needs matched samples, at least two");
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (size_t i = 0; i < xs.size(); ++i) {
    require(xs[i] > 0.0 && ys[i] > 0.0, "log-log slope needs positive samples");
    double lx = std::log(xs[i]), ly = std::log(ys[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  double n = double(xs.size());
  double var = sxx - sx * sx / n;
  require(var > 1e-18, "log-log slope needs spread in the x samples");
  return (sxy - sx * sy / n) / var;
}

}  // namespace nlqc
