// SPDX-License-Identifier: Apache-2.0
//
// Circular lattice geometry: rings, site angles, regions as arc unions, and
// the compass quarters W/E/N/S.
#pragma once

#include <algorithm>
#include <vector>

#include "nlqc/common.hpp"

namespace nlqc {

struct Ring {
  int n_sites = 0;
  int local_dim = 2;

  // Even n >= 4. The compass quarters are exact site sets whenever n is
  // divisible by 4; for other even n they are defined by interval membership
  // (used by the coarse Hamiltonian paths, where n = 6 appears).
  Ring(int n, int d = 2) : n_sites(n), local_dim(d) {
    require(n >= 4 && n % 2 == 0, "ring needs an even number of sites >= 4, got ", n);
    require(d >= 2, "local dimension must be >= 2");
  }

  double spacing() const { return 2.0 * pi / n_sites; }

  // angle of site k folded into [0, 2pi)
  double site_angle(int k) const {
    int m = ((k % n_sites) + n_sites) % n_sites;
    return 2.0 * pi * m / n_sites;
  }

  // shortest angular distance between two sites, in radians
  double site_distance(int a, int b) const {
    double d = std::abs(site_angle(a) - site_angle(b));
    return std::min(d, 2.0 * pi - d);
  }

  std::vector<int> all_sites() const {
    std::vector<int> s(static_cast<size_t>(n_sites));
    for (int i = 0; i < n_sites; ++i) s[size_t(i)] = i;
    return s;
  }

  std::vector<int> dims() const { return std::vector<int>(size_t(n_sites), local_dim); }
};

// A set of ring sites; canonical form is the sorted site list, with the
// maximal-arc view computed on demand.
struct Region {
  std::vector<int> sites;  // sorted, distinct

  Region() = default;
  explicit Region(std::vector<int> s) : sites(std::move(s)) {
    std::sort(sites.begin(), sites.end());
    sites.erase(std::unique(sites.begin(), sites.end()), sites.end());
  }

  bool contains(int site) const { return std::binary_search(sites.begin(), sites.end(), site); }
  bool empty() const { return sites.empty(); }
  int size() const { return int(sites.size()); }

  // Maximal arcs [start, start+len) modulo n, sorted by start.
  std::vector<std::pair<int, int>> arcs(const Ring& ring) const {
    std::vector<std::pair<int, int>> out;
    if (sites.empty()) return out;
    int n = ring.n_sites;
    for (int s : sites) require(s >= 0 && s < n, "site ", s, " outside ring of ", n);
    if (int(sites.size()) == n) return {{0, n}};
    std::vector<bool> in(size_t(n), false);
    for (int s : sites) in[size_t(s)] = true;
    for (int s = 0; s < n; ++s) {
      if (!in[size_t(s)] || in[size_t((s + n - 1) % n)]) continue;  // arc starts here
      int len = 0;
      while (in[size_t((s + len) % n)]) ++len;
      out.push_back({s, len});
    }
    return out;
  }

  Region complement(const Ring& ring) const {
    std::vector<int> out;
    for (int s = 0; s < ring.n_sites; ++s)
      if (!contains(s)) out.push_back(s);
    return Region(std::move(out));
  }

  Region unite(const Region& other) const {
    std::vector<int> out = sites;
    out.insert(out.end(), other.sites.begin(), other.sites.end());
    return Region(std::move(out));
  }

  Region intersect(const Region& other) const {
    std::vector<int> out;
    std::set_intersection(sites.begin(), sites.end(), other.sites.begin(), other.sites.end(),
                          std::back_inserter(out));
    return Region(std::move(out));
  }
};

enum class Half { W, E, N, S };

inline const char* half_name(Half h) {
  switch (h) {
    case Half::W: return "W";
    case Half::E: return "E";
    case Half::N: return "N";
    case Half::S: return "S";
  }
  return "?";
}

inline Half opposite_half(Half h) {
  switch (h) {
    case Half::W: return Half::E;
    case Half::E: return Half::W;
    case Half::N: return Half::S;
    case Half::S: return Half::N;
  }
  return Half::W;
}

// Interval membership per the compass convention: E = [0,pi), W = [pi,2pi),
// N = [-pi/2,pi/2), S = [pi/2,3pi/2).
inline bool in_half(const Ring& ring, int site, Half h) {
  double th = ring.site_angle(site);
  switch (h) {
    case Half::E: return th < pi;
    case Half::W: return th >= pi;
    case Half::N: return th < pi / 2 || th >= 3 * pi / 2;
    case Half::S: return th >= pi / 2 && th < 3 * pi / 2;
  }
  return false;
}

inline Region half_region(const Ring& ring, Half h) {
  std::vector<int> s;
  for (int k = 0; k < ring.n_sites; ++k)
    if (in_half(ring, k, h)) s.push_back(k);
  return Region(std::move(s));
}

struct QuarterRegions {
  Region w, e, n, s;
  const Region& of(Half h) const {
    switch (h) {
      case Half::W: return w;
      case Half::E: return e;
      case Half::N: return n;
      case Half::S: return s;
    }
    return w;
  }
};

inline QuarterRegions quarter_regions(const Ring& ring) {
  return {half_region(ring, Half::W), half_region(ring, Half::E), half_region(ring, Half::N),
          half_region(ring, Half::S)};
}

// Minimum pairwise angular distance between two site sets; 0 on overlap.
inline double region_distance(const Ring& ring, const Region& r1, const Region& r2) {
  require(!r1.empty() && !r2.empty(), "region_distance of an empty region");
  double best = 2 * pi;
  for (int a : r1.sites)
    for (int b : r2.sites) best = std::min(best, ring.site_distance(a, b));
  return best;
}

}  // namespace nlqc
