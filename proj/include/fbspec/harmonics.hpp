#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <utility>

#include <nlohmann/json.hpp>

#include "radial.hpp"
#include "rate_model.hpp"

namespace fbspec {

// Laplace–Beltrami eigenvalue of degree k on the unit sphere in R^n.
inline double lambda_k(int n, int k) { return double(n + k - 2) * k; }

inline std::uint64_t binomial(int a, int b) {
  if(b < 0 || a < 0 || b > a) return 0;
  b = std::min(b, a - b);
  std::uint64_t out = 1;
  for(int i = 1; i <= b; ++i) out = out * std::uint64_t(a - b + i) / std::uint64_t(i);
  return out;
}

// Dimension of the degree-k spherical harmonics on the unit sphere in R^n.
inline std::uint64_t dim_k(int n, int k) {
  if(n < 2) throw InputError("dim_k: n must be >= 2");
  if(k < 0) throw InputError("dim_k: k must be >= 0");
  if(k == 0) return 1;
  if(k == 1) return std::uint64_t(n);
  return binomial(n + k - 1, k) - binomial(n + k - 3, k - 2);
}

// Coefficients indexed by (k, l), 0 ≤ l < d_k. T is double for boundary
// data or RadialFn for radial coefficient functions.
template <class T>
struct SphericalSpectrum {
  using Key = std::pair<int, int>;
  int n = 3;
  std::map<Key, T> entries;

  SphericalSpectrum() = default;
  explicit SphericalSpectrum(int dim) : n(dim) {
    if(dim < 2) throw InputError("SphericalSpectrum: n must be >= 2");
  }

  void set(int k, int l, T v) {
    if(k < 0 || l < 0 || std::uint64_t(l) >= dim_k(n, k)) {
      throw InputError("SphericalSpectrum: index (" + std::to_string(k) + ", " + std::to_string(l) +
                       ") outside 0 <= l < d_k");
    }
    entries[{k, l}] = std::move(v);
  }
  const T* find(int k, int l) const {
    auto it = entries.find({k, l});
    return it == entries.end() ? nullptr : &it->second;
  }
  bool empty() const { return entries.empty(); }
};

using ScalarSpectrum = SphericalSpectrum<double>;
using RadialSpectrum = SphericalSpectrum<RadialFn>;

enum class NormSpace { X, X1, Y, Y3 };

namespace detail {

// ℓ^α combination of a stream of nonnegative terms; α = ∞ gives the sup.
struct LAlpha {
  double alpha;
  double acc = 0;
  explicit LAlpha(double a) : alpha(a) {
    if(!(a >= 1)) throw InputError("norm: alpha must lie in [1, inf]");
  }
  void add(double t) {
    if(std::isinf(alpha)) acc = std::max(acc, t);
    else acc += std::pow(t, alpha);
  }
  double value() const { return std::isinf(alpha) ? acc : std::pow(acc, 1.0 / alpha); }
};

inline double sup_abs(const RadialFn& f) { return f.full().cwiseAbs().maxCoeff(); }

// sup |r(R−r) f′| for f stored at scale 0.
inline double sup_weighted_derivative(const RadialFn& f) {
  if(f.scale != 0) throw InputError("norm: radial coefficients must be stored at scale 0");
  const Grid& G = *f.grid;
  Vec rd = G.r_derivative(f.F);
  double m = 0;
  for(int i = 0; i < G.size(); ++i) m = std::max(m, std::abs(G.s[i] * rd[i]));
  return m;
}

}  // namespace detail

inline double norm(const ScalarSpectrum& a, NormSpace space, double alpha) {
  if(space != NormSpace::Y && space != NormSpace::Y3) throw InputError("norm: scalar spectra live in Y or Y3");
  detail::LAlpha acc(alpha);
  for(const auto& [key, v] : a.entries) {
    double w = space == NormSpace::Y3 ? std::pow(1.0 + key.first, 3) : 1.0;
    acc.add(w * std::abs(v));
  }
  return acc.value();
}

// X_α¹ is the sum of the X_α norms of u and of r(R−r)∂_r u.
inline double norm(const RadialSpectrum& u, NormSpace space, double alpha) {
  if(space != NormSpace::X && space != NormSpace::X1) throw InputError("norm: radial spectra live in X or X1");
  detail::LAlpha a0(alpha), a1(alpha);
  for(const auto& kv : u.entries) {
    a0.add(detail::sup_abs(kv.second));
    if(space == NormSpace::X1) a1.add(detail::sup_weighted_derivative(kv.second));
  }
  return space == NormSpace::X1 ? a0.value() + a1.value() : a0.value();
}

inline nlohmann::json to_json(const ScalarSpectrum& a) {
  nlohmann::json j;
  j["n"] = a.n;
  j["entries"] = nlohmann::json::array();
  for(const auto& [key, v] : a.entries) j["entries"].push_back({{"k", key.first}, {"l", key.second}, {"value", v}});
  return j;
}

inline ScalarSpectrum scalar_spectrum_from_json(const nlohmann::json& j) {
  ScalarSpectrum a(j.at("n").get<int>());
  for(const auto& e : j.at("entries")) a.set(e.at("k").get<int>(), e.at("l").get<int>(), e.at("value").get<double>());
  return a;
}

// Radial coefficients are written as their values on the grid abscissae
// (center limit, nodes, outer limit) together with those abscissae.
inline nlohmann::json to_json(const RadialSpectrum& u) {
  nlohmann::json j;
  j["n"] = u.n;
  j["entries"] = nlohmann::json::array();
  for(const auto& [key, f] : u.entries) {
    Vec v = f.full();
    std::vector<double> vals(v.data(), v.data() + v.size());
    j["entries"].push_back({{"k", key.first}, {"l", key.second}, {"values", vals}});
  }
  if(!u.entries.empty()) {
    Vec a = u.entries.begin()->second.grid->abscissae();
    j["r"] = std::vector<double>(a.data(), a.data() + a.size());
  }
  return j;
}

inline RadialSpectrum radial_spectrum_from_json(const nlohmann::json& j, const GridPtr& grid) {
  RadialSpectrum u(j.at("n").get<int>());
  const int N = grid->size();
  for(const auto& e : j.at("entries")) {
    std::vector<double> vals = e.at("values").get<std::vector<double>>();
    if(int(vals.size()) != N + 2) throw InputError("radial spectrum: values must match the grid abscissae");
    Vec F(N);
    for(int i = 0; i < N; ++i) F[i] = vals[i + 1];
    u.set(e.at("k").get<int>(), e.at("l").get<int>(), RadialFn(grid, F, 0.0));
  }
  return u;
}

}  // namespace fbspec
