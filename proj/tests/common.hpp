#pragma once

#include <vector>

#include <fbspec/diffusion_modes.hpp>
#include <fbspec/rate_model.hpp>
#include <fbspec/stationary.hpp>

namespace fbspec::fixtures {

// Default model, n = 3, 512-node grid, shared by every test of a binary.
struct Defaults {
  RateModel model;
  StationaryProfile P;
  std::vector<ModeDiffusion> modes;  // k = 0..40

  Defaults() : model(LinearRates{}), P(solve_stationary(model, 3, 1e-10)) {
    for(int k = 0; k <= 40; ++k) modes.push_back(solve_uk(P, model, k));
  }
};

inline const Defaults& defaults() {
  static const Defaults d;
  return d;
}

}  // namespace fbspec::fixtures
