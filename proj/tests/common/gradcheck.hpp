#pragma once

// Central finite-difference check of nnet::backward in double precision.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "doelens/nnet.hpp"
#include "doelens/synthgen.hpp"

namespace gradcheck {

struct TensorError {
  std::string name;
  double relative = 0.0;  // ||analytic - numeric|| / max(||analytic||, ||numeric||) over sampled coordinates
};

// Checks every weight tensor of a width-reduced classifier on a small batch
// with an invariance pair batch, sampling up to ~100 coordinates per tensor.
//
// Batch-normalized pre-activations at initialization cluster around the ReLU
// kink, and rendered shapes add large blocks of tied background values. A
// coarse step straddles some of those kinks, so the difference quotient
// itself carries a few percent of error that vanishes as h shrinks.
inline std::vector<TensorError> run(std::uint64_t seed, double h = 1e-3, double lambda = 0.5) {
  using namespace doelens;
  using namespace doelens::nnet;
  const auto data = build_balanced_dataset({}, 16, seed ^ 0x9e37u);
  auto params = init_params<double>(Architecture::dsprites_cnn(0.125), seed);
  std::vector<std::size_t> idx{0, 1, 2, 3, 4, 5, 6, 7}, ia{8, 9, 10, 11}, ib{12, 13, 14, 15};
  const auto batch = make_batch<double>(data, idx);
  std::vector<int> labels;
  for (auto i : idx) labels.push_back(data.samples[i].label);
  const PairBatch<double> pairs{make_batch<double>(data, ia), make_batch<double>(data, ib)};
  TrainConfig cfg;
  cfg.lambda = lambda;
  const auto grad = backward(params, batch, labels, &pairs, cfg);
  auto loss_at = [&](const BasicParams<double>& q) { return backward(q, batch, labels, &pairs, cfg).total_loss; };

  std::vector<TensorError> out;
  for (std::size_t t = 0; t < params.weights.size(); ++t) {
    const std::size_t n = params.weights[t].size();
    const std::size_t step = n > 100 ? n / 97 : 1;
    double diff2 = 0, an2 = 0, nu2 = 0;
    for (std::size_t i = 0; i < n; i += step) {
      auto q = params;
      q.weights[t].values[i] += h;
      const double up = loss_at(q);
      q.weights[t].values[i] -= 2 * h;
      const double down = loss_at(q);
      const double numeric = (up - down) / (2 * h);
      const double analytic = grad.weights[t][i];
      diff2 += (analytic - numeric) * (analytic - numeric);
      an2 += analytic * analytic;
      nu2 += numeric * numeric;
    }
    out.push_back({params.weights[t].name, std::sqrt(diff2) / std::max({std::sqrt(an2), std::sqrt(nu2), 1e-12})});
  }
  return out;
}

inline double worst(const std::vector<TensorError>& errors) {
  double w = 0;
  for (const auto& e : errors) w = std::max(w, e.relative);
  return w;
}

}  // namespace gradcheck
