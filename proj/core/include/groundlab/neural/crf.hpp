#pragma once

#include <span>
#include <vector>

#include "groundlab/neural/tensor.hpp"

namespace groundlab::nn {

/// Linear-chain CRF over T positions and K tags. A path scores
/// sum_t emissions[t, y_t] + sum_t transitions[y_{t-1}, y_t] + start[y_0];
/// `start` may be empty (all zeros).

double crf_path_score(const Tensor& emissions, const Tensor& transitions, std::span<const int> path,
                      std::span<const double> start = {});

double crf_log_partition(const Tensor& emissions, const Tensor& transitions, std::span<const double> start = {});

struct CrfPath {
  std::vector<int> tags;
  double score = 0.0;
};

/// Max-scoring path; ties go to the lowest tag index at every step.
CrfPath crf_viterbi(const Tensor& emissions, const Tensor& transitions, std::span<const double> start = {});

struct CrfMarginals {
  double log_partition = 0.0;
  Tensor unary;     ///< [T, K] posterior of tag k at position t
  Tensor pairwise;  ///< [K, K] expected transition counts summed over t
};

/// Forward-backward posteriors.
CrfMarginals crf_marginals(const Tensor& emissions, const Tensor& transitions, std::span<const double> start = {});

}  // namespace groundlab::nn
