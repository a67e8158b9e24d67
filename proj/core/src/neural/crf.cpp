#include "groundlab/neural/crf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "groundlab/error.hpp"

namespace groundlab::nn {

namespace {

struct Dims {
  std::size_t T, K;
};

Dims check(const Tensor& emissions, const Tensor& transitions, std::span<const double> start) {
  if (emissions.rank() != 2 || emissions.rows() < 1) throw ShapeError("crf: emissions must be [T, K] with T >= 1");
  const std::size_t K = emissions.cols();
  if (K < 2) throw ShapeError("crf: need at least two tags");
  if (transitions.rank() != 2 || transitions.rows() != K || transitions.cols() != K)
    throw ShapeError("crf: transitions must be [K, K]");
  if (!start.empty() && start.size() != K) throw ShapeError("crf: start scores must have K entries");
  for (double v : emissions.values())
    if (!std::isfinite(v)) throw NumericError("crf: non-finite emission score");
  return {emissions.rows(), K};
}

double start_score(std::span<const double> start, std::size_t k) { return start.empty() ? 0.0 : start[k]; }

double lse(const double* v, std::size_t n) {
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) mx = std::max(mx, v[i]);
  if (mx == -std::numeric_limits<double>::infinity()) return mx;
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += std::exp(v[i] - mx);
  return mx + std::log(s);
}

/// alpha[t, k]: log-sum of scores of all prefixes ending in tag k at t.
Tensor forward_scores(const Tensor& em, const Tensor& tr, std::span<const double> start, Dims d) {
  Tensor alpha({d.T, d.K});
  for (std::size_t k = 0; k < d.K; ++k) alpha.at(0, k) = em.at(0, k) + start_score(start, k);
  std::vector<double> buf(d.K);
  for (std::size_t t = 1; t < d.T; ++t)
    for (std::size_t k = 0; k < d.K; ++k) {
      for (std::size_t j = 0; j < d.K; ++j) buf[j] = alpha.at(t - 1, j) + tr.at(j, k);
      alpha.at(t, k) = lse(buf.data(), d.K) + em.at(t, k);
    }
  return alpha;
}

/// beta[t, k]: log-sum of scores of all suffixes after tag k at t.
Tensor backward_scores(const Tensor& em, const Tensor& tr, Dims d) {
  Tensor beta({d.T, d.K});
  std::vector<double> buf(d.K);
  for (std::size_t t = d.T - 1; t-- > 0;)
    for (std::size_t k = 0; k < d.K; ++k) {
      for (std::size_t j = 0; j < d.K; ++j) buf[j] = tr.at(k, j) + em.at(t + 1, j) + beta.at(t + 1, j);
      beta.at(t, k) = lse(buf.data(), d.K);
    }
  return beta;
}

}  // namespace

double crf_path_score(const Tensor& emissions, const Tensor& transitions, std::span<const int> path,
                      std::span<const double> start) {
  const auto d = check(emissions, transitions, start);
  if (path.size() != d.T) throw ShapeError("crf: path length differs from sequence length");
  double s = 0.0;
  for (std::size_t t = 0; t < d.T; ++t) {
    const auto k = static_cast<std::size_t>(path[t]);
    if (path[t] < 0 || k >= d.K) throw ShapeError("crf: tag out of range");
    s += emissions.at(t, k);
    if (t == 0)
      s += start_score(start, k);
    else
      s += transitions.at(static_cast<std::size_t>(path[t - 1]), k);
  }
  return s;
}

double crf_log_partition(const Tensor& emissions, const Tensor& transitions, std::span<const double> start) {
  const auto d = check(emissions, transitions, start);
  const auto alpha = forward_scores(emissions, transitions, start, d);
  return lse(alpha.data() + (d.T - 1) * d.K, d.K);
}

CrfPath crf_viterbi(const Tensor& emissions, const Tensor& transitions, std::span<const double> start) {
  const auto d = check(emissions, transitions, start);
  Tensor best({d.T, d.K});
  std::vector<std::vector<int>> back(d.T, std::vector<int>(d.K, 0));
  for (std::size_t k = 0; k < d.K; ++k) best.at(0, k) = emissions.at(0, k) + start_score(start, k);
  for (std::size_t t = 1; t < d.T; ++t)
    for (std::size_t k = 0; k < d.K; ++k) {
      double top = -std::numeric_limits<double>::infinity();
      int arg = 0;
      for (std::size_t j = 0; j < d.K; ++j) {
        const double s = best.at(t - 1, j) + transitions.at(j, k);
        if (s > top) {  // strict: earlier (lower) index wins ties
          top = s;
          arg = static_cast<int>(j);
        }
      }
      best.at(t, k) = top + emissions.at(t, k);
      back[t][k] = arg;
    }
  CrfPath path;
  path.tags.assign(d.T, 0);
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < d.K; ++k)
    if (best.at(d.T - 1, k) > top) {
      top = best.at(d.T - 1, k);
      path.tags[d.T - 1] = static_cast<int>(k);
    }
  for (std::size_t t = d.T - 1; t > 0; --t)
    path.tags[t - 1] = back[t][static_cast<std::size_t>(path.tags[t])];
  path.score = top;
  return path;
}

CrfMarginals crf_marginals(const Tensor& emissions, const Tensor& transitions, std::span<const double> start) {
  const auto d = check(emissions, transitions, start);
  const auto alpha = forward_scores(emissions, transitions, start, d);
  const auto beta = backward_scores(emissions, transitions, d);
  CrfMarginals m;
  m.log_partition = lse(alpha.data() + (d.T - 1) * d.K, d.K);
  m.unary = Tensor({d.T, d.K});
  m.pairwise = Tensor({d.K, d.K});
  for (std::size_t t = 0; t < d.T; ++t)
    for (std::size_t k = 0; k < d.K; ++k)
      m.unary.at(t, k) = std::exp(alpha.at(t, k) + beta.at(t, k) - m.log_partition);
  for (std::size_t t = 1; t < d.T; ++t)
    for (std::size_t i = 0; i < d.K; ++i)
      for (std::size_t j = 0; j < d.K; ++j)
        m.pairwise.at(i, j) += std::exp(alpha.at(t - 1, i) + transitions.at(i, j) + emissions.at(t, j) +
                                        beta.at(t, j) - m.log_partition);
  return m;
}

}  // namespace groundlab::nn
