#include "agos/mil.hpp"

#include <algorithm>
#include <cmath>

#include "agos/errors.hpp"
#include "agos/tensor.hpp"

namespace agos {

int classic_bag_label(const std::vector<uint8_t>& instance_labels) {
  if (instance_labels.empty()) throw UsageError("classic_bag_label: empty bag");
  for (uint8_t l : instance_labels) {
    if (l > 1) throw UsageError("classic_bag_label: labels must be 0 or 1");
    if (l == 1) return 1;
  }
  return 0;
}

std::string fusion_name(FusionKind k) {
  switch (k) {
    case FusionKind::Mean: return "mean";
    case FusionKind::Max: return "max";
    case FusionKind::MajorityVote: return "majority_vote";
    case FusionKind::LeastSquares: return "least_squares";
  }
  return "unknown";
}

namespace {

void check_scores(const std::vector<std::vector<double>>& grain_scores) {
  if (grain_scores.empty()) throw UsageError("fuse: no grain scores");
  size_t c = grain_scores[0].size();
  if (c == 0) throw UsageError("fuse: empty score vector");
  for (const auto& g : grain_scores)
    if (g.size() != c) throw UsageError("fuse: grain score lengths differ");
}

}  // namespace

BagDistribution fuse(const FusionStrategy& strategy,
                     const std::vector<std::vector<double>>& grain_scores) {
  check_scores(grain_scores);
  const size_t T = grain_scores.size();
  const size_t C = grain_scores[0].size();
  BagDistribution out;
  out.source = BagSource::Fused;

  switch (strategy.kind) {
    case FusionKind::Mean: {
      std::vector<double> acc(C, 0.0);
      for (const auto& g : grain_scores)
        for (size_t c = 0; c < C; ++c) acc[c] += g[c];
      for (double& x : acc) x /= static_cast<double>(T);
      out.probs = softmax_vec(acc);
      break;
    }
    case FusionKind::Max: {
      std::vector<double> acc(grain_scores[0]);
      for (size_t t = 1; t < T; ++t)
        for (size_t c = 0; c < C; ++c) acc[c] = std::max(acc[c], grain_scores[t][c]);
      out.probs = softmax_vec(acc);
      break;
    }
    case FusionKind::MajorityVote: {
      // Plurality over per-grain argmax votes; ties break toward the class
      // with the largest summed raw score, then the lowest index.
      std::vector<int> votes(C, 0);
      std::vector<double> sums(C, 0.0);
      for (const auto& g : grain_scores) {
        votes[static_cast<size_t>(argmax_lowest(g))] += 1;
        for (size_t c = 0; c < C; ++c) sums[c] += g[c];
      }
      int best = 0;
      for (int c = 1; c < static_cast<int>(C); ++c) {
        if (votes[c] > votes[best] ||
            (votes[c] == votes[best] && sums[c] > sums[best]))
          best = c;
      }
      out.probs.assign(C, 0.0);
      out.probs[static_cast<size_t>(best)] = 1.0;
      break;
    }
    case FusionKind::LeastSquares: {
      if (strategy.ls_weights.size() != T)
        throw UsageError("fuse: least-squares weights not fitted for this grain count");
      std::vector<double> acc(C, 0.0);
      for (size_t t = 0; t < T; ++t)
        for (size_t c = 0; c < C; ++c) acc[c] += strategy.ls_weights[t] * grain_scores[t][c];
      out.probs = softmax_vec(acc);
      break;
    }
  }
  return out;
}

std::vector<double> solve_linear_system(std::vector<double> a, std::vector<double> b, int n) {
  for (int col = 0; col < n; ++col) {
    int pivot = col;
    for (int r = col + 1; r < n; ++r)
      if (std::abs(a[static_cast<size_t>(r) * n + col]) >
          std::abs(a[static_cast<size_t>(pivot) * n + col]))
        pivot = r;
    double pv = a[static_cast<size_t>(pivot) * n + col];
    if (std::abs(pv) < 1e-300)
      throw NumericError("solve_linear_system: degenerate system (zero pivot)");
    if (pivot != col) {
      for (int c = 0; c < n; ++c)
        std::swap(a[static_cast<size_t>(pivot) * n + c], a[static_cast<size_t>(col) * n + c]);
      std::swap(b[static_cast<size_t>(pivot)], b[static_cast<size_t>(col)]);
    }
    for (int r = col + 1; r < n; ++r) {
      double f = a[static_cast<size_t>(r) * n + col] / pv;
      if (f == 0.0) continue;
      for (int c = col; c < n; ++c)
        a[static_cast<size_t>(r) * n + c] -= f * a[static_cast<size_t>(col) * n + c];
      b[static_cast<size_t>(r)] -= f * b[static_cast<size_t>(col)];
    }
  }
  std::vector<double> x(static_cast<size_t>(n), 0.0);
  for (int r = n - 1; r >= 0; --r) {
    double s = b[static_cast<size_t>(r)];
    for (int c = r + 1; c < n; ++c) s -= a[static_cast<size_t>(r) * n + c] * x[static_cast<size_t>(c)];
    x[static_cast<size_t>(r)] = s / a[static_cast<size_t>(r) * n + r];
  }
  return x;
}

std::vector<double> fit_least_squares(const std::vector<std::vector<std::vector<double>>>& samples,
                                      const std::vector<int>& labels, int classes, double ridge) {
  if (samples.empty()) throw UsageError("fit_least_squares: no samples");
  if (samples.size() != labels.size())
    throw UsageError("fit_least_squares: sample/label count mismatch");
  const size_t T = samples[0].size();
  if (T == 0) throw UsageError("fit_least_squares: no grains");

  // Normal equations: A[i][j] = sum_s <Y_i, Y_j>, b[i] = sum_s Y_i[label_s].
  std::vector<double> a(T * T, 0.0), b(T, 0.0);
  for (size_t s = 0; s < samples.size(); ++s) {
    const auto& grains = samples[s];
    if (grains.size() != T) throw UsageError("fit_least_squares: grain counts differ");
    int lb = labels[s];
    if (lb < 0 || lb >= classes) throw UsageError("fit_least_squares: label out of range");
    for (size_t i = 0; i < T; ++i) {
      if (grains[i].size() != static_cast<size_t>(classes))
        throw UsageError("fit_least_squares: score length != classes");
      for (size_t j = 0; j < T; ++j) {
        double dot = 0.0;
        for (int c = 0; c < classes; ++c)
          dot += grains[i][static_cast<size_t>(c)] * grains[j][static_cast<size_t>(c)];
        a[i * T + j] += dot;
      }
      b[i] += grains[i][static_cast<size_t>(lb)];
    }
  }
  for (size_t i = 0; i < T; ++i) a[i * T + i] += ridge;
  return solve_linear_system(std::move(a), std::move(b), static_cast<int>(T));
}

std::vector<double> covariance_matrix(const std::vector<BagDistribution>& dists, int classes) {
  const size_t n = dists.size();
  if (n < 2) throw UsageError("covariance_matrix: needs at least two samples");
  const size_t C = static_cast<size_t>(classes);
  for (const auto& d : dists)
    if (d.probs.size() != C) throw UsageError("covariance_matrix: distribution length mismatch");

  std::vector<double> mean(C, 0.0);
  for (const auto& d : dists)
    for (size_t c = 0; c < C; ++c) mean[c] += d.probs[c];
  for (double& m : mean) m /= static_cast<double>(n);

  std::vector<double> cov(C * C, 0.0);
  for (const auto& d : dists) {
    for (size_t i = 0; i < C; ++i) {
      double di = d.probs[i] - mean[i];
      for (size_t j = 0; j < C; ++j) cov[i * C + j] += di * (d.probs[j] - mean[j]);
    }
  }
  const double inv = 1.0 / static_cast<double>(n - 1);
  for (double& x : cov) x *= inv;
  return cov;
}

std::vector<double> symmetric_eigenvalues(std::vector<double> m, int n) {
  const size_t N = static_cast<size_t>(n);
  auto at = [&m, N](size_t i, size_t j) -> double& { return m[i * N + j]; };
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (size_t i = 0; i < N; ++i)
      for (size_t j = i + 1; j < N; ++j) off += at(i, j) * at(i, j);
    if (off < 1e-30) break;
    for (size_t p = 0; p < N; ++p) {
      for (size_t q = p + 1; q < N; ++q) {
        double apq = at(p, q);
        if (std::abs(apq) < 1e-300) continue;
        double theta = (at(q, q) - at(p, p)) / (2.0 * apq);
        double t = (theta >= 0 ? 1.0 : -1.0) /
                   (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        double c = 1.0 / std::sqrt(t * t + 1.0);
        double s = t * c;
        for (size_t k = 0; k < N; ++k) {
          double akp = at(k, p), akq = at(k, q);
          at(k, p) = c * akp - s * akq;
          at(k, q) = s * akp + c * akq;
        }
        for (size_t k = 0; k < N; ++k) {
          double apk = at(p, k), aqk = at(q, k);
          at(p, k) = c * apk - s * aqk;
          at(q, k) = s * apk + c * aqk;
        }
      }
    }
  }
  std::vector<double> eig(N);
  for (size_t i = 0; i < N; ++i) eig[i] = at(i, i);
  std::sort(eig.begin(), eig.end());
  return eig;
}

}  // namespace agos
