#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "agos/mbmir.hpp"

namespace agos {

// Classic instance-space bag rule: the bag is positive iff any instance is.
int classic_bag_label(const std::vector<uint8_t>& instance_labels);

// Score-level fusion of the per-grain bag score vectors of one sample.
// `grain_scores[t]` is the raw (pre-softmax) C-vector of grain t.
enum class FusionKind { Mean, Max, MajorityVote, LeastSquares };

std::string fusion_name(FusionKind k);

struct FusionStrategy {
  FusionKind kind = FusionKind::Mean;
  std::vector<double> ls_weights; // per-grain scalars; required for LeastSquares
};

BagDistribution fuse(const FusionStrategy& strategy,
                     const std::vector<std::vector<double>>& grain_scores);

// Fits one scalar weight per grain minimizing
//   sum_samples || sum_t w_t * Y_t - onehot(label) ||^2 + ridge * ||w||^2
// via the (T+1)x(T+1) normal equations. samples[s][t] is grain t's C-vector.
std::vector<double> fit_least_squares(const std::vector<std::vector<std::vector<double>>>& samples,
                                      const std::vector<int>& labels, int classes,
                                      double ridge = 1e-6);

// Unbiased two-pass sample covariance of a set of C-dim probability vectors,
// row-major CxC. Needs at least two samples.
std::vector<double> covariance_matrix(const std::vector<BagDistribution>& dists, int classes);

// Eigenvalues of a symmetric matrix (row-major n*n) by cyclic Jacobi
// rotations, ascending. Used to verify covariance matrices are PSD.
std::vector<double> symmetric_eigenvalues(std::vector<double> m, int n);

// Gaussian elimination with partial pivoting; throws NumericError when the
// pivot vanishes (degenerate system even after ridge).
std::vector<double> solve_linear_system(std::vector<double> a, std::vector<double> b, int n);

}  // namespace agos
