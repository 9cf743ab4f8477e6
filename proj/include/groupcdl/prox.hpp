#pragma once

#include <span>
#include <vector>

#include "groupcdl/adjacency.hpp"
#include "groupcdl/planar.hpp"

namespace groupcdl {

/// Per-subband thresholds tau = tau0 + sigma_hat * tau1 (tau1 ignored when
/// not adaptive).
struct ThresholdParams {
  std::vector<double> tau0;
  std::vector<double> tau1;
  bool adaptive = true;

  std::vector<double> at_noise_level(double sigma_hat) const;
  void validate(int subbands) const;
};

/// sign(z) * max(|z| - tau_c, 0), one tau per channel.
LatentCode soft_threshold(const LatentCode& z, std::span<const double> tau);

/// sum over (m, j) of sqrt(((I (x) G) z^2)_{m,j}).
double group_sparsity_norm(const LatentCode& z, const SparseAdjacency& g);

/// z * (1 - tau / xi)_+ with xi = sqrt((I (x) G) z^2); zero wherever xi = 0.
/// This is an approximation of the group-sparsity prox, not the exact prox.
LatentCode group_threshold(const LatentCode& z, std::span<const double> tau, const SparseAdjacency& g);

/// Group thresholding with the subband energy pooled in a compressed domain:
/// xi = W_beta sqrt((I (x) G) (W_alpha^T z)^2). walpha and wbeta are M x M_h
/// and wbeta must be entrywise nonnegative. Time spent in the adjacency
/// product is added to *matvec_seconds when given.
LatentCode group_threshold_learned(const LatentCode& z, std::span<const double> tau, const SparseAdjacency& g,
                                   const PixelTransform& walpha, const PixelTransform& wbeta,
                                   double* matvec_seconds = nullptr);

}  // namespace groupcdl
