#include "groupcdl/prox.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>
#include <string>

namespace groupcdl {

std::vector<double> ThresholdParams::at_noise_level(double sigma_hat) const {
  std::vector<double> tau = tau0;
  if (adaptive) {
    for (std::size_t m = 0; m < tau.size(); ++m) tau[m] += sigma_hat * tau1[m];
  }
  return tau;
}

void ThresholdParams::validate(int subbands) const {
  if (static_cast<int>(tau0.size()) != subbands || static_cast<int>(tau1.size()) != subbands) {
    throw GeometryError("threshold vectors must have one entry per subband");
  }
  const auto negative = [](double v) { return !(v >= 0.0); };
  if (std::any_of(tau0.begin(), tau0.end(), negative) || std::any_of(tau1.begin(), tau1.end(), negative)) {
    throw std::invalid_argument("thresholds must be nonnegative");
  }
}

namespace {

void check_tau(const LatentCode& z, std::span<const double> tau) {
  if (static_cast<int>(tau.size()) != z.channels()) {
    throw GeometryError("expected " + std::to_string(z.channels()) + " thresholds, got " + std::to_string(tau.size()));
  }
}

LatentCode squared(const LatentCode& z) {
  LatentCode out = z;
  for (double& v : out.data()) v *= v;
  return out;
}

// z * (1 - tau_c / xi)_+, exact zero where xi == 0. NaN energies propagate so
// the caller's finiteness guard sees them.
LatentCode shrink_by_energy(const LatentCode& z, std::span<const double> tau, const LatentCode& xi) {
  LatentCode out(z.channels(), z.rows(), z.cols());
  for (int c = 0; c < z.channels(); ++c) {
    const auto zc = z.plane(c);
    const auto xc = xi.plane(c);
    auto oc = out.plane(c);
    for (std::size_t p = 0; p < zc.size(); ++p) {
      if (xc[p] != 0.0) oc[p] = zc[p] * std::max(1.0 - tau[c] / xc[p], 0.0);
    }
  }
  return out;
}

}  // namespace

LatentCode soft_threshold(const LatentCode& z, std::span<const double> tau) {
  check_tau(z, tau);
  LatentCode out(z.channels(), z.rows(), z.cols());
  for (int c = 0; c < z.channels(); ++c) {
    const auto zc = z.plane(c);
    auto oc = out.plane(c);
    for (std::size_t p = 0; p < zc.size(); ++p) {
      const double mag = std::abs(zc[p]) - tau[c];
      oc[p] = mag <= 0.0 ? 0.0 : std::copysign(mag, zc[p]);
    }
  }
  return out;
}

double group_sparsity_norm(const LatentCode& z, const SparseAdjacency& g) {
  const LatentCode energy = apply_channelwise(g, squared(z));
  double total = 0.0;
  for (double e : energy.data()) total += std::sqrt(e);
  return total;
}

LatentCode group_threshold(const LatentCode& z, std::span<const double> tau, const SparseAdjacency& g) {
  check_tau(z, tau);
  LatentCode xi = apply_channelwise(g, squared(z));
  for (double& v : xi.data()) v = std::sqrt(v);
  return shrink_by_energy(z, tau, xi);
}

LatentCode group_threshold_learned(const LatentCode& z, std::span<const double> tau, const SparseAdjacency& g,
                                   const PixelTransform& walpha, const PixelTransform& wbeta,
                                   double* matvec_seconds) {
  check_tau(z, tau);
  if (walpha.rows() != z.channels() || wbeta.rows() != z.channels() || walpha.cols() != wbeta.cols()) {
    throw GeometryError("W_alpha and W_beta must both be M x M_h");
  }
  const auto entries = wbeta.entries();
  if (std::any_of(entries.begin(), entries.end(), [](double v) { return !(v >= 0.0); })) {
    throw std::invalid_argument("W_beta must be entrywise nonnegative");
  }
  const LatentCode pooled = squared(walpha.apply_transposed(z));
  const auto t0 = std::chrono::steady_clock::now();
  LatentCode energy = apply_channelwise(g, pooled);
  if (matvec_seconds) {
    *matvec_seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
  for (double& v : energy.data()) v = std::sqrt(v);
  const LatentCode xi = wbeta.apply(energy);
  return shrink_by_energy(z, tau, xi);
}

}  // namespace groupcdl
