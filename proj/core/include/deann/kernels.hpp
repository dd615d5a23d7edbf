#pragma once

#include <cmath>
#include <span>
#include <string>
#include <string_view>

namespace deann {

enum class KernelFamily { Exponential, Gaussian, Laplacian };

/// Lowercase name as used on the command line ("exponential", ...).
std::string_view to_string(KernelFamily family) noexcept;

/// Inverse of to_string; throws std::invalid_argument on unknown names.
KernelFamily parse_kernel_family(std::string_view name);

/// A radially decreasing kernel with bandwidth h > 0.
///
/// The distance fed to the kernel depends on the family:
///   Gaussian     exp(-s / (2h^2))  with s the squared L2 distance
///   Exponential  exp(-r / h)       with r the L2 distance
///   Laplacian    exp(-r / h)       with r the L1 distance
class KernelSpec {
 public:
  KernelSpec(KernelFamily family, double bandwidth);

  KernelFamily family() const noexcept { return family_; }
  double bandwidth() const noexcept { return bandwidth_; }

  /// True when the kernel is a function of the Euclidean distance, so the
  /// squared-norm identity can be used to batch distance evaluation.
  bool euclidean() const noexcept { return family_ != KernelFamily::Laplacian; }

  /// Kernel value from the squared L2 distance; only for euclidean() kernels.
  /// No argument checking, this is the inner-loop entry point.
  double from_sqdist(double sq) const noexcept {
    if (family_ == KernelFamily::Gaussian) return std::exp(-sq / two_h2_);
    return std::exp(-std::sqrt(sq) / bandwidth_);
  }

  /// Unchecked evaluation from the family's native distance.
  double from_distance_unchecked(double dist) const noexcept {
    if (family_ == KernelFamily::Gaussian) return std::exp(-dist / two_h2_);
    return std::exp(-dist / bandwidth_);
  }

  KernelSpec with_bandwidth(double h) const { return KernelSpec(family_, h); }

 private:
  KernelFamily family_;
  double bandwidth_;
  double two_h2_;
};

/// Kernel value from the family's native distance (see KernelSpec).
/// Throws std::invalid_argument for negative or non-finite distances.
double kernel_from_distance(const KernelSpec& spec, double dist);

/// The family's native distance between two vectors, accumulated in double.
double kernel_distance(const KernelSpec& spec, std::span<const float> x,
                       std::span<const float> y);

/// K_h(x, y). Throws std::invalid_argument on dimension mismatch.
double kernel_pair(const KernelSpec& spec, std::span<const float> x,
                   std::span<const float> y);

}  // namespace deann
