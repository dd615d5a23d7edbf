#include "deann/kernels.hpp"

#include <stdexcept>
#include <string>

#include "deann/distance.hpp"

namespace deann {

std::string_view to_string(KernelFamily family) noexcept {
  switch (family) {
    case KernelFamily::Exponential:
      return "exponential";
    case KernelFamily::Gaussian:
      return "gaussian";
    case KernelFamily::Laplacian:
      return "laplacian";
  }
  return "unknown";
}

KernelFamily parse_kernel_family(std::string_view name) {
  if (name == "exponential") return KernelFamily::Exponential;
  if (name == "gaussian") return KernelFamily::Gaussian;
  if (name == "laplacian") return KernelFamily::Laplacian;
  throw std::invalid_argument("unknown kernel family: " + std::string(name));
}

KernelSpec::KernelSpec(KernelFamily family, double bandwidth)
    : family_(family), bandwidth_(bandwidth), two_h2_(2.0 * bandwidth * bandwidth) {
  if (!std::isfinite(bandwidth) || bandwidth <= 0.0)
    throw std::invalid_argument("bandwidth must be positive and finite, got " +
                                std::to_string(bandwidth));
}

double kernel_from_distance(const KernelSpec& spec, double dist) {
  if (!std::isfinite(dist)) throw std::invalid_argument("kernel distance is not finite");
  if (dist < 0.0) throw std::invalid_argument("kernel distance is negative");
  return spec.from_distance_unchecked(dist);
}

double kernel_distance(const KernelSpec& spec, std::span<const float> x,
                       std::span<const float> y) {
  switch (spec.family()) {
    case KernelFamily::Gaussian:
      return sqdist(x, y);
    case KernelFamily::Exponential:
      return std::sqrt(sqdist(x, y));
    case KernelFamily::Laplacian:
      return l1dist(x, y);
  }
  return 0.0;
}

double kernel_pair(const KernelSpec& spec, std::span<const float> x, std::span<const float> y) {
  return kernel_from_distance(spec, kernel_distance(spec, x, y));
}

}  // namespace deann
