#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace bphz {

/// Vertex positions in R^d, stored flat (vertex-major).
class Configuration {
 public:
  Configuration() = default;
  Configuration(std::size_t vertices, int dim) : dim_(dim), coords_(vertices * static_cast<std::size_t>(dim), 0.0) {}
  Configuration(int dim, std::vector<double> coords) : dim_(dim), coords_(std::move(coords)) {
    if (dim_ <= 0 || coords_.size() % static_cast<std::size_t>(dim_) != 0)
      throw std::invalid_argument("configuration size is not a multiple of the dimension");
  }

  int dim() const { return dim_; }
  std::size_t size() const { return dim_ == 0 ? 0 : coords_.size() / static_cast<std::size_t>(dim_); }

  std::span<double> point(std::size_t v) {
    return {coords_.data() + v * static_cast<std::size_t>(dim_), static_cast<std::size_t>(dim_)};
  }
  std::span<const double> point(std::size_t v) const {
    return {coords_.data() + v * static_cast<std::size_t>(dim_), static_cast<std::size_t>(dim_)};
  }
  double& at(std::size_t v, int mu) { return coords_[v * static_cast<std::size_t>(dim_) + static_cast<std::size_t>(mu)]; }
  double at(std::size_t v, int mu) const {
    return coords_[v * static_cast<std::size_t>(dim_) + static_cast<std::size_t>(mu)];
  }

  const std::vector<double>& raw() const { return coords_; }
  std::vector<double>& raw() { return coords_; }

  void translate(std::span<const double> t) {
    for (std::size_t v = 0; v < size(); ++v)
      for (int mu = 0; mu < dim_; ++mu) at(v, mu) += t[static_cast<std::size_t>(mu)];
  }

  /// Largest pairwise Euclidean distance, used as the configuration scale.
  double scale() const {
    double best = 0.0;
    for (std::size_t a = 0; a < size(); ++a)
      for (std::size_t b = a + 1; b < size(); ++b) best = std::max(best, distance(a, b));
    return best;
  }

  double distance(std::size_t a, std::size_t b) const {
    double s = 0.0;
    for (int mu = 0; mu < dim_; ++mu) {
      const double d = at(a, mu) - at(b, mu);
      s += d * d;
    }
    return std::sqrt(s);
  }

 private:
  int dim_ = 0;
  std::vector<double> coords_;
};

}  // namespace bphz
