#pragma once

// Data-parallel inner loops. Each kernel has a serial reference and an
// OpenMP version; both produce bit-identical results because every output
// element is computed by the same sequence of operations regardless of
// which thread owns it.

#include <cstddef>
#include <span>
#include <vector>

#include "qtrust/mlp.hpp"

namespace qtrust::kernels {

struct Nearest {
  double squared_distance = 0.0;
  std::size_t row = 0;  // lowest index among ties
  bool operator==(const Nearest&) const = default;
};

// Squared Euclidean distance, accumulated in index order.
inline double squared_distance(const double* a, const double* b, std::size_t dim) {
  double acc = 0.0;
  for (std::size_t k = 0; k < dim; ++k) {
    const double d = a[k] - b[k];
    acc += d * d;
  }
  return acc;
}

enum class Output { Values, Embedding };

namespace serial {

// `matrix` is row-major with `dim` columns and at least one row.
Nearest nearest(std::span<const double> matrix, std::size_t dim, std::span<const double> query);

// One nearest-row squared distance per query row.
std::vector<double> nearest_distances(std::span<const double> matrix, std::size_t dim,
                                      std::span<const double> queries);

// Row-major outputs for `inputs` (row-major, input_size columns).
std::vector<double> forward_batch(const nn::Mlp& net, std::span<const double> inputs, Output which);

}  // namespace serial

namespace parallel {

Nearest nearest(std::span<const double> matrix, std::size_t dim, std::span<const double> query);
std::vector<double> nearest_distances(std::span<const double> matrix, std::size_t dim,
                                      std::span<const double> queries);
std::vector<double> forward_batch(const nn::Mlp& net, std::span<const double> inputs, Output which);

}  // namespace parallel

}  // namespace qtrust::kernels
