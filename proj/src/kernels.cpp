#include "qtrust/kernels.hpp"

#include <omp.h>

#include <limits>
#include <stdexcept>

namespace qtrust::kernels {
namespace {

void check_matrix(std::span<const double> matrix, std::size_t dim) {
  if (dim == 0 || matrix.empty() || matrix.size() % dim != 0)
    throw std::invalid_argument("matrix must be non-empty with a whole number of rows");
}

bool better(const Nearest& a, const Nearest& b) {
  return a.squared_distance < b.squared_distance ||
         (a.squared_distance == b.squared_distance && a.row < b.row);
}

std::size_t out_width(const nn::Mlp& net, Output which) {
  return static_cast<std::size_t>(which == Output::Values ? net.output_size() : net.embedding_size());
}

void forward_row(const nn::Mlp& net, std::span<const double> x, Output which, nn::Activations& acts,
                 double* out) {
  net.forward_into(x, acts);
  const auto& v = which == Output::Values ? acts.values.back() : acts.values[acts.values.size() - 2];
  std::copy(v.begin(), v.end(), out);
}

}  // namespace

namespace serial {

Nearest nearest(std::span<const double> matrix, std::size_t dim, std::span<const double> query) {
  check_matrix(matrix, dim);
  if (query.size() != dim) throw std::invalid_argument("query dimension mismatch");
  const std::size_t rows = matrix.size() / dim;
  Nearest best{std::numeric_limits<double>::infinity(), 0};
  for (std::size_t r = 0; r < rows; ++r) {
    const double d = squared_distance(matrix.data() + r * dim, query.data(), dim);
    if (d < best.squared_distance) best = {d, r};
  }
  return best;
}

std::vector<double> nearest_distances(std::span<const double> matrix, std::size_t dim,
                                      std::span<const double> queries) {
  if (queries.size() % dim != 0) throw std::invalid_argument("query dimension mismatch");
  std::vector<double> out(queries.size() / dim);
  for (std::size_t q = 0; q < out.size(); ++q)
    out[q] = nearest(matrix, dim, queries.subspan(q * dim, dim)).squared_distance;
  return out;
}

std::vector<double> forward_batch(const nn::Mlp& net, std::span<const double> inputs, Output which) {
  const auto in = static_cast<std::size_t>(net.input_size());
  if (inputs.size() % in != 0) throw nn::ShapeError("batch is not a whole number of rows");
  const std::size_t rows = inputs.size() / in;
  const std::size_t width = out_width(net, which);
  std::vector<double> out(rows * width);
  nn::Activations acts;
  for (std::size_t r = 0; r < rows; ++r) forward_row(net, inputs.subspan(r * in, in), which, acts, &out[r * width]);
  return out;
}

}  // namespace serial

namespace parallel {

Nearest nearest(std::span<const double> matrix, std::size_t dim, std::span<const double> query) {
  check_matrix(matrix, dim);
  if (query.size() != dim) throw std::invalid_argument("query dimension mismatch");
  const auto rows = static_cast<std::ptrdiff_t>(matrix.size() / dim);
  Nearest best{std::numeric_limits<double>::infinity(), 0};
#pragma omp parallel
  {
    Nearest local{std::numeric_limits<double>::infinity(), 0};
#pragma omp for schedule(static) nowait
    for (std::ptrdiff_t r = 0; r < rows; ++r) {
      const double d = squared_distance(matrix.data() + r * dim, query.data(), dim);
      const Nearest cand{d, static_cast<std::size_t>(r)};
      if (better(cand, local)) local = cand;
    }
#pragma omp critical(qtrust_nearest)
    if (better(local, best)) best = local;
  }
  return best;
}

std::vector<double> nearest_distances(std::span<const double> matrix, std::size_t dim,
                                      std::span<const double> queries) {
  check_matrix(matrix, dim);
  if (queries.size() % dim != 0) throw std::invalid_argument("query dimension mismatch");
  const auto count = static_cast<std::ptrdiff_t>(queries.size() / dim);
  std::vector<double> out(static_cast<std::size_t>(count));
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t q = 0; q < count; ++q)
    out[q] = serial::nearest(matrix, dim, queries.subspan(q * dim, dim)).squared_distance;
  return out;
}

std::vector<double> forward_batch(const nn::Mlp& net, std::span<const double> inputs, Output which) {
  const auto in = static_cast<std::size_t>(net.input_size());
  if (inputs.size() % in != 0) throw nn::ShapeError("batch is not a whole number of rows");
  const auto rows = static_cast<std::ptrdiff_t>(inputs.size() / in);
  const std::size_t width = out_width(net, which);
  std::vector<double> out(static_cast<std::size_t>(rows) * width);
#pragma omp parallel
  {
    nn::Activations acts;
#pragma omp for schedule(static)
    for (std::ptrdiff_t r = 0; r < rows; ++r)
      forward_row(net, inputs.subspan(r * in, in), which, acts, &out[r * width]);
  }
  return out;
}

}  // namespace parallel

}  // namespace qtrust::kernels
