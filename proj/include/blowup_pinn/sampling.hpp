#pragma once

// Collocation sets for PINN training and quadrature-weighted training sets.

#include <cmath>
#include <cstdint>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "blowup_pinn/quadrature.hpp"

namespace blowup_pinn {

enum class Scheme { random, grid, gauss_legendre };

inline std::string to_string(Scheme s) {
  switch (s) {
    case Scheme::random: return "random";
    case Scheme::grid: return "grid";
    case Scheme::gauss_legendre: return "gauss-legendre";
  }
  return "unknown";
}

inline Scheme parse_scheme(std::string_view s) {
  if (s == "random") return Scheme::random;
  if (s == "grid") return Scheme::grid;
  if (s == "gauss-legendre" || s == "gauss_legendre" || s == "gl") return Scheme::gauss_legendre;
  throw std::invalid_argument("unknown collocation scheme '" + std::string(s) + "' (random | grid | gauss-legendre)");
}

/// Requested point counts; n_sb is per boundary face.
struct CollocationCounts {
  int n_int = 4096;
  int n_tb = 256;
  int n_sb = 256;
};

/// Spatial boundary face: coordinate `axis` fixed at `position`; the boundary
/// datum constrains output component `component`.
struct Face {
  int axis = 0;
  double position = 0.0;
  int component = 0;
  std::string name;
};

/// Interior, initial-time and per-face boundary families. All points carry
/// full space-time coordinates (time is the last row).
struct CollocationSet {
  Scheme scheme = Scheme::random;
  PointSet interior;
  PointSet initial;
  std::vector<PointSet> boundary;

  bool has_quadrature_weights() const { return scheme == Scheme::gauss_legendre; }
  int n_int() const { return static_cast<int>(interior.size()); }
  int n_tb() const { return static_cast<int>(initial.size()); }
  int n_sb() const { return boundary.empty() ? 0 : static_cast<int>(boundary.front().size()); }
};

namespace detail {

// Per-axis order so that order^dims is as close as possible to `count`.
inline int per_axis_order(int count, int dims) {
  const int n = static_cast<int>(std::lround(std::pow(static_cast<double>(count), 1.0 / dims)));
  return n < 1 ? 1 : n;
}

inline PointSet midpoint_grid(const Box& box, int per_axis) {
  const std::size_t dim = box.dim();
  Eigen::Index total = 1;
  for (std::size_t a = 0; a < dim; ++a) total *= per_axis;
  PointSet out;
  out.points.resize(static_cast<Eigen::Index>(dim), total);
  out.weights = Vector::Ones(total);
  std::vector<int> idx(dim, 0);
  for (Eigen::Index p = 0; p < total; ++p) {
    for (std::size_t a = 0; a < dim; ++a) {
      const double h = (box.upper[a] - box.lower[a]) / per_axis;
      out.points(static_cast<Eigen::Index>(a), p) = box.lower[a] + (idx[a] + 0.5) * h;
    }
    for (std::size_t a = dim; a-- > 0;) {
      if (++idx[a] < per_axis) break;
      idx[a] = 0;
    }
  }
  return out;
}

inline PointSet uniform_random(const Box& box, int count, std::mt19937_64& rng) {
  PointSet out;
  out.points.resize(static_cast<Eigen::Index>(box.dim()), count);
  out.weights = Vector::Ones(count);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int p = 0; p < count; ++p)
    for (std::size_t a = 0; a < box.dim(); ++a)
      out.points(static_cast<Eigen::Index>(a), p) = box.lower[a] + (box.upper[a] - box.lower[a]) * unit(rng);
  return out;
}

inline PointSet family_points(const Box& box, int count, Scheme scheme, std::mt19937_64& rng) {
  if (count < 1) throw std::invalid_argument("sample_collocation: counts must be positive");
  switch (scheme) {
    case Scheme::random: return uniform_random(box, count, rng);
    case Scheme::grid: return midpoint_grid(box, per_axis_order(count, static_cast<int>(box.dim())));
    case Scheme::gauss_legendre:
      return tensor_quadrature(gauss_legendre(per_axis_order(count, static_cast<int>(box.dim()))), box);
  }
  throw std::logic_error("unreachable");
}

inline Box drop_axis(const Box& box, int axis) {
  Box out;
  for (std::size_t a = 0; a < box.dim(); ++a) {
    if (static_cast<int>(a) == axis) continue;
    out.lower.push_back(box.lower[a]);
    out.upper.push_back(box.upper[a]);
  }
  return out;
}

}  // namespace detail

/// Samples the interior, initial-time and boundary families of `problem`.
///
/// random: i.i.d. uniform points with unit weights. grid: cell midpoints of a
/// regular grid with unit weights. gauss-legendre: tensor Gauss-Legendre rules
/// with their true weights; the per-axis order is the nearest integer root of
/// the requested count, so realized counts can differ from the request.
template <class Problem>
CollocationSet sample_collocation(const Problem& problem, const CollocationCounts& counts, Scheme scheme,
                                  std::uint64_t seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x636f6c6cu};
  std::mt19937_64 rng(seq);
  const Box st = problem.space_time_box();
  const int time_axis = Problem::space_dim;

  CollocationSet set;
  set.scheme = scheme;
  set.interior = detail::family_points(st, counts.n_int, scheme, rng);
  set.initial = embed_fixed_coordinate(detail::family_points(problem.space_box(), counts.n_tb, scheme, rng), time_axis,
                                       problem.t0());
  for (const Face& face : problem.faces()) {
    const Box face_box = detail::drop_axis(st, face.axis);
    set.boundary.push_back(
        embed_fixed_coordinate(detail::family_points(face_box, counts.n_sb, scheme, rng), face.axis, face.position));
  }
  return set;
}

/// CSV export: family,c0,c1,...,weight. Families: interior, initial, boundary:<face>.
template <class Problem>
void write_collocation_csv(const Problem& problem, const CollocationSet& set, std::ostream& os) {
  const int dim = Problem::space_dim + 1;
  os << "family";
  for (int c = 0; c < Problem::space_dim; ++c) os << ",x" << (Problem::space_dim > 1 ? std::to_string(c + 1) : "");
  os << ",t,weight\n";
  os.precision(17);
  auto dump = [&](const std::string& family, const PointSet& ps) {
    for (Eigen::Index i = 0; i < ps.size(); ++i) {
      os << family;
      for (int c = 0; c < dim; ++c) os << ',' << ps.points(c, i);
      os << ',' << ps.weights[i] << '\n';
    }
  };
  dump("interior", set.interior);
  dump("initial", set.initial);
  const auto faces = problem.faces();
  for (std::size_t f = 0; f < set.boundary.size(); ++f) dump("boundary:" + faces[f].name, set.boundary[f]);
}

}  // namespace blowup_pinn
