#pragma once

// Closed convex sets with exact Euclidean projection.

#include <array>
#include <memory>
#include <span>
#include <variant>
#include <vector>

#include "rsdec/linalg.hpp"

namespace rsdec {

class ConvexSet;

struct WholeSpace {
  std::size_t dim;
};

// Bounds may be infinite, e.g. lower = 0, upper = +inf for a half line.
struct Box {
  Vec lower;
  Vec upper;
};

struct Ball {
  Vec center;
  double radius;
};

// Counterclockwise vertices of a convex polygon in the plane.
struct Polygon2D {
  std::vector<std::array<double, 2>> vertices;
};

struct Product {
  std::vector<ConvexSet> factors;
};

class ConvexSet {
 public:
  using Variant = std::variant<WholeSpace, Box, Ball, Polygon2D, Product>;

  // Validating constructors; throw InvalidSet on malformed input.
  static ConvexSet whole_space(std::size_t dim);
  static ConvexSet box(Vec lower, Vec upper);
  static ConvexSet ball(Vec center, double radius);
  static ConvexSet polygon(std::vector<std::array<double, 2>> vertices);
  static ConvexSet product(std::vector<ConvexSet> factors);

  std::size_t dim() const noexcept { return dim_; }
  const Variant& shape() const noexcept { return *shape_; }
  bool is_whole_space() const noexcept;

  Vec project(const Vec& y) const;
  // In-place projection of a point of dimension dim().
  void project_in_place(std::span<double> y) const;
  // Distance to the set measured through the projection.
  double distance(const Vec& x) const;
  bool contains(const Vec& x, double tol) const;
  // +infinity for unbounded sets.
  double diameter() const;

 private:
  explicit ConvexSet(Variant shape);

  std::shared_ptr<const Variant> shape_;
  std::size_t dim_ = 0;
};

}  // namespace rsdec
