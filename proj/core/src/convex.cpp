#include "rsdec/convex.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "rsdec/error.hpp"

namespace rsdec {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

using Point = std::array<double, 2>;

double cross(const Point& o, const Point& a, const Point& b) {
  return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
}

std::size_t shape_dim(const ConvexSet::Variant& v) {
  return std::visit(overloaded{
                        [](const WholeSpace& w) { return w.dim; },
                        [](const Box& b) { return b.lower.dim(); },
                        [](const Ball& b) { return b.center.dim(); },
                        [](const Polygon2D&) { return std::size_t{2}; },
                        [](const Product& p) {
                          std::size_t d = 0;
                          for (const auto& f : p.factors) d += f.dim();
                          return d;
                        },
                    },
                    v);
}

bool polygon_contains(const Polygon2D& poly, const Point& y) {
  const auto& v = poly.vertices;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (cross(v[i], v[(i + 1) % v.size()], y) < 0.0) return false;
  }
  return true;
}

Point project_segment(const Point& a, const Point& b, const Point& y) {
  const double dx = b[0] - a[0];
  const double dy = b[1] - a[1];
  const double len2 = dx * dx + dy * dy;
  double t = ((y[0] - a[0]) * dx + (y[1] - a[1]) * dy) / len2;
  t = std::clamp(t, 0.0, 1.0);
  return {a[0] + t * dx, a[1] + t * dy};
}

void project_polygon(const Polygon2D& poly, std::span<double> y) {
  const Point p{y[0], y[1]};
  if (polygon_contains(poly, p)) return;
  const auto& v = poly.vertices;
  Point best = v[0];
  double best_d2 = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < v.size(); ++i) {
    const Point q = project_segment(v[i], v[(i + 1) % v.size()], p);
    const double d2 = (q[0] - p[0]) * (q[0] - p[0]) + (q[1] - p[1]) * (q[1] - p[1]);
    if (d2 < best_d2) {
      best_d2 = d2;
      best = q;
    }
  }
  y[0] = best[0];
  y[1] = best[1];
}

void project_shape(const ConvexSet::Variant& shape, std::span<double> y) {
  std::visit(overloaded{
                 [](const WholeSpace&) {},
                 [&](const Box& b) {
                   for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::clamp(y[i], b.lower[i], b.upper[i]);
                 },
                 [&](const Ball& b) {
                   double d2 = 0.0;
                   for (std::size_t i = 0; i < y.size(); ++i) d2 += (y[i] - b.center[i]) * (y[i] - b.center[i]);
                   if (d2 <= b.radius * b.radius) return;
                   const double scale = b.radius / std::sqrt(d2);
                   for (std::size_t i = 0; i < y.size(); ++i) y[i] = b.center[i] + scale * (y[i] - b.center[i]);
                 },
                 [&](const Polygon2D& p) { project_polygon(p, y); },
                 [&](const Product& p) {
                   std::size_t offset = 0;
                   for (const auto& f : p.factors) {
                     f.project_in_place(y.subspan(offset, f.dim()));
                     offset += f.dim();
                   }
                 },
             },
             shape);
}

}  // namespace

ConvexSet::ConvexSet(Variant shape)
    : shape_(std::make_shared<const Variant>(std::move(shape))), dim_(shape_dim(*shape_)) {}

ConvexSet ConvexSet::whole_space(std::size_t dim) {
  if (dim == 0) throw Error(ErrorKind::InvalidSet, "whole space must have positive dimension");
  return ConvexSet(WholeSpace{dim});
}

ConvexSet ConvexSet::box(Vec lower, Vec upper) {
  if (lower.dim() == 0 || lower.dim() != upper.dim()) {
    throw Error(ErrorKind::InvalidSet, "box bounds must be non-empty and of equal dimension");
  }
  for (std::size_t i = 0; i < lower.dim(); ++i) {
    if (std::isnan(lower[i]) || std::isnan(upper[i]) || lower[i] > upper[i]) {
      throw Error(ErrorKind::InvalidSet, "box requires lower <= upper componentwise (index " +
                                             std::to_string(i) + ")");
    }
  }
  return ConvexSet(Box{std::move(lower), std::move(upper)});
}

ConvexSet ConvexSet::ball(Vec center, double radius) {
  if (center.dim() == 0 || !center.all_finite()) throw Error(ErrorKind::InvalidSet, "ball center must be finite");
  if (!(radius > 0.0) || !std::isfinite(radius)) throw Error(ErrorKind::InvalidSet, "ball radius must be positive");
  return ConvexSet(Ball{std::move(center), radius});
}

ConvexSet ConvexSet::polygon(std::vector<std::array<double, 2>> vertices) {
  const std::size_t n = vertices.size();
  if (n < 3) throw Error(ErrorKind::InvalidSet, "polygon needs at least 3 vertices");
  for (const auto& v : vertices) {
    if (!std::isfinite(v[0]) || !std::isfinite(v[1])) throw Error(ErrorKind::InvalidSet, "polygon vertex not finite");
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (vertices[i] == vertices[j]) throw Error(ErrorKind::InvalidSet, "polygon has repeated vertices");
    }
    if (cross(vertices[i], vertices[(i + 1) % n], vertices[(i + 2) % n]) < -1e-12) {
      throw Error(ErrorKind::InvalidSet, "polygon vertices must be convex and counterclockwise");
    }
  }
  double area2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) area2 += cross({0.0, 0.0}, vertices[i], vertices[(i + 1) % n]);
  if (!(area2 > 0.0)) throw Error(ErrorKind::InvalidSet, "polygon must have positive counterclockwise area");
  return ConvexSet(Polygon2D{std::move(vertices)});
}

ConvexSet ConvexSet::product(std::vector<ConvexSet> factors) {
  if (factors.empty()) throw Error(ErrorKind::InvalidSet, "product needs at least one factor");
  return ConvexSet(Product{std::move(factors)});
}

bool ConvexSet::is_whole_space() const noexcept {
  if (std::holds_alternative<WholeSpace>(*shape_)) return true;
  if (const auto* p = std::get_if<Product>(shape_.get())) {
    return std::all_of(p->factors.begin(), p->factors.end(), [](const auto& f) { return f.is_whole_space(); });
  }
  return false;
}

void ConvexSet::project_in_place(std::span<double> y) const {
  if (y.size() != dim_) {
    throw Error(ErrorKind::DimensionMismatch,
                "project: point has dimension " + std::to_string(y.size()) + ", set " + std::to_string(dim_));
  }
  project_shape(*shape_, y);
}

Vec ConvexSet::project(const Vec& y) const {
  Vec out = y;
  project_in_place(out.span());
  return out;
}

double ConvexSet::distance(const Vec& x) const {
  const Vec p = project(x);
  double d2 = 0.0;
  for (std::size_t i = 0; i < x.dim(); ++i) d2 += (x[i] - p[i]) * (x[i] - p[i]);
  return std::sqrt(d2);
}

bool ConvexSet::contains(const Vec& x, double tol) const {
  if (tol < 0.0) throw Error(ErrorKind::InvalidArgument, "contains: tolerance must be non-negative");
  if (!x.all_finite()) return false;
  return distance(x) <= tol;
}

double ConvexSet::diameter() const {
  constexpr double inf = std::numeric_limits<double>::infinity();
  return std::visit(overloaded{
                        [](const WholeSpace&) { return inf; },
                        [](const Box& b) {
                          double d2 = 0.0;
                          for (std::size_t i = 0; i < b.lower.dim(); ++i) {
                            const double w = b.upper[i] - b.lower[i];
                            d2 += w * w;
                          }
                          return std::sqrt(d2);
                        },
                        [](const Ball& b) { return 2.0 * b.radius; },
                        [](const Polygon2D& p) {
                          double best = 0.0;
                          for (const auto& a : p.vertices)
                            for (const auto& b : p.vertices)
                              best = std::max(best, std::hypot(a[0] - b[0], a[1] - b[1]));
                          return best;
                        },
                        [](const Product& p) {
                          double d2 = 0.0;
                          for (const auto& f : p.factors) {
                            const double d = f.diameter();
                            d2 += d * d;
                          }
                          return std::sqrt(d2);
                        },
                    },
                    *shape_);
}

}  // namespace rsdec
