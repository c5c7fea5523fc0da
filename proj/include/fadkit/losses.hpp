#pragma once

#include "fadkit/autodiff.hpp"
#include "fadkit/image.hpp"

namespace fadkit {

constexpr double kFocalGamma = 2.0;
constexpr double kFocalAlpha = 1.0;
constexpr double kDiceEps = 1.0;

struct LossBreakdown {
  double focal = 0.0;
  double dice = 0.0;
  double total = 0.0;
};

namespace detail {

inline autodiff::Mat field_as_column(const Field& f) {
  autodiff::Mat m(static_cast<Eigen::Index>(f.size()), 1);
  for (std::size_t i = 0; i < f.size(); ++i)
    m(static_cast<Eigen::Index>(i), 0) = f.data[i];
  return m;
}

}  // namespace detail

inline double focal_loss(const Field& s_n, const Field& s_a, const AnomalyMask& y,
                         double gamma_f = kFocalGamma, double alpha_f = kFocalAlpha) {
  if (s_n.height != y.height || s_n.width != y.width || s_a.height != y.height ||
      s_a.width != y.width)
    throw ShapeError("focal_loss: map and mask shapes must match");
  autodiff::Graph g;
  const int id = g.focal_loss(g.constant(detail::field_as_column(s_n)),
                              g.constant(detail::field_as_column(s_a)), y.bits,
                              gamma_f, alpha_f);
  return g.value(id)(0, 0);
}

inline double dice_loss(const Field& s_a, const AnomalyMask& y, double eps = kDiceEps) {
  if (s_a.height != y.height || s_a.width != y.width)
    throw ShapeError("dice_loss: map and mask shapes must match");
  if (eps <= 0.0) throw std::invalid_argument("dice eps must be positive");
  autodiff::Graph g;
  const int id = g.dice_loss(g.constant(detail::field_as_column(s_a)), y.bits, eps);
  return g.value(id)(0, 0);
}

inline LossBreakdown total_loss(const Field& s_n, const Field& s_a, const AnomalyMask& y) {
  LossBreakdown lb;
  lb.focal = focal_loss(s_n, s_a, y);
  lb.dice = dice_loss(s_a, y);
  lb.total = lb.focal + lb.dice;
  return lb;
}

}  // namespace fadkit
