// Copyright 2026 The tumorseg Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <span>
#include <vector>

#include "tumorseg/error.hpp"

namespace tumorseg {

struct LossConfig {
  double smooth = 1.0;     // additive soft-Dice smoothing
  double clamp_eps = 1e-7; // probability clamp inside the log terms

  void validate() const {
    require(smooth >= 0 && std::isfinite(smooth), ErrorCode::kConfig,
            "loss.smooth must be >= 0");
    require(clamp_eps > 0 && clamp_eps < 1e-3, ErrorCode::kConfig,
            "loss.clamp_eps must lie in (0, 1e-3)");
  }
};

/// Value and both terms of bc(y, p) - log(dice(y, p)).
struct LossTerms {
  double bce = 0;
  double dice = 0;
  double total = 0;
};

namespace detail {

template <typename A, typename B>
void check_same_size(std::span<const A> y, std::span<const B> p) {
  require(y.size() == p.size(), ErrorCode::kShapeMismatch,
          "target and prediction sizes differ");
  require(!y.empty(), ErrorCode::kShapeMismatch, "empty loss input");
}

struct DiceSums {
  double intersection = 0;  // sum y * p
  double target = 0;        // sum y
  double predicted = 0;     // sum p
};

template <typename T>
DiceSums dice_sums(std::span<const T> y, std::span<const T> p) {
  DiceSums s;
  for (std::size_t i = 0; i < y.size(); ++i) {
    s.intersection += static_cast<double>(y[i]) * p[i];
    s.target += y[i];
    s.predicted += p[i];
  }
  return s;
}

inline double dice_from_sums(const DiceSums& s, double smooth) {
  const double num = 2.0 * s.intersection + smooth;
  const double den = s.target + s.predicted + smooth;
  return den == 0.0 ? 1.0 : num / den;
}

}  // namespace detail

/// Mean over all elements of -[y log p + (1 - y) log(1 - p)], with p
/// clamped to [eps, 1 - eps].
template <std::floating_point T>
double binary_cross_entropy(std::span<const T> y, std::span<const T> p,
                            const LossConfig& cfg) {
  detail::check_same_size(y, p);
  const double eps = cfg.clamp_eps;
  double acc = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double q = std::clamp(static_cast<double>(p[i]), eps, 1.0 - eps);
    const double t = y[i];
    acc -= t * std::log(q) + (1.0 - t) * std::log(1.0 - q);
  }
  return acc / static_cast<double>(y.size());
}

/// (2 sum(y p) + smooth) / (sum y + sum p + smooth), summed over the whole
/// span (a batch reduces as one pool).
template <std::floating_point T>
double soft_dice(std::span<const T> y, std::span<const T> p,
                 const LossConfig& cfg) {
  detail::check_same_size(y, p);
  return detail::dice_from_sums(detail::dice_sums(y, p), cfg.smooth);
}

template <std::floating_point T>
LossTerms composite_loss_terms(std::span<const T> y, std::span<const T> p,
                               const LossConfig& cfg) {
  LossTerms t;
  t.bce = binary_cross_entropy(y, p, cfg);
  t.dice = soft_dice(y, p, cfg);
  t.total = t.bce - std::log(t.dice);
  return t;
}

template <std::floating_point T>
double composite_loss(std::span<const T> y, std::span<const T> p,
                      const LossConfig& cfg) {
  return composite_loss_terms(y, p, cfg).total;
}

/// Analytic d(composite)/dp. The BCE term is flat where p is clamped.
template <std::floating_point T>
std::vector<double> composite_loss_grad(std::span<const T> y, std::span<const T> p,
                                        const LossConfig& cfg) {
  detail::check_same_size(y, p);
  const auto s = detail::dice_sums(y, p);
  const double num = 2.0 * s.intersection + cfg.smooth;
  const double den = s.target + s.predicted + cfg.smooth;
  const double n = static_cast<double>(y.size());
  const double eps = cfg.clamp_eps;
  std::vector<double> g(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double q = p[i];
    const double t = y[i];
    double bce = 0;
    if (q > eps && q < 1.0 - eps) bce = -(t / q - (1.0 - t) / (1.0 - q)) / n;
    const double dice = (den == 0.0 ? 0.0 : 1.0 / den) - (num == 0.0 ? 0.0 : 2.0 * t / num);
    g[i] = bce + dice;
  }
  return g;
}

/// Loss plus d(composite)/d(logit) for p = sigmoid(logit). The BCE part
/// uses the exact sigmoid identity (p - y) / N, ignoring the clamp, so a
/// confidently wrong pixel still receives a gradient.
template <std::floating_point T>
LossTerms composite_loss_logit_grad(std::span<const T> y, std::span<const T> p,
                                    const LossConfig& cfg, std::span<T> dlogits) {
  detail::check_same_size(y, p);
  require(dlogits.size() == p.size(), ErrorCode::kShapeMismatch,
          "gradient buffer size differs from prediction");
  const LossTerms terms = composite_loss_terms(y, p, cfg);
  const auto s = detail::dice_sums(y, p);
  const double num = 2.0 * s.intersection + cfg.smooth;
  const double den = s.target + s.predicted + cfg.smooth;
  const double n = static_cast<double>(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double q = p[i];
    const double t = y[i];
    const double ddice = (den == 0.0 ? 0.0 : 1.0 / den) - (num == 0.0 ? 0.0 : 2.0 * t / num);
    dlogits[i] = static_cast<T>((q - t) / n + ddice * q * (1.0 - q));
  }
  return terms;
}

}  // namespace tumorseg
