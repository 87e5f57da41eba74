#pragma once

// Parameter, memory-copy and FLOP counts for one forward pass of one
// sequence through a decoder-only transformer.
//
//   PARAMS  = vd + nd(8 + 2w + 4d) + nw
//   MEMCPYS = 2vd + 2sv + ns(w + 2hs) + 2nd(w + 4s + 2d)
//   FLOPS   = 2svd + 2dns(w + 2d + s) + nhs^2
//
// Integer counts are overflow-checked. The continuous overloads treat the
// hyperparameters as positive reals and are what the optimizer
// differentiates.

#include <cstdint>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "hyperloss/errors.hpp"
#include "hyperloss/shape.hpp"

namespace hyperloss {

enum class CostKind { params, memcpys, flops };

inline std::string_view to_string(CostKind k) {
  switch (k) {
    case CostKind::params:
      return "params";
    case CostKind::memcpys:
      return "memcpys";
    case CostKind::flops:
      return "flops";
  }
  return "?";
}

inline CostKind parse_cost_kind(std::string_view s) {
  if (s == "params") return CostKind::params;
  if (s == "memcpys") return CostKind::memcpys;
  if (s == "flops") return CostKind::flops;
  throw ValidationError("unknown cost kind: " + std::string(s));
}

namespace detail {

// Unsigned 64-bit count that throws instead of wrapping.
class Checked {
 public:
  constexpr Checked(std::uint64_t v = 0) : v_(v) {}  // NOLINT: implicit by intent
  constexpr std::uint64_t value() const { return v_; }

  friend Checked operator+(Checked a, Checked b) {
    std::uint64_t r;
    if (__builtin_add_overflow(a.v_, b.v_, &r)) throw ArithmeticOverflow("count overflows 64-bit range (add)");
    return r;
  }
  friend Checked operator*(Checked a, Checked b) {
    std::uint64_t r;
    if (__builtin_mul_overflow(a.v_, b.v_, &r)) throw ArithmeticOverflow("count overflows 64-bit range (mul)");
    return r;
  }

 private:
  std::uint64_t v_;
};

}  // namespace detail

inline std::uint64_t count_params(const TransformerShape& x) {
  validate(x);
  using detail::Checked;
  const Checked d = x.d, n = x.n, v = x.v, w = x.w;
  return (v * d + n * d * (Checked(8) + Checked(2) * w + Checked(4) * d) + n * w).value();
}

inline std::uint64_t count_memcpys(const TransformerShape& x) {
  validate(x);
  using detail::Checked;
  const Checked d = x.d, n = x.n, s = x.s, v = x.v, w = x.w, h = x.h;
  const Checked two = 2, four = 4;
  return (two * v * d + two * s * v + n * s * (w + two * h * s) + two * n * d * (w + four * s + two * d)).value();
}

inline std::uint64_t count_flops(const TransformerShape& x) {
  validate(x);
  using detail::Checked;
  const Checked d = x.d, n = x.n, s = x.s, v = x.v, w = x.w, h = x.h;
  const Checked two = 2;
  return (two * s * v * d + two * d * n * s * (w + two * d + s) + n * h * s * s).value();
}

inline std::uint64_t count(const TransformerShape& x, CostKind kind) {
  switch (kind) {
    case CostKind::params:
      return count_params(x);
    case CostKind::memcpys:
      return count_memcpys(x);
    case CostKind::flops:
      return count_flops(x);
  }
  return 0;
}

struct CostEntry {
  std::string label;
  std::uint64_t count = 0;
};

struct CostBreakdown {
  CostKind kind = CostKind::params;
  std::vector<CostEntry> per_component;
  std::uint64_t total = 0;
};

// Component-by-component count. Per-layer rows are already multiplied by n.
// For params the total exceeds count_params by n*d + 2d: the component list
// carries a d-sized bias on the MLP output and a final 2d norm that the
// closed form omits.
inline CostBreakdown itemized_breakdown(const TransformerShape& x, CostKind kind) {
  validate(x);
  using detail::Checked;
  const Checked d = x.d, n = x.n, s = x.s, v = x.v, w = x.w, h = x.h;
  const Checked hd = x.head_dim();

  CostBreakdown out;
  out.kind = kind;
  auto layer = [&](std::string label, Checked per_layer) {
    out.per_component.push_back({std::move(label), (n * per_layer).value()});
  };
  auto once = [&](std::string label, Checked c) { out.per_component.push_back({std::move(label), c.value()}); };

  switch (kind) {
    case CostKind::flops:
      layer("Produce Q, K and V inside the attention", Checked(3) * s * d * d);
      layer("Compute QK^T", h * (s * s * hd));
      layer("Apply softmax", h * (s * s));
      layer("Multiply by V", h * (s * s * hd));
      layer("Projection layer to recombine the heads", s * d * d);
      layer("The two layers of the MLP", s * d * w + s * w * d);
      once("Embedding of the input", s * v * d);
      once("Embedding of the output", s * v * d);
      break;
    case CostKind::memcpys:
      layer("Produce Q, K and V inside the attention", Checked(3) * (s * d + d * d));
      layer("Compute QK^T", h * (s * hd + s * hd));
      layer("Apply softmax", h * (s * s));
      layer("Multiply by V", h * (s * s + s * hd));
      layer("Projection layer to recombine the heads", s * d + d * d);
      layer("MLP", s * d + d * w + s * w + w * d);
      once("Embedding of the input", v * d + s * v);
      once("Embedding of the output", v * d + s * v);
      break;
    case CostKind::params:
      layer("Q, K and V inside the attention", Checked(3) * (d + d * d));
      layer("Layer norms before and after the attention", Checked(4) * d);
      layer("Projection layer to recombine the heads", d * d + d);
      layer("MLP matrices", Checked(2) * d * w + d + w);
      once("Norm layer after the transformers", Checked(2) * d);
      once("Embedding matrix", v * d);
      break;
  }
  Checked total = 0;
  for (const auto& e : out.per_component) total = total + Checked(e.count);
  out.total = total.value();
  return out;
}

// Shape with real-valued fields, used for derivatives and relaxation.
struct ContinuousShape {
  double d = 1, n = 1, s = 1, v = 1, w = 1, h = 1;

  static ContinuousShape from(const TransformerShape& x) {
    return {static_cast<double>(x.d), static_cast<double>(x.n), static_cast<double>(x.s),
            static_cast<double>(x.v), static_cast<double>(x.w), static_cast<double>(x.h)};
  }
};

inline double evaluate(const ContinuousShape& x, CostKind kind) {
  const auto [d, n, s, v, w, h] = x;
  switch (kind) {
    case CostKind::params:
      return v * d + n * d * (8 + 2 * w + 4 * d) + n * w;
    case CostKind::memcpys:
      return 2 * v * d + 2 * s * v + n * s * (w + 2 * h * s) + 2 * n * d * (w + 4 * s + 2 * d);
    case CostKind::flops:
      return 2 * s * v * d + 2 * d * n * s * (w + 2 * d + s) + n * h * s * s;
  }
  return 0;
}

// Partial derivatives of a count with respect to d, n, w, h, s.
struct CostGradient {
  double dd = 0, dn = 0, dw = 0, dh = 0, ds = 0;
};

inline CostGradient accounting_gradients(const ContinuousShape& x, CostKind kind) {
  const auto [d, n, s, v, w, h] = x;
  switch (kind) {
    case CostKind::params:
      return {v + n * (8 + 2 * w + 8 * d), d * (8 + 2 * w + 4 * d) + w, 2 * n * d + n, 0.0, 0.0};
    case CostKind::memcpys:
      return {2 * v + 2 * n * (w + 4 * s) + 8 * n * d,
              s * (w + 2 * h * s) + 2 * d * (w + 4 * s + 2 * d),
              n * s + 2 * n * d,
              2 * n * s * s,
              2 * v + n * (w + 4 * h * s) + 8 * n * d};
    case CostKind::flops:
      return {2 * s * v + 2 * n * s * (w + s) + 8 * d * n * s,
              2 * d * s * (w + 2 * d + s) + h * s * s,
              2 * d * n * s,
              n * s * s,
              2 * v * d + 2 * d * n * (w + 2 * d) + 4 * d * n * s + 2 * n * h * s};
  }
  return {};
}

inline CostGradient accounting_gradients(const TransformerShape& x, CostKind kind) {
  validate(x);
  return accounting_gradients(ContinuousShape::from(x), kind);
}

}  // namespace hyperloss
