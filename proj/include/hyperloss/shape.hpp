#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hyperloss/errors.hpp"

namespace hyperloss {

// Hyperparameters of a decoder-only transformer.
//   d  embedding dimension      n  number of layers
//   s  sequence length          v  vocabulary size
//   w  MLP width                h  attention heads
struct TransformerShape {
  std::uint64_t d = 1;
  std::uint64_t n = 1;
  std::uint64_t s = 1;
  std::uint64_t v = 1;
  std::uint64_t w = 1;
  std::uint64_t h = 1;

  std::uint64_t head_dim() const { return d / h; }

  friend bool operator==(const TransformerShape&, const TransformerShape&) = default;
};

inline std::string to_string(const TransformerShape& x) {
  return "(d=" + std::to_string(x.d) + ", n=" + std::to_string(x.n) + ", s=" + std::to_string(x.s) +
         ", v=" + std::to_string(x.v) + ", w=" + std::to_string(x.w) + ", h=" + std::to_string(x.h) + ")";
}

// Throws ValidationError unless every field is >= 1 and h divides d.
inline void validate(const TransformerShape& x) {
  const std::pair<const char*, std::uint64_t> fields[] = {
      {"d", x.d}, {"n", x.n}, {"s", x.s}, {"v", x.v}, {"w", x.w}, {"h", x.h}};
  for (const auto& [name, value] : fields) {
    if (value < 1) throw ValidationError(std::string("shape field ") + name + " must be >= 1");
  }
  if (x.d % x.h != 0) {
    throw ValidationError("embedding dimension d=" + std::to_string(x.d) +
                          " is not divisible by head count h=" + std::to_string(x.h));
  }
}

inline bool is_valid(const TransformerShape& x) {
  try {
    validate(x);
    return true;
  } catch (const ValidationError&) {
    return false;
  }
}

// Soft range check against the sweep the cost model was calibrated on.
// Values outside produce warnings, never errors.
inline std::vector<std::string> range_warnings(const TransformerShape& x) {
  std::vector<std::string> out;
  auto check = [&](const char* name, std::uint64_t value, std::uint64_t lo, std::uint64_t hi) {
    if (value < lo || value > hi) {
      out.push_back(std::string(name) + "=" + std::to_string(value) + " outside calibrated range [" +
                    std::to_string(lo) + ", " + std::to_string(hi) + "]");
    }
  };
  check("d", x.d, 1u << 5, 1u << 12);
  check("n", x.n, 1, 8);
  check("w", x.w, 1u << 8, 1u << 15);
  check("h", x.h, 1, 1u << 7);
  return out;
}

}  // namespace hyperloss
