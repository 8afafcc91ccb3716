#pragma once

#include <cmath>
#include <optional>

#include "skyloss/error.hpp"

namespace testing {

/// Kind of the skyloss::Error thrown by `fn`, or nullopt when nothing is thrown.
template <typename Fn>
std::optional<skyloss::ErrorKind> error_kind(Fn&& fn) {
  try {
    fn();
  } catch (const skyloss::Error& e) {
    return e.kind();
  }
  return std::nullopt;
}

inline bool rel_close(double a, double b, double tol) {
  return std::abs(a - b) <= tol * std::max(std::abs(a), std::abs(b));
}

}  // namespace testing

#define CHECK_ERROR(expr, kind_) CHECK(testing::error_kind([&] { (void)(expr); }) == std::optional(kind_))
