// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sparsedist {

/// Failure categories raised by the numerical modules.
enum class Errc {
  domain,            // argument outside the mathematical domain
  unsupported,       // valid math, but not an implemented case (e.g. alpha value)
  not_spd,           // matrix is not symmetric positive definite
  no_bracket,        // root bracket without a sign change
  no_convergence,    // iterative method exhausted its budget
  shape_mismatch,    // inconsistent dimensions
  parse,             // malformed serialized input
};

inline std::string_view errc_name(Errc c) {
  switch (c) {
    case Errc::domain: return "domain";
    case Errc::unsupported: return "unsupported";
    case Errc::not_spd: return "not_spd";
    case Errc::no_bracket: return "no_bracket";
    case Errc::no_convergence: return "no_convergence";
    case Errc::shape_mismatch: return "shape_mismatch";
    case Errc::parse: return "parse";
  }
  return "unknown";
}

/// Exception type thrown by every module; carries a category and a short
/// context string naming the operation that failed.
class Error : public std::runtime_error {
 public:
  Error(Errc code, std::string message, std::string context = {})
      : std::runtime_error(std::move(message)),
        code_(code),
        context_(std::move(context)) {}

  Errc code() const noexcept { return code_; }
  const std::string& context() const noexcept { return context_; }

 private:
  Errc code_;
  std::string context_;
};

namespace detail {

inline void require(bool ok, Errc code, const char* message,
                    const char* context) {
  if (!ok) throw Error(code, message, context);
}

}  // namespace detail
}  // namespace sparsedist
