// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace ramp {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input: bad JSON, bad CSV row, wrong column count.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Well-formed input that violates a domain invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A requested operation cannot be carried out on the given data
/// (empty pool, unreachable balancedness, degenerate fit design).
class DomainError : public Error {
 public:
  using Error::Error;
};

}  // namespace ramp
