#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace coupledrec {

using Index = Eigen::Index;

/// Bad user input: malformed files, unknown ids, flags outside their range.
/// The CLI maps it to exit code 2.
class InputError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// A value code or object that does not belong to the attribute domain queried.
class DomainError : public std::domain_error {
public:
  using std::domain_error::domain_error;
};

/// Shortest decimal text that parses back to exactly `value`.
std::string to_roundtrip_string(double value);

/// Fixed-point rendering with `decimals` digits after the point.
std::string to_fixed_string(double value, int decimals);

/// `%.Ng` rendering with `digits` significant digits.
std::string to_significant_string(double value, int digits);

}  // namespace coupledrec
