#pragma once

#include <stdexcept>
#include <string>

namespace exsimex {

/// Base class for all library errors. The category decides the CLI exit code.
class Error : public std::runtime_error {
 public:
  enum class Category { Input = 1, Estimation = 2, Configuration = 3 };

  Error(Category category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  Category category() const noexcept { return category_; }

 private:
  Category category_;
};

/// Malformed or inconsistent data: parse failures, dimension mismatches,
/// responses outside the support of the model family.
class InputError : public Error {
 public:
  explicit InputError(const std::string& what) : Error(Category::Input, what) {}
};

/// The numerical procedure failed: non-convergence, ill-posed correction,
/// extrapolant poles.
class EstimationError : public Error {
 public:
  explicit EstimationError(const std::string& what)
      : Error(Category::Estimation, what) {}
};

/// Invalid options: bad grid, unsupported family/feature combination,
/// negative lambda for a grid-only family, capacity limits.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what)
      : Error(Category::Configuration, what) {}
};

}  // namespace exsimex
