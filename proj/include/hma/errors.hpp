// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace hma {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A point or section left the domain it must live in. For catalog models this
/// only happens when the model data itself is corrupt.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// The maximizing group element sits on the boundary of the truncation ball,
/// so the supremum over the deck group may not have been found. Enlarge the
/// radius and retry.
class TruncationSaturated : public Error {
 public:
  TruncationSaturated(const std::string& where, std::vector<int> word)
      : Error(where + ": maximizer on truncation shell, enlarge radius"), word_(std::move(word)) {}
  const std::vector<int>& word() const { return word_; }

 private:
  std::vector<int> word_;
};

/// Iterative solver stopped without meeting its tolerance. Carries the last
/// accepted iterate so callers can still emit partial results.
class NotConverged : public Error {
 public:
  NotConverged(const std::string& what, int iterations, double residual, double value,
               std::vector<double> last_iterate)
      : Error(what),
        iterations_(iterations),
        residual_(residual),
        value_(value),
        last_iterate_(std::move(last_iterate)) {}

  int iterations() const { return iterations_; }
  double residual() const { return residual_; }
  double value() const { return value_; }
  const std::vector<double>& last_iterate() const { return last_iterate_; }

 private:
  int iterations_;
  double residual_;
  double value_;
  std::vector<double> last_iterate_;
};

class EmptyCell : public Error {
 public:
  EmptyCell(const std::string& what, int atom) : Error(what), atom_(atom) {}
  int atom() const { return atom_; }

 private:
  int atom_;
};

class NuDegenerate : public Error {
 public:
  using Error::Error;
};

class OverflowGuard : public Error {
 public:
  using Error::Error;
};

class EntropyInfinite : public Error {
 public:
  using Error::Error;
};

class UnsupportedDimension : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& message)
      : Error(field + ": " + message), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

}  // namespace hma
