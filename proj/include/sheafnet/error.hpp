#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace sheafnet {

/// Base class for every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed data: dimension mismatches, out-of-range indices, bad documents.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// A witness generator was asked to run outside the hypotheses it needs.
class PreconditionFailed : public Error {
 public:
  using Error::Error;
};

/// Local sections disagree on an overlap, so they cannot be glued.
class IncompatibleLocals : public Error {
 public:
  IncompatibleLocals(std::size_t first, std::size_t second, double deviation)
      : Error("local sections " + std::to_string(first) + " and " + std::to_string(second) +
              " disagree on their overlap (max deviation " + std::to_string(deviation) + ")"),
        pair_(first, second),
        deviation_(deviation) {}

  std::pair<std::size_t, std::size_t> offending_pair() const noexcept { return pair_; }
  double deviation() const noexcept { return deviation_; }

 private:
  std::pair<std::size_t, std::size_t> pair_;
  double deviation_;
};

/// A cosheaf kernel element could not be split over pairwise intersections.
class DecompositionFailed : public Error {
 public:
  DecompositionFailed(std::size_t element, std::string what)
      : Error(std::move(what)), element_(element) {}

  std::size_t element() const noexcept { return element_; }

 private:
  std::size_t element_;
};

}  // namespace sheafnet
