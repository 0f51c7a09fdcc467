#pragma once

#include <stdexcept>

namespace tessellate {

// Base class for every failure this library raises on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A window/step/border configuration is inconsistent with itself or with the
// tensor it is applied to.
class InvalidSpecError : public Error {
 public:
  using Error::Error;
};

// Operands whose shapes/layouts must agree do not.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// An index or region lies outside its valid range.
class OutOfRangeError : public Error {
 public:
  using Error::Error;
};

// A store (or other on-disk artifact) already exists where a new one was to
// be created.
class AlreadyExistsError : public Error {
 public:
  using Error::Error;
};

// Filesystem-level failure (unwritable path, short write, ...).
class IoError : public Error {
 public:
  using Error::Error;
};

// An on-disk artifact exists but does not parse as what it claims to be.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Output voxels with zero accumulated weight under the error policy.
class CoverageError : public Error {
 public:
  using Error::Error;
};

// A patch-result sequence ended before the plan was exhausted.
class IncompleteInputError : public Error {
 public:
  using Error::Error;
};

// A requested statistic has no defined value (empty denominator).
class UndefinedStatisticError : public Error {
 public:
  using Error::Error;
};

}  // namespace tessellate
