#pragma once

#include <stdexcept>
#include <string>

namespace gsreg {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Invalid argument or violated precondition.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Malformed or unreadable file.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// The two renders share no masked pixels at the requested view.
class NoOverlapError : public Error {
 public:
  using Error::Error;
};

/// A pipeline stage could not produce a result (insufficient support,
/// divergence, disconnected fusion plan, ...).
class StageError : public Error {
 public:
  using Error::Error;
};

}  // namespace gsreg
