#pragma once

#include <stdexcept>
#include <string>

namespace ham {

// Errors thrown by host-level operations (loading, validation, bad calls).
// Runtime faults inside interpreted programs are *not* exceptions; they are
// reported as ExecOutcome / CheckResult data so a search loop never dies.

struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct ParseError : Error {
  using Error::Error;
};

// Source used a form we deliberately do not support (quasiquote, macros, ...).
struct UnsupportedForm : Error {
  using Error::Error;
};

struct ValidationError : Error {
  using Error::Error;
};

// Argument outside an operation's domain (zeta s <= 1, horizon > 1, ...).
struct DomainError : Error {
  using Error::Error;
};

struct UnknownProcedure : Error {
  using Error::Error;
};

struct HeadMismatch : Error {
  using Error::Error;
};

struct ZeroProbability : Error {
  using Error::Error;
};

struct IncompleteDerivation : Error {
  using Error::Error;
};

struct AlreadyLeaf : Error {
  using Error::Error;
};

struct DuplicateSolutionId : Error {
  using Error::Error;
};

// A memory update needed a corpus record's derivation steps and found none.
struct MissingDerivation : Error {
  using Error::Error;
};

// Serialized memory state that cannot be decoded.
struct CorruptEncoding : Error {
  using Error::Error;
};

}  // namespace ham
