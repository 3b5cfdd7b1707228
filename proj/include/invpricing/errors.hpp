#pragma once

#include <stdexcept>
#include <string>

namespace invpricing {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class PriceOutOfBounds : public Error {
public:
  using Error::Error;
};

class ModelInvalid : public Error {
public:
  using Error::Error;
};

class UndefinedAtZero : public Error {
public:
  using Error::Error;
};

class RootBracketFailure : public Error {
public:
  using Error::Error;
};

/// The backward integration left the representable range of w.
class BlowUp : public Error {
public:
  BlowUp(const std::string& what, double z_reached) : Error(what), z_reached_(z_reached) {}
  double z_reached() const noexcept { return z_reached_; }

private:
  double z_reached_;
};

class StepUnderflow : public Error {
public:
  using Error::Error;
};

/// No level band exists where the marginal value exceeds the unit cost.
class NoBand : public Error {
public:
  using Error::Error;
};

class OutOfRange : public Error {
public:
  using Error::Error;
};

class NoSolution : public Error {
public:
  using Error::Error;
};

class ConfigInvalid : public Error {
public:
  using Error::Error;
};

class SpecInvalid : public Error {
public:
  using Error::Error;
};

class NoConvergence : public Error {
public:
  using Error::Error;
};

}  // namespace invpricing
