#pragma once

#include <stdexcept>
#include <string>

namespace hmhf {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

/// Invalid grid, stepper or run configuration.
class ConfigError : public Error
{
  public:
    using Error::Error;
};

/// Caller broke an operation contract (mismatched grids, bad boundary data).
class ContractViolation : public Error
{
  public:
    using Error::Error;
};

/// Input does not satisfy a documented precondition (wrong sector, etc.).
class PreconditionError : public Error
{
  public:
    using Error::Error;
};

/// The scale equation has no root in the search bracket.
class NoBubbleError : public Error
{
  public:
    using Error::Error;
};

/// Track too short or too flat for a blow-up rate fit.
class FitUnreliableError : public Error
{
  public:
    using Error::Error;
};

/// Linear solve or time step produced a non-finite state.
class SolverError : public Error
{
  public:
    using Error::Error;
};

}  // namespace hmhf
