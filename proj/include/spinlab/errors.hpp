#pragma once

#include <stdexcept>
#include <string>

namespace spinlab {

/// Base class for all library errors.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// A request exceeded a hard resource ceiling (dense matrices, superoperator
/// exponentials, cumulant arity, ...). The message names the ceiling.
struct LimitExceeded : Error {
  using Error::Error;
};

/// Input failed structural validation (bad config, non-Hermitian Hamiltonian
/// piece, malformed operator, window too small, ...).
struct InvalidInput : Error {
  using Error::Error;
};

/// A numerical procedure could not meet its accuracy contract.
struct NumericalFailure : Error {
  using Error::Error;
};

/// An observable (or one of its translates) does not fit the finite window.
struct SupportOutsideWindow : InvalidInput {
  using InvalidInput::InvalidInput;
};

/// Dense representation requested for an operator supported on too many sites.
struct SupportTooLarge : LimitExceeded {
  using LimitExceeded::LimitExceeded;
};

/// Window longer than the configured dense-evolution ceiling.
struct WindowTooLarge : LimitExceeded {
  using LimitExceeded::LimitExceeded;
};

/// Periodic ring longer than the dense superoperator ceiling.
struct RingTooLarge : LimitExceeded {
  using LimitExceeded::LimitExceeded;
};

/// Cumulant arity above the enumeration cap.
struct ArityTooLarge : LimitExceeded {
  using LimitExceeded::LimitExceeded;
};

/// RK4 step-doubling error estimate exceeded the configured tolerance.
struct StepSizeRejected : NumericalFailure {
  using NumericalFailure::NumericalFailure;
};

/// Evolved operator weight reached the guard band at the window edge, so
/// finite-window results would no longer represent the infinite chain.
struct MarginViolation : NumericalFailure {
  using NumericalFailure::NumericalFailure;
};

/// Light-cone fit attempted with fewer than two threshold crossings.
struct FitDegenerate : NumericalFailure {
  using NumericalFailure::NumericalFailure;
};

/// No two-site density solves the requested telescoping (discrete divergence)
/// equation within tolerance.
struct UnsolvableTelescope : NumericalFailure {
  using NumericalFailure::NumericalFailure;
};

/// Internal assertion: a generator image that must be a discrete divergence
/// of a two-site current failed to split.
struct DivergenceSplitFailed : NumericalFailure {
  using NumericalFailure::NumericalFailure;
};

/// Extensive inner product between vectors at different wavenumbers.
struct WavenumberMismatch : InvalidInput {
  using InvalidInput::InvalidInput;
};

/// Model failed structural validation (conservation/detailed balance).
struct ModelInvalid : InvalidInput {
  using InvalidInput::InvalidInput;
};

/// Cumulant table is missing an entry required by the inversion.
struct IncompleteTable : InvalidInput {
  using InvalidInput::InvalidInput;
};

/// Configuration file failed validation; the message names the offending key.
struct ConfigInvalid : InvalidInput {
  using InvalidInput::InvalidInput;
};

}  // namespace spinlab
