#pragma once

#include <stdexcept>
#include <string>

namespace aatk {

/// Base class for all toolkit errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Malformed input: wrong dimensions, bad flags, unparsable definitions.
/// Maps to CLI exit code 1.
class InvalidInputError : public Error {
public:
    using Error::Error;
};

/// A hypothesis of the construction looks false on this data
/// (non-involutive integrals, singular point, incomplete field, rank drop...).
/// Maps to CLI exit code 2.
class AssumptionViolationError : public Error {
public:
    using Error::Error;
};

/// A numerical procedure failed to converge or lost conditioning.
/// Maps to CLI exit code 3.
class NumericalError : public Error {
public:
    using Error::Error;
};

// -- assumption violations ---------------------------------------------------

class InvolutionError : public AssumptionViolationError {
public:
    using AssumptionViolationError::AssumptionViolationError;
};

class RegularityError : public AssumptionViolationError {
public:
    using AssumptionViolationError::AssumptionViolationError;
};

/// Step budget exhausted before reaching the requested flow parameter.
class IncompletenessError : public AssumptionViolationError {
public:
    using AssumptionViolationError::AssumptionViolationError;
};

/// Trajectory norm exploded; the vector field is not complete here.
class BlowUpError : public AssumptionViolationError {
public:
    using AssumptionViolationError::AssumptionViolationError;
};

/// Return candidates are not integer combinations of one lattice basis.
class InconsistentLatticeError : public AssumptionViolationError {
public:
    using AssumptionViolationError::AssumptionViolationError;
};

/// det C(r) fell below threshold along continuation.
class ShrinkNeighbourhoodError : public AssumptionViolationError {
public:
    using AssumptionViolationError::AssumptionViolationError;
};

/// Torus rank changed across the base grid.
class NonDiffeomorphicLeavesError : public AssumptionViolationError {
public:
    using AssumptionViolationError::AssumptionViolationError;
};

/// Degenerate Newton system on a fibre.
class DegenerateFibreError : public AssumptionViolationError {
public:
    using AssumptionViolationError::AssumptionViolationError;
};

/// Loop integrals of the base two-form are path dependent.
class NonExactnessError : public AssumptionViolationError {
public:
    using AssumptionViolationError::AssumptionViolationError;
};

// -- numerical failures ------------------------------------------------------

class EvaluationError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class DegeneracyError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class RefinementError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class SectionConstructionError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

/// Shooting for chart coordinates failed: point not on a charted fibre.
class OffFibreError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class ChartFailureError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class ConservationError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

}  // namespace aatk
