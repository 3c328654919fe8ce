#pragma once

#include <stdexcept>
#include <string>

namespace nvid {

// Every failure raised by the toolkit derives from Error so callers (the CLI
// in particular) can map categories onto exit codes.
class Error : public std::runtime_error {
public:
	using std::runtime_error::runtime_error;
};

// Bad input: dimensions, parameter invariants, malformed files.
class InvalidInput : public Error {
public:
	using Error::Error;
};

// Iterative method did not meet its tolerance within the iteration cap.
class ConvergenceError : public Error {
public:
	using Error::Error;
};

// Eigenvector no longer resembles a product basis state (level anticrossing).
class LabelingError : public Error {
public:
	using Error::Error;
};

// A perturbative denominator fell below the admissible gap.
class NearResonanceError : public Error {
public:
	using Error::Error;
};

} // namespace nvid
