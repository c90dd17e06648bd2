#pragma once

#include <stdexcept>
#include <string>

namespace npmv {

/// Base class for all library failures. `category()` is a stable, machine-readable tag.
class Error : public std::runtime_error {
public:
    Error(std::string category, const std::string& what)
        : std::runtime_error(what), category_(std::move(category)) {}

    const std::string& category() const noexcept { return category_; }

private:
    std::string category_;
};

/// Every kernel weight at the evaluation point is zero (bandwidth too small there).
class EmptyNeighborhoodError : public Error {
public:
    explicit EmptyNeighborhoodError(const std::string& what)
        : Error("empty-neighborhood", what) {}
};

/// Density estimate at the evaluation point is not positive.
class DegeneratePointError : public Error {
public:
    explicit DegeneratePointError(const std::string& what)
        : Error("degenerate-point", what) {}
};

/// An in-sample mean fit needed for a covariance residual could not be evaluated.
class ResidualEvaluationError : public Error {
public:
    explicit ResidualEvaluationError(const std::string& what)
        : Error("residual-evaluation", what) {}
};

/// A computed quantity violates an invariant that holds by construction.
class DiagnosticsError : public Error {
public:
    explicit DiagnosticsError(const std::string& what)
        : Error("diagnostics", what) {}
};

class SelectionError : public Error {
public:
    explicit SelectionError(const std::string& what)
        : Error("bandwidth-selection", what) {}
};

class ParseError : public Error {
public:
    explicit ParseError(const std::string& what)
        : Error("parse", what) {}
};

class AlignmentError : public Error {
public:
    explicit AlignmentError(const std::string& what)
        : Error("alignment", what) {}
};

}  // namespace npmv
