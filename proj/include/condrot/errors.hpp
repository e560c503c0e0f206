#ifndef CONDROT_ERRORS_HPP
#define CONDROT_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace condrot {

/// Argument outside an operation's domain (non-finite angle, eta outside [0,1], ...).
class InputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Conditioning on an outcome of zero probability.
class UndefinedConditionalError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// ExperimentConfig or scenario file violates its invariants; raised before any event is processed.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Internal simulation invariant broken after a run.
class SimulationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Least-squares fit cannot be formed (degenerate design, non-positive mean).
class FitError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Counting data inconsistent with a correction or calibration formula.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}

#endif
