#pragma once

#include <stdexcept>
#include <string>

namespace tlfd {

/// Invalid physical parameters or matrices (singular Cap/L, bad ratings, ...).
class ModelError : public std::invalid_argument {
public:
    explicit ModelError(const std::string& what) : std::invalid_argument(what) {}
};

/// Filter synthesis failure: unobservable event vector, rank deficiency,
/// dependent generators, infeasible excess subspace.
class DesignError : public std::runtime_error {
public:
    explicit DesignError(const std::string& what) : std::runtime_error(what) {}
};

/// Simulation setup/runtime problems (fault placement, instability).
class SimError : public std::runtime_error {
public:
    explicit SimError(const std::string& what) : std::runtime_error(what) {}
};

/// Measurement-stream problems seen by the diagnosis engine.
class StreamError : public std::runtime_error {
public:
    explicit StreamError(const std::string& what) : std::runtime_error(what) {}
};

/// Config / file-format problems. Messages name the offending field or row.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace tlfd
