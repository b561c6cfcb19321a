#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace ital {

/// Position of a sample in the dataset (0-based row of the feature matrix).
using Index = std::size_t;
using IdList = std::vector<Index>;

using FeatureMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid hyper-parameters, options or strategy names.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// A factorization or inversion failed even after jitter.
class NumericalError : public Error {
public:
    using Error::Error;
};

/// Violated precondition of an operation (duplicate ids, bad label values, ...).
class ContractError : public Error {
public:
    using Error::Error;
};

/// Request exceeds a configured size limit.
class CapacityError : public Error {
public:
    using Error::Error;
};

class IngestError : public Error {
public:
    using Error::Error;
};

class NotFoundError : public Error {
public:
    using Error::Error;
};

class ConflictError : public Error {
public:
    using Error::Error;
};

}  // namespace ital
