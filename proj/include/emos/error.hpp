#pragma once

#include <stdexcept>
#include <string>

namespace emos {

// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
public:
  using std::domain_error::domain_error;
};

// Inconsistent group layouts, dimension mismatches.
class StructureError : public std::logic_error {
public:
  using std::logic_error::logic_error;
};

// Malformed or invalid input data (CSV ingestion, cached matrices).
class DataError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Invalid or incomplete configuration / usage.
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Unrecoverable estimation failure.
class EstimationError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

} // namespace emos
