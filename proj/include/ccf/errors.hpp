#pragma once

#include <stdexcept>
#include <string>

namespace ccf {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad hyperparameters, empty universes, degenerate ratios, shard misuse.
struct ConfigError : Error {
  using Error::Error;
};

// File parse failures, record validation failures, insufficient negatives.
struct DataError : Error {
  using Error::Error;
};

// Id not resolvable and hashing is disabled.
struct MissingEntityError : Error {
  using Error::Error;
};

// Dimension mismatch (content features vs matrix, checkpoint vs config).
struct ShapeError : Error {
  using Error::Error;
};

// Loss applied to a record it cannot handle (empty decision set on the
// plain losses, singleton offer on hinge, no-response without thresholds).
struct WrongLossError : Error {
  using Error::Error;
};

}  // namespace ccf
