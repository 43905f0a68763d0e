#pragma once

#include <stdexcept>
#include <string>

namespace cycorr {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// File content does not follow the expected byte layout.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Well-formed container holding unusable values (NaN, Inf, out of range).
class DataError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class EmptyRegionError : public Error {
 public:
  using Error::Error;
};

class DegenerateDescriptorError : public Error {
 public:
  using Error::Error;
};

class UndefinedMetricError : public Error {
 public:
  using Error::Error;
};

class DegenerateGeometryError : public Error {
 public:
  using Error::Error;
};

// Missing or unreadable input files.
class IngestionError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Failure inside the matching pipeline, annotated with the pair it happened on.
class PipelineError : public Error {
 public:
  using Error::Error;
};

}  // namespace cycorr
