#pragma once

#include <stdexcept>
#include <string>

namespace ddd {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// --- signal layer ---

class ChannelNotFound : public Error {
 public:
  explicit ChannelNotFound(const std::string& channel)
      : Error("channel not found: " + channel), channel_(channel) {}
  const std::string& channel() const { return channel_; }

 private:
  std::string channel_;
};

class UnsupportedResample : public Error {
 public:
  using Error::Error;
};

// --- dataset layer ---

class SchemaError : public Error {
 public:
  explicit SchemaError(const std::string& column)
      : Error("schema violation, column: " + column), column_(column) {}
  const std::string& column() const { return column_; }

 private:
  std::string column_;
};

class TimestampError : public Error {
 public:
  TimestampError(std::size_t row, const std::string& msg)
      : Error("row " + std::to_string(row) + ": " + msg), row_(row) {}
  std::size_t row() const { return row_; }

 private:
  std::size_t row_;
};

class InvalidProfile : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

// --- labeling / features ---

class BandError : public Error {
 public:
  using Error::Error;
};

class InsufficientData : public Error {
 public:
  using Error::Error;
};

class InsufficientSamples : public Error {
 public:
  using Error::Error;
};

class EmptyInput : public Error {
 public:
  using Error::Error;
};

// --- selection / models ---

class DegenerateLabels : public Error {
 public:
  using Error::Error;
};

class BudgetTooSmall : public Error {
 public:
  using Error::Error;
};

class InvalidSearchSpace : public Error {
 public:
  using Error::Error;
};

// --- pipeline ---

class SplitError : public Error {
 public:
  using Error::Error;
};

class LeakageNotAcknowledged : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Wraps any error escaping a pipeline stage with the stage name.
class PipelineError : public Error {
 public:
  PipelineError(const std::string& stage, const std::string& msg)
      : Error("stage '" + stage + "': " + msg), stage_(stage) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

}  // namespace ddd
