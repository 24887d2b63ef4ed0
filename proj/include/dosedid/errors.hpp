#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dosedid {

enum class ErrorKind {
  Io,
  MissingColumn,
  NonBinaryGroup,
  AsymmetricAdjacency,
  DuplicateUnitPeriod,
  MissingOutcome,
  MissingCentroid,
  InvalidInput,
  PeriodOutOfRange,
  NoUntaxedZip,
  MissingPrice,
  EmptyNeighborhood,
  SingularDesign,
  InsufficientRows,
  DegenerateDose,
  UnknownLearner,
  BandwidthDegenerate,
  GridOutsideSupport,
  AttNearZero,
  BootstrapAborted,
  InvalidSpec,
  InvalidConfig,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Io: return "Io";
    case ErrorKind::MissingColumn: return "MissingColumn";
    case ErrorKind::NonBinaryGroup: return "NonBinaryGroup";
    case ErrorKind::AsymmetricAdjacency: return "AsymmetricAdjacency";
    case ErrorKind::DuplicateUnitPeriod: return "DuplicateUnitPeriod";
    case ErrorKind::MissingOutcome: return "MissingOutcome";
    case ErrorKind::MissingCentroid: return "MissingCentroid";
    case ErrorKind::InvalidInput: return "InvalidInput";
    case ErrorKind::PeriodOutOfRange: return "PeriodOutOfRange";
    case ErrorKind::NoUntaxedZip: return "NoUntaxedZip";
    case ErrorKind::MissingPrice: return "MissingPrice";
    case ErrorKind::EmptyNeighborhood: return "EmptyNeighborhood";
    case ErrorKind::SingularDesign: return "SingularDesign";
    case ErrorKind::InsufficientRows: return "InsufficientRows";
    case ErrorKind::DegenerateDose: return "DegenerateDose";
    case ErrorKind::UnknownLearner: return "UnknownLearner";
    case ErrorKind::BandwidthDegenerate: return "BandwidthDegenerate";
    case ErrorKind::GridOutsideSupport: return "GridOutsideSupport";
    case ErrorKind::AttNearZero: return "AttNearZero";
    case ErrorKind::BootstrapAborted: return "BootstrapAborted";
    case ErrorKind::InvalidSpec: return "InvalidSpec";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
  }
  return "Unknown";
}

// Every failure raised by the library carries the module that raised it and a
// machine-readable kind; what() is the human message.
class Error : public std::runtime_error {
 public:
  Error(std::string module, ErrorKind kind, const std::string& message)
      : std::runtime_error(message), module_(std::move(module)), kind_(kind) {}

  const std::string& module() const noexcept { return module_; }
  ErrorKind kind() const noexcept { return kind_; }

 private:
  std::string module_;
  ErrorKind kind_;
};

}  // namespace dosedid
