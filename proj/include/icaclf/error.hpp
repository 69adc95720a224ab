#pragma once

#include "icaclf/config.hpp"

#include <stdexcept>
#include <string>

namespace icaclf::inline ICACLF_ABI {

// Base class for every error raised by the library. Callers that only need
// a diagnostic can catch this; tests match the concrete subclasses.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define ICACLF_DEFINE_ERROR(Name, Base)   \
  class Name : public Base {              \
   public:                                \
    using Base::Base;                     \
  };

ICACLF_DEFINE_ERROR(DimensionError, Error)
ICACLF_DEFINE_ERROR(ParameterError, Error)
ICACLF_DEFINE_ERROR(DegenerateBatchError, Error)
ICACLF_DEFINE_ERROR(LabelError, Error)
ICACLF_DEFINE_ERROR(ContractError, Error)
ICACLF_DEFINE_ERROR(ConfigError, Error)
ICACLF_DEFINE_ERROR(DomainMismatchError, Error)
ICACLF_DEFINE_ERROR(DegenerateInputError, Error)
ICACLF_DEFINE_ERROR(PartitionError, Error)
ICACLF_DEFINE_ERROR(ProtocolError, Error)
ICACLF_DEFINE_ERROR(SchemaError, Error)
ICACLF_DEFINE_ERROR(EvaluationError, Error)

ICACLF_DEFINE_ERROR(IoError, Error)
ICACLF_DEFINE_ERROR(FormatError, IoError)
ICACLF_DEFINE_ERROR(VersionError, IoError)
ICACLF_DEFINE_ERROR(TruncationError, IoError)
ICACLF_DEFINE_ERROR(ChecksumError, IoError)

#undef ICACLF_DEFINE_ERROR

}  // namespace icaclf
