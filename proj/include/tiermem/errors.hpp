// Copyright 2026 The tiermem Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace tiermem {

// Root of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad inputs: shapes, configs, protocol violations. The CLI maps these to exit code 1.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Failures reading or writing bytes, including malformed trace files. Exit code 2.
class IoError : public Error {
 public:
  using Error::Error;
};

#define TIERMEM_DEFINE_ERROR(Name, Base) \
  class Name : public Base {             \
   public:                               \
    using Base::Base;                    \
  }

TIERMEM_DEFINE_ERROR(DimensionError, ValidationError);
TIERMEM_DEFINE_ERROR(EmptyInputError, ValidationError);
TIERMEM_DEFINE_ERROR(ConfigError, ValidationError);
TIERMEM_DEFINE_ERROR(NonMonotoneTimestamp, ValidationError);
TIERMEM_DEFINE_ERROR(FrameTooLarge, ValidationError);
TIERMEM_DEFINE_ERROR(FrozenMemory, ValidationError);
TIERMEM_DEFINE_ERROR(EmptyFrame, ValidationError);
TIERMEM_DEFINE_ERROR(BudgetUnsatisfiable, ValidationError);
TIERMEM_DEFINE_ERROR(SpecError, ValidationError);
TIERMEM_DEFINE_ERROR(NoSuchEvent, ValidationError);
TIERMEM_DEFINE_ERROR(UnknownVariant, ValidationError);

TIERMEM_DEFINE_ERROR(TraceFormatError, IoError);
TIERMEM_DEFINE_ERROR(BadMagic, TraceFormatError);
TIERMEM_DEFINE_ERROR(UnsupportedVersion, TraceFormatError);
TIERMEM_DEFINE_ERROR(TruncatedRecord, TraceFormatError);
TIERMEM_DEFINE_ERROR(DimMismatch, TraceFormatError);

#undef TIERMEM_DEFINE_ERROR

}  // namespace tiermem
