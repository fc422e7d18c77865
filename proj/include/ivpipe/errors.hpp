#pragma once

#include <stdexcept>
#include <string>

namespace ivpipe {

// Base class for all pipeline failures. Subclasses exist so callers can map
// a failure onto an exit code or a per-prediction error class.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

#define IVPIPE_ERROR_CLASS(NAME)                          \
  class NAME : public Error {                             \
   public:                                                \
    explicit NAME(const std::string& msg) : Error(msg) {} \
  }

IVPIPE_ERROR_CLASS(IoError);            // unreadable or unwritable files
IVPIPE_ERROR_CLASS(SchemaError);        // malformed on-disk artifacts
IVPIPE_ERROR_CLASS(ConfigError);        // bad run configuration
IVPIPE_ERROR_CLASS(ProviderError);      // remote provider failed after retries
IVPIPE_ERROR_CLASS(DimensionMismatch);  // embedding vectors of unequal length
IVPIPE_ERROR_CLASS(RangeError);         // value outside a declared range
IVPIPE_ERROR_CLASS(MissingDependency);  // rule input has no usable value
IVPIPE_ERROR_CLASS(EmptyInput);         // metric asked to score nothing
IVPIPE_ERROR_CLASS(EmptyReference);     // error rate against an empty reference
IVPIPE_ERROR_CLASS(ContextOverflow);    // prompt exceeds the context budget
IVPIPE_ERROR_CLASS(SectionAbsent);      // section failed the match gate
IVPIPE_ERROR_CLASS(FormatError);        // unparseable provider output

#undef IVPIPE_ERROR_CLASS

}  // namespace ivpipe
