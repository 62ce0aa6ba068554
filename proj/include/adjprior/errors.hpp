#pragma once

#include <stdexcept>
#include <string>

namespace adjprior {

// Base class for everything thrown by this library.
struct error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Operating-system level read/write failure (missing file, unwritable path).
struct io_error : error {
  using error::error;
};

// Domain or argument validation failure.
struct validation_error : error {
  using error::error;
};

// Malformed on-disk artifact. Subclasses distinguish the failure mode so
// callers and tests can tell them apart.
struct format_error : validation_error {
  using validation_error::validation_error;
};

// File does not start with the expected container magic.
struct bad_magic_error : format_error {
  using format_error::format_error;
};

// File ends before the header-declared payload is complete.
struct truncated_payload_error : format_error {
  using format_error::format_error;
};

// Header is unparsable, internally inconsistent, or disagrees with the
// payload (for example trailing bytes past the declared extent).
struct header_mismatch_error : format_error {
  using format_error::format_error;
};

// Label payload carries a value outside [0, num_classes).
struct label_range_error : format_error {
  using format_error::format_error;
};

}  // namespace adjprior
