#pragma once

#include <stdexcept>
#include <string>

namespace keep {

// Invalid arguments use std::invalid_argument directly. The types below
// carve out the remaining error classes so callers (and the CLI exit-code
// mapping) can tell them apart.

/// A value or state violated an internal invariant (e.g. non-finite latent).
class InvalidStateError : public std::runtime_error {
public:
    explicit InvalidStateError(const std::string& what) : std::runtime_error(what) {}
};

/// Filesystem-level failure: missing file, unreadable path, short read.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

/// A file opened fine but its contents do not parse as the expected format.
class FormatError : public std::runtime_error {
public:
    explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

/// Geometry estimation failed because the input configuration is degenerate.
class RankDeficiencyError : public std::runtime_error {
public:
    explicit RankDeficiencyError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace keep
