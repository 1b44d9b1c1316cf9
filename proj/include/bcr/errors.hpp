#pragma once

#include <stdexcept>
#include <string>

namespace bcr {

struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Fewer than 3 usable landmarks, or zero spread, in a similarity alignment.
struct DegenerateAlignmentError : Error {
    using Error::Error;
};

struct DimensionMismatchError : Error {
    using Error::Error;
};

struct EmptyInputError : Error {
    using Error::Error;
};

struct DegenerateNormalizerError : Error {
    using Error::Error;
};

struct SingularSystemError : Error {
    using Error::Error;
};

struct SingleClassError : Error {
    using Error::Error;
};

struct UnimputableLandmarkError : Error {
    using Error::Error;
};

struct UnderPopulatedNodeError : Error {
    using Error::Error;
};

struct ParseError : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

struct ModelFormatError : Error {
    using Error::Error;
};

}  // namespace bcr
