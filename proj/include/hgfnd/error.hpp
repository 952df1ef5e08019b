#pragma once

#include <stdexcept>
#include <string>

namespace hgfnd {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed file contents (bad magic, truncated payload, unparsable line).
class FormatError : public Error {
public:
    using Error::Error;
};

/// Cross-file references that do not resolve (unknown news id, missing tree).
class IntegrityError : public Error {
public:
    using Error::Error;
};

/// Arguments or data that violate a documented precondition.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Label-stratified selection that cannot keep every class represented.
class StratificationError : public Error {
public:
    using Error::Error;
};

/// Tensor shapes that disagree with the configured model.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Non-finite loss or gradient during optimisation.
class NumericError : public Error {
public:
    using Error::Error;
};

} // namespace hgfnd
