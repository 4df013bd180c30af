#pragma once

#include <stdexcept>
#include <string>

namespace agenteval {

enum class ErrorCode {
    kValidation,
    kDuplicate,
    kRange,
    kNotFound,
    kConflict,
    kBackend,
    kStorage,
    kUsage,
};

const char* to_string(ErrorCode code);

// Base of every exception the library throws. Callers that only care about
// the category switch on code().
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

class ValidationError : public Error {
public:
    explicit ValidationError(const std::string& message)
        : Error(ErrorCode::kValidation, message) {}
};

class DuplicateError : public Error {
public:
    explicit DuplicateError(const std::string& message)
        : Error(ErrorCode::kDuplicate, message) {}
};

class RangeError : public Error {
public:
    explicit RangeError(const std::string& message)
        : Error(ErrorCode::kRange, message) {}
};

class NotFoundError : public Error {
public:
    explicit NotFoundError(const std::string& message)
        : Error(ErrorCode::kNotFound, message) {}
};

class ConflictError : public Error {
public:
    explicit ConflictError(const std::string& message)
        : Error(ErrorCode::kConflict, message) {}
};

class StorageError : public Error {
public:
    explicit StorageError(const std::string& message)
        : Error(ErrorCode::kStorage, message) {}
};

class UsageError : public Error {
public:
    explicit UsageError(const std::string& message)
        : Error(ErrorCode::kUsage, message) {}
};

}  // namespace agenteval
