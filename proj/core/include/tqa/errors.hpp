#pragma once

#include <stdexcept>
#include <string>

namespace tqa {

/// Base class for every error the engine raises on purpose.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// --- corpus ---
class ParseError : public Error {
public:
    using Error::Error;
};
class ReferentialError : public Error {
public:
    using Error::Error;
};
class DuplicateIdError : public Error {
public:
    using Error::Error;
};
class UnknownIdError : public Error {
public:
    using Error::Error;
};
class UnknownLessonError : public UnknownIdError {
public:
    using UnknownIdError::UnknownIdError;
};

// --- vectors ---
class DimensionMismatch : public Error {
public:
    using Error::Error;
};
class ZeroVectorError : public Error {
public:
    using Error::Error;
};

// --- providers (embedding, rerank, model endpoints) ---
class ProviderUnavailable : public Error {
public:
    using Error::Error;
};
class TimeoutError : public ProviderUnavailable {
public:
    using ProviderUnavailable::ProviderUnavailable;
};
class AuthError : public Error {
public:
    using Error::Error;
};
class MalformedServiceResponse : public Error {
public:
    using Error::Error;
};
class ModelIdMismatch : public Error {
public:
    using Error::Error;
};
class EmptyTextError : public Error {
public:
    using Error::Error;
};

// --- persistence ---
class IoError : public Error {
public:
    using Error::Error;
};
class FormatVersionError : public Error {
public:
    using Error::Error;
};
class ChecksumError : public Error {
public:
    using Error::Error;
};
class CacheCorruption : public Error {
public:
    using Error::Error;
};

// --- prompting / evaluation / configuration ---
class BudgetUnsatisfiable : public Error {
public:
    using Error::Error;
};
class EmptyInputError : public Error {
public:
    using Error::Error;
};
class ConfigError : public Error {
public:
    using Error::Error;
};

} // namespace tqa
