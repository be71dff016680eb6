#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace prefrank {

/// Base class for all prefrank errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& message) : std::runtime_error(message) {}
};

/// Invalid or inconsistent configuration (CLI maps these to exit code 2).
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& message) : Error(message) {}
};

/// Problems with input data or files (CLI maps these to exit code 3).
class DataError : public Error {
public:
    explicit DataError(const std::string& message) : Error(message) {}
};

class IndexOutOfRangeError : public Error {
public:
    IndexOutOfRangeError(const std::string& what_index, std::size_t value, std::size_t bound)
        : Error(what_index + " index " + std::to_string(value) + " out of range [0, " +
                std::to_string(bound) + ")") {}
};

class DuplicateEntryError : public Error {
public:
    DuplicateEntryError(std::size_t item, std::size_t user)
        : Error("duplicate rating entry for (item " + std::to_string(item) + ", user " +
                std::to_string(user) + ")"),
          item_(item),
          user_(user) {}

    std::size_t item() const { return item_; }
    std::size_t user() const { return user_; }

private:
    std::size_t item_;
    std::size_t user_;
};

class SameUserError : public Error {
public:
    explicit SameUserError(std::size_t u) : Error("user pair requires two distinct users, got " + std::to_string(u) + " twice") {}
};

class SameItemError : public Error {
public:
    explicit SameItemError(std::size_t i) : Error("item pair requires two distinct items, got " + std::to_string(i) + " twice") {}
};

class MalformedPreferenceMatrixError : public Error {
public:
    MalformedPreferenceMatrixError(std::size_t i, std::size_t j)
        : Error("preference matrix violates antisymmetry at items (" + std::to_string(i) + ", " +
                std::to_string(j) + ")") {}
};

class NotPermutationError : public Error {
public:
    explicit NotPermutationError(std::size_t user)
        : Error("ranking for user " + std::to_string(user) + " is not a permutation of [1, n_items]") {}
};

class InvalidConfigError : public ConfigError {
public:
    explicit InvalidConfigError(const std::string& message) : ConfigError(message) {}
};

class ShapeMismatchError : public Error {
public:
    explicit ShapeMismatchError(const std::string& message) : Error(message) {}
};

class InsufficientPairsError : public Error {
public:
    explicit InsufficientPairsError(std::size_t n_items)
        : Error("metric needs at least one pair of test items with distinct ratings (got " +
                std::to_string(n_items) + " items)") {}
};

class ConstantTruthError : public Error {
public:
    ConstantTruthError() : Error("all test ratings are equal; rank correlation undefined") {}
};

class InsufficientItemsError : public Error {
public:
    InsufficientItemsError(std::size_t have, std::size_t need)
        : Error("metric needs at least " + std::to_string(need) + " test items, got " +
                std::to_string(have)) {}
};

class ParseError : public DataError {
public:
    ParseError(std::size_t line, const std::string& message)
        : DataError("parse error at line " + std::to_string(line) + ": " + message), line_(line) {}

    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

class EmptyFileError : public DataError {
public:
    explicit EmptyFileError(const std::string& path) : DataError("no ratings found in " + path) {}
};

class NotEnoughQualifyingUsersError : public DataError {
public:
    NotEnoughQualifyingUsersError(std::size_t have, std::size_t need)
        : DataError("only " + std::to_string(have) + " users qualify, need " + std::to_string(need)) {}
};

}  // namespace prefrank
