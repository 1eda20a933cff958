#pragma once

#include <stdexcept>
#include <string>

namespace splitdmd {

// Base of every error thrown by the library. Callers that only care about
// "something in the pipeline failed" can catch this one type.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DomainError : public Error {
public:
    using Error::Error;
};

class ShapeError : public Error {
public:
    using Error::Error;
};

class IndexError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class EmptyIntervalError : public Error {
public:
    using Error::Error;
};

class InitError : public Error {
public:
    using Error::Error;
};

class ResolutionError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class RankError : public Error {
public:
    RankError(const std::string& what, long achievable_rank)
        : Error(what), achievable_rank_(achievable_rank) {}

    long achievable_rank() const noexcept { return achievable_rank_; }

private:
    long achievable_rank_;
};

class IntegrationError : public Error {
public:
    IntegrationError(const std::string& what, double failure_time)
        : Error(what), failure_time_(failure_time) {}

    double failure_time() const noexcept { return failure_time_; }

private:
    double failure_time_;
};

}  // namespace splitdmd
