#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sfcmc {

// Broad failure categories. The CLI maps them onto exit statuses 2, 3 and 4.
enum class ErrorKind {
    Input,    // bad parameters, malformed files, under-determined fits
    Refusal,  // phase or feasibility refusals
    Numeric,  // internal numeric anomalies
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

class ParameterDomainError : public Error {
public:
    explicit ParameterDomainError(const std::string& what) : Error(ErrorKind::Input, what) {}
};

class ReductionAnomalyError : public Error {
public:
    ReductionAnomalyError(const std::string& what, std::size_t observed_rank)
        : Error(ErrorKind::Numeric, what), observed_rank_(observed_rank) {}
    std::size_t observed_rank() const noexcept { return observed_rank_; }

private:
    std::size_t observed_rank_;
};

class InfeasibleWealthError : public Error {
public:
    explicit InfeasibleWealthError(const std::string& what) : Error(ErrorKind::Refusal, what) {}
};

class InfiniteMeanError : public Error {
public:
    explicit InfiniteMeanError(const std::string& what) : Error(ErrorKind::Input, what) {}
};

class FitDegenerateError : public Error {
public:
    explicit FitDegenerateError(const std::string& what) : Error(ErrorKind::Input, what) {}
};

// Eq. rho(mu) = rho has no root: the density lies in the condensed regime.
class NoSolutionError : public Error {
public:
    explicit NoSolutionError(const std::string& what) : Error(ErrorKind::Refusal, what) {}
};

// Non-integrable exponential tilt.
class DomainError : public Error {
public:
    explicit DomainError(const std::string& what) : Error(ErrorKind::Input, what) {}
};

class ResolutionError : public Error {
public:
    explicit ResolutionError(const std::string& what) : Error(ErrorKind::Numeric, what) {}
};

class PhaseRefusalError : public Error {
public:
    explicit PhaseRefusalError(const std::string& what) : Error(ErrorKind::Refusal, what) {}
};

class InitializationError : public Error {
public:
    explicit InitializationError(const std::string& what) : Error(ErrorKind::Refusal, what) {}
};

class DegenerateIncomeError : public Error {
public:
    explicit DegenerateIncomeError(const std::string& what) : Error(ErrorKind::Input, what) {}
};

class EstimationInfeasibleError : public Error {
public:
    explicit EstimationInfeasibleError(const std::string& what) : Error(ErrorKind::Refusal, what) {}
};

}  // namespace sfcmc
