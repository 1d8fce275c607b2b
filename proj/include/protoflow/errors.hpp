#ifndef PROTOFLOW_ERRORS_HPP
#define PROTOFLOW_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace protoflow {

// Base for all protoflow failures that abort a stage. Recoverable
// conditions (unmatched steps, unresolved signals, missing parameters)
// are reported as review flags instead of thrown.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

class SpecParseError : public Error {
public:
    using Error::Error;
};

class SpecValidationError : public Error {
public:
    SpecValidationError(const std::string& symbol, const std::string& what)
        : Error(what), symbol_(symbol) {}
    const std::string& symbol() const { return symbol_; }

private:
    std::string symbol_;
};

class LengthMismatch : public Error {
public:
    using Error::Error;
};

class IllegalTransition : public Error {
public:
    IllegalTransition(std::size_t instruction, const std::string& what)
        : Error(what), instruction_(instruction) {}
    std::size_t instruction() const { return instruction_; }

private:
    std::size_t instruction_ = 0;
};

class ExtractionUnavailable : public Error {
public:
    using Error::Error;
};

class MalformedReply : public Error {
public:
    using Error::Error;
};

class RuleCompileError : public Error {
public:
    using Error::Error;
};

class StuckExecution : public Error {
public:
    using Error::Error;
};

class InvalidEdit : public Error {
public:
    using Error::Error;
};

class InconsistentInputs : public Error {
public:
    using Error::Error;
};

class NoActionFound : public Error {
public:
    using Error::Error;
};

}  // namespace protoflow

#endif
