#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace stochray {

/// Base of every error the library throws.  Each subclass maps to one
/// failure family so callers (the CLI in particular) can dispatch on type.
class error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// A value outside the mathematical domain of an operation.
class domain_error : public error
{
public:
    using error::error;
};

/// The models hold only for r > 1 m.
class far_field_violation : public domain_error
{
public:
    explicit far_field_violation(double r)
        : domain_error("far-field constraint violated: r must exceed 1 m (got " + std::to_string(r) + ")")
        , r_(r)
    {
    }

    double r() const noexcept { return r_; }

private:
    double r_;
};

class unsupported_beta : public domain_error
{
public:
    explicit unsupported_beta(double beta)
        : domain_error("closed form only available for beta in {1/2, 1} (got " + std::to_string(beta) + ")")
    {
    }
};

/// An iterative computation stopped before meeting its tolerance.  The best
/// estimate and its error bound are kept so callers can decide what to do.
class non_convergence : public error
{
public:
    non_convergence(const std::string& what, double estimate, double error_bound)
        : error(what), estimate_(estimate), error_bound_(error_bound)
    {
    }

    double estimate() const noexcept { return estimate_; }
    double error_bound() const noexcept { return error_bound_; }

private:
    double estimate_;
    double error_bound_;
};

class source_in_closed_cell : public domain_error
{
public:
    using domain_error::domain_error;
};

class insufficient_samples : public error
{
public:
    using error::error;
};

class length_mismatch : public domain_error
{
public:
    length_mismatch(std::size_t a, std::size_t b)
        : domain_error("length mismatch: " + std::to_string(a) + " vs " + std::to_string(b))
    {
    }
};

class missing_spacing : public domain_error
{
public:
    using domain_error::domain_error;
};

/// Malformed text input.  line() is 1-based; 0 when not tied to a line.
class parse_error : public error
{
public:
    parse_error(const std::string& what, std::size_t line = 0)
        : error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line)
    {
    }

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class io_error : public error
{
public:
    using error::error;
};

} // namespace stochray
