#pragma once

// Reverse-mode differentiable scalars.
//
// A Var is either a constant (no tape) or a node on a Tape. Arithmetic on
// Vars evaluates exactly the same floating-point expressions as the plain
// double overloads in scalar.hpp, so the value channel is bit-identical to a
// double computation. Derivatives are accumulated by a single reverse sweep
// over the tape in gradient().

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "diffconst/scalar.hpp"

namespace diffconst::ad {

class GradError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class Tape;

class Var {
public:
    Var() = default;
    Var(double value) : value_(value) {}  // NOLINT: constants convert implicitly

    double value() const noexcept { return value_; }
    Tape* tape() const noexcept { return tape_; }
    int index() const noexcept { return index_; }
    bool is_constant() const noexcept { return tape_ == nullptr; }

    Var& operator+=(const Var& rhs);
    Var& operator-=(const Var& rhs);
    Var& operator*=(const Var& rhs);
    Var& operator/=(const Var& rhs);

private:
    friend class Tape;
    Var(double value, Tape* tape, int index) : value_(value), tape_(tape), index_(index) {}

    double value_ = 0.0;
    Tape* tape_ = nullptr;
    int index_ = -1;
};

/// Linear record of elementary operations. Each node stores at most two
/// parents and the local partials with respect to them.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    /// One independent variable per value; slot i has d(slot i)/d(slot i) = 1.
    std::vector<Var> seed(std::span<const double> values);

    std::size_t slot_count() const noexcept { return slots_.size(); }
    std::size_t size() const noexcept { return nodes_.size(); }
    void clear() noexcept;

    /// Partials of `output` with respect to every seeded slot, in slot order.
    /// An output that does not depend on any slot gives the zero vector.
    std::vector<double> gradient(const Var& output) const;

    /// Vector-Jacobian product: gradient of sum_m weights[m] * outputs[m].
    std::vector<double> gradient(std::span<const Var> outputs, std::span<const double> weights) const;

    // Node construction used by the elementary operations.
    Var unary(const char* op, double value, const Var& a, double da);
    Var binary(const char* op, double value, const Var& a, double da, const Var& b, double db);

private:
    struct Node {
        int parent[2];
        double partial[2];
    };

    std::vector<double> sweep(std::vector<double> adjoint) const;

    std::vector<Node> nodes_;
    std::vector<int> slots_;
};

/// seed_params: a fresh set of independent variables on `tape`.
inline std::vector<Var> seed_params(Tape& tape, std::span<const double> values) { return tape.seed(values); }

/// Full gradient of `output` over the slots of its tape. Constants give an
/// empty vector when no tape is available, so callers that know the slot
/// count should prefer Tape::gradient.
std::vector<double> gradient(const Var& output);

inline double value_of(const Var& x) noexcept { return x.value(); }

Var operator+(const Var& a, const Var& b);
Var operator-(const Var& a, const Var& b);
Var operator*(const Var& a, const Var& b);
Var operator/(const Var& a, const Var& b);
Var operator-(const Var& a);

Var sqrt(const Var& x);
Var pow(const Var& x, double p);
Var pow(const Var& x, const Var& p);
Var exp(const Var& x);
Var log(const Var& x);
Var sin(const Var& x);
Var cos(const Var& x);
Var tanh(const Var& x);
Var atan2(const Var& y, const Var& x);
Var asin(const Var& x);
Var sigmoid(const Var& x);
Var fabs(const Var& x);

// Comparisons act on values only.
inline bool operator<(const Var& a, const Var& b) noexcept { return a.value() < b.value(); }
inline bool operator>(const Var& a, const Var& b) noexcept { return a.value() > b.value(); }
inline bool operator<=(const Var& a, const Var& b) noexcept { return a.value() <= b.value(); }
inline bool operator>=(const Var& a, const Var& b) noexcept { return a.value() >= b.value(); }

}  // namespace diffconst::ad
