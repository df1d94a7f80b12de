#include "diffconst/tape.hpp"

#include <cmath>
#include <string>

namespace diffconst::ad {

namespace {

double checked(const char* op, double value) {
    if (!std::isfinite(value)) {
        throw GradError(std::string(op) + ": non-finite result");
    }
    return value;
}

Tape* common_tape(const char* op, const Var& a, const Var& b) {
    if (a.tape() && b.tape() && a.tape() != b.tape()) {
        throw GradError(std::string(op) + ": operands recorded on different tapes");
    }
    return a.tape() ? a.tape() : b.tape();
}

}  // namespace

std::vector<Var> Tape::seed(std::span<const double> values) {
    std::vector<Var> out;
    out.reserve(values.size());
    for (double v : values) {
        checked("seed_params", v);
        const int idx = static_cast<int>(nodes_.size());
        nodes_.push_back(Node{{-1, -1}, {0.0, 0.0}});
        slots_.push_back(idx);
        out.push_back(Var(v, this, idx));
    }
    return out;
}

void Tape::clear() noexcept {
    nodes_.clear();
    slots_.clear();
}

Var Tape::unary(const char* op, double value, const Var& a, double da) {
    checked(op, value);
    if (a.tape() == nullptr) return Var(value);
    checked(op, da);
    const int idx = static_cast<int>(nodes_.size());
    nodes_.push_back(Node{{a.index(), -1}, {da, 0.0}});
    return Var(value, this, idx);
}

Var Tape::binary(const char* op, double value, const Var& a, double da, const Var& b, double db) {
    checked(op, value);
    const bool la = a.tape() != nullptr;
    const bool lb = b.tape() != nullptr;
    if (!la && !lb) return Var(value);
    if (la) checked(op, da);
    if (lb) checked(op, db);
    const int idx = static_cast<int>(nodes_.size());
    nodes_.push_back(Node{{la ? a.index() : -1, lb ? b.index() : -1}, {la ? da : 0.0, lb ? db : 0.0}});
    return Var(value, this, idx);
}

std::vector<double> Tape::sweep(std::vector<double> adjoint) const {
    for (std::size_t n = nodes_.size(); n-- > 0;) {
        const double w = adjoint[n];
        if (w == 0.0) continue;
        const Node& node = nodes_[n];
        if (node.parent[0] >= 0) adjoint[static_cast<std::size_t>(node.parent[0])] += w * node.partial[0];
        if (node.parent[1] >= 0) adjoint[static_cast<std::size_t>(node.parent[1])] += w * node.partial[1];
    }
    std::vector<double> grad(slots_.size());
    for (std::size_t s = 0; s < slots_.size(); ++s) grad[s] = adjoint[static_cast<std::size_t>(slots_[s])];
    return grad;
}

std::vector<double> Tape::gradient(const Var& output) const {
    if (output.tape() == nullptr) return std::vector<double>(slots_.size(), 0.0);
    if (output.tape() != this) throw GradError("gradient: output recorded on another tape");
    std::vector<double> adjoint(nodes_.size(), 0.0);
    adjoint[static_cast<std::size_t>(output.index())] = 1.0;
    return sweep(std::move(adjoint));
}

std::vector<double> Tape::gradient(std::span<const Var> outputs, std::span<const double> weights) const {
    if (outputs.size() != weights.size()) throw GradError("gradient: outputs/weights size mismatch");
    std::vector<double> adjoint(nodes_.size(), 0.0);
    for (std::size_t m = 0; m < outputs.size(); ++m) {
        if (outputs[m].tape() == nullptr) continue;
        if (outputs[m].tape() != this) throw GradError("gradient: output recorded on another tape");
        adjoint[static_cast<std::size_t>(outputs[m].index())] += weights[m];
    }
    return sweep(std::move(adjoint));
}

std::vector<double> gradient(const Var& output) {
    if (output.tape() == nullptr) return {};
    return output.tape()->gradient(output);
}

Var& Var::operator+=(const Var& rhs) { return *this = *this + rhs; }
Var& Var::operator-=(const Var& rhs) { return *this = *this - rhs; }
Var& Var::operator*=(const Var& rhs) { return *this = *this * rhs; }
Var& Var::operator/=(const Var& rhs) { return *this = *this / rhs; }

Var operator+(const Var& a, const Var& b) {
    Tape* t = common_tape("add", a, b);
    const double v = a.value() + b.value();
    if (!t) return Var(checked("add", v));
    return t->binary("add", v, a, 1.0, b, 1.0);
}

Var operator-(const Var& a, const Var& b) {
    Tape* t = common_tape("sub", a, b);
    const double v = a.value() - b.value();
    if (!t) return Var(checked("sub", v));
    return t->binary("sub", v, a, 1.0, b, -1.0);
}

Var operator*(const Var& a, const Var& b) {
    Tape* t = common_tape("mul", a, b);
    const double v = a.value() * b.value();
    if (!t) return Var(checked("mul", v));
    return t->binary("mul", v, a, b.value(), b, a.value());
}

Var operator/(const Var& a, const Var& b) {
    Tape* t = common_tape("div", a, b);
    if (b.value() == 0.0) throw GradError("div: division by zero");
    const double v = a.value() / b.value();
    if (!t) return Var(checked("div", v));
    const double inv = 1.0 / b.value();
    return t->binary("div", v, a, inv, b, -v * inv);
}

Var operator-(const Var& a) {
    const double v = -a.value();
    if (!a.tape()) return Var(v);
    return a.tape()->unary("neg", v, a, -1.0);
}

Var sqrt(const Var& x) {
    if (!(x.value() > 0.0)) {
        if (x.value() == 0.0 && x.is_constant()) return Var(0.0);
        throw GradError("sqrt: argument must be positive, got " + std::to_string(x.value()));
    }
    const double v = std::sqrt(x.value());
    if (!x.tape()) return Var(v);
    return x.tape()->unary("sqrt", v, x, 0.5 / v);
}

Var pow(const Var& x, double p) {
    const double v = std::pow(x.value(), p);
    if (!x.tape()) return Var(checked("pow", v));
    if (x.value() == 0.0 && p < 1.0) throw GradError("pow: derivative undefined at zero base");
    return x.tape()->unary("pow", v, x, p * std::pow(x.value(), p - 1.0));
}

Var pow(const Var& x, const Var& p) {
    if (p.is_constant()) return pow(x, p.value());
    if (!(x.value() > 0.0)) throw GradError("pow: base must be positive for a variable exponent");
    const double v = std::pow(x.value(), p.value());
    Tape* t = common_tape("pow", x, p);
    return t->binary("pow", v, x, p.value() * std::pow(x.value(), p.value() - 1.0), p, v * std::log(x.value()));
}

Var exp(const Var& x) {
    const double v = std::exp(x.value());
    if (!x.tape()) return Var(checked("exp", v));
    return x.tape()->unary("exp", v, x, v);
}

Var log(const Var& x) {
    if (!(x.value() > 0.0)) throw GradError("log: argument must be positive, got " + std::to_string(x.value()));
    const double v = std::log(x.value());
    if (!x.tape()) return Var(v);
    return x.tape()->unary("log", v, x, 1.0 / x.value());
}

Var sin(const Var& x) {
    const double v = std::sin(x.value());
    if (!x.tape()) return Var(checked("sin", v));
    return x.tape()->unary("sin", v, x, std::cos(x.value()));
}

Var cos(const Var& x) {
    const double v = std::cos(x.value());
    if (!x.tape()) return Var(checked("cos", v));
    return x.tape()->unary("cos", v, x, -std::sin(x.value()));
}

Var tanh(const Var& x) {
    const double v = std::tanh(x.value());
    if (!x.tape()) return Var(checked("tanh", v));
    return x.tape()->unary("tanh", v, x, 1.0 - v * v);
}

Var atan2(const Var& y, const Var& x) {
    const double r2 = y.value() * y.value() + x.value() * x.value();
    if (r2 == 0.0) throw GradError("atan2: undefined at the origin");
    const double v = std::atan2(y.value(), x.value());
    Tape* t = common_tape("atan2", y, x);
    if (!t) return Var(v);
    return t->binary("atan2", v, y, x.value() / r2, x, -y.value() / r2);
}

Var asin(const Var& x) {
    if (!(x.value() >= -1.0 && x.value() <= 1.0)) {
        throw GradError("asin: argument outside [-1, 1], got " + std::to_string(x.value()));
    }
    const double v = std::asin(x.value());
    if (!x.tape()) return Var(v);
    return x.tape()->unary("asin", v, x, asin_derivative(x.value()));
}

Var sigmoid(const Var& x) {
    const double v = diffconst::sigmoid(x.value());
    if (!x.tape()) return Var(checked("sigmoid", v));
    return x.tape()->unary("sigmoid", v, x, v * (1.0 - v));
}

Var fabs(const Var& x) {
    const double v = std::fabs(x.value());
    if (!x.tape()) return Var(v);
    return x.tape()->unary("fabs", v, x, x.value() < 0.0 ? -1.0 : 1.0);
}

}  // namespace diffconst::ad
