#include "support.hpp"

#include "diffconst/finite_diff.hpp"
#include "diffconst/tape.hpp"

namespace diffconst::testing {

std::vector<double> oracle_gradient(const Problem& p, std::span<const double> theta) {
    auto f = [&p](std::span<const long double> t) { return reference_loss<long double>(p, t); };
    return ad::richardson_gradient(f, theta, 1e-5);
}

}  // namespace diffconst::testing
