#pragma once

#include <functional>
#include <iosfwd>
#include <string>

#include "ge2ae/graph.hpp"
#include "ge2ae/model.hpp"

namespace ge2ae::selftest {

// Central-finite-difference gradient check. Builds the scalar loss from the
// named leaf tensors, compares backward() against (f(x+h)-f(x-h))/2h per
// element. Returns the max of |a-n| / max(1, |a|+|n|).
using LossBuilder = std::function<Value(Graph&, const model::Params&)>;
double gradcheck(const LossBuilder& build, const model::Params& leaves, double step = 1e-5);

// Oracle suites: FFT fast-vs-direct equivalence, per-primitive gradient
// checks, loss identities. Prints one line per suite; returns the failure
// count.
int run_selftest(std::ostream& out);

}  // namespace ge2ae::selftest
