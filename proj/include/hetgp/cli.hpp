#pragma once

#include <iosfwd>

namespace hetgp {

// Exit codes: 0 success, 1 usage or input error, 2 finished with warnings
// (EP not converged, failed folds or repetitions, unreliable chain).
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace hetgp
