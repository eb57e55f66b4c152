#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace gridengine {

inline constexpr int kExitOk = 0;
inline constexpr int kExitDomainFailure = 1;
inline constexpr int kExitUsage = 2;

/// Runs one command line (without the program name), e.g.
/// {"loadflow", "case14.cdf", "--out", "results"}. Diagnostics go to `err`,
/// results to files in the output directory. Returns 0 on success, 1 on
/// domain failure (non-convergence, violations with --fail-on-violation,
/// protocol failures) and 2 on usage or input errors.
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace gridengine
