#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace unloc::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitRuntime = 3;

/// Runs one command; `args` excludes the program name. Returns the exit code.
/// Verbs: synth-gen, sync, train, eval, gradcheck, report.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace unloc::cli
