#pragma once

#include <string>
#include <vector>

namespace alignmeter::cli {

/// Exit codes: 0 ok, 1 analysis error, 2 input or usage error.
enum ExitCode : int { exit_ok = 0, exit_analysis = 1, exit_input = 2 };

/// Entry point shared by the executable and in-process tests.
int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args);  // args exclude the program name

}  // namespace alignmeter::cli
