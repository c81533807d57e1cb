#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace tender {

struct ProcessResult {
  int exit_code = 0;
  std::string out;
  std::string err;
};

// Splits a command template on whitespace, honoring single and double
// quotes. Placeholders are substituted per argument afterwards, so
// substituted values never split.
std::vector<std::string> split_command(std::string_view command);

// Replaces every "{key}" in each argument.
std::vector<std::string> substitute(std::vector<std::string> argv,
                                    const std::vector<std::pair<std::string, std::string>>& values);

// Runs argv[0] from PATH without a shell, capturing both streams. Returns
// false when the executable cannot be found.
bool run_process(const std::vector<std::string>& argv, ProcessResult& result);

}  // namespace tender
