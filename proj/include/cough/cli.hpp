#pragma once

#include <string>
#include <vector>

namespace cough::cli {

// Entry point shared by the binary and the tests. Exit codes: 0 success,
// 1 validation error (bad flags, manifests, configs, fold hygiene),
// 2 runtime failure.
int run(const std::vector<std::string>& args);
int run(int argc, const char* const* argv);

}  // namespace cough::cli
