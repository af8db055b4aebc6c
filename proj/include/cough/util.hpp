#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace cough {

// Runs fn(i) for i in [0, n) across up to `jobs` threads. Work items must be
// independent; results land wherever fn writes them, so output order is
// caller-controlled and deterministic.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

// Lossless text encoding of doubles: 16 hex chars of the IEEE-754 bit
// pattern per value.
std::string doubles_to_hex(const std::vector<double>& v);
std::vector<double> hex_to_doubles(const std::string& hex);

// Write-temp-then-rename so concurrent readers never see partial files.
void atomic_write_file(const std::filesystem::path& path, const std::string& bytes);

std::string read_file(const std::filesystem::path& path);

}  // namespace cough
