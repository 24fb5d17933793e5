#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "wvi/tensor.hpp"

namespace wvi::cli {

// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;      // bad arguments, config or data
inline constexpr int kExitNumerical = 2;  // non-finite loss or kernel underflow

// Entry point shared by the executable and the tests. args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// One point per line, comma-separated. Blank lines and lines starting with '#' are skipped.
Tensor read_points_csv(const std::filesystem::path& path);

// Binary PGM (P5, maxval 255). Values are scaled by 255 and clamped.
void write_pgm(const std::filesystem::path& path, std::span<const double> pixels, std::size_t rows, std::size_t cols);

}  // namespace wvi::cli
