#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace qlab {

// Full command-line surface, in-process: parses argv, writes the report to
// `out` (or the --out path) and diagnostics to `err`. Returns the process
// exit code: 0 success, 2 domain/precondition/usage error, 3 statistical
// threshold exceeded in `compare`, 4 internal consistency failure.
int cli_run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

// "0.5" | "0.3,0.5,0.9" | "0.1..0.9:0.2" (range step mandatory for reals).
std::vector<double> parse_grid(const std::string& text);

// "3" | "1,2,5" | "0..15" | "0..15:3" (range step optional, default 1).
std::vector<std::uint64_t> parse_index_list(const std::string& text);

// Validates a count given as a real (accepts scientific notation, e.g. 1e6).
std::uint64_t parse_count(double value, const std::string& what);

}  // namespace qlab
