#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "pmsim/sim.hpp"

namespace pmsim {

// CSV rendering shared by the subcommands: one header line, fixed column
// order, decimals with 10 significant digits.
std::string csv_header();
std::string csv_row(const SweepRow& row);

// Parses a comma-separated list of decimals; throws std::invalid_argument on
// malformed or empty input.
std::vector<double> parse_double_list(const std::string& text);

// Command-line front end. Returns the process exit code: 0 on success, 2 on
// invalid or conflicting flags, 1 on an internal invariant violation. CSV
// goes to `out` when --out is "-" (the default), otherwise to the named file;
// diagnostics go to `err`.
int cli_run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace pmsim
