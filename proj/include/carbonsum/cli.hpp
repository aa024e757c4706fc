#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "carbonsum/retrieval.hpp"
#include "carbonsum/scoring.hpp"

namespace carbonsum {

/// Invalid invocation (unknown flags, missing required combinations).
/// Mapped to exit code 1; runtime failures map to 2.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Subcommands: validate | stats | summarize | retrieve-eval | judge |
/// score | report. Returns 0 on success, 1 on usage error, 2 on runtime
/// failure.
int run_cli(int argc, const char* const* argv);
int run_cli(const std::vector<std::string>& args);  // args without program name

/// Plot-ready rows (model, raw metric, gamma) sorted by gamma descending.
void emit_plot_data(const RunReport& report, const std::string& out_path);
void emit_plot_data(const RetrievalReport& report, double cost_kg_co2, CarburacyParams params,
                    const std::string& out_path);

}  // namespace carbonsum
