#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "haystackcraft/harness.hpp"

namespace hc {

struct ReportRow {
    std::string retriever;
    std::string mode;
    std::string context;
    std::size_t budget = 0;
    std::string ordering;  // "ranked" or "random"; seeds are pooled

    std::size_t samples = 0;  // scored results
    std::size_t errored = 0;
    std::optional<double> mean_f1;
    std::map<int, std::pair<std::size_t, double>> by_hop;  // hop -> (n, mean f1)
    std::vector<std::string> seeds;
    /// Population standard deviation of the per-seed mean F1 (random only).
    std::optional<double> seed_spread;
};

struct Report {
    std::vector<ReportRow> rows;
    std::vector<std::string> warnings;
};

/// Groups results by retriever x mode x context x budget x ordering and
/// averages F1 over non-errored results.
Report aggregate_report(std::span<const EvalResult> results);

/// Fixed-width table, one line per row.
std::string render_report_table(const Report& report);

/// Reads a results file (JSON lines of EvalResult).
std::vector<EvalResult> load_results(const std::string& path);

}  // namespace hc
