#include "haystackcraft/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <tuple>

#include "haystackcraft/error.hpp"
#include "haystackcraft/serialize.hpp"

namespace hc {

Report aggregate_report(std::span<const EvalResult> results) {
    using Key = std::tuple<std::string, std::string, std::string, std::size_t, std::string>;
    struct Accumulator {
        std::size_t n = 0;
        std::size_t errored = 0;
        double sum = 0.0;
        std::map<int, std::pair<std::size_t, double>> hops;
        std::map<std::string, std::pair<std::size_t, double>> seeds;
    };
    std::map<Key, Accumulator> groups;

    for (const auto& r : results) {
        const bool random = r.ordering.starts_with("random");
        Key key{r.retriever, r.mode, r.context, r.budget, random ? "random" : r.ordering};
        auto& acc = groups[key];
        if (r.errored()) {
            ++acc.errored;
            continue;
        }
        ++acc.n;
        acc.sum += r.f1.f1;
        auto& hop = acc.hops[r.hops];
        ++hop.first;
        hop.second += r.f1.f1;
        if (random) {
            auto colon = r.ordering.find(':');
            auto& seed = acc.seeds[colon == std::string::npos ? "" : r.ordering.substr(colon + 1)];
            ++seed.first;
            seed.second += r.f1.f1;
        }
    }

    Report report;
    if (results.empty()) report.warnings.push_back("no results to aggregate");
    for (auto& [key, acc] : groups) {
        ReportRow row;
        std::tie(row.retriever, row.mode, row.context, row.budget, row.ordering) = key;
        row.samples = acc.n;
        row.errored = acc.errored;
        if (acc.n > 0) row.mean_f1 = acc.sum / static_cast<double>(acc.n);
        for (const auto& [hop, v] : acc.hops) row.by_hop[hop] = {v.first, v.second / static_cast<double>(v.first)};
        if (!acc.seeds.empty()) {
            std::vector<double> means;
            for (const auto& [seed, v] : acc.seeds) {
                row.seeds.push_back(seed);
                means.push_back(v.second / static_cast<double>(v.first));
            }
            double mean = 0.0;
            for (double m : means) mean += m;
            mean /= static_cast<double>(means.size());
            double var = 0.0;
            for (double m : means) var += (m - mean) * (m - mean);
            row.seed_spread = std::sqrt(var / static_cast<double>(means.size()));
        }
        if (acc.errored > 0 && acc.n == 0)
            report.warnings.push_back("group " + row.retriever + "/" + row.mode + "/" + std::to_string(row.budget) +
                                      " has only errored results");
        report.rows.push_back(std::move(row));
    }
    return report;
}

std::string render_report_table(const Report& report) {
    std::string out;
    char line[256];
    std::snprintf(line, sizeof line, "%-12s %-12s %-12s %8s %-8s %7s %7s %8s %8s\n", "retriever", "mode", "context",
                  "budget", "order", "n", "errored", "mean_f1", "spread");
    out += line;
    for (const auto& r : report.rows) {
        std::string f1 = r.mean_f1 ? std::to_string(*r.mean_f1).substr(0, 6) : "-";
        std::string spread = r.seed_spread ? std::to_string(*r.seed_spread).substr(0, 6) : "-";
        std::snprintf(line, sizeof line, "%-12s %-12s %-12s %8zu %-8s %7zu %7zu %8s %8s\n", r.retriever.c_str(),
                      r.mode.c_str(), r.context.c_str(), r.budget, r.ordering.c_str(), r.samples, r.errored, f1.c_str(),
                      spread.c_str());
        out += line;
        for (const auto& [hop, v] : r.by_hop) {
            std::snprintf(line, sizeof line, "    hop %d: n=%zu mean_f1=%.4f\n", hop, v.first, v.second);
            out += line;
        }
    }
    for (const auto& w : report.warnings) out += "warning: " + w + "\n";
    return out;
}

std::vector<EvalResult> load_results(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot open results file '" + path + "'");
    std::vector<EvalResult> results;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            results.push_back(eval_result_from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::Parse, path + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return results;
}

}  // namespace hc
