#pragma once

// JSON shapes of every artifact the toolkit writes.

#include <span>

#include <nlohmann/json.hpp>

#include "haystackcraft/corpus.hpp"
#include "haystackcraft/harness.hpp"
#include "haystackcraft/haystack.hpp"
#include "haystackcraft/metrics.hpp"
#include "haystackcraft/report.hpp"
#include "haystackcraft/retrieval.hpp"

namespace hc {

nlohmann::json to_json(const IngestStats& stats);
nlohmann::json to_json(const RankedList& list);
nlohmann::json to_json(const RetrievalReport& report);
nlohmann::json to_json(const EvalResult& result);
nlohmann::json to_json(const DynamicTrace& trace);
nlohmann::json to_json(const Report& report);

/// {query_id, budget, members:[{id,is_needle,truncated,tokens}], order}
/// with members listed in presentation order.
nlohmann::json haystack_record(const Haystack& haystack, std::span<const std::size_t> order,
                               const OrderingPolicy& policy);

EvalResult eval_result_from_json(const nlohmann::json& j);

}  // namespace hc
