#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "haystackcraft/tokenizer.hpp"

namespace hc {

/// Dense index of a document inside a corpus. Indices follow sorted doc_id
/// order, so they are stable across runs and platforms.
using NodeId = std::uint32_t;

struct Document {
    std::string id;
    std::string title;
    std::string body;
    std::vector<std::string> out_links;  // cleaned: sorted, unique, existing, no self-link
    std::size_t token_count = 0;

    bool operator==(const Document&) const = default;
};

/// Deduplicated directed link graph over corpus documents, stored as
/// compressed rows in both directions so PageRank can pull along in-edges.
class HyperlinkGraph {
public:
    HyperlinkGraph() = default;

    /// `adjacency[u]` lists targets of node u; duplicates and self-loops are
    /// dropped here, out-of-range targets are rejected.
    static HyperlinkGraph from_adjacency(std::vector<std::string> node_ids,
                                         const std::vector<std::vector<NodeId>>& adjacency);

    std::size_t node_count() const { return node_ids_.size(); }
    std::size_t edge_count() const { return out_targets_.size(); }

    std::span<const NodeId> out_neighbors(NodeId u) const;
    std::span<const NodeId> in_neighbors(NodeId v) const;
    std::size_t out_degree(NodeId u) const { return out_neighbors(u).size(); }

    const std::string& id_of(NodeId u) const { return node_ids_.at(u); }
    std::optional<NodeId> find(std::string_view doc_id) const;
    const std::vector<std::string>& node_ids() const { return node_ids_; }

    /// Same nodes, edges made bidirectional.
    HyperlinkGraph symmetrized() const;

    bool operator==(const HyperlinkGraph&) const = default;

private:
    std::vector<std::string> node_ids_;
    std::vector<std::size_t> out_offsets_{0};
    std::vector<NodeId> out_targets_;
    std::vector<std::size_t> in_offsets_{0};
    std::vector<NodeId> in_sources_;
};

struct IngestStats {
    std::size_t records = 0;
    std::size_t kept = 0;
    std::size_t dropped_empty = 0;
    std::size_t dropped_redirect = 0;
    std::size_t dropped_duplicate = 0;
    std::size_t link_mentions = 0;
    std::size_t duplicate_links = 0;
    std::size_t self_links = 0;
    std::size_t dangling_links = 0;
};

enum class DuplicatePolicy { Error, KeepFirst };

struct IngestOptions {
    DuplicatePolicy on_duplicate = DuplicatePolicy::Error;
};

/// Immutable after construction. Documents are held in sorted id order and
/// `graph().id_of(i) == documents()[i].id` for every i.
class Corpus {
public:
    Corpus() = default;
    Corpus(std::vector<Document> documents, std::string tokenizer_name, IngestStats stats = {});

    const std::vector<Document>& documents() const { return documents_; }
    const HyperlinkGraph& graph() const { return graph_; }
    const IngestStats& stats() const { return stats_; }
    const std::string& tokenizer_name() const { return tokenizer_name_; }
    std::size_t size() const { return documents_.size(); }

    const Document* find(std::string_view doc_id) const;
    const Document& at(std::string_view doc_id) const;
    const Document& at(NodeId index) const { return documents_.at(index); }
    std::optional<NodeId> index_of(std::string_view doc_id) const { return graph_.find(doc_id); }

    /// Documents and edges compared; ingest counters are not part of identity.
    bool operator==(const Corpus& other) const {
        return documents_ == other.documents_ && graph_ == other.graph_ &&
               tokenizer_name_ == other.tokenizer_name_;
    }

private:
    std::vector<Document> documents_;
    HyperlinkGraph graph_;
    IngestStats stats_;
    std::string tokenizer_name_;
};

/// One raw record from the corpus file, before filtering.
struct RawDocument {
    std::string id;
    std::string title;
    std::string text;
    std::vector<std::string> links;
    bool redirect = false;
};

/// Filters empty/redirect records, cleans links, counts tokens and builds the
/// graph. Throws Error(Ingest) on duplicate ids under DuplicatePolicy::Error.
Corpus build_corpus(std::vector<RawDocument> records, const Tokenizer& tokenizer,
                    const IngestOptions& options = {});

/// Reads the JSON-lines corpus format. Parse errors carry the 1-based line.
Corpus load_corpus(const std::string& path, const Tokenizer& tokenizer,
                   const IngestOptions& options = {});

/// Binary persistence with magic header and format version.
void save_corpus(const Corpus& corpus, const std::string& path);
Corpus load_saved_corpus(const std::string& path);

struct QASample {
    std::string id;
    std::string question;
    std::string answer;
    std::vector<std::string> aliases;
    std::vector<std::string> needles;
    int hops = 1;
};

struct QASet {
    std::vector<QASample> samples;
    std::map<int, std::size_t> hop_histogram;
    /// Samples whose hop count differs from their needle count.
    std::size_t hop_needle_mismatches = 0;

    const QASample* find(std::string_view id) const;
};

/// Validates every sample against the corpus; a needle that does not resolve
/// raises Error(Validation) naming the sample and the id.
QASet load_qa_samples(const std::string& path, const Corpus& corpus);
QASet validate_qa_samples(std::vector<QASample> samples, const Corpus& corpus);

}  // namespace hc
