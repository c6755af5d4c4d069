#include "haystackcraft/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <set>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "binary_io.hpp"
#include "haystackcraft/error.hpp"

namespace hc {

namespace {

constexpr std::string_view kCorpusMagic = "HCCORP";
constexpr std::uint32_t kCorpusVersion = 1;

bool blank(std::string_view s) {
    return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c) != 0; });
}

}  // namespace

// ---------------------------------------------------------------------------
// HyperlinkGraph

HyperlinkGraph HyperlinkGraph::from_adjacency(std::vector<std::string> node_ids,
                                              const std::vector<std::vector<NodeId>>& adjacency) {
    if (adjacency.size() != node_ids.size())
        throw Error(ErrorCode::InvalidArgument, "graph: adjacency size does not match node count");
    HyperlinkGraph g;
    g.node_ids_ = std::move(node_ids);
    const auto n = g.node_ids_.size();

    std::vector<std::vector<NodeId>> clean(n);
    for (std::size_t u = 0; u < n; ++u) {
        auto& row = clean[u];
        for (NodeId v : adjacency[u]) {
            if (v >= n) throw Error(ErrorCode::InvalidArgument, "graph: edge target out of range");
            if (v != u) row.push_back(v);
        }
        std::sort(row.begin(), row.end());
        row.erase(std::unique(row.begin(), row.end()), row.end());
    }

    g.out_offsets_.assign(n + 1, 0);
    g.in_offsets_.assign(n + 1, 0);
    for (std::size_t u = 0; u < n; ++u) {
        g.out_offsets_[u + 1] = g.out_offsets_[u] + clean[u].size();
        for (NodeId v : clean[u]) ++g.in_offsets_[v + 1];
    }
    std::partial_sum(g.in_offsets_.begin(), g.in_offsets_.end(), g.in_offsets_.begin());

    g.out_targets_.reserve(g.out_offsets_[n]);
    g.in_sources_.assign(g.out_offsets_[n], 0);
    std::vector<std::size_t> fill(g.in_offsets_.begin(), g.in_offsets_.end() - 1);
    // Iterating sources in ascending order keeps every in-row sorted.
    for (std::size_t u = 0; u < n; ++u) {
        for (NodeId v : clean[u]) {
            g.out_targets_.push_back(v);
            g.in_sources_[fill[v]++] = static_cast<NodeId>(u);
        }
    }
    return g;
}

std::span<const NodeId> HyperlinkGraph::out_neighbors(NodeId u) const {
    return {out_targets_.data() + out_offsets_.at(u), out_offsets_.at(u + 1) - out_offsets_[u]};
}

std::span<const NodeId> HyperlinkGraph::in_neighbors(NodeId v) const {
    return {in_sources_.data() + in_offsets_.at(v), in_offsets_.at(v + 1) - in_offsets_[v]};
}

std::optional<NodeId> HyperlinkGraph::find(std::string_view doc_id) const {
    auto it = std::lower_bound(node_ids_.begin(), node_ids_.end(), doc_id);
    if (it == node_ids_.end() || *it != doc_id) return std::nullopt;
    return static_cast<NodeId>(it - node_ids_.begin());
}

HyperlinkGraph HyperlinkGraph::symmetrized() const {
    std::vector<std::vector<NodeId>> adjacency(node_count());
    for (NodeId u = 0; u < node_count(); ++u) {
        for (NodeId v : out_neighbors(u)) {
            adjacency[u].push_back(v);
            adjacency[v].push_back(u);
        }
    }
    return from_adjacency(node_ids_, adjacency);
}

// ---------------------------------------------------------------------------
// Corpus

Corpus::Corpus(std::vector<Document> documents, std::string tokenizer_name, IngestStats stats)
    : documents_(std::move(documents)), stats_(stats), tokenizer_name_(std::move(tokenizer_name)) {
    std::vector<std::string> ids;
    ids.reserve(documents_.size());
    for (std::size_t i = 0; i < documents_.size(); ++i) {
        if (i > 0 && !(documents_[i - 1].id < documents_[i].id))
            throw Error(ErrorCode::Ingest, "corpus documents must be unique and sorted by id (at '" + documents_[i].id + "')");
        ids.push_back(documents_[i].id);
    }
    std::vector<std::vector<NodeId>> adjacency(documents_.size());
    for (std::size_t i = 0; i < documents_.size(); ++i) {
        for (const auto& target : documents_[i].out_links) {
            auto it = std::lower_bound(ids.begin(), ids.end(), target);
            if (it == ids.end() || *it != target || target == documents_[i].id)
                throw Error(ErrorCode::Ingest, "document '" + documents_[i].id + "' has an invalid link to '" + target + "'");
            adjacency[i].push_back(static_cast<NodeId>(it - ids.begin()));
        }
    }
    graph_ = HyperlinkGraph::from_adjacency(std::move(ids), adjacency);
}

const Document* Corpus::find(std::string_view doc_id) const {
    auto idx = graph_.find(doc_id);
    return idx ? &documents_[*idx] : nullptr;
}

const Document& Corpus::at(std::string_view doc_id) const {
    if (const auto* d = find(doc_id)) return *d;
    throw Error(ErrorCode::Validation, "unknown document '" + std::string(doc_id) + "'");
}

Corpus build_corpus(std::vector<RawDocument> records, const Tokenizer& tokenizer,
                    const IngestOptions& options) {
    IngestStats stats;
    std::vector<RawDocument> kept;
    std::unordered_set<std::string> seen;
    for (auto& rec : records) {
        ++stats.records;
        if (rec.id.empty()) throw Error(ErrorCode::Ingest, "record with empty id");
        if (rec.redirect) {
            ++stats.dropped_redirect;
            continue;
        }
        if (blank(rec.text)) {
            ++stats.dropped_empty;
            continue;
        }
        if (!seen.insert(rec.id).second) {
            if (options.on_duplicate == DuplicatePolicy::Error)
                throw Error(ErrorCode::Ingest, "duplicate document id '" + rec.id + "'");
            ++stats.dropped_duplicate;
            continue;
        }
        kept.push_back(std::move(rec));
    }
    std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) { return a.id < b.id; });

    std::vector<Document> docs;
    docs.reserve(kept.size());
    for (auto& rec : kept) {
        Document d;
        d.id = std::move(rec.id);
        d.title = std::move(rec.title);
        d.body = std::move(rec.text);
        std::set<std::string> targets;
        for (auto& link : rec.links) {
            ++stats.link_mentions;
            if (link == d.id) {
                ++stats.self_links;
            } else if (!seen.contains(link)) {
                ++stats.dangling_links;
            } else if (!targets.insert(std::move(link)).second) {
                ++stats.duplicate_links;
            }
        }
        d.out_links.assign(targets.begin(), targets.end());
        d.token_count = tokenizer.count(d.body);
        docs.push_back(std::move(d));
    }
    stats.kept = docs.size();
    return Corpus(std::move(docs), tokenizer.name(), stats);
}

Corpus load_corpus(const std::string& path, const Tokenizer& tokenizer, const IngestOptions& options) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot open corpus file '" + path + "'");
    std::vector<RawDocument> records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (blank(line)) continue;
        try {
            auto j = nlohmann::json::parse(line);
            RawDocument rec;
            rec.id = j.at("id").get<std::string>();
            rec.title = j.value("title", std::string{});
            rec.text = j.at("text").get<std::string>();
            if (j.contains("links")) rec.links = j.at("links").get<std::vector<std::string>>();
            rec.redirect = j.value("redirect", false);
            records.push_back(std::move(rec));
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::Parse, path + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return build_corpus(std::move(records), tokenizer, options);
}

void save_corpus(const Corpus& corpus, const std::string& path) {
    detail::BinaryWriter w(path);
    w.magic(kCorpusMagic);
    w.put<std::uint32_t>(kCorpusVersion);
    w.put_string(corpus.tokenizer_name());
    const auto& s = corpus.stats();
    for (auto v : {s.records, s.kept, s.dropped_empty, s.dropped_redirect, s.dropped_duplicate,
                   s.link_mentions, s.duplicate_links, s.self_links, s.dangling_links})
        w.put<std::uint64_t>(v);
    w.put<std::uint64_t>(corpus.size());
    for (const auto& d : corpus.documents()) {
        w.put_string(d.id);
        w.put_string(d.title);
        w.put_string(d.body);
        w.put<std::uint64_t>(d.token_count);
        w.put<std::uint64_t>(d.out_links.size());
        for (auto v : corpus.graph().out_neighbors(*corpus.index_of(d.id))) w.put<std::uint32_t>(v);
    }
    w.finish();
}

Corpus load_saved_corpus(const std::string& path) {
    detail::BinaryReader r(path);
    r.expect_magic(kCorpusMagic);
    auto version = r.get<std::uint32_t>();
    if (version != kCorpusVersion)
        throw Error(ErrorCode::Parse, "'" + path + "': unsupported corpus format version " + std::to_string(version));
    auto tokenizer_name = r.get_string();
    IngestStats s;
    for (auto* field : {&s.records, &s.kept, &s.dropped_empty, &s.dropped_redirect, &s.dropped_duplicate,
                        &s.link_mentions, &s.duplicate_links, &s.self_links, &s.dangling_links})
        *field = r.get<std::uint64_t>();
    auto n = r.get<std::uint64_t>();
    std::vector<Document> docs(n);
    std::vector<std::vector<std::uint32_t>> links(n);
    for (std::uint64_t i = 0; i < n; ++i) {
        docs[i].id = r.get_string();
        docs[i].title = r.get_string();
        docs[i].body = r.get_string();
        docs[i].token_count = r.get<std::uint64_t>();
        auto m = r.get<std::uint64_t>();
        if (m > n) throw Error(ErrorCode::Parse, "'" + path + "': corrupt link count");
        links[i].resize(m);
        for (auto& v : links[i]) v = r.get<std::uint32_t>();
    }
    for (std::uint64_t i = 0; i < n; ++i) {
        for (auto v : links[i]) {
            if (v >= n) throw Error(ErrorCode::Parse, "'" + path + "': corrupt link target");
            docs[i].out_links.push_back(docs[v].id);
        }
    }
    return Corpus(std::move(docs), std::move(tokenizer_name), s);
}

// ---------------------------------------------------------------------------
// QA samples

const QASample* QASet::find(std::string_view id) const {
    for (const auto& s : samples)
        if (s.id == id) return &s;
    return nullptr;
}

QASet validate_qa_samples(std::vector<QASample> samples, const Corpus& corpus) {
    QASet set;
    std::unordered_set<std::string> ids;
    for (const auto& s : samples) {
        if (!ids.insert(s.id).second) throw Error(ErrorCode::Validation, "duplicate QA sample id '" + s.id + "'");
        if (s.answer.empty()) throw Error(ErrorCode::Validation, "QA sample '" + s.id + "' has an empty answer");
        if (s.needles.empty()) throw Error(ErrorCode::Validation, "QA sample '" + s.id + "' has no needles");
        if (s.hops < 1 || s.hops > 4)
            throw Error(ErrorCode::Validation, "QA sample '" + s.id + "' has hop count " + std::to_string(s.hops) + " outside 1..4");
        std::unordered_set<std::string> needle_set;
        for (const auto& n : s.needles) {
            if (!corpus.find(n))
                throw Error(ErrorCode::Validation, "QA sample '" + s.id + "' references unknown document '" + n + "'");
            if (!needle_set.insert(n).second)
                throw Error(ErrorCode::Validation, "QA sample '" + s.id + "' lists needle '" + n + "' twice");
        }
        ++set.hop_histogram[s.hops];
        if (static_cast<std::size_t>(s.hops) != s.needles.size()) ++set.hop_needle_mismatches;
    }
    set.samples = std::move(samples);
    return set;
}

QASet load_qa_samples(const std::string& path, const Corpus& corpus) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot open QA file '" + path + "'");
    std::vector<QASample> samples;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (blank(line)) continue;
        try {
            auto j = nlohmann::json::parse(line);
            QASample s;
            s.id = j.at("id").get<std::string>();
            s.question = j.at("question").get<std::string>();
            s.answer = j.at("answer").get<std::string>();
            if (j.contains("aliases") && !j.at("aliases").is_null())
                s.aliases = j.at("aliases").get<std::vector<std::string>>();
            s.needles = j.at("needles").get<std::vector<std::string>>();
            s.hops = j.at("hops").get<int>();
            samples.push_back(std::move(s));
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::Parse, path + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return validate_qa_samples(std::move(samples), corpus);
}

}  // namespace hc
