#include "haystackcraft/workspace.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "haystackcraft/error.hpp"
#include "haystackcraft/haystack.hpp"
#include "haystackcraft/metrics.hpp"
#include "haystackcraft/ppr.hpp"
#include "haystackcraft/report.hpp"
#include "haystackcraft/serialize.hpp"

namespace fs = std::filesystem;

namespace hc {

namespace {

constexpr const char* kCorpusFile = "corpus.hcc";
constexpr const char* kSparseFile = "bm25.hci";
constexpr std::size_t kDefaultDepth = 1000;
const std::vector<long long> kDefaultBudgets{8192, 16384, 32768, 65536, 131072};
const std::vector<long long> kDefaultRandomSeeds{0, 1, 2};

std::string safe_name(std::string_view s) {
    std::string out;
    for (char c : s) out.push_back(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.' ? c : '_');
    return out;
}

std::size_t positive(long long v, const char* what) {
    if (v <= 0) throw Error(ErrorCode::InvalidArgument, std::string(what) + " must be positive");
    return static_cast<std::size_t>(v);
}

ContextMode parse_context(const std::string& s) {
    if (s == "haystack") return ContextMode::Haystack;
    if (s == "needles-only") return ContextMode::NeedlesOnly;
    if (s == "none") return ContextMode::None;
    throw Error(ErrorCode::InvalidArgument, "haystack.context must be haystack, needles-only or none");
}

}  // namespace

std::string file_digest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return {};
    std::stringstream buf;
    buf << in.rdbuf();
    return fnv1a_hex(buf.str());
}

Workspace::Workspace(RunConfig config) : config_(std::move(config)) {}

Workspace Workspace::from_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot open manifest '" + path + "'");
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::Parse, "manifest '" + path + "': " + e.what());
    }
    if (!manifest.contains("config")) throw Error(ErrorCode::Parse, "manifest '" + path + "' has no config");
    Workspace ws(RunConfig::from_json(manifest.at("config")));
    ws.manifest_ = std::move(manifest);
    return ws;
}

void Workspace::set(const std::string& key, std::string_view raw) {
    config_.set(key, raw);
    reset();
}

void Workspace::reset() {
    retriever_.reset();
    encoder_.reset();
    http_encoder_.reset();
    precomputed_encoder_.reset();
    dense_.reset();
    sparse_.reset();
    qa_.reset();
    corpus_.reset();
    tokenizer_.reset();
    client_.reset();
}

std::string Workspace::out_dir() const { return config_.get_string("paths.out", "out"); }

std::string Workspace::index_dir() const { return config_.get_string("paths.index_dir", out_dir() + "/index"); }

std::string Workspace::write_artifact(const std::string& name, const nlohmann::json& j) const {
    fs::create_directories(out_dir());
    auto path = (fs::path(out_dir()) / name).string();
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot write '" + path + "'");
    out << j.dump(2) << '\n';
    return path;
}

const Tokenizer& Workspace::tokenizer() {
    if (!tokenizer_) tokenizer_ = make_tokenizer(config_.get_string("tokenizer", "reference"));
    return *tokenizer_;
}

const Corpus& Workspace::corpus() {
    if (corpus_) return *corpus_;
    auto saved = fs::path(index_dir()) / kCorpusFile;
    if (fs::exists(saved)) {
        corpus_ = std::make_unique<Corpus>(load_saved_corpus(saved.string()));
        if (corpus_->tokenizer_name() != tokenizer().name())
            throw Error(ErrorCode::Validation, "saved corpus was counted with tokenizer '" + corpus_->tokenizer_name() +
                                                   "' but '" + tokenizer().name() + "' is configured; re-run ingest");
        return *corpus_;
    }
    auto path = config_.get_string("paths.corpus");
    if (path.empty()) throw Error(ErrorCode::InvalidArgument, "paths.corpus is not set and no saved corpus exists");
    IngestOptions options;
    auto dup = config_.get_string("ingest.on_duplicate", "error");
    if (dup == "keep_first")
        options.on_duplicate = DuplicatePolicy::KeepFirst;
    else if (dup != "error")
        throw Error(ErrorCode::InvalidArgument, "ingest.on_duplicate must be error or keep_first");
    corpus_ = std::make_unique<Corpus>(load_corpus(path, tokenizer(), options));
    return *corpus_;
}

const QASet& Workspace::qa() {
    if (!qa_) {
        auto path = config_.get_string("paths.qa");
        if (path.empty()) throw Error(ErrorCode::InvalidArgument, "paths.qa is not set");
        qa_ = std::make_unique<QASet>(load_qa_samples(path, corpus()));
    }
    return *qa_;
}

const QASample& Workspace::sample(const std::string& id) {
    const auto* s = qa().find(id);
    if (!s) throw Error(ErrorCode::InvalidArgument, "unknown QA sample '" + id + "'");
    return *s;
}

RetrievalSettings Workspace::retrieval_settings() const {
    RetrievalSettings s;
    s.bm25.k1 = config_.get_double("retrieval.k1", 1.2);
    s.bm25.b = config_.get_double("retrieval.b", 0.75);
    s.rrf_k = static_cast<int>(config_.get_int("retrieval.rrf_k", 60));
    s.depth = positive(config_.get_int("retrieval.depth", kDefaultDepth), "retrieval.depth");
    auto apply = [&](PprConfig& c, const std::string& prefix) {
        c.num_seeds = positive(config_.get_int(prefix + "seeds", static_cast<long long>(c.num_seeds)), "ppr.seeds");
        c.damping = config_.get_double(prefix + "damping", c.damping);
        c.tolerance = config_.get_double(prefix + "tolerance", c.tolerance);
        c.max_iterations = positive(config_.get_int(prefix + "max_iter", static_cast<long long>(c.max_iterations)), "ppr.max_iter");
        c.symmetrize = config_.get_bool(prefix + "symmetrize", c.symmetrize);
    };
    for (auto [cfg, name] : {std::pair{&s.ppr_bm25, "bm25"}, std::pair{&s.ppr_dense, "dense"}, std::pair{&s.ppr_hybrid, "hybrid"}}) {
        apply(*cfg, "ppr.");
        apply(*cfg, std::string("ppr.") + name + ".");
        cfg->validate();
    }
    return s;
}

const Retriever& Workspace::retriever() {
    if (retriever_) return *retriever_;
    const auto& c = corpus();

    auto sparse_path = fs::path(index_dir()) / kSparseFile;
    if (fs::exists(sparse_path)) {
        auto loaded = SparseIndex::load(sparse_path.string());
        bool matches = loaded.doc_count() == c.size();
        for (std::size_t i = 0; matches && i < c.size(); ++i) matches = loaded.doc_id(static_cast<NodeId>(i)) == c.at(static_cast<NodeId>(i)).id;
        if (matches) sparse_ = std::make_unique<SparseIndex>(std::move(loaded));
    }
    if (!sparse_) sparse_ = std::make_unique<SparseIndex>(SparseIndex::build(c));

    auto vectors = config_.get_string("paths.embeddings");
    if (!vectors.empty()) {
        auto ids = config_.get_string("paths.embedding_ids", vectors + ".ids");
        dense_ = std::make_unique<EmbeddingStore>(EmbeddingStore::load(vectors, ids));
        for (const auto& id : dense_->ids())
            if (!c.find(id)) throw Error(ErrorCode::Validation, "embedding id '" + id + "' is not a corpus document");
    }
    std::vector<const QueryEncoder*> chain;
    auto qvec = config_.get_string("paths.query_embeddings");
    if (!qvec.empty()) {
        auto qids = config_.get_string("paths.query_embedding_ids", qvec + ".ids");
        precomputed_encoder_ = std::make_unique<PrecomputedQueryEncoder>(EmbeddingStore::load(qvec, qids));
        chain.push_back(precomputed_encoder_.get());
    }
    auto endpoint = config_.get_string("embedding.endpoint");
    if (!endpoint.empty()) {
        http_encoder_ = std::make_unique<HttpQueryEncoder>(endpoint);
        chain.push_back(http_encoder_.get());
    }
    if (!chain.empty()) encoder_ = std::make_unique<ChainedQueryEncoder>(chain);

    retriever_ = std::make_unique<Retriever>(c, sparse_.get(), dense_.get(), encoder_.get(), retrieval_settings());
    return *retriever_;
}

ModelClient& Workspace::client() {
    if (client_override_) return *client_override_;
    if (client_) return *client_;
    auto kind = config_.get_string("client.kind", "http");
    if (kind == "http") {
        ChatClientConfig cc;
        cc.endpoint = config_.get_string("client.endpoint");
        if (cc.endpoint.empty()) throw Error(ErrorCode::InvalidArgument, "client.endpoint is not set");
        cc.model = config_.get_string("client.model");
        cc.temperature = config_.get_double("client.temperature", cc.temperature);
        cc.top_p = config_.get_double("client.top_p", cc.top_p);
        cc.max_tokens = static_cast<int>(config_.get_int("client.max_tokens", cc.max_tokens));
        cc.retry.max_attempts = static_cast<int>(config_.get_int("client.max_attempts", cc.retry.max_attempts));
        cc.retry.initial_backoff = std::chrono::milliseconds(config_.get_int("client.backoff_ms", cc.retry.initial_backoff.count()));
        cc.timeout = std::chrono::seconds(config_.get_int("client.timeout_s", cc.timeout.count()));
        if (const char* key = std::getenv("HC_API_KEY")) cc.api_key = key;
        client_ = std::make_shared<HttpChatClient>(std::move(cc));
    } else if (kind == "scripted") {
        auto path = config_.get_string("client.script");
        if (path.empty()) throw Error(ErrorCode::InvalidArgument, "client.script is not set");
        client_ = ScriptedClient::from_file(path);
    } else if (kind == "oracle") {
        client_ = std::make_shared<NeedleOracleClient>(qa(), positive(config_.get_int("client.oracle_threshold", 10), "client.oracle_threshold"));
    } else {
        throw Error(ErrorCode::InvalidArgument, "client.kind must be http, scripted or oracle");
    }
    return *client_;
}

std::pair<std::string, std::string> Workspace::query_for(const std::string& sample_id, const std::string& query) {
    if (!sample_id.empty()) return {sample_id, sample(sample_id).question};
    if (query.empty()) throw Error(ErrorCode::InvalidArgument, "either a sample id or a query text is required");
    return {"adhoc", query};
}

nlohmann::json Workspace::ingest() {
    auto path = config_.get_string("paths.corpus");
    if (path.empty()) throw Error(ErrorCode::InvalidArgument, "paths.corpus is not set");
    corpus_.reset();
    IngestOptions options;
    if (config_.get_string("ingest.on_duplicate", "error") == "keep_first") options.on_duplicate = DuplicatePolicy::KeepFirst;
    auto loaded = std::make_unique<Corpus>(load_corpus(path, tokenizer(), options));
    fs::create_directories(index_dir());
    auto saved = (fs::path(index_dir()) / kCorpusFile).string();
    save_corpus(*loaded, saved);
    // A sparse index from an earlier corpus would no longer line up.
    fs::remove(fs::path(index_dir()) / kSparseFile);
    nlohmann::json summary = {
        {"command", "ingest"},
        {"documents", loaded->size()},
        {"edges", loaded->graph().edge_count()},
        {"tokenizer", loaded->tokenizer_name()},
        {"stats", to_json(loaded->stats())},
        {"saved", saved},
    };
    corpus_ = std::move(loaded);
    retriever_.reset();
    sparse_.reset();
    return summary;
}

nlohmann::json Workspace::build_index() {
    const auto& c = corpus();
    auto index = SparseIndex::build(c);
    fs::create_directories(index_dir());
    auto path = (fs::path(index_dir()) / kSparseFile).string();
    index.save(path);
    retriever_.reset();
    return {{"command", "index"},   {"documents", index.doc_count()}, {"terms", index.term_count()},
            {"avg_length", index.average_length()}, {"saved", path}};
}

nlohmann::json Workspace::retrieve(const std::string& sample_id, const std::string& query, const std::string& retriever_tag,
                                   std::size_t top_n) {
    auto spec = RetrieverSpec::parse(retriever_tag);
    auto [qid, text] = query_for(sample_id, query);
    auto ranked = retriever().rank(spec, qid, text);
    std::vector<RankedEntry> head(ranked.entries().begin(),
                                  ranked.entries().begin() + static_cast<std::ptrdiff_t>(std::min(top_n, ranked.size())));
    RankedList trimmed(ranked.query_id(), ranked.strategy(), std::move(head));
    auto j = to_json(trimmed);
    j["artifact"] = write_artifact("ranked_" + safe_name(qid) + "_" + safe_name(spec.tag()) + ".json", j);
    return j;
}

nlohmann::json Workspace::rerank(const std::string& sample_id, const std::string& query, const std::string& base_tag,
                                 std::size_t top_n) {
    auto spec = RetrieverSpec::parse(base_tag);
    spec.ppr = true;
    return retrieve(sample_id, query, spec.tag(), top_n);
}

nlohmann::json Workspace::build_haystack(const std::string& sample_id, const std::string& retriever_tag,
                                         std::size_t budget, const OrderingPolicy& ordering) {
    auto spec = RetrieverSpec::parse(retriever_tag);
    const auto& s = sample(sample_id);
    auto ranked = retriever().rank(spec, s.id, s.question);
    auto haystack = assemble_haystack(s, ranked, corpus(), tokenizer(), budget);
    auto order = order_haystack(haystack, ranked, ordering);
    auto j = haystack_record(haystack, order, ordering);
    j["retriever"] = spec.tag();
    j["total_tokens"] = haystack.total_tokens();
    write_artifact("haystack_" + safe_name(s.id) + "_" + safe_name(spec.tag()) + "_" + std::to_string(budget) + ".json", j);
    return j;
}

nlohmann::json Workspace::eval_retrieval() {
    auto tags = config_.get_string_list("retrieval.retrievers", {"bm25"});
    std::vector<std::size_t> cutoffs;
    for (auto n : config_.get_int_list("metrics.cutoffs", {10, 20, 40, 80, 160})) cutoffs.push_back(positive(n, "metrics.cutoffs"));
    const auto& samples = qa().samples;
    nlohmann::json reports = nlohmann::json::array();
    for (const auto& tag : tags) {
        auto spec = RetrieverSpec::parse(tag);
        std::vector<RankedList> rankings;
        rankings.reserve(samples.size());
        for (const auto& s : samples) rankings.push_back(retriever().rank(spec, s.id, s.question));
        auto report = evaluate_retrieval(samples, rankings, cutoffs);
        report.strategy = spec.tag();
        reports.push_back(to_json(report));
    }
    nlohmann::json j = {{"command", "eval-retrieval"}, {"reports", reports}};
    j["artifact"] = write_artifact("retrieval_report.json", j);
    return j;
}

nlohmann::json Workspace::evaluate(EvalKind kind) {
    const auto& c = corpus();
    const auto& q = qa();

    const auto corpus_source = config_.get_string("paths.corpus");
    const auto saved_corpus = (fs::path(index_dir()) / kCorpusFile).string();
    const auto corpus_hash = file_digest(fs::exists(saved_corpus) ? saved_corpus : corpus_source);
    const auto qa_hash = file_digest(config_.get_string("paths.qa"));
    if (manifest_) {
        if (manifest_->value("corpus_hash", std::string{}) != corpus_hash)
            throw Error(ErrorCode::Validation, "corpus differs from the one recorded in the manifest");
        if (manifest_->value("qa_hash", std::string{}) != qa_hash)
            throw Error(ErrorCode::Validation, "QA samples differ from the ones recorded in the manifest");
    }

    std::vector<RetrieverSpec> specs;
    for (const auto& tag : config_.get_string_list("retrieval.retrievers", {"bm25"})) specs.push_back(RetrieverSpec::parse(tag));

    const auto context = parse_context(config_.get_string("haystack.context", "haystack"));
    std::vector<std::size_t> budgets;
    if (context == ContextMode::Haystack) {
        for (auto b : config_.get_int_list("haystack.budgets", kDefaultBudgets)) budgets.push_back(positive(b, "haystack.budgets"));
    } else {
        budgets.push_back(0);
    }

    std::vector<OrderingPolicy> orderings;
    std::vector<long long> seeds;
    auto order = config_.get_string("haystack.order", "ranked");
    if (order == "ranked") {
        orderings.push_back(OrderingPolicy::ranked());
    } else if (order == "random") {
        seeds = config_.get_int_list("haystack.seeds", kDefaultRandomSeeds);
        if (seeds.empty()) throw Error(ErrorCode::InvalidArgument, "haystack.seeds must list at least one seed");
        for (auto s : seeds) orderings.push_back(OrderingPolicy::random(static_cast<std::uint64_t>(s)));
    } else {
        throw Error(ErrorCode::InvalidArgument, "haystack.order must be ranked or random");
    }

    std::vector<std::optional<DynamicMode>> modes;
    if (kind == EvalKind::Static) {
        modes.emplace_back(std::nullopt);
    } else {
        auto mode = config_.get_string("eval.mode", "enforced");
        if (mode == "enforced") {
            for (auto r : config_.get_int_list("eval.rounds", {2})) modes.emplace_back(DynamicMode::enforced(positive(r, "eval.rounds")));
        } else if (mode == "variable") {
            modes.emplace_back(DynamicMode::variable(positive(config_.get_int("eval.max_rounds", 3), "eval.max_rounds")));
        } else {
            throw Error(ErrorCode::InvalidArgument, "eval.mode must be enforced or variable for dynamic runs");
        }
    }

    std::vector<const QASample*> selected;
    auto subset = config_.get_string_list("eval.samples");
    if (subset.empty()) {
        for (const auto& s : q.samples) selected.push_back(&s);
    } else {
        for (const auto& id : subset) selected.push_back(&sample(id));
    }

    EvalSettings base;
    base.context = context;
    base.strict_answer = config_.get_bool("eval.strict_answer", false);
    base.final_uses_original = config_.get_bool("eval.final_uses_original", false);

    std::vector<EvalJob> jobs;
    for (const auto& spec : specs)
        for (auto budget : budgets)
            for (const auto& ordering : orderings)
                for (const auto& mode : modes)
                    for (const auto* s : selected) {
                        EvalJob job{s, spec, base, mode};
                        job.settings.budget = budget;
                        job.settings.ordering = ordering;
                        jobs.push_back(job);
                    }

    fs::create_directories(out_dir());
    const auto results_path = (fs::path(out_dir()) / "results.jsonl").string();
    const auto traces_path = (fs::path(out_dir()) / "traces.jsonl").string();
    std::ofstream results(results_path, std::ios::trunc);
    if (!results) throw Error(ErrorCode::Io, "cannot write '" + results_path + "'");
    std::ofstream traces;
    if (kind == EvalKind::Dynamic) {
        traces.open(traces_path, std::ios::trunc);
        if (!traces) throw Error(ErrorCode::Io, "cannot write '" + traces_path + "'");
    }

    const auto command = kind == EvalKind::Static ? "eval-static" : "eval-dynamic";
    nlohmann::json manifest = {
        {"tool", "haystackcraft"},
        {"command", command},
        {"config", config_.to_json()},
        {"config_hash", config_.hash()},
        {"corpus_hash", corpus_hash},
        {"qa_hash", qa_hash},
        {"seeds", seeds},
    };
    write_artifact("manifest.json", manifest);

    std::size_t errored = 0;
    double f1_sum = 0.0;
    const auto& r = retriever();
    EvalContext ctx{c, tokenizer(), r, client()};
    const auto concurrency = positive(config_.get_int("eval.concurrency", 1), "eval.concurrency");
    run_jobs(jobs, ctx, concurrency, [&](std::size_t, const EvalOutcome& outcome) {
        results << to_json(outcome.result).dump() << '\n';
        if (outcome.trace) traces << to_json(*outcome.trace).dump() << '\n';
        if (outcome.result.errored())
            ++errored;
        else
            f1_sum += outcome.result.f1.f1;
    });
    results.flush();
    if (!results) throw Error(ErrorCode::Io, "write to '" + results_path + "' failed");

    const auto scored = jobs.size() - errored;
    nlohmann::json summary = {
        {"command", command},
        {"evaluations", jobs.size()},
        {"errored", errored},
        {"mean_f1", scored > 0 ? nlohmann::json(f1_sum / static_cast<double>(scored)) : nlohmann::json(nullptr)},
        {"results", results_path},
        {"manifest", (fs::path(out_dir()) / "manifest.json").string()},
    };
    if (kind == EvalKind::Dynamic) summary["traces"] = traces_path;
    return summary;
}

nlohmann::json Workspace::report(const std::string& results_path, const std::string& out_dir, std::string* table) {
    auto results = load_results(results_path);
    auto report = aggregate_report(results);
    auto j = to_json(report);
    auto text = render_report_table(report);
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        std::ofstream(fs::path(out_dir) / "report.json", std::ios::trunc) << j.dump(2) << '\n';
        std::ofstream(fs::path(out_dir) / "report.txt", std::ios::trunc) << text;
    }
    if (table) *table = std::move(text);
    return j;
}

}  // namespace hc
