#include "cspace/service.hpp"

#include "cspace/error.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

namespace cspace {

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Copies j[key] into out when present; remembers the key for the unknown-key check.
class Reader {
public:
    Reader(const json& j, std::string section) : j_(j), section_(std::move(section)) {
        if (!j_.is_object()) throw Error(ErrorKind::InvalidArgument, section_ + " must be a JSON object");
    }

    template <typename T>
    void get(const char* key, T& out) {
        seen_.insert(key);
        const auto it = j_.find(key);
        if (it == j_.end()) return;
        try {
            out = it->template get<T>();
        } catch (const json::exception& e) {
            throw Error(ErrorKind::InvalidArgument, section_ + "." + key + ": " + e.what());
        }
    }

    const json* sub(const char* key) {
        seen_.insert(key);
        const auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }

    void finish() const {
        for (const auto& [k, v] : j_.items()) {
            if (!seen_.count(k)) throw Error(ErrorKind::InvalidArgument, "unknown config key " + section_ + "." + k);
        }
    }

private:
    const json& j_;
    std::string section_;
    std::set<std::string> seen_;
};

json corpus_json(const CorpusOptions& o) {
    json j = {{"stem", o.stem},
              {"max_ngram", o.max_ngram},
              {"ngram_percentile", o.ngram_percentile},
              {"ngram_min_count", o.ngram_min_count},
              {"scoring", std::string(to_string(o.scoring))}};
    j["stopwords"] = o.stopwords ? json(*o.stopwords) : json(nullptr);
    return j;
}

void read_corpus(const json& j, CorpusOptions& o) {
    Reader r(j, "corpus");
    r.get("stem", o.stem);
    r.get("max_ngram", o.max_ngram);
    r.get("ngram_percentile", o.ngram_percentile);
    r.get("ngram_min_count", o.ngram_min_count);
    if (const auto* s = r.sub("scoring")) o.scoring = parse_scoring_function(s->get<std::string>());
    if (const auto* s = r.sub("stopwords"); s && !s->is_null()) o.stopwords = s->get<std::set<std::string>>();
    r.finish();
}

json tsne_json(const TsneParams& p) {
    return {{"perplexity", p.perplexity},
            {"theta", p.theta},
            {"iterations", p.iterations},
            {"learning_rate", p.learning_rate},
            {"seed", p.seed},
            {"exaggeration", p.exaggeration},
            {"stop_lying_iter", p.stop_lying_iter},
            {"momentum", p.momentum},
            {"final_momentum", p.final_momentum},
            {"mom_switch_iter", p.mom_switch_iter},
            {"exact_threshold", p.exact_threshold},
            {"kl_every", p.kl_every}};
}

void read_tsne(const json& j, TsneParams& p) {
    Reader r(j, "tsne");
    r.get("perplexity", p.perplexity);
    r.get("theta", p.theta);
    r.get("iterations", p.iterations);
    r.get("learning_rate", p.learning_rate);
    r.get("seed", p.seed);
    r.get("exaggeration", p.exaggeration);
    r.get("stop_lying_iter", p.stop_lying_iter);
    r.get("momentum", p.momentum);
    r.get("final_momentum", p.final_momentum);
    r.get("mom_switch_iter", p.mom_switch_iter);
    r.get("exact_threshold", p.exact_threshold);
    r.get("kl_every", p.kl_every);
    r.finish();
}

json queue_json(const QueueOptions& q) {
    return {{"candidate_pool", q.candidate_pool},       {"max_items", q.max_items},
            {"reassign_gap", q.reassign_gap},           {"swap_margin", q.swap_margin},
            {"merge_similarity", q.merge_similarity},   {"weak_similarity", q.weak_similarity},
            {"weight_similarity", q.weight_similarity}, {"weight_distance", q.weight_distance},
            {"weight_conflict", q.weight_conflict},     {"quartile_penalty", q.quartile_penalty},
            {"focus_padding", q.focus_padding}};
}

void read_queue(const json& j, QueueOptions& q) {
    Reader r(j, "queue");
    r.get("candidate_pool", q.candidate_pool);
    r.get("max_items", q.max_items);
    r.get("reassign_gap", q.reassign_gap);
    r.get("swap_margin", q.swap_margin);
    r.get("merge_similarity", q.merge_similarity);
    r.get("weak_similarity", q.weak_similarity);
    r.get("weight_similarity", q.weight_similarity);
    r.get("weight_distance", q.weight_distance);
    r.get("weight_conflict", q.weight_conflict);
    r.get("quartile_penalty", q.quartile_penalty);
    r.get("focus_padding", q.focus_padding);
    r.finish();
}

std::string lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

json vec2_json(Vec2 p) { return {{"x", p.x}, {"y", p.y}}; }

json read_json_file(const fs::path& p) {
    std::ifstream in(p);
    if (!in) throw Error(ErrorKind::MissingFile, p.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::MalformedRecord, p.string() + ": " + e.what());
    }
}

void write_json_file(const fs::path& p, const json& j) {
    std::ofstream out(p);
    if (!out) throw Error(ErrorKind::MissingFile, p.string());
    out << j.dump(2) << '\n';
}

WeightTable base_weights(const Corpus& corpus, const SessionConfig& config) {
    WeightTable w;
    for (const auto& word : corpus.stats.vocabulary) w.insert(word, corpus_tfidf(corpus.stats, word));
    if (config.imported_weights) w.import_learned(*config.imported_weights);
    return w;
}

std::map<std::string, double> word_scores(const Corpus& corpus) {
    std::map<std::string, double> s;
    for (const auto& w : corpus.stats.vocabulary) s[w] = corpus_tfidf(corpus.stats, w);
    return s;
}

}  // namespace

json SessionConfig::to_json() const {
    json j;
    j["corpus"] = corpus_json(corpus);
    j["conceptgen"] = {{"n_seeds", conceptgen.n_seeds}, {"expansion_k", conceptgen.expansion_k}};
    j["gather"] = {{"doc_keywords", gather.doc_keywords}, {"corpus_keywords", gather.corpus_keywords}};
    j["abstraction"] = {{"eps_similarity", abstraction.eps_similarity},
                        {"eps_neighborhood", abstraction.eps_neighborhood},
                        {"super_factor", abstraction.super_factor},
                        {"level", abstraction.level}};
    j["tsne"] = tsne_json(tsne);
    j["topics"] = {{"tau", topics.tau}, {"doc_keywords", topics.doc_keywords}, {"top_keywords", topics.top_keywords}};
    j["queue"] = queue_json(queue);
    j["classify"] = {{"sigma_related", classify.sigma_related}, {"rho_fraction", classify.rho_fraction}};
    j["viewport"] = {{"width", viewport.width}, {"height", viewport.height}};
    j["edits"] = edits;
    j["imported_weights"] = imported_weights ? *imported_weights : json(nullptr);
    return j;
}

SessionConfig SessionConfig::from_json(const json& j) {
    SessionConfig c;
    if (j.is_null()) return c;
    Reader r(j, "config");
    if (const auto* s = r.sub("corpus")) read_corpus(*s, c.corpus);
    if (const auto* s = r.sub("conceptgen")) {
        Reader q(*s, "conceptgen");
        q.get("n_seeds", c.conceptgen.n_seeds);
        q.get("expansion_k", c.conceptgen.expansion_k);
        q.finish();
    }
    if (const auto* s = r.sub("gather")) {
        Reader q(*s, "gather");
        q.get("doc_keywords", c.gather.doc_keywords);
        q.get("corpus_keywords", c.gather.corpus_keywords);
        q.finish();
    }
    if (const auto* s = r.sub("abstraction")) {
        Reader q(*s, "abstraction");
        q.get("eps_similarity", c.abstraction.eps_similarity);
        q.get("eps_neighborhood", c.abstraction.eps_neighborhood);
        q.get("super_factor", c.abstraction.super_factor);
        q.get("level", c.abstraction.level);
        q.finish();
    }
    if (const auto* s = r.sub("tsne")) read_tsne(*s, c.tsne);
    if (const auto* s = r.sub("topics")) {
        Reader q(*s, "topics");
        q.get("tau", c.topics.tau);
        q.get("doc_keywords", c.topics.doc_keywords);
        q.get("top_keywords", c.topics.top_keywords);
        q.finish();
    }
    if (const auto* s = r.sub("queue")) read_queue(*s, c.queue);
    if (const auto* s = r.sub("classify")) {
        Reader q(*s, "classify");
        q.get("sigma_related", c.classify.sigma_related);
        q.get("rho_fraction", c.classify.rho_fraction);
        q.finish();
    }
    if (const auto* s = r.sub("viewport")) {
        Reader q(*s, "viewport");
        q.get("width", c.viewport.width);
        q.get("height", c.viewport.height);
        q.finish();
    }
    if (const auto* s = r.sub("edits")) c.edits = *s;
    if (const auto* s = r.sub("imported_weights"); s && !s->is_null()) c.imported_weights = *s;
    r.finish();
    c.validate();
    return c;
}

void SessionConfig::validate() const {
    abstraction.validate();
    tsne.validate();
    topics.validate();
    if (!(viewport.width > 0.0 && viewport.height > 0.0)) {
        throw Error(ErrorKind::InvalidArgument, "viewport extent must be positive");
    }
    if (conceptgen.n_seeds == 0) throw Error(ErrorKind::InvalidArgument, "n_seeds must be positive");
    if (!edits.is_array()) throw Error(ErrorKind::InvalidArgument, "edits must be a JSON list");
}

json SessionSources::to_json() const {
    json j;
    j["corpus"] = corpus_path ? json(corpus_path->string()) : json(nullptr);
    j["embeddings"] = embeddings_path ? json(embeddings_path->string()) : json(nullptr);
    return j;
}

SessionSources SessionSources::from_json(const json& j) {
    SessionSources s;
    if (j.contains("corpus") && !j["corpus"].is_null()) s.corpus_path = j["corpus"].get<std::string>();
    if (j.contains("embeddings") && !j["embeddings"].is_null()) s.embeddings_path = j["embeddings"].get<std::string>();
    return s;
}

std::string_view to_string(JobKind k) {
    switch (k) {
    case JobKind::NONE: return "none";
    case JobKind::TSNE: return "tsne";
    case JobKind::TOPICS: return "topics";
    }
    return "none";
}

JobKind parse_job_kind(std::string_view name) {
    if (name == "tsne") return JobKind::TSNE;
    if (name == "topics") return JobKind::TOPICS;
    throw Error(ErrorKind::InvalidArgument, "unknown job kind " + std::string(name));
}

json JobStatus::to_json() const {
    return {{"kind", std::string(cspace::to_string(kind))},
            {"state", state},
            {"processed", processed},
            {"total", total},
            {"progress", total ? static_cast<double>(processed) / static_cast<double>(total) : 0.0},
            {"error", error},
            {"generation", generation}};
}

Projection2D project_words(const std::vector<std::string>& words, const std::vector<std::string>& concepts,
                           const EmbeddingStore& store, const TsneParams& params, const Viewport& viewport,
                           const TsneCallback& callback) {
    if (words.empty()) throw Error(ErrorKind::NoConcepts, "nothing to project");
    TsneCallback first, second;
    if (callback) {
        first = [&](const TsneProgress& p) { return callback({p.iteration, 2 * p.total}); };
        second = [&](const TsneProgress& p) { return callback({p.total + p.iteration, 2 * p.total}); };
    }
    const auto anchors = initial_anchor_pass(words, concepts, store, params, first);
    const auto raw = tsne_project(words, anchors, store, params, second);
    return rescale(raw, viewport.rect());
}

PipelineResult run_pipeline(const Corpus& corpus, const EmbeddingStore& store, const SessionConfig& config) {
    config.validate();
    if (corpus.documents.empty()) throw Error(ErrorKind::EmptyCorpus, "no documents");
    PipelineResult r;
    r.weights = base_weights(corpus, config);

    std::vector<std::string> seeds;
    for (const auto& w : extract_seed_concepts(corpus, corpus.stats.vocabulary.size())) {
        if (seeds.size() >= config.conceptgen.n_seeds) break;
        if (store.contains(w)) seeds.push_back(w);
    }
    if (seeds.empty()) throw Error(ErrorKind::NoConcepts, "no seed word has an embedding");
    for (const auto& s : seeds) r.concepts.push_back(expand_concept_vector(s, store, corpus.stats, config.conceptgen.expansion_k));
    r.concepts = rank_descriptors(std::move(r.concepts), corpus, corpus.scoring);
    r.concepts = apply_user_edits(std::move(r.concepts), parse_edit_script(config.edits));

    const auto seed_model = train(corpus, r.weights, config.topics);
    std::vector<std::vector<std::string>> topic_keywords;
    for (const auto& t : seed_model.topics) {
        std::vector<std::string> kw;
        for (const auto& [w, x] : t.top_keywords) kw.push_back(w);
        topic_keywords.push_back(std::move(kw));
    }
    const auto input = gather_projection_input(r.concepts, topic_keywords, corpus, store, config.gather);
    r.concepts = input.concepts;
    std::vector<std::string> concept_words;
    for (const auto& c : input.concepts) {
        if (store.contains(c.concept_word)) concept_words.push_back(c.concept_word);
    }
    r.canvas = project_words(input.words, concept_words, store, config.tsne, config.viewport);

    const QuadTree qt(r.canvas);
    r.hierarchy = build_hierarchy(input.concepts, r.canvas, qt, store, config.abstraction, word_scores(corpus));
    r.weights = reweight_from_concepts(r.hierarchy, std::move(r.weights));
    if (config.imported_weights) r.weights.import_learned(*config.imported_weights);
    r.topics = train(corpus, r.weights, config.topics);
    return r;
}

json SearchHit::to_json() const {
    return {{"word", word},
            {"surface", surface},
            {"score", score},
            {"position", position ? vec2_json(*position) : json(nullptr)},
            {"role", role ? json(std::string(cspace::to_string(*role))) : json(nullptr)},
            {"can_add_as_descriptor", can_add_as_descriptor}};
}

Session::Session(std::string id, SessionSources sources, SessionConfig config)
    : id_(std::move(id)), sources_(std::move(sources)), config_(std::move(config)) {
    load_sources();
    auto r = run_pipeline(corpus_, store_, config_);
    initial_ = r.hierarchy;
    auto s = std::make_shared<Snapshot>();
    s->hierarchy = std::move(r.hierarchy);
    s->canvas = std::move(r.canvas);
    s->weights = std::move(r.weights);
    s->topics = std::move(r.topics);
    std::lock_guard lock(writer_);
    publish(std::move(s));
}

Session::Session(std::string id, SessionSources sources, SessionConfig config, const Restore& restore)
    : id_(std::move(id)), sources_(std::move(sources)), config_(std::move(config)) {
    load_sources();
    initial_ = restore.initial;
    log_ = restore.log;
    config_.abstraction.level = restore.level;
    if (const auto v = restore.hierarchy.violations(); !v.empty()) {
        throw Error(ErrorKind::MalformedRecord, "saved hierarchy is inconsistent: " + v.front());
    }
    auto s = std::make_shared<Snapshot>();
    s->hierarchy = restore.hierarchy;
    s->canvas = restore.canvas;
    s->weights = reweight_from_concepts(s->hierarchy, base_weights(corpus_, config_));
    if (config_.imported_weights && log_.empty()) s->weights.import_learned(*config_.imported_weights);
    s->topics = train(corpus_, s->weights, config_.topics);
    std::lock_guard lock(writer_);
    publish(std::move(s));
}

Session::~Session() {
    cancel_ = true;
    if (worker_.joinable()) worker_.join();
}

void Session::load_sources() {
    if (sources_.corpus_path) {
        corpus_ = load_corpus(*sources_.corpus_path, config_.corpus);
    } else {
        corpus_ = build_corpus(sources_.documents, config_.corpus);
    }
    if (sources_.embeddings_path) {
        store_ = load_embeddings(*sources_.embeddings_path, config_.corpus.stem);
    } else {
        std::istringstream in(sources_.embeddings_text);
        store_ = read_embeddings(in, config_.corpus.stem);
    }
    if (store_.empty()) throw Error(ErrorKind::DimensionMismatch, "embedding source holds no vectors");
}

RefinementEnv Session::env(const Snapshot& s) const {
    RefinementEnv e;
    e.store = &store_;
    e.canvas = &s.canvas;
    e.stats = &corpus_.stats;
    e.params = config_.abstraction;
    e.params.level = s.hierarchy.level;
    e.viewport = config_.viewport;
    e.queue = config_.queue;
    return e;
}

std::shared_ptr<const Snapshot> Session::snapshot() const {
    std::lock_guard lock(snapshot_mutex_);
    return current_;
}

std::shared_ptr<Snapshot> Session::copy_current() const { return std::make_shared<Snapshot>(*snapshot()); }

std::shared_ptr<const Snapshot> Session::publish(std::shared_ptr<Snapshot> next) {
    next->qt = QuadTree(next->canvas);
    next->hierarchy_hash = hierarchy_hash(next->hierarchy);
    next->topic_hash = next->topics.trained() ? topic_hash(next->topics) : std::string();
    const auto e = env(*next);
    next->quality = monitor(next->hierarchy, e, &next->topics, &corpus_);
    next->queue = build_queue(next->quality, next->hierarchy, e, suppressed_);
    std::lock_guard lock(snapshot_mutex_);
    next->generation = ++generation_;
    current_ = std::move(next);
    return current_;
}

std::shared_ptr<const Snapshot> Session::apply_action(const RefinementAction& action) {
    std::lock_guard lock(writer_);
    auto next = copy_current();
    const auto e = env(*next);
    LogEntry entry;
    entry.timestamp = now_timestamp();
    entry.action = action;
    entry.pre_hash = next->hierarchy_hash;
    next->hierarchy = apply(action, next->hierarchy, e);
    next->weights = reweight_from_concepts(next->hierarchy, std::move(next->weights));
    next->projection_stale = true;
    next->topics_stale = true;
    entry.post_hash = hierarchy_hash(next->hierarchy);
    auto published = publish(std::move(next));
    log_.push_back(std::move(entry));
    return published;
}

std::shared_ptr<const Snapshot> Session::accept_recommendation(std::size_t index) {
    const auto s = snapshot();
    if (index >= s->queue.size()) {
        throw Error(ErrorKind::UnknownTarget, "no recommendation " + std::to_string(index));
    }
    return apply_action(s->queue[index].action);
}

std::shared_ptr<const Snapshot> Session::reject_recommendation(std::size_t index) {
    std::lock_guard lock(writer_);
    auto next = copy_current();
    if (index >= next->queue.size()) {
        throw Error(ErrorKind::UnknownTarget, "no recommendation " + std::to_string(index));
    }
    suppressed_.insert(suppression_key(next->queue[index]));
    return publish(std::move(next));
}

int Session::abstraction_level() const { return snapshot()->hierarchy.level; }

std::shared_ptr<const Snapshot> Session::set_abstraction_level(int level) {
    if (level < kMinLevel || level > kMaxLevel) {
        throw Error(ErrorKind::LevelOutOfRange, "level " + std::to_string(level) + " outside [-2, 2]");
    }
    std::lock_guard lock(writer_);
    auto next = copy_current();
    auto params = config_.abstraction;
    params.level = level;
    next->hierarchy = rebuild_super_concepts(std::move(next->hierarchy), next->canvas, store_, params);
    next->weights = reweight_from_concepts(next->hierarchy, std::move(next->weights));
    return publish(std::move(next));
}

void Session::start_job(JobKind kind) {
    if (kind == JobKind::NONE) throw Error(ErrorKind::InvalidArgument, "no job kind given");
    std::lock_guard lock(job_mutex_);
    if (job_.state == "running") {
        throw Error(ErrorKind::JobAlreadyRunning, std::string(to_string(job_.kind)) + " job in progress");
    }
    if (worker_.joinable()) worker_.join();
    job_ = JobStatus{};
    job_.kind = kind;
    job_.state = "running";
    job_.total = kind == JobKind::TSNE ? 2 * static_cast<std::size_t>(config_.tsne.iterations) : 0;
    cancel_ = false;
    worker_ = std::thread(&Session::run_job, this, kind, snapshot());
}

JobStatus Session::job() const {
    std::lock_guard lock(job_mutex_);
    return job_;
}

void Session::wait_for_job() {
    std::thread t;
    {
        std::lock_guard lock(job_mutex_);
        t = std::move(worker_);
    }
    if (t.joinable()) t.join();
}

void Session::cancel_job() { cancel_ = true; }

void Session::run_job(JobKind kind, std::shared_ptr<const Snapshot> base) {
    auto finish = [&](std::string state, std::string error, std::uint64_t generation) {
        std::lock_guard lock(job_mutex_);
        job_.state = std::move(state);
        job_.error = std::move(error);
        job_.generation = generation;
    };
    try {
        std::shared_ptr<const Snapshot> published;
        if (kind == JobKind::TSNE) {
            std::vector<std::string> words, concepts;
            for (const auto& [w, p] : base->canvas.coords) words.push_back(w);
            for (const auto& [c, node] : base->hierarchy.concepts) {
                if (base->canvas.contains(c)) concepts.push_back(c);
            }
            const auto canvas = project_words(words, concepts, store_, config_.tsne, config_.viewport,
                                              [&](const TsneProgress& p) {
                                                  std::lock_guard lock(job_mutex_);
                                                  job_.processed = static_cast<std::size_t>(p.iteration);
                                                  job_.total = static_cast<std::size_t>(p.total);
                                                  return !cancel_.load();
                                              });
            std::lock_guard lock(writer_);
            auto next = copy_current();
            next->canvas = canvas;
            auto params = config_.abstraction;
            params.level = next->hierarchy.level;
            next->hierarchy = rebuild_super_concepts(std::move(next->hierarchy), next->canvas, store_, params);
            next->projection_stale = false;
            published = publish(std::move(next));
        } else {
            auto tm = train(corpus_, base->weights, config_.topics, [&](const TrainProgress& p) {
                std::lock_guard lock(job_mutex_);
                job_.processed = p.processed;
                job_.total = p.total;
                return !cancel_.load();
            });
            std::lock_guard lock(writer_);
            auto next = copy_current();
            next->topics = std::move(tm);
            next->topics_stale = next->hierarchy_hash != base->hierarchy_hash;
            published = publish(std::move(next));
        }
        finish("done", "", published->generation);
    } catch (const Error& e) {
        finish(e.kind() == ErrorKind::Cancelled ? "cancelled" : "failed", e.what(), 0);
    } catch (const std::exception& e) {
        finish("failed", e.what(), 0);
    }
}

std::vector<LogEntry> Session::action_log() const {
    std::lock_guard lock(writer_);
    return log_;
}

std::string Session::label_of(const std::string& w) const {
    const auto it = corpus_.stats.surface.find(w);
    return it == corpus_.stats.surface.end() ? w : it->second;
}

std::vector<SearchHit> Session::search(std::string_view query, std::size_t limit) const {
    const auto s = snapshot();
    const auto q = lower(query);
    const auto stemmed = q.empty() ? q : normalize_word(q, config_.corpus.stem);
    std::vector<std::pair<bool, SearchHit>> found;
    for (const auto& w : corpus_.stats.vocabulary) {
        const auto surface = label_of(w);
        if (w.rfind(q, 0) != 0 && surface.rfind(q, 0) != 0) continue;
        SearchHit h;
        h.word = w;
        h.surface = surface;
        h.score = corpus_tfidf(corpus_.stats, w);
        if (s->canvas.contains(w)) h.position = s->canvas.at(w);
        h.role = role_of(s->hierarchy, w);
        h.can_add_as_descriptor = !h.role || *h.role == Role::BASE;
        const bool exact = w == q || surface == q || (!q.empty() && w == stemmed);
        found.emplace_back(exact, std::move(h));
    }
    std::sort(found.begin(), found.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first;
        if (a.second.score != b.second.score) return a.second.score > b.second.score;
        return a.second.word < b.second.word;
    });
    std::vector<SearchHit> out;
    for (auto& [exact, h] : found) {
        if (out.size() >= limit) break;
        out.push_back(std::move(h));
    }
    return out;
}

json Session::xray(Vec2 point, double radius) const {
    const auto s = snapshot();
    json layers = json::object();
    for (const auto l : {Layer::SUPER_CONCEPT, Layer::CONCEPT, Layer::DESCRIPTOR, Layer::TOPIC, Layer::DOCUMENT,
                         Layer::KEYWORD}) {
        layers[std::string(to_string(l))] = json::array();
    }
    auto add = [&](Layer l, const std::string& id, const std::string& label, Vec2 p) {
        layers[std::string(to_string(l))].push_back({{"id", id}, {"label", label}, {"x", p.x}, {"y", p.y}});
    };
    const auto hits = radius >= 0.0 ? s->qt.radius_query(point, radius) : std::vector<Neighbor>{};
    std::set<std::string> keywords;
    for (const auto& t : s->topics.topics) {
        for (const auto& [w, x] : t.top_keywords) keywords.insert(w);
    }
    for (const auto& n : hits) {
        const auto p = s->canvas.at(n.word);
        if (s->hierarchy.is_concept(n.word)) {
            add(Layer::CONCEPT, n.word, label_of(n.word), p);
        } else if (s->hierarchy.is_descriptor(n.word)) {
            add(Layer::DESCRIPTOR, n.word, label_of(n.word), p);
        }
        if (keywords.count(n.word)) add(Layer::KEYWORD, n.word, label_of(n.word), p);
    }
    for (const auto& sc : s->hierarchy.super_concepts) {
        if (!s->canvas.contains(sc.label)) continue;
        const auto p = s->canvas.at(sc.label);
        if (radius >= 0.0 && distance(p, point) <= radius) add(Layer::SUPER_CONCEPT, "super:" + sc.label, label_of(sc.label), p);
    }
    for (const auto& t : s->topics.topics) {
        const auto p = owner_position(t.centroid, s->canvas);
        if (p && radius >= 0.0 && distance(*p, point) <= radius) {
            add(Layer::TOPIC, "topic:" + std::to_string(t.id),
                t.top_keywords.empty() ? std::to_string(t.id) : label_of(t.top_keywords.front().first), *p);
        }
    }
    for (const auto& [doc, v] : s->topics.doc_vectors) {
        const auto p = owner_position(v, s->canvas);
        if (p && radius >= 0.0 && distance(*p, point) <= radius) add(Layer::DOCUMENT, "doc:" + doc, doc, *p);
    }
    json empty = json::object();
    for (const auto& [name, list] : layers.items()) empty[name] = list.empty();
    return {{"generation", s->generation},
            {"point", vec2_json(point)},
            {"radius", radius},
            {"layers", std::move(layers)},
            {"empty", std::move(empty)}};
}

std::map<int, TopicCase> Session::topic_cases(const Snapshot& s) const {
    std::map<int, TopicCase> cases;
    for (const auto& t : s.topics.topics) {
        const auto p = owner_position(t.centroid, s.canvas);
        if (!p) {
            cases[t.id] = TopicCase::UNREPRESENTED;
            continue;
        }
        const auto g = glyph("topic:" + std::to_string(t.id), t.centroid, *p, s.hierarchy, s.canvas, store_);
        cases[t.id] = classify(g, config_.viewport, config_.classify);
    }
    return cases;
}

CanvasLayout Session::layout(const Snapshot& s, std::string_view view) const {
    CanvasLayout out;
    std::vector<CanvasObject> objects;
    const auto colors = assign_colors(s.hierarchy, s.canvas, config_.viewport);
    auto color_of = [&](const std::string& w) {
        const auto* c = colors.color_of(w);
        return c ? *c : std::string();
    };
    if (view == "concept") {
        for (const auto& sc : s.hierarchy.super_concepts) {
            if (!s.canvas.contains(sc.label)) continue;
            auto o = make_object("super:" + sc.label, label_of(sc.label), Layer::SUPER_CONCEPT, s.canvas.at(sc.label));
            o.color = "#bbbbbb";
            objects.push_back(std::move(o));
        }
        for (const auto& [c, node] : s.hierarchy.concepts) {
            if (s.canvas.contains(c)) {
                auto o = make_object(c, label_of(c), Layer::CONCEPT, s.canvas.at(c));
                o.color = color_of(c);
                objects.push_back(std::move(o));
            }
            for (const auto& d : node.descriptors) {
                if (!s.canvas.contains(d.word)) continue;
                auto o = make_object(d.word, label_of(d.word), Layer::DESCRIPTOR, s.canvas.at(d.word));
                o.color = color_of(d.word);
                objects.push_back(std::move(o));
            }
        }
        out.voronoi = super_concept_voronoi(s.hierarchy, s.canvas, config_.viewport);
    } else if (view == "topic") {
        std::set<std::string> keywords;
        for (const auto& t : s.topics.topics) {
            const auto p = owner_position(t.centroid, s.canvas);
            for (const auto& [w, x] : t.top_keywords) keywords.insert(w);
            if (!p) continue;
            const auto label = t.top_keywords.empty() ? std::to_string(t.id) : label_of(t.top_keywords.front().first);
            objects.push_back(make_object("topic:" + std::to_string(t.id), label, Layer::TOPIC, *p));
        }
        for (const auto& [doc, v] : s.topics.doc_vectors) {
            if (const auto p = owner_position(v, s.canvas)) objects.push_back(make_object("doc:" + doc, doc, Layer::DOCUMENT, *p));
        }
        for (const auto& w : keywords) {
            if (!s.canvas.contains(w)) continue;
            auto o = make_object(w, label_of(w), Layer::KEYWORD, s.canvas.at(w));
            o.color = color_of(w);
            objects.push_back(std::move(o));
        }
    } else {
        throw Error(ErrorKind::InvalidArgument, "unknown view " + std::string(view));
    }
    out.objects = reduce_overlap(std::move(objects), config_.viewport).objects;
    return out;
}

json Session::state(std::string_view view) const {
    const auto s = snapshot();
    json j = {{"session", id_},
              {"generation", s->generation},
              {"view", std::string(view)},
              {"level", s->hierarchy.level},
              {"projection_stale", s->projection_stale},
              {"topics_stale", s->topics_stale},
              {"hierarchy_hash", s->hierarchy_hash},
              {"topic_hash", s->topic_hash},
              {"job", job().to_json()}};
    const auto lay = layout(*s, view);
    j["layout"] = layout_to_json(lay);
    if (view == "concept") {
        j["hierarchy"] = hierarchy_to_json(s->hierarchy);
    } else {
        const auto cases = topic_cases(*s);
        j["topics"] = topics_to_json(s->topics, cases);
        const auto colors = assign_colors(s->hierarchy, s->canvas, config_.viewport);
        json glyphs = json::array();
        auto add_glyph = [&](const std::string& owner, const KeywordVector& v, std::optional<TopicCase> c) {
            const auto p = owner_position(v, s->canvas);
            if (!p) return;
            const auto g = glyph(owner, v, *p, s->hierarchy, s->canvas, store_, colors.concepts);
            json spikes = json::array();
            for (const auto& sp : g.spikes) {
                spikes.push_back({{"concept", sp.concept_word},
                                  {"similarity", sp.similarity},
                                  {"endpoint", vec2_json(sp.endpoint)},
                                  {"opacity", sp.opacity},
                                  {"color", sp.color}});
            }
            glyphs.push_back({{"owner", owner},
                              {"position", vec2_json(*p)},
                              {"case", std::string(to_string(c ? *c : classify(g, config_.viewport, config_.classify)))},
                              {"spikes", std::move(spikes)}});
        };
        for (const auto& t : s->topics.topics) add_glyph("topic:" + std::to_string(t.id), t.centroid, cases.at(t.id));
        for (const auto& [doc, v] : s->topics.doc_vectors) add_glyph("doc:" + doc, v, std::nullopt);
        j["glyphs"] = std::move(glyphs);
    }
    return j;
}

json Session::export_artifact(std::string_view kind) const {
    const auto s = snapshot();
    if (kind == "hierarchy") return hierarchy_to_json(s->hierarchy);
    if (kind == "weights") return s->weights.export_learned();
    if (kind == "topics") return topics_to_json(s->topics, topic_cases(*s));
    if (kind == "layout") {
        return {{"concept", layout_to_json(layout(*s, "concept"))}, {"topic", layout_to_json(layout(*s, "topic"))}};
    }
    if (kind == "projection") return projection_to_json(s->canvas, config_.viewport);
    if (kind == "quality") return s->quality.to_json();
    if (kind == "log") {
        json j = json::array();
        for (const auto& e : action_log()) j.push_back(e.to_json());
        return j;
    }
    throw Error(ErrorKind::InvalidArgument, "unknown export kind " + std::string(kind));
}

void Session::save(const fs::path& dir) const {
    fs::create_directories(dir);
    std::lock_guard lock(writer_);
    auto sources = sources_;
    if (!sources.corpus_path) {
        std::ofstream out(dir / "documents.jsonl");
        for (const auto& d : sources_.documents) {
            json j = {{"id", d.id}, {"text", d.text}};
            if (d.speaker) j["speaker"] = *d.speaker;
            out << j.dump() << '\n';
        }
        sources.corpus_path = fs::absolute(dir / "documents.jsonl");
    }
    if (!sources.embeddings_path) {
        std::ofstream(dir / "vectors.txt") << sources_.embeddings_text;
        sources.embeddings_path = fs::absolute(dir / "vectors.txt");
    }
    const auto s = snapshot();
    write_json_file(dir / "config.json", {{"config", config_.to_json()}, {"sources", sources.to_json()}, {"level", s->hierarchy.level}});
    write_json_file(dir / "initial_hierarchy.json", hierarchy_to_json(initial_));
    write_json_file(dir / "hierarchy.json", hierarchy_to_json(s->hierarchy));
    write_json_file(dir / "projection.json", projection_to_json(s->canvas, config_.viewport));
    std::ofstream log(dir / "actions.jsonl");
    for (const auto& e : log_) write_log_line(log, e);
}

std::unique_ptr<Session> Session::load(const fs::path& dir, std::string id) {
    const auto cfg = read_json_file(dir / "config.json");
    auto config = SessionConfig::from_json(cfg.value("config", json::object()));
    auto sources = SessionSources::from_json(cfg.value("sources", json::object()));
    Restore r;
    r.level = cfg.value("level", config.abstraction.level);
    r.initial = hierarchy_from_json(read_json_file(dir / "initial_hierarchy.json"));
    r.hierarchy = hierarchy_from_json(read_json_file(dir / "hierarchy.json"));
    r.canvas = projection_from_json(read_json_file(dir / "projection.json"), config.viewport);
    if (std::ifstream in(dir / "actions.jsonl"); in) r.log = read_log(in);
    if (id.empty()) id = dir.filename().string();
    return std::unique_ptr<Session>(new Session(std::move(id), std::move(sources), std::move(config), r));
}

CreateRequest CreateRequest::from_json(const json& j) {
    if (!j.is_object()) throw Error(ErrorKind::InvalidArgument, "request body must be a JSON object");
    CreateRequest r;
    try {
        if (j.contains("corpus")) {
            r.sources.corpus_path = j.at("corpus").get<std::string>();
        } else if (j.contains("documents")) {
            for (const auto& d : j.at("documents")) {
                RawDocument raw;
                raw.id = d.at("id").get<std::string>();
                raw.text = d.at("text").get<std::string>();
                if (d.contains("speaker") && !d["speaker"].is_null()) raw.speaker = d["speaker"].get<std::string>();
                r.sources.documents.push_back(std::move(raw));
            }
        } else {
            throw Error(ErrorKind::InvalidArgument, "request needs corpus or documents");
        }
        if (j.contains("embeddings")) {
            r.sources.embeddings_path = j.at("embeddings").get<std::string>();
        } else if (j.contains("vectors")) {
            const auto& v = j.at("vectors");
            if (v.is_string()) {
                r.sources.embeddings_text = v.get<std::string>();
            } else {
                std::ostringstream text;
                for (const auto& [w, row] : v.items()) {
                    text << w;
                    for (const auto& x : row) text << ' ' << x.get<double>();
                    text << '\n';
                }
                r.sources.embeddings_text = text.str();
            }
        } else {
            throw Error(ErrorKind::InvalidArgument, "request needs embeddings or vectors");
        }
        r.config = SessionConfig::from_json(j.value("config", json::object()));
        if (j.contains("seed")) r.config.tsne.seed = j.at("seed").get<std::uint64_t>();
    } catch (const json::exception& e) {
        throw Error(ErrorKind::InvalidArgument, e.what());
    }
    return r;
}

std::string SessionManager::next_id() {
    std::lock_guard lock(mutex_);
    return "s" + std::to_string(++counter_);
}

std::shared_ptr<Session> SessionManager::create(SessionSources sources, SessionConfig config) {
    auto s = std::make_shared<Session>(next_id(), std::move(sources), std::move(config));
    std::lock_guard lock(mutex_);
    sessions_[s->id()] = s;
    return s;
}

std::shared_ptr<Session> SessionManager::load(const fs::path& dir) {
    std::shared_ptr<Session> s = Session::load(dir, next_id());
    std::lock_guard lock(mutex_);
    sessions_[s->id()] = s;
    return s;
}

std::shared_ptr<Session> SessionManager::get(const std::string& id) const {
    std::lock_guard lock(mutex_);
    const auto it = sessions_.find(id);
    if (it == sessions_.end()) throw Error(ErrorKind::UnknownSession, id);
    return it->second;
}

bool SessionManager::erase(const std::string& id) {
    std::lock_guard lock(mutex_);
    return sessions_.erase(id) > 0;
}

std::vector<std::string> SessionManager::ids() const {
    std::lock_guard lock(mutex_);
    std::vector<std::string> out;
    for (const auto& [id, s] : sessions_) out.push_back(id);
    return out;
}

}  // namespace cspace
