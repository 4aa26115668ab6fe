#ifndef CSPACE_SERVICE_HPP
#define CSPACE_SERVICE_HPP

#include "cspace/conceptgen.hpp"
#include "cspace/corpus.hpp"
#include "cspace/embeddings.hpp"
#include "cspace/geometry.hpp"
#include "cspace/hierarchy.hpp"
#include "cspace/layout.hpp"
#include "cspace/quadtree.hpp"
#include "cspace/refinement.hpp"
#include "cspace/spatialization.hpp"
#include "cspace/topicmodel.hpp"
#include "cspace/tsne.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace cspace {

/// Every tunable of a session. Unknown keys in from_json are rejected.
struct SessionConfig {
    CorpusOptions corpus;
    ConceptGenOptions conceptgen;
    GatherOptions gather;
    AbstractionParams abstraction;
    TsneParams tsne;
    TopicOptions topics;
    QueueOptions queue;
    ClassifyOptions classify;
    Viewport viewport;
    /// Applied to the concept vectors before the first projection.
    nlohmann::json edits = nlohmann::json::array();
    /// Learned weights from another session, applied before concept generation.
    std::optional<nlohmann::json> imported_weights;

    nlohmann::json to_json() const;
    /// Starts from the defaults and overrides the keys present in `j`.
    static SessionConfig from_json(const nlohmann::json& j);
    void validate() const;
};

/// Where a session's corpus and embeddings come from; paths are kept for persistence.
struct SessionSources {
    std::optional<std::filesystem::path> corpus_path;
    std::optional<std::filesystem::path> embeddings_path;
    std::vector<RawDocument> documents;
    /// Embedding file contents, used when no path is given.
    std::string embeddings_text;

    nlohmann::json to_json() const;
    static SessionSources from_json(const nlohmann::json& j);
};

/// One published generation. Never mutated after publication.
struct Snapshot {
    std::uint64_t generation = 0;
    ConceptHierarchy hierarchy;
    Projection2D canvas;
    QuadTree qt;
    WeightTable weights;
    TopicHierarchy topics;
    QualityReport quality;
    std::vector<Recommendation> queue;
    /// Set when the hierarchy changed after the projection or topic model was computed.
    bool projection_stale = false;
    bool topics_stale = false;
    std::string hierarchy_hash;
    std::string topic_hash;
};

enum class JobKind { NONE, TSNE, TOPICS };
std::string_view to_string(JobKind k);
/// "tsne" or "topics".
JobKind parse_job_kind(std::string_view name);

struct JobStatus {
    JobKind kind = JobKind::NONE;
    /// idle, running, done, failed or cancelled.
    std::string state = "idle";
    std::size_t processed = 0;
    std::size_t total = 0;
    std::string error;
    /// Generation published by the job; 0 until it finishes.
    std::uint64_t generation = 0;

    nlohmann::json to_json() const;
};

/// Output of the initial pipeline: concept generation, projection, hierarchy and topic model.
struct PipelineResult {
    std::vector<ConceptVector> concepts;
    ConceptHierarchy hierarchy;
    Projection2D canvas;
    WeightTable weights;
    TopicHierarchy topics;
};

/// Runs the whole pipeline once over an already loaded corpus and store.
PipelineResult run_pipeline(const Corpus& corpus, const EmbeddingStore& store, const SessionConfig& config);

/// Anchored projection of `words` with the concepts as anchors, rescaled into the viewport.
Projection2D project_words(const std::vector<std::string>& words, const std::vector<std::string>& concepts,
                           const EmbeddingStore& store, const TsneParams& params, const Viewport& viewport,
                           const TsneCallback& callback = {});

struct SearchHit {
    std::string word;
    std::string surface;
    double score = 0.0;
    std::optional<Vec2> position;
    std::optional<Role> role;
    /// Base words and words outside the hierarchy can become descriptors.
    bool can_add_as_descriptor = false;

    nlohmann::json to_json() const;
};

class Session {
public:
    Session(std::string id, SessionSources sources, SessionConfig config);
    ~Session();
    Session(const Session&) = delete;
    Session& operator=(const Session&) = delete;

    const std::string& id() const { return id_; }
    const SessionConfig& config() const { return config_; }
    const SessionSources& sources() const { return sources_; }
    const Corpus& corpus() const { return corpus_; }
    const EmbeddingStore& store() const { return store_; }
    const ConceptHierarchy& initial_hierarchy() const { return initial_; }

    std::shared_ptr<const Snapshot> snapshot() const;

    /// Applies, logs and publishes; returns the new snapshot.
    std::shared_ptr<const Snapshot> apply_action(const RefinementAction& action);
    std::shared_ptr<const Snapshot> accept_recommendation(std::size_t index);
    std::shared_ptr<const Snapshot> reject_recommendation(std::size_t index);

    int abstraction_level() const;
    /// Rebuilds the super-concept layer. Throws LevelOutOfRange.
    std::shared_ptr<const Snapshot> set_abstraction_level(int level);

    /// Throws JobAlreadyRunning.
    void start_job(JobKind kind);
    JobStatus job() const;
    /// Blocks until the current job, if any, has finished.
    void wait_for_job();
    void cancel_job();

    std::vector<LogEntry> action_log() const;

    std::vector<SearchHit> search(std::string_view query, std::size_t limit = 20) const;
    nlohmann::json xray(Vec2 point, double radius) const;

    nlohmann::json state(std::string_view view) const;
    nlohmann::json export_artifact(std::string_view kind) const;
    CanvasLayout layout(const Snapshot& s, std::string_view view) const;
    std::map<int, TopicCase> topic_cases(const Snapshot& s) const;

    /// Writes config, sources, hierarchies, projection and the action log into `dir`.
    void save(const std::filesystem::path& dir) const;
    /// Restores a saved session; the topic model is retrained from the saved hierarchy.
    static std::unique_ptr<Session> load(const std::filesystem::path& dir, std::string id = {});

private:
    struct Restore {
        ConceptHierarchy initial;
        ConceptHierarchy hierarchy;
        Projection2D canvas;
        std::vector<LogEntry> log;
        int level = 0;
    };
    Session(std::string id, SessionSources sources, SessionConfig config, const Restore& restore);

    void load_sources();
    RefinementEnv env(const Snapshot& s) const;
    /// Fills the derived fields and publishes as the next generation. Caller holds writer_.
    std::shared_ptr<const Snapshot> publish(std::shared_ptr<Snapshot> next);
    std::shared_ptr<Snapshot> copy_current() const;
    void run_job(JobKind kind, std::shared_ptr<const Snapshot> base);
    std::string label_of(const std::string& w) const;

    std::string id_;
    SessionSources sources_;
    SessionConfig config_;
    Corpus corpus_;
    EmbeddingStore store_;
    ConceptHierarchy initial_;

    mutable std::mutex snapshot_mutex_;
    std::shared_ptr<const Snapshot> current_;
    std::uint64_t generation_ = 0;

    mutable std::mutex writer_;
    std::vector<LogEntry> log_;
    std::set<std::string> suppressed_;

    mutable std::mutex job_mutex_;
    JobStatus job_;
    std::thread worker_;
    std::atomic<bool> cancel_{false};
};

struct CreateRequest {
    SessionSources sources;
    SessionConfig config;

    /// {corpus | documents, embeddings | vectors, config, seed}
    static CreateRequest from_json(const nlohmann::json& j);
};

class SessionManager {
public:
    std::shared_ptr<Session> create(SessionSources sources, SessionConfig config);
    std::shared_ptr<Session> load(const std::filesystem::path& dir);
    /// Throws UnknownSession.
    std::shared_ptr<Session> get(const std::string& id) const;
    bool erase(const std::string& id);
    std::vector<std::string> ids() const;

private:
    std::string next_id();

    mutable std::mutex mutex_;
    std::map<std::string, std::shared_ptr<Session>> sessions_;
    std::uint64_t counter_ = 0;
};

}  // namespace cspace

#endif
