#ifndef CSPACE_REFINEMENT_HPP
#define CSPACE_REFINEMENT_HPP

#include "cspace/corpus.hpp"
#include "cspace/embeddings.hpp"
#include "cspace/geometry.hpp"
#include "cspace/hierarchy.hpp"
#include "cspace/topicmodel.hpp"

#include <nlohmann/json_fwd.hpp>

#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace cspace {

enum class ActionKind {
    PROMOTE,
    DEMOTE,
    REASSIGN_CHILDREN,
    REASSIGN_PARENT,
    SPLIT,
    MERGE,
    SWAP,
    DELETE,
    ADD_WORD,
    CREATE_CONCEPT_FROM_SELECTION,
};
std::string_view to_string(ActionKind k);
ActionKind parse_action_kind(std::string_view name);

/// Super-concept targets are written "super:<label>".
enum class Role { SUPER_CONCEPT, CONCEPT, DESCRIPTOR, BASE };
std::string_view to_string(Role r);
std::optional<Role> role_of(const ConceptHierarchy& h, std::string_view target);
bool permitted(Role role, ActionKind kind);
std::vector<ActionKind> permitted_actions(Role role);

/**
 * Target layouts:
 *  - SPLIT: [concept, new head, members moving to the new head...]
 *  - MERGE: [concept, concept, ...]; the survivor is the highest-scoring one
 *  - REASSIGN_CHILDREN: [concept, children...]; no children listed moves them all
 *  - SWAP: [descriptor] swaps with its parent, [concept] swaps with `destination`
 *  - CREATE_CONCEPT_FROM_SELECTION: [clicked word, co-selected words...]
 * REASSIGN_PARENT, REASSIGN_CHILDREN and ADD_WORD need `destination`; PROMOTE
 * of a base word and DEMOTE of a concept fall back to the most similar concept.
 */
struct RefinementAction {
    ActionKind kind = ActionKind::PROMOTE;
    std::vector<std::string> targets;
    std::optional<std::string> destination;

    nlohmann::json to_json() const;
    static RefinementAction from_json(const nlohmann::json& j);
    friend bool operator==(const RefinementAction&, const RefinementAction&) = default;
};

struct QueueOptions {
    /// Top corpus words by tf-idf considered for recommendations.
    std::size_t candidate_pool = 50;
    std::size_t max_items = 50;
    double reassign_gap = 0.2;
    double swap_margin = 0.1;
    double merge_similarity = 0.6;
    double weak_similarity = 0.2;
    double weight_similarity = 0.4;
    double weight_distance = 0.4;
    double weight_conflict = 0.2;
    double quartile_penalty = 0.1;
    /// Padding around the words a recommendation touches.
    double focus_padding = 5.0;
};

/// Shared read-only inputs. All pointers must outlive the calls.
struct RefinementEnv {
    const EmbeddingStore* store = nullptr;
    const Projection2D* canvas = nullptr;
    const CorpusStats* stats = nullptr;
    AbstractionParams params;
    Viewport viewport;
    QueueOptions queue;

    /// Cosine, 0 when either word has no vector.
    double similarity(const std::string& a, const std::string& b) const;
    double corpus_score(const std::string& w) const;
};

/**
 * Applies one action and rebuilds the super-concept layer. Throws
 * ForbiddenAction when the primary target's role does not allow the kind,
 * UnknownTarget for words or destinations outside the hierarchy, LastConcept
 * when the only concept would disappear, and InvalidArgument for malformed
 * target lists. The input hierarchy is never modified.
 */
ConceptHierarchy apply(const RefinementAction& action, const ConceptHierarchy& h, const RefinementEnv& env);

/// Root-mean-square standard deviation of 2D clusters; 0 without scatter.
double rmsstd(const std::vector<std::vector<Vec2>>& clusters);
/// S_Dbw validity index (scattering plus inter-cluster density) of 2D clusters.
double s_dbw(const std::vector<std::vector<Vec2>>& clusters);

struct ClusterQuality {
    std::string concept_word;
    std::size_t size = 0;
    Vec2 centroid;
    double density = 0.0;
    double intra_variance = 0.0;
    double inter_variance = 0.0;
};

struct WordMetrics {
    std::string word;
    Level level = Level::BASE;
    std::optional<std::string> parent;
    int neighborhood_count = 0;
    std::optional<double> sim_to_parent;
    std::optional<double> sim_to_children_mean;
    std::optional<double> spatial_dist_to_parent;
    /// Most similar concept other than the parent (or the word itself).
    std::optional<std::string> best_alternative;
    double best_alternative_sim = 0.0;
    /// Mean cosine to the other members of the word's concept cluster.
    std::optional<double> member_mean_sim;
    bool color_conflict = false;
    /// Similar base words among the 2 * neighbourhood nearest.
    std::vector<std::string> unowned_similar;
};

struct QualityReport {
    std::vector<ClusterQuality> clusters;
    double rmsstd = 0.0;
    double s_dbw = 0.0;
    std::map<std::string, WordMetrics> words;
    std::optional<QualityMetrics> topic_quality;

    nlohmann::json to_json() const;
};

/// Clusters are concepts with their descriptors, in canvas space.
QualityReport monitor(const ConceptHierarchy& h, const RefinementEnv& env, const TopicHierarchy* tm = nullptr,
                      const Corpus* corpus = nullptr);

struct Recommendation {
    std::string word;
    RefinementAction action;
    double badness = 0.0;
    double impact = 0.0;
    std::string rationale;
    Rect focus;

    nlohmann::json to_json() const;
};

/// word|KIND, the identity used for suppression.
std::string suppression_key(const Recommendation& r);

/**
 * Decision tree over the candidate pool: better parent, more central
 * descriptor, small similar neighbour concept, dense unowned neighbourhood,
 * weak parent link. Sorted by impact = badness * tf-idf, then word.
 */
std::vector<Recommendation> build_queue(const QualityReport& report, const ConceptHierarchy& h,
                                        const RefinementEnv& env, const std::set<std::string>& suppressed = {});

enum class Verdict { ACCEPT, REJECT, ALTERNATIVE };
Verdict parse_verdict(std::string_view name);

struct TourState {
    std::vector<Recommendation> queue;
    std::set<std::string> suppressed;
};

struct TourStep {
    std::optional<RefinementAction> applied;
    std::optional<Recommendation> next;
    bool changed = false;
};

TourState start_tour(const ConceptHierarchy& h, const RefinementEnv& env);

/**
 * ACCEPT applies the head of the queue and rebuilds it; REJECT suppresses it
 * for the session; ALTERNATIVE suppresses it and applies `alternative`.
 * Throws EmptyQueue when nothing is queued.
 */
TourStep step_tour(TourState& state, ConceptHierarchy& h, Verdict verdict, const RefinementEnv& env,
                   const std::optional<RefinementAction>& alternative = std::nullopt);

struct LogEntry {
    std::string timestamp;
    RefinementAction action;
    std::string pre_hash;
    std::string post_hash;

    nlohmann::json to_json() const;
    static LogEntry from_json(const nlohmann::json& j);
};

/// UTC, ISO 8601 with milliseconds.
std::string now_timestamp();
void write_log_line(std::ostream& out, const LogEntry& e);
/// Throws MalformedRecord with the line number.
std::vector<LogEntry> read_log(std::istream& in);

/// Throws ReplayDivergence when a hash along the way does not match.
ConceptHierarchy replay(const ConceptHierarchy& initial, const std::vector<LogEntry>& log, const RefinementEnv& env);

}  // namespace cspace

#endif
