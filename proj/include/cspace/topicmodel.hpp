#ifndef CSPACE_TOPICMODEL_HPP
#define CSPACE_TOPICMODEL_HPP

#include "cspace/corpus.hpp"
#include "cspace/embeddings.hpp"
#include "cspace/geometry.hpp"
#include "cspace/hierarchy.hpp"

#include <nlohmann/json_fwd.hpp>

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

/**
 * @file topicmodel.hpp
 * @brief Incremental two-level topic model over weighted keyword vectors.
 *
 * Documents are visited in corpus order. Each one joins the topic whose
 * centroid is most similar to its vector when that similarity reaches tau,
 * and founds a new topic otherwise. Centroids are the sums of member vectors.
 */

namespace cspace {

using KeywordVector = std::map<std::string, double>;

double sparse_dot(const KeywordVector& a, const KeywordVector& b);
double sparse_cosine(const KeywordVector& a, const KeywordVector& b);

struct TopicOptions {
    double tau = 0.6;
    /// Keywords per document vector.
    std::size_t doc_keywords = 15;
    /// Keywords listed per topic.
    std::size_t top_keywords = 15;

    void validate() const;
};

/// The document's top keywords by score, each scaled by its weight multiplier.
/// Documents without positive scores fall back to raw term counts.
KeywordVector doc_vector(const Document& doc, const WeightTable& weights, std::size_t n = 15);

struct Topic {
    int id = 0;
    std::vector<std::string> docs;
    KeywordVector centroid;
    std::vector<std::pair<std::string, double>> top_keywords;

    friend bool operator==(const Topic&, const Topic&) = default;
};

struct TopicHierarchy {
    std::vector<Topic> topics;
    std::map<std::string, int> assignment;
    std::map<std::string, KeywordVector> doc_vectors;
    /// Best minus second-best similarity against the final centroids.
    std::map<std::string, double> certainty;

    bool trained() const { return !topics.empty(); }
    const Topic& topic(int id) const;
    /// Union of the member keyword vectors' words.
    std::set<std::string> keywords() const;

    friend bool operator==(const TopicHierarchy&, const TopicHierarchy&) = default;
};

struct TrainProgress {
    std::size_t processed = 0;
    std::size_t total = 0;
};
/// Return false to cancel; train then throws Error(Cancelled).
using TrainCallback = std::function<bool(const TrainProgress&)>;

/// Documents without tokens are skipped.
TopicHierarchy train(const Corpus& corpus, const WeightTable& weights, const TopicOptions& options = {},
                     const TrainCallback& callback = {});

/// Level multipliers from the hierarchy: every hierarchy word takes the ladder
/// value of its level; words outside the hierarchy keep their multiplier.
WeightTable reweight_from_concepts(const ConceptHierarchy& h, WeightTable weights);

/// Weighted centroid of the placed keywords; nullopt when none are placed.
std::optional<Vec2> owner_position(const KeywordVector& v, const Projection2D& canvas);

struct Spike {
    std::string concept_word;
    Vec2 concept_position;
    double similarity = 0.0;
    /// Owner to concept.
    double distance = 0.0;
    /// similarity * distance
    double endpoint_distance = 0.0;
    Vec2 endpoint;
    /// Unit vector towards the concept; zero when the owner sits on it.
    Vec2 direction;
    double opacity = 0.0;
    std::string color;
};

/// endpoint = owner + sim * (concept - owner); opacity = sim.
Spike make_spike(Vec2 owner, Vec2 concept_position, double similarity);

struct TopicGlyph {
    std::string owner;
    Vec2 position;
    std::vector<Spike> spikes;
};

/**
 * One spike per placed concept. The similarity is max(0, cosine) between the
 * concept's member centroid and the embedding centroid of the owner's
 * keywords weighted by the keyword vector. Colours come from `colors` when given.
 */
TopicGlyph glyph(const std::string& owner, const KeywordVector& v, Vec2 position, const ConceptHierarchy& h,
                 const Projection2D& canvas, const EmbeddingStore& store,
                 const std::map<std::string, std::string>& colors = {});

enum class TopicCase { SINGLE_CONCEPT, UNREPRESENTED, MULTI_CONCEPT, CONCEPT_INCOHERENT };
std::string_view to_string(TopicCase c);

struct ClassifyOptions {
    double sigma_related = 0.5;
    /// Fraction of the viewport diagonal.
    double rho_fraction = 0.25;
};

TopicCase classify(const TopicGlyph& g, const Viewport& viewport, const ClassifyOptions& options = {});

struct QualityMetrics {
    double coherence = 0.0;
    double separation = 0.0;
    double distinctiveness = 0.0;
    double pmi = 0.0;
    double certainty = 0.0;
    double branching_factor = 0.0;
    double compactness = 0.0;
    double topic_size = 0.0;

    nlohmann::json to_json() const;
};

/// Throws UntrainedModel.
QualityMetrics quality_metrics(const TopicHierarchy& tm, const Corpus& corpus, const EmbeddingStore& store);

/// {topics: [{id, top_keywords: [{word, weight}], docs: [id], case}]}; case is omitted when unknown.
nlohmann::json topics_to_json(const TopicHierarchy& tm, const std::map<int, TopicCase>& cases = {});
std::string topic_hash(const TopicHierarchy& tm);

}  // namespace cspace

#endif
