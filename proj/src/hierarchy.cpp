#include "cspace/hierarchy.hpp"

#include "cspace/error.hpp"
#include "cspace/hash.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace cspace {

using json = nlohmann::json;

int effective_neighborhood(int level, int base, double growth) {
    if (level < kMinLevel || level > kMaxLevel) {
        throw Error(ErrorKind::LevelOutOfRange, "level " + std::to_string(level) + " outside [-2, 2]");
    }
    return static_cast<int>(std::lround(base * std::pow(growth, level)));
}

void AbstractionParams::validate() const {
    if (!(eps_similarity > 0.0 && eps_similarity <= 1.0)) {
        throw Error(ErrorKind::InvalidArgument, "eps_similarity must lie in (0, 1]");
    }
    if (eps_neighborhood < 1) throw Error(ErrorKind::InvalidArgument, "eps_neighborhood must be >= 1");
    if (!(super_factor > 0.0)) throw Error(ErrorKind::InvalidArgument, "super_factor must be positive");
    effective_neighborhood(level, eps_neighborhood);
}

int AbstractionParams::super_neighborhood() const {
    return static_cast<int>(std::lround(super_factor * neighborhood()));
}

namespace {

double mean_pairwise_cosine(const EmbeddingStore& store, const std::vector<std::string>& words) {
    if (words.size() < 2) return 1.0;
    double sum = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < words.size(); ++i) {
        for (std::size_t j = i + 1; j < words.size(); ++j) {
            sum += store.cosine(words[i], words[j]);
            ++pairs;
        }
    }
    return sum / static_cast<double>(pairs);
}

double score_of(const std::map<std::string, double>& scores, const std::string& w) {
    const auto it = scores.find(w);
    return it == scores.end() ? 0.0 : it->second;
}

// Higher score first, then lexicographic.
bool outranks(const std::map<std::string, double>& scores, const std::string& a, const std::string& b) {
    const double sa = score_of(scores, a), sb = score_of(scores, b);
    return sa > sb || (sa == sb && a < b);
}

void sort_descriptors(std::vector<Descriptor>& ds) {
    std::sort(ds.begin(), ds.end(), [](const Descriptor& a, const Descriptor& b) {
        return a.score > b.score || (a.score == b.score && a.word < b.word);
    });
}

}  // namespace

ClusterSet cluster_level(const std::vector<std::string>& candidates, const Projection2D& proj, const QuadTree& qt,
                         const EmbeddingStore& store, const AbstractionParams& params,
                         const std::map<std::string, double>& scores, const std::set<std::string>& excluded) {
    if (qt.source_fingerprint() != proj.fingerprint()) {
        throw Error(ErrorKind::StaleIndex, "quadtree was built from a different projection");
    }
    params.validate();
    const auto k = static_cast<std::size_t>(params.neighborhood());
    const std::set<std::string> cand(candidates.begin(), candidates.end());

    ClusterSet out;
    std::vector<Cluster> clusters;
    for (const auto& c : cand) {
        if (!proj.contains(c) || !store.contains(c)) {
            out.unclustered.push_back(c);
            continue;
        }
        const auto nn = qt.knn(proj.at(c), k, [&](const std::string& w) {
            return !cand.count(w) && !excluded.count(w) && store.contains(w);
        });
        const bool dense = nn.size() == k && std::all_of(nn.begin(), nn.end(), [&](const Neighbor& n) {
                               return store.cosine(c, n.word) >= params.eps_similarity;
                           });
        if (!dense) {
            out.unclustered.push_back(c);
            continue;
        }
        Cluster cl;
        cl.head = c;
        for (const auto& n : nn) cl.members.insert(n.word);
        clusters.push_back(std::move(cl));
    }
    std::sort(clusters.begin(), clusters.end(),
              [&](const Cluster& a, const Cluster& b) { return outranks(scores, a.head, b.head); });

    const double threshold = params.coherence_threshold();
    for (bool changed = true; changed;) {
        changed = false;
        for (std::size_t i = 0; i < clusters.size() && !changed; ++i) {
            for (std::size_t j = i + 1; j < clusters.size() && !changed; ++j) {
                auto& a = clusters[i];
                auto& b = clusters[j];
                std::vector<std::string> shared;
                std::set_intersection(a.members.begin(), a.members.end(), b.members.begin(), b.members.end(),
                                      std::back_inserter(shared));
                if (shared.empty()) continue;
                changed = true;
                std::set<std::string> all(a.members);
                all.insert(b.members.begin(), b.members.end());
                all.insert(a.head);
                all.insert(b.head);
                all.insert(a.absorbed.begin(), a.absorbed.end());
                all.insert(b.absorbed.begin(), b.absorbed.end());
                if (mean_pairwise_cosine(store, {all.begin(), all.end()}) >= threshold) {
                    a.absorbed.push_back(b.head);
                    a.absorbed.insert(a.absorbed.end(), b.absorbed.begin(), b.absorbed.end());
                    a.members.insert(b.members.begin(), b.members.end());
                    clusters.erase(clusters.begin() + static_cast<std::ptrdiff_t>(j));
                } else {
                    for (const auto& w : shared) {
                        const double sa = store.cosine(w, a.head);
                        const double sb = store.cosine(w, b.head);
                        if (sb > sa || (sb == sa && b.head < a.head)) {
                            a.members.erase(w);
                        } else {
                            b.members.erase(w);
                        }
                    }
                }
            }
        }
    }
    out.clusters = std::move(clusters);
    return out;
}

bool ConceptNode::has(std::string_view w) const {
    return std::any_of(descriptors.begin(), descriptors.end(), [&](const Descriptor& d) { return d.word == w; });
}

std::optional<std::string> ConceptHierarchy::parent_of(std::string_view w) const {
    for (const auto& [c, node] : concepts) {
        if (node.has(w)) return c;
    }
    return std::nullopt;
}

const SuperConcept* ConceptHierarchy::super_of(std::string_view concept_word) const {
    const auto it = concepts.find(concept_word);
    if (it == concepts.end()) return nullptr;
    for (const auto& s : super_concepts) {
        if (s.id == it->second.super_id) return &s;
    }
    return nullptr;
}

Level ConceptHierarchy::level_of(std::string_view w) const {
    if (is_concept(w)) {
        const auto* s = super_of(w);
        return s && s->concepts.size() > 1 && s->label == w ? Level::SUPER_CONCEPT : Level::CONCEPT;
    }
    if (is_descriptor(w)) return Level::DESCRIPTOR;
    if (demoted.find(w) != demoted.end()) return Level::DEMOTED;
    return Level::BASE;
}

std::set<std::string> ConceptHierarchy::words() const {
    std::set<std::string> out(base_words.begin(), base_words.end());
    for (const auto& [c, node] : concepts) {
        out.insert(c);
        for (const auto& d : node.descriptors) out.insert(d.word);
    }
    return out;
}

std::size_t ConceptHierarchy::word_count() const {
    std::size_t n = base_words.size() + concepts.size();
    for (const auto& [c, node] : concepts) n += node.descriptors.size();
    return n;
}

std::map<std::string, std::string> ConceptHierarchy::owners() const {
    std::map<std::string, std::string> out;
    for (const auto& [c, node] : concepts) {
        for (const auto& d : node.descriptors) out.emplace(d.word, c);
    }
    return out;
}

std::vector<std::string> ConceptHierarchy::violations() const {
    std::vector<std::string> v;
    std::map<std::string, int> seen;
    for (const auto& [c, node] : concepts) {
        if (node.word != c) v.push_back("concept key " + c + " holds " + node.word);
        for (const auto& d : node.descriptors) {
            if (++seen[d.word] > 1) v.push_back("descriptor " + d.word + " has several parents");
            if (is_concept(d.word)) v.push_back(d.word + " is both concept and descriptor");
            if (is_base(d.word)) v.push_back(d.word + " is both descriptor and base word");
        }
        if (is_base(c)) v.push_back(c + " is both concept and base word");
        int memberships = 0;
        for (const auto& s : super_concepts) {
            memberships += static_cast<int>(std::count(s.concepts.begin(), s.concepts.end(), c));
        }
        if (memberships != 1) v.push_back("concept " + c + " is in " + std::to_string(memberships) + " super concepts");
        const auto* s = super_of(c);
        if (!s || std::find(s->concepts.begin(), s->concepts.end(), c) == s->concepts.end()) {
            v.push_back("concept " + c + " has no matching super concept");
        }
    }
    std::set<int> ids;
    for (const auto& s : super_concepts) {
        if (!ids.insert(s.id).second) v.push_back("duplicate super concept id " + std::to_string(s.id));
        if (s.concepts.empty()) v.push_back("empty super concept " + s.label);
        if (std::find(s.concepts.begin(), s.concepts.end(), s.label) == s.concepts.end()) {
            v.push_back("super concept label " + s.label + " is not a member");
        }
        for (const auto& c : s.concepts) {
            if (!is_concept(c)) v.push_back("super concept " + s.label + " lists unknown concept " + c);
        }
    }
    for (const auto& d : demoted) {
        if (!is_base(d)) v.push_back("demoted word " + d + " is not a base word");
    }
    if (word_count() != words().size()) v.push_back("a word holds more than one role");
    return v;
}

ConceptHierarchy build_hierarchy(const std::vector<ConceptVector>& concepts, const Projection2D& proj,
                                 const QuadTree& qt, const EmbeddingStore& store, const AbstractionParams& params,
                                 const std::map<std::string, double>& scores, const std::set<std::string>& demoted) {
    params.validate();
    auto usable = [&](const std::string& w) { return proj.contains(w) && store.contains(w) && !demoted.count(w); };

    std::vector<std::string> heads;
    for (const auto& v : concepts) {
        if (usable(v.concept_word) && std::find(heads.begin(), heads.end(), v.concept_word) == heads.end()) {
            heads.push_back(v.concept_word);
        }
    }
    if (heads.empty()) throw Error(ErrorKind::NoConcepts, "no concept word has coordinates");
    const std::set<std::string> head_set(heads.begin(), heads.end());

    // First occurrence of each prior descriptor, per hosting concept.
    std::map<std::string, std::map<std::string, Descriptor>> prior;
    std::map<std::string, std::string> user_owner;
    for (const auto& v : concepts) {
        for (const auto& d : v.descriptors) {
            if (!usable(d.word) || head_set.count(d.word)) continue;
            prior[d.word].emplace(v.concept_word, d);
            if (d.provenance == Provenance::USER_DEFINED && head_set.count(v.concept_word)) {
                user_owner.emplace(d.word, v.concept_word);
            }
        }
    }
    auto descriptor_for = [&](const std::string& w, const std::string& owner) {
        const auto it = prior.find(w);
        if (it == prior.end()) return Descriptor{w, score_of(scores, w), Provenance::TOPIC_DESCRIPTOR};
        const auto own = it->second.find(owner);
        return own != it->second.end() ? own->second : it->second.begin()->second;
    };

    ConceptHierarchy h;
    h.level = params.level;
    std::set<std::string> assigned;
    std::set<std::string> pinned(demoted.begin(), demoted.end());
    for (const auto& [w, c] : user_owner) pinned.insert(w);

    const auto cs = cluster_level(heads, proj, qt, store, params, scores, pinned);
    std::map<std::string, std::string> survivor;
    for (const auto& h2 : heads) survivor[h2] = h2;
    for (const auto& cl : cs.clusters) {
        for (const auto& a : cl.absorbed) survivor[a] = cl.head;
    }
    for (const auto& head : heads) {
        if (survivor[head] != head) continue;
        ConceptNode node;
        node.word = head;
        node.score = score_of(scores, head);
        h.concepts.emplace(head, std::move(node));
    }
    for (const auto& cl : cs.clusters) {
        auto& node = h.concepts.at(cl.head);
        for (const auto& a : cl.absorbed) {
            node.descriptors.push_back({a, score_of(scores, a), Provenance::CONCEPT_DESCRIPTOR});
            assigned.insert(a);
        }
        for (const auto& m : cl.members) {
            node.descriptors.push_back(descriptor_for(m, cl.head));
            assigned.insert(m);
        }
    }
    for (const auto& [w, c] : user_owner) {
        h.concepts.at(survivor[c]).descriptors.push_back(descriptor_for(w, c));
        assigned.insert(w);
    }
    for (const auto& [w, hosts] : prior) {
        if (assigned.count(w)) continue;
        const std::string* best = nullptr;
        double best_sim = 0.0;
        for (const auto& [c, node] : h.concepts) {
            const double s = store.cosine(w, c);
            if (!best || s > best_sim) {
                best = &c;
                best_sim = s;
            }
        }
        if (!best || best_sim < params.eps_similarity) continue;
        h.concepts.at(*best).descriptors.push_back(descriptor_for(w, *best));
        assigned.insert(w);
    }
    for (auto& [c, node] : h.concepts) sort_descriptors(node.descriptors);
    for (const auto& [w, pos] : proj.coords) {
        if (!h.concepts.count(w) && !assigned.count(w)) h.base_words.insert(w);
    }
    for (const auto& d : demoted) {
        if (h.base_words.count(d)) h.demoted.insert(d);
    }
    return rebuild_super_concepts(std::move(h), proj, store, params);
}

ConceptHierarchy rebuild_super_concepts(ConceptHierarchy h, const Projection2D& proj, const EmbeddingStore& store,
                                        const AbstractionParams& params) {
    params.validate();
    h.level = params.level;
    std::vector<std::string> names;
    std::map<std::string, std::size_t> index;
    for (const auto& [c, node] : h.concepts) {
        index[c] = names.size();
        names.push_back(c);
    }
    std::vector<std::vector<double>> centroids;
    for (const auto& c : names) {
        std::vector<std::string> members{c};
        for (const auto& d : h.concepts.at(c).descriptors) {
            if (store.contains(d.word)) members.push_back(d.word);
        }
        centroids.push_back(centroid(store, members));
    }

    std::vector<std::size_t> parent(names.size());
    std::iota(parent.begin(), parent.end(), 0);
    const auto find = [&](std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };

    Projection2D sub;
    for (const auto& c : names) {
        if (proj.contains(c)) sub.coords[c] = proj.at(c);
    }
    if (!sub.empty()) {
        const QuadTree qt(sub);
        const auto k = static_cast<std::size_t>(params.super_neighborhood());
        for (const auto& [c, pos] : sub.coords) {
            for (const auto& n : qt.knn(pos, k, [&](const std::string& w) { return w != c; })) {
                const std::size_t a = index.at(c), b = index.at(n.word);
                if (cosine(centroids[a], centroids[b]) >= params.eps_similarity) parent[find(a)] = find(b);
            }
        }
    }

    std::map<std::size_t, std::vector<std::string>> groups;
    for (std::size_t i = 0; i < names.size(); ++i) groups[find(i)].push_back(names[i]);
    std::vector<SuperConcept> supers;
    for (auto& [root, members] : groups) {
        SuperConcept s;
        s.concepts = members;
        s.label = *std::min_element(members.begin(), members.end(), [&](const std::string& a, const std::string& b) {
            const double sa = h.concepts.at(a).score, sb = h.concepts.at(b).score;
            return sa > sb || (sa == sb && a < b);
        });
        supers.push_back(std::move(s));
    }
    std::sort(supers.begin(), supers.end(), [](const SuperConcept& a, const SuperConcept& b) { return a.label < b.label; });
    for (std::size_t i = 0; i < supers.size(); ++i) {
        supers[i].id = static_cast<int>(i);
        for (const auto& c : supers[i].concepts) h.concepts.at(c).super_id = supers[i].id;
    }
    h.super_concepts = std::move(supers);
    return h;
}

std::vector<ConceptVector> to_concept_vectors(const ConceptHierarchy& h) {
    std::vector<ConceptVector> out;
    for (const auto& [c, node] : h.concepts) out.push_back({c, node.descriptors});
    return out;
}

json hierarchy_to_json(const ConceptHierarchy& h) {
    json supers = json::array();
    for (const auto& s : h.super_concepts) {
        json cs = json::array();
        for (const auto& c : s.concepts) {
            const auto& node = h.concepts.at(c);
            json ds = json::array();
            for (const auto& d : node.descriptors) {
                ds.push_back({{"word", d.word}, {"provenance", std::string(to_string(d.provenance))}, {"score", d.score}});
            }
            cs.push_back({{"word", c}, {"score", node.score}, {"descriptors", std::move(ds)}});
        }
        supers.push_back({{"id", s.id}, {"label", s.label}, {"concepts", std::move(cs)}});
    }
    return {{"level", h.level},
            {"super_concepts", std::move(supers)},
            {"base_words", json(std::vector<std::string>(h.base_words.begin(), h.base_words.end()))},
            {"demoted", json(std::vector<std::string>(h.demoted.begin(), h.demoted.end()))}};
}

ConceptHierarchy hierarchy_from_json(const json& j) {
    ConceptHierarchy h;
    try {
        h.level = j.value("level", 0);
        int next_id = 0;
        for (const auto& s : j.at("super_concepts")) {
            SuperConcept sc;
            sc.id = s.value("id", next_id);
            next_id = std::max(next_id, sc.id) + 1;
            for (const auto& c : s.at("concepts")) {
                ConceptNode node;
                node.word = c.at("word").get<std::string>();
                node.score = c.value("score", 0.0);
                node.super_id = sc.id;
                for (const auto& d : c.value("descriptors", json::array())) {
                    node.descriptors.push_back({d.at("word").get<std::string>(), d.value("score", 0.0),
                                                parse_provenance(d.value("provenance", "CONCEPT_DESCRIPTOR"))});
                }
                sc.concepts.push_back(node.word);
                h.concepts[node.word] = std::move(node);
            }
            sc.label = s.value("label", sc.concepts.empty() ? std::string() : sc.concepts.front());
            h.super_concepts.push_back(std::move(sc));
        }
        for (const auto& w : j.value("base_words", json::array())) h.base_words.insert(w.get<std::string>());
        for (const auto& w : j.value("demoted", json::array())) h.demoted.insert(w.get<std::string>());
    } catch (const json::exception& e) {
        throw Error(ErrorKind::InvalidArgument, std::string("malformed hierarchy JSON: ") + e.what());
    }
    return h;
}

std::string hierarchy_hash(const ConceptHierarchy& h) { return to_hex(fnv1a(hierarchy_to_json(h).dump())); }

}  // namespace cspace
