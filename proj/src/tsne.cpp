#include "cspace/tsne.hpp"

#include "cspace/error.hpp"

#include <algorithm>
#include <array>
#include <cfloat>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>

namespace cspace {

void TsneParams::validate() const {
    if (!(perplexity > 0.0)) throw Error(ErrorKind::InvalidArgument, "perplexity must be positive");
    if (!(theta >= 0.0 && theta <= 1.0)) throw Error(ErrorKind::InvalidArgument, "theta must lie in [0, 1]");
    if (iterations < 1) throw Error(ErrorKind::InvalidArgument, "iterations must be >= 1");
    if (!(learning_rate > 0.0)) throw Error(ErrorKind::InvalidArgument, "learning rate must be positive");
}

double TsneResult::kl_at(int iteration) const {
    for (const auto& [it, kl] : kl_trace) {
        if (it == iteration) return kl;
    }
    throw Error(ErrorKind::InvalidArgument, "no KL recorded at iteration " + std::to_string(iteration));
}

PortableGaussian::PortableGaussian(std::uint64_t seed) : rng_(seed) {}

double PortableGaussian::uniform() {
    // (0, 1]
    return (static_cast<double>(rng_() >> 11) + 1.0) * 0x1.0p-53;
}

double PortableGaussian::operator()() {
    if (spare_) {
        const double s = *spare_;
        spare_.reset();
        return s;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double t = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(t);
    return r * std::cos(t);
}

namespace {

struct SparseRow {
    std::vector<std::size_t> cols;
    std::vector<double> vals;
};

// Calibrates one row of conditional affinities to the target entropy.
void calibrate_row(std::span<const double> dist2, std::size_t self, double log_perp, std::span<double> out) {
    double dmin = std::numeric_limits<double>::infinity();
    for (std::size_t m = 0; m < dist2.size(); ++m) {
        if (m != self) dmin = std::min(dmin, dist2[m]);
    }
    double beta = 1.0;
    double min_beta = -DBL_MAX;
    double max_beta = DBL_MAX;
    const double tol = 1e-5;
    for (int iter = 0; iter < 200; ++iter) {
        double sum = 0.0;
        double h = 0.0;
        for (std::size_t m = 0; m < dist2.size(); ++m) {
            if (m == self) {
                out[m] = 0.0;
                continue;
            }
            const double shifted = dist2[m] - dmin;
            out[m] = std::exp(-beta * shifted);
            sum += out[m];
            h += beta * shifted * out[m];
        }
        h = h / sum + std::log(sum);
        const double diff = h - log_perp;
        if (std::abs(diff) < tol) break;
        if (diff > 0) {
            min_beta = beta;
            beta = max_beta == DBL_MAX ? beta * 2.0 : (beta + max_beta) / 2.0;
        } else {
            max_beta = beta;
            beta = min_beta == -DBL_MAX ? beta / 2.0 : (beta + min_beta) / 2.0;
        }
    }
    double sum = 0.0;
    for (const double v : out) sum += v;
    for (auto& v : out) v /= sum;
}

double squared_distance(std::span<const double> data, std::size_t dim, std::size_t i, std::size_t j) {
    double s = 0.0;
    for (std::size_t k = 0; k < dim; ++k) {
        const double d = data[i * dim + k] - data[j * dim + k];
        s += d * d;
    }
    return s;
}

std::vector<double> exact_affinities(std::span<const double> data, std::size_t n, std::size_t dim, double perplexity) {
    std::vector<double> p(n * n, 0.0);
    std::vector<double> d2(n);
    const double log_perp = std::log(perplexity);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) d2[j] = squared_distance(data, dim, i, j);
        calibrate_row(d2, i, log_perp, {p.data() + i * n, n});
    }
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double s = p[i * n + j] + p[j * n + i];
            p[i * n + j] = p[j * n + i] = s;
            total += 2.0 * s;
        }
    }
    for (auto& v : p) v /= total;
    return p;
}

std::vector<SparseRow> sparse_affinities(std::span<const double> data, std::size_t n, std::size_t dim, double perplexity) {
    const std::size_t k = std::min(n - 1, static_cast<std::size_t>(3.0 * perplexity));
    const double log_perp = std::log(perplexity);
    std::vector<std::map<std::size_t, double>> sym(n);
    std::vector<std::pair<double, std::size_t>> cand(n);
    std::vector<double> d2(k + 1);
    std::vector<double> row(k + 1);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) cand[j] = {j == i ? -1.0 : squared_distance(data, dim, i, j), j};
        std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k + 1), cand.end());
        // cand[0] is the point itself.
        for (std::size_t m = 0; m <= k; ++m) d2[m] = std::max(0.0, cand[m].first);
        calibrate_row(d2, 0, log_perp, row);
        for (std::size_t m = 1; m <= k; ++m) {
            sym[i][cand[m].second] += row[m];
            sym[cand[m].second][i] += row[m];
        }
    }
    double total = 0.0;
    for (const auto& r : sym) {
        for (const auto& [j, v] : r) total += v;
    }
    std::vector<SparseRow> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (const auto& [j, v] : sym[i]) {
            out[i].cols.push_back(j);
            out[i].vals.push_back(v / total);
        }
    }
    return out;
}

// Barnes-Hut quadtree over the embedding.
class SpaceTree {
public:
    SpaceTree(std::span<const double> y, std::size_t n) : y_(y) {
        double minx = std::numeric_limits<double>::infinity(), miny = minx;
        double maxx = -minx, maxy = -minx;
        for (std::size_t i = 0; i < n; ++i) {
            minx = std::min(minx, y[2 * i]);
            maxx = std::max(maxx, y[2 * i]);
            miny = std::min(miny, y[2 * i + 1]);
            maxy = std::max(maxy, y[2 * i + 1]);
        }
        const double half = std::max({maxx - minx, maxy - miny, 1e-12}) / 2.0 + 1e-5;
        nodes_.reserve(4 * n + 1);
        nodes_.push_back(make_node((minx + maxx) / 2.0, (miny + maxy) / 2.0, half));
        for (std::size_t i = 0; i < n; ++i) insert(0, i, 0);
    }

    void non_edge_forces(std::size_t i, double theta, double& fx, double& fy, double& sum_q) const {
        visit(0, i, theta * theta, fx, fy, sum_q);
    }

private:
    struct Node {
        double cx = 0.0, cy = 0.0, half = 0.0;
        double comx = 0.0, comy = 0.0;
        std::size_t count = 0;
        std::array<int, 4> child{-1, -1, -1, -1};
        std::vector<std::size_t> points;
        bool leaf = true;
    };

    static Node make_node(double cx, double cy, double half) {
        Node nd;
        nd.cx = cx;
        nd.cy = cy;
        nd.half = half;
        return nd;
    }

    int quadrant(const Node& nd, double x, double y) const { return (x > nd.cx ? 1 : 0) + (y > nd.cy ? 2 : 0); }

    void insert(std::size_t node, std::size_t i, int depth) {
        const double x = y_[2 * i], yy = y_[2 * i + 1];
        {
            Node& nd = nodes_[node];
            nd.comx = (nd.comx * static_cast<double>(nd.count) + x) / static_cast<double>(nd.count + 1);
            nd.comy = (nd.comy * static_cast<double>(nd.count) + yy) / static_cast<double>(nd.count + 1);
            ++nd.count;
            if (nd.leaf) {
                const bool duplicate = !nd.points.empty() && y_[2 * nd.points[0]] == x && y_[2 * nd.points[0] + 1] == yy;
                if (nd.points.empty() || duplicate || depth >= 60) {
                    nd.points.push_back(i);
                    return;
                }
            }
        }
        if (nodes_[node].leaf) {
            nodes_[node].leaf = false;
            for (int q = 0; q < 4; ++q) {
                const Node& nd = nodes_[node];
                const double h = nd.half / 2.0;
                Node c = make_node(nd.cx + ((q & 1) ? h : -h), nd.cy + ((q & 2) ? h : -h), h);
                nodes_.push_back(std::move(c));
                nodes_[node].child[q] = static_cast<int>(nodes_.size() - 1);
            }
            auto moved = std::move(nodes_[node].points);
            nodes_[node].points.clear();
            for (const std::size_t p : moved) {
                const int q = quadrant(nodes_[node], y_[2 * p], y_[2 * p + 1]);
                insert(static_cast<std::size_t>(nodes_[node].child[q]), p, depth + 1);
            }
        }
        const int q = quadrant(nodes_[node], x, yy);
        insert(static_cast<std::size_t>(nodes_[node].child[q]), i, depth + 1);
    }

    void visit(std::size_t node, std::size_t i, double theta2, double& fx, double& fy, double& sum_q) const {
        const Node& nd = nodes_[node];
        if (nd.count == 0) return;
        if (nd.leaf && nd.points.size() == 1 && nd.points[0] == i) return;
        const double dx = y_[2 * i] - nd.comx;
        const double dy = y_[2 * i + 1] - nd.comy;
        const double d2 = dx * dx + dy * dy;
        const double width = 2.0 * nd.half;
        if (nd.leaf || width * width < theta2 * d2) {
            double count = static_cast<double>(nd.count);
            if (nd.leaf && std::find(nd.points.begin(), nd.points.end(), i) != nd.points.end()) count -= 1.0;
            const double q = 1.0 / (1.0 + d2);
            const double mult = count * q;
            sum_q += mult;
            fx += mult * q * dx;
            fy += mult * q * dy;
            return;
        }
        for (const int c : nd.child) visit(static_cast<std::size_t>(c), i, theta2, fx, fy, sum_q);
    }

    std::span<const double> y_;
    std::vector<Node> nodes_;
};

double kl_exact(const std::vector<double>& p, const std::vector<double>& y, std::size_t n) {
    double z = 0.0;
    std::vector<double> q(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double dx = y[2 * i] - y[2 * j], dy = y[2 * i + 1] - y[2 * j + 1];
            const double v = 1.0 / (1.0 + dx * dx + dy * dy);
            q[i * n + j] = q[j * n + i] = v;
            z += 2.0 * v;
        }
    }
    double kl = 0.0;
    for (std::size_t k = 0; k < n * n; ++k) {
        if (p[k] > 0.0) kl += p[k] * std::log((p[k] + FLT_MIN) / (q[k] / z + FLT_MIN));
    }
    return kl;
}

double kl_sparse(const std::vector<SparseRow>& p, const std::vector<double>& y, std::size_t n) {
    double z = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double dx = y[2 * i] - y[2 * j], dy = y[2 * i + 1] - y[2 * j + 1];
            z += 2.0 / (1.0 + dx * dx + dy * dy);
        }
    }
    double kl = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t m = 0; m < p[i].cols.size(); ++m) {
            const std::size_t j = p[i].cols[m];
            const double dx = y[2 * i] - y[2 * j], dy = y[2 * i + 1] - y[2 * j + 1];
            const double q = 1.0 / (1.0 + dx * dx + dy * dy) / z;
            kl += p[i].vals[m] * std::log((p[i].vals[m] + FLT_MIN) / (q + FLT_MIN));
        }
    }
    return kl;
}

}  // namespace

TsneResult run_tsne(std::span<const double> data, std::size_t n, std::size_t dim, const TsneParams& params,
                    const std::vector<std::optional<std::pair<double, double>>>& fixed, std::vector<double> init,
                    const TsneCallback& callback) {
    params.validate();
    if (data.size() != n * dim) throw Error(ErrorKind::InvalidArgument, "data size does not match n x dim");
    if (!fixed.empty() && fixed.size() != n) throw Error(ErrorKind::InvalidArgument, "anchor list size mismatch");
    if (!init.empty() && init.size() != 2 * n) throw Error(ErrorKind::InvalidArgument, "init size mismatch");

    TsneResult result;
    bool any_fixed = false;
    for (const auto& f : fixed) any_fixed = any_fixed || f.has_value();

    if (init.empty()) {
        PortableGaussian gauss(params.seed);
        init.resize(2 * n);
        for (auto& v : init) v = gauss() * 1e-4;
    }
    std::vector<double> y = std::move(init);
    auto clamp_anchors = [&](std::vector<double>& pos, std::vector<double>* vel) {
        for (std::size_t i = 0; i < fixed.size(); ++i) {
            if (!fixed[i]) continue;
            pos[2 * i] = fixed[i]->first;
            pos[2 * i + 1] = fixed[i]->second;
            if (vel) (*vel)[2 * i] = (*vel)[2 * i + 1] = 0.0;
        }
    };
    clamp_anchors(y, nullptr);
    if (n < 2) {
        result.coords = y;
        result.kl_trace.emplace_back(params.iterations, 0.0);
        return result;
    }

    // Entropy cannot exceed log(n - 1); shrink the target for tiny inputs.
    double perplexity = params.perplexity;
    if (3.0 * perplexity > static_cast<double>(n - 1)) perplexity = std::max(1.0, static_cast<double>(n - 1) / 3.0);

    const bool exact = n <= params.exact_threshold;
    std::vector<double> p_dense;
    std::vector<SparseRow> p_sparse;
    if (exact) {
        p_dense = exact_affinities(data, n, dim, perplexity);
    } else {
        p_sparse = sparse_affinities(data, n, dim, perplexity);
    }
    auto kl = [&]() { return exact ? kl_exact(p_dense, y, n) : kl_sparse(p_sparse, y, n); };

    std::vector<double> grad(2 * n, 0.0), vel(2 * n, 0.0), gains(2 * n, 1.0);
    std::vector<double> qnum;
    if (exact) qnum.resize(n * n);
    double momentum = params.momentum;
    double exaggeration = params.exaggeration;

    for (int iter = 0; iter < params.iterations; ++iter) {
        if (iter == params.stop_lying_iter) exaggeration = 1.0;
        if (iter == params.mom_switch_iter) momentum = params.final_momentum;

        std::fill(grad.begin(), grad.end(), 0.0);
        if (exact) {
            double sum_q = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                qnum[i * n + i] = 0.0;
                for (std::size_t j = i + 1; j < n; ++j) {
                    const double dx = y[2 * i] - y[2 * j], dy = y[2 * i + 1] - y[2 * j + 1];
                    const double q = 1.0 / (1.0 + dx * dx + dy * dy);
                    qnum[i * n + j] = qnum[j * n + i] = q;
                    sum_q += 2.0 * q;
                }
            }
            for (std::size_t i = 0; i < n; ++i) {
                double gx = 0.0, gy = 0.0;
                for (std::size_t j = 0; j < n; ++j) {
                    if (j == i) continue;
                    const double q = qnum[i * n + j];
                    const double mult = (exaggeration * p_dense[i * n + j] - q / sum_q) * q;
                    gx += mult * (y[2 * i] - y[2 * j]);
                    gy += mult * (y[2 * i + 1] - y[2 * j + 1]);
                }
                grad[2 * i] = gx;
                grad[2 * i + 1] = gy;
            }
        } else {
            SpaceTree tree(y, n);
            std::vector<double> neg(2 * n, 0.0);
            double sum_q = 0.0;
            for (std::size_t i = 0; i < n; ++i) tree.non_edge_forces(i, params.theta, neg[2 * i], neg[2 * i + 1], sum_q);
            for (std::size_t i = 0; i < n; ++i) {
                double px = 0.0, py = 0.0;
                const auto& row = p_sparse[i];
                for (std::size_t m = 0; m < row.cols.size(); ++m) {
                    const std::size_t j = row.cols[m];
                    const double dx = y[2 * i] - y[2 * j], dy = y[2 * i + 1] - y[2 * j + 1];
                    const double q = exaggeration * row.vals[m] / (1.0 + dx * dx + dy * dy);
                    px += q * dx;
                    py += q * dy;
                }
                grad[2 * i] = px - neg[2 * i] / sum_q;
                grad[2 * i + 1] = py - neg[2 * i + 1] / sum_q;
            }
        }

        for (std::size_t k = 0; k < 2 * n; ++k) {
            const bool same_sign = (grad[k] > 0.0) == (vel[k] > 0.0);
            gains[k] = same_sign ? gains[k] * 0.8 : gains[k] + 0.2;
            if (gains[k] < 0.01) gains[k] = 0.01;
            vel[k] = momentum * vel[k] - params.learning_rate * gains[k] * grad[k];
            y[k] += vel[k];
        }
        if (any_fixed) {
            clamp_anchors(y, &vel);
        } else {
            double mx = 0.0, my = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                mx += y[2 * i];
                my += y[2 * i + 1];
            }
            mx /= static_cast<double>(n);
            my /= static_cast<double>(n);
            for (std::size_t i = 0; i < n; ++i) {
                y[2 * i] -= mx;
                y[2 * i + 1] -= my;
            }
        }

        const int done = iter + 1;
        if ((params.kl_every > 0 && done % params.kl_every == 0) || done == params.iterations) {
            const double value = kl();
            if (!std::isfinite(value)) {
                throw Error(ErrorKind::ConvergenceFailure, "KL divergence is not finite at iteration " + std::to_string(done));
            }
            result.kl_trace.emplace_back(done, value);
        }
        if (callback && (done % 10 == 0 || done == params.iterations)) {
            if (!callback({done, params.iterations})) throw Error(ErrorKind::Cancelled, "t-SNE run cancelled");
        }
    }
    for (const double v : y) {
        if (!std::isfinite(v)) throw Error(ErrorKind::ConvergenceFailure, "non-finite coordinates");
    }
    result.coords = std::move(y);
    return result;
}

}  // namespace cspace
