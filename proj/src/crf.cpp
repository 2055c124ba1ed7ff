#include "bcrf/crf.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "bcrf/errors.hpp"
#include "bcrf/kernels.hpp"
#include "bcrf/rng.hpp"

namespace bcrf {
namespace {

using nlohmann::json;

constexpr std::uint64_t kAlphaOrderStream = 0xA1FAULL;
constexpr std::uint64_t kPerceptronStream = 0x9E2CE97ULL;

int pair_index(int yi, int yj, int L) { return yi * L + yj; }

} // namespace

std::vector<double> unary_feature(const std::vector<double>& distribution, int y) {
    const int L = static_cast<int>(distribution.size());
    if (y < 0 || y >= L)
        throw std::invalid_argument("unary_feature: label " + std::to_string(y) +
                                    " out of range for L=" + std::to_string(L));
    std::vector<double> psi(L, 0.0);
    psi[y] = distribution[y];
    return psi;
}

double similarity(std::span<const double> d_i, std::span<const double> d_j, double sigma) {
    if (d_i.size() != d_j.size())
        throw std::invalid_argument("similarity: descriptor length mismatch");
    const double sq = kernels::squared_distance(d_i.data(), d_j.data(), d_i.size());
    return std::exp(-sq / (2.0 * sigma * sigma));
}

std::vector<double> pairwise_feature(std::span<const double> d_i, std::span<const double> d_j,
                                     int y_i, int y_j, int label_count, double sigma) {
    if (y_i < 0 || y_i >= label_count || y_j < 0 || y_j >= label_count)
        throw std::invalid_argument("pairwise_feature: label out of range");
    std::vector<double> psi(static_cast<std::size_t>(label_count) * label_count, 0.0);
    psi[pair_index(y_i, y_j, label_count)] = similarity(d_i, d_j, sigma);
    return psi;
}

EdgeSims full_mask_similarities(const Video& video, double sigma) {
    const auto& g = video.graph;
    EdgeSims sims(static_cast<int>(g.edges.size()), g.label_count);
    const SubsetMask full = full_mask(video.descriptors.type_count());
    for (std::size_t e = 0; e < g.edges.size(); ++e) {
        auto [a, b] = g.edges[e];
        auto da = concat_member_values(video.descriptors, a, full);
        auto db = concat_member_values(video.descriptors, b, full);
        sims.fill_edge(static_cast<int>(e), similarity(da, db, sigma));
    }
    return sims;
}

double crf_score(const CRFModel& model, const SupervoxelGraph& graph,
                 const std::vector<std::vector<double>>& distributions, const EdgeSims& sims,
                 const std::vector<int>& labeling) {
    const int L = model.label_count;
    if (labeling.size() != graph.nodes.size())
        throw std::invalid_argument("crf_score: labeling does not cover the graph");
    double score = 0.0;
    for (std::size_t i = 0; i < labeling.size(); ++i) {
        const int y = labeling[i];
        if (y < 0 || y >= L) throw std::invalid_argument("crf_score: incomplete labeling");
        score += model.w_u[y] * distributions[i][y];
    }
    for (std::size_t e = 0; e < graph.edges.size(); ++e) {
        auto [a, b] = graph.edges[e];
        const int ya = labeling[a], yb = labeling[b];
        score += model.w_p[pair_index(ya, yb, L)] * sims.at(static_cast<int>(e), ya, yb);
    }
    return score;
}

std::vector<int> unary_argmax(const std::vector<std::vector<double>>& distributions) {
    std::vector<int> labeling(distributions.size(), 0);
    for (std::size_t i = 0; i < distributions.size(); ++i) {
        const auto& h = distributions[i];
        int best = 0;
        for (int l = 1; l < static_cast<int>(h.size()); ++l)
            if (h[l] > h[best]) best = l;
        labeling[i] = best;
    }
    return labeling;
}

namespace {

// Edge list indexed by node for O(degree) move deltas.
std::vector<std::vector<std::pair<int, int>>> incident_edges(const SupervoxelGraph& g) {
    std::vector<std::vector<std::pair<int, int>>> inc(g.nodes.size()); // (edge idx, other node)
    for (std::size_t e = 0; e < g.edges.size(); ++e) {
        auto [a, b] = g.edges[e];
        inc[a].emplace_back(static_cast<int>(e), b);
        inc[b].emplace_back(static_cast<int>(e), a);
    }
    return inc;
}

} // namespace

std::vector<int> alpha_expansion(const CRFModel& model, const SupervoxelGraph& graph,
                                 const std::vector<std::vector<double>>& distributions,
                                 const EdgeSims& sims, std::vector<int> labeling,
                                 std::uint64_t seed, MoveLog* log) {
    const int L = model.label_count;
    const int n = static_cast<int>(graph.nodes.size());
    if (static_cast<int>(labeling.size()) != n)
        throw std::invalid_argument("alpha_expansion: bad init labeling");
    auto inc = incident_edges(graph);

    auto edge_term = [&](int edge, int a, int b, int ya, int yb) {
        // Contribution of this edge with endpoint labels in stored order.
        return a < b ? model.w_p[pair_index(ya, yb, L)] * sims.at(edge, ya, yb)
                     : model.w_p[pair_index(yb, ya, L)] * sims.at(edge, yb, ya);
    };

    double score = crf_score(model, graph, distributions, sims, labeling);
    if (log) {
        log->initial_score = score;
        log->moves.clear();
    }

    std::vector<int> alpha_order(L);
    std::iota(alpha_order.begin(), alpha_order.end(), 0);
    Rng rng(derive_seed(seed, kAlphaOrderStream));
    rng.shuffle(alpha_order);

    int stale_sweeps = 0; // consecutive alpha sweeps without an accepted move
    for (std::size_t cursor = 0; stale_sweeps < L; cursor = (cursor + 1) % L) {
        const int alpha = alpha_order[cursor];
        bool moved = false;
        for (int i = 0; i < n; ++i) {
            const int y = labeling[i];
            if (y == alpha) continue;
            double delta = model.w_u[alpha] * distributions[i][alpha] -
                           model.w_u[y] * distributions[i][y];
            for (auto [e, j] : inc[i])
                delta += edge_term(e, i, j, alpha, labeling[j]) -
                         edge_term(e, i, j, y, labeling[j]);
            if (delta > 0.0 || (delta == 0.0 && alpha < y)) {
                labeling[i] = alpha;
                score += delta;
                moved = true;
                if (log) log->moves.push_back(Move{i, y, alpha, score});
            }
        }
        stale_sweeps = moved ? 0 : stale_sweeps + 1;
    }
    return labeling;
}

std::vector<int> exact_map(const CRFModel& model, const SupervoxelGraph& graph,
                           const std::vector<std::vector<double>>& distributions,
                           const EdgeSims& sims) {
    const int n = static_cast<int>(graph.nodes.size());
    const int L = model.label_count;
    double combos = 1.0;
    for (int i = 0; i < n; ++i) {
        combos *= L;
        if (combos > 1e6)
            throw std::invalid_argument("exact_map: instance too large (L^n > 1e6)");
    }
    std::vector<int> labeling(n, 0), best(n, 0);
    double best_score = crf_score(model, graph, distributions, sims, labeling);
    // Lexicographic enumeration with node 0 most significant; strict
    // improvement required, so the first (smallest) maximizer is kept.
    while (true) {
        int pos = n - 1;
        while (pos >= 0 && labeling[pos] == L - 1) labeling[pos--] = 0;
        if (pos < 0) break;
        ++labeling[pos];
        const double s = crf_score(model, graph, distributions, sims, labeling);
        if (s > best_score) {
            best_score = s;
            best = labeling;
        }
    }
    return best;
}

namespace {

struct StackedFeatures {
    std::vector<double> unary;    // length L
    std::vector<double> pairwise; // length L*L
};

StackedFeatures stacked_features(const SupervoxelGraph& graph,
                                 const std::vector<std::vector<double>>& distributions,
                                 const EdgeSims& sims, const std::vector<int>& labeling, int L) {
    StackedFeatures f;
    f.unary.assign(L, 0.0);
    f.pairwise.assign(static_cast<std::size_t>(L) * L, 0.0);
    for (std::size_t i = 0; i < labeling.size(); ++i)
        f.unary[labeling[i]] += distributions[i][labeling[i]];
    for (std::size_t e = 0; e < graph.edges.size(); ++e) {
        auto [a, b] = graph.edges[e];
        f.pairwise[pair_index(labeling[a], labeling[b], L)] +=
            sims.at(static_cast<int>(e), labeling[a], labeling[b]);
    }
    return f;
}

} // namespace

CRFModel train_crf(std::span<const Video> corpus, const ClassifierBank& bank,
                   const CrfHyper& hyper) {
    if (corpus.empty()) throw DataError("train_crf: empty corpus");
    const int L = corpus.front().graph.label_count;
    const SubsetMask full = full_mask(bank.type_count());

    CRFModel model;
    model.label_count = L;
    model.w_u.assign(L, 0.0);
    model.w_p.assign(static_cast<std::size_t>(L) * L, 0.0);

    // sigma: median full-descriptor distance across all training edges.
    std::vector<double> edge_dists;
    for (const auto& video : corpus)
        for (auto [a, b] : video.graph.edges) {
            auto da = concat_member_values(video.descriptors, a, full);
            auto db = concat_member_values(video.descriptors, b, full);
            edge_dists.push_back(
                std::sqrt(kernels::squared_distance(da.data(), db.data(), da.size())));
        }
    if (!edge_dists.empty()) {
        std::sort(edge_dists.begin(), edge_dists.end());
        model.sigma = edge_dists[edge_dists.size() / 2];
    }
    if (model.sigma <= 0.0) model.sigma = 1.0;
    if (hyper.epochs == 0) return model;

    // Per-video full-mask distributions, similarities and gold features are
    // loop invariants; only predictions change across perceptron epochs.
    const int V = static_cast<int>(corpus.size());
    std::vector<std::vector<std::vector<double>>> dists(V);
    std::vector<EdgeSims> sims(V);
    std::vector<StackedFeatures> gold(V);
    std::vector<std::vector<int>> truth(V);
    for (int v = 0; v < V; ++v) {
        const auto& video = corpus[v];
        const int n = static_cast<int>(video.graph.nodes.size());
        dists[v].resize(n);
        for (int i = 0; i < n; ++i)
            dists[v][i] = bank.predict(full, concat_member_values(video.descriptors, i, full));
        sims[v] = full_mask_similarities(video, model.sigma);
        truth[v].resize(n);
        for (int i = 0; i < n; ++i) {
            if (!video.graph.nodes[i].has_label())
                throw DataError("train_crf: node " + std::to_string(i) + " lacks a label");
            truth[v][i] = video.graph.nodes[i].true_label;
        }
        gold[v] = stacked_features(video.graph, dists[v], sims[v], truth[v], L);
    }

    std::vector<double> sum_u(L, 0.0), sum_p(static_cast<std::size_t>(L) * L, 0.0);
    std::size_t steps = 0;
    Rng rng(derive_seed(hyper.seed, kPerceptronStream));
    std::vector<int> order(V);
    std::iota(order.begin(), order.end(), 0);
    for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
        rng.shuffle(order);
        for (int v : order) {
            const auto& video = corpus[v];
            auto init = unary_argmax(dists[v]);
            auto pred = alpha_expansion(model, video.graph, dists[v], sims[v], std::move(init),
                                        derive_seed(hyper.seed, epoch, v));
            if (pred != truth[v]) {
                auto fp = stacked_features(video.graph, dists[v], sims[v], pred, L);
                for (int l = 0; l < L; ++l)
                    model.w_u[l] += hyper.step * (gold[v].unary[l] - fp.unary[l]);
                for (int p = 0; p < L * L; ++p)
                    model.w_p[p] += hyper.step * (gold[v].pairwise[p] - fp.pairwise[p]);
            }
            for (int l = 0; l < L; ++l) sum_u[l] += model.w_u[l];
            for (int p = 0; p < L * L; ++p) sum_p[p] += model.w_p[p];
            ++steps;
        }
    }
    for (int l = 0; l < L; ++l) model.w_u[l] = sum_u[l] / static_cast<double>(steps);
    for (int p = 0; p < L * L; ++p) model.w_p[p] = sum_p[p] / static_cast<double>(steps);
    return model;
}

std::string CRFModel::to_json() const {
    json j;
    j["L"] = label_count;
    j["w_u"] = w_u;
    j["w_p"] = w_p;
    j["sigma"] = sigma;
    return j.dump(2);
}

CRFModel CRFModel::from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw DataError(std::string("crf model: ") + e.what());
    }
    try {
        CRFModel m;
        m.label_count = j.at("L").get<int>();
        m.w_u = j.at("w_u").get<std::vector<double>>();
        m.w_p = j.at("w_p").get<std::vector<double>>();
        m.sigma = j.at("sigma").get<double>();
        if (m.label_count < 1 || static_cast<int>(m.w_u.size()) != m.label_count ||
            m.w_p.size() != static_cast<std::size_t>(m.label_count) * m.label_count)
            throw DataError("crf model: inconsistent dimensions");
        if (!(m.sigma > 0.0)) throw DataError("crf model: sigma must be > 0");
        return m;
    } catch (const json::exception& e) {
        throw DataError(std::string("crf model: ") + e.what());
    }
}

void CRFModel::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open " + path + " for writing");
    out << to_json() << '\n';
    if (!out) throw DataError("failed writing " + path);
}

CRFModel CRFModel::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return from_json(buf.str());
}

} // namespace bcrf
