#include "bcrf/svgraph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "bcrf/errors.hpp"
#include "bcrf/rng.hpp"

namespace bcrf {

using json = nlohmann::json;

void SupervoxelGraph::finalize() {
    const int n = static_cast<int>(nodes.size());
    for (auto& [a, b] : edges) {
        if (a == b) throw DataError("graph has a self-loop at node " + std::to_string(a));
        if (a < 0 || b < 0 || a >= n || b >= n)
            throw DataError("edge references unknown node id");
        if (a > b) std::swap(a, b);
    }
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    adjacency.assign(n, {});
    for (const auto& [a, b] : edges) {
        adjacency[a].push_back(b);
        adjacency[b].push_back(a);
    }
    for (auto& adj : adjacency) std::sort(adj.begin(), adj.end());
}

const std::vector<int>& neighbors(const SupervoxelGraph& g, int i) {
    if (i < 0 || i >= static_cast<int>(g.nodes.size()))
        throw DataError("neighbors: unknown node id " + std::to_string(i));
    return g.adjacency[i];
}

double centroid_distance(const Supervoxel& a, const Supervoxel& b) {
    double dx = a.cx - b.cx, dy = a.cy - b.cy, dt = a.ct - b.ct;
    return std::sqrt(dx * dx + dy * dy + dt * dt);
}

DescriptorBank::DescriptorBank(std::vector<DescriptorSpec> specs, int node_count)
    : specs_(std::move(specs)), node_count_(node_count) {
    storage_.resize(specs_.size());
    for (std::size_t d = 0; d < specs_.size(); ++d)
        storage_[d].assign(static_cast<std::size_t>(node_count_) * specs_[d].dimension, 0.0);
}

const double* DescriptorBank::value(int node, int type) const {
    return storage_.at(type).data() + static_cast<std::size_t>(node) * specs_[type].dimension;
}

double* DescriptorBank::mutable_value(int node, int type) {
    return storage_.at(type).data() + static_cast<std::size_t>(node) * specs_[type].dimension;
}

int DescriptorBank::total_cost_per_node() const {
    int total = 0;
    for (const auto& s : specs_) total += s.cost_units;
    return total;
}

namespace {

void validate_config(const CorpusConfig& c) {
    if (c.grid_x < 1 || c.grid_y < 1 || c.grid_t < 1)
        throw ConfigError("corpus grid dimensions must all be >= 1");
    if (c.node_count() < 2)
        throw ConfigError("corpus grid must contain at least 2 nodes so every node has an edge");
    if (c.label_count < 1) throw ConfigError("label count must be >= 1");
    if (c.types.size() < 2) throw ConfigError("at least 2 descriptor types required");
    if (c.types.size() > 8)
        throw ConfigError("descriptor type count capped at 8 (classifier bank enumerates all subsets)");
    for (const auto& t : c.types) {
        if (t.dimension < 1) throw ConfigError("descriptor dimension must be >= 1");
        if (t.cost_units < 1) throw ConfigError("descriptor cost must be >= 1");
        if (t.informativeness < 0) throw ConfigError("informativeness must be >= 0");
        if (t.noise < 0) throw ConfigError("noise scale must be >= 0");
    }
    if (c.smoothing_passes < 0) throw ConfigError("smoothing passes must be >= 0");
}

// Region seeds per label for the synthetic label fields.
constexpr int kRegionSeedsPerLabel = 2;

std::vector<int> grow_label_field(const SupervoxelGraph& g, int label_count, Rng& rng) {
    const int n = static_cast<int>(g.nodes.size());
    std::vector<int> labels(n, kNoLabel);

    int want_seeds = std::min(n, label_count * kRegionSeedsPerLabel);
    std::vector<int> seed_nodes = rng.sample_without_replacement(n, want_seeds);
    std::vector<std::pair<int, int>> frontier; // (node, label)
    for (int s = 0; s < want_seeds; ++s) {
        int node = seed_nodes[s];
        int label = s % label_count;
        labels[node] = label;
        for (int j : g.adjacency[node]) frontier.emplace_back(j, label);
    }

    // Multi-source growth: pop a random frontier entry, claim if unlabeled.
    while (!frontier.empty()) {
        int idx = rng.uniform_int(static_cast<int>(frontier.size()));
        auto [node, label] = frontier[idx];
        frontier[idx] = frontier.back();
        frontier.pop_back();
        if (labels[node] != kNoLabel) continue;
        labels[node] = label;
        for (int j : g.adjacency[node])
            if (labels[j] == kNoLabel) frontier.emplace_back(j, label);
    }
    for (int i = 0; i < n; ++i)
        if (labels[i] == kNoLabel) labels[i] = 0; // unreachable on a connected lattice
    return labels;
}

std::vector<int> majority_smooth(const SupervoxelGraph& g, std::vector<int> labels,
                                 int label_count, int passes) {
    const int n = static_cast<int>(labels.size());
    std::vector<int> next(n);
    for (int p = 0; p < passes; ++p) {
        for (int i = 0; i < n; ++i) {
            std::vector<int> counts(label_count, 0);
            counts[labels[i]]++;
            for (int j : g.adjacency[i]) counts[labels[j]]++;
            int best = labels[i];
            int best_count = counts[best];
            for (int l = 0; l < label_count; ++l) {
                if (counts[l] > best_count || (counts[l] == best_count && l < best)) {
                    best = l;
                    best_count = counts[l];
                }
            }
            next[i] = best;
        }
        labels.swap(next);
    }
    return labels;
}

} // namespace

Corpus generate_corpus(const CorpusConfig& config, int n_videos) {
    validate_config(config);
    if (n_videos < 1) throw ConfigError("n_videos must be >= 1");

    const int X = config.grid_x, Y = config.grid_y, T = config.grid_t;
    const int n = config.node_count();
    const int L = config.label_count;
    const int D = config.type_count();

    // Class-conditional descriptor means are corpus-level so classifiers
    // trained on one half generalize to the other.
    Rng corpus_rng(derive_seed(config.seed, 0xC0FFEEULL));
    std::vector<std::vector<std::vector<double>>> class_means(D);
    for (int d = 0; d < D; ++d) {
        class_means[d].resize(L);
        for (int l = 0; l < L; ++l) {
            class_means[d][l].resize(config.types[d].dimension);
            for (double& v : class_means[d][l])
                v = config.types[d].informativeness * corpus_rng.normal();
        }
    }

    std::vector<DescriptorSpec> specs(D);
    for (int d = 0; d < D; ++d)
        specs[d] = DescriptorSpec{d, config.types[d].dimension, config.types[d].cost_units};

    Corpus corpus;
    corpus.config = config;
    corpus.videos.reserve(n_videos);

    for (int v = 0; v < n_videos; ++v) {
        Rng rng(derive_seed(config.seed, 0x51DE0ULL, static_cast<std::uint64_t>(v)));

        Video video;
        auto& g = video.graph;
        g.label_count = L;
        g.nodes.resize(n);
        auto node_id = [&](int x, int y, int t) { return (t * Y + y) * X + x; };
        for (int t = 0; t < T; ++t)
            for (int y = 0; y < Y; ++y)
                for (int x = 0; x < X; ++x) {
                    Supervoxel& sv = g.nodes[node_id(x, y, t)];
                    sv.id = node_id(x, y, t);
                    sv.cx = x;
                    sv.cy = y;
                    sv.ct = t;
                    sv.voxel_count = rng.uniform_range(1, 5);
                }
        for (int t = 0; t < T; ++t)
            for (int y = 0; y < Y; ++y)
                for (int x = 0; x < X; ++x) {
                    int i = node_id(x, y, t);
                    if (x + 1 < X) g.edges.emplace_back(i, node_id(x + 1, y, t));
                    if (y + 1 < Y) g.edges.emplace_back(i, node_id(x, y + 1, t));
                    if (t + 1 < T) g.edges.emplace_back(i, node_id(x, y, t + 1));
                }
        g.finalize();

        std::vector<int> labels = grow_label_field(g, L, rng);
        labels = majority_smooth(g, std::move(labels), L, config.smoothing_passes);
        for (int i = 0; i < n; ++i) g.nodes[i].true_label = labels[i];

        video.descriptors = DescriptorBank(specs, n);
        for (int i = 0; i < n; ++i)
            for (int d = 0; d < D; ++d) {
                double* out = video.descriptors.mutable_value(i, d);
                const auto& mean = class_means[d][labels[i]];
                for (int k = 0; k < config.types[d].dimension; ++k)
                    out[k] = mean[k] + config.types[d].noise * rng.normal();
            }

        corpus.videos.push_back(std::move(video));
    }
    return corpus;
}

namespace {

json config_to_json(const CorpusConfig& c) {
    json types = json::array();
    for (const auto& t : c.types)
        types.push_back({{"dim", t.dimension},
                         {"cost", t.cost_units},
                         {"informativeness", t.informativeness},
                         {"noise", t.noise}});
    return json{{"grid", {c.grid_x, c.grid_y, c.grid_t}},
                {"labels", c.label_count},
                {"types", std::move(types)},
                {"smoothing", c.smoothing_passes},
                {"seed", c.seed}};
}

const json& require(const json& j, const char* key, const char* where) {
    auto it = j.find(key);
    if (it == j.end())
        throw DataError(std::string("corpus file: missing \"") + key + "\" in " + where);
    return *it;
}

CorpusConfig config_from_json(const json& j) {
    CorpusConfig c;
    const auto& grid = require(j, "grid", "config");
    if (!grid.is_array() || grid.size() != 3)
        throw DataError("corpus file: config.grid must be [X, Y, T]");
    c.grid_x = grid[0].get<int>();
    c.grid_y = grid[1].get<int>();
    c.grid_t = grid[2].get<int>();
    c.label_count = require(j, "labels", "config").get<int>();
    c.types.clear();
    for (const auto& t : require(j, "types", "config")) {
        DescriptorTypeConfig tc;
        tc.dimension = require(t, "dim", "config.types").get<int>();
        tc.cost_units = require(t, "cost", "config.types").get<int>();
        tc.informativeness = require(t, "informativeness", "config.types").get<double>();
        tc.noise = require(t, "noise", "config.types").get<double>();
        c.types.push_back(tc);
    }
    c.smoothing_passes = require(j, "smoothing", "config").get<int>();
    c.seed = require(j, "seed", "config").get<std::uint64_t>();
    return c;
}

} // namespace

std::string corpus_to_json(const Corpus& corpus) {
    json root;
    root["config"] = config_to_json(corpus.config);
    json videos = json::array();
    for (const auto& video : corpus.videos) {
        json nodes = json::array();
        for (const auto& sv : video.graph.nodes) {
            json jn{{"id", sv.id},
                    {"centroid", {sv.cx, sv.cy, sv.ct}},
                    {"voxel_count", sv.voxel_count}};
            if (sv.has_label()) jn["label"] = sv.true_label;
            nodes.push_back(std::move(jn));
        }
        json edges = json::array();
        for (const auto& [a, b] : video.graph.edges) edges.push_back({a, b});

        json specs = json::array();
        for (const auto& s : video.descriptors.specs())
            specs.push_back({{"type_id", s.type_id}, {"dim", s.dimension}, {"cost", s.cost_units}});
        json values = json::object();
        for (int i = 0; i < video.descriptors.node_count(); ++i)
            for (int d = 0; d < video.descriptors.type_count(); ++d) {
                const double* v = video.descriptors.value(i, d);
                values[std::to_string(i) + "/" + std::to_string(d)] =
                    std::vector<double>(v, v + video.descriptors.spec(d).dimension);
            }
        videos.push_back(json{{"nodes", std::move(nodes)},
                              {"edges", std::move(edges)},
                              {"descriptors", {{"specs", std::move(specs)}, {"values", std::move(values)}}}});
    }
    root["videos"] = std::move(videos);
    return root.dump();
}

std::string corpus_config_to_json(const CorpusConfig& config) {
    return config_to_json(config).dump();
}

CorpusConfig corpus_config_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw DataError(std::string("corpus config: parse error: ") + e.what());
    }
    try {
        return config_from_json(j);
    } catch (const json::exception& e) {
        throw DataError(std::string("corpus config: malformed content: ") + e.what());
    }
}

Corpus corpus_from_json(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        // Byte offset -> line number for a usable message on truncated files.
        std::size_t line = 1;
        for (std::size_t i = 0; i < e.byte && i < text.size(); ++i)
            if (text[i] == '\n') ++line;
        throw DataError("corpus file: parse error at line " + std::to_string(line) + ": " + e.what());
    }

    try {
        Corpus corpus;
        corpus.config = config_from_json(require(root, "config", "top level"));
        for (const auto& jv : require(root, "videos", "top level")) {
            Video video;
            auto& g = video.graph;
            g.label_count = corpus.config.label_count;
            for (const auto& jn : require(jv, "nodes", "video")) {
                Supervoxel sv;
                sv.id = require(jn, "id", "node").get<int>();
                const auto& c = require(jn, "centroid", "node");
                if (!c.is_array() || c.size() != 3)
                    throw DataError("corpus file: node centroid must be [x, y, t]");
                sv.cx = c[0].get<double>();
                sv.cy = c[1].get<double>();
                sv.ct = c[2].get<double>();
                sv.voxel_count = require(jn, "voxel_count", "node").get<int>();
                if (jn.contains("label")) sv.true_label = jn["label"].get<int>();
                g.nodes.push_back(sv);
            }
            for (const auto& je : require(jv, "edges", "video")) {
                if (!je.is_array() || je.size() != 2)
                    throw DataError("corpus file: each edge must be [i, j]");
                g.edges.emplace_back(je[0].get<int>(), je[1].get<int>());
            }
            g.finalize();

            const auto& jd = require(jv, "descriptors", "video");
            std::vector<DescriptorSpec> specs;
            for (const auto& js : require(jd, "specs", "descriptors"))
                specs.push_back(DescriptorSpec{require(js, "type_id", "spec").get<int>(),
                                               require(js, "dim", "spec").get<int>(),
                                               require(js, "cost", "spec").get<int>()});
            video.descriptors = DescriptorBank(specs, static_cast<int>(g.nodes.size()));
            const auto& values = require(jd, "values", "descriptors");
            for (int i = 0; i < video.descriptors.node_count(); ++i)
                for (int d = 0; d < video.descriptors.type_count(); ++d) {
                    std::string key = std::to_string(i) + "/" + std::to_string(d);
                    auto it = values.find(key);
                    if (it == values.end())
                        throw DataError("corpus file: missing descriptor values for " + key);
                    const auto& arr = *it;
                    if (static_cast<int>(arr.size()) != video.descriptors.spec(d).dimension)
                        throw DataError("corpus file: wrong descriptor length for " + key);
                    double* out = video.descriptors.mutable_value(i, d);
                    for (std::size_t k = 0; k < arr.size(); ++k) out[k] = arr[k].get<double>();
                }
            corpus.videos.push_back(std::move(video));
        }
        return corpus;
    } catch (const json::exception& e) {
        throw DataError(std::string("corpus file: malformed content: ") + e.what());
    }
}

void save_corpus(const Corpus& corpus, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open for writing: " + path);
    out << corpus_to_json(corpus);
    if (!out) throw DataError("write failed: " + path);
}

Corpus load_corpus(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open corpus file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return corpus_from_json(ss.str());
}

} // namespace bcrf
