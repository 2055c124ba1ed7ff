#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace bcrf {

constexpr int kNoLabel = -1;

struct Supervoxel {
    int id = 0;
    double cx = 0.0, cy = 0.0, ct = 0.0; // centroid (x, y, t)
    int voxel_count = 1;
    int true_label = kNoLabel; // kNoLabel when unknown (test-time)

    bool has_label() const { return true_label != kNoLabel; }
    bool operator==(const Supervoxel&) const = default;
};

struct SupervoxelGraph {
    std::vector<Supervoxel> nodes;
    std::vector<std::pair<int, int>> edges; // normalized i < j, sorted
    int label_count = 0;

    // Sorted adjacency lists; rebuilt by finalize().
    std::vector<std::vector<int>> adjacency;

    void finalize(); // normalizes edges, builds adjacency, validates
    bool operator==(const SupervoxelGraph& o) const {
        return nodes == o.nodes && edges == o.edges && label_count == o.label_count;
    }
};

// All j with (i, j) an edge, ascending.
const std::vector<int>& neighbors(const SupervoxelGraph& g, int i);

double centroid_distance(const Supervoxel& a, const Supervoxel& b);

struct DescriptorSpec {
    int type_id = 0;
    int dimension = 1;
    int cost_units = 1;
    bool operator==(const DescriptorSpec&) const = default;
};

// Precomputed descriptor values for every (node, type) pair of one video.
class DescriptorBank {
public:
    DescriptorBank() = default;
    DescriptorBank(std::vector<DescriptorSpec> specs, int node_count);

    int type_count() const { return static_cast<int>(specs_.size()); }
    int node_count() const { return node_count_; }
    const std::vector<DescriptorSpec>& specs() const { return specs_; }
    const DescriptorSpec& spec(int type) const { return specs_.at(type); }

    const double* value(int node, int type) const;
    double* mutable_value(int node, int type);

    // Sum of all per-node type costs.
    int total_cost_per_node() const;

    bool operator==(const DescriptorBank& o) const {
        return specs_ == o.specs_ && node_count_ == o.node_count_ && storage_ == o.storage_;
    }

private:
    std::vector<DescriptorSpec> specs_;
    int node_count_ = 0;
    // One contiguous row-major matrix per type: node index x dimension.
    std::vector<std::vector<double>> storage_;
};

struct DescriptorTypeConfig {
    int dimension = 4;
    int cost_units = 1;
    double informativeness = 1.0; // class-mean separation scale
    double noise = 1.0;
    bool operator==(const DescriptorTypeConfig&) const = default;
};

struct CorpusConfig {
    int grid_x = 4, grid_y = 4, grid_t = 6;
    int label_count = 4;
    std::vector<DescriptorTypeConfig> types;
    int smoothing_passes = 1; // majority filter passes on the label field
    std::uint64_t seed = 1;

    int type_count() const { return static_cast<int>(types.size()); }
    int node_count() const { return grid_x * grid_y * grid_t; }
    bool operator==(const CorpusConfig&) const = default;
};

struct Video {
    SupervoxelGraph graph;
    DescriptorBank descriptors;
    bool operator==(const Video&) const = default;
};

struct Corpus {
    CorpusConfig config;
    std::vector<Video> videos;
    bool operator==(const Corpus&) const = default;
};

// Seeded synthetic corpus: lattice graphs with 6-neighborhood edges,
// region-grown smoothed label fields, and class-correlated descriptors.
Corpus generate_corpus(const CorpusConfig& config, int n_videos);

void save_corpus(const Corpus& corpus, const std::string& path);
Corpus load_corpus(const std::string& path);

std::string corpus_to_json(const Corpus& corpus);
Corpus corpus_from_json(const std::string& text);

// Config-only (de)serialization, shared with experiment config files.
std::string corpus_config_to_json(const CorpusConfig& config);
CorpusConfig corpus_config_from_json(const std::string& text);

} // namespace bcrf
