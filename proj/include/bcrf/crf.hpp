#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "bcrf/classifier_bank.hpp"
#include "bcrf/svgraph.hpp"

namespace bcrf {

// Pairwise CRF over a supervoxel graph, score of labeling y:
//   S(y) = sum_i w_u[y_i] * H(i)[y_i] + sum_(i,j) w_p[y_i*L + y_j] * s(i,j)
// maximized by alpha-expansion, with brute force as a testing oracle.
struct CRFModel {
    int label_count = 0;
    std::vector<double> w_u; // length L
    std::vector<double> w_p; // length L*L, flat index y_i*L + y_j for edge (i,j), i<j
    double sigma = 1.0;

    std::string to_json() const;
    static CRFModel from_json(const std::string& text);
    void save(const std::string& path) const;
    static CRFModel load(const std::string& path);
};

// Per-edge similarity tables s(e, y_i, y_j), aligned with graph.edges and
// oriented as stored (first endpoint = smaller id). Label dependence only
// arises when missing descriptors are substituted by class means; with full
// descriptors every (y_i, y_j) cell of an edge holds the same value.
class EdgeSims {
public:
    EdgeSims() = default;
    EdgeSims(int edge_count, int label_count)
        : label_count_(label_count),
          table_(static_cast<std::size_t>(edge_count) * label_count * label_count, 0.0) {}

    int label_count() const { return label_count_; }
    double at(int edge, int yi, int yj) const {
        return table_[(static_cast<std::size_t>(edge) * label_count_ + yi) * label_count_ + yj];
    }
    double& at(int edge, int yi, int yj) {
        return table_[(static_cast<std::size_t>(edge) * label_count_ + yi) * label_count_ + yj];
    }
    void fill_edge(int edge, double s) {
        for (int a = 0; a < label_count_; ++a)
            for (int b = 0; b < label_count_; ++b) at(edge, a, b) = s;
    }

private:
    int label_count_ = 0;
    std::vector<double> table_;
};

// psi_u evaluation: one-hot at y scaled by distribution[y].
std::vector<double> unary_feature(const std::vector<double>& distribution, int y);

// psi_p evaluation: length-L^2 vector, single nonzero s = exp(-|d_i-d_j|^2 / 2 sigma^2)
// at flat index y_i*L + y_j.
std::vector<double> pairwise_feature(std::span<const double> d_i, std::span<const double> d_j,
                                     int y_i, int y_j, int label_count, double sigma);

double similarity(std::span<const double> d_i, std::span<const double> d_j, double sigma);

// Similarities from each video's actual full-mask descriptors.
EdgeSims full_mask_similarities(const Video& video, double sigma);

double crf_score(const CRFModel& model, const SupervoxelGraph& graph,
                 const std::vector<std::vector<double>>& distributions, const EdgeSims& sims,
                 const std::vector<int>& labeling);

std::vector<int> unary_argmax(const std::vector<std::vector<double>>& distributions);

struct Move {
    int node = 0;
    int from = 0;
    int to = 0;
    double score_after = 0.0;
};

struct MoveLog {
    double initial_score = 0.0;
    std::vector<Move> moves;
};

// Expansion sweeps over labels in a seeded round-robin; every accepted move
// keeps the score non-decreasing (equal-score moves only to a lower label).
std::vector<int> alpha_expansion(const CRFModel& model, const SupervoxelGraph& graph,
                                 const std::vector<std::vector<double>>& distributions,
                                 const EdgeSims& sims, std::vector<int> labeling,
                                 std::uint64_t seed, MoveLog* log = nullptr);

// Brute force over all L^n labelings; requires L^n <= 1e6. Ties resolve to
// the lexicographically smallest labeling.
std::vector<int> exact_map(const CRFModel& model, const SupervoxelGraph& graph,
                           const std::vector<std::vector<double>>& distributions,
                           const EdgeSims& sims);

struct CrfHyper {
    int epochs = 10;
    double step = 0.1;
    std::uint64_t seed = 1;
};

// Averaged structured perceptron; inference by alpha_expansion on full-mask
// distributions. sigma is fixed beforehand to the median full-descriptor
// edge distance across the corpus.
CRFModel train_crf(std::span<const Video> corpus, const ClassifierBank& bank,
                   const CrfHyper& hyper);

} // namespace bcrf
