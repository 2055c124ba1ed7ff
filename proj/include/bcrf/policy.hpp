#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bcrf/inference_state.hpp"
#include "bcrf/svgraph.hpp"

namespace bcrf {

// A policy action: run one descriptor type on the current node, or FINISHED.
class Action {
public:
    static Action descriptor(int type_id) { return Action(type_id); }
    static Action finished() { return Action(-1); }

    bool is_finished() const { return type_id_ < 0; }
    int type_id() const { return type_id_; }

    // Weight-row index and canonical order: descriptors ascending, FINISHED last.
    int index(int type_count) const { return is_finished() ? type_count : type_id_; }
    std::string name() const { return is_finished() ? "FINISHED" : std::to_string(type_id_); }

    bool operator==(const Action&) const = default;

private:
    explicit Action(int type_id) : type_id_(type_id) {}
    int type_id_ = -1;
};

// phi(s) = [phi1 | phi2 | phi3], length D + L + 8.
//   phi1: computed-descriptor mask bits of the current node.
//   phi2: inverse-centroid-distance weighted mean of H(j) over finished
//         neighbors j holding >= 1 descriptor; zeros if none qualify.
//   phi3: counts of finished neighbors in {up,down,left,right} x {before,after};
//         bin = direction*2 + (after ? 1 : 0) with up=0,down=1,left=2,right=3.
struct PolicyFeatures {
    std::vector<double> values;
};

inline int policy_feature_dim(int type_count, int label_count) {
    return type_count + label_count + 8;
}

struct PolicyWeights {
    int type_count = 0;  // D
    int label_count = 0; // L
    std::vector<std::vector<double>> w; // D+1 rows of length D+L+8, FINISHED last

    static PolicyWeights zeros(int type_count, int label_count);
    static PolicyWeights random(int type_count, int label_count, std::uint64_t seed);

    std::string to_json() const;
    static PolicyWeights from_json(const std::string& text);
    void save(const std::string& path) const;
    static PolicyWeights load(const std::string& path);
};

PolicyFeatures compute_features(const InferenceState& state, const SupervoxelGraph& graph,
                                int type_count, int label_count);

// argmax over allowed of w_a . phi; ties prefer descriptors over FINISHED,
// then the lowest type id. allowed must be nonempty and contain FINISHED.
Action act(const PolicyWeights& weights, const PolicyFeatures& features,
           const std::vector<Action>& allowed);

} // namespace bcrf
