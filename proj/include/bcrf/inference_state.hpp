#pragma once

#include <algorithm>
#include <vector>

#include "bcrf/classifier_bank.hpp"

namespace bcrf {

// Alg. 1 state tuple s = (i, b, C, F, D). Descriptor outputs themselves live
// in the video's immutable DescriptorBank; `computed` records which types
// have been paid for, and `distributions` caches H(mask_i) per node so the
// policy features never re-run classifiers (empty vector = no descriptors).
struct InferenceState {
    int current = -1;
    int remaining = 0;
    std::vector<int> candidates; // C, sorted ascending
    std::vector<char> finished;  // F membership per node
    std::vector<SubsetMask> computed;
    std::vector<std::vector<double>> distributions;

    bool is_candidate(int i) const {
        return std::binary_search(candidates.begin(), candidates.end(), i);
    }
    void add_candidate(int i) {
        auto it = std::lower_bound(candidates.begin(), candidates.end(), i);
        if (it == candidates.end() || *it != i) candidates.insert(it, i);
    }
    void remove_candidate(int i) {
        auto it = std::lower_bound(candidates.begin(), candidates.end(), i);
        if (it != candidates.end() && *it == i) candidates.erase(it);
    }
};

} // namespace bcrf
