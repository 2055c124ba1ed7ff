#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "bcrf/svgraph.hpp"

namespace bcrf {

// Bitmask over descriptor types; bit d set means type d was computed.
using SubsetMask = unsigned;

inline bool mask_has(SubsetMask mask, int type) { return (mask >> type) & 1u; }
inline SubsetMask full_mask(int type_count) { return (1u << type_count) - 1u; }

// Multinomial logistic classifier for one descriptor subset. Inputs are
// standardized with the train-set per-dimension mean/sd stored here.
struct SubsetClassifier {
    SubsetMask mask = 0;
    int label_count = 0;
    int input_dim = 0;                   // sum of member descriptor dimensions
    std::vector<double> weights;         // L x (input_dim + 1), row-major, bias last
    std::vector<double> feat_mean;       // input_dim
    std::vector<double> feat_inv_sd;     // input_dim; 0 drops a constant feature

    static SubsetClassifier with_identity_standardization(SubsetMask mask, int label_count,
                                                          int input_dim);

    const double* row(int label) const { return weights.data() + label * (input_dim + 1); }
    double* row(int label) { return weights.data() + label * (input_dim + 1); }

    // Softmax of the linear scores on raw (unstandardized) member values.
    void predict_into(const double* values, double* out_distribution) const;
    std::vector<double> predict(std::span<const double> values) const;
};

struct BankHyper {
    double l2 = 1e-3;
    int epochs = 30;
    double step0 = 0.1; // decays as step0 / sqrt(epoch)
    std::uint64_t seed = 1;
};

// The classifier collection H: one classifier per non-empty subset of the
// D descriptor types (2^D - 1 total), plus per-(type, label) mean
// descriptors used when a missing descriptor must be substituted.
class ClassifierBank {
public:
    ClassifierBank() = default;

    int type_count() const { return type_count_; }
    int label_count() const { return label_count_; }
    int classifier_count() const { return static_cast<int>((1u << type_count_) - 1); }
    const std::vector<int>& type_dims() const { return type_dims_; }

    int member_dim(SubsetMask mask) const;
    const SubsetClassifier& classifier(SubsetMask mask) const;

    std::vector<double> predict(SubsetMask mask, std::span<const double> values) const;
    void predict_into(SubsetMask mask, const double* values, double* out) const;

    // Empirical mean descriptor of `type` over training nodes with `label`.
    const std::vector<double>& expected_descriptor(int type, int label) const;

    std::string to_json() const;
    static ClassifierBank from_json(const std::string& text);
    void save(const std::string& path) const;
    static ClassifierBank load(const std::string& path);

    friend ClassifierBank train_bank(std::span<const Video> corpus, const BankHyper& hyper);

private:
    int type_count_ = 0;
    int label_count_ = 0;
    std::vector<int> type_dims_;
    std::vector<double> type_mean_;      // concatenated per-type standardization
    std::vector<double> type_sd_;
    std::vector<int> type_offset_;       // offset of each type in the full concat
    std::vector<SubsetClassifier> classifiers_; // indexed by mask; [0] unused
    std::vector<std::vector<std::vector<double>>> class_means_; // [type][label]
};

// Fits one classifier per non-empty descriptor subset with seeded SGD.
// Every label in [0, L) must occur in the corpus.
ClassifierBank train_bank(std::span<const Video> corpus, const BankHyper& hyper);

// Concatenation of the node's member-descriptor values, ascending type id.
std::vector<double> concat_member_values(const DescriptorBank& bank, int node, SubsetMask mask);

} // namespace bcrf
