#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "bcrf/budget_engine.hpp"
#include "bcrf/classifier_bank.hpp"
#include "bcrf/crf.hpp"
#include "bcrf/learn.hpp"
#include "bcrf/svgraph.hpp"

namespace bcrf {

enum class Variant {
    rnd_rnk,      // CAPI policy, Random select, base descriptor space
    nhb_rnk,      // CAPI policy, NeighborConfidence select, base space
    full,         // CAPI policy, NeighborConfidence select, all types
    baseline1,    // random type order, charged globally until broke
    baseline2,    // random fully-described node subset
    baseline3,    // Q-learned global descriptor subset
    unbounded_crf // full-mask CRF, no budget
};

const char* variant_name(Variant v);
Variant variant_from_name(const std::string& name); // ConfigError on unknown
bool variant_uses_policy(Variant v);
SelectStrategy variant_strategy(Variant v); // meaningful for policy variants
// Descriptor space a variant may touch; only Full and UnboundedCRF see the
// reserved trailing types.
SubsetMask variant_usable_mask(Variant v, int type_count, int reserved_full_types);

// Budget as absolute units or a fraction of the full per-video descriptor
// cost |V| * sum_d cost_d (all types).
struct BudgetSpec {
    bool fractional = true;
    double fraction = 0.0;
    int units = 0;

    static BudgetSpec of_fraction(double f);
    static BudgetSpec of_units(int u);
    int resolve(int full_cost) const;
    std::string label() const; // "20%" or "614"
};

// "20%" -> fraction, "614" -> units. Anything else is a config error.
BudgetSpec parse_budget(const std::string& text);

// Budget label made filename-safe: "20%" -> "20pct".
std::string budget_file_label(const std::string& budget_label);

struct ExperimentConfig {
    CorpusConfig corpus;     // used when corpus_path is empty
    int video_count = 40;    // first half train, second half test
    std::string corpus_path; // load instead of generating
    std::vector<BudgetSpec> budgets;
    std::vector<Variant> variants;
    std::vector<std::uint64_t> seeds = {1};
    bool weighted = true;
    std::string out_dir; // empty: keep results in memory only
    // Trailing descriptor types reserved for the Full variant; every other
    // variant sees only the first D - reserved types.
    int reserved_full_types = 1;
    int rollouts_random = 5;     // m for Random select policies
    int rollouts_confidence = 1; // m when Select is deterministic
    CapiConfig capi;             // budget/rollouts/seed overridden per sweep
    QLearnConfig qlearn;
    BankHyper bank;
    CrfHyper crf;
};

// Desk-scale defaults: 40 videos of 4x4x6 lattices, L=4, five descriptor
// types with the expensive informative one reserved for Full, budgets
// {20%, 50%, 90%}, every variant, one seed.
ExperimentConfig default_experiment_config();

std::string experiment_config_to_json(const ExperimentConfig& config);
ExperimentConfig experiment_config_from_json(const std::string& text); // DataError
ExperimentConfig load_experiment_config(const std::string& path);

struct ResultRow {
    std::string variant;
    std::string budget; // label; "-" for budget-independent variants
    int budget_units = 0;
    std::vector<double> per_class; // recall per ground-truth class
    double avg = 0.0;              // macro mean over classes present in the test set
    double mean_cost = 0.0;
    double mean_accuracy = 0.0; // Hamming accuracy (weighted flag); not a CSV column
};

// Header: variant,budget,class_0..class_{L-1},avg,cost_spent
std::string results_to_csv(const std::vector<ResultRow>& rows, int label_count);

struct PolicyTrainRecord {
    Variant variant = Variant::nhb_rnk;
    std::string budget;
    std::uint64_t seed = 0;
    CapiResult capi;
};

// iteration,policy_train_acc,rollout_states,elapsed (one row per iteration).
std::string capi_train_log_csv(const CapiResult& res);

struct ExperimentResult {
    int full_cost = 0;
    std::vector<std::string> budget_labels;
    std::vector<int> budget_units;
    std::vector<ResultRow> rows; // config variant order x budget order
    std::vector<PolicyTrainRecord> policy_training;
    // Per policy variant: [budget index] -> traces over seeds x test videos.
    std::map<std::string, std::vector<std::vector<RunTrace>>> traces;
    std::string results_csv;
};

// Trains everything once per config, sweeps budgets and variants over the
// test half, and (when out_dir is set) writes results.csv, per-run traces,
// training logs, serialized policies, and histogram tables.
ExperimentResult run_experiment(const ExperimentConfig& config);

struct DescriptorHistograms {
    std::vector<std::string> budget_labels;
    std::vector<std::vector<long>> type_counts;                // [budget][type]
    std::vector<std::vector<std::vector<long>>> decile_counts; // [budget][decile][type]
};

// (a) per budget: how often each descriptor type was selected;
// (b) within each budget: the same counts split by decile of spent cost.
DescriptorHistograms descriptor_histograms(
    const std::vector<std::vector<RunTrace>>& traces_per_budget,
    const std::vector<std::string>& budget_labels, int type_count);

// budget,type_0..type_{D-1} (one row per budget).
std::string histogram_types_csv(const DescriptorHistograms& h);
// decile,type_0..type_{D-1} (rows 0..9 for one budget).
std::string histogram_deciles_csv(const DescriptorHistograms& h, int budget_index);

} // namespace bcrf
