#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "bcrf/budget_engine.hpp"
#include "bcrf/classifier_bank.hpp"
#include "bcrf/crf.hpp"
#include "bcrf/policy.hpp"
#include "bcrf/svgraph.hpp"

namespace bcrf {

// Fraction of correct labels; weighted divides voxel-count mass instead of
// counting nodes. Lengths must agree (voxel_counts only when weighted).
double hamming_accuracy(const std::vector<int>& labeling, const std::vector<int>& truth,
                        const std::vector<int>& voxel_counts, bool weighted);
// Ground truth and voxel counts taken from the graph's nodes.
double hamming_accuracy(const std::vector<int>& labeling, const SupervoxelGraph& graph,
                        bool weighted);

struct RolloutResult {
    std::vector<Action> actions; // canonical allowed order at the snapshot
    std::vector<double> means;   // per-action mean final accuracy, in [0,1]
    Action chosen = Action::finished();
};

// Monte-Carlo action scoring at a decision point. The snapshot must have a
// selected current node. Simulation s of action k branches with seed
// derive_seed(seed, k, s), applies the action, continues with `policy` to
// budget exhaustion, finishes, and scores against ground truth. chosen is
// the argmax of the means, ties broken by the allowed order.
RolloutResult rollout_score(const BudgetedRun& snapshot, const PolicyWeights& policy, int m,
                            std::uint64_t seed, bool weighted = true);

struct CapiExample {
    std::vector<double> features;
    Action label = Action::finished();
    std::vector<Action> allowed;
};
using CapiTrainingSet = std::vector<CapiExample>;

struct RankerHyper {
    double lambda = 1e-4; // L2 strength
    double step0 = 0.5;   // eta_e = step0 / sqrt(e)
    int epochs = 60;
};

// Multi-class hinge ranker: for each example push w_label . phi ahead of
// every other allowed action by a unit margin (max-violator subgradient).
// An example whose label is outside its allowed set is a data error.
PolicyWeights train_ranker(const CapiTrainingSet& set, int type_count, int label_count,
                           const RankerHyper& hyper, std::uint64_t seed);

struct CapiConfig {
    int budget = 0;
    int rollouts = 1;    // m simulations per action
    int max_iters = 4;
    int patience = 3;    // stop after this many iterations without gain > 1e-4
    int state_cap = 5000;
    bool weighted = true;
    RankerHyper ranker;
    std::uint64_t seed = 1;
};

struct CapiIterStats {
    int iteration = 0;
    double old_acc = 0.0; // incoming policy, mean training accuracy
    double new_acc = 0.0; // fitted policy, same evaluation runs
    int states_collected = 0;
    int states_used = 0; // after the state_cap subsample
    double elapsed_sec = 0.0;
    bool improved = false; // strict gain over best-so-far when this ran
};

struct CapiResult {
    PolicyWeights policy; // best-on-training iterate
    double initial_acc = 0.0;
    double best_acc = 0.0;
    std::vector<CapiIterStats> iterations;
    std::vector<PolicyWeights> iterates; // fitted policy per iteration, aligned with iterations
};

// Mean accuracy of running `policy` once per video (run v seeded
// derive_seed(seed, v)).
double mean_policy_accuracy(const PolicyWeights& policy, std::span<const Video> videos,
                            const ClassifierBank& bank, const CRFModel& model, SubsetMask usable,
                            SelectStrategy strategy, int budget, std::uint64_t seed,
                            bool weighted);

// Step 1 of a CAPI iteration: run `policy` over the training videos, snapshot
// every decision state (capped by a seeded subsample), and label each with
// rollout_score under the same policy.
CapiTrainingSet collect_capi_examples(const PolicyWeights& policy, std::span<const Video> train,
                                      const ClassifierBank& bank, const CRFModel& model,
                                      SubsetMask usable, SelectStrategy strategy,
                                      const CapiConfig& cfg, std::uint64_t seed,
                                      CapiIterStats* stats = nullptr);

// One approximate policy improvement step: collect, fit the ranker, and
// evaluate both policies on the fixed evaluation runs seeded by eval_seed.
std::pair<PolicyWeights, CapiIterStats> capi_iterate(
    const PolicyWeights& policy, std::span<const Video> train, const ClassifierBank& bank,
    const CRFModel& model, SubsetMask usable, SelectStrategy strategy, const CapiConfig& cfg,
    std::uint64_t iter_seed, std::uint64_t eval_seed);

// Full CAPI loop from a seeded random initial policy; keeps the best-on-
// training iterate, stopping at max_iters or `patience` stale iterations.
// All candidates are scored on the same evaluation runs, so
// best_acc >= initial_acc holds exactly.
CapiResult capi_train(std::span<const Video> train, const ClassifierBank& bank,
                      const CRFModel& model, SubsetMask usable, SelectStrategy strategy,
                      const CapiConfig& cfg);

struct QTable {
    int type_count = 0;
    std::vector<std::vector<double>> w; // D+1 actions (STOP last) x (D+2) features
};

struct QLearnConfig {
    int episodes = 5000;
    double alpha_lr = 0.01;
    double gamma = 1.0;
    double eps_hi = 0.5; // annealed linearly down to eps_lo
    double eps_lo = 0.05;
    bool weighted = true;
    std::uint64_t seed = 1;
};

struct QLearnResult {
    QTable table;
    SubsetMask subset = 0; // greedy subset for the trained budget
};

// Baseline3: episodic Q-learning over (global descriptor subset, remaining
// budget). Adding a type charges node_count x per-node cost for the whole
// video; STOP pays the terminal reward (mean training accuracy with the
// subset computed everywhere). Requires a uniform node count across videos.
QLearnResult qlearn_baseline3(std::span<const Video> train, const ClassifierBank& bank,
                              const CRFModel& model, SubsetMask usable, int budget,
                              const QLearnConfig& cfg);

struct BaselineResult {
    std::vector<SubsetMask> masks;
    std::vector<int> labeling;
    int cost_spent = 0;
};

// Random descriptor-type order, charged node by node in id order; the whole
// pass stops at the first unaffordable charge.
BaselineResult baseline1(const Video& video, const ClassifierBank& bank, const CRFModel& model,
                         SubsetMask usable, int budget, std::uint64_t seed);

// Random node subset of maximal size k with k x (full per-node cost) <= B;
// chosen nodes get every usable descriptor.
BaselineResult baseline2(const Video& video, const ClassifierBank& bank, const CRFModel& model,
                         SubsetMask usable, int budget, std::uint64_t seed);

// Computes `subset` on every node (Baseline3 evaluation).
BaselineResult apply_global_subset(const Video& video, const ClassifierBank& bank,
                                   const CRFModel& model, SubsetMask usable, SubsetMask subset,
                                   std::uint64_t seed);

} // namespace bcrf
