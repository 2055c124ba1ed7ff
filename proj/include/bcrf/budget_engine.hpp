#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bcrf/classifier_bank.hpp"
#include "bcrf/crf.hpp"
#include "bcrf/inference_state.hpp"
#include "bcrf/policy.hpp"
#include "bcrf/rng.hpp"
#include "bcrf/svgraph.hpp"

namespace bcrf {

enum class SelectStrategy { random, neighbor_confidence };

const char* strategy_name(SelectStrategy s);
SelectStrategy strategy_from_name(const std::string& name); // ConfigError on unknown

struct TraceEntry {
    int step = 0;
    int node = 0;
    Action action = Action::finished();
    int cost = 0;
    int remaining_after = 0;
};

struct RunTrace {
    std::vector<TraceEntry> entries;
    std::vector<int> labeling;
    double accuracy = -1.0; // filled by callers that hold ground truth
};

// CSV with header step,node,action,cost,remaining.
std::string trace_to_csv(const RunTrace& trace);

// Immutable per-run context. `usable` is the variant's descriptor space:
// the policy may only charge these types and similarity substitution spans
// exactly these types.
struct RunEnv {
    const Video* video = nullptr;
    const ClassifierBank* bank = nullptr;
    const CRFModel* model = nullptr;
    SubsetMask usable = 0;
    SelectStrategy strategy = SelectStrategy::random;
};

// One Alg. 1 episode. Copyable so rollouts can branch from any decision
// point; reseed() gives a branch its own randomness without touching state.
class BudgetedRun {
public:
    BudgetedRun(const RunEnv& env, int budget, std::uint64_t seed);

    const InferenceState& state() const { return state_; }
    const RunEnv& env() const { return env_; }
    int budget() const { return budget_; }
    bool done() const { return state_.candidates.empty(); }

    int select();                        // picks state.current from C
    std::vector<Action> allowed() const; // affordable actions for state.current
    PolicyFeatures features() const;
    void apply(const Action& a);
    void reseed(std::uint64_t seed);

    // Interpolates unaries, runs alpha-expansion, returns the completed trace.
    RunTrace finish(MoveLog* log = nullptr);

private:
    RunEnv env_;
    int budget_ = 0;
    std::uint64_t seed_ = 0;
    Rng select_rng_;
    InferenceState state_;
    RunTrace trace_;
    int step_ = 0;
    bool finished_run_ = false;
};

// Strategy dispatch over the candidate set; Random consumes rng.
int select_next(const InferenceState& state, const SupervoxelGraph& graph,
                SelectStrategy strategy, Rng& rng);

// Per spec: nodes without distributions receive the inverse-centroid-distance
// weighted mean of neighbors' distributions, in Jacobi passes to fixpoint;
// anything still uncovered gets uniform 1/L.
std::vector<std::vector<double>> interpolate_unaries(
    const SupervoxelGraph& graph, std::vector<std::vector<double>> distributions,
    int label_count);

// H(mask_i) per node; empty vector where mask is 0.
std::vector<std::vector<double>> compute_distributions(const Video& video,
                                                       const ClassifierBank& bank,
                                                       const std::vector<SubsetMask>& masks);

// Label-dependent edge similarities: actual descriptors where computed,
// class-mean substitutes (conditioned on the endpoint's hypothesized label)
// where missing, summed over the usable descriptor space.
EdgeSims masked_similarities(const Video& video, const ClassifierBank& bank, double sigma,
                             SubsetMask usable, const std::vector<SubsetMask>& masks);

// Shared final stage for every inference path (budgeted, baselines, unbounded).
std::vector<int> finish_from_masks(const Video& video, const ClassifierBank& bank,
                                   const CRFModel& model, SubsetMask usable,
                                   const std::vector<SubsetMask>& masks,
                                   std::uint64_t alpha_seed, MoveLog* log = nullptr);

// Full-mask CRF inference, bit-compatible with a full-budget exhaustive run
// started from the same seed.
std::vector<int> unbounded_inference(const Video& video, const ClassifierBank& bank,
                                     const CRFModel& model, std::uint64_t seed);

// Drives a run to completion with the linear policy (does not finish()).
void run_to_completion(BudgetedRun& run, const PolicyWeights& weights);

RunTrace run_budgeted_inference(const RunEnv& env, const PolicyWeights& weights, int budget,
                                std::uint64_t seed);

// Reference policy for equivalence checks: always charges the cheapest
// un-run affordable type (ties to the lowest id), FINISHED otherwise.
RunTrace run_exhaustive(const RunEnv& env, int budget, std::uint64_t seed);

} // namespace bcrf
