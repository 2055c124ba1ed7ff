#include "bcrf/budget_engine.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "bcrf/errors.hpp"
#include "bcrf/kernels.hpp"

namespace bcrf {
namespace {

constexpr std::uint64_t kInitialCandidateStream = 0xCA4D1DA7ULL;
constexpr std::uint64_t kSelectStream = 0x5E1EC7ULL;
constexpr std::uint64_t kAlphaStream = 0xA1FA5EEDULL;
constexpr double kCoincidentWeight = 1e6;

double inverse_distance_weight(double dist) {
    return dist > 1.0 / kCoincidentWeight ? 1.0 / dist : kCoincidentWeight;
}

} // namespace

const char* strategy_name(SelectStrategy s) {
    return s == SelectStrategy::random ? "Random" : "NeighborConfidence";
}

SelectStrategy strategy_from_name(const std::string& name) {
    if (name == "Random") return SelectStrategy::random;
    if (name == "NeighborConfidence") return SelectStrategy::neighbor_confidence;
    throw ConfigError("unknown select strategy: " + name +
                      " (expected Random or NeighborConfidence)");
}

std::string trace_to_csv(const RunTrace& trace) {
    std::ostringstream out;
    out << "step,node,action,cost,remaining\n";
    for (const auto& e : trace.entries)
        out << e.step << ',' << e.node << ',' << e.action.name() << ',' << e.cost << ','
            << e.remaining_after << '\n';
    return out.str();
}

int select_next(const InferenceState& state, const SupervoxelGraph& graph,
                SelectStrategy strategy, Rng& rng) {
    if (state.candidates.empty()) throw std::invalid_argument("select_next: empty candidate set");
    if (strategy == SelectStrategy::random)
        return state.candidates[rng.uniform_int(static_cast<int>(state.candidates.size()))];

    // NeighborConfidence: least-confident finished neighborhood first.
    const int L = graph.label_count;
    const double default_priority = 1.0 - 1.0 / L;
    int best = state.candidates.front();
    double best_priority = -1.0;
    for (int i : state.candidates) {
        double sum = 0.0;
        int count = 0;
        for (int j : neighbors(graph, i)) {
            if (!state.finished[j]) continue;
            double maxp = 1.0 / L;
            if (state.computed[j] != 0)
                maxp = *std::max_element(state.distributions[j].begin(),
                                         state.distributions[j].end());
            sum += maxp;
            ++count;
        }
        const double priority = count > 0 ? 1.0 - sum / count : default_priority;
        if (priority > best_priority) {
            best_priority = priority;
            best = i; // candidates ascend, so ties keep the lowest id
        }
    }
    return best;
}

std::vector<std::vector<double>> interpolate_unaries(
    const SupervoxelGraph& graph, std::vector<std::vector<double>> distributions,
    int label_count) {
    const int n = static_cast<int>(graph.nodes.size());
    if (static_cast<int>(distributions.size()) != n)
        throw std::invalid_argument("interpolate_unaries: distribution count mismatch");
    std::vector<char> known(n, 0);
    for (int i = 0; i < n; ++i) known[i] = !distributions[i].empty();

    // Jacobi passes: each empty node averages neighbors known at pass start,
    // so fills advance one ring per pass until no progress remains.
    bool progress = true;
    while (progress) {
        progress = false;
        std::vector<std::pair<int, std::vector<double>>> filled;
        for (int i = 0; i < n; ++i) {
            if (known[i]) continue;
            std::vector<double> acc(label_count, 0.0);
            double weight_sum = 0.0;
            for (int j : neighbors(graph, i)) {
                if (!known[j]) continue;
                const double w =
                    inverse_distance_weight(centroid_distance(graph.nodes[i], graph.nodes[j]));
                kernels::axpy(w, distributions[j].data(), acc.data(), label_count);
                weight_sum += w;
            }
            if (weight_sum == 0.0) continue;
            for (double& v : acc) v /= weight_sum;
            filled.emplace_back(i, std::move(acc));
        }
        for (auto& [i, dist] : filled) {
            distributions[i] = std::move(dist);
            known[i] = 1;
            progress = true;
        }
    }
    for (int i = 0; i < n; ++i)
        if (!known[i]) distributions[i].assign(label_count, 1.0 / label_count);
    return distributions;
}

std::vector<std::vector<double>> compute_distributions(const Video& video,
                                                       const ClassifierBank& bank,
                                                       const std::vector<SubsetMask>& masks) {
    const int n = static_cast<int>(video.graph.nodes.size());
    std::vector<std::vector<double>> dists(n);
    for (int i = 0; i < n; ++i) {
        if (masks[i] == 0) continue;
        auto values = concat_member_values(video.descriptors, i, masks[i]);
        dists[i].resize(bank.label_count());
        bank.predict_into(masks[i], values.data(), dists[i].data());
    }
    return dists;
}

EdgeSims masked_similarities(const Video& video, const ClassifierBank& bank, double sigma,
                             SubsetMask usable, const std::vector<SubsetMask>& masks) {
    const auto& g = video.graph;
    const int L = g.label_count;
    const int D = bank.type_count();
    const double inv_two_sigma_sq = 1.0 / (2.0 * sigma * sigma);
    EdgeSims sims(static_cast<int>(g.edges.size()), L);

    // Squared distances between class means, per type; filled on first use.
    std::vector<std::vector<double>> mean_mean_sq(D);
    auto mean_gap = [&](int d, int ya, int yb) {
        auto& table = mean_mean_sq[d];
        if (table.empty()) {
            table.assign(static_cast<std::size_t>(L) * L, 0.0);
            for (int a = 0; a < L; ++a)
                for (int b = 0; b < L; ++b) {
                    const auto& ma = bank.expected_descriptor(d, a);
                    const auto& mb = bank.expected_descriptor(d, b);
                    table[a * L + b] =
                        kernels::squared_distance(ma.data(), mb.data(), ma.size());
                }
        }
        return table[ya * L + yb];
    };

    std::vector<double> fa(L), fb(L);
    for (std::size_t e = 0; e < g.edges.size(); ++e) {
        auto [a, b] = g.edges[e];
        const SubsetMask in_a = masks[a] & usable;
        const SubsetMask in_b = masks[b] & usable;
        double base = 0.0;
        std::fill(fa.begin(), fa.end(), 0.0);
        std::fill(fb.begin(), fb.end(), 0.0);
        std::vector<int> both_missing;
        for (int d = 0; d < D; ++d) {
            if (!mask_has(usable, d)) continue;
            const int dim = video.descriptors.spec(d).dimension;
            const bool has_a = mask_has(in_a, d);
            const bool has_b = mask_has(in_b, d);
            if (has_a && has_b) {
                base += kernels::squared_distance(video.descriptors.value(a, d),
                                                  video.descriptors.value(b, d), dim);
            } else if (has_a) {
                for (int yb = 0; yb < L; ++yb)
                    fb[yb] += kernels::squared_distance(
                        video.descriptors.value(a, d), bank.expected_descriptor(d, yb).data(),
                        dim);
            } else if (has_b) {
                for (int ya = 0; ya < L; ++ya)
                    fa[ya] += kernels::squared_distance(
                        bank.expected_descriptor(d, ya).data(), video.descriptors.value(b, d),
                        dim);
            } else {
                both_missing.push_back(d);
            }
        }
        const bool label_free = both_missing.empty() &&
                                std::all_of(fa.begin(), fa.end(), [](double v) { return v == 0.0; }) &&
                                std::all_of(fb.begin(), fb.end(), [](double v) { return v == 0.0; });
        if (label_free) {
            sims.fill_edge(static_cast<int>(e), std::exp(-base * inv_two_sigma_sq));
            continue;
        }
        for (int ya = 0; ya < L; ++ya)
            for (int yb = 0; yb < L; ++yb) {
                double total = base + fa[ya] + fb[yb];
                for (int d : both_missing) total += mean_gap(d, ya, yb);
                sims.at(static_cast<int>(e), ya, yb) = std::exp(-total * inv_two_sigma_sq);
            }
    }
    return sims;
}

std::vector<int> finish_from_masks(const Video& video, const ClassifierBank& bank,
                                   const CRFModel& model, SubsetMask usable,
                                   const std::vector<SubsetMask>& masks,
                                   std::uint64_t alpha_seed, MoveLog* log) {
    auto dists = interpolate_unaries(video.graph,
                                     compute_distributions(video, bank, masks),
                                     video.graph.label_count);
    EdgeSims sims = masked_similarities(video, bank, model.sigma, usable, masks);
    auto init = unary_argmax(dists);
    return alpha_expansion(model, video.graph, dists, sims, std::move(init), alpha_seed, log);
}

std::vector<int> unbounded_inference(const Video& video, const ClassifierBank& bank,
                                     const CRFModel& model, std::uint64_t seed) {
    const SubsetMask full = full_mask(bank.type_count());
    std::vector<SubsetMask> masks(video.graph.nodes.size(), full);
    return finish_from_masks(video, bank, model, full, masks,
                             derive_seed(seed, kAlphaStream));
}

BudgetedRun::BudgetedRun(const RunEnv& env, int budget, std::uint64_t seed)
    : env_(env), budget_(budget), seed_(seed),
      select_rng_(derive_seed(seed, kSelectStream)) {
    if (!env.video || !env.bank || !env.model)
        throw std::invalid_argument("BudgetedRun: null environment");
    if (budget < 0) throw ConfigError("budget must be >= 0");
    const SubsetMask bank_full = full_mask(env.bank->type_count());
    if (env.usable == 0 || (env.usable & ~bank_full) != 0)
        throw ConfigError("usable descriptor mask outside the bank's type range");
    const auto& g = env.video->graph;
    const int n = static_cast<int>(g.nodes.size());
    if (n == 0) throw DataError("BudgetedRun: empty graph");
    if (g.label_count != env.model->label_count || g.label_count != env.bank->label_count())
        throw DataError("BudgetedRun: label count mismatch between graph, bank and model");

    state_.remaining = budget;
    state_.finished.assign(n, 0);
    state_.computed.assign(n, 0);
    state_.distributions.resize(n);

    const int k = std::max(1, (n + 19) / 20); // ceil(0.05 n)
    Rng init_rng(derive_seed(seed, kInitialCandidateStream));
    auto chosen = init_rng.sample_without_replacement(n, k);
    std::sort(chosen.begin(), chosen.end());
    state_.candidates = std::move(chosen);
}

void BudgetedRun::reseed(std::uint64_t seed) {
    seed_ = seed;
    select_rng_ = Rng(derive_seed(seed, kSelectStream));
}

int BudgetedRun::select() {
    if (finished_run_) throw std::logic_error("BudgetedRun: already finished");
    state_.current = select_next(state_, env_.video->graph, env_.strategy, select_rng_);
    return state_.current;
}

std::vector<Action> BudgetedRun::allowed() const {
    const int i = state_.current;
    if (i < 0) throw std::logic_error("BudgetedRun: select() before allowed()");
    std::vector<Action> actions;
    for (int d = 0; d < env_.bank->type_count(); ++d) {
        if (!mask_has(env_.usable, d) || mask_has(state_.computed[i], d)) continue;
        if (env_.video->descriptors.spec(d).cost_units > state_.remaining) continue;
        actions.push_back(Action::descriptor(d));
    }
    actions.push_back(Action::finished());
    return actions;
}

PolicyFeatures BudgetedRun::features() const {
    return compute_features(state_, env_.video->graph, env_.bank->type_count(),
                            env_.bank->label_count());
}

void BudgetedRun::apply(const Action& a) {
    const int i = state_.current;
    if (finished_run_) throw std::logic_error("BudgetedRun: already finished");
    if (i < 0) throw std::logic_error("BudgetedRun: select() before apply()");
    int cost = 0;
    if (a.is_finished()) {
        state_.remove_candidate(i);
        state_.finished[i] = 1;
        for (int j : neighbors(env_.video->graph, i))
            if (!state_.finished[j]) state_.add_candidate(j);
    } else {
        const int d = a.type_id();
        if (!mask_has(env_.usable, d))
            throw std::invalid_argument("apply: descriptor type outside the usable space");
        if (mask_has(state_.computed[i], d))
            throw std::invalid_argument("apply: descriptor already computed for this node");
        cost = env_.video->descriptors.spec(d).cost_units;
        if (cost > state_.remaining) throw std::invalid_argument("apply: action unaffordable");
        state_.remaining -= cost;
        state_.computed[i] |= 1u << d;
        auto values = concat_member_values(env_.video->descriptors, i, state_.computed[i]);
        state_.distributions[i].resize(env_.bank->label_count());
        env_.bank->predict_into(state_.computed[i], values.data(),
                                state_.distributions[i].data());
    }
    trace_.entries.push_back(TraceEntry{step_++, i, a, cost, state_.remaining});
}

RunTrace BudgetedRun::finish(MoveLog* log) {
    if (finished_run_) throw std::logic_error("BudgetedRun: finish() called twice");
    finished_run_ = true;
    trace_.labeling = finish_from_masks(*env_.video, *env_.bank, *env_.model, env_.usable,
                                        state_.computed, derive_seed(seed_, kAlphaStream), log);
    return std::move(trace_);
}

void run_to_completion(BudgetedRun& run, const PolicyWeights& weights) {
    while (!run.done()) {
        run.select();
        run.apply(act(weights, run.features(), run.allowed()));
    }
}

RunTrace run_budgeted_inference(const RunEnv& env, const PolicyWeights& weights, int budget,
                                std::uint64_t seed) {
    BudgetedRun run(env, budget, seed);
    run_to_completion(run, weights);
    return run.finish();
}

RunTrace run_exhaustive(const RunEnv& env, int budget, std::uint64_t seed) {
    BudgetedRun run(env, budget, seed);
    while (!run.done()) {
        run.select();
        auto actions = run.allowed();
        // Cheapest affordable un-run descriptor; allowed() lists types in
        // ascending id order so the first minimum wins ties.
        const Action* pick = nullptr;
        int best_cost = 0;
        for (const auto& a : actions) {
            if (a.is_finished()) continue;
            const int c = env.video->descriptors.spec(a.type_id()).cost_units;
            if (!pick || c < best_cost) {
                pick = &a;
                best_cost = c;
            }
        }
        run.apply(pick ? *pick : Action::finished());
    }
    return run.finish();
}

} // namespace bcrf
