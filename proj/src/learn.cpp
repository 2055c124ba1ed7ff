#include "bcrf/learn.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

#include "bcrf/errors.hpp"
#include "bcrf/kernels.hpp"
#include "bcrf/rng.hpp"

namespace bcrf {

namespace {

constexpr std::uint64_t kPi0Stream = 0x1417ULL;
constexpr std::uint64_t kEvalStream = 0xE0A1ULL;
constexpr std::uint64_t kIterStream = 0xCA91ULL;
constexpr std::uint64_t kCollectStream = 0xD3C1ULL;
constexpr std::uint64_t kSubsampleStream = 0x5AB5ULL;
constexpr std::uint64_t kRolloutStream = 0x4011ULL;
constexpr std::uint64_t kRankerStream = 0x4A2CULL;
constexpr std::uint64_t kQLearnStream = 0x03A4ULL;
constexpr std::uint64_t kQRewardStream = 0x43A4ULL;
constexpr std::uint64_t kBaseline1Stream = 0xBA5E1ULL;
constexpr std::uint64_t kBaseline2Stream = 0xBA5E2ULL;
constexpr std::uint64_t kBaselineAlphaStream = 0xBA5EA1FAULL;

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<int> usable_types(const Video& video, SubsetMask usable) {
    std::vector<int> out;
    for (int t = 0; t < video.descriptors.type_count(); ++t)
        if (mask_has(usable, t)) out.push_back(t);
    return out;
}

BaselineResult finish_baseline(const Video& video, const ClassifierBank& bank,
                               const CRFModel& model, SubsetMask usable,
                               std::vector<SubsetMask> masks, int spent, std::uint64_t seed) {
    BaselineResult res;
    res.labeling = finish_from_masks(video, bank, model, usable, masks,
                                     derive_seed(seed, kBaselineAlphaStream));
    res.masks = std::move(masks);
    res.cost_spent = spent;
    return res;
}

} // namespace

double hamming_accuracy(const std::vector<int>& labeling, const std::vector<int>& truth,
                        const std::vector<int>& voxel_counts, bool weighted) {
    if (labeling.size() != truth.size())
        throw std::invalid_argument("hamming_accuracy: labeling/truth length mismatch");
    if (weighted && voxel_counts.size() != labeling.size())
        throw std::invalid_argument("hamming_accuracy: voxel_counts length mismatch");
    if (labeling.empty()) throw std::invalid_argument("hamming_accuracy: empty labeling");
    double hit = 0.0, mass = 0.0;
    for (std::size_t i = 0; i < labeling.size(); ++i) {
        const double w = weighted ? static_cast<double>(voxel_counts[i]) : 1.0;
        if (labeling[i] == truth[i]) hit += w;
        mass += w;
    }
    return hit / mass;
}

double hamming_accuracy(const std::vector<int>& labeling, const SupervoxelGraph& graph,
                        bool weighted) {
    std::vector<int> truth(graph.nodes.size());
    std::vector<int> voxels(graph.nodes.size());
    for (std::size_t i = 0; i < graph.nodes.size(); ++i) {
        if (!graph.nodes[i].has_label()) throw DataError("hamming_accuracy: unlabeled node");
        truth[i] = graph.nodes[i].true_label;
        voxels[i] = graph.nodes[i].voxel_count;
    }
    return hamming_accuracy(labeling, truth, voxels, weighted);
}

RolloutResult rollout_score(const BudgetedRun& snapshot, const PolicyWeights& policy, int m,
                            std::uint64_t seed, bool weighted) {
    if (m < 1) throw std::invalid_argument("rollout_score: m must be >= 1");
    RolloutResult out;
    out.actions = snapshot.allowed();
    out.means.resize(out.actions.size(), 0.0);
    const SupervoxelGraph& graph = snapshot.env().video->graph;
    for (std::size_t k = 0; k < out.actions.size(); ++k) {
        double total = 0.0;
        for (int s = 0; s < m; ++s) {
            BudgetedRun branch = snapshot;
            branch.reseed(derive_seed(seed, k, static_cast<std::uint64_t>(s)));
            branch.apply(out.actions[k]);
            run_to_completion(branch, policy);
            total += hamming_accuracy(branch.finish().labeling, graph, weighted);
        }
        out.means[k] = total / m;
    }
    std::size_t best = 0;
    for (std::size_t k = 1; k < out.means.size(); ++k)
        if (out.means[k] > out.means[best]) best = k;
    out.chosen = out.actions[best];
    return out;
}

PolicyWeights train_ranker(const CapiTrainingSet& set, int type_count, int label_count,
                           const RankerHyper& hyper, std::uint64_t seed) {
    if (set.empty()) throw std::invalid_argument("train_ranker: empty training set");
    const int dim = policy_feature_dim(type_count, label_count);
    for (const auto& ex : set) {
        if (static_cast<int>(ex.features.size()) != dim)
            throw std::invalid_argument("train_ranker: feature dimension mismatch");
        if (std::find(ex.allowed.begin(), ex.allowed.end(), ex.label) == ex.allowed.end())
            throw DataError("train_ranker: example label outside its allowed set");
    }
    PolicyWeights weights = PolicyWeights::zeros(type_count, label_count);
    Rng rng(derive_seed(seed, kRankerStream));
    std::vector<int> order(set.size());
    std::iota(order.begin(), order.end(), 0);
    for (int epoch = 1; epoch <= hyper.epochs; ++epoch) {
        const double eta = hyper.step0 / std::sqrt(static_cast<double>(epoch));
        const double decay = 1.0 - eta * hyper.lambda;
        rng.shuffle(order);
        for (int idx : order) {
            const CapiExample& ex = set[static_cast<std::size_t>(idx)];
            for (auto& row : weights.w)
                for (double& x : row) x *= decay;
            const double* phi = ex.features.data();
            const int star = ex.label.index(type_count);
            int violator = -1;
            double violator_score = 0.0;
            for (const Action& a : ex.allowed) {
                if (a == ex.label) continue;
                const int row = a.index(type_count);
                const double score = kernels::dot(weights.w[row].data(), phi, dim);
                if (violator < 0 || score > violator_score) {
                    violator = row;
                    violator_score = score;
                }
            }
            if (violator < 0) continue; // label was the only allowed action
            const double star_score = kernels::dot(weights.w[star].data(), phi, dim);
            if (violator_score + 1.0 > star_score) {
                kernels::axpy(eta, phi, weights.w[star].data(), dim);
                kernels::axpy(-eta, phi, weights.w[violator].data(), dim);
            }
        }
    }
    return weights;
}

double mean_policy_accuracy(const PolicyWeights& policy, std::span<const Video> videos,
                            const ClassifierBank& bank, const CRFModel& model, SubsetMask usable,
                            SelectStrategy strategy, int budget, std::uint64_t seed,
                            bool weighted) {
    if (videos.empty()) throw std::invalid_argument("mean_policy_accuracy: no videos");
    double total = 0.0;
    for (std::size_t v = 0; v < videos.size(); ++v) {
        RunEnv env{&videos[v], &bank, &model, usable, strategy};
        auto trace = run_budgeted_inference(env, policy, budget, derive_seed(seed, v));
        total += hamming_accuracy(trace.labeling, videos[v].graph, weighted);
    }
    return total / static_cast<double>(videos.size());
}

CapiTrainingSet collect_capi_examples(const PolicyWeights& policy, std::span<const Video> train,
                                      const ClassifierBank& bank, const CRFModel& model,
                                      SubsetMask usable, SelectStrategy strategy,
                                      const CapiConfig& cfg, std::uint64_t seed,
                                      CapiIterStats* stats) {
    if (train.empty()) throw std::invalid_argument("collect_capi_examples: empty corpus");
    struct Decision {
        BudgetedRun run;
        std::vector<double> features;
        std::vector<Action> allowed;
    };
    std::vector<Decision> decisions;
    for (std::size_t v = 0; v < train.size(); ++v) {
        RunEnv env{&train[v], &bank, &model, usable, strategy};
        BudgetedRun run(env, cfg.budget, derive_seed(seed, kCollectStream, v));
        while (!run.done()) {
            run.select();
            auto allowed = run.allowed();
            auto feats = run.features();
            decisions.push_back({run, feats.values, allowed});
            run.apply(act(policy, feats, allowed));
        }
    }
    std::vector<int> keep(decisions.size());
    std::iota(keep.begin(), keep.end(), 0);
    if (static_cast<int>(decisions.size()) > cfg.state_cap) {
        Rng rng(derive_seed(seed, kSubsampleStream));
        keep = rng.sample_without_replacement(static_cast<int>(decisions.size()), cfg.state_cap);
        std::sort(keep.begin(), keep.end());
    }
    if (stats) {
        stats->states_collected = static_cast<int>(decisions.size());
        stats->states_used = static_cast<int>(keep.size());
    }
    CapiTrainingSet set;
    set.reserve(keep.size());
    for (int idx : keep) {
        Decision& d = decisions[static_cast<std::size_t>(idx)];
        auto scored = rollout_score(d.run, policy, cfg.rollouts,
                                    derive_seed(seed, kRolloutStream, idx), cfg.weighted);
        set.push_back({std::move(d.features), scored.chosen, std::move(d.allowed)});
    }
    return set;
}

std::pair<PolicyWeights, CapiIterStats> capi_iterate(
    const PolicyWeights& policy, std::span<const Video> train, const ClassifierBank& bank,
    const CRFModel& model, SubsetMask usable, SelectStrategy strategy, const CapiConfig& cfg,
    std::uint64_t iter_seed, std::uint64_t eval_seed) {
    const auto t0 = std::chrono::steady_clock::now();
    CapiIterStats stats;
    auto set = collect_capi_examples(policy, train, bank, model, usable, strategy, cfg, iter_seed,
                                     &stats);
    auto fitted = train_ranker(set, bank.type_count(), bank.label_count(), cfg.ranker,
                               derive_seed(iter_seed, kRankerStream));
    stats.old_acc = mean_policy_accuracy(policy, train, bank, model, usable, strategy, cfg.budget,
                                         eval_seed, cfg.weighted);
    stats.new_acc = mean_policy_accuracy(fitted, train, bank, model, usable, strategy, cfg.budget,
                                         eval_seed, cfg.weighted);
    stats.elapsed_sec = seconds_since(t0);
    return {std::move(fitted), stats};
}

CapiResult capi_train(std::span<const Video> train, const ClassifierBank& bank,
                      const CRFModel& model, SubsetMask usable, SelectStrategy strategy,
                      const CapiConfig& cfg) {
    if (cfg.max_iters < 1) throw std::invalid_argument("capi_train: max_iters must be >= 1");
    if (cfg.patience < 1) throw std::invalid_argument("capi_train: patience must be >= 1");
    const std::uint64_t eval_seed = derive_seed(cfg.seed, kEvalStream);
    PolicyWeights current =
        PolicyWeights::random(bank.type_count(), bank.label_count(), derive_seed(cfg.seed, kPi0Stream));
    CapiResult out;
    out.initial_acc = mean_policy_accuracy(current, train, bank, model, usable, strategy,
                                           cfg.budget, eval_seed, cfg.weighted);
    out.policy = current;
    out.best_acc = out.initial_acc;
    int stale = 0;
    for (int t = 0; t < cfg.max_iters; ++t) {
        auto [next, stats] = capi_iterate(current, train, bank, model, usable, strategy, cfg,
                                          derive_seed(cfg.seed, kIterStream, t), eval_seed);
        stats.iteration = t;
        stats.improved = stats.new_acc > out.best_acc + 1e-4;
        if (stats.improved) {
            out.policy = next;
            out.best_acc = stats.new_acc;
            stale = 0;
        } else {
            ++stale;
        }
        out.iterations.push_back(stats);
        out.iterates.push_back(next);
        current = std::move(next);
        if (stale >= cfg.patience) break;
    }
    return out;
}

QLearnResult qlearn_baseline3(std::span<const Video> train, const ClassifierBank& bank,
                              const CRFModel& model, SubsetMask usable, int budget,
                              const QLearnConfig& cfg) {
    if (train.empty()) throw std::invalid_argument("qlearn_baseline3: empty corpus");
    if (cfg.episodes < 1) throw std::invalid_argument("qlearn_baseline3: episodes must be >= 1");
    if (budget < 0) throw ConfigError("qlearn_baseline3: negative budget");
    const int node_count = static_cast<int>(train[0].graph.nodes.size());
    for (const Video& v : train)
        if (static_cast<int>(v.graph.nodes.size()) != node_count)
            throw std::invalid_argument("qlearn_baseline3: node counts differ across videos");
    const int D = bank.type_count();
    const int stop = D;
    const int fdim = D + 2;

    QLearnResult out;
    out.table.type_count = D;
    out.table.w.assign(static_cast<std::size_t>(D + 1), std::vector<double>(fdim, 0.0));

    std::unordered_map<SubsetMask, double> reward_cache;
    auto subset_reward = [&](SubsetMask subset) {
        auto it = reward_cache.find(subset);
        if (it != reward_cache.end()) return it->second;
        double total = 0.0;
        for (std::size_t v = 0; v < train.size(); ++v) {
            std::vector<SubsetMask> masks(train[v].graph.nodes.size(), subset);
            auto labeling = finish_from_masks(train[v], bank, model, usable, masks,
                                              derive_seed(cfg.seed, kQRewardStream, subset * 1024 + v));
            total += hamming_accuracy(labeling, train[v].graph, cfg.weighted);
        }
        const double r = total / static_cast<double>(train.size());
        reward_cache.emplace(subset, r);
        return r;
    };

    auto features = [&](SubsetMask subset, int remaining) {
        std::vector<double> f(fdim, 0.0);
        for (int d = 0; d < D; ++d) f[d] = mask_has(subset, d) ? 1.0 : 0.0;
        f[D] = budget > 0 ? static_cast<double>(remaining) / budget : 0.0;
        f[D + 1] = 1.0;
        return f;
    };
    auto qval = [&](const std::vector<double>& f, int a) {
        return kernels::dot(out.table.w[static_cast<std::size_t>(a)].data(), f.data(), fdim);
    };
    auto valid_actions = [&](SubsetMask subset, int remaining) {
        std::vector<int> acts;
        for (int d = 0; d < D; ++d) {
            if (!mask_has(usable, d) || mask_has(subset, d)) continue;
            if (node_count * train[0].descriptors.spec(d).cost_units <= remaining)
                acts.push_back(d);
        }
        acts.push_back(stop);
        return acts;
    };
    auto greedy = [&](const std::vector<double>& f, const std::vector<int>& acts) {
        int best = acts[0];
        double best_q = qval(f, best);
        for (std::size_t i = 1; i < acts.size(); ++i) {
            const double q = qval(f, acts[i]);
            if (q > best_q) {
                best = acts[i];
                best_q = q;
            }
        }
        return best;
    };

    Rng rng(derive_seed(cfg.seed, kQLearnStream));
    for (int ep = 0; ep < cfg.episodes; ++ep) {
        const double frac =
            cfg.episodes > 1 ? static_cast<double>(ep) / (cfg.episodes - 1) : 1.0;
        const double eps = cfg.eps_hi + frac * (cfg.eps_lo - cfg.eps_hi);
        SubsetMask subset = 0;
        int remaining = budget;
        bool terminal = false;
        while (!terminal) {
            const auto f = features(subset, remaining);
            const auto acts = valid_actions(subset, remaining);
            const int a = rng.uniform() < eps
                              ? acts[static_cast<std::size_t>(rng.uniform_int(
                                    static_cast<int>(acts.size())))]
                              : greedy(f, acts);
            double target;
            if (a == stop) {
                target = subset_reward(subset);
                terminal = true;
            } else {
                const SubsetMask next = subset | (1u << a);
                const int next_remaining =
                    remaining - node_count * train[0].descriptors.spec(a).cost_units;
                const auto f2 = features(next, next_remaining);
                const auto acts2 = valid_actions(next, next_remaining);
                double best2 = qval(f2, acts2[0]);
                for (std::size_t i = 1; i < acts2.size(); ++i)
                    best2 = std::max(best2, qval(f2, acts2[i]));
                target = cfg.gamma * best2;
                subset = next;
                remaining = next_remaining;
            }
            const double delta = target - qval(f, a);
            for (int k = 0; k < fdim; ++k)
                out.table.w[static_cast<std::size_t>(a)][k] += cfg.alpha_lr * delta * f[k];
        }
    }

    SubsetMask subset = 0;
    int remaining = budget;
    while (true) {
        const auto acts = valid_actions(subset, remaining);
        const int a = greedy(features(subset, remaining), acts);
        if (a == stop) break;
        subset |= (1u << a);
        remaining -= node_count * train[0].descriptors.spec(a).cost_units;
    }
    out.subset = subset;
    return out;
}

BaselineResult baseline1(const Video& video, const ClassifierBank& bank, const CRFModel& model,
                         SubsetMask usable, int budget, std::uint64_t seed) {
    if (budget < 0) throw ConfigError("baseline1: negative budget");
    const int n = static_cast<int>(video.graph.nodes.size());
    std::vector<SubsetMask> masks(static_cast<std::size_t>(n), 0);
    auto types = usable_types(video, usable);
    Rng rng(derive_seed(seed, kBaseline1Stream));
    rng.shuffle(types);
    int remaining = budget;
    int spent = 0;
    bool exhausted = false;
    for (int t : types) {
        const int cost = video.descriptors.spec(t).cost_units;
        for (int i = 0; i < n; ++i) {
            if (cost > remaining) {
                exhausted = true;
                break;
            }
            masks[static_cast<std::size_t>(i)] |= (1u << t);
            remaining -= cost;
            spent += cost;
        }
        if (exhausted) break;
    }
    return finish_baseline(video, bank, model, usable, std::move(masks), spent, seed);
}

BaselineResult baseline2(const Video& video, const ClassifierBank& bank, const CRFModel& model,
                         SubsetMask usable, int budget, std::uint64_t seed) {
    if (budget < 0) throw ConfigError("baseline2: negative budget");
    const int n = static_cast<int>(video.graph.nodes.size());
    int full_cost = 0;
    for (int t : usable_types(video, usable)) full_cost += video.descriptors.spec(t).cost_units;
    const int k = full_cost > 0 ? std::min(budget / full_cost, n) : 0;
    std::vector<SubsetMask> masks(static_cast<std::size_t>(n), 0);
    Rng rng(derive_seed(seed, kBaseline2Stream));
    for (int i : rng.sample_without_replacement(n, k)) masks[static_cast<std::size_t>(i)] = usable;
    return finish_baseline(video, bank, model, usable, std::move(masks), k * full_cost, seed);
}

BaselineResult apply_global_subset(const Video& video, const ClassifierBank& bank,
                                   const CRFModel& model, SubsetMask usable, SubsetMask subset,
                                   std::uint64_t seed) {
    const int n = static_cast<int>(video.graph.nodes.size());
    const SubsetMask effective = subset & usable;
    int per_node = 0;
    for (int t : usable_types(video, effective)) per_node += video.descriptors.spec(t).cost_units;
    std::vector<SubsetMask> masks(static_cast<std::size_t>(n), effective);
    return finish_baseline(video, bank, model, usable, std::move(masks), n * per_node, seed);
}

} // namespace bcrf
