#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "bcrf/budget_engine.hpp"
#include "bcrf/classifier_bank.hpp"
#include "bcrf/crf.hpp"
#include "bcrf/errors.hpp"
#include "bcrf/rng.hpp"
#include "bcrf/svgraph.hpp"

using namespace bcrf;

namespace {

struct EngineFixture {
    Corpus corpus;
    ClassifierBank bank;
    CRFModel model;

    EngineFixture() {
        CorpusConfig cfg;
        cfg.grid_x = 3;
        cfg.grid_y = 3;
        cfg.grid_t = 2;
        cfg.label_count = 3;
        cfg.types = {DescriptorTypeConfig{3, 2, 2.0, 0.5}, DescriptorTypeConfig{2, 3, 1.5, 0.5},
                     DescriptorTypeConfig{4, 4, 2.0, 0.5}};
        cfg.smoothing_passes = 1;
        cfg.seed = 314;
        corpus = generate_corpus(cfg, 4);
        bank = train_bank(corpus.videos, BankHyper{});
        model.label_count = 3;
        model.w_u = {1.0, 1.0, 1.0};
        model.w_p = {0.5, 0.0, 0.0, 0.0, 0.5, 0.0, 0.0, 0.0, 0.5};
        model.sigma = 2.0;
    }

    RunEnv env(SelectStrategy strategy = SelectStrategy::random,
               SubsetMask usable = 0b111, int video = 0) const {
        return RunEnv{&corpus.videos[video], &bank, &model, usable, strategy};
    }

    int full_cost(int video = 0) const {
        const auto& d = corpus.videos[video].descriptors;
        return d.node_count() * d.total_cost_per_node();
    }
};

SupervoxelGraph line_graph(const std::vector<double>& xs, int label_count) {
    SupervoxelGraph g;
    g.nodes.resize(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
        g.nodes[i].id = static_cast<int>(i);
        g.nodes[i].cx = xs[i];
    }
    for (std::size_t i = 0; i + 1 < xs.size(); ++i)
        g.edges.emplace_back(static_cast<int>(i), static_cast<int>(i + 1));
    g.label_count = label_count;
    g.finalize();
    return g;
}

} // namespace

TEST_SUITE("budget_engine") {

TEST_CASE("interpolation copies a single computed neighbor") {
    auto g = line_graph({0.0, 1.0}, 2);
    std::vector<std::vector<double>> dists(2);
    dists[0] = {0.8, 0.2};
    auto full = interpolate_unaries(g, dists, 2);
    CHECK(full[1] == std::vector<double>{0.8, 0.2});
    CHECK(full[0] == std::vector<double>{0.8, 0.2});
}

TEST_CASE("interpolation reproduces the hand-computed weighted mean") {
    // Node 1 sits between computed nodes at distances 1 and 3.
    auto g = line_graph({0.0, 1.0, 4.0}, 2);
    std::vector<std::vector<double>> dists(3);
    dists[0] = {1.0, 0.0};
    dists[2] = {0.0, 1.0};
    auto full = interpolate_unaries(g, dists, 2);
    CHECK(full[1][0] == doctest::Approx(0.75));
    CHECK(full[1][1] == doctest::Approx(0.25));
}

TEST_CASE("interpolation falls back to uniform when nothing is computed") {
    auto g = line_graph({0.0, 1.0, 2.0}, 4);
    auto full = interpolate_unaries(g, std::vector<std::vector<double>>(3), 4);
    for (const auto& d : full)
        for (double v : d) CHECK(v == doctest::Approx(0.25));
}

TEST_CASE("interpolation fills chains inward and keeps distributions valid") {
    auto g = line_graph({0.0, 1.0, 2.0, 3.0, 4.0}, 3);
    std::vector<std::vector<double>> dists(5);
    dists[0] = {0.6, 0.3, 0.1};
    auto full = interpolate_unaries(g, dists, 3);
    for (const auto& d : full) {
        REQUIRE(d.size() == 3);
        double total = 0.0;
        for (double v : d) {
            CHECK(v >= 0.0);
            total += v;
        }
        CHECK(total == doctest::Approx(1.0));
    }
    // Everything is downstream of node 0 on a chain.
    for (int i = 1; i < 5; ++i) CHECK(full[i][0] == doctest::Approx(0.6));
}

TEST_CASE("coincident centroids use the capped weight instead of dividing by zero") {
    auto g = line_graph({0.0, 0.0, 5.0}, 2); // nodes 0 and 1 coincide
    std::vector<std::vector<double>> dists(3);
    dists[0] = {1.0, 0.0};
    dists[2] = {0.0, 1.0};
    auto full = interpolate_unaries(g, dists, 2);
    // Neighbor at distance 0 (weight 1e6) dwarfs the one at distance 5.
    CHECK(full[1][0] > 0.999);
    CHECK(full[1][0] < 1.0 + 1e-12);
}

TEST_CASE("select_next honours strategy contracts") {
    EngineFixture f;
    const auto& g = f.corpus.videos[0].graph;
    const int n = static_cast<int>(g.nodes.size());
    InferenceState s;
    s.candidates = {5};
    s.finished.assign(n, 0);
    s.computed.assign(n, 0);
    s.distributions.resize(n);
    Rng rng(1);
    CHECK(select_next(s, g, SelectStrategy::random, rng) == 5);
    CHECK(select_next(s, g, SelectStrategy::neighbor_confidence, rng) == 5);

    s.candidates.clear();
    CHECK_THROWS_AS(select_next(s, g, SelectStrategy::random, rng), std::invalid_argument);

    // Node with the least-confident finished neighborhood wins.
    InferenceState t;
    t.candidates = {0, 2};
    t.finished.assign(n, 0);
    t.computed.assign(n, 0);
    t.distributions.resize(n);
    auto pick_exclusive = [&](int node, int other) {
        auto taken = neighbors(g, other);
        for (int nb : neighbors(g, node))
            if (nb != other && std::find(taken.begin(), taken.end(), nb) == taken.end())
                return nb;
        REQUIRE(false);
        return -1;
    };
    const int nbr0 = pick_exclusive(0, 2);
    const int nbr2 = pick_exclusive(2, 0);
    t.finished[nbr0] = 1;
    t.computed[nbr0] = 1;
    t.distributions[nbr0] = {0.99, 0.005, 0.005};
    t.finished[nbr2] = 1;
    t.computed[nbr2] = 1;
    t.distributions[nbr2] = {0.5, 0.25, 0.25};
    CHECK(select_next(t, g, SelectStrategy::neighbor_confidence, rng) == 2);

    // Random selection is reproducible for a fixed seed.
    InferenceState u;
    u.candidates = {1, 3, 7, 9};
    u.finished.assign(n, 0);
    u.computed.assign(n, 0);
    u.distributions.resize(n);
    Rng r1(77), r2(77);
    for (int i = 0; i < 10; ++i)
        CHECK(select_next(u, g, SelectStrategy::random, r1) ==
              select_next(u, g, SelectStrategy::random, r2));
}

TEST_CASE("strategy names round trip and reject junk") {
    CHECK(strategy_from_name("Random") == SelectStrategy::random);
    CHECK(strategy_from_name("NeighborConfidence") == SelectStrategy::neighbor_confidence);
    CHECK(std::string(strategy_name(SelectStrategy::random)) == "Random");
    CHECK_THROWS_AS(strategy_from_name("Greedy"), ConfigError);
}

TEST_CASE("zero budget drains to all-finished with zero cost") {
    EngineFixture f;
    auto trace = run_budgeted_inference(f.env(), PolicyWeights::random(3, 3, 4), 0, 9);
    int cost = 0;
    for (const auto& e : trace.entries) {
        cost += e.cost;
        CHECK(e.action.is_finished());
    }
    CHECK(cost == 0);
    CHECK(trace.entries.size() == f.corpus.videos[0].graph.nodes.size());
    CHECK(trace.labeling.size() == 18);
    for (int y : trace.labeling) {
        CHECK(y >= 0);
        CHECK(y < 3);
    }
}

TEST_CASE("negative budget and bad usable masks are config errors") {
    EngineFixture f;
    CHECK_THROWS_AS(BudgetedRun(f.env(), -1, 1), ConfigError);
    CHECK_THROWS_AS(BudgetedRun(f.env(SelectStrategy::random, 0), 5, 1), ConfigError);
    CHECK_THROWS_AS(BudgetedRun(f.env(SelectStrategy::random, 0b1000), 5, 1), ConfigError);
}

TEST_CASE("budget safety and set discipline hold across random runs") {
    EngineFixture f;
    Rng rng(55);
    for (int trial = 0; trial < 30; ++trial) {
        const int B = rng.uniform_int(f.full_cost() + 20);
        const auto strategy =
            trial % 2 == 0 ? SelectStrategy::random : SelectStrategy::neighbor_confidence;
        BudgetedRun run(f.env(strategy, 0b111, trial % 4), B, derive_seed(100, trial));
        auto weights = PolicyWeights::random(3, 3, derive_seed(7, trial));
        int spent = 0;
        int prev_remaining = B;
        while (!run.done()) {
            run.select();
            auto acts = run.allowed();
            CHECK(acts.back().is_finished());
            auto a = act(weights, run.features(), acts);
            if (!a.is_finished()) {
                const int c = f.corpus.videos[trial % 4].descriptors.spec(a.type_id()).cost_units;
                CHECK(c <= run.state().remaining);
                spent += c;
            }
            run.apply(a);
            CHECK(run.state().remaining <= prev_remaining);
            prev_remaining = run.state().remaining;
            // C and F stay disjoint.
            for (int c : run.state().candidates) CHECK_FALSE(run.state().finished[c]);
        }
        CHECK(spent <= B);
        auto trace = run.finish();
        int traced_cost = 0;
        for (const auto& e : trace.entries) traced_cost += e.cost;
        CHECK(traced_cost == spent);
        CHECK(trace.labeling.size() == 18);
    }
}

TEST_CASE("identical seeds give identical traces and labelings") {
    EngineFixture f;
    auto weights = PolicyWeights::random(3, 3, 8);
    auto a = run_budgeted_inference(f.env(), weights, 37, 123);
    auto b = run_budgeted_inference(f.env(), weights, 37, 123);
    REQUIRE(a.entries.size() == b.entries.size());
    for (std::size_t i = 0; i < a.entries.size(); ++i) {
        CHECK(a.entries[i].node == b.entries[i].node);
        CHECK(a.entries[i].action == b.entries[i].action);
        CHECK(a.entries[i].cost == b.entries[i].cost);
        CHECK(a.entries[i].remaining_after == b.entries[i].remaining_after);
    }
    CHECK(a.labeling == b.labeling);

    auto c = run_budgeted_inference(f.env(), weights, 37, 124);
    bool same = a.entries.size() == c.entries.size();
    if (same)
        for (std::size_t i = 0; i < a.entries.size(); ++i)
            same = same && a.entries[i].node == c.entries[i].node &&
                   a.entries[i].action == c.entries[i].action;
    CHECK_FALSE(same);
}

TEST_CASE("full-budget exhaustive runs equal unbounded inference bit for bit") {
    EngineFixture f;
    for (int v = 0; v < 4; ++v) {
        const std::uint64_t seed = derive_seed(9000, v);
        auto trace = run_exhaustive(f.env(SelectStrategy::random, 0b111, v),
                                    f.full_cost(v), seed);
        auto reference = unbounded_inference(f.corpus.videos[v], f.bank, f.model, seed);
        CHECK(trace.labeling == reference);
        int spent = 0;
        for (const auto& e : trace.entries) spent += e.cost;
        CHECK(spent == f.full_cost(v));
    }
}

TEST_CASE("apply rejects double charges and unusable types") {
    EngineFixture f;
    BudgetedRun run(f.env(SelectStrategy::random, 0b011), 100, 5);
    run.select();
    run.apply(Action::descriptor(0));
    run.select();
    const int node = run.state().current;
    if (mask_has(run.state().computed[node], 0))
        CHECK_THROWS_AS(run.apply(Action::descriptor(0)), std::invalid_argument);
    CHECK_THROWS_AS(run.apply(Action::descriptor(2)), std::invalid_argument);
}

TEST_CASE("masked similarities match direct computation") {
    EngineFixture f;
    const auto& video = f.corpus.videos[0];
    const int n = static_cast<int>(video.graph.nodes.size());
    const double sigma = 1.7;

    // Full masks: plain Gaussian similarity of concatenated descriptors.
    std::vector<SubsetMask> full(n, 0b111);
    auto sims = masked_similarities(video, f.bank, sigma, 0b111, full);
    for (std::size_t e = 0; e < video.graph.edges.size(); ++e) {
        auto [a, b] = video.graph.edges[e];
        auto da = concat_member_values(video.descriptors, a, 0b111);
        auto db = concat_member_values(video.descriptors, b, 0b111);
        const double expect = similarity(da, db, sigma);
        for (int ya = 0; ya < 3; ++ya)
            for (int yb = 0; yb < 3; ++yb)
                CHECK(sims.at(static_cast<int>(e), ya, yb) ==
                      doctest::Approx(expect).epsilon(1e-12));
    }

    // Empty masks: similarity between class means, conditioned on labels.
    std::vector<SubsetMask> none(n, 0);
    auto sims0 = masked_similarities(video, f.bank, sigma, 0b111, none);
    auto [a, b] = video.graph.edges[0];
    for (int ya = 0; ya < 3; ++ya)
        for (int yb = 0; yb < 3; ++yb) {
            double sq = 0.0;
            for (int d = 0; d < 3; ++d) {
                const auto& ma = f.bank.expected_descriptor(d, ya);
                const auto& mb = f.bank.expected_descriptor(d, yb);
                for (std::size_t k = 0; k < ma.size(); ++k)
                    sq += (ma[k] - mb[k]) * (ma[k] - mb[k]);
            }
            CHECK(sims0.at(0, ya, yb) ==
                  doctest::Approx(std::exp(-sq / (2 * sigma * sigma))).epsilon(1e-10));
            CHECK(sims0.at(0, ya, ya) == doctest::Approx(1.0)); // zero distance to itself
        }

    // Mixed: node a computed, node b not -> label-dependent in yb only.
    std::vector<SubsetMask> mixed(n, 0);
    mixed[a] = 0b111;
    auto simsm = masked_similarities(video, f.bank, sigma, 0b111, mixed);
    for (int ya = 0; ya < 3; ++ya) {
        double sq = 0.0;
        for (int d = 0; d < 3; ++d) {
            const auto& mb = f.bank.expected_descriptor(d, 1);
            const double* va = video.descriptors.value(a, d);
            for (std::size_t k = 0; k < mb.size(); ++k)
                sq += (va[k] - mb[k]) * (va[k] - mb[k]);
        }
        CHECK(simsm.at(0, ya, 1) ==
              doctest::Approx(std::exp(-sq / (2 * sigma * sigma))).epsilon(1e-10));
    }
}

TEST_CASE("trace csv has the declared schema") {
    EngineFixture f;
    auto trace = run_budgeted_inference(f.env(), PolicyWeights::random(3, 3, 2), 12, 1);
    const std::string csv = trace_to_csv(trace);
    CHECK(csv.rfind("step,node,action,cost,remaining\n", 0) == 0);
    CHECK(csv.find("FINISHED") != std::string::npos);
    std::size_t lines = 0;
    for (char ch : csv) lines += ch == '\n';
    CHECK(lines == trace.entries.size() + 1);
}

TEST_CASE("rollout-style cloning: branches diverge, original is untouched") {
    EngineFixture f;
    auto weights = PolicyWeights::random(3, 3, 3);
    BudgetedRun run(f.env(), 30, 42);
    for (int step = 0; step < 4 && !run.done(); ++step) {
        run.select();
        run.apply(act(weights, run.features(), run.allowed()));
    }
    REQUIRE_FALSE(run.done());
    run.select();
    const auto snapshot_state = run.state();

    BudgetedRun branch_a = run;
    branch_a.reseed(1001);
    branch_a.apply(Action::finished());
    run_to_completion(branch_a, weights);
    auto trace_a = branch_a.finish();

    BudgetedRun branch_b = run;
    branch_b.reseed(1002);
    auto acts = branch_b.allowed();
    branch_b.apply(acts.front());
    run_to_completion(branch_b, weights);
    auto trace_b = branch_b.finish();

    CHECK(trace_a.labeling.size() == trace_b.labeling.size());
    CHECK(run.state().candidates == snapshot_state.candidates);
    CHECK(run.state().remaining == snapshot_state.remaining);

    // The original run can still proceed normally after branching.
    run.apply(act(weights, run.features(), run.allowed()));
    run_to_completion(run, weights);
    auto trace = run.finish();
    CHECK(trace.labeling.size() == 18);
}

} // TEST_SUITE
