#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <vector>

#include "bcrf/classifier_bank.hpp"
#include "bcrf/crf.hpp"
#include "bcrf/errors.hpp"
#include "bcrf/rng.hpp"
#include "bcrf/svgraph.hpp"

using namespace bcrf;

namespace {

SupervoxelGraph make_graph(int n, std::vector<std::pair<int, int>> edges, int label_count) {
    SupervoxelGraph g;
    g.nodes.resize(n);
    for (int i = 0; i < n; ++i) {
        g.nodes[i].id = i;
        g.nodes[i].cx = i;
    }
    g.edges = std::move(edges);
    g.label_count = label_count;
    g.finalize();
    return g;
}

struct RandomInstance {
    SupervoxelGraph graph;
    CRFModel model;
    std::vector<std::vector<double>> dists;
    std::vector<std::vector<double>> descriptors; // raw vectors feeding the sims
    EdgeSims sims;
};

RandomInstance random_instance(Rng& rng, int n, int L, bool potts) {
    RandomInstance inst;
    std::vector<std::pair<int, int>> edges;
    for (int i = 0; i + 1 < n; ++i) edges.emplace_back(i, i + 1); // path backbone
    for (int i = 0; i + 2 < n; i += 2) edges.emplace_back(i, i + 2);
    inst.graph = make_graph(n, std::move(edges), L);

    inst.model.label_count = L;
    inst.model.sigma = 0.8 + rng.uniform();
    inst.model.w_u.resize(L);
    inst.model.w_p.assign(static_cast<std::size_t>(L) * L, 0.0);
    for (double& w : inst.model.w_u) w = potts ? 1.0 : rng.normal();
    for (int a = 0; a < L; ++a)
        for (int b = 0; b < L; ++b)
            inst.model.w_p[a * L + b] = potts ? (a == b ? 0.2 + 0.8 * rng.uniform() : 0.0)
                                              : rng.normal();

    inst.dists.resize(n);
    inst.descriptors.resize(n);
    for (int i = 0; i < n; ++i) {
        inst.dists[i].resize(L);
        double z = 0.0;
        for (double& v : inst.dists[i]) z += (v = rng.uniform() + 1e-3);
        for (double& v : inst.dists[i]) v /= z;
        inst.descriptors[i] = {rng.normal(), rng.normal(), rng.normal()};
    }
    inst.sims = EdgeSims(static_cast<int>(inst.graph.edges.size()), L);
    for (std::size_t e = 0; e < inst.graph.edges.size(); ++e) {
        auto [a, b] = inst.graph.edges[e];
        inst.sims.fill_edge(static_cast<int>(e),
                            similarity(inst.descriptors[a], inst.descriptors[b],
                                       inst.model.sigma));
    }
    return inst;
}

// Term-by-term recomputation through the feature constructors, kept separate
// from crf_score's own evaluation path.
double oracle_score(const RandomInstance& inst, const std::vector<int>& y) {
    const int L = inst.model.label_count;
    double total = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        auto psi = unary_feature(inst.dists[i], y[i]);
        for (int l = 0; l < L; ++l) total += inst.model.w_u[l] * psi[l];
    }
    for (auto [a, b] : inst.graph.edges) {
        auto psi = pairwise_feature(inst.descriptors[a], inst.descriptors[b], y[a], y[b], L,
                                    inst.model.sigma);
        for (int p = 0; p < L * L; ++p) total += inst.model.w_p[p] * psi[p];
    }
    return total;
}

void enumerate_rec(const RandomInstance& inst, std::vector<int>& y, std::size_t pos,
                   std::vector<int>& best, double& best_score) {
    if (pos == y.size()) {
        const double s = oracle_score(inst, y);
        if (s > best_score) {
            best_score = s;
            best = y;
        }
        return;
    }
    for (int l = 0; l < inst.model.label_count; ++l) {
        y[pos] = l;
        enumerate_rec(inst, y, pos + 1, best, best_score);
    }
}

} // namespace

TEST_SUITE("crf") {

TEST_CASE("unary_feature is one-hot scaled by the distribution") {
    auto psi = unary_feature({0.7, 0.2, 0.1}, 0);
    CHECK(psi == std::vector<double>{0.7, 0.0, 0.0});

    auto uniform = unary_feature({0.25, 0.25, 0.25, 0.25}, 2);
    CHECK(uniform == std::vector<double>{0.0, 0.0, 0.25, 0.0});

    double total = 0.0;
    for (int y = 0; y < 3; ++y) total += unary_feature({0.7, 0.2, 0.1}, y)[y];
    CHECK(total == doctest::Approx(1.0));

    CHECK_THROWS_AS(unary_feature({0.5, 0.5}, 2), std::invalid_argument);
}

TEST_CASE("pairwise_feature holds a single Gaussian similarity entry") {
    std::vector<double> d{1.0, 2.0};
    auto psi = pairwise_feature(d, d, 1, 0, 2, 1.0);
    CHECK(psi == std::vector<double>{0.0, 0.0, 1.0, 0.0}); // index 1*2+0

    std::vector<double> a{0.0, 0.0}, b{1.0, 1.0}; // squared distance 2
    auto far = pairwise_feature(a, b, 0, 1, 2, 1.0);
    CHECK(far[1] == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
    int nonzero = 0;
    for (double v : far) nonzero += v != 0.0;
    CHECK(nonzero == 1);
    CHECK(far[1] > 0.0);
    CHECK(far[1] <= 1.0);

    Rng rng(5);
    double prev = 1.0;
    for (double scale : {0.5, 1.0, 2.0, 4.0}) {
        std::vector<double> d2{scale, 0.0};
        const double s = similarity(a, d2, 1.0);
        CHECK(s < prev); // monotone decreasing in distance
        prev = s;
    }
    CHECK_THROWS_AS(similarity(std::vector<double>{1.0}, std::vector<double>{1.0, 2.0}, 1.0),
                    std::invalid_argument);
}

TEST_CASE("crf_score reproduces the worked two-node example") {
    auto g = make_graph(2, {{0, 1}}, 2);
    CRFModel m;
    m.label_count = 2;
    m.w_u = {1.0, 1.0};
    m.w_p = {0.5, -0.5, -0.5, 0.5};
    std::vector<std::vector<double>> H{{0.8, 0.2}, {0.6, 0.4}};
    EdgeSims sims(1, 2);
    sims.fill_edge(0, 1.0);
    CHECK(crf_score(m, g, H, sims, {0, 0}) == doctest::Approx(1.9));
    CHECK(crf_score(m, g, H, sims, {0, 1}) == doctest::Approx(0.8 + 0.4 - 0.5));
    CHECK_THROWS_AS(crf_score(m, g, H, sims, {0}), std::invalid_argument);
}

TEST_CASE("crf_score matches term-by-term oracle on 20 random instances") {
    Rng rng(21);
    for (int t = 0; t < 20; ++t) {
        auto inst = random_instance(rng, 5, 3, false);
        std::vector<int> y(5);
        for (int& v : y) v = rng.uniform_int(3);
        CHECK(crf_score(inst.model, inst.graph, inst.dists, inst.sims, y) ==
              doctest::Approx(oracle_score(inst, y)).epsilon(1e-11));
    }
}

TEST_CASE("zero pairwise weights reduce the score to the unary sum") {
    Rng rng(31);
    auto inst = random_instance(rng, 6, 3, false);
    std::fill(inst.model.w_p.begin(), inst.model.w_p.end(), 0.0);
    std::vector<int> y{2, 0, 1, 1, 0, 2};
    double unary_sum = 0.0;
    for (int i = 0; i < 6; ++i) unary_sum += inst.model.w_u[y[i]] * inst.dists[i][y[i]];
    CHECK(crf_score(inst.model, inst.graph, inst.dists, inst.sims, y) ==
          doctest::Approx(unary_sum));
}

TEST_CASE("single-flip score deltas decompose locally") {
    Rng rng(47);
    auto inst = random_instance(rng, 7, 3, false);
    std::vector<int> y(7);
    for (int& v : y) v = rng.uniform_int(3);
    for (int trial = 0; trial < 10; ++trial) {
        const int i = rng.uniform_int(7);
        const int to = rng.uniform_int(3);
        auto flipped = y;
        flipped[i] = to;
        double expect = inst.model.w_u[to] * inst.dists[i][to] -
                        inst.model.w_u[y[i]] * inst.dists[i][y[i]];
        for (std::size_t e = 0; e < inst.graph.edges.size(); ++e) {
            auto [a, b] = inst.graph.edges[e];
            if (a != i && b != i) continue;
            const int L = 3;
            expect += inst.model.w_p[flipped[a] * L + flipped[b]] *
                          inst.sims.at(static_cast<int>(e), flipped[a], flipped[b]) -
                      inst.model.w_p[y[a] * L + y[b]] *
                          inst.sims.at(static_cast<int>(e), y[a], y[b]);
        }
        const double got = crf_score(inst.model, inst.graph, inst.dists, inst.sims, flipped) -
                           crf_score(inst.model, inst.graph, inst.dists, inst.sims, y);
        CHECK(got == doctest::Approx(expect).epsilon(1e-9));
    }
}

TEST_CASE("alpha_expansion with zero pairwise weights returns per-node argmax") {
    Rng rng(8);
    auto inst = random_instance(rng, 6, 3, false);
    std::fill(inst.model.w_p.begin(), inst.model.w_p.end(), 0.0);
    std::fill(inst.model.w_u.begin(), inst.model.w_u.end(), 1.0);
    std::vector<int> init(6, 2);
    auto got = alpha_expansion(inst.model, inst.graph, inst.dists, inst.sims, init, 3);
    CHECK(got == unary_argmax(inst.dists));
}

TEST_CASE("alpha_expansion traces are monotone and dominated by exact_map") {
    Rng rng(99);
    for (int t = 0; t < 10; ++t) {
        auto inst = random_instance(rng, 6, 3, t % 2 == 0);
        MoveLog log;
        auto init = unary_argmax(inst.dists);
        auto got = alpha_expansion(inst.model, inst.graph, inst.dists, inst.sims, init,
                                   derive_seed(7, t), &log);
        double prev = log.initial_score;
        for (const auto& m : log.moves) {
            CHECK(m.score_after >= prev);
            prev = m.score_after;
        }
        auto best = exact_map(inst.model, inst.graph, inst.dists, inst.sims);
        const double alpha_score = crf_score(inst.model, inst.graph, inst.dists, inst.sims, got);
        const double exact_score = crf_score(inst.model, inst.graph, inst.dists, inst.sims, best);
        CHECK(alpha_score <= exact_score + 1e-9);
    }
}

TEST_CASE("exact_map equals an independent recursive enumeration") {
    Rng rng(123);
    for (int t = 0; t < 10; ++t) {
        auto inst = random_instance(rng, 4, 3, false);
        auto got = exact_map(inst.model, inst.graph, inst.dists, inst.sims);
        std::vector<int> y(4, 0), best(4, 0);
        double best_score = oracle_score(inst, best);
        enumerate_rec(inst, y, 0, best, best_score);
        CHECK(got == best);
    }
}

TEST_CASE("exact_map handles a single node and rejects huge instances") {
    auto g = make_graph(1, {}, 3);
    CRFModel m;
    m.label_count = 3;
    m.w_u = {1.0, 1.0, 1.0};
    m.w_p.assign(9, 0.0);
    std::vector<std::vector<double>> H{{0.2, 0.5, 0.3}};
    EdgeSims sims(0, 3);
    CHECK(exact_map(m, g, H, sims) == std::vector<int>{1});

    auto big = make_graph(21, {{0, 1}}, 2);
    CRFModel m2;
    m2.label_count = 2;
    m2.w_u = {1.0, 1.0};
    m2.w_p.assign(4, 0.0);
    std::vector<std::vector<double>> H2(21, std::vector<double>{0.5, 0.5});
    EdgeSims sims2(1, 2);
    CHECK_THROWS_AS(exact_map(m2, big, H2, sims2), std::invalid_argument);
}

TEST_CASE("train_crf learns to relabel the training corpus") {
    CorpusConfig cfg;
    cfg.grid_x = 3;
    cfg.grid_y = 3;
    cfg.grid_t = 2;
    cfg.label_count = 3;
    cfg.types = {DescriptorTypeConfig{3, 1, 2.5, 0.4}, DescriptorTypeConfig{3, 2, 2.5, 0.4}};
    cfg.smoothing_passes = 1;
    cfg.seed = 7;
    Corpus corpus = generate_corpus(cfg, 6);
    ClassifierBank bank = train_bank(corpus.videos, BankHyper{});

    CrfHyper none;
    none.epochs = 0;
    CRFModel zero = train_crf(corpus.videos, bank, none);
    CHECK(zero.sigma > 0.0);
    for (double w : zero.w_u) CHECK(w == 0.0);
    for (double w : zero.w_p) CHECK(w == 0.0);

    CRFModel model = train_crf(corpus.videos, bank, CrfHyper{});
    CHECK(model.sigma == zero.sigma);

    const SubsetMask full = full_mask(2);
    int correct = 0, total = 0;
    double diag = 0.0, off = 0.0;
    for (const auto& video : corpus.videos) {
        const int n = static_cast<int>(video.graph.nodes.size());
        std::vector<std::vector<double>> H(n);
        for (int i = 0; i < n; ++i)
            H[i] = bank.predict(full, concat_member_values(video.descriptors, i, full));
        auto sims = full_mask_similarities(video, model.sigma);
        auto pred = alpha_expansion(model, video.graph, H, sims, unary_argmax(H), 11);
        for (int i = 0; i < n; ++i) {
            correct += pred[i] == video.graph.nodes[i].true_label;
            ++total;
        }
    }
    CHECK(static_cast<double>(correct) / total > 0.9);
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b)
            (a == b ? diag : off) += model.w_p[a * 3 + b];
    CHECK(diag / 3.0 > off / 6.0);
}

TEST_CASE("model json round trip") {
    CRFModel m;
    m.label_count = 2;
    m.w_u = {0.5, -1.25};
    m.w_p = {0.125, 0.0, -0.25, 1.0};
    m.sigma = 1.75;
    CRFModel back = CRFModel::from_json(m.to_json());
    CHECK(back.label_count == 2);
    CHECK(back.w_u == m.w_u);
    CHECK(back.w_p == m.w_p);
    CHECK(back.sigma == m.sigma);

    const std::string path = "crf_roundtrip.json";
    m.save(path);
    CRFModel loaded = CRFModel::load(path);
    CHECK(loaded.w_u == m.w_u);
    std::remove(path.c_str());

    CHECK_THROWS_AS(CRFModel::from_json("{"), DataError);
    CHECK_THROWS_AS(CRFModel::from_json("{\"L\": 2, \"w_u\": [1], \"w_p\": [], \"sigma\": 1}"),
                    DataError);
    CHECK_THROWS_AS(CRFModel::load("missing_model.json"), DataError);
}

} // TEST_SUITE
