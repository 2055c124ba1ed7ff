#include <doctest.h>

#include <cstdio>
#include <stdexcept>
#include <vector>

#include "bcrf/errors.hpp"
#include "bcrf/policy.hpp"
#include "bcrf/svgraph.hpp"

using namespace bcrf;

namespace {

constexpr int kD = 3;
constexpr int kL = 2;

// Star graph: node 0 centered, neighbors laid out in space-time.
struct Fixture {
    SupervoxelGraph graph;
    InferenceState state;

    Fixture() {
        graph.nodes.resize(4);
        for (int i = 0; i < 4; ++i) graph.nodes[i].id = i;
        graph.nodes[0].cx = 0; graph.nodes[0].cy = 0; graph.nodes[0].ct = 1;
        graph.nodes[1].cx = 0; graph.nodes[1].cy = 1; graph.nodes[1].ct = 0; // above, earlier
        graph.nodes[2].cx = 3; graph.nodes[2].cy = 0; graph.nodes[2].ct = 1; // right, same t
        graph.nodes[3].cx = 0; graph.nodes[3].cy = -1; graph.nodes[3].ct = 2; // below, later
        graph.edges = {{0, 1}, {0, 2}, {0, 3}};
        graph.label_count = kL;
        graph.finalize();

        state.current = 0;
        state.remaining = 10;
        state.candidates = {0};
        state.finished.assign(4, 0);
        state.computed.assign(4, 0);
        state.distributions.resize(4);
    }
};

std::vector<Action> all_actions() {
    return {Action::descriptor(0), Action::descriptor(1), Action::descriptor(2),
            Action::finished()};
}

} // namespace

TEST_SUITE("policy") {

TEST_CASE("fresh node with no finished neighbors has all-zero features") {
    Fixture f;
    auto phi = compute_features(f.state, f.graph, kD, kL);
    REQUIRE(phi.values.size() == static_cast<std::size_t>(policy_feature_dim(kD, kL)));
    for (double v : phi.values) CHECK(v == 0.0);
}

TEST_CASE("phi1 mirrors the computed mask") {
    Fixture f;
    f.state.computed[0] = 0b101;
    auto phi = compute_features(f.state, f.graph, kD, kL);
    CHECK(phi.values[0] == 1.0);
    CHECK(phi.values[1] == 0.0);
    CHECK(phi.values[2] == 1.0);
}

TEST_CASE("a neighbor above and earlier lands in the (up, before) bin") {
    Fixture f;
    f.state.finished[1] = 1;
    auto phi = compute_features(f.state, f.graph, kD, kL);
    const double* phi3 = phi.values.data() + kD + kL;
    CHECK(phi3[0] == 1.0); // up=0, before
    for (int b = 1; b < 8; ++b) CHECK(phi3[b] == 0.0);
}

TEST_CASE("phi3 spreads across bins by offset geometry") {
    Fixture f;
    f.state.finished[1] = 1; // up, before (dt < 0)
    f.state.finished[2] = 1; // right, dt = 0 counts as before
    f.state.finished[3] = 1; // down, after
    auto phi = compute_features(f.state, f.graph, kD, kL);
    const double* phi3 = phi.values.data() + kD + kL;
    CHECK(phi3[0] == 1.0); // up/before
    CHECK(phi3[3] == 1.0); // down/after
    CHECK(phi3[6] == 1.0); // right/before
    CHECK(phi3[0] + phi3[1] + phi3[2] + phi3[3] + phi3[4] + phi3[5] + phi3[6] + phi3[7] == 3.0);
}

TEST_CASE("phi2 is the single neighbor's distribution when one qualifies") {
    Fixture f;
    f.state.finished[1] = 1;
    f.state.computed[1] = 0b001;
    f.state.distributions[1] = {0.9, 0.1};
    auto phi = compute_features(f.state, f.graph, kD, kL);
    CHECK(phi.values[kD + 0] == doctest::Approx(0.9));
    CHECK(phi.values[kD + 1] == doctest::Approx(0.1));
}

TEST_CASE("phi2 weights neighbors by inverse centroid distance") {
    Fixture f;
    // distances from node 0: node 1 -> sqrt(2); rebuild with distance 1 and 3.
    f.graph.nodes[1].cy = 1;
    f.graph.nodes[1].ct = 1; // distance 1
    f.graph.nodes[2].cx = 3; // distance 3
    f.state.finished[1] = 1;
    f.state.finished[2] = 1;
    f.state.computed[1] = 1;
    f.state.computed[2] = 1;
    f.state.distributions[1] = {1.0, 0.0};
    f.state.distributions[2] = {0.0, 1.0};
    auto phi = compute_features(f.state, f.graph, kD, kL);
    CHECK(phi.values[kD + 0] == doctest::Approx(0.75));
    CHECK(phi.values[kD + 1] == doctest::Approx(0.25));
    // Finished neighbor without descriptors is excluded from phi2 but its
    // geometry still counts in phi3.
    f.state.computed[2] = 0;
    auto phi2 = compute_features(f.state, f.graph, kD, kL);
    CHECK(phi2.values[kD + 0] == doctest::Approx(1.0));
    const double* phi3 = phi2.values.data() + kD + kL;
    double bins = 0.0;
    for (int b = 0; b < 8; ++b) bins += phi3[b];
    CHECK(bins == 2.0);
}

TEST_CASE("act breaks ties toward low type ids and respects masking") {
    auto w = PolicyWeights::zeros(kD, kL);
    PolicyFeatures phi;
    phi.values.assign(policy_feature_dim(kD, kL), 1.0);
    CHECK(act(w, phi, all_actions()) == Action::descriptor(0));

    // Make FINISHED strictly best.
    for (double& v : w.w[kD]) v = 1.0;
    CHECK(act(w, phi, all_actions()) == Action::finished());

    // Best-scoring action excluded from allowed is never returned.
    std::vector<Action> masked{Action::descriptor(2), Action::finished()};
    for (double& v : w.w[kD]) v = -1.0;
    for (double& v : w.w[0]) v = 5.0;
    CHECK(act(w, phi, masked) == Action::descriptor(2));

    CHECK_THROWS_AS(act(w, phi, {}), std::invalid_argument);
}

TEST_CASE("scaling all weights by a positive constant leaves decisions unchanged") {
    auto w = PolicyWeights::random(kD, kL, 5);
    PolicyFeatures phi;
    phi.values.assign(policy_feature_dim(kD, kL), 0.0);
    phi.values[0] = 0.3;
    phi.values[kD] = 0.7;
    auto scaled = w;
    for (auto& row : scaled.w)
        for (double& v : row) v *= 37.5;
    CHECK(act(w, phi, all_actions()) == act(scaled, phi, all_actions()));
}

TEST_CASE("weights json round trip and deterministic random init") {
    auto w = PolicyWeights::random(kD, kL, 42);
    auto again = PolicyWeights::random(kD, kL, 42);
    CHECK(w.w == again.w);
    CHECK(PolicyWeights::random(kD, kL, 43).w != w.w);

    PolicyWeights back = PolicyWeights::from_json(w.to_json());
    CHECK(back.type_count == kD);
    CHECK(back.label_count == kL);
    CHECK(back.w == w.w);

    const std::string path = "policy_roundtrip.json";
    w.save(path);
    CHECK(PolicyWeights::load(path).w == w.w);
    std::remove(path.c_str());

    CHECK_THROWS_AS(PolicyWeights::from_json("{"), DataError);
    CHECK_THROWS_AS(PolicyWeights::from_json("{\"D\":2,\"L\":2,\"actions\":{}}"), DataError);
}

} // TEST_SUITE
