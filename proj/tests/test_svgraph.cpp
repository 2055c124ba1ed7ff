#include <doctest.h>

#include <cstdio>
#include <string>

#include "bcrf/errors.hpp"
#include "bcrf/svgraph.hpp"

using namespace bcrf;

namespace {

CorpusConfig small_config() {
    CorpusConfig c;
    c.grid_x = 4;
    c.grid_y = 4;
    c.grid_t = 3;
    c.label_count = 3;
    c.types = {DescriptorTypeConfig{3, 2, 1.5, 0.5}, DescriptorTypeConfig{2, 1, 1.0, 0.5}};
    c.smoothing_passes = 1;
    c.seed = 42;
    return c;
}

} // namespace

TEST_SUITE("svgraph") {

TEST_CASE("4x4x3 lattice has 48 nodes and 104 edges") {
    Corpus corpus = generate_corpus(small_config(), 1);
    const auto& g = corpus.videos[0].graph;
    CHECK(g.nodes.size() == 48);
    CHECK(g.edges.size() == 104);

    // id(x, y, t) = (t*Y + y)*X + x with centroid (x, y, t)
    const auto& origin = g.nodes[0];
    CHECK(origin.cx == 0.0);
    CHECK(origin.cy == 0.0);
    CHECK(origin.ct == 0.0);
    CHECK(neighbors(g, 0).size() == 3); // corner

    const int interior = (1 * 4 + 1) * 4 + 1; // (1,1,1)
    CHECK(g.nodes[interior].cx == 1.0);
    CHECK(g.nodes[interior].cy == 1.0);
    CHECK(g.nodes[interior].ct == 1.0);
    CHECK(neighbors(g, interior).size() == 6);

    for (const auto& [a, b] : g.edges) CHECK(a < b);
}

TEST_CASE("generation is deterministic in the seed") {
    Corpus a = generate_corpus(small_config(), 3);
    Corpus b = generate_corpus(small_config(), 3);
    CHECK(a == b);

    CorpusConfig other = small_config();
    other.seed = 43;
    Corpus c = generate_corpus(other, 3);
    bool all_same = true;
    for (int v = 0; v < 3 && all_same; ++v)
        all_same = c.videos[v].descriptors == a.videos[v].descriptors;
    CHECK_FALSE(all_same);
}

TEST_CASE("labels and voxel counts stay in range") {
    Corpus corpus = generate_corpus(small_config(), 2);
    for (const auto& video : corpus.videos)
        for (const auto& sv : video.graph.nodes) {
            CHECK(sv.true_label >= 0);
            CHECK(sv.true_label < 3);
            CHECK(sv.voxel_count >= 1);
            CHECK(sv.voxel_count <= 5);
        }
}

TEST_CASE("noise 0 pins descriptors to the shared class means") {
    CorpusConfig c = small_config();
    for (auto& t : c.types) t.noise = 0.0;
    Corpus corpus = generate_corpus(c, 2);
    // Any two nodes with the same label carry identical descriptors, even
    // across videos, because class means are drawn once per corpus.
    const auto& v0 = corpus.videos[0];
    const auto& v1 = corpus.videos[1];
    for (const auto& a : v0.graph.nodes)
        for (const auto& b : v1.graph.nodes) {
            if (a.true_label != b.true_label) continue;
            for (int d = 0; d < 2; ++d) {
                const double* va = v0.descriptors.value(a.id, d);
                const double* vb = v1.descriptors.value(b.id, d);
                for (int k = 0; k < v0.descriptors.spec(d).dimension; ++k)
                    REQUIRE(va[k] == vb[k]);
            }
        }
}

TEST_CASE("finalize normalizes, deduplicates and validates edges") {
    SupervoxelGraph g;
    g.nodes.resize(3);
    for (int i = 0; i < 3; ++i) g.nodes[i].id = i;
    g.label_count = 2;
    g.edges = {{2, 0}, {0, 2}, {1, 0}};
    g.finalize();
    CHECK(g.edges == std::vector<std::pair<int, int>>{{0, 1}, {0, 2}});
    CHECK(neighbors(g, 0) == std::vector<int>{1, 2});
    CHECK(neighbors(g, 2) == std::vector<int>{0});

    SupervoxelGraph loop = g;
    loop.edges.push_back({1, 1});
    CHECK_THROWS_AS(loop.finalize(), DataError);

    SupervoxelGraph bad = g;
    bad.edges.push_back({0, 7});
    CHECK_THROWS_AS(bad.finalize(), DataError);
}

TEST_CASE("centroid distance") {
    Supervoxel a, b;
    a.cx = 0; a.cy = 0; a.ct = 0;
    b.cx = 1; b.cy = 2; b.ct = 2;
    CHECK(centroid_distance(a, b) == doctest::Approx(3.0));
    CHECK(centroid_distance(a, a) == 0.0);
}

TEST_CASE("config validation rejects bad shapes") {
    auto expect_config_error = [](CorpusConfig c) {
        CHECK_THROWS_AS(generate_corpus(c, 1), ConfigError);
    };
    { CorpusConfig c = small_config(); c.grid_x = 0; expect_config_error(c); }
    { CorpusConfig c = small_config(); c.grid_x = c.grid_y = c.grid_t = 1; expect_config_error(c); }
    { CorpusConfig c = small_config(); c.label_count = 0; expect_config_error(c); }
    { CorpusConfig c = small_config(); c.types.resize(1); expect_config_error(c); }
    {
        CorpusConfig c = small_config();
        c.types.assign(9, DescriptorTypeConfig{});
        expect_config_error(c);
    }
    { CorpusConfig c = small_config(); c.types[0].dimension = 0; expect_config_error(c); }
    { CorpusConfig c = small_config(); c.types[1].cost_units = 0; expect_config_error(c); }
    { CorpusConfig c = small_config(); c.smoothing_passes = -1; expect_config_error(c); }
    CHECK_THROWS_AS(generate_corpus(small_config(), 0), ConfigError);
}

TEST_CASE("corpus json round trip is lossless") {
    Corpus corpus = generate_corpus(small_config(), 2);
    Corpus back = corpus_from_json(corpus_to_json(corpus));
    CHECK(back == corpus);

    const std::string path = "roundtrip_corpus.json";
    save_corpus(corpus, path);
    Corpus loaded = load_corpus(path);
    CHECK(loaded == corpus);
    std::remove(path.c_str());
}

TEST_CASE("corpus parse failures carry context") {
    try {
        corpus_from_json("{\"videos\": []}");
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("config") != std::string::npos);
    }
    try {
        corpus_from_json("{\n  \"config\": {\n");
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("line") != std::string::npos);
    }
    CHECK_THROWS_AS(load_corpus("no_such_file.json"), DataError);
}

TEST_CASE("descriptor bank accounting") {
    Corpus corpus = generate_corpus(small_config(), 1);
    const auto& bank = corpus.videos[0].descriptors;
    CHECK(bank.type_count() == 2);
    CHECK(bank.node_count() == 48);
    CHECK(bank.total_cost_per_node() == 3);
    CHECK(bank.spec(0).dimension == 3);
    CHECK(bank.spec(1).dimension == 2);
}

} // TEST_SUITE
