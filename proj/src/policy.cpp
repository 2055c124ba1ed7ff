#include "bcrf/policy.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "bcrf/errors.hpp"
#include "bcrf/kernels.hpp"
#include "bcrf/rng.hpp"

namespace bcrf {
namespace {

using nlohmann::json;

constexpr std::uint64_t kPolicyInitStream = 0x9011C7ULL;
constexpr double kCoincidentWeight = 1e6;

} // namespace

PolicyWeights PolicyWeights::zeros(int type_count, int label_count) {
    PolicyWeights p;
    p.type_count = type_count;
    p.label_count = label_count;
    p.w.assign(type_count + 1,
               std::vector<double>(policy_feature_dim(type_count, label_count), 0.0));
    return p;
}

PolicyWeights PolicyWeights::random(int type_count, int label_count, std::uint64_t seed) {
    PolicyWeights p = zeros(type_count, label_count);
    Rng rng(derive_seed(seed, kPolicyInitStream));
    for (auto& row : p.w)
        for (double& v : row) v = rng.normal();
    return p;
}

PolicyFeatures compute_features(const InferenceState& state, const SupervoxelGraph& graph,
                                int type_count, int label_count) {
    const int i = state.current;
    if (i < 0 || i >= static_cast<int>(graph.nodes.size()))
        throw std::invalid_argument("compute_features: state has no valid current node");
    PolicyFeatures f;
    f.values.assign(policy_feature_dim(type_count, label_count), 0.0);
    double* phi1 = f.values.data();
    double* phi2 = phi1 + type_count;
    double* phi3 = phi2 + label_count;

    const SubsetMask mask = state.computed[i];
    for (int d = 0; d < type_count; ++d) phi1[d] = mask_has(mask, d) ? 1.0 : 0.0;

    const Supervoxel& self = graph.nodes[i];
    double weight_sum = 0.0;
    for (int j : neighbors(graph, i)) {
        if (!state.finished[j]) continue;

        // phi3: every finished neighbor, binned by dominant x/y offset and
        // temporal sign (dt <= 0 counts as "before").
        const Supervoxel& other = graph.nodes[j];
        const double dx = other.cx - self.cx;
        const double dy = other.cy - self.cy;
        const double dt = other.ct - self.ct;
        int direction;
        if (std::abs(dx) >= std::abs(dy))
            direction = dx >= 0 ? 3 : 2; // right : left (x-ties default right)
        else
            direction = dy > 0 ? 0 : 1; // up : down
        phi3[direction * 2 + (dt > 0 ? 1 : 0)] += 1.0;

        // phi2: only neighbors with classifier evidence contribute.
        if (state.computed[j] == 0) continue;
        const double dist = centroid_distance(self, other);
        const double w = dist > 1.0 / kCoincidentWeight ? 1.0 / dist : kCoincidentWeight;
        kernels::axpy(w, state.distributions[j].data(), phi2, label_count);
        weight_sum += w;
    }
    if (weight_sum > 0.0)
        for (int l = 0; l < label_count; ++l) phi2[l] /= weight_sum;
    return f;
}

Action act(const PolicyWeights& weights, const PolicyFeatures& features,
           const std::vector<Action>& allowed) {
    if (allowed.empty()) throw std::invalid_argument("act: empty allowed set");
    const std::size_t dim = features.values.size();
    bool have_best = false;
    Action best = Action::finished();
    double best_score = 0.0;
    int best_rank = 0;
    for (const Action& a : allowed) {
        const auto& row = weights.w.at(a.index(weights.type_count));
        if (row.size() != dim) throw std::invalid_argument("act: feature/weight dim mismatch");
        const double score = kernels::dot(row.data(), features.values.data(), dim);
        const int rank = a.index(weights.type_count); // canonical tie order
        if (!have_best || score > best_score || (score == best_score && rank < best_rank)) {
            have_best = true;
            best = a;
            best_score = score;
            best_rank = rank;
        }
    }
    return best;
}

std::string PolicyWeights::to_json() const {
    json actions = json::object();
    for (int idx = 0; idx <= type_count; ++idx) {
        const std::string key = idx == type_count ? "FINISHED" : std::to_string(idx);
        actions[key] = w[idx];
    }
    json j{{"D", type_count}, {"L", label_count}, {"actions", std::move(actions)}};
    return j.dump(2);
}

PolicyWeights PolicyWeights::from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw DataError(std::string("policy file: ") + e.what());
    }
    try {
        PolicyWeights p;
        p.type_count = j.at("D").get<int>();
        p.label_count = j.at("L").get<int>();
        if (p.type_count < 1 || p.label_count < 1)
            throw DataError("policy file: D and L must be >= 1");
        const int dim = policy_feature_dim(p.type_count, p.label_count);
        const auto& actions = j.at("actions");
        p.w.resize(p.type_count + 1);
        for (int idx = 0; idx <= p.type_count; ++idx) {
            const std::string key = idx == p.type_count ? "FINISHED" : std::to_string(idx);
            p.w[idx] = actions.at(key).get<std::vector<double>>();
            if (static_cast<int>(p.w[idx].size()) != dim)
                throw DataError("policy file: action " + key + " has wrong weight length");
        }
        return p;
    } catch (const json::exception& e) {
        throw DataError(std::string("policy file: ") + e.what());
    }
}

void PolicyWeights::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open " + path + " for writing");
    out << to_json() << '\n';
    if (!out) throw DataError("failed writing " + path);
}

PolicyWeights PolicyWeights::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return from_json(buf.str());
}

} // namespace bcrf
