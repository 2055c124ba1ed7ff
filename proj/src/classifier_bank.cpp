#include "bcrf/classifier_bank.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "bcrf/errors.hpp"
#include "bcrf/kernels.hpp"
#include "bcrf/rng.hpp"

namespace bcrf {
namespace {

using nlohmann::json;

constexpr std::uint64_t kBankStream = 0xBA5EBA11u;

void softmax_inplace(double* scores, int n) {
    double hi = scores[0];
    for (int i = 1; i < n; ++i) hi = std::max(hi, scores[i]);
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        scores[i] = std::exp(scores[i] - hi);
        total += scores[i];
    }
    for (int i = 0; i < n; ++i) scores[i] /= total;
}

std::vector<double>& scratch(std::size_t n) {
    thread_local std::vector<double> buf;
    if (buf.size() < n) buf.resize(n);
    return buf;
}

} // namespace

SubsetClassifier SubsetClassifier::with_identity_standardization(SubsetMask mask, int label_count,
                                                                 int input_dim) {
    SubsetClassifier c;
    c.mask = mask;
    c.label_count = label_count;
    c.input_dim = input_dim;
    c.weights.assign(static_cast<std::size_t>(label_count) * (input_dim + 1), 0.0);
    c.feat_mean.assign(input_dim, 0.0);
    c.feat_inv_sd.assign(input_dim, 1.0);
    return c;
}

void SubsetClassifier::predict_into(const double* values, double* out) const {
    auto& x = scratch(static_cast<std::size_t>(input_dim) + label_count);
    double* std_x = x.data();
    double* scores = std_x + input_dim;
    for (int d = 0; d < input_dim; ++d)
        std_x[d] = (values[d] - feat_mean[d]) * feat_inv_sd[d];
    for (int l = 0; l < label_count; ++l) {
        const double* w = row(l);
        scores[l] = kernels::dot(w, std_x, input_dim) + w[input_dim];
    }
    softmax_inplace(scores, label_count);
    std::copy(scores, scores + label_count, out);
}

std::vector<double> SubsetClassifier::predict(std::span<const double> values) const {
    if (static_cast<int>(values.size()) != input_dim)
        throw std::invalid_argument("predict: expected " + std::to_string(input_dim) +
                                    " values, got " + std::to_string(values.size()));
    std::vector<double> out(label_count);
    predict_into(values.data(), out.data());
    return out;
}

int ClassifierBank::member_dim(SubsetMask mask) const {
    int dim = 0;
    for (int t = 0; t < type_count_; ++t)
        if (mask_has(mask, t)) dim += type_dims_[t];
    return dim;
}

const SubsetClassifier& ClassifierBank::classifier(SubsetMask mask) const {
    if (mask == 0 || mask >= classifiers_.size())
        throw std::invalid_argument("classifier: invalid subset mask " + std::to_string(mask));
    return classifiers_[mask];
}

std::vector<double> ClassifierBank::predict(SubsetMask mask, std::span<const double> values) const {
    return classifier(mask).predict(values);
}

void ClassifierBank::predict_into(SubsetMask mask, const double* values, double* out) const {
    classifier(mask).predict_into(values, out);
}

const std::vector<double>& ClassifierBank::expected_descriptor(int type, int label) const {
    if (type < 0 || type >= type_count_)
        throw std::invalid_argument("expected_descriptor: bad type " + std::to_string(type));
    if (label < 0 || label >= label_count_)
        throw std::invalid_argument("expected_descriptor: bad label " + std::to_string(label));
    return class_means_[type][label];
}

std::vector<double> concat_member_values(const DescriptorBank& bank, int node, SubsetMask mask) {
    std::vector<double> out;
    for (int t = 0; t < bank.type_count(); ++t) {
        if (!mask_has(mask, t)) continue;
        const double* v = bank.value(node, t);
        out.insert(out.end(), v, v + bank.spec(t).dimension);
    }
    return out;
}

ClassifierBank train_bank(std::span<const Video> corpus, const BankHyper& hyper) {
    if (corpus.empty()) throw DataError("train_bank: empty corpus");
    const auto& specs = corpus.front().descriptors.specs();
    const int D = static_cast<int>(specs.size());
    if (D < 1 || D > 8)
        throw DataError("train_bank: descriptor type count " + std::to_string(D) +
                        " outside [1, 8]");
    const int L = corpus.front().graph.label_count;

    ClassifierBank bank;
    bank.type_count_ = D;
    bank.label_count_ = L;
    bank.type_dims_.resize(D);
    bank.type_offset_.resize(D);
    int total_dim = 0;
    for (int t = 0; t < D; ++t) {
        bank.type_dims_[t] = specs[t].dimension;
        bank.type_offset_[t] = total_dim;
        total_dim += specs[t].dimension;
    }

    // Gather every labeled node: full concatenated raw descriptors + label.
    std::vector<double> rows;
    std::vector<int> labels;
    for (const auto& video : corpus) {
        if (video.descriptors.type_count() != D || video.graph.label_count != L)
            throw DataError("train_bank: corpus videos disagree on types or labels");
        for (const auto& node : video.graph.nodes) {
            if (!node.has_label()) continue;
            for (int t = 0; t < D; ++t) {
                const double* v = video.descriptors.value(node.id, t);
                rows.insert(rows.end(), v, v + specs[t].dimension);
            }
            labels.push_back(node.true_label);
        }
    }
    const int N = static_cast<int>(labels.size());
    if (N == 0) throw DataError("train_bank: no labeled nodes in corpus");
    std::vector<int> label_seen(L, 0);
    for (int y : labels) ++label_seen[y];
    for (int l = 0; l < L; ++l)
        if (label_seen[l] == 0)
            throw DataError("train_bank: label " + std::to_string(l) +
                            " absent from training data");

    // Per-dimension standardization over the full concatenation.
    bank.type_mean_.assign(total_dim, 0.0);
    bank.type_sd_.assign(total_dim, 0.0);
    for (int i = 0; i < N; ++i)
        kernels::axpy(1.0, rows.data() + static_cast<std::size_t>(i) * total_dim,
                      bank.type_mean_.data(), total_dim);
    for (double& m : bank.type_mean_) m /= N;
    for (int i = 0; i < N; ++i) {
        const double* r = rows.data() + static_cast<std::size_t>(i) * total_dim;
        for (int d = 0; d < total_dim; ++d) {
            const double delta = r[d] - bank.type_mean_[d];
            bank.type_sd_[d] += delta * delta;
        }
    }
    for (double& s : bank.type_sd_) s = std::sqrt(s / N);

    // Class-conditional mean descriptors (raw scale).
    bank.class_means_.assign(D, std::vector<std::vector<double>>(L));
    for (int t = 0; t < D; ++t)
        for (int l = 0; l < L; ++l)
            bank.class_means_[t][l].assign(bank.type_dims_[t], 0.0);
    for (int i = 0; i < N; ++i) {
        const double* r = rows.data() + static_cast<std::size_t>(i) * total_dim;
        const int y = labels[i];
        for (int t = 0; t < D; ++t)
            kernels::axpy(1.0, r + bank.type_offset_[t], bank.class_means_[t][y].data(),
                          bank.type_dims_[t]);
    }
    for (int t = 0; t < D; ++t)
        for (int l = 0; l < L; ++l)
            for (double& v : bank.class_means_[t][l]) v /= label_seen[l];

    // Standardize once; per-mask training gathers member columns from this.
    std::vector<double> std_rows(rows.size());
    for (int i = 0; i < N; ++i) {
        const double* r = rows.data() + static_cast<std::size_t>(i) * total_dim;
        double* s = std_rows.data() + static_cast<std::size_t>(i) * total_dim;
        for (int d = 0; d < total_dim; ++d) {
            const double sd = bank.type_sd_[d];
            s[d] = sd > 1e-12 ? (r[d] - bank.type_mean_[d]) / sd : 0.0;
        }
    }

    const SubsetMask masks = full_mask(D);
    bank.classifiers_.resize(masks + 1);
    std::vector<double> x;       // gathered member matrix, N x dim
    std::vector<double> probs(L);
    std::vector<int> order(N);
    for (SubsetMask mask = 1; mask <= masks; ++mask) {
        const int dim = bank.member_dim(mask);
        auto& clf = bank.classifiers_[mask];
        clf = SubsetClassifier::with_identity_standardization(mask, L, dim);
        for (int t = 0, o = 0; t < D; ++t) {
            if (!mask_has(mask, t)) continue;
            std::copy_n(bank.type_mean_.begin() + bank.type_offset_[t], bank.type_dims_[t],
                        clf.feat_mean.begin() + o);
            for (int d = 0; d < bank.type_dims_[t]; ++d) {
                const double sd = bank.type_sd_[bank.type_offset_[t] + d];
                clf.feat_inv_sd[o + d] = sd > 1e-12 ? 1.0 / sd : 0.0;
            }
            o += bank.type_dims_[t];
        }

        x.resize(static_cast<std::size_t>(N) * dim);
        for (int i = 0; i < N; ++i) {
            const double* s = std_rows.data() + static_cast<std::size_t>(i) * total_dim;
            double* xi = x.data() + static_cast<std::size_t>(i) * dim;
            for (int t = 0, o = 0; t < D; ++t) {
                if (!mask_has(mask, t)) continue;
                std::copy_n(s + bank.type_offset_[t], bank.type_dims_[t], xi + o);
                o += bank.type_dims_[t];
            }
        }

        Rng rng(derive_seed(hyper.seed, kBankStream, mask));
        std::iota(order.begin(), order.end(), 0);
        for (int epoch = 1; epoch <= hyper.epochs; ++epoch) {
            const double eta = hyper.step0 / std::sqrt(static_cast<double>(epoch));
            rng.shuffle(order);
            for (int idx : order) {
                const double* xi = x.data() + static_cast<std::size_t>(idx) * dim;
                for (int l = 0; l < L; ++l) {
                    const double* w = clf.row(l);
                    probs[l] = kernels::dot(w, xi, dim) + w[dim];
                }
                softmax_inplace(probs.data(), L);
                const int y = labels[idx];
                for (int l = 0; l < L; ++l) {
                    const double g = probs[l] - (l == y ? 1.0 : 0.0);
                    double* w = clf.row(l);
                    if (hyper.l2 > 0.0) {
                        const double decay = 1.0 - eta * hyper.l2;
                        for (int d = 0; d < dim; ++d) w[d] *= decay;
                    }
                    kernels::axpy(-eta * g, xi, w, dim);
                    w[dim] -= eta * g;
                }
            }
        }
    }
    return bank;
}

std::string ClassifierBank::to_json() const {
    json j;
    j["D"] = type_count_;
    j["L"] = label_count_;
    json std_j = json::object();
    for (int t = 0; t < type_count_; ++t) {
        json entry;
        entry["mean"] = std::vector<double>(type_mean_.begin() + type_offset_[t],
                                            type_mean_.begin() + type_offset_[t] + type_dims_[t]);
        entry["sd"] = std::vector<double>(type_sd_.begin() + type_offset_[t],
                                          type_sd_.begin() + type_offset_[t] + type_dims_[t]);
        std_j[std::to_string(t)] = std::move(entry);
    }
    j["standardization"] = std::move(std_j);
    json clf_j = json::object();
    for (SubsetMask mask = 1; mask < classifiers_.size(); ++mask) {
        const auto& c = classifiers_[mask];
        json rows = json::array();
        for (int l = 0; l < label_count_; ++l)
            rows.push_back(std::vector<double>(c.row(l), c.row(l) + c.input_dim + 1));
        clf_j[std::to_string(mask)] = json{{"weights", std::move(rows)}};
    }
    j["classifiers"] = std::move(clf_j);
    json means = json::object();
    for (int t = 0; t < type_count_; ++t)
        for (int l = 0; l < label_count_; ++l)
            means[std::to_string(t) + "/" + std::to_string(l)] = class_means_[t][l];
    j["class_means"] = std::move(means);
    return j.dump(2);
}

ClassifierBank ClassifierBank::from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw DataError(std::string("classifier bank: ") + e.what());
    }
    try {
        ClassifierBank bank;
        bank.type_count_ = j.at("D").get<int>();
        bank.label_count_ = j.at("L").get<int>();
        if (bank.type_count_ < 1 || bank.type_count_ > 8)
            throw DataError("classifier bank: D outside [1, 8]");
        if (bank.label_count_ < 1) throw DataError("classifier bank: L < 1");
        const int D = bank.type_count_;
        const int L = bank.label_count_;
        bank.type_dims_.resize(D);
        bank.type_offset_.resize(D);
        const auto& std_j = j.at("standardization");
        int total_dim = 0;
        for (int t = 0; t < D; ++t) {
            const auto& entry = std_j.at(std::to_string(t));
            auto mean = entry.at("mean").get<std::vector<double>>();
            auto sd = entry.at("sd").get<std::vector<double>>();
            if (mean.size() != sd.size() || mean.empty())
                throw DataError("classifier bank: bad standardization for type " +
                                std::to_string(t));
            bank.type_dims_[t] = static_cast<int>(mean.size());
            bank.type_offset_[t] = total_dim;
            total_dim += bank.type_dims_[t];
            bank.type_mean_.insert(bank.type_mean_.end(), mean.begin(), mean.end());
            bank.type_sd_.insert(bank.type_sd_.end(), sd.begin(), sd.end());
        }
        const SubsetMask masks = full_mask(D);
        bank.classifiers_.resize(masks + 1);
        const auto& clf_j = j.at("classifiers");
        for (SubsetMask mask = 1; mask <= masks; ++mask) {
            const int dim = bank.member_dim(mask);
            auto& c = bank.classifiers_[mask];
            c = SubsetClassifier::with_identity_standardization(mask, L, dim);
            for (int t = 0, o = 0; t < D; ++t) {
                if (!mask_has(mask, t)) continue;
                for (int d = 0; d < bank.type_dims_[t]; ++d) {
                    c.feat_mean[o + d] = bank.type_mean_[bank.type_offset_[t] + d];
                    const double sd = bank.type_sd_[bank.type_offset_[t] + d];
                    c.feat_inv_sd[o + d] = sd > 1e-12 ? 1.0 / sd : 0.0;
                }
                o += bank.type_dims_[t];
            }
            const auto& rows = clf_j.at(std::to_string(mask)).at("weights");
            if (static_cast<int>(rows.size()) != L)
                throw DataError("classifier bank: mask " + std::to_string(mask) +
                                " has wrong row count");
            for (int l = 0; l < L; ++l) {
                auto w = rows[l].get<std::vector<double>>();
                if (static_cast<int>(w.size()) != dim + 1)
                    throw DataError("classifier bank: mask " + std::to_string(mask) +
                                    " row " + std::to_string(l) + " has wrong length");
                std::copy(w.begin(), w.end(), c.row(l));
            }
        }
        bank.class_means_.assign(D, std::vector<std::vector<double>>(L));
        const auto& means = j.at("class_means");
        for (int t = 0; t < D; ++t)
            for (int l = 0; l < L; ++l) {
                auto v = means.at(std::to_string(t) + "/" + std::to_string(l))
                             .get<std::vector<double>>();
                if (static_cast<int>(v.size()) != bank.type_dims_[t])
                    throw DataError("classifier bank: class mean " + std::to_string(t) + "/" +
                                    std::to_string(l) + " has wrong length");
                bank.class_means_[t][l] = std::move(v);
            }
        return bank;
    } catch (const json::exception& e) {
        throw DataError(std::string("classifier bank: ") + e.what());
    }
}

void ClassifierBank::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open " + path + " for writing");
    out << to_json() << '\n';
    if (!out) throw DataError("failed writing " + path);
}

ClassifierBank ClassifierBank::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return from_json(buf.str());
}

} // namespace bcrf
