#include "bcrf/harness.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <span>
#include <sstream>

#include <json.hpp>

#include "bcrf/errors.hpp"
#include "bcrf/rng.hpp"

namespace bcrf {

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kPolicySeedStream = 0x90C1ULL;
constexpr std::uint64_t kQlearnSeedStream = 0x00B3ULL;
constexpr std::uint64_t kEvalSeedStream = 0xE7A1ULL;
constexpr std::uint64_t kUnboundedSeedStream = 0x07B0ULL;

std::string fmt(double v, int digits = 6) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
    return buf;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open for writing: " + path.string());
    out << text;
    if (!out) throw DataError("write failed: " + path.string());
}

struct EvalOutcome {
    std::vector<int> labeling;
    int cost = 0;
    RunTrace trace;
    bool has_trace = false;
};

EvalOutcome eval_one(Variant v, const Video& video, const ClassifierBank& bank,
                     const CRFModel& model, SubsetMask usable, const PolicyWeights* policy,
                     SubsetMask b3_subset, int budget, std::uint64_t seed) {
    EvalOutcome out;
    switch (v) {
    case Variant::rnd_rnk:
    case Variant::nhb_rnk:
    case Variant::full: {
        RunEnv env{&video, &bank, &model, usable, variant_strategy(v)};
        out.trace = run_budgeted_inference(env, *policy, budget, seed);
        for (const auto& e : out.trace.entries) out.cost += e.cost;
        out.labeling = out.trace.labeling;
        out.has_trace = true;
        break;
    }
    case Variant::baseline1: {
        auto r = baseline1(video, bank, model, usable, budget, seed);
        out.labeling = std::move(r.labeling);
        out.cost = r.cost_spent;
        break;
    }
    case Variant::baseline2: {
        auto r = baseline2(video, bank, model, usable, budget, seed);
        out.labeling = std::move(r.labeling);
        out.cost = r.cost_spent;
        break;
    }
    case Variant::baseline3: {
        auto r = apply_global_subset(video, bank, model, usable, b3_subset, seed);
        out.labeling = std::move(r.labeling);
        out.cost = r.cost_spent;
        break;
    }
    case Variant::unbounded_crf:
        out.labeling = unbounded_inference(video, bank, model, seed);
        break;
    }
    return out;
}

} // namespace

std::string budget_file_label(const std::string& budget_label) {
    std::string out;
    for (char c : budget_label) {
        if (c == '%')
            out += "pct";
        else
            out += c;
    }
    return out;
}

std::string capi_train_log_csv(const CapiResult& res) {
    std::string csv = "iteration,policy_train_acc,rollout_states,elapsed\n";
    for (const auto& it : res.iterations) {
        csv += std::to_string(it.iteration) + "," + fmt(it.new_acc) + "," +
               std::to_string(it.states_used) + "," + fmt(it.elapsed_sec, 3) + "\n";
    }
    return csv;
}

const char* variant_name(Variant v) {
    switch (v) {
    case Variant::rnd_rnk: return "RndRnk";
    case Variant::nhb_rnk: return "NhbRnk";
    case Variant::full: return "Full";
    case Variant::baseline1: return "Baseline1";
    case Variant::baseline2: return "Baseline2";
    case Variant::baseline3: return "Baseline3";
    case Variant::unbounded_crf: return "UnboundedCRF";
    }
    return "?";
}

Variant variant_from_name(const std::string& name) {
    if (name == "RndRnk") return Variant::rnd_rnk;
    if (name == "NhbRnk") return Variant::nhb_rnk;
    if (name == "Full" || name == "Full-analogue") return Variant::full;
    if (name == "Baseline1") return Variant::baseline1;
    if (name == "Baseline2") return Variant::baseline2;
    if (name == "Baseline3") return Variant::baseline3;
    if (name == "UnboundedCRF") return Variant::unbounded_crf;
    throw ConfigError("unknown variant \"" + name + "\"");
}

bool variant_uses_policy(Variant v) {
    return v == Variant::rnd_rnk || v == Variant::nhb_rnk || v == Variant::full;
}

SelectStrategy variant_strategy(Variant v) {
    return v == Variant::rnd_rnk ? SelectStrategy::random : SelectStrategy::neighbor_confidence;
}

SubsetMask variant_usable_mask(Variant v, int type_count, int reserved_full_types) {
    const int reserved = std::clamp(reserved_full_types, 0, type_count - 1);
    if (v == Variant::full || v == Variant::unbounded_crf) return full_mask(type_count);
    return full_mask(type_count - reserved);
}

BudgetSpec BudgetSpec::of_fraction(double f) {
    BudgetSpec b;
    b.fractional = true;
    b.fraction = f;
    return b;
}

BudgetSpec BudgetSpec::of_units(int u) {
    BudgetSpec b;
    b.fractional = false;
    b.units = u;
    return b;
}

int BudgetSpec::resolve(int full_cost) const {
    if (!fractional) return units;
    return static_cast<int>(std::floor(fraction * full_cost));
}

std::string BudgetSpec::label() const {
    if (!fractional) return std::to_string(units);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g%%", fraction * 100.0);
    return buf;
}

BudgetSpec parse_budget(const std::string& text) {
    std::string s;
    for (char c : text)
        if (!std::isspace(static_cast<unsigned char>(c))) s += c;
    if (s.empty()) throw ConfigError("empty budget; expected \"20%\" or \"614\"");
    try {
        std::size_t used = 0;
        if (s.back() == '%') {
            const double pct = std::stod(s.substr(0, s.size() - 1), &used);
            if (used != s.size() - 1 || pct <= 0.0)
                throw ConfigError("bad budget \"" + text + "\"; expected \"20%\" or \"614\"");
            return BudgetSpec::of_fraction(pct / 100.0);
        }
        const int units = std::stoi(s, &used);
        if (used != s.size() || units <= 0)
            throw ConfigError("bad budget \"" + text + "\"; expected \"20%\" or \"614\"");
        return BudgetSpec::of_units(units);
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception&) {
        throw ConfigError("bad budget \"" + text + "\"; expected \"20%\" or \"614\"");
    }
}

ExperimentConfig default_experiment_config() {
    ExperimentConfig cfg;
    cfg.corpus.grid_x = 4;
    cfg.corpus.grid_y = 4;
    cfg.corpus.grid_t = 6;
    cfg.corpus.label_count = 4;
    cfg.corpus.types = {
        DescriptorTypeConfig{4, 2, 0.6, 1.0},  // cheap color-ish, decent value per unit
        DescriptorTypeConfig{6, 8, 1.4, 1.0},  // flow-ish, pricey and strong
        DescriptorTypeConfig{6, 6, 0.35, 1.0}, // boundary-ish
        DescriptorTypeConfig{6, 4, 0.3, 1.0},  // motion-ish
        DescriptorTypeConfig{8, 12, 1.8, 1.0}, // expensive net features, Full only
    };
    cfg.corpus.smoothing_passes = 0;
    cfg.corpus.seed = 4242;
    cfg.video_count = 40;
    cfg.budgets = {BudgetSpec::of_fraction(0.2), BudgetSpec::of_fraction(0.5),
                   BudgetSpec::of_fraction(0.9)};
    cfg.variants = {Variant::rnd_rnk,   Variant::nhb_rnk,   Variant::full,
                    Variant::baseline1, Variant::baseline2, Variant::baseline3,
                    Variant::unbounded_crf};
    cfg.capi.max_iters = 6;
    return cfg;
}

std::string experiment_config_to_json(const ExperimentConfig& config) {
    json j;
    j["corpus"] = json::parse(corpus_config_to_json(config.corpus));
    if (!config.corpus_path.empty()) j["corpus_path"] = config.corpus_path;
    j["n_videos"] = config.video_count;
    json budgets = json::array();
    for (const auto& b : config.budgets) budgets.push_back(b.label());
    j["budgets"] = std::move(budgets);
    json variants = json::array();
    for (Variant v : config.variants) variants.push_back(variant_name(v));
    j["variants"] = std::move(variants);
    j["seeds"] = config.seeds;
    j["weighted_accuracy"] = config.weighted;
    if (!config.out_dir.empty()) j["out_dir"] = config.out_dir;
    j["reserved_full_types"] = config.reserved_full_types;
    j["rollouts"] = {{"random", config.rollouts_random},
                     {"confidence", config.rollouts_confidence}};
    j["capi"] = {{"max_iters", config.capi.max_iters},
                 {"patience", config.capi.patience},
                 {"state_cap", config.capi.state_cap},
                 {"ranker",
                  {{"lambda", config.capi.ranker.lambda},
                   {"step0", config.capi.ranker.step0},
                   {"epochs", config.capi.ranker.epochs}}}};
    j["qlearn"] = {{"episodes", config.qlearn.episodes}, {"alpha_lr", config.qlearn.alpha_lr},
                   {"gamma", config.qlearn.gamma},       {"eps_hi", config.qlearn.eps_hi},
                   {"eps_lo", config.qlearn.eps_lo},     {"seed", config.qlearn.seed}};
    j["bank"] = {{"l2", config.bank.l2},
                 {"epochs", config.bank.epochs},
                 {"step0", config.bank.step0},
                 {"seed", config.bank.seed}};
    j["crf"] = {{"epochs", config.crf.epochs}, {"step", config.crf.step}, {"seed", config.crf.seed}};
    return j.dump(2);
}

ExperimentConfig experiment_config_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw DataError(std::string("experiment config: parse error: ") + e.what());
    }
    ExperimentConfig cfg = default_experiment_config();
    try {
        if (j.contains("corpus")) cfg.corpus = corpus_config_from_json(j["corpus"].dump());
        if (j.contains("corpus_path")) cfg.corpus_path = j["corpus_path"].get<std::string>();
        if (j.contains("n_videos")) cfg.video_count = j["n_videos"].get<int>();
        if (j.contains("budgets")) {
            cfg.budgets.clear();
            for (const auto& b : j["budgets"]) {
                if (b.is_number_integer())
                    cfg.budgets.push_back(BudgetSpec::of_units(b.get<int>()));
                else
                    cfg.budgets.push_back(parse_budget(b.get<std::string>()));
            }
        }
        if (j.contains("variants")) {
            cfg.variants.clear();
            for (const auto& v : j["variants"])
                cfg.variants.push_back(variant_from_name(v.get<std::string>()));
        }
        if (j.contains("seeds")) cfg.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
        if (j.contains("weighted_accuracy")) cfg.weighted = j["weighted_accuracy"].get<bool>();
        if (j.contains("out_dir")) cfg.out_dir = j["out_dir"].get<std::string>();
        if (j.contains("reserved_full_types"))
            cfg.reserved_full_types = j["reserved_full_types"].get<int>();
        if (j.contains("rollouts")) {
            const auto& r = j["rollouts"];
            if (r.contains("random")) cfg.rollouts_random = r["random"].get<int>();
            if (r.contains("confidence")) cfg.rollouts_confidence = r["confidence"].get<int>();
        }
        if (j.contains("capi")) {
            const auto& c = j["capi"];
            if (c.contains("max_iters")) cfg.capi.max_iters = c["max_iters"].get<int>();
            if (c.contains("patience")) cfg.capi.patience = c["patience"].get<int>();
            if (c.contains("state_cap")) cfg.capi.state_cap = c["state_cap"].get<int>();
            if (c.contains("ranker")) {
                const auto& rk = c["ranker"];
                if (rk.contains("lambda")) cfg.capi.ranker.lambda = rk["lambda"].get<double>();
                if (rk.contains("step0")) cfg.capi.ranker.step0 = rk["step0"].get<double>();
                if (rk.contains("epochs")) cfg.capi.ranker.epochs = rk["epochs"].get<int>();
            }
        }
        if (j.contains("qlearn")) {
            const auto& q = j["qlearn"];
            if (q.contains("episodes")) cfg.qlearn.episodes = q["episodes"].get<int>();
            if (q.contains("alpha_lr")) cfg.qlearn.alpha_lr = q["alpha_lr"].get<double>();
            if (q.contains("gamma")) cfg.qlearn.gamma = q["gamma"].get<double>();
            if (q.contains("eps_hi")) cfg.qlearn.eps_hi = q["eps_hi"].get<double>();
            if (q.contains("eps_lo")) cfg.qlearn.eps_lo = q["eps_lo"].get<double>();
            if (q.contains("seed")) cfg.qlearn.seed = q["seed"].get<std::uint64_t>();
        }
        if (j.contains("bank")) {
            const auto& b = j["bank"];
            if (b.contains("l2")) cfg.bank.l2 = b["l2"].get<double>();
            if (b.contains("epochs")) cfg.bank.epochs = b["epochs"].get<int>();
            if (b.contains("step0")) cfg.bank.step0 = b["step0"].get<double>();
            if (b.contains("seed")) cfg.bank.seed = b["seed"].get<std::uint64_t>();
        }
        if (j.contains("crf")) {
            const auto& c = j["crf"];
            if (c.contains("epochs")) cfg.crf.epochs = c["epochs"].get<int>();
            if (c.contains("step")) cfg.crf.step = c["step"].get<double>();
            if (c.contains("seed")) cfg.crf.seed = c["seed"].get<std::uint64_t>();
        }
    } catch (const json::exception& e) {
        throw DataError(std::string("experiment config: malformed content: ") + e.what());
    }
    return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open config file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return experiment_config_from_json(ss.str());
}

std::string results_to_csv(const std::vector<ResultRow>& rows, int label_count) {
    std::string csv = "variant,budget";
    for (int c = 0; c < label_count; ++c) csv += ",class_" + std::to_string(c);
    csv += ",avg,cost_spent\n";
    for (const auto& r : rows) {
        if (static_cast<int>(r.per_class.size()) != label_count)
            throw std::invalid_argument("results_to_csv: per-class width mismatch");
        csv += r.variant + "," + r.budget;
        for (double v : r.per_class) csv += "," + fmt(v);
        csv += "," + fmt(r.avg) + "," + fmt(r.mean_cost) + "\n";
    }
    return csv;
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
    if (config.variants.empty()) throw ConfigError("experiment: variant list is empty");
    if (config.budgets.empty()) throw ConfigError("experiment: budget list is empty");
    if (config.seeds.empty()) throw ConfigError("experiment: seed list is empty");

    Corpus corpus = config.corpus_path.empty() ? generate_corpus(config.corpus, config.video_count)
                                               : load_corpus(config.corpus_path);
    const int n_videos = static_cast<int>(corpus.videos.size());
    if (n_videos < 2) throw ConfigError("experiment: need at least 2 videos");
    const int train_count = (n_videos + 1) / 2;
    std::span<const Video> train(corpus.videos.data(), static_cast<std::size_t>(train_count));
    std::span<const Video> test(corpus.videos.data() + train_count,
                                static_cast<std::size_t>(n_videos - train_count));

    ClassifierBank bank = train_bank(train, config.bank);
    CRFModel model = train_crf(train, bank, config.crf);

    const int D = bank.type_count();
    const int L = bank.label_count();
    const int node_count = static_cast<int>(corpus.videos[0].graph.nodes.size());
    const int full_cost = node_count * corpus.videos[0].descriptors.total_cost_per_node();

    ExperimentResult out;
    out.full_cost = full_cost;
    for (const auto& b : config.budgets) {
        const int units = b.resolve(full_cost);
        if (units <= 0)
            throw ConfigError("experiment: budget " + b.label() + " resolves to no units");
        out.budget_units.push_back(units);
        out.budget_labels.push_back(b.label());
    }

    const bool emit = !config.out_dir.empty();
    const fs::path root = config.out_dir;
    if (emit) {
        fs::create_directories(root);
        fs::create_directories(root / "traces");
        fs::create_directories(root / "policies");
    }

    for (std::size_t vi = 0; vi < config.variants.size(); ++vi) {
        const Variant v = config.variants[vi];
        const std::string vname = variant_name(v);
        const SubsetMask usable = variant_usable_mask(v, D, config.reserved_full_types);
        if (variant_uses_policy(v)) out.traces[vname].resize(config.budgets.size());

        int first_row_of_variant = -1;
        for (std::size_t bi = 0; bi < config.budgets.size(); ++bi) {
            const int B = out.budget_units[bi];
            if (v == Variant::unbounded_crf && first_row_of_variant >= 0) {
                out.rows.push_back(out.rows[static_cast<std::size_t>(first_row_of_variant)]);
                continue;
            }

            std::vector<double> class_correct(static_cast<std::size_t>(L), 0.0);
            std::vector<double> class_mass(static_cast<std::size_t>(L), 0.0);
            double acc_sum = 0.0;
            double cost_sum = 0.0;
            int runs = 0;

            for (std::size_t si = 0; si < config.seeds.size(); ++si) {
                const std::uint64_t s = config.seeds[si];
                PolicyWeights trained;
                const PolicyWeights* policy = nullptr;
                SubsetMask b3_subset = 0;
                if (variant_uses_policy(v)) {
                    CapiConfig cc = config.capi;
                    cc.budget = B;
                    cc.weighted = config.weighted;
                    cc.rollouts = v == Variant::rnd_rnk ? config.rollouts_random
                                                        : config.rollouts_confidence;
                    cc.seed = derive_seed(s, kPolicySeedStream, vi * 131 + bi);
                    CapiResult res = capi_train(train, bank, model, usable, variant_strategy(v), cc);
                    trained = res.policy;
                    policy = &trained;
                    if (emit) {
                        const std::string tag =
                            vname + "_" + budget_file_label(out.budget_labels[bi]) + "_s" + std::to_string(s);
                        write_text(root / ("train_log_" + tag + ".csv"), capi_train_log_csv(res));
                        for (std::size_t k = 0; k < res.iterates.size(); ++k)
                            res.iterates[k].save(
                                (root / "policies" / (tag + "_iter" + std::to_string(k) + ".json"))
                                    .string());
                        res.policy.save((root / "policies" / (tag + "_final.json")).string());
                    }
                    out.policy_training.push_back(
                        {v, out.budget_labels[bi], s, std::move(res)});
                } else if (v == Variant::baseline3) {
                    QLearnConfig qc = config.qlearn;
                    qc.weighted = config.weighted;
                    qc.seed = derive_seed(s, kQlearnSeedStream, bi);
                    b3_subset = qlearn_baseline3(train, bank, model, usable, B, qc).subset;
                }

                for (std::size_t ti = 0; ti < test.size(); ++ti) {
                    const std::uint64_t run_seed =
                        v == Variant::unbounded_crf
                            ? derive_seed(s, kUnboundedSeedStream, ti)
                            : derive_seed(derive_seed(s, kEvalSeedStream, vi * 4096 + bi), ti);
                    EvalOutcome o =
                        eval_one(v, test[ti], bank, model, usable, policy, b3_subset, B, run_seed);
                    const double acc = hamming_accuracy(o.labeling, test[ti].graph, config.weighted);
                    acc_sum += acc;
                    cost_sum += o.cost;
                    ++runs;
                    const auto& g = test[ti].graph;
                    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
                        const double w = config.weighted ? g.nodes[i].voxel_count : 1.0;
                        const int truth = g.nodes[i].true_label;
                        class_mass[static_cast<std::size_t>(truth)] += w;
                        if (o.labeling[i] == truth)
                            class_correct[static_cast<std::size_t>(truth)] += w;
                    }
                    if (o.has_trace) {
                        o.trace.accuracy = acc;
                        if (emit) {
                            const std::string name = vname + "_" + budget_file_label(out.budget_labels[bi]) +
                                                     "_s" + std::to_string(s) + "_v" +
                                                     std::to_string(ti) + ".csv";
                            write_text(root / "traces" / name, trace_to_csv(o.trace));
                        }
                        out.traces[vname][bi].push_back(std::move(o.trace));
                    }
                }
            }

            ResultRow row;
            row.variant = vname;
            row.budget = v == Variant::unbounded_crf ? "-" : out.budget_labels[bi];
            row.budget_units = v == Variant::unbounded_crf ? 0 : B;
            row.per_class.resize(static_cast<std::size_t>(L), 0.0);
            double avg_sum = 0.0;
            int present = 0;
            for (int c = 0; c < L; ++c) {
                if (class_mass[static_cast<std::size_t>(c)] > 0.0) {
                    row.per_class[static_cast<std::size_t>(c)] =
                        class_correct[static_cast<std::size_t>(c)] /
                        class_mass[static_cast<std::size_t>(c)];
                    avg_sum += row.per_class[static_cast<std::size_t>(c)];
                    ++present;
                }
            }
            row.avg = present > 0 ? avg_sum / present : 0.0;
            row.mean_cost = runs > 0 ? cost_sum / runs : 0.0;
            row.mean_accuracy = runs > 0 ? acc_sum / runs : 0.0;
            if (first_row_of_variant < 0) first_row_of_variant = static_cast<int>(out.rows.size());
            out.rows.push_back(std::move(row));
        }
    }

    out.results_csv = results_to_csv(out.rows, L);
    if (emit) {
        write_text(root / "results.csv", out.results_csv);
        for (const auto& [vname, per_budget] : out.traces) {
            bool any = false;
            for (const auto& bucket : per_budget) any = any || !bucket.empty();
            if (!any) continue;
            auto hist = descriptor_histograms(per_budget, out.budget_labels, D);
            write_text(root / ("hist_types_" + vname + ".csv"), histogram_types_csv(hist));
            for (std::size_t bi = 0; bi < per_budget.size(); ++bi)
                write_text(root / ("hist_deciles_" + vname + "_" +
                                   budget_file_label(out.budget_labels[bi]) + ".csv"),
                           histogram_deciles_csv(hist, static_cast<int>(bi)));
        }
    }
    return out;
}

DescriptorHistograms descriptor_histograms(
    const std::vector<std::vector<RunTrace>>& traces_per_budget,
    const std::vector<std::string>& budget_labels, int type_count) {
    if (traces_per_budget.empty())
        throw std::invalid_argument("descriptor_histograms: no traces");
    if (traces_per_budget.size() != budget_labels.size())
        throw std::invalid_argument("descriptor_histograms: label count mismatch");
    if (type_count < 1) throw std::invalid_argument("descriptor_histograms: bad type count");
    std::size_t total = 0;
    for (const auto& bucket : traces_per_budget) total += bucket.size();
    if (total == 0) throw std::invalid_argument("descriptor_histograms: no traces");

    DescriptorHistograms h;
    h.budget_labels = budget_labels;
    h.type_counts.assign(traces_per_budget.size(),
                         std::vector<long>(static_cast<std::size_t>(type_count), 0));
    h.decile_counts.assign(
        traces_per_budget.size(),
        std::vector<std::vector<long>>(10, std::vector<long>(static_cast<std::size_t>(type_count), 0)));

    for (std::size_t b = 0; b < traces_per_budget.size(); ++b) {
        for (const RunTrace& trace : traces_per_budget[b]) {
            long spent = 0;
            for (const auto& e : trace.entries)
                if (!e.action.is_finished()) spent += e.cost;
            if (spent == 0) continue;
            long cum = 0;
            for (const auto& e : trace.entries) {
                if (e.action.is_finished()) continue;
                const int t = e.action.type_id();
                if (t < 0 || t >= type_count)
                    throw std::invalid_argument("descriptor_histograms: type id out of range");
                cum += e.cost;
                const long decile = std::min<long>(9, (cum - 1) * 10 / spent);
                ++h.type_counts[b][static_cast<std::size_t>(t)];
                ++h.decile_counts[b][static_cast<std::size_t>(decile)][static_cast<std::size_t>(t)];
            }
        }
    }
    return h;
}

std::string histogram_types_csv(const DescriptorHistograms& h) {
    const int D = h.type_counts.empty() ? 0 : static_cast<int>(h.type_counts[0].size());
    std::string csv = "budget";
    for (int t = 0; t < D; ++t) csv += ",type_" + std::to_string(t);
    csv += "\n";
    for (std::size_t b = 0; b < h.type_counts.size(); ++b) {
        csv += h.budget_labels[b];
        for (long c : h.type_counts[b]) csv += "," + std::to_string(c);
        csv += "\n";
    }
    return csv;
}

std::string histogram_deciles_csv(const DescriptorHistograms& h, int budget_index) {
    if (budget_index < 0 || budget_index >= static_cast<int>(h.decile_counts.size()))
        throw std::invalid_argument("histogram_deciles_csv: bad budget index");
    const auto& deciles = h.decile_counts[static_cast<std::size_t>(budget_index)];
    const int D = deciles.empty() ? 0 : static_cast<int>(deciles[0].size());
    std::string csv = "decile";
    for (int t = 0; t < D; ++t) csv += ",type_" + std::to_string(t);
    csv += "\n";
    for (std::size_t d = 0; d < deciles.size(); ++d) {
        csv += std::to_string(d);
        for (long c : deciles[d]) csv += "," + std::to_string(c);
        csv += "\n";
    }
    return csv;
}

} // namespace bcrf
