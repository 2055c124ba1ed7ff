#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bcrf/budget_engine.hpp"
#include "bcrf/classifier_bank.hpp"
#include "bcrf/crf.hpp"
#include "bcrf/errors.hpp"
#include "bcrf/harness.hpp"
#include "bcrf/learn.hpp"
#include "bcrf/policy.hpp"
#include "bcrf/rng.hpp"
#include "bcrf/svgraph.hpp"

namespace fs = std::filesystem;
using namespace bcrf;

namespace {

constexpr std::uint64_t kInferRunStream = 0x1FE2ULL;
constexpr std::uint64_t kInferQlearnStream = 0x1FB3ULL;

struct CommonOpts {
    std::string config_path;
    std::string out_dir = "out";
    std::uint64_t seed = 0;
    bool weighted = true;
    CLI::Option* seed_opt = nullptr;
    CLI::Option* weighted_opt = nullptr;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("--config", o.config_path, "experiment config JSON")
        ->check(CLI::ExistingFile);
    cmd->add_option("--out", o.out_dir, "artifact directory")->capture_default_str();
    o.seed_opt = cmd->add_option("--seed", o.seed, "override the configured seed");
    o.weighted_opt = cmd->add_option("--weighted-accuracy", o.weighted,
                                     "voxel-weighted accuracy (true/false)");
}

ExperimentConfig make_config(const CommonOpts& o) {
    ExperimentConfig cfg = o.config_path.empty() ? default_experiment_config()
                                                 : load_experiment_config(o.config_path);
    if (o.seed_opt->count() > 0) cfg.seeds = {o.seed};
    if (o.weighted_opt->count() > 0) cfg.weighted = o.weighted;
    if (cfg.seeds.empty()) cfg.seeds = {1};
    return cfg;
}

std::string fmt(double v, int digits = 4) {
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

fs::path corpus_file(const ExperimentConfig& cfg, const CommonOpts& o) {
    if (!cfg.corpus_path.empty()) return cfg.corpus_path;
    return fs::path(o.out_dir) / "corpus.json";
}

Corpus load_corpus_or_hint(const fs::path& path) {
    if (!fs::exists(path))
        throw DataError("corpus not found at " + path.string() + "; run `bcrf gen` first");
    return load_corpus(path.string());
}

ClassifierBank load_bank_or_hint(const CommonOpts& o) {
    const fs::path path = fs::path(o.out_dir) / "bank.json";
    if (!fs::exists(path))
        throw DataError("classifier bank not found at " + path.string() +
                        "; run `bcrf train-classifiers` first");
    return ClassifierBank::load(path.string());
}

CRFModel load_model_or_hint(const CommonOpts& o) {
    const fs::path path = fs::path(o.out_dir) / "crf.json";
    if (!fs::exists(path))
        throw DataError("CRF model not found at " + path.string() + "; run `bcrf train-crf` first");
    return CRFModel::load(path.string());
}

int train_half(std::size_t n) { return (static_cast<int>(n) + 1) / 2; }

std::span<const Video> train_split(const Corpus& corpus) {
    return {corpus.videos.data(), static_cast<std::size_t>(train_half(corpus.videos.size()))};
}

std::span<const Video> test_split(const Corpus& corpus) {
    const int tc = train_half(corpus.videos.size());
    return {corpus.videos.data() + tc, corpus.videos.size() - static_cast<std::size_t>(tc)};
}

int full_video_cost(const Corpus& corpus) {
    const Video& v0 = corpus.videos.at(0);
    return static_cast<int>(v0.graph.nodes.size()) * v0.descriptors.total_cost_per_node();
}

int run_gen(const CommonOpts& o) {
    ExperimentConfig cfg = make_config(o);
    if (o.seed_opt->count() > 0) cfg.corpus.seed = o.seed;
    Corpus corpus = generate_corpus(cfg.corpus, cfg.video_count);
    const fs::path path = corpus_file(cfg, o);
    if (!path.parent_path().empty()) fs::create_directories(path.parent_path());
    save_corpus(corpus, path.string());
    const Video& v0 = corpus.videos[0];
    std::printf("wrote %s: %d videos, %zu nodes, %zu edges, L=%d, D=%d, full cost %d units\n",
                path.string().c_str(), static_cast<int>(corpus.videos.size()),
                v0.graph.nodes.size(), v0.graph.edges.size(), corpus.config.label_count,
                corpus.config.type_count(), full_video_cost(corpus));
    return 0;
}

int run_train_classifiers(const CommonOpts& o) {
    ExperimentConfig cfg = make_config(o);
    if (o.seed_opt->count() > 0) cfg.bank.seed = o.seed;
    Corpus corpus = load_corpus_or_hint(corpus_file(cfg, o));
    auto train = train_split(corpus);
    ClassifierBank bank = train_bank(train, cfg.bank);
    fs::create_directories(o.out_dir);
    const fs::path path = fs::path(o.out_dir) / "bank.json";
    bank.save(path.string());
    std::printf("wrote %s: %d classifiers (D=%d, L=%d) trained on %zu videos\n",
                path.string().c_str(), bank.classifier_count(), bank.type_count(),
                bank.label_count(), train.size());
    return 0;
}

int run_train_crf(const CommonOpts& o) {
    ExperimentConfig cfg = make_config(o);
    if (o.seed_opt->count() > 0) cfg.crf.seed = o.seed;
    Corpus corpus = load_corpus_or_hint(corpus_file(cfg, o));
    ClassifierBank bank = load_bank_or_hint(o);
    CRFModel model = train_crf(train_split(corpus), bank, cfg.crf);
    fs::create_directories(o.out_dir);
    const fs::path path = fs::path(o.out_dir) / "crf.json";
    model.save(path.string());
    std::printf("wrote %s: L=%d, sigma=%s\n", path.string().c_str(), model.label_count,
                fmt(model.sigma).c_str());
    return 0;
}

int run_train_policy(const CommonOpts& o, const std::string& budget_text,
                     const std::string& variant_text) {
    ExperimentConfig cfg = make_config(o);
    const Variant v = variant_from_name(variant_text);
    if (!variant_uses_policy(v))
        throw ConfigError("train-policy: variant " + variant_text + " takes no learned policy");
    const BudgetSpec spec = parse_budget(budget_text);

    Corpus corpus = load_corpus_or_hint(corpus_file(cfg, o));
    ClassifierBank bank = load_bank_or_hint(o);
    CRFModel model = load_model_or_hint(o);
    const int budget = spec.resolve(full_video_cost(corpus));
    if (budget <= 0) throw ConfigError("train-policy: budget resolves to no units");

    CapiConfig cc = cfg.capi;
    cc.budget = budget;
    cc.weighted = cfg.weighted;
    cc.rollouts = v == Variant::rnd_rnk ? cfg.rollouts_random : cfg.rollouts_confidence;
    cc.seed = cfg.seeds[0];
    const SubsetMask usable = variant_usable_mask(v, bank.type_count(), cfg.reserved_full_types);
    CapiResult res =
        capi_train(train_split(corpus), bank, model, usable, variant_strategy(v), cc);

    const std::string tag = std::string(variant_name(v)) + "_" + budget_file_label(spec.label()) +
                            "_s" + std::to_string(cc.seed);
    const fs::path root = o.out_dir;
    fs::create_directories(root / "policies");
    write_text(root / ("train_log_" + tag + ".csv"), capi_train_log_csv(res));
    for (std::size_t k = 0; k < res.iterates.size(); ++k)
        res.iterates[k].save(
            (root / "policies" / (tag + "_iter" + std::to_string(k) + ".json")).string());
    const fs::path final_path = root / "policies" / (tag + "_final.json");
    res.policy.save(final_path.string());

    for (const auto& it : res.iterations)
        std::printf("iter %d: train acc %s -> %s (%d states, %ss)%s\n", it.iteration,
                    fmt(it.old_acc).c_str(), fmt(it.new_acc).c_str(), it.states_used,
                    fmt(it.elapsed_sec, 1).c_str(), it.improved ? " *" : "");
    std::printf("%s at %s (B=%d): initial %s, best %s; wrote %s\n", variant_name(v),
                spec.label().c_str(), budget, fmt(res.initial_acc).c_str(),
                fmt(res.best_acc).c_str(), final_path.string().c_str());
    return 0;
}

int run_infer(const CommonOpts& o, const std::string& budget_text,
              const std::string& variant_text) {
    ExperimentConfig cfg = make_config(o);
    const Variant v = variant_from_name(variant_text);
    const BudgetSpec spec = parse_budget(budget_text);

    Corpus corpus = load_corpus_or_hint(corpus_file(cfg, o));
    ClassifierBank bank = load_bank_or_hint(o);
    CRFModel model = load_model_or_hint(o);
    auto test = test_split(corpus);
    if (test.empty()) throw DataError("corpus has no test half");
    const int budget = spec.resolve(full_video_cost(corpus));
    if (budget <= 0) throw ConfigError("infer: budget resolves to no units");

    const std::uint64_t s = cfg.seeds[0];
    const SubsetMask usable = variant_usable_mask(v, bank.type_count(), cfg.reserved_full_types);
    const std::string blabel = budget_file_label(spec.label());
    const std::string tag =
        std::string(variant_name(v)) + "_" + blabel + "_s" + std::to_string(s);

    PolicyWeights policy;
    const PolicyWeights* pol = nullptr;
    SubsetMask b3_subset = 0;
    if (variant_uses_policy(v)) {
        const fs::path path = fs::path(o.out_dir) / "policies" / (tag + "_final.json");
        if (!fs::exists(path))
            throw DataError("policy not found at " + path.string() +
                            "; run `bcrf train-policy --budget " + spec.label() + " --variant " +
                            variant_name(v) + "` first");
        policy = PolicyWeights::load(path.string());
        pol = &policy;
    } else if (v == Variant::baseline3) {
        QLearnConfig qc = cfg.qlearn;
        qc.weighted = cfg.weighted;
        qc.seed = derive_seed(s, kInferQlearnStream);
        b3_subset =
            qlearn_baseline3(train_split(corpus), bank, model, usable, budget, qc).subset;
        std::printf("Baseline3 learned subset mask %u\n", b3_subset);
    } else if (v == Variant::unbounded_crf) {
        std::printf("UnboundedCRF ignores the budget\n");
    }

    const fs::path root = o.out_dir;
    if (pol) fs::create_directories(root / "traces");
    std::string csv = "video,accuracy,cost\n";
    double acc_sum = 0.0, cost_sum = 0.0;
    for (std::size_t ti = 0; ti < test.size(); ++ti) {
        const std::uint64_t run_seed = derive_seed(s, kInferRunStream, ti);
        std::vector<int> labeling;
        int cost = 0;
        if (pol) {
            RunEnv env{&test[ti], &bank, &model, usable, variant_strategy(v)};
            RunTrace trace = run_budgeted_inference(env, *pol, budget, run_seed);
            for (const auto& e : trace.entries) cost += e.cost;
            labeling = trace.labeling;
            trace.accuracy = hamming_accuracy(labeling, test[ti].graph, cfg.weighted);
            write_text(root / "traces" / (tag + "_v" + std::to_string(ti) + ".csv"),
                       trace_to_csv(trace));
        } else if (v == Variant::baseline1) {
            auto r = baseline1(test[ti], bank, model, usable, budget, run_seed);
            labeling = std::move(r.labeling);
            cost = r.cost_spent;
        } else if (v == Variant::baseline2) {
            auto r = baseline2(test[ti], bank, model, usable, budget, run_seed);
            labeling = std::move(r.labeling);
            cost = r.cost_spent;
        } else if (v == Variant::baseline3) {
            auto r = apply_global_subset(test[ti], bank, model, usable, b3_subset, run_seed);
            labeling = std::move(r.labeling);
            cost = r.cost_spent;
        } else {
            labeling = unbounded_inference(test[ti], bank, model, run_seed);
        }
        const double acc = hamming_accuracy(labeling, test[ti].graph, cfg.weighted);
        acc_sum += acc;
        cost_sum += cost;
        csv += std::to_string(ti) + "," + fmt(acc, 6) + "," + std::to_string(cost) + "\n";
    }

    fs::create_directories(root);
    const fs::path csv_path = root / ("infer_" + std::string(variant_name(v)) + "_" + blabel + ".csv");
    write_text(csv_path, csv);
    std::printf("%s at %s (B=%d): mean accuracy %s, mean cost %s over %zu test videos; wrote %s\n",
                variant_name(v), spec.label().c_str(), budget,
                fmt(acc_sum / static_cast<double>(test.size())).c_str(),
                fmt(cost_sum / static_cast<double>(test.size()), 1).c_str(), test.size(),
                csv_path.string().c_str());
    return 0;
}

int run_eval(const CommonOpts& o) {
    ExperimentConfig cfg = make_config(o);
    cfg.out_dir = o.out_dir;
    if (cfg.corpus_path.empty()) {
        const fs::path path = fs::path(o.out_dir) / "corpus.json";
        if (fs::exists(path)) cfg.corpus_path = path.string();
    }
    ExperimentResult res = run_experiment(cfg);
    std::cout << res.results_csv;
    std::printf("full cost %d units; artifacts under %s\n", res.full_cost, o.out_dir.c_str());
    return 0;
}

int to_int(const std::string& field, const std::string& origin) {
    try {
        std::size_t used = 0;
        const int v = std::stoi(field, &used);
        if (used != field.size()) throw std::invalid_argument(field);
        return v;
    } catch (const std::exception&) {
        throw DataError("bad integer field '" + field + "' in " + origin);
    }
}

RunTrace parse_trace_csv(const std::string& text, const std::string& origin) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != "step,node,action,cost,remaining")
        throw DataError("bad trace header in " + origin);
    RunTrace trace;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        std::vector<std::string> fields;
        std::string field;
        while (std::getline(row, field, ',')) fields.push_back(field);
        if (fields.size() != 5) throw DataError("bad trace row in " + origin + ": " + line);
        TraceEntry e;
        e.step = to_int(fields[0], origin);
        e.node = to_int(fields[1], origin);
        e.action = fields[2] == "FINISHED" ? Action::finished()
                                           : Action::descriptor(to_int(fields[2], origin));
        e.cost = to_int(fields[3], origin);
        e.remaining_after = to_int(fields[4], origin);
        trace.entries.push_back(e);
    }
    return trace;
}

int run_hist(const CommonOpts& o) {
    ExperimentConfig cfg = make_config(o);
    int type_count = cfg.corpus.type_count();
    const fs::path cpath = corpus_file(cfg, o);
    if (fs::exists(cpath)) type_count = load_corpus(cpath.string()).config.type_count();

    const fs::path traces_dir = fs::path(o.out_dir) / "traces";
    if (!fs::exists(traces_dir))
        throw DataError("no traces under " + traces_dir.string() +
                        "; run `bcrf eval` or `bcrf infer` first");
    std::vector<std::string> names;
    for (const auto& entry : fs::directory_iterator(traces_dir))
        if (entry.is_regular_file() && entry.path().extension() == ".csv")
            names.push_back(entry.path().filename().string());
    std::sort(names.begin(), names.end());

    std::vector<std::string> budget_labels;
    for (const auto& b : cfg.budgets) budget_labels.push_back(b.label());

    bool wrote_any = false;
    for (Variant v : cfg.variants) {
        if (!variant_uses_policy(v)) continue;
        const std::string vname = variant_name(v);
        std::vector<std::vector<RunTrace>> per_budget(budget_labels.size());
        bool any = false;
        for (std::size_t bi = 0; bi < budget_labels.size(); ++bi) {
            const std::string prefix = vname + "_" + budget_file_label(budget_labels[bi]) + "_s";
            for (const auto& name : names) {
                if (name.rfind(prefix, 0) != 0) continue;
                std::ifstream in(traces_dir / name);
                std::ostringstream ss;
                ss << in.rdbuf();
                per_budget[bi].push_back(parse_trace_csv(ss.str(), name));
                any = true;
            }
        }
        if (!any) continue;
        DescriptorHistograms hist;
        try {
            hist = descriptor_histograms(per_budget, budget_labels, type_count);
        } catch (const std::invalid_argument& e) {
            throw DataError(std::string("hist: ") + e.what());
        }
        const fs::path types_path = fs::path(o.out_dir) / ("hist_types_" + vname + ".csv");
        write_text(types_path, histogram_types_csv(hist));
        std::printf("wrote %s\n", types_path.string().c_str());
        for (std::size_t bi = 0; bi < budget_labels.size(); ++bi) {
            if (per_budget[bi].empty()) continue;
            const fs::path p = fs::path(o.out_dir) / ("hist_deciles_" + vname + "_" +
                                                      budget_file_label(budget_labels[bi]) + ".csv");
            write_text(p, histogram_deciles_csv(hist, static_cast<int>(bi)));
            std::printf("wrote %s\n", p.string().c_str());
        }
        wrote_any = true;
    }
    if (!wrote_any)
        throw DataError("no traces matched the configured policy variants and budgets under " +
                        traces_dir.string());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"budgeted CRF inference over supervoxel graphs"};
    app.require_subcommand(1);

    CommonOpts gen_o, cls_o, crf_o, pol_o, inf_o, eval_o, hist_o;
    std::string pol_budget, pol_variant = "NhbRnk";
    std::string inf_budget, inf_variant;

    CLI::App* gen = app.add_subcommand("gen", "generate and save the synthetic corpus");
    add_common(gen, gen_o);
    CLI::App* cls = app.add_subcommand("train-classifiers",
                                       "train the per-subset classifier bank on the train half");
    add_common(cls, cls_o);
    CLI::App* crf = app.add_subcommand("train-crf", "train CRF weights on the train half");
    add_common(crf, crf_o);
    CLI::App* pol = app.add_subcommand("train-policy", "CAPI-train a selection policy");
    add_common(pol, pol_o);
    pol->add_option("--budget", pol_budget, "budget, e.g. \"20%\" or \"614\"")->required();
    pol->add_option("--variant", pol_variant, "RndRnk | NhbRnk | Full")->capture_default_str();
    CLI::App* inf = app.add_subcommand("infer", "run budgeted inference on the test half");
    add_common(inf, inf_o);
    inf->add_option("--budget", inf_budget, "budget, e.g. \"20%\" or \"614\"")->required();
    inf->add_option("--variant", inf_variant, "variant name, e.g. NhbRnk or Baseline1")
        ->required();
    CLI::App* ev = app.add_subcommand("eval", "full sweep over variants and budgets");
    add_common(ev, eval_o);
    CLI::App* hi = app.add_subcommand("hist", "descriptor-selection histograms from saved traces");
    add_common(hi, hist_o);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (gen->parsed()) return run_gen(gen_o);
        if (cls->parsed()) return run_train_classifiers(cls_o);
        if (crf->parsed()) return run_train_crf(crf_o);
        if (pol->parsed()) return run_train_policy(pol_o, pol_budget, pol_variant);
        if (inf->parsed()) return run_infer(inf_o, inf_budget, inf_variant);
        if (ev->parsed()) return run_eval(eval_o);
        if (hi->parsed()) return run_hist(hist_o);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
