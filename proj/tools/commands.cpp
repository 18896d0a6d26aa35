#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "dropkit/checkpoint.hpp"
#include "dropkit/error.hpp"
#include "dropkit/influence.hpp"
#include "dropkit/io.hpp"
#include "dropkit/json.hpp"
#include "dropkit/loo.hpp"
#include "dropkit/pipeline.hpp"
#include "dropkit/report_io.hpp"
#include "dropkit/selfcheck.hpp"
#include "dropkit/trainer.hpp"

namespace dropkit::cli {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

constexpr const char* kParamLayout =
    "layer by layer: weight matrix row-major (outputs x inputs), then bias vector";

json default_config() {
    TrainConfig train;
    IhvpConfig ihvp;
    json t = train;
    t.erase("seed");
    json i = ihvp;
    i.erase("seed");
    return {
        {"seed", 0},
        {"workers", 1},
        {"overwrite", false},
        {"out", ""},
        {"checkpoint", ""},
        {"data",
         {{"train", ""}, {"val", ""}, {"label_column", "label"}, {"standardize", false},
          {"val_fraction", 0.1}}},
        {"spec",
         {{"kind", "softmax"}, {"hidden_dim", 0}, {"activation", "none"}, {"l2_reg", 0.0},
          {"bias", true}, {"classes", 0}}},
        {"train", t},
        {"ihvp", i},
        {"rounds", 2},
        {"round2_seed", nullptr},
        {"loo", {{"max_samples", 500}, {"force", false}, {"grad_tol", 1e-8}, {"max_iter", 200000}}},
        {"check", {{"draws", 20}, {"inject_fault", false}}},
    };
}

// Collects flags that were given explicitly into a JSON patch, so flags can
// override a config file which overrides defaults.
class FlagSet {
public:
    explicit FlagSet(CLI::App* app) : app_(app) {}

    template <typename T>
    CLI::Option* add(const std::string& name, const std::string& pointer, const std::string& desc) {
        auto value = std::make_shared<T>();
        CLI::Option* opt = app_->add_option(name, *value, desc);
        collectors_.push_back([opt, value, pointer](json& patch) {
            if (opt->count() > 0) patch[json::json_pointer(pointer)] = *value;
        });
        return opt;
    }

    CLI::Option* flag(const std::string& name, const std::string& pointer, json when_set,
                      const std::string& desc) {
        CLI::Option* opt = app_->add_flag(name, desc);
        collectors_.push_back([opt, when_set, pointer](json& patch) {
            if (opt->count() > 0) patch[json::json_pointer(pointer)] = when_set;
        });
        return opt;
    }

    /// Custom handling for flags whose value needs parsing.
    CLI::Option* custom(const std::string& name, const std::string& desc,
                        std::function<void(const std::string&, json&)> apply) {
        auto value = std::make_shared<std::string>();
        CLI::Option* opt = app_->add_option(name, *value, desc);
        collectors_.push_back([opt, value, apply](json& patch) {
            if (opt->count() > 0) apply(*value, patch);
        });
        return opt;
    }

    void collect(json& patch) const {
        for (const auto& c : collectors_) c(patch);
    }

    std::string config_file;

private:
    CLI::App* app_;
    std::vector<std::function<void(json&)>> collectors_;
};

std::vector<LrStep> parse_lr(const std::string& text) {
    std::vector<LrStep> steps;
    std::stringstream ss(text);
    std::string item;
    auto number = [&](const std::string& s) {
        try {
            std::size_t used = 0;
            const double v = std::stod(s, &used);
            if (used != s.size()) throw std::invalid_argument(s);
            return v;
        } catch (const std::exception&) {
            throw ConfigError("invalid --lr value '" + text + "'");
        }
    };
    while (std::getline(ss, item, ',')) {
        const auto colon = item.find(':');
        if (colon == std::string::npos) {
            steps.push_back({steps.empty() ? 0 : steps.back().epoch_start + 1, number(item)});
        } else {
            const double epoch = number(item.substr(0, colon));
            if (epoch < 0 || epoch != static_cast<double>(static_cast<std::size_t>(epoch))) {
                throw ConfigError("invalid epoch in --lr value '" + text + "'");
            }
            steps.push_back({static_cast<std::size_t>(epoch), number(item.substr(colon + 1))});
        }
    }
    if (steps.empty()) throw ConfigError("--lr needs at least one learning rate");
    return steps;
}

void add_common(FlagSet& f, CLI::App* app, bool need_out) {
    app->add_option("--config", f.config_file, "JSON config file (flags override it)");
    f.add<std::uint64_t>("--seed", "/seed", "Seed for every random choice");
    auto* out = f.add<std::string>("--out", "/out", "Output directory");
    if (!need_out) out->description("Output directory (optional)");
    f.flag("--overwrite", "/overwrite", true, "Allow writing into a non-empty output directory");
    f.add<std::size_t>("--workers", "/workers", "Worker threads (never changes results)");
}

void add_data(FlagSet& f) {
    f.add<std::string>("--data,--train-data", "/data/train",
                       "Training data: CSV path or idx:<images>,<labels>");
    f.add<std::string>("--val-data", "/data/val", "Validation data (same formats)");
    f.add<std::string>("--label-column", "/data/label_column", "CSV label column name");
    f.flag("--standardize", "/data/standardize", true,
           "Standardize features with training-set mean and std");
}

void add_spec(FlagSet& f) {
    f.custom("--spec", "Model kind (linear-mse|logistic|softmax|mlp) or a JSON spec file",
             [](const std::string& v, json& patch) {
                 if (v.size() > 5 && v.ends_with(".json")) {
                     const json file = json::parse(read_file(v));
                     for (auto it = file.begin(); it != file.end(); ++it) {
                         patch["spec"][it.key()] = it.value();
                     }
                 } else {
                     patch["spec"]["kind"] = v;
                 }
             });
    f.add<std::size_t>("--hidden", "/spec/hidden_dim", "Hidden units (mlp)");
    f.add<std::string>("--activation", "/spec/activation", "tanh or relu (mlp)");
    f.add<double>("--l2-reg", "/spec/l2_reg", "L2 regularization strength");
    f.add<std::size_t>("--classes", "/spec/classes", "Number of classes (default: inferred)");
    f.flag("--no-bias", "/spec/bias", false, "Models without bias terms");
}

void add_train(FlagSet& f) {
    f.add<std::size_t>("--epochs", "/train/epochs", "Training epochs");
    f.add<std::size_t>("--batch-size", "/train/batch_size", "Minibatch size");
    f.custom("--lr", "Learning rate, or a schedule like 0:0.1,20:0.01",
             [](const std::string& v, json& patch) {
                 json steps = json::array();
                 for (const auto& s : parse_lr(v)) {
                     steps.push_back({{"epoch_start", s.epoch_start}, {"learning_rate", s.learning_rate}});
                 }
                 patch["train"]["lr_schedule"] = steps;
             });
    f.add<double>("--momentum", "/train/momentum", "SGD momentum in [0, 1)");
    f.add<double>("--weight-decay", "/train/weight_decay", "Extra L2 folded into the objective");
    f.add<std::string>("--init", "/train/init", "scaled-normal-fan-in or scaled-uniform-fan-avg");
    f.flag("--no-shuffle", "/train/shuffle", false, "Visit samples in file order");
}

void add_ihvp(FlagSet& f) {
    f.add<std::string>("--ihvp", "/ihvp/method", "Inverse-HVP solver: cg, lissa or both");
    f.add<double>("--damping", "/ihvp/damping", "Damping added to the Hessian");
    f.add<double>("--cg-tol", "/ihvp/cg_tol", "CG relative residual tolerance");
    f.add<std::size_t>("--cg-max-iter", "/ihvp/cg_max_iter", "CG iteration cap");
    f.add<std::size_t>("--lissa-depth", "/ihvp/lissa_depth", "LiSSA recursion depth");
    f.add<double>("--lissa-scale", "/ihvp/lissa_scale", "LiSSA Hessian scale");
    f.add<std::size_t>("--lissa-repeats", "/ihvp/lissa_repeats", "LiSSA independent repeats");
    f.add<std::size_t>("--lissa-batch", "/ihvp/lissa_batch", "LiSSA minibatch size");
}

// ------------------------------------------------------------- run context

struct Context {
    std::string command;
    json config;
    json input_checksums = json::object();
    json outputs = json::array();
    json summary = json::object();
    std::optional<fs::path> out_dir;
    std::ostream& out;
    std::ostream& err;
};

std::string file_checksum(const fs::path& p) {
    const std::string bytes = read_file(p);
    return hex64(fnv1a(std::as_bytes(std::span(bytes.data(), bytes.size()))));
}

void note_input(Context& ctx, const fs::path& p) { ctx.input_checksums[p.string()] = file_checksum(p); }

fs::path output(Context& ctx, const std::string& name) {
    const fs::path p = *ctx.out_dir / name;
    ctx.outputs.push_back(p.string());
    return p;
}

void prepare_out_dir(Context& ctx, bool required) {
    const std::string out = ctx.config.at("out").get<std::string>();
    if (out.empty()) {
        if (required) throw ConfigError("--out is required");
        return;
    }
    const fs::path dir(out);
    if (fs::exists(dir)) {
        if (!fs::is_directory(dir)) throw ConfigError("--out '" + out + "' is not a directory");
        if (!fs::is_empty(dir) && !ctx.config.at("overwrite").get<bool>()) {
            throw ConfigError("output directory '" + out + "' is not empty; pass --overwrite");
        }
    } else {
        fs::create_directories(dir);
    }
    ctx.out_dir = dir;
}

void write_manifest(const Context& ctx, int status, double seconds, const std::string& error) {
    if (!ctx.out_dir) return;
    json m = {{"command", ctx.command},
              {"config", ctx.config},
              {"input_checksums", ctx.input_checksums},
              {"output_paths", ctx.outputs},
              {"wall_time_seconds", seconds},
              {"exit_status", status},
              {"summary", ctx.summary}};
    if (!error.empty()) m["error"] = error;
    write_file_atomic(*ctx.out_dir / "manifest.json", m.dump(2) + "\n");
}

// ------------------------------------------------------------- inputs

Dataset load_dataset(Context& ctx, const std::string& spec_text, LabelKind labels) {
    if (spec_text.starts_with("idx:")) {
        const std::string rest = spec_text.substr(4);
        const auto comma = rest.find(',');
        if (comma == std::string::npos) {
            throw ConfigError("IDX inputs are given as idx:<images>,<labels>");
        }
        const fs::path images = rest.substr(0, comma), label_file = rest.substr(comma + 1);
        note_input(ctx, images);
        note_input(ctx, label_file);
        return load_idx(images, label_file);
    }
    CsvSchema schema;
    schema.label_column = ctx.config.at("/data/label_column"_json_pointer).get<std::string>();
    schema.label_kind = labels;
    note_input(ctx, spec_text);
    return load_csv(spec_text, schema);
}

struct Inputs {
    Dataset train;
    std::optional<Dataset> validation;
};

LabelKind label_kind_for(const std::string& kind) {
    return kind == "linear-mse" ? LabelKind::real : LabelKind::class_index;
}

Inputs load_inputs(Context& ctx, LabelKind labels, bool need_val) {
    const std::string train_path = ctx.config.at("/data/train"_json_pointer).get<std::string>();
    if (train_path.empty()) throw ConfigError("--data is required");
    const std::string val_path = ctx.config.at("/data/val"_json_pointer).get<std::string>();
    if (need_val && val_path.empty()) throw ConfigError("--val-data is required");

    Inputs in{load_dataset(ctx, train_path, labels), std::nullopt};
    if (!val_path.empty()) in.validation = load_dataset(ctx, val_path, labels);
    if (ctx.config.at("/data/standardize"_json_pointer).get<bool>()) {
        const auto st = Standardizer::fit(in.train);
        in.train = st.apply(in.train);
        if (in.validation) in.validation = st.apply(*in.validation);
    }
    return in;
}

ModelSpec resolve_spec(const Context& ctx, const Inputs& in) {
    const json& j = ctx.config.at("spec");
    ModelSpec spec;
    spec.kind = parse_model_kind(j.at("kind").get<std::string>());
    spec.input_dim = in.train.input_dim();
    spec.l2_reg = j.at("l2_reg").get<double>();
    spec.bias = j.at("bias").get<bool>();
    spec.hidden_dim = j.at("hidden_dim").get<std::size_t>();
    spec.activation = parse_activation(j.at("activation").get<std::string>());
    if (spec.kind == ModelKind::mlp) {
        if (spec.hidden_dim == 0) spec.hidden_dim = 16;
        if (spec.activation == Activation::none) spec.activation = Activation::tanh;
    }
    std::size_t classes = j.at("classes").get<std::size_t>();
    if (classes == 0) {
        classes = in.train.class_count();
        if (in.validation) classes = std::max(classes, in.validation->class_count());
    }
    switch (spec.kind) {
        case ModelKind::linear_mse: spec.output_dim = 1; break;
        case ModelKind::logistic: spec.output_dim = 2; break;
        default: spec.output_dim = std::max<std::size_t>(classes, 2);
    }
    validate(spec);
    return spec;
}

TrainConfig resolve_train(const Context& ctx) {
    TrainConfig tc = ctx.config.at("train").get<TrainConfig>();
    tc.seed = ctx.config.at("seed").get<std::uint64_t>();
    validate(tc);
    return tc;
}

IhvpConfig resolve_ihvp(const Context& ctx) {
    IhvpConfig ic = ctx.config.at("ihvp").get<IhvpConfig>();
    ic.seed = ctx.config.at("seed").get<std::uint64_t>();
    validate(ic);
    return ic;
}

ScoreOptions score_options(const Context& ctx) {
    ScoreOptions o;
    o.workers = ctx.config.at("workers").get<std::size_t>();
    return o;
}

void save_model(Context& ctx, const std::string& name, const ModelSpec& objective,
                const ParamVector& params, const TrainConfig& tc, const Dataset& data) {
    const fs::path path = output(ctx, name);
    write_checkpoint(path, objective, params);
    write_checkpoint_metadata(path, {{"format", "dropkit-checkpoint"},
                                     {"format_version", kCheckpointVersion},
                                     {"seed", tc.seed},
                                     {"train_config", tc},
                                     {"spec", objective},
                                     {"param_count", params.size()},
                                     {"param_layout", kParamLayout},
                                     {"dataset_checksum", hex64(data.checksum())},
                                     {"dataset_size", data.size()},
                                     {"model_hash", hex64(fnv1a(params))}});
    ctx.outputs.push_back(metadata_path(path).string());
}

// ------------------------------------------------------------- commands

int cmd_train(Context& ctx) {
    prepare_out_dir(ctx, true);
    const auto kind = ctx.config.at("/spec/kind"_json_pointer).get<std::string>();
    const Inputs in = load_inputs(ctx, label_kind_for(kind), false);
    const ModelSpec spec = resolve_spec(ctx, in);
    const TrainConfig tc = resolve_train(ctx);

    const ParamVector params = train(spec, in.train, tc);
    const ModelSpec objective = objective_spec(spec, tc);
    save_model(ctx, "model.ckpt", objective, params, tc, in.train);

    json metrics = {{"train", evaluate(spec, params, in.train)}};
    if (in.validation) metrics["validation"] = evaluate(spec, params, *in.validation);
    write_file_atomic(output(ctx, "metrics.json"), metrics.dump(2) + "\n");
    ctx.summary = {{"param_count", params.size()}, {"metrics", metrics}};
    ctx.out << "trained " << to_string(spec.kind) << " (" << params.size() << " params) on "
            << in.train.size() << " samples; checkpoint " << (*ctx.out_dir / "model.ckpt").string()
            << "\n";
    return kOk;
}

int cmd_score(Context& ctx) {
    prepare_out_dir(ctx, true);
    const std::string ck_path = ctx.config.at("checkpoint").get<std::string>();
    if (ck_path.empty()) throw ConfigError("--checkpoint is required");
    const Checkpoint ck = read_checkpoint(ck_path);
    note_input(ctx, ck_path);
    const Inputs in = load_inputs(ctx, label_kind_for(to_string(ck.spec.kind)), true);
    if (in.train.input_dim() != ck.spec.input_dim) {
        throw ShapeError("training data has " + std::to_string(in.train.input_dim()) +
                         " features, checkpoint expects " + std::to_string(ck.spec.input_dim));
    }
    const IhvpConfig ic = resolve_ihvp(ctx);
    const InfluenceReport report =
        score_all(ck.spec, ck.params, in.train, *in.validation, ic, score_options(ctx));
    write_report(output(ctx, "report.jsonl"), report);

    const auto unfavorable = select_unfavorable(report);
    const double worst = report.ihvp_residuals.empty()
                             ? 0.0
                             : *std::max_element(report.ihvp_residuals.begin(), report.ihvp_residuals.end());
    ctx.summary = {{"n", report.n_train},
                   {"k", report.k_validation},
                   {"ihvp_solve_count", report.ihvp_solve_count},
                   {"max_residual", worst},
                   {"unfavorable_count", unfavorable.size()}};
    ctx.out << "scored " << report.n_train << " training samples against " << report.k_validation
            << " validation samples with " << report.ihvp_solve_count << " inverse-HVP solves; "
            << unfavorable.size() << " unfavorable\n";
    return kOk;
}

int cmd_two_round(Context& ctx) {
    prepare_out_dir(ctx, true);
    const auto kind = ctx.config.at("/spec/kind"_json_pointer).get<std::string>();
    const Inputs in = load_inputs(ctx, label_kind_for(kind), false);
    const ModelSpec spec = resolve_spec(ctx, in);
    const TrainConfig tc = resolve_train(ctx);
    const IhvpConfig ic = resolve_ihvp(ctx);
    const auto rounds = ctx.config.at("rounds").get<std::size_t>();
    if (rounds == 0) throw ConfigError("--rounds must be at least 1");

    PipelineOptions opts;
    opts.val_fraction = ctx.config.at("/data/val_fraction"_json_pointer).get<double>();
    opts.score = score_options(ctx);
    if (!ctx.config.at("round2_seed").is_null()) {
        opts.round2_seed = ctx.config.at("round2_seed").get<std::uint64_t>();
    }
    const Split sets = resolve_validation(spec, in.train, in.validation, tc, opts);

    TwoRoundResult r;
    try {
        r = two_round(spec, sets.train, sets.validation, tc, ic, opts);
    } catch (const PipelineError& e) {
        if (e.report()) write_report(output(ctx, "report.jsonl"), *e.report());
        throw;
    }
    const ModelSpec objective = objective_spec(spec, tc);
    save_model(ctx, "round1.ckpt", objective, r.params_round1, r.config_round1, sets.train);
    write_report(output(ctx, "report.jsonl"), r.report);
    write_dropped_ids(output(ctx, "dropped_ids.txt"), r.dropped_ids);
    const Dataset reduced = r.dropped_ids.empty() ? sets.train : sets.train.without(r.dropped_ids);
    save_model(ctx, "round2.ckpt", objective, r.params_round2, r.config_round2, reduced);

    // Per-round counts: round 1 from the run above, later rounds continue on
    // the reduced set.
    std::vector<std::size_t> counts{r.dropped_ids.size()};
    std::vector<std::size_t> sizes{sets.train.size()};
    if (rounds > 1 && !r.dropped_ids.empty()) {
        const RoundCountSeries more =
            multi_round(spec, reduced, sets.validation, r.config_round2, ic, rounds - 1, opts);
        counts.insert(counts.end(), more.counts.begin(), more.counts.end());
        sizes.insert(sizes.end(), more.train_sizes.begin(), more.train_sizes.end());
    }
    std::string csv = "round,train_size,unfavorable_count\n";
    for (std::size_t i = 0; i < counts.size(); ++i) {
        csv += std::to_string(i + 1) + "," + std::to_string(sizes[i]) + "," + std::to_string(counts[i]) + "\n";
    }
    write_file_atomic(output(ctx, "rounds.csv"), csv);

    const json metrics = {{"round1", r.metrics_round1},
                          {"round2", r.metrics_round2},
                          {"train_size", r.train_size},
                          {"reduced_train_size", r.reduced_train_size},
                          {"dropped_count", r.dropped_ids.size()},
                          {"validation_size", sets.validation.size()},
                          {"batch_size_round1", r.config_round1.batch_size},
                          {"batch_size_round2", r.config_round2.batch_size}};
    write_file_atomic(output(ctx, "metrics.json"), metrics.dump(2) + "\n");
    ctx.summary = metrics;
    ctx.summary["round_counts"] = counts;
    ctx.out << "round 1: " << r.dropped_ids.size() << " of " << r.train_size
            << " samples unfavorable; validation loss " << r.metrics_round1.mean_loss << " -> "
            << r.metrics_round2.mean_loss << "\n";
    return kOk;
}

int cmd_loo_oracle(Context& ctx) {
    prepare_out_dir(ctx, true);
    const auto kind = ctx.config.at("/spec/kind"_json_pointer).get<std::string>();
    const Inputs in = load_inputs(ctx, label_kind_for(kind), false);
    const auto cap = ctx.config.at("/loo/max_samples"_json_pointer).get<std::size_t>();
    const bool force = ctx.config.at("/loo/force"_json_pointer).get<bool>();
    const ModelSpec spec = resolve_spec(ctx, in);
    const TrainConfig tc = resolve_train(ctx);
    const IhvpConfig ic = resolve_ihvp(ctx);
    PipelineOptions popts;
    popts.val_fraction = ctx.config.at("/data/val_fraction"_json_pointer).get<double>();
    const Split sets = resolve_validation(spec, in.train, in.validation, tc, popts);
    if (sets.train.size() > cap && !force) {
        throw ConfigError("leave-one-out on " + std::to_string(sets.train.size()) +
                          " samples exceeds --max-samples " + std::to_string(cap) +
                          "; pass --force to run anyway");
    }

    LooOptions opts;
    opts.optimizer.grad_tol = ctx.config.at("/loo/grad_tol"_json_pointer).get<double>();
    opts.optimizer.max_iter = ctx.config.at("/loo/max_iter"_json_pointer).get<std::size_t>();
    opts.workers = ctx.config.at("workers").get<std::size_t>();
    opts.score = score_options(ctx);
    const LooSummary s = loo_oracle(objective_spec(spec, tc), sets.train, sets.validation, ic, opts);

    write_report(output(ctx, "report.jsonl"), s.report);
    std::ostringstream csv;
    csv.precision(17);
    csv << "id,influence_total,loo_delta,converged,iterations\n";
    for (const auto& e : s.entries) {
        csv << e.id << "," << e.influence_total << "," << e.delta << "," << (e.converged ? 1 : 0)
            << "," << e.iterations << "\n";
    }
    write_file_atomic(output(ctx, "loo.csv"), csv.str());
    const json summary = {{"n", sets.train.size()},
                          {"k", sets.validation.size()},
                          {"spearman", s.spearman},
                          {"sign_agreement", s.sign_agreement},
                          {"sign_considered", s.sign_considered},
                          {"sign_threshold", s.sign_threshold},
                          {"excluded_nonconverged", s.excluded},
                          {"full_iterations", s.full.iterations}};
    write_file_atomic(output(ctx, "summary.json"), summary.dump(2) + "\n");
    ctx.summary = summary;
    ctx.out << "leave-one-out over " << sets.train.size() << " samples: spearman " << s.spearman
            << ", sign agreement " << s.sign_agreement << " (" << s.sign_considered
            << " samples)\n";
    return kOk;
}

int cmd_check(Context& ctx) {
    prepare_out_dir(ctx, false);
    SelfCheckOptions opts;
    opts.seed = ctx.config.at("seed").get<std::uint64_t>();
    opts.draws = ctx.config.at("/check/draws"_json_pointer).get<std::size_t>();
    opts.inject_fault = ctx.config.at("/check/inject_fault"_json_pointer).get<bool>();
    const auto results = run_self_checks(opts);
    bool all = true;
    json list = json::array();
    for (const auto& r : results) {
        all = all && r.passed;
        ctx.out << (r.passed ? "PASS " : "FAIL ") << r.name << "  worst=" << r.worst
                << " tol=" << r.tolerance << "\n";
        list.push_back({{"name", r.name}, {"passed", r.passed}, {"worst", r.worst}, {"tolerance", r.tolerance}});
    }
    ctx.summary = {{"checks", list}, {"all_passed", all}};
    return all ? kOk : kSelfTestFailure;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"dropkit: influence-based training-set pruning and two-round training"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "dropkit 0.1.0");

    struct Sub {
        CLI::App* app;
        std::unique_ptr<FlagSet> flags;
        std::function<int(Context&)> run;
    };
    std::vector<Sub> subs;
    auto make = [&](const char* name, const char* desc, std::function<int(Context&)> fn) -> Sub& {
        CLI::App* sub = app.add_subcommand(name, desc);
        subs.push_back({sub, std::make_unique<FlagSet>(sub), std::move(fn)});
        return subs.back();
    };

    {
        auto& s = make("train", "Train a model and write a checkpoint", cmd_train);
        add_common(*s.flags, s.app, true);
        add_data(*s.flags);
        add_spec(*s.flags);
        add_train(*s.flags);
    }
    {
        auto& s = make("score", "Score training samples by influence on validation loss", cmd_score);
        add_common(*s.flags, s.app, true);
        add_data(*s.flags);
        add_ihvp(*s.flags);
        s.flags->add<std::string>("--checkpoint", "/checkpoint", "Checkpoint written by 'train'");
    }
    {
        auto& s = make("two-round", "Train, drop unfavorable samples, retrain from scratch", cmd_two_round);
        add_common(*s.flags, s.app, true);
        add_data(*s.flags);
        add_spec(*s.flags);
        add_train(*s.flags);
        add_ihvp(*s.flags);
        s.flags->add<std::size_t>("--rounds", "/rounds", "Rounds recorded in rounds.csv (default 2)");
        s.flags->add<double>("--val-fraction", "/data/val_fraction",
                             "Validation fraction carved from --data when --val-data is absent");
        s.flags->add<std::uint64_t>("--round2-seed", "/round2_seed", "Separate seed for round 2");
    }
    {
        auto& s = make("loo-oracle", "Compare influence scores with actual leave-one-out retraining",
                       cmd_loo_oracle);
        add_common(*s.flags, s.app, true);
        add_data(*s.flags);
        add_spec(*s.flags);
        add_train(*s.flags);
        add_ihvp(*s.flags);
        s.flags->add<std::size_t>("--max-samples", "/loo/max_samples", "Refuse larger training sets");
        s.flags->flag("--force", "/loo/force", true, "Run even above --max-samples");
        s.flags->add<double>("--grad-tol", "/loo/grad_tol", "Full-batch convergence tolerance");
        s.flags->add<std::size_t>("--max-iter", "/loo/max_iter", "Full-batch iteration cap");
        s.flags->add<double>("--val-fraction", "/data/val_fraction",
                             "Validation fraction carved from --data when --val-data is absent");
    }
    {
        auto& s = make("check", "Run gradient, Hessian-vector and CG self-tests", cmd_check);
        add_common(*s.flags, s.app, false);
        s.flags->add<std::size_t>("--draws", "/check/draws", "Random draws per model kind");
        s.flags->flag("--inject-fault", "/check/inject_fault", true, "")->group("");
    }

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        const CLI::App* target = &app;
        for (const auto& s : subs) {
            if (s.app->parsed()) target = s.app;
        }
        out << target->help();
        return kOk;
    } catch (const CLI::CallForVersion&) {
        out << app.version() << "\n";
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        const CLI::App* target = &app;
        for (const auto& s : subs) {
            if (s.app->parsed()) target = s.app;
        }
        err << target->help();
        return kConfigError;
    }

    const Sub* chosen = nullptr;
    for (const auto& s : subs) {
        if (s.app->parsed()) chosen = &s;
    }

    Context ctx{chosen->app->get_name(), default_config(), json::object(), json::array(),
                json::object(), std::nullopt, out, err};
    const auto start = std::chrono::steady_clock::now();
    int status = kOk;
    std::string error;
    try {
        try {
            if (!chosen->flags->config_file.empty()) {
                const json file = json::parse(read_file(chosen->flags->config_file));
                note_input(ctx, chosen->flags->config_file);
                ctx.config.merge_patch(file);
            }
            json patch = json::object();
            chosen->flags->collect(patch);
            ctx.config.merge_patch(patch);
            ctx.config["command"] = ctx.command;
        } catch (const json::exception& e) {
            throw ConfigError(std::string("invalid configuration: ") + e.what());
        }
        status = chosen->run(ctx);
    } catch (const ConfigError& e) {
        status = kConfigError;
        error = e.what();
        err << "error: " << e.what() << "\nsee: dropkit " << ctx.command << " --help\n";
    } catch (const json::exception& e) {
        status = kConfigError;
        error = e.what();
        err << "error: invalid configuration: " << e.what() << "\n";
    } catch (const std::exception& e) {
        status = kRuntimeError;
        error = e.what();
        err << "error: " << e.what() << "\n";
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    try {
        write_manifest(ctx, status, seconds, error);
    } catch (const std::exception& e) {
        err << "error: could not write manifest: " << e.what() << "\n";
        if (status == kOk) status = kRuntimeError;
    }
    return status;
}

}  // namespace dropkit::cli
