// saifdl command line: dataset generation, rule-penalized training,
// evaluation, lambda sweeps, and exact rule checking.
//
// Exit codes: 0 success, 1 runtime/numeric failure, 2 usage/config/parse
// failure.

#include "saifdl/data.hpp"
#include "saifdl/io.hpp"
#include "saifdl/nn.hpp"
#include "saifdl/penalty.hpp"
#include "saifdl/rulelang.hpp"
#include "saifdl/trainer.hpp"
#include "saifdl/types.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace saifdl;

namespace {

struct GeneratorSpec {
    std::string kind;  // "classification" | "regression"
    std::int64_t n = 0;
};

struct ExperimentConfig {
    trainer::TrainingConfig training;
    std::string rules_path;
    std::string data_path;
    std::optional<GeneratorSpec> generator;
    std::vector<nn::LayerSpec> architecture;  // empty: derived from the data
    std::string output_dir = "out";
    bool loss_explicit = false;
};

[[noreturn]] void config_fail(const std::string& msg) {
    throw ConfigError("config: " + msg);
}

nn::LayerSpec layer_from_json(const json& node) {
    nn::LayerSpec spec;
    spec.input_dim = node.at("input_dim").get<Index>();
    spec.output_dim = node.at("output_dim").get<Index>();
    const std::string act = node.at("activation").get<std::string>();
    if (act == "relu")
        spec.activation = nn::Activation::ReLU;
    else if (act == "identity")
        spec.activation = nn::Activation::Identity;
    else
        config_fail("unknown activation '" + act + "'");
    return spec;
}

ExperimentConfig parse_experiment_config(const fs::path& path) {
    json doc;
    try {
        doc = json::parse(read_file(path));
    } catch (const json::exception& e) {
        config_fail(path.string() + ": " + e.what());
    }
    if (!doc.is_object()) config_fail("top level must be a JSON object");

    static const std::vector<std::string> known = {
        "lambda", "epochs", "batch_size", "seed", "learning_rate", "beta1",
        "beta2", "epsilon", "loss", "validation_fraction", "shuffle", "rules",
        "data", "generator", "architecture", "output_dir"};
    for (const auto& [key, value] : doc.items()) {
        if (std::find(known.begin(), known.end(), key) == known.end())
            config_fail("unknown key '" + key + "'");
    }

    ExperimentConfig cfg;
    try {
        auto& t = cfg.training;
        if (doc.contains("lambda")) t.lambda = doc["lambda"].get<double>();
        if (doc.contains("epochs")) t.epochs = doc["epochs"].get<int>();
        if (doc.contains("batch_size")) t.batch_size = doc["batch_size"].get<int>();
        if (doc.contains("seed")) t.seed = doc["seed"].get<std::uint64_t>();
        if (doc.contains("learning_rate"))
            t.learning_rate = doc["learning_rate"].get<double>();
        if (doc.contains("beta1")) t.beta1 = doc["beta1"].get<double>();
        if (doc.contains("beta2")) t.beta2 = doc["beta2"].get<double>();
        if (doc.contains("epsilon")) t.epsilon = doc["epsilon"].get<double>();
        if (doc.contains("loss")) {
            t.loss = nn::loss_from_name(doc["loss"].get<std::string>());
            cfg.loss_explicit = true;
        }
        if (doc.contains("validation_fraction"))
            t.validation_fraction = doc["validation_fraction"].get<double>();
        if (doc.contains("shuffle")) t.shuffle = doc["shuffle"].get<bool>();
        if (doc.contains("rules")) cfg.rules_path = doc["rules"].get<std::string>();
        if (doc.contains("data")) cfg.data_path = doc["data"].get<std::string>();
        if (doc.contains("generator")) {
            GeneratorSpec gen;
            gen.kind = doc["generator"].at("kind").get<std::string>();
            gen.n = doc["generator"].at("n").get<std::int64_t>();
            if (gen.kind != "classification" && gen.kind != "regression")
                config_fail("generator kind must be 'classification' or "
                            "'regression'");
            cfg.generator = gen;
        }
        if (doc.contains("architecture")) {
            for (const auto& node : doc["architecture"])
                cfg.architecture.push_back(layer_from_json(node));
        }
        if (doc.contains("output_dir"))
            cfg.output_dir = doc["output_dir"].get<std::string>();
    } catch (const json::exception& e) {
        config_fail(path.string() + ": " + e.what());
    } catch (const DomainError& e) {
        config_fail(e.what());
    }

    if (!(cfg.training.validation_fraction >= 0.0 &&
          cfg.training.validation_fraction < 1.0))
        config_fail("validation_fraction must lie in [0, 1)");
    if (cfg.data_path.empty() == !cfg.generator.has_value())
        config_fail("exactly one of 'data' and 'generator' is required");
    return cfg;
}

void apply_seed_env(ExperimentConfig& cfg, bool seed_flag_given) {
    if (seed_flag_given) return;  // explicit flag wins over the environment
    const char* env = std::getenv("SAIFDL_SEED");
    if (env == nullptr) return;
    std::int64_t value = 0;
    if (!parse_index(env, value))
        config_fail("SAIFDL_SEED must be a non-negative integer, got '" +
                    std::string(env) + "'");
    cfg.training.seed = static_cast<std::uint64_t>(value);
}

data::Dataset resolve_dataset(const ExperimentConfig& cfg) {
    if (!cfg.data_path.empty()) {
        if (!fs::exists(cfg.data_path))
            config_fail("data file does not exist: " + cfg.data_path);
        return data::load_csv(cfg.data_path);
    }
    const GeneratorSpec& gen = *cfg.generator;
    if (gen.kind == "classification")
        return data::generate_classification(gen.n, cfg.training.seed);
    return data::generate_regression_demo(gen.n, cfg.training.seed);
}

rulelang::RuleSet resolve_rules(const std::string& path) {
    if (path.empty()) return {};
    if (!fs::exists(path)) config_fail("rules file does not exist: " + path);
    return rulelang::parse_rules(read_file(path));
}

Index infer_output_dim(const data::Dataset& ds) {
    if (ds.task == Task::Regression) return 1;
    Index classes = 2;
    for (Index i = 0; i < ds.size(); ++i)
        classes = std::max(classes, static_cast<Index>(ds.labels[i]) + 1);
    return classes;
}

std::vector<nn::LayerSpec> resolve_architecture(const ExperimentConfig& cfg,
                                                const data::Dataset& ds) {
    if (!cfg.architecture.empty()) {
        if (cfg.architecture.front().input_dim != ds.feature_dim())
            config_fail("architecture input dimension " +
                        std::to_string(cfg.architecture.front().input_dim) +
                        " does not match data feature dimension " +
                        std::to_string(ds.feature_dim()));
        return cfg.architecture;
    }
    return {{ds.feature_dim(), 10, nn::Activation::ReLU},
            {10, infer_output_dim(ds), nn::Activation::Identity}};
}

json architecture_to_json(const std::vector<nn::LayerSpec>& arch) {
    json out = json::array();
    for (const nn::LayerSpec& spec : arch) {
        out.push_back({{"input_dim", spec.input_dim},
                       {"output_dim", spec.output_dim},
                       {"activation", spec.activation == nn::Activation::ReLU
                                          ? "relu"
                                          : "identity"}});
    }
    return out;
}

/// Every effective parameter, defaults included, for exact re-runs.
json config_echo(const ExperimentConfig& cfg,
                 const std::vector<nn::LayerSpec>& arch) {
    const auto& t = cfg.training;
    json echo = {
        {"lambda", t.lambda},
        {"epochs", t.epochs},
        {"batch_size", t.batch_size},
        {"seed", t.seed},
        {"learning_rate", t.learning_rate},
        {"beta1", t.beta1},
        {"beta2", t.beta2},
        {"epsilon", t.epsilon},
        {"loss", nn::loss_name(t.loss)},
        {"validation_fraction", t.validation_fraction},
        {"shuffle", t.shuffle},
        {"rules", cfg.rules_path.empty() ? json(nullptr) : json(cfg.rules_path)},
        {"data", cfg.data_path.empty() ? json(nullptr) : json(cfg.data_path)},
        {"architecture", architecture_to_json(arch)},
        {"output_dir", cfg.output_dir},
    };
    if (cfg.generator)
        echo["generator"] = {{"kind", cfg.generator->kind},
                             {"n", cfg.generator->n}};
    else
        echo["generator"] = nullptr;
    return echo;
}

std::string curves_to_csv(const std::vector<trainer::EpochMetrics>& curves) {
    std::string out =
        "epoch,train_base,train_penalty,train_total,val_base,val_penalty,"
        "val_total,val_accuracy,val_satisfaction\n";
    for (const auto& m : curves) {
        out += std::to_string(m.epoch);
        for (double v : {m.train_base, m.train_penalty, m.train_total,
                         m.val_base, m.val_penalty, m.val_total,
                         m.val_accuracy, m.val_satisfaction}) {
            out += ",";
            out += format_double(v);
        }
        out += "\n";
    }
    return out;
}

json metrics_to_json(const trainer::EpochMetrics& m) {
    return {{"epoch", m.epoch},
            {"train_base", m.train_base},
            {"train_penalty", m.train_penalty},
            {"train_total", m.train_total},
            {"val_base", m.val_base},
            {"val_penalty", m.val_penalty},
            {"val_total", m.val_total},
            {"val_accuracy", m.val_accuracy},
            {"val_satisfaction", m.val_satisfaction}};
}

/// Trains per the resolved config and writes curves.csv, result.json,
/// model.json, and the two split CSVs into out_dir.
trainer::RunResult run_training(const ExperimentConfig& cfg,
                                const data::Dataset& full,
                                const rulelang::RuleSet& rules,
                                const std::vector<nn::LayerSpec>& arch,
                                const fs::path& out_dir) {
    auto [train_split, val_split] =
        trainer::split_dataset(full, cfg.training.validation_fraction);
    nn::Network net = nn::init_network(arch, full.task, cfg.training.seed);
    trainer::RunResult result =
        trainer::train(std::move(net), rules, train_split, val_split,
                       cfg.training);

    fs::create_directories(out_dir);
    data::save_csv(train_split, out_dir / "train_split.csv");
    data::save_csv(val_split, out_dir / "val_split.csv");
    atomic_write_file(out_dir / "curves.csv", curves_to_csv(result.curves));
    nn::save_checkpoint(result.model, out_dir / "model.json");

    json result_doc = {
        {"config", config_echo(cfg, arch)},
        {"final_accuracy", result.final_accuracy},
        {"final_domain_satisfaction", result.final_domain_satisfaction},
        {"final_epoch", metrics_to_json(result.curves.back())},
        {"epochs_recorded", result.curves.size()},
    };
    atomic_write_file(out_dir / "result.json", result_doc.dump(2) + "\n");
    return result;
}

int cmd_gen_data(const std::string& kind, std::int64_t n, std::uint64_t seed,
                 const std::string& out_path) {
    data::Dataset ds = kind == "classification"
                           ? data::generate_classification(n, seed)
                           : data::generate_regression_demo(n, seed);
    data::save_csv(ds, out_path);
    std::cout << "wrote " << ds.size() << " rows to " << out_path << "\n";
    return 0;
}

int cmd_train(ExperimentConfig cfg) {
    const data::Dataset full = resolve_dataset(cfg);
    const rulelang::RuleSet rules = resolve_rules(cfg.rules_path);
    if (!cfg.loss_explicit)
        cfg.training.loss = full.task == Task::Classification
                                ? nn::LossKind::CrossEntropy
                                : nn::LossKind::MSE;
    const std::vector<nn::LayerSpec> arch = resolve_architecture(cfg, full);
    trainer::RunResult result =
        run_training(cfg, full, rules, arch, cfg.output_dir);
    std::cout << "final_accuracy=" << format_double(result.final_accuracy)
              << " final_domain_satisfaction="
              << format_double(result.final_domain_satisfaction) << "\n";
    return 0;
}

int cmd_sweep(ExperimentConfig cfg, const std::vector<double>& lambdas,
              unsigned jobs) {
    const data::Dataset full = resolve_dataset(cfg);
    const rulelang::RuleSet rules = resolve_rules(cfg.rules_path);
    if (!cfg.loss_explicit)
        cfg.training.loss = full.task == Task::Classification
                                ? nn::LossKind::CrossEntropy
                                : nn::LossKind::MSE;
    const std::vector<nn::LayerSpec> arch = resolve_architecture(cfg, full);
    const fs::path sweep_dir = cfg.output_dir;
    fs::create_directories(sweep_dir);

    struct RunSlot {
        std::optional<trainer::RunResult> result;
        std::string error;
        fs::path dir;
    };
    std::vector<RunSlot> slots(lambdas.size());

    unsigned pool = std::max(1u, std::thread::hardware_concurrency());
    pool = std::min<unsigned>(pool, static_cast<unsigned>(lambdas.size()));
    if (jobs > 0) pool = std::min(pool, jobs);

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= lambdas.size()) return;
            ExperimentConfig run_cfg = cfg;
            run_cfg.training.lambda = lambdas[i];
            char name[64];
            std::snprintf(name, sizeof(name), "run_%03zu_lambda_%s", i,
                          format_double(lambdas[i]).c_str());
            slots[i].dir = sweep_dir / name;
            run_cfg.output_dir = slots[i].dir.string();
            try {
                slots[i].result = run_training(run_cfg, full, rules, arch,
                                               slots[i].dir);
            } catch (const std::exception& e) {
                slots[i].error = e.what();
            }
        }
    };
    std::vector<std::thread> threads;
    for (unsigned t = 1; t < pool; ++t) threads.emplace_back(worker);
    worker();
    for (auto& t : threads) t.join();

    std::string summary =
        "lambda,status,final_accuracy,final_satisfaction,final_train_base,"
        "final_train_penalty,final_train_total,final_val_base,"
        "final_val_penalty,final_val_total,generalization_gap\n";
    bool any_failed = false;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t i = 0; i < lambdas.size(); ++i) {
        summary += format_double(lambdas[i]);
        if (slots[i].result) {
            const auto& r = *slots[i].result;
            const auto& last = r.curves.back();
            summary += ",ok";
            for (double v :
                 {r.final_accuracy, r.final_domain_satisfaction,
                  last.train_base, last.train_penalty, last.train_total,
                  last.val_base, last.val_penalty, last.val_total,
                  last.val_base - last.train_base}) {
                summary += ",";
                summary += format_double(v);
            }
        } else {
            any_failed = true;
            std::cerr << "sweep: lambda " << format_double(lambdas[i])
                      << " failed: " << slots[i].error << "\n";
            summary += ",failed";
            for (int k = 0; k < 9; ++k) {
                summary += ",";
                summary += format_double(nan);
            }
        }
        summary += "\n";
    }
    atomic_write_file(sweep_dir / "summary.csv", summary);
    std::cout << "sweep summary written to "
              << (sweep_dir / "summary.csv").string() << "\n";
    return any_failed ? 1 : 0;
}

int cmd_eval(const std::string& model_path, const std::string& data_path,
             const std::string& rules_path) {
    if (!fs::exists(model_path))
        config_fail("model file does not exist: " + model_path);
    if (!fs::exists(data_path))
        config_fail("data file does not exist: " + data_path);
    nn::Network net = nn::load_checkpoint(model_path);
    data::Dataset ds = data::load_csv(data_path);
    rulelang::RuleSet rules = resolve_rules(rules_path);
    auto [metric, report] = trainer::evaluate(net, rules, ds);
    json out = {
        {"task", task_name(net.task)},
        {"metric", net.task == Task::Classification ? "accuracy" : "mse"},
        {"value", metric},
        {"satisfaction",
         {{"applicable", report.applicable_count},
          {"satisfied", report.satisfied_count},
          {"ratio", report.ratio}}},
    };
    std::cout << out.dump(2) << "\n";
    return 0;
}

int cmd_check_rules(const std::string& rules_path, const std::string& data_path,
                    const std::string& model_path) {
    if (!fs::exists(rules_path))
        config_fail("rules file does not exist: " + rules_path);
    if (!fs::exists(data_path))
        config_fail("data file does not exist: " + data_path);
    if (!fs::exists(model_path))
        config_fail("model file does not exist: " + model_path);
    rulelang::RuleSet rules = rulelang::parse_rules(read_file(rules_path));
    data::Dataset ds = data::load_csv(data_path);
    nn::Network net = nn::load_checkpoint(model_path);
    // Bind the rules first so dimension mismatches fail with the rule name.
    penalty::compile_rules(rules, ds.feature_dim(), net.output_dim(), net.task);
    if (ds.feature_dim() != net.input_dim())
        throw ShapeError("data feature dimension " +
                         std::to_string(ds.feature_dim()) +
                         " does not match model input " +
                         std::to_string(net.input_dim()));
    auto [predictions, cache] = nn::forward(net, ds.features);
    penalty::SatisfactionReport report =
        penalty::exact_satisfaction(rules, ds.features, predictions, net.task);
    json out = {{"applicable", report.applicable_count},
                {"satisfied", report.satisfied_count},
                {"ratio", report.ratio}};
    std::cout << out.dump(2) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"rule-penalized neural network training toolkit"};
    app.require_subcommand(1);

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset");
    std::string gen_kind = "classification";
    std::int64_t gen_n = 1000;
    std::uint64_t gen_seed = 42;
    std::string gen_out;
    gen->add_option("--kind", gen_kind, "classification or regression")
        ->check(CLI::IsMember({"classification", "regression"}));
    gen->add_option("--n", gen_n, "number of samples");
    gen->add_option("--seed", gen_seed, "generator seed");
    gen->add_option("--out", gen_out, "output CSV path")->required();

    // shared train/sweep options
    std::string config_path;
    std::string flag_rules, flag_data, flag_out, flag_loss;
    double flag_lambda = 0.0;
    int flag_epochs = 0, flag_batch = 0;
    std::uint64_t flag_seed = 0;
    double flag_lr = 0.0;

    auto add_override_flags = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "experiment config JSON")
            ->required();
        cmd->add_option("--lambda", flag_lambda, "override penalty weight");
        cmd->add_option("--epochs", flag_epochs, "override epoch count");
        cmd->add_option("--batch-size", flag_batch, "override batch size");
        cmd->add_option("--seed", flag_seed, "override seed");
        cmd->add_option("--learning-rate", flag_lr, "override learning rate");
        cmd->add_option("--rules", flag_rules, "override rules file");
        cmd->add_option("--data", flag_data, "override data file");
        cmd->add_option("--loss", flag_loss, "override loss kind")
            ->check(CLI::IsMember({"cross_entropy", "mse", "mae"}));
        cmd->add_option("--out", flag_out, "override output directory");
    };

    auto* train = app.add_subcommand("train", "train one configuration");
    add_override_flags(train);

    auto* sweep = app.add_subcommand("sweep", "train once per lambda value");
    add_override_flags(sweep);
    std::vector<double> sweep_lambdas;
    unsigned sweep_jobs = 0;
    sweep->add_option("--lambdas", sweep_lambdas, "lambda values")
        ->required()
        ->delimiter(',');
    sweep->add_option("--jobs", sweep_jobs,
                      "max concurrent runs (default: one per lambda, capped "
                      "at CPU count)");

    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
    std::string eval_model, eval_data, eval_rules;
    eval->add_option("--model", eval_model, "checkpoint path")->required();
    eval->add_option("--data", eval_data, "dataset CSV")->required();
    eval->add_option("--rules", eval_rules, "rules file (optional)");

    auto* check = app.add_subcommand("check-rules",
                                     "exact satisfaction of rules on a "
                                     "model's predictions");
    std::string check_rules_path, check_data, check_model;
    check->add_option("--rules", check_rules_path, "rules file")->required();
    check->add_option("--data", check_data, "dataset CSV")->required();
    check->add_option("--model", check_model, "checkpoint path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (gen->parsed()) return cmd_gen_data(gen_kind, gen_n, gen_seed, gen_out);

        if (train->parsed() || sweep->parsed()) {
            CLI::App* cmd = train->parsed() ? train : sweep;
            if (!fs::exists(config_path))
                config_fail("config file does not exist: " + config_path);
            ExperimentConfig cfg = parse_experiment_config(config_path);
            // Precedence: flags > SAIFDL_SEED > config file > defaults.
            if (cmd->count("--lambda")) cfg.training.lambda = flag_lambda;
            if (cmd->count("--epochs")) cfg.training.epochs = flag_epochs;
            if (cmd->count("--batch-size")) cfg.training.batch_size = flag_batch;
            if (cmd->count("--learning-rate"))
                cfg.training.learning_rate = flag_lr;
            if (cmd->count("--rules")) cfg.rules_path = flag_rules;
            if (cmd->count("--data")) {
                cfg.data_path = flag_data;
                cfg.generator.reset();
            }
            if (cmd->count("--loss")) {
                cfg.training.loss = nn::loss_from_name(flag_loss);
                cfg.loss_explicit = true;
            }
            if (cmd->count("--out")) cfg.output_dir = flag_out;
            if (cmd->count("--seed")) cfg.training.seed = flag_seed;
            apply_seed_env(cfg, cmd->count("--seed") > 0);

            if (train->parsed()) return cmd_train(std::move(cfg));
            if (sweep_lambdas.empty())
                config_fail("sweep needs at least one lambda value");
            for (double l : sweep_lambdas)
                if (!(l >= 0.0) || !std::isfinite(l))
                    config_fail("lambda values must be finite and >= 0");
            return cmd_sweep(std::move(cfg), sweep_lambdas, sweep_jobs);
        }

        if (eval->parsed()) return cmd_eval(eval_model, eval_data, eval_rules);
        if (check->parsed())
            return cmd_check_rules(check_rules_path, check_data, check_model);
    } catch (const SourceError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
