#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gslm/config.hpp"
#include "gslm/driver.hpp"
#include "gslm/synth.hpp"

namespace fs = std::filesystem;
using namespace gslm;

namespace {

// Exit codes: 0 ok, 2 usage/input error, 3 refused clobber, 4 diverged run.
constexpr int kOk = 0;
constexpr int kUsage = 2;
constexpr int kClobber = 3;
constexpr int kDiverged = 4;

struct CommonArgs {
    std::string config_path;
    std::map<std::string, std::string> overrides;
    bool force = false;
};

void add_common_options(CLI::App* sub, CommonArgs& args) {
    sub->add_option("--config", args.config_path, "key=value config file");
    sub->add_flag("--force", args.force, "replace an existing output directory");
    for (const auto& [key, value] : config_to_map(RunConfig{})) {
        std::string names = "--" + key;
        std::string dashed = key;
        for (char& c : dashed)
            if (c == '_') c = '-';
        if (dashed != key) names += ",--" + dashed;
        const std::string k = key;
        sub->add_option_function<std::string>(
               names, [&args, k](const std::string& v) { args.overrides[k] = v; },
               "override (default " + value + ")")
            ->expected(1);
    }
    sub->add_flag_callback(
        "--no-boundary-constraint",
        [&args] { args.overrides["boundary_constraint"] = "false"; },
        "disable the CRF step in coarse generation");
}

RunConfig resolve_config(const CommonArgs& args) {
    RunConfig cfg;
    if (!args.config_path.empty()) cfg = parse_config_file(args.config_path, cfg);
    for (const auto& [k, v] : args.overrides) apply_config_entry(cfg, k, v);
    cfg.validate();
    return cfg;
}

// Returns false when the directory must not be clobbered.
bool prepare_out_dir(const fs::path& dir, bool force) {
    if (fs::exists(dir)) {
        if (!fs::is_directory(dir) || !fs::is_empty(dir)) {
            if (!force) return false;
            fs::remove_all(dir);
        }
    }
    fs::create_directories(dir);
    return true;
}

int cmd_gen_data(const CommonArgs& args) {
    const RunConfig cfg = resolve_config(args);
    if (cfg.out_dir.empty()) {
        std::cerr << "gen-data: --out_dir is required\n";
        return kUsage;
    }
    const fs::path out(cfg.out_dir);
    const fs::path parent = out.parent_path();
    if (!parent.empty() && !fs::exists(parent)) {
        std::cerr << "gen-data: parent directory does not exist: " << parent.string() << "\n";
        return kUsage;
    }
    if (!prepare_out_dir(out, args.force)) {
        std::cerr << "gen-data: " << out.string() << " exists; pass --force to replace it\n";
        return kClobber;
    }
    SceneSpec spec;
    spec.image_size = cfg.image_size;
    spec.classes = cfg.classes;
    spec.seed = cfg.seed;
    spec.noise_amplitude = cfg.noise_amplitude;
    const auto rows = generate_dataset(spec, cfg.n_train, cfg.n_eval, out);
    std::cout << "wrote " << rows.size() << " samples to " << out.string() << "\n";
    return kOk;
}

int cmd_run(const CommonArgs& args) {
    const RunConfig cfg = resolve_config(args);
    if (cfg.data_dir.empty() || cfg.out_dir.empty()) {
        std::cerr << "run: --data_dir and --out_dir are required\n";
        return kUsage;
    }
    if (!prepare_out_dir(cfg.out_dir, args.force)) {
        std::cerr << "run: " << cfg.out_dir << " exists; pass --force to replace it\n";
        return kClobber;
    }
    const Dataset ds = load_dataset(cfg.data_dir);
    const RunState state = run_gslm(ds, cfg, cfg.out_dir, true);
    if (state.diverged) {
        std::cerr << "run: stage " << state.diverged_stage
                  << " diverged; partial artifacts kept in " << cfg.out_dir << "\n";
        return kDiverged;
    }
    std::printf("final_seed_miou=%.6f\n", state.final_train_miou());
    return kOk;
}

int cmd_sweep(const CommonArgs& args, const std::string& param, const std::string& values_str) {
    const RunConfig cfg = resolve_config(args);
    if (cfg.data_dir.empty() || cfg.out_dir.empty()) {
        std::cerr << "sweep: --data_dir and --out_dir are required\n";
        return kUsage;
    }
    const auto& names = sweep_parameter_names();
    if (std::find(names.begin(), names.end(), param) == names.end()) {
        std::cerr << "sweep: unknown parameter '" << param << "'; valid:";
        for (const auto& n : names) std::cerr << " " << n;
        std::cerr << "\n";
        return kUsage;
    }
    std::vector<double> values;
    std::stringstream ss(values_str);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty()) continue;
        values.push_back(std::stod(tok));
    }
    if (values.empty()) {
        std::cerr << "sweep: --values is empty\n";
        return kUsage;
    }
    if (!prepare_out_dir(cfg.out_dir, args.force)) {
        std::cerr << "sweep: " << cfg.out_dir << " exists; pass --force to replace it\n";
        return kClobber;
    }
    const Dataset ds = load_dataset(cfg.data_dir);
    const auto rows = sweep(param, values, ds, cfg, cfg.out_dir);
    for (const auto& r : rows)
        std::printf("%s=%s status=%s final_seed_miou=%.6f\n", param.c_str(),
                    format_double(r.value).c_str(), r.status.c_str(), r.final_train_miou);
    return kOk;
}

int cmd_eval(const std::string& run_dir_str, int stage, const std::string& data_dir_override) {
    const fs::path run_dir(run_dir_str);
    if (!fs::exists(run_dir / "config.txt")) {
        std::cerr << "eval: no config snapshot in " << run_dir.string() << "\n";
        return kUsage;
    }
    const RunConfig cfg = parse_snapshot(run_dir / "config.txt");
    const std::string data_dir = data_dir_override.empty() ? cfg.data_dir : data_dir_override;
    const Dataset ds = load_dataset(data_dir);
    const int stages = stage_count(run_dir);
    if (stage < 0 || stage >= stages) {
        std::cerr << "eval: stage " << stage << " not in run (stages: " << stages << ")\n";
        return kUsage;
    }
    const auto rows = evaluate_run(run_dir, ds);
    const std::string recomputed = metrics_csv_text(rows);

    std::ifstream stored_file(run_dir / "metrics.csv");
    if (!stored_file) {
        std::cerr << "eval: missing metrics.csv in " << run_dir.string() << "\n";
        return kUsage;
    }
    std::stringstream stored;
    stored << stored_file.rdbuf();

    // print the requested stage rows
    std::istringstream rec(recomputed);
    std::string line;
    std::getline(rec, line);
    std::cout << line << "\n";
    const std::string prefix = std::to_string(stage) + ",";
    while (std::getline(rec, line))
        if (line.rfind(prefix, 0) == 0) std::cout << line << "\n";

    if (stored.str() != recomputed) {
        std::cerr << "eval: recomputed metrics do not match stored metrics.csv\n";
        return kUsage;
    }
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"general-specific learning pipeline on the synthetic corpus"};
    app.require_subcommand(1);

    CommonArgs gen_args, run_args, sweep_args;
    std::string sweep_param, sweep_values;
    std::string eval_run_dir, eval_data_dir;
    int eval_stage = 0;

    CLI::App* gen = app.add_subcommand("gen-data", "generate the synthetic corpus");
    add_common_options(gen, gen_args);
    CLI::App* run = app.add_subcommand("run", "train the full pipeline and evaluate seeds");
    add_common_options(run, run_args);
    CLI::App* swp = app.add_subcommand("sweep", "run the pipeline across one parameter");
    add_common_options(swp, sweep_args);
    swp->add_option("--param", sweep_param, "one of: theta_fg theta_bg k alpha iterations")
        ->required();
    swp->add_option("--values", sweep_values, "comma-separated values")->required();
    CLI::App* evl = app.add_subcommand("eval", "recompute metrics from stored artifacts");
    evl->add_option("--run-dir", eval_run_dir)->required();
    evl->add_option("--stage", eval_stage)->required();
    evl->add_option("--data-dir", eval_data_dir, "override the dataset location");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        app.exit(e);
        return kUsage;
    }

    try {
        if (gen->parsed()) return cmd_gen_data(gen_args);
        if (run->parsed()) return cmd_run(run_args);
        if (swp->parsed()) return cmd_sweep(sweep_args, sweep_param, sweep_values);
        if (evl->parsed()) return cmd_eval(eval_run_dir, eval_stage, eval_data_dir);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    }
    return kUsage;
}
