// plad: train, evaluate and sweep perturbation-learning anomaly detectors.
//
//   plad train --preset synthetic-blobs --out runs/blobs
//   plad eval  --config exp.cfg --set eval.checkpoint=runs/blobs/run0.ckpt
//   plad sweep --preset synthetic-ring --set training.runs=3

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "plad/experiment.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Perturbation learning anomaly detection"};
    app.require_subcommand(1);

    std::string config_path;
    std::string preset;
    std::vector<std::string> overrides;
    std::string out_dir;
    bool print_config = false;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("-c,--config", config_path, "Experiment config file");
        sub->add_option("-p,--preset", preset, "Named preset applied before the config file");
        sub->add_option("-s,--set", overrides, "Override as section.key=value (repeatable)");
        sub->add_option("-o,--out", out_dir, "Output directory (eval.output_dir)");
        sub->add_flag("--print-config", print_config, "Print the resolved config before running");
    };

    const std::vector<std::pair<plad::Verb, const char*>> verbs = {
        {plad::Verb::train, "Run the multi-run protocol and write logs, checkpoints and a manifest"},
        {plad::Verb::eval, "Score a checkpoint on the configured split"},
        {plad::Verb::sweep, "Lambda sweep with a degradation baseline row"},
        {plad::Verb::synth, "Write a synthetic 2D fixture or a multi-class benchmark definition"},
        {plad::Verb::export_scores, "Write score and embedding CSVs for a checkpoint"},
    };
    std::vector<std::pair<plad::Verb, CLI::App*>> subs;
    for (const auto& [verb, help] : verbs) {
        CLI::App* sub = app.add_subcommand(std::string(plad::verb_name(verb)), help);
        add_common(sub);
        subs.emplace_back(verb, sub);
    }
    CLI::App* list = app.add_subcommand("presets", "List preset names");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        std::cerr << "error=config exit=1 message=\"" << e.what() << "\"" << std::endl;
        return plad::exit_code::config;
    }

    if (list->parsed()) {
        for (const auto& name : plad::preset_names()) std::cout << name << "\n";
        return 0;
    }

    plad::Verb verb = plad::Verb::train;
    for (const auto& [v, sub] : subs) {
        if (sub->parsed()) verb = v;
    }

    plad::ExperimentConfig config;
    try {
        std::optional<std::filesystem::path> path;
        if (!config_path.empty()) path = config_path;
        std::optional<std::string> chosen;
        if (!preset.empty()) chosen = preset;
        if (!out_dir.empty()) overrides.push_back("eval.output_dir=" + out_dir);
        config = plad::parse_config(path, overrides, chosen);
        config.validate();
    } catch (...) {
        std::string line;
        const int code = plad::describe_failure(std::current_exception(), line);
        std::cerr << line << std::endl;
        return code;
    }
    if (print_config) plad::write_config(std::cout, config);
    return plad::run_command(verb, config, std::cout, std::cerr);
}
