// splitrag partition|allocate|route|answer|eval --config <file> --in <dir> --out <dir>
//
// Exit codes: 0 ok, 1 error, 2 missing upstream artifact, 3 stale upstream.

#include "splitrag/pipeline.hpp"

#include "CLI11.hpp"

#include <functional>
#include <iostream>

int main(int argc, char** argv) {
    using namespace splitrag;

    CLI::App app{"Partitioned multi-agent retrieval over a knowledge graph"};
    app.require_subcommand(1);

    std::string config_file;
    StageOptions opt;
    std::string in_dir;
    std::string out_dir;

    using Stage = std::function<std::string(const Config&, const StageOptions&)>;
    const std::vector<std::tuple<std::string, std::string, Stage>> commands = {
        {"partition", "split the graph into subgraphs", cmd_partition},
        {"allocate", "group subgraphs into agents", cmd_allocate},
        {"route", "plan retrieval for the test questions", cmd_route},
        {"answer", "retrieve, fuse and answer", cmd_answer},
        {"eval", "score the answers", cmd_eval},
    };
    std::map<CLI::App*, Stage> stage_of;
    for (const auto& [name, help, fn] : commands) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("--config", config_file, "key = value config file");
        sub->add_option("--in", in_dir, "dataset directory")->required()->check(CLI::ExistingDirectory);
        sub->add_option("--out", out_dir, "artifact directory")->required();
        sub->add_flag("--compact", opt.compact, "write CBOR artifacts");
        stage_of[sub] = fn;
    }

    CLI11_PARSE(app, argc, argv);

    auto* chosen = app.get_subcommands().front();
    try {
        Config cfg = config_file.empty() ? Config{} : Config::load(config_file);
        opt.in = in_dir;
        opt.out = out_dir;
        std::string hash = stage_of.at(chosen)(cfg, opt);
        std::cout << chosen->get_name() << " ok config " << hash << "\n";
        return 0;
    } catch (const StageError& e) {
        std::cerr << "splitrag: " << e.what() << "\n";
        return e.code();
    } catch (const std::exception& e) {
        std::cerr << "splitrag " << chosen->get_name() << ": " << e.what() << "\n";
        return 1;
    }
}
