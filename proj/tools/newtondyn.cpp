// newtondyn: run a Newton-dynamics job described by a JSON config.
//
//   newtondyn <mode> --config path.json [--out dir] [--seed N] [--threads N]
//
// Exit status: 0 success, 1 invalid command line or config, 2 runtime failure.

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"

#include "newtondyn/job.hpp"

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

std::string read_text(const std::string& path)
{
    std::ifstream f(path, std::ios::binary);
    if (!f) throw newtondyn::ConfigError("cannot read config file '" + path + "'");
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Newton-map dynamics toolkit: basins, alpha-limits, IFS, Barna checks, ghost lines"};
    app.set_version_flag("--version", std::string(NEWTONDYN_VERSION));

    std::vector<std::string> modes;
    for (const auto& [m, name] : newtondyn::mode_names()) modes.push_back(name);

    std::string mode_name, config_path, out_dir = ".";
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> threads;
    app.add_option("mode", mode_name, "Job mode")->required()->check(CLI::IsMember(modes));
    app.add_option("-c,--config", config_path, "JSON job configuration")->required();
    app.add_option("-o,--out", out_dir, "Output directory")->capture_default_str();
    app.add_option("--seed", seed, "Override prng_seed");
    app.add_option("--threads", threads, "Worker threads (0 = hardware concurrency)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitValidation;
    }

    newtondyn::PreparedJob job;
    try {
        const auto text = read_text(config_path);
        const auto j = newtondyn::parse_json_text(text);
        auto cfg = newtondyn::parse_job_config(j, newtondyn::parse_mode(mode_name));
        if (seed) {
            cfg.prng_seed = *seed;
            cfg.barna.prng_seed = *seed;
            cfg.probe.prng_seed = *seed;
        }
        if (threads) cfg.threads = *threads;
        job = newtondyn::prepare_job(cfg);
    } catch (const newtondyn::InvalidInput& e) {
        std::cerr << "newtondyn: invalid configuration: " << e.what() << "\n";
        return kExitValidation;
    }

    try {
        const auto result = newtondyn::run_job(job);
        for (const auto& path : newtondyn::write_job_outputs(result, job.config, out_dir)) std::cout << path << "\n";
    } catch (const newtondyn::JobRuntimeError& e) {
        std::cerr << "newtondyn: " << e.what() << "\n";
        return kExitRuntime;
    } catch (const std::exception& e) {
        std::cerr << "newtondyn: " << e.what() << "\n";
        return kExitRuntime;
    }
    return 0;
}
