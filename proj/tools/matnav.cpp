// Copyright 2026 The matnav Developers
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or
// implied. See the License for the specific language governing
// permissions and limitations under the License.

#include <matnav/error.hpp>
#include <matnav/fetcher.hpp>
#include <matnav/hash.hpp>
#include <matnav/pipeline.hpp>
#include <matnav/service.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <csignal>
#include <cstdlib>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct RunArgs {
    std::string config;
    std::string run_dir;
    std::optional<std::uint64_t> seed;
    bool force = false;
};

matnav::RunConfig load_config(const RunArgs& a) {
    matnav::RunConfig cfg = matnav::load_run_config(a.config);
    if (a.seed) {
        cfg.seed = *a.seed;
        cfg.generation.seed = *a.seed;
    }
    return cfg;
}

std::string run_id_of(const matnav::RunConfig& cfg) {
    return "run-" + matnav::sha256_hex(matnav::run_config_to_json(cfg).dump()).substr(0, 12);
}

fs::path choose_run_dir(const RunArgs& a, const matnav::RunConfig& cfg) {
    if (!a.run_dir.empty())
        return a.run_dir;
    const char* root = std::getenv(matnav::run_root_env);
    return fs::path(root && *root ? root : "runs") / run_id_of(cfg);
}

void print_state(const fs::path& dir) {
    const auto s = matnav::load_run_state(dir);
    for (int n = 1; n <= 3; ++n)
        std::cout << "stage " << n << ": " << matnav::to_string(s.stage(n).status) << "\n";
}

int run_stages(const RunArgs& a, int first, int last) {
    const matnav::RunConfig cfg = load_config(a);
    const fs::path dir = choose_run_dir(a, cfg);
    matnav::init_run_dir(dir, cfg, run_id_of(cfg));
    for (int n = first; n <= last; ++n) {
        matnav::run_stage(cfg, dir, n, a.force && n == first);
        std::cout << "stage " << n << " done: " << (dir / ("stage" + std::to_string(n))).string() << "\n";
    }
    return 0;
}

int report(const std::string& run_dir) {
    const fs::path dir(run_dir);
    print_state(dir);
    const auto s = matnav::load_run_state(dir);
    if (!s.criterion.is_null())
        std::cout << "criterion: " << matnav::criterion_label(matnav::criterion_from_json(s.criterion)) << "\n";
    if (s.stage(2).status == matnav::StageStatus::done) {
        const json e = json::parse(matnav::read_file(dir / "stage2" / "eval.json"));
        std::cout << "surrogate: rmse " << e["rmse"].get<double>() << " K, r2 " << e["r2"].get<double>() << " (n_test "
                  << e["n_test"] << ")\n";
    }
    if (s.stage(3).status == matnav::StageStatus::done) {
        const json r = json::parse(matnav::read_file(dir / "stage3" / "report.json"));
        std::cout << "candidates: " << r["generated"] << " generated, " << r["stable"] << " stable\n";
        if (r.contains("message"))
            std::cout << r["message"].get<std::string>() << "\n";
        std::cout << matnav::read_file(dir / "stage3" / "ranked_table.csv");
    }
    for (int n = 1; n <= 3; ++n)
        for (const auto& d : s.stage(n).diagnostics)
            std::cout << "stage " << n << " diagnostic: " << d.dump() << "\n";
    return 0;
}

matnav::RunService* active_service = nullptr;

void on_signal(int) {
    if (active_service)
        active_service->stop();
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"matnav: evidence-grounded screening pipeline"};
    app.require_subcommand(1);

    RunArgs args;
    auto add_run_options = [&](CLI::App* sub) {
        sub->add_option("--config", args.config, "run config JSON")->required()->check(CLI::ExistingFile);
        sub->add_option("--run-dir", args.run_dir, "run directory (default $MKNA_RUN_ROOT/run-<config hash>)");
        sub->add_option("--seed", args.seed, "override the config seed");
        sub->add_flag("--force", args.force, "start the first stage even if its predecessor is not done");
    };
    auto* s1 = app.add_subcommand("stage1", "ground the query in the corpus and derive the criterion");
    auto* s2 = app.add_subcommand("stage2", "build the labeled dataset and train the surrogate");
    auto* s3 = app.add_subcommand("stage3", "generate, predict, rank and filter candidates");
    auto* all = app.add_subcommand("all", "run stages 1 to 3");
    for (auto* sub : {s1, s2, s3, all})
        add_run_options(sub);

    auto* rep = app.add_subcommand("report", "summarize a run directory");
    std::string report_dir;
    rep->add_option("--run-dir", report_dir, "run directory")->required();

    auto* serve = app.add_subcommand("serve", "serve the run API over HTTP");
    std::string serve_config, host = "127.0.0.1", static_dir, run_root;
    int port = -1;
    serve->add_option("--config", serve_config, "config whose service section sets host and port");
    serve->add_option("--host", host, "bind address");
    serve->add_option("--port", port, "port (0 picks a free one)");
    serve->add_option("--run-root", run_root, "run root (default $MKNA_RUN_ROOT or ./runs)");
    serve->add_option("--static", static_dir, "directory of built UI assets");

    auto* stub = app.add_subcommand("stub-server", "serve a fixture materials database");
    std::string stub_db, stub_key;
    int stub_port = 8081;
    stub->add_option("--db", stub_db, "materials JSON")->required()->check(CLI::ExistingFile);
    stub->add_option("--port", stub_port, "port (0 picks a free one)");
    stub->add_option("--key", stub_key, "accepted API key (default $MKNA_DB_KEY)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*s1)
            return run_stages(args, 1, 1);
        if (*s2)
            return run_stages(args, 2, 2);
        if (*s3)
            return run_stages(args, 3, 3);
        if (*all)
            return run_stages(args, 1, 3);
        if (*rep)
            return report(report_dir);
        if (*serve) {
            matnav::ServiceOptions o;
            if (!serve_config.empty()) {
                const auto cfg = matnav::load_run_config(serve_config);
                if (!serve->count("--host"))
                    host = cfg.host;
                if (port < 0)
                    port = cfg.port;
                o.config_base = cfg.base_dir;
            }
            if (port < 0)
                port = 8080;
            const char* root = std::getenv(matnav::run_root_env);
            o.run_root = !run_root.empty() ? fs::path(run_root) : fs::path(root && *root ? root : "runs");
            o.static_dir = static_dir;
            matnav::RunService service(o);
            active_service = &service;
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            const int bound = service.start(host, port);
            std::cout << "listening on http://" << host << ":" << bound << " (runs in " << o.run_root.string() << ")"
                      << std::endl;
            service.wait();
            service.wait_idle();
            return 0;
        }
        if (*stub) {
            if (stub_key.empty())
                if (const char* env = std::getenv(matnav::db_key_env))
                    stub_key = env;
            if (stub_key.empty()) {
                std::cerr << "stub-server: set --key or " << matnav::db_key_env << "\n";
                return 2;
            }
            matnav::StubDbServer server(json::parse(matnav::read_file(stub_db)), stub_key, stub_port);
            std::cout << "stub database on " << server.base_url() << std::endl;
            server.wait();
            return 0;
        }
    } catch (const matnav::Error& e) {
        std::cerr << "matnav: " << matnav::to_string(e.kind()) << ": " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "matnav: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
