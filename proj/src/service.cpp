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

#include <matnav/service.hpp>
#include <matnav/error.hpp>
#include <matnav/hash.hpp>
#include <matnav/pipeline.hpp>

#include <httplib.h>
#include <json.hpp>

#include <chrono>
#include <condition_variable>
#include <cstdio>
#include <map>
#include <mutex>
#include <optional>
#include <regex>
#include <sstream>
#include <thread>

namespace matnav {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

int http_status(const std::exception& e) {
    const auto* me = dynamic_cast<const Error*>(&e);
    if (!me)
        return 500;
    switch (me->kind()) {
    case ErrorKind::ConfigError:
    case ErrorKind::InvalidArgument:
    case ErrorKind::SchemaViolation:
        return 400;
    case ErrorKind::NotFound:
        return 404;
    case ErrorKind::AlreadyRunning:
    case ErrorKind::StageOrder:
    case ErrorKind::NotReady:
        return 409;
    default:
        return 500;
    }
}

void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

json read_json_file(const fs::path& p) {
    json j = json::parse(read_file(p), nullptr, false);
    if (j.is_discarded())
        throw Error(ErrorKind::SchemaViolation, p.string() + ": not valid JSON");
    return j;
}

bool valid_id(const std::string& s) {
    static const std::regex re("[A-Za-z0-9_][A-Za-z0-9_.-]*");
    return std::regex_match(s, re) && s.find("..") == std::string::npos;
}

} // namespace

struct RunService::Impl {
    ServiceOptions options;
    httplib::Server server;
    std::thread listener;

    std::mutex mutex;
    std::condition_variable idle;
    std::map<std::string, RunConfig> configs;
    std::map<std::string, int> running; ///< run id -> stage
    std::map<std::string, std::map<int, double>> elapsed_ms;
    std::vector<std::thread> jobs;
    std::size_t active = 0;

    explicit Impl(ServiceOptions o) : options(std::move(o)) {
        fs::create_directories(options.run_root);
        for (const auto& entry : fs::directory_iterator(options.run_root)) {
            const fs::path dir = entry.path();
            if (!entry.is_directory() || !fs::exists(dir / "config.json") || !fs::exists(dir / "state.json"))
                continue;
            const std::string id = dir.filename().string();
            configs.emplace(id, run_config_from_json(read_json_file(dir / "config.json"), options.config_base));
            RunState s = load_run_state(dir);
            bool changed = false;
            for (auto& st : s.stages)
                if (st.status == StageStatus::running) {
                    st.status = StageStatus::failed;
                    st.diagnostics = json::array({{{"kind", "Interrupted"},
                                                   {"message", "service stopped while the stage was running"}}});
                    changed = true;
                }
            if (changed)
                save_run_state(dir, s);
        }
        routes();
    }

    fs::path run_dir(const std::string& id) const { return options.run_root / id; }

    /// Caller holds `mutex`.
    const RunConfig& config_locked(const std::string& id) const {
        if (!valid_id(id))
            throw Error(ErrorKind::NotFound, "no run " + id);
        auto it = configs.find(id);
        if (it == configs.end())
            throw Error(ErrorKind::NotFound, "no run " + id);
        return it->second;
    }

    RunConfig config_of(const std::string& id) {
        std::lock_guard lock(mutex);
        return config_locked(id);
    }

    RunState ready_state(const std::string& id, int stage) {
        config_of(id);
        RunState s = load_run_state(run_dir(id));
        if (s.stage(stage).status != StageStatus::done)
            throw Error(ErrorKind::NotReady, "stage " + std::to_string(stage) + " is " +
                                                 to_string(s.stage(stage).status) + ", not done");
        return s;
    }

    template <class Fn>
    httplib::Server::Handler guarded(Fn fn) {
        return [this, fn](const httplib::Request& req, httplib::Response& res) {
            try {
                fn(req, res);
            } catch (const std::exception& e) {
                send_json(res, http_status(e), {{"error", error_to_json(e)}});
            }
        };
    }

    std::string create_run(const json& body) {
        RunConfig cfg = run_config_from_json(body, options.config_base);
        std::lock_guard lock(mutex);
        std::string id;
        for (std::size_t k = configs.size() + 1;; ++k) {
            char buf[32];
            std::snprintf(buf, sizeof buf, "run-%04zu", k);
            if (!configs.count(buf) && !fs::exists(run_dir(buf))) {
                id = buf;
                break;
            }
        }
        init_run_dir(run_dir(id), cfg, id);
        configs.emplace(id, std::move(cfg));
        return id;
    }

    void launch(const std::string& id, int stage, bool force) {
        std::lock_guard lock(mutex);
        const RunConfig& cfg = config_locked(id);
        if (auto it = running.find(id); it != running.end())
            throw Error(ErrorKind::AlreadyRunning, "stage " + std::to_string(it->second) + " is already running");
        begin_stage(run_dir(id), stage, force);
        running[id] = stage;
        elapsed_ms[id].erase(stage);
        ++active;
        jobs.emplace_back([this, id, stage, cfg] {
            const auto t0 = std::chrono::steady_clock::now();
            try {
                complete_stage(cfg, run_dir(id), stage);
            } catch (const std::exception&) {
                // recorded in state.json by complete_stage
            }
            const double ms =
                std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
            std::lock_guard done(mutex);
            running.erase(id);
            elapsed_ms[id][stage] = ms;
            --active;
            idle.notify_all();
        });
    }

    json run_status(const std::string& id) {
        config_of(id);
        json j = run_state_to_json(load_run_state(run_dir(id)));
        std::lock_guard lock(mutex);
        auto it = running.find(id);
        j["running_stage"] = it == running.end() ? json() : json(it->second);
        json ms = json::object();
        for (const auto& [stage, v] : elapsed_ms[id])
            ms[std::to_string(stage)] = v;
        j["elapsed_ms"] = ms;
        return j;
    }

    void routes() {
        server.set_socket_options([](socket_t sock) {
            int yes = 1;
            ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
        });
        server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                                    {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                                    {"Access-Control-Allow-Headers", "Content-Type"}});
        server.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

        server.Post("/runs", guarded([this](const httplib::Request& req, httplib::Response& res) {
            json body = json::parse(req.body, nullptr, false);
            if (body.is_discarded())
                throw Error(ErrorKind::ConfigError, "request body is not JSON");
            const std::string id = create_run(body);
            send_json(res, 201, {{"run_id", id}, {"url", "/runs/" + id}});
        }));

        server.Get("/runs", guarded([this](const httplib::Request&, httplib::Response& res) {
            std::vector<std::string> ids;
            {
                std::lock_guard lock(mutex);
                for (const auto& [id, cfg] : configs)
                    ids.push_back(id);
            }
            json runs = json::array();
            for (const auto& id : ids) {
                const RunState s = load_run_state(run_dir(id));
                json stages = json::array();
                for (const auto& st : s.stages)
                    stages.push_back(to_string(st.status));
                std::lock_guard lock(mutex);
                runs.push_back({{"run_id", id}, {"query", configs.at(id).query}, {"stages", stages}});
            }
            send_json(res, 200, {{"runs", runs}});
        }));

        server.Get(R"(/runs/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
            send_json(res, 200, run_status(req.matches[1]));
        }));

        server.Post(R"(/runs/([^/]+)/stages/([0-9]+))",
                    guarded([this](const httplib::Request& req, httplib::Response& res) {
                        const std::string id = req.matches[1];
                        const int stage = std::stoi(req.matches[2]);
                        if (stage < 1 || stage > 3)
                            throw Error(ErrorKind::InvalidArgument, "stage must be 1, 2 or 3");
                        const bool force = req.has_param("force") && req.get_param_value("force") == "1";
                        launch(id, stage, force);
                        send_json(res, 202, {{"run_id", id},
                                             {"stage", stage},
                                             {"status", "running"},
                                             {"poll", "/runs/" + id}});
                    }));

        server.Get(R"(/runs/([^/]+)/criterion)", guarded([this](const httplib::Request& req, httplib::Response& res) {
            const RunState s = ready_state(req.matches[1], 1);
            send_json(res, 200, {{"criterion", s.criterion}, {"label", criterion_label(criterion_from_json(s.criterion))}});
        }));

        server.Get(R"(/runs/([^/]+)/eval)", guarded([this](const httplib::Request& req, httplib::Response& res) {
            const std::string id = req.matches[1];
            ready_state(id, 2);
            send_json(res, 200, read_json_file(run_dir(id) / "stage2" / "eval.json"));
        }));

        server.Get(R"(/runs/([^/]+)/report)", guarded([this](const httplib::Request& req, httplib::Response& res) {
            const std::string id = req.matches[1];
            ready_state(id, 3);
            send_json(res, 200, read_json_file(run_dir(id) / "stage3" / "report.json"));
        }));

        server.Get(R"(/runs/([^/]+)/distribution)",
                   guarded([this](const httplib::Request& req, httplib::Response& res) {
                       const std::string id = req.matches[1];
                       ready_state(id, 3);
                       send_json(res, 200, read_json_file(run_dir(id) / "stage3" / "distribution.json"));
                   }));

        server.Get(R"(/runs/([^/]+)/candidates)", guarded([this](const httplib::Request& req, httplib::Response& res) {
            const std::string id = req.matches[1];
            ready_state(id, 3);
            const std::string status = req.has_param("status") ? req.get_param_value("status") : "all";
            if (status != "stable" && status != "rejected" && status != "all")
                throw Error(ErrorKind::InvalidArgument, "status must be stable, rejected or all");
            const fs::path dir = run_dir(id) / "stage3";
            const json all = read_json_file(dir / "candidates.json");
            json out = json::array();
            if (status == "stable") {
                std::map<std::string, json> by_id;
                for (const auto& c : all)
                    by_id[c["id"].get<std::string>()] = c;
                std::istringstream table(read_file(dir / "ranked_table.csv"));
                std::string line;
                std::getline(table, line);
                while (std::getline(table, line)) {
                    const auto a = line.find(','), b = line.find(',', a + 1);
                    json c = by_id.at(line.substr(a + 1, b - a - 1));
                    c["rank"] = std::stoi(line.substr(0, a));
                    out.push_back(c);
                }
            } else {
                for (const auto& c : all)
                    if (status == "all" || c["status"] == "rejected")
                        out.push_back(c);
            }
            send_json(res, 200, {{"status", status}, {"candidates", out}});
        }));

        server.Get(R"(/runs/([^/]+)/candidates/([^/]+)/cif)",
                   guarded([this](const httplib::Request& req, httplib::Response& res) {
                       const std::string id = req.matches[1], cid = req.matches[2];
                       config_of(id);
                       const fs::path f = run_dir(id) / "stage3" / "cif" / (cid + ".cif");
                       if (!valid_id(cid) || !fs::exists(f))
                           throw Error(ErrorKind::NotFound, "no CIF for candidate " + cid);
                       res.set_content(read_file(f), "chemical/x-cif");
                   }));

        if (!options.static_dir.empty())
            server.set_mount_point("/", options.static_dir.string());
    }

    ~Impl() {
        server.stop();
        if (listener.joinable())
            listener.join();
        for (auto& t : jobs)
            if (t.joinable())
                t.join();
    }
};

RunService::RunService(ServiceOptions options) : impl_(std::make_unique<Impl>(std::move(options))) {}

RunService::~RunService() = default;

int RunService::start(const std::string& host, int port) {
    int bound = port;
    if (port == 0)
        bound = impl_->server.bind_to_any_port(host);
    else if (!impl_->server.bind_to_port(host, port))
        bound = -1;
    if (bound <= 0)
        throw Error(ErrorKind::IoError, "cannot bind " + host + ":" + std::to_string(port));
    impl_->listener = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
    return bound;
}

void RunService::wait() {
    while (impl_->server.is_running())
        std::this_thread::sleep_for(std::chrono::milliseconds(100));
}

void RunService::stop() { impl_->server.stop(); }

void RunService::wait_idle() {
    std::unique_lock lock(impl_->mutex);
    impl_->idle.wait(lock, [this] { return impl_->active == 0; });
}

} // namespace matnav
