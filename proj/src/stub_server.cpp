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

#include <matnav/fetcher.hpp>

#include <httplib.h>

#include <algorithm>
#include <set>
#include <sstream>
#include <thread>

namespace matnav {

namespace {

using nlohmann::json;

std::set<std::string> split_set(const std::string& s) {
    std::set<std::string> out;
    std::stringstream in(s);
    for (std::string part; std::getline(in, part, ',');)
        if (!part.empty())
            out.insert(part);
    return out;
}

std::string reduced_or_empty(const std::string& formula) {
    try {
        return reduced_formula(parse_formula(formula));
    } catch (const Error&) {
        return {};
    }
}

} // namespace

struct StubDbServer::Impl {
    json materials;
    std::string api_key;
    httplib::Server server;
    std::thread thread;
    int port = 0;
    std::atomic<std::size_t> requests{0};

    bool authorized(const httplib::Request& req, httplib::Response& res) {
        ++requests;
        if (req.get_header_value("X-API-KEY") == api_key)
            return true;
        res.status = 401;
        res.set_content(R"({"error":"invalid api key"})", "application/json");
        return false;
    }

    json select(const httplib::Request& req) const {
        std::vector<json> hits;
        if (req.has_param("material_ids")) {
            const auto ids = split_set(req.get_param_value("material_ids"));
            for (const auto& m : materials)
                if (ids.count(m.value("material_id", "")))
                    hits.push_back(m);
        } else if (req.has_param("elements")) {
            const auto allowed = split_set(req.get_param_value("elements"));
            for (const auto& m : materials) {
                bool inside = true;
                for (const auto& site : m["structure"]["sites"])
                    inside = inside && allowed.count(site["species"][0]["element"].get<std::string>());
                if (inside)
                    hits.push_back(m);
            }
        } else if (req.has_param("formula")) {
            const auto want = reduced_or_empty(req.get_param_value("formula"));
            for (const auto& m : materials)
                if (!want.empty() && reduced_or_empty(m.value("formula_pretty", "")) == want)
                    hits.push_back(m);
        }
        std::sort(hits.begin(), hits.end(), [](const json& a, const json& b) {
            return a["material_id"].get<std::string>() < b["material_id"].get<std::string>();
        });
        return hits;
    }
};

StubDbServer::StubDbServer(json db, std::string api_key, int port) : impl_(std::make_unique<Impl>()) {
    impl_->materials = db.value("materials", json::array());
    impl_->api_key = std::move(api_key);
    auto& srv = impl_->server;
    Impl* self = impl_.get();
    srv.set_socket_options([](socket_t sock) {
        int yes = 1;
        ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
    });

    srv.Get(R"(/materials/summary/?)", [self](const httplib::Request& req, httplib::Response& res) {
        if (!self->authorized(req, res))
            return;
        json data = json::array();
        for (const auto& m : self->select(req)) {
            json entry = {{"material_id", m["material_id"]},
                          {"formula_pretty", m.value("formula_pretty", "")},
                          {"structure", m["structure"]},
                          {"formation_energy_per_atom", m.value("formation_energy_per_atom", json())}};
            data.push_back(std::move(entry));
        }
        res.set_content(json{{"data", data}}.dump(), "application/json");
    });
    srv.Get(R"(/materials/elasticity/?)", [self](const httplib::Request& req, httplib::Response& res) {
        if (!self->authorized(req, res))
            return;
        json data = json::array();
        for (const auto& m : self->select(req)) {
            auto t = m.find("elastic_tensor");
            if (t == m.end() || t->is_null())
                continue;
            data.push_back({{"material_id", m["material_id"]}, {"elastic_tensor", *t}});
        }
        res.set_content(json{{"data", data}}.dump(), "application/json");
    });

    if (port == 0) {
        impl_->port = srv.bind_to_any_port("127.0.0.1");
    } else if (srv.bind_to_port("127.0.0.1", port)) {
        impl_->port = port;
    } else {
        impl_->port = -1;
    }
    if (impl_->port <= 0)
        throw Error(ErrorKind::IoError, "stub database cannot bind port " + std::to_string(port));
    impl_->thread = std::thread([self] { self->server.listen_after_bind(); });
    srv.wait_until_ready();
}

StubDbServer::~StubDbServer() { stop(); }

int StubDbServer::port() const noexcept { return impl_->port; }

std::string StubDbServer::base_url() const { return "http://127.0.0.1:" + std::to_string(impl_->port); }

std::size_t StubDbServer::requests() const noexcept { return impl_->requests.load(); }

void StubDbServer::wait() {
    while (impl_->server.is_running())
        std::this_thread::sleep_for(std::chrono::milliseconds(50));
}

void StubDbServer::stop() {
    impl_->server.stop();
    if (impl_->thread.joinable())
        impl_->thread.join();
}

} // namespace matnav
