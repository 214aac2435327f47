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

#pragma once

/// @file
/// JSON-over-HTTP front end to the run directories under one root.
///
///   POST /runs                           body RunConfig -> 201 {run_id, url}
///   GET  /runs                           {runs: [{run_id, query, stages}]}
///   GET  /runs/{id}                      RunState + running_stage + elapsed_ms
///   POST /runs/{id}/stages/{n}[?force=1] 202 {run_id, stage, status, poll}
///   GET  /runs/{id}/criterion            {criterion, label}
///   GET  /runs/{id}/eval                 EvalReport
///   GET  /runs/{id}/report               stage 3 report
///   GET  /runs/{id}/candidates[?status=stable|rejected|all]
///   GET  /runs/{id}/distribution
///   GET  /runs/{id}/candidates/{cid}/cif
///
/// Errors are {"error": {kind, message}} with 400 (bad config or
/// argument), 404 (unknown run or file), 409 (AlreadyRunning, StageOrder,
/// NotReady) or 500. Every response carries permissive CORS headers.

#include <filesystem>
#include <memory>
#include <string>

namespace matnav {

struct ServiceOptions {
    std::filesystem::path run_root = "runs";
    std::filesystem::path config_base = "."; ///< resolves relative paths in posted configs
    std::filesystem::path static_dir;        ///< built UI assets, served at / when set
};

class RunService {
public:
    /// Loads the runs already under the root; a stage left running by a
    /// dead process is marked failed.
    explicit RunService(ServiceOptions options);
    ~RunService();
    RunService(const RunService&) = delete;
    RunService& operator=(const RunService&) = delete;

    /// Binds and serves on a background thread; port 0 picks a free port.
    /// Returns the bound port. Throws Error(IoError) when binding fails.
    int start(const std::string& host, int port);
    /// Blocks until stop() is called from another thread.
    void wait();
    void stop();
    /// Blocks until no stage job is running.
    void wait_idle();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace matnav
