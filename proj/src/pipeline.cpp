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

#include <matnav/pipeline.hpp>
#include <matnav/cif.hpp>
#include <matnav/error.hpp>
#include <matnav/fetcher.hpp>
#include <matnav/hash.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numbers>
#include <mutex>
#include <numeric>
#include <set>

namespace matnav {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::mutex state_mutex;

std::string dump(const json& j) { return j.dump(2) + "\n"; }

json read_json(const fs::path& p) {
    json j = json::parse(read_file(p), nullptr, false);
    if (j.is_discarded())
        throw Error(ErrorKind::SchemaViolation, p.string() + ": not valid JSON");
    return j;
}

fs::path stage_dir(const fs::path& run, int n) { return run / ("stage" + std::to_string(n)); }

void check(bool ok, const std::string& what) {
    if (!ok)
        throw Error(ErrorKind::ConfigError, what);
}

std::vector<std::string> list_files(const fs::path& root, const fs::path& rel_to) {
    std::vector<std::string> out;
    std::error_code ec;
    if (!fs::is_directory(root, ec))
        return out;
    for (const auto& e : fs::recursive_directory_iterator(root))
        if (e.is_regular_file())
            out.push_back(fs::relative(e.path(), rel_to).generic_string());
    std::sort(out.begin(), out.end());
    return out;
}

void write_manifest(const fs::path& run, int n, const RunConfig& cfg, const std::map<std::string, std::string>& inputs) {
    const fs::path dir = stage_dir(run, n);
    json outputs = json::object();
    for (const auto& rel : list_files(dir, dir))
        if (rel != "manifest.json")
            outputs[rel] = sha256_hex(read_file(dir / rel));
    json m = {{"stage", n},
              {"config_sha256", sha256_hex(run_config_to_json(cfg).dump())},
              {"inputs", inputs},
              {"outputs", outputs}};
    write_file_atomic(dir / "manifest.json", dump(m));
}

std::string file_hash(const fs::path& p) { return sha256_hex(read_file(p)); }

// An open database connection, serving the stub file in-process when
// the config names one.
struct DbSession {
    std::unique_ptr<StubDbServer> stub;
    std::unique_ptr<DbClient> client;
    std::map<std::string, std::string> inputs;

    DbSession(const RunConfig& cfg, const fs::path& run) {
        DbConfig dc;
        dc.api_key = cfg.database.api_key;
        dc.cache_dir = cfg.database.cache_dir.empty() ? run / "cache" : cfg.resolve(cfg.database.cache_dir);
        dc.timeout = std::chrono::milliseconds(cfg.database.timeout_ms);
        if (!cfg.database.stub_db.empty()) {
            const fs::path path = cfg.resolve(cfg.database.stub_db);
            const std::string text = read_file(path);
            json db = json::parse(text, nullptr, false);
            if (db.is_discarded())
                throw Error(ErrorKind::SchemaViolation, path.string() + ": not valid JSON");
            std::string key = dc.api_key;
            if (key.empty())
                if (const char* env = std::getenv(db_key_env))
                    key = env;
            stub = std::make_unique<StubDbServer>(std::move(db), key.empty() ? std::string("\x01") : key);
            dc.base_url = stub->base_url();
            inputs["stub_db"] = sha256_hex(text);
        } else {
            dc.base_url = cfg.database.base_url;
        }
        client = std::make_unique<DbClient>(std::move(dc));
    }
};

std::vector<double> intent_values(const std::vector<PropertyRecord>& records, const QueryIntent& intent) {
    std::vector<double> out;
    for (const auto& r : records)
        if (r.property_name == intent.property_name && normalize_unit(r.unit) == intent.unit &&
            std::isfinite(r.value))
            out.push_back(r.value);
    return out;
}

// ------------------------------------------------------------------ stage I

void stage1(const RunConfig& cfg, const fs::path& run, RunState& st) {
    const fs::path out = stage_dir(run, 1);
    const auto& ev = cfg.evidence;
    const auto docs = load_corpus(cfg.resolve(ev.corpus_dir));
    std::map<std::string, std::string> inputs;
    for (const auto& d : docs)
        inputs["corpus/" + d.id] = sha256_hex(d.text);

    EvidenceOptions opt;
    opt.window = ev.window;
    opt.overlap = ev.overlap;
    opt.top_k = ev.top_k;
    opt.batch_size = ev.batch_size;
    opt.threshold.granularity = ev.granularity;
    opt.threshold.min_records = ev.min_records;
    HashedTfEmbedder embedder;
    PatternExtractor extractor;
    const EvidenceResult r = ground_query(cfg.query, docs, embedder, extractor, opt);

    json retrieved = json::array();
    for (const auto& rc : r.retrieved)
        retrieved.push_back({{"doc_id", rc.chunk.doc_id}, {"start", rc.chunk.start}, {"score", rc.score}});
    const auto values = intent_values(r.records, r.intent);
    const auto bands = percentile_bands(values);
    const json criterion = criterion_to_json(r.criterion);

    write_file_atomic(out / "records.json", dump(records_to_json(r.records)));
    write_file_atomic(out / "retrieved.json", dump(retrieved));
    write_file_atomic(out / "bands.json", dump({{"property_name", r.intent.property_name},
                                                 {"unit", r.intent.unit},
                                                 {"p10", bands.p10},
                                                 {"p90", bands.p90},
                                                 {"low_band", bands.low_band},
                                                 {"high_band", bands.high_band}}));
    write_file_atomic(out / "criterion.json", dump(criterion));
    write_manifest(run, 1, cfg, inputs);

    st.criterion = criterion;
    st.counts["chunks"] = r.chunk_count;
    st.counts["retrieved_chunks"] = r.retrieved.size();
    st.counts["batches"] = r.batch_count;
    st.counts["records"] = r.records.size();
}

// ----------------------------------------------------------------- stage II

void stage2(const RunConfig& cfg, const fs::path& run, RunState& st) {
    const fs::path out = stage_dir(run, 2);
    check(!cfg.database.material_ids.empty(), "database.material_ids is empty");
    DbSession db(cfg, run);
    std::map<std::string, std::string> inputs = db.inputs;

    RepairOptions ro;
    ro.budget = cfg.database.retry_budget;
    ro.cache_dir = db.client->config().cache_dir;
    const FetchResult fetched = derive_debye_table(*db.client, cfg.database.material_ids, out / "scratch", ro);
    write_file_atomic(out / "debye_table.json", dump(table_to_json(fetched.table)));
    json diags = json::array();
    for (const auto& d : fetched.diagnostics)
        diags.push_back(diagnostic_to_json(d));
    write_file_atomic(out / "fetch.json", dump({{"attempts", fetched.attempts}, {"diagnostics", diags}}));

    Dataset d;
    json skipped = json::array();
    for (const auto& row : fetched.table.rows) {
        try {
            d.rows.push_back(make_row(row.material_id, row.formula, row.value, "derived"));
        } catch (const Error& e) {
            skipped.push_back({{"material_id", row.material_id}, {"reason", e.what()}});
        }
    }
    const std::size_t derived = d.rows.size();
    if (cfg.predictor.include_literature) {
        const fs::path records_file = stage_dir(run, 1) / "records.json";
        inputs["stage1/records.json"] = file_hash(records_file);
        const auto records = records_from_json(read_json(records_file));
        const QueryIntent intent = parse_query(cfg.query);
        std::map<std::string, int> seen;
        for (const auto& r : records) {
            if (r.property_name != intent.property_name || normalize_unit(r.unit) != intent.unit)
                continue;
            if (r.normalized.size() != 1) {
                skipped.push_back({{"material_id", r.material}, {"reason", "not a single resolved formula"}});
                continue;
            }
            std::string id = "lit:" + r.normalized[0];
            if (const int k = ++seen[id]; k > 1)
                id += "#" + std::to_string(k);
            try {
                d.rows.push_back(make_row(id, r.normalized[0], r.value, "literature"));
            } catch (const Error& e) {
                skipped.push_back({{"material_id", id}, {"reason", e.what()}});
            }
        }
    }
    d.validate();
    write_file_atomic(out / "dataset.csv", dataset_to_csv(d));
    write_file_atomic(out / "skipped.json", dump(skipped));

    auto [train_set, test_set] = split_dataset(d, cfg.predictor.test_fraction, cfg.seed);
    double lambda = cfg.predictor.lambda;
    if (cfg.predictor.cross_validate) {
        const auto cv = cross_validate(train_set, {0.01, 0.1, 1, 10, 100}, 5, cfg.seed);
        lambda = cv.best_lambda;
        json rmse = json::array();
        for (const auto& [l, e] : cv.rmse)
            rmse.push_back({{"lambda", l}, {"rmse", e}});
        write_file_atomic(out / "cv.json", dump({{"best_lambda", lambda}, {"folds", 5}, {"rmse", rmse}}));
    }
    const RegressionModel model = train(train_set, lambda);
    const EvalReport report = evaluate(model, test_set);
    write_file_atomic(out / "model.json", dump(model_to_json(model)));
    json ej = eval_to_json(report);
    ej["n_train"] = train_set.rows.size();
    ej["split_seed"] = cfg.seed;
    write_file_atomic(out / "eval.json", dump(ej));
    write_manifest(run, 2, cfg, inputs);

    st.counts["dataset_rows"] = d.rows.size();
    st.counts["derived_rows"] = derived;
    st.counts["literature_rows"] = d.rows.size() - derived;
    st.counts["skipped_rows"] = skipped.size();
}

// ---------------------------------------------------------------- stage III

std::unique_ptr<Predictor> make_predictor(const RunConfig& cfg, const fs::path& run,
                                          std::map<std::string, std::string>& inputs) {
    const auto& p = cfg.predictor;
    if (p.kind == "ridge") {
        const fs::path model = stage_dir(run, 2) / "model.json";
        inputs["stage2/model.json"] = file_hash(model);
        return std::make_unique<RidgePredictor>(model_from_json(read_json(model)));
    }
    if (p.kind == "lookup") {
        inputs["predictor_table"] = file_hash(cfg.resolve(p.table));
        return std::make_unique<LookupPredictor>(LookupPredictor::from_csv(cfg.resolve(p.table)));
    }
    return std::make_unique<ExternalProcessPredictor>(p.command);
}

void stage3(const RunConfig& cfg, const fs::path& run, RunState& st) {
    const fs::path out = stage_dir(run, 3);
    std::map<std::string, std::string> inputs;
    const fs::path crit_file = stage_dir(run, 1) / "criterion.json";
    inputs["stage1/criterion.json"] = file_hash(crit_file);
    const ScreeningCriterion criterion = criterion_from_json(read_json(crit_file));
    auto predictor = make_predictor(cfg, run, inputs);

    check(!cfg.prototypes.empty(), "prototypes is empty");
    DbSession db(cfg, run);
    for (const auto& [k, v] : db.inputs)
        inputs[k] = v;
    StructureFilter filter;
    filter.ids = cfg.prototypes;
    const auto entries = db.client->get_structures(filter);
    std::vector<Structure> prototypes;
    for (const auto& id : cfg.prototypes) {
        auto it = std::find_if(entries.begin(), entries.end(), [&](const DbEntry& e) { return e.material_id == id; });
        if (it == entries.end())
            throw Error(ErrorKind::NoPrototypes, "prototype " + id + " not found in the database");
        prototypes.push_back(it->structure.with_id(id));
    }

    GenerationResult gen = generate(prototypes, cfg.generation);
    inputs["references"] = file_hash(cfg.resolve(cfg.stability.references));
    inputs["energies"] = file_hash(cfg.resolve(cfg.stability.energies));
    const auto refs = load_reference_csv(cfg.resolve(cfg.stability.references));
    const auto energies = file_energy_provider(cfg.resolve(cfg.stability.energies));

    const std::size_t accepted = gen.accepted.size();
    ScreenResult sr = screen_candidates(std::move(gen.accepted), *predictor, criterion, energies, refs,
                                        cfg.stability.threshold, cfg.workers);

    std::vector<const Candidate*> all;
    for (const auto* v : {&gen.rejected, &sr.rejected, &sr.stable})
        for (const auto& c : *v)
            all.push_back(&c);
    std::sort(all.begin(), all.end(), [](const Candidate* a, const Candidate* b) { return a->id < b->id; });
    json cands = json::array();
    for (const auto* c : all)
        cands.push_back(candidate_to_json(*c));
    write_file_atomic(out / "candidates.json", dump(cands));
    write_file_atomic(out / "hull.json", dump(sr.hull));
    write_file_atomic(out / "ranked_table.csv", ranked_table_csv(sr.stable));
    for (const auto& c : sr.stable)
        write_file_atomic(out / "cif" / (c.id + ".cif"), write_cif(c.structure));

    std::map<std::string, std::vector<double>> series;
    {
        const fs::path table = stage_dir(run, 2) / "debye_table.json";
        inputs["stage2/debye_table.json"] = file_hash(table);
        for (const auto& r : table_from_json(read_json(table)).rows)
            if (std::isfinite(r.value))
                series["database"].push_back(r.value);
        const fs::path records = stage_dir(run, 1) / "records.json";
        inputs["stage1/records.json"] = file_hash(records);
        for (double v : intent_values(records_from_json(read_json(records)), parse_query(cfg.query)))
            series["literature"].push_back(v);
        for (const auto& c : sr.stable)
            series["generated-stable"].push_back(*c.predicted_theta_d);
    }
    json notices = json::array();
    for (const char* name : {"database", "literature", "generated-stable"})
        if (series[name].empty()) {
            series.erase(name);
            notices.push_back(std::string("series ") + name + " is empty");
        }
    json dist = distribution_to_json(summarize_distribution(series, cfg.bin_width));
    dist["notices"] = notices;
    dist["criterion"] = criterion_to_json(criterion);
    write_file_atomic(out / "distribution.json", dump(dist));

    std::map<std::string, std::size_t> reasons = gen.rejection_counts;
    for (const auto& [k, v] : sr.rejection_counts)
        reasons[k] += v;
    json report = {{"attempts", cfg.generation.count},
                   {"generated", accepted},
                   {"stable", sr.stable.size()},
                   {"rejections", reasons},
                   {"threshold_eV_per_atom", cfg.stability.threshold},
                   {"criterion", criterion_to_json(criterion)},
                   {"predictor", predictor->kind()}};
    if (sr.stable.empty())
        report["message"] = "no candidates: nothing satisfies the criterion and the stability threshold";
    write_file_atomic(out / "report.json", dump(report));
    write_manifest(run, 3, cfg, inputs);

    st.counts["candidates_attempted"] = cfg.generation.count;
    st.counts["candidates_generated"] = accepted;
    st.counts["candidates_stable"] = sr.stable.size();
}

double silverman(std::vector<double> v, double bin_width) {
    const double n = double(v.size());
    if (v.size() < 2)
        return bin_width / 4;
    std::sort(v.begin(), v.end());
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
    double ss = 0;
    for (double x : v)
        ss += (x - mean) * (x - mean);
    const double sd = std::sqrt(ss / (n - 1));
    if (sd == 0)
        return bin_width / 4;
    const double iqr = quantile_sorted(v, 0.75) - quantile_sorted(v, 0.25);
    const double spread = iqr > 0 ? std::min(sd, iqr / 1.34) : sd;
    return 0.9 * spread * std::pow(n, -0.2);
}

} // namespace

// ------------------------------------------------------------------ config

std::filesystem::path RunConfig::resolve(const std::string& p) const {
    const fs::path path(p);
    return path.is_absolute() ? path : base_dir / path;
}

void RunConfig::validate() const {
    check(!query.empty(), "query is empty");
    check(evidence.window >= 1 && evidence.overlap < evidence.window, "evidence.overlap must be below evidence.window");
    check(evidence.top_k >= 1, "evidence.top_k must be >= 1");
    check(evidence.batch_size >= 1, "evidence.batch_size must be >= 1");
    check(evidence.granularity > 0, "evidence.granularity must be > 0");
    check(evidence.min_records >= 1, "evidence.min_records must be >= 1");
    check(database.timeout_ms > 0, "database.timeout_ms must be > 0");
    check(database.retry_budget >= 1 && database.retry_budget <= 10, "database.retry_budget must lie in [1, 10]");
    check(predictor.kind == "ridge" || predictor.kind == "lookup" || predictor.kind == "external",
          "predictor.kind must be ridge, lookup or external");
    check(predictor.lambda >= 0 && std::isfinite(predictor.lambda), "predictor.lambda must be >= 0");
    check(predictor.test_fraction > 0 && predictor.test_fraction < 1, "predictor.test_fraction must lie in (0, 1)");
    check(predictor.kind != "lookup" || !predictor.table.empty(), "predictor.table is required for lookup");
    check(predictor.kind != "external" || !predictor.command.empty(), "predictor.command is required for external");
    generation.validate();
    check(stability.threshold > 0 && std::isfinite(stability.threshold), "stability.threshold must be > 0");
    check(bin_width > 0 && std::isfinite(bin_width), "bin_width must be > 0");
    check(port >= 0 && port <= 65535, "port must lie in [0, 65535]");
}

json run_config_to_json(const RunConfig& c) {
    json gen = gen_config_to_json(c.generation);
    gen.erase("seed");
    gen.erase("workers");
    return {{"query", c.query},
            {"seed", c.seed},
            {"workers", c.workers},
            {"evidence",
             {{"corpus_dir", c.evidence.corpus_dir},
              {"window", c.evidence.window},
              {"overlap", c.evidence.overlap},
              {"top_k", c.evidence.top_k},
              {"batch_size", c.evidence.batch_size},
              {"granularity", c.evidence.granularity},
              {"min_records", c.evidence.min_records}}},
            {"database",
             {{"base_url", c.database.base_url},
              {"stub_db", c.database.stub_db},
              {"api_key", c.database.api_key},
              {"cache_dir", c.database.cache_dir},
              {"material_ids", c.database.material_ids},
              {"timeout_ms", c.database.timeout_ms},
              {"retry_budget", c.database.retry_budget}}},
            {"predictor",
             {{"kind", c.predictor.kind},
              {"lambda", c.predictor.lambda},
              {"cross_validate", c.predictor.cross_validate},
              {"test_fraction", c.predictor.test_fraction},
              {"include_literature", c.predictor.include_literature},
              {"table", c.predictor.table},
              {"command", c.predictor.command}}},
            {"generation", gen},
            {"prototypes", c.prototypes},
            {"stability",
             {{"threshold", c.stability.threshold},
              {"references", c.stability.references},
              {"energies", c.stability.energies}}},
            {"bin_width", c.bin_width},
            {"service", {{"host", c.host}, {"port", c.port}}}};
}

RunConfig run_config_from_json(const json& j, fs::path base_dir) {
    if (!j.is_object())
        throw Error(ErrorKind::ConfigError, "run config must be a JSON object");
    RunConfig c;
    c.base_dir = std::move(base_dir);
    try {
        c.query = j.value("query", c.query);
        c.seed = j.value("seed", c.seed);
        c.workers = j.value("workers", c.workers);
        const json e = j.value("evidence", json::object());
        c.evidence.corpus_dir = e.value("corpus_dir", c.evidence.corpus_dir);
        c.evidence.window = e.value("window", c.evidence.window);
        c.evidence.overlap = e.value("overlap", c.evidence.overlap);
        c.evidence.top_k = e.value("top_k", c.evidence.top_k);
        c.evidence.batch_size = e.value("batch_size", c.evidence.batch_size);
        c.evidence.granularity = e.value("granularity", c.evidence.granularity);
        c.evidence.min_records = e.value("min_records", c.evidence.min_records);
        const json d = j.value("database", json::object());
        c.database.base_url = d.value("base_url", c.database.base_url);
        c.database.stub_db = d.value("stub_db", c.database.stub_db);
        c.database.api_key = d.value("api_key", c.database.api_key);
        c.database.cache_dir = d.value("cache_dir", c.database.cache_dir);
        c.database.material_ids = d.value("material_ids", c.database.material_ids);
        c.database.timeout_ms = d.value("timeout_ms", c.database.timeout_ms);
        c.database.retry_budget = d.value("retry_budget", c.database.retry_budget);
        const json p = j.value("predictor", json::object());
        c.predictor.kind = p.value("kind", c.predictor.kind);
        c.predictor.lambda = p.value("lambda", c.predictor.lambda);
        c.predictor.cross_validate = p.value("cross_validate", c.predictor.cross_validate);
        c.predictor.test_fraction = p.value("test_fraction", c.predictor.test_fraction);
        c.predictor.include_literature = p.value("include_literature", c.predictor.include_literature);
        c.predictor.table = p.value("table", c.predictor.table);
        c.predictor.command = p.value("command", c.predictor.command);
        c.generation = gen_config_from_json(j.value("generation", json::object()));
        c.prototypes = j.value("prototypes", c.prototypes);
        const json s = j.value("stability", json::object());
        c.stability.threshold = s.value("threshold", c.stability.threshold);
        c.stability.references = s.value("references", c.stability.references);
        c.stability.energies = s.value("energies", c.stability.energies);
        c.bin_width = j.value("bin_width", c.bin_width);
        const json sv = j.value("service", json::object());
        c.host = sv.value("host", c.host);
        c.port = sv.value("port", c.port);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::ConfigError, std::string("run config: ") + e.what());
    }
    c.generation.seed = c.seed;
    c.generation.workers = c.workers;
    c.validate();
    return c;
}

RunConfig load_run_config(const fs::path& path) {
    json j = json::parse(read_file(path), nullptr, false);
    if (j.is_discarded())
        throw Error(ErrorKind::ConfigError, path.string() + ": not valid JSON");
    return run_config_from_json(j, path.parent_path().empty() ? fs::path(".") : path.parent_path());
}

// -------------------------------------------------------------------- state

std::string to_string(StageStatus s) {
    switch (s) {
    case StageStatus::pending: return "pending";
    case StageStatus::running: return "running";
    case StageStatus::done: return "done";
    case StageStatus::failed: return "failed";
    }
    return "unknown";
}

json run_state_to_json(const RunState& s) {
    json stages = json::array();
    for (std::size_t i = 0; i < s.stages.size(); ++i)
        stages.push_back({{"stage", i + 1},
                          {"status", to_string(s.stages[i].status)},
                          {"artifacts", s.stages[i].artifacts},
                          {"diagnostics", s.stages[i].diagnostics}});
    return {{"run_id", s.run_id}, {"stages", stages}, {"criterion", s.criterion}, {"counts", s.counts}, {"log", s.log}};
}

RunState run_state_from_json(const json& j) {
    try {
        RunState s;
        s.run_id = j.at("run_id").get<std::string>();
        const auto& stages = j.at("stages");
        if (!stages.is_array() || stages.size() != 3)
            throw Error(ErrorKind::SchemaViolation, "run state needs three stages");
        for (std::size_t i = 0; i < 3; ++i) {
            const std::string status = stages[i].at("status").get<std::string>();
            StageState& st = s.stages[i];
            if (status == "pending")
                st.status = StageStatus::pending;
            else if (status == "running")
                st.status = StageStatus::running;
            else if (status == "done")
                st.status = StageStatus::done;
            else if (status == "failed")
                st.status = StageStatus::failed;
            else
                throw Error(ErrorKind::SchemaViolation, "unknown stage status " + status);
            st.artifacts = stages[i].value("artifacts", std::vector<std::string>{});
            st.diagnostics = stages[i].value("diagnostics", json::array());
        }
        s.criterion = j.value("criterion", json());
        s.counts = j.value("counts", std::map<std::string, std::size_t>{});
        s.log = j.value("log", std::vector<std::string>{});
        return s;
    } catch (const json::exception& e) {
        throw Error(ErrorKind::SchemaViolation, std::string("run state: ") + e.what());
    }
}

void init_run_dir(const fs::path& dir, const RunConfig& cfg, const std::string& run_id) {
    fs::create_directories(dir);
    const std::string config = dump(run_config_to_json(cfg));
    const fs::path config_file = dir / "config.json";
    if (fs::exists(config_file)) {
        if (read_file(config_file) != config)
            throw Error(ErrorKind::ConfigError,
                        "run directory " + dir.string() + " was created with a different config");
    } else {
        write_file_atomic(config_file, config);
    }
    if (!fs::exists(dir / "state.json")) {
        RunState s;
        s.run_id = run_id;
        save_run_state(dir, s);
    }
}

RunState load_run_state(const fs::path& dir) {
    const fs::path f = dir / "state.json";
    if (!fs::exists(f))
        throw Error(ErrorKind::NotFound, "no run at " + dir.string());
    return run_state_from_json(read_json(f));
}

void save_run_state(const fs::path& dir, const RunState& s) {
    write_file_atomic(dir / "state.json", dump(run_state_to_json(s)));
}

RunState begin_stage(const fs::path& dir, int n, bool force) {
    if (n < 1 || n > 3)
        throw Error(ErrorKind::InvalidArgument, "stage must be 1, 2 or 3");
    std::lock_guard lock(state_mutex);
    RunState s = load_run_state(dir);
    const std::string tag = "stage " + std::to_string(n);
    for (int k = 1; k <= 3; ++k)
        if (s.stage(k).status == StageStatus::running) {
            s.log.push_back(tag + " rejected: stage " + std::to_string(k) + " already running");
            save_run_state(dir, s);
            throw Error(ErrorKind::AlreadyRunning, "stage " + std::to_string(k) + " is already running");
        }
    if (n > 1 && s.stage(n - 1).status != StageStatus::done) {
        const std::string why = "stage " + std::to_string(n - 1) + " is " + to_string(s.stage(n - 1).status);
        if (!force) {
            s.log.push_back(tag + " rejected: " + why);
            save_run_state(dir, s);
            throw Error(ErrorKind::StageOrder, tag + " needs stage " + std::to_string(n - 1) + " done; " + why);
        }
        s.log.push_back(tag + " forced: " + why);
    }
    for (int k = n; k <= 3; ++k) {
        if (k > n && s.stage(k).status != StageStatus::pending)
            s.log.push_back("stage " + std::to_string(k) + " reset");
        s.stage(k) = StageState{};
        fs::remove_all(stage_dir(dir, k));
    }
    if (n == 1)
        s.criterion = json();
    s.stage(n).status = StageStatus::running;
    s.log.push_back(tag + " started");
    save_run_state(dir, s);
    return s;
}

json error_to_json(const std::exception& e) {
    json j = {{"kind", "Internal"}, {"message", e.what()}};
    if (const auto* me = dynamic_cast<const Error*>(&e))
        j["kind"] = std::string(to_string(me->kind()));
    if (const auto* be = dynamic_cast<const BudgetExhaustedError*>(&e)) {
        json d = json::array();
        for (const auto& x : be->diagnostics())
            d.push_back(diagnostic_to_json(x));
        j["diagnostics"] = d;
    }
    return j;
}

void complete_stage(const RunConfig& cfg, const fs::path& dir, int n) {
    RunState s = load_run_state(dir);
    if (s.stage(n).status != StageStatus::running)
        throw Error(ErrorKind::StageOrder, "stage " + std::to_string(n) + " was not started");
    const std::string tag = "stage " + std::to_string(n);
    auto finish = [&](StageStatus status, json diagnostics, const std::string& line) {
        std::lock_guard lock(state_mutex);
        RunState latest = load_run_state(dir);
        latest.stage(n).status = status;
        latest.stage(n).diagnostics = std::move(diagnostics);
        latest.stage(n).artifacts = status == StageStatus::done ? list_files(stage_dir(dir, n), dir)
                                                                : std::vector<std::string>{};
        if (status == StageStatus::done) {
            for (const auto& [k, v] : s.counts)
                latest.counts[k] = v;
            if (n == 1)
                latest.criterion = s.criterion;
        }
        latest.log.push_back(line);
        save_run_state(dir, latest);
    };
    try {
        fs::create_directories(stage_dir(dir, n));
        if (n == 1)
            stage1(cfg, dir, s);
        else if (n == 2)
            stage2(cfg, dir, s);
        else
            stage3(cfg, dir, s);
    } catch (const std::exception& e) {
        json diag = error_to_json(e);
        finish(StageStatus::failed, json::array({diag}), tag + " failed: " + diag["kind"].get<std::string>());
        throw;
    }
    finish(StageStatus::done, json::array(), tag + " done");
}

std::string criterion_label(const ScreeningCriterion& c) {
    std::string lower = c.property_name;
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char ch) { return std::tolower(ch); });
    const std::string name = lower == "debye temperature" ? "\u0398_D" : c.property_name;
    char buf[64];
    std::snprintf(buf, sizeof buf, "%g", c.threshold);
    return name + " " + c.comparator + " " + buf + (c.unit.empty() ? "" : " " + c.unit);
}

// ---------------------------------------------------------------- screening

ScreenResult screen_candidates(std::vector<Candidate> candidates, Predictor& predictor,
                               const ScreeningCriterion& criterion, const EnergyProvider& energies,
                               const std::vector<ReferencePhase>& refs, double threshold, unsigned workers) {
    ScreenResult out;
    auto reject = [&](Candidate& c, const std::string& reason) {
        c.advance(CandidateStatus::rejected, reason);
        ++out.rejection_counts[reason];
        out.rejected.push_back(std::move(c));
    };
    std::vector<Candidate> with_energy;
    for (auto& c : candidates) {
        try {
            c.predicted_theta_d = predictor.predict(c.structure);
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::NotFound)
                throw;
            reject(c, "no_prediction");
            continue;
        }
        c.advance(CandidateStatus::predicted);
        if (!criterion.admits(*c.predicted_theta_d)) {
            reject(c, "criterion");
            continue;
        }
        c.e_form = energies.formation_energy(c.structure);
        if (!c.e_form) {
            reject(c, "missing_energy");
            continue;
        }
        with_energy.push_back(std::move(c));
    }
    StabilityPartition part = filter_stable(std::move(with_energy), refs, threshold, workers);
    for (const auto* v : {&part.stable, &part.rejected})
        for (const auto& c : *v) {
            const HullResult hr = energy_above_hull(c.structure.composition(), *c.e_form, refs);
            out.hull.push_back(hull_result_to_json(c.id, *c.e_form, hr, c.status == CandidateStatus::validated));
        }
    std::sort(out.hull.begin(), out.hull.end(),
              [](const json& a, const json& b) { return a["id"].get<std::string>() < b["id"].get<std::string>(); });
    for (auto& c : part.rejected) {
        ++out.rejection_counts[c.rejection_reason];
        out.rejected.push_back(std::move(c));
    }
    out.stable = std::move(part.stable);
    std::sort(out.stable.begin(), out.stable.end(), [](const Candidate& a, const Candidate& b) {
        if (*a.predicted_theta_d != *b.predicted_theta_d)
            return *a.predicted_theta_d > *b.predicted_theta_d;
        const auto fa = reduced_formula(a.structure.composition()), fb = reduced_formula(b.structure.composition());
        return fa != fb ? fa < fb : a.id < b.id;
    });
    return out;
}

std::string ranked_table_csv(const std::vector<Candidate>& stable) {
    std::string out = "rank,id,formula,theta_d_K,e_hull_eV_per_atom\n";
    char buf[160];
    int rank = 0;
    for (const auto& c : stable) {
        std::snprintf(buf, sizeof buf, "%d,%s,%s,%.1f,%.3f\n", ++rank, c.id.c_str(),
                      reduced_formula(c.structure.composition()).c_str(), *c.predicted_theta_d, *c.e_hull);
        out += buf;
    }
    return out;
}

// ------------------------------------------------------------- distribution

DistributionSummary summarize_distribution(const std::map<std::string, std::vector<double>>& series, double bin_width) {
    if (!(bin_width > 0))
        throw Error(ErrorKind::InvalidArgument, "bin width must be > 0");
    if (series.empty())
        throw Error(ErrorKind::EmptySeries, "no series to summarize");
    double lo = HUGE_VAL, hi = -HUGE_VAL;
    for (const auto& [name, values] : series) {
        if (values.empty())
            throw Error(ErrorKind::EmptySeries, "series " + name + " is empty");
        for (double v : values) {
            if (!std::isfinite(v))
                throw Error(ErrorKind::InvalidArgument, "series " + name + " holds a non-finite value");
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }
    DistributionSummary d;
    const double first = std::floor(lo / bin_width) * bin_width;
    double last = std::ceil(hi / bin_width) * bin_width;
    if (last <= first)
        last = first + bin_width;
    const auto nbins = static_cast<std::size_t>(std::llround((last - first) / bin_width));
    for (std::size_t i = 0; i <= nbins; ++i)
        d.edges.push_back(first + double(i) * bin_width);
    const double top = d.edges.back();
    for (std::size_t i = 0; i + 1 < kde_points; ++i)
        d.grid.push_back(first + (top - first) * double(i) / double(kde_points - 1));
    d.grid.push_back(top);

    for (const auto& [name, values] : series) {
        SeriesSummary s;
        s.n = values.size();
        s.counts.assign(nbins, 0);
        for (double v : values) {
            auto b = static_cast<std::size_t>(std::floor((v - first) / bin_width));
            ++s.counts[std::min(b, nbins - 1)];
        }
        s.bandwidth = silverman(values, bin_width);
        const double norm = 1.0 / (double(values.size()) * s.bandwidth * std::sqrt(2 * std::numbers::pi));
        for (double x : d.grid) {
            double acc = 0;
            for (double v : values) {
                const double z = (x - v) / s.bandwidth;
                acc += std::exp(-0.5 * z * z);
            }
            s.density.push_back(acc * norm);
        }
        d.series[name] = std::move(s);
    }
    return d;
}

json distribution_to_json(const DistributionSummary& d) {
    json series = json::object();
    for (const auto& [name, s] : d.series)
        series[name] = {{"n", s.n}, {"counts", s.counts}, {"bandwidth", s.bandwidth}, {"density", s.density}};
    return {{"unit", "K"},
            {"bandwidth_rule", "silverman"},
            {"edges", d.edges},
            {"grid", d.grid},
            {"series", series}};
}

} // namespace matnav
