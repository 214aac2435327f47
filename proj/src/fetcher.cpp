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
#include <matnav/hash.hpp>

#include <httplib.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <set>
#include <thread>

namespace matnav {

namespace {

using nlohmann::json;

std::string join(const std::vector<std::string>& parts, char sep) {
    std::string out;
    for (const auto& p : parts) {
        if (!out.empty())
            out += sep;
        out += p;
    }
    return out;
}

std::vector<std::string> sorted_unique(std::vector<std::string> v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
}

struct Endpoint {
    std::string origin; ///< scheme://host[:port]
    std::string prefix; ///< path prefix without trailing slash
};

Endpoint split_url(const std::string& url) {
    const auto scheme = url.find("://");
    if (scheme == std::string::npos)
        throw Error(ErrorKind::ConfigError, "database URL needs a scheme: " + url);
    const auto path = url.find('/', scheme + 3);
    Endpoint e{url.substr(0, path), path == std::string::npos ? "" : url.substr(path)};
    while (!e.prefix.empty() && e.prefix.back() == '/')
        e.prefix.pop_back();
    return e;
}

double json_number(const json& j) {
    if (j.is_number())
        return j.get<double>();
    if (j.is_null())
        return std::nan("");
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "nan" || s == "NaN")
            return std::nan("");
        if (s == "inf" || s == "Infinity")
            return HUGE_VAL;
        if (s == "-inf" || s == "-Infinity")
            return -HUGE_VAL;
    }
    throw Error(ErrorKind::DecodeError, "expected a number, got " + j.dump());
}

} // namespace

// -------------------------------------------------------------- wire types

Structure structure_from_wire(const json& j, const std::string& id) {
    try {
        const auto& m = j.at("lattice").at("matrix");
        if (!m.is_array() || m.size() != 3)
            throw Error(ErrorKind::DecodeError, "lattice matrix must be 3x3");
        Eigen::Matrix3d basis;
        for (int r = 0; r < 3; ++r) {
            if (!m[r].is_array() || m[r].size() != 3)
                throw Error(ErrorKind::DecodeError, "lattice matrix must be 3x3");
            for (int c = 0; c < 3; ++c)
                basis(r, c) = m[r][c].get<double>();
        }
        std::vector<Site> sites;
        for (const auto& s : j.at("sites")) {
            const auto& species = s.at("species");
            if (!species.is_array() || species.size() != 1)
                throw Error(ErrorKind::DecodeError, "mixed-species site in " + id);
            const double occu = species[0].value("occu", 1.0);
            if (std::abs(occu - 1.0) > 1e-6)
                throw Error(ErrorKind::DecodeError, "partial occupancy in " + id);
            const auto& abc = s.at("abc");
            if (!abc.is_array() || abc.size() != 3)
                throw Error(ErrorKind::DecodeError, "site coordinates must have 3 entries");
            const auto el = Element::try_from_symbol(species[0].at("element").get<std::string>());
            if (!el)
                throw Error(ErrorKind::DecodeError, "unknown element in " + id);
            sites.push_back({*el, {abc[0].get<double>(), abc[1].get<double>(), abc[2].get<double>()}});
        }
        return Structure(Lattice(basis), std::move(sites), id);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::DecodeError, "structure " + id + ": " + e.what());
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::DecodeError)
            throw;
        throw Error(ErrorKind::DecodeError, "structure " + id + ": " + e.what());
    }
}

json structure_to_wire(const Structure& s) {
    json matrix = json::array();
    for (int r = 0; r < 3; ++r)
        matrix.push_back({s.lattice().matrix()(r, 0), s.lattice().matrix()(r, 1),
                          s.lattice().matrix()(r, 2)});
    json sites = json::array();
    for (const auto& site : s.sites())
        sites.push_back({{"species", {{{"element", std::string(site.element.symbol())}, {"occu", 1.0}}}},
                         {"abc", {site.frac[0], site.frac[1], site.frac[2]}}});
    return {{"lattice", {{"matrix", matrix}}}, {"sites", sites}};
}

ElasticTensor tensor_from_wire(const json& j) {
    if (!j.is_array() || j.size() != 6)
        throw Error(ErrorKind::DecodeError, "elastic tensor must be 6x6");
    Matrix6d c;
    for (int r = 0; r < 6; ++r) {
        if (!j[r].is_array() || j[r].size() != 6)
            throw Error(ErrorKind::DecodeError, "elastic tensor must be 6x6");
        for (int k = 0; k < 6; ++k) {
            if (!j[r][k].is_number())
                throw Error(ErrorKind::DecodeError, "elastic tensor entries must be numbers");
            c(r, k) = j[r][k].get<double>();
        }
    }
    if (!c.allFinite())
        throw Error(ErrorKind::DecodeError, "elastic tensor has non-finite entries");
    return ElasticTensor::symmetrized(c);
}

// ------------------------------------------------------------------ client

DbClient::DbClient(DbConfig config) : config_(std::move(config)) {
    if (config_.api_key.empty())
        if (const char* env = std::getenv(db_key_env))
            config_.api_key = env;
}

json DbClient::get(const std::string& path, const std::map<std::string, std::string>& params) {
    std::string canonical = path + "?";
    for (auto it = params.begin(); it != params.end(); ++it)
        canonical += (it == params.begin() ? "" : "&") + it->first + "=" + it->second;
    std::filesystem::path cache_file;
    if (!config_.cache_dir.empty()) {
        cache_file = config_.cache_dir / (sha256_hex(canonical) + ".json");
        std::error_code ec;
        if (std::filesystem::exists(cache_file, ec)) {
            auto cached = json::parse(read_file(cache_file), nullptr, false);
            if (!cached.is_discarded() && cached.contains("response"))
                return cached["response"];
        }
    }
    if (config_.api_key.empty())
        throw Error(ErrorKind::AuthError,
                    std::string("no database credential; set ") + db_key_env);

    const Endpoint ep = split_url(config_.base_url);
    httplib::Client cli(ep.origin);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout - secs);
    cli.set_connection_timeout(secs.count(), usecs.count());
    cli.set_read_timeout(secs.count(), usecs.count());
    httplib::Params query(params.begin(), params.end());
    httplib::Headers headers{{"X-API-KEY", config_.api_key}, {"Accept", "application/json"}};
    ++network_calls_;
    auto res = cli.Get(ep.prefix + path, query, headers);
    if (!res)
        throw Error(ErrorKind::NetworkError,
                    "request to " + config_.base_url + path + " failed: " + httplib::to_string(res.error()));
    if (res->status == 401 || res->status == 403)
        throw Error(ErrorKind::AuthError, "database rejected the credential (HTTP " +
                                              std::to_string(res->status) + ")");
    if (res->status != 200)
        throw Error(ErrorKind::NetworkError, "database returned HTTP " + std::to_string(res->status));
    auto body = json::parse(res->body, nullptr, false);
    if (body.is_discarded())
        throw Error(ErrorKind::DecodeError, "response body is not JSON");
    if (!cache_file.empty())
        write_file_atomic(cache_file, json{{"request", canonical}, {"response", body}}.dump());
    return body;
}

std::vector<DbEntry> DbClient::get_structures(const StructureFilter& filter) {
    const int selectors = !filter.ids.empty() + !filter.elements.empty() + !filter.formula.empty();
    if (selectors != 1)
        throw Error(ErrorKind::InvalidArgument, "structure filter needs exactly one of ids, elements, formula");
    std::map<std::string, std::string> params;
    if (!filter.ids.empty())
        params["material_ids"] = join(sorted_unique(filter.ids), ',');
    else if (!filter.elements.empty())
        params["elements"] = join(sorted_unique(filter.elements), ',');
    else
        params["formula"] = filter.formula;
    const json body = get("/materials/summary/", params);
    std::vector<DbEntry> out;
    try {
        for (const auto& d : body.at("data")) {
            DbEntry e{d.at("material_id").get<std::string>(), d.value("formula_pretty", std::string()),
                      structure_from_wire(d.at("structure"), d.at("material_id").get<std::string>()),
                      std::nullopt};
            if (auto f = d.find("formation_energy_per_atom"); f != d.end() && f->is_number())
                e.formation_energy_per_atom = f->get<double>();
            out.push_back(std::move(e));
        }
    } catch (const json::exception& e) {
        throw Error(ErrorKind::DecodeError, std::string("summary response: ") + e.what());
    }
    return out;
}

ElasticityResult DbClient::get_elasticity(const std::vector<std::string>& ids) {
    if (ids.empty())
        throw Error(ErrorKind::InvalidArgument, "elasticity request needs at least one id");
    const auto wanted = sorted_unique(ids);
    std::map<std::string, DbEntry> structures;
    for (auto& e : get_structures({wanted, {}, {}}))
        structures.emplace(e.material_id, std::move(e));
    const json body = get("/materials/elasticity/", {{"material_ids", join(wanted, ',')}});
    std::map<std::string, ElasticTensor> tensors;
    try {
        for (const auto& d : body.at("data")) {
            auto t = d.find("elastic_tensor");
            if (t == d.end() || t->is_null())
                continue;
            tensors.emplace(d.at("material_id").get<std::string>(), tensor_from_wire(t->at("ieee_format")));
        }
    } catch (const json::exception& e) {
        throw Error(ErrorKind::DecodeError, std::string("elasticity response: ") + e.what());
    }
    ElasticityResult result;
    for (const auto& id : wanted) {
        auto s = structures.find(id);
        auto t = tensors.find(id);
        if (s == structures.end())
            result.skipped.push_back({id, "no structure"});
        else if (t == tensors.end())
            result.skipped.push_back({id, "no elasticity data"});
        else
            result.entries.push_back({id, s->second.formula, t->second, s->second.structure});
    }
    return result;
}

// ------------------------------------------------------------------ tables

PropertySpec debye_spec() {
    return {"debye_temperature", "K", 1.0, 5000.0, {"material_id", "formula", "value", "unit"}};
}

json spec_to_json(const PropertySpec& s) {
    return {{"name", s.name}, {"unit", s.unit}, {"physical_range", {s.min, s.max}},
            {"required_columns", s.required_columns}};
}

json table_to_json(const PropertyTable& t) {
    json rows = json::array();
    for (const auto& r : t.rows) {
        json value = std::isfinite(r.value) ? json(r.value) : json(std::isnan(r.value) ? "nan" : (r.value > 0 ? "inf" : "-inf"));
        rows.push_back({{"material_id", r.material_id}, {"formula", r.formula}, {"value", value},
                        {"unit", t.unit}});
    }
    return {{"columns", t.columns}, {"unit", t.unit}, {"rows", rows}};
}

PropertyTable table_from_json(const json& j) {
    try {
        PropertyTable t;
        t.columns = j.at("columns").get<std::vector<std::string>>();
        t.unit = j.at("unit").get<std::string>();
        for (const auto& r : j.at("rows"))
            t.rows.push_back({r.at("material_id").get<std::string>(), r.at("formula").get<std::string>(),
                              json_number(r.at("value"))});
        return t;
    } catch (const json::exception& e) {
        throw Error(ErrorKind::DecodeError, std::string("property table: ") + e.what());
    }
}

const CheckResult* ValidationReport::check(std::string_view name) const {
    for (const auto& c : checks)
        if (c.name == name)
            return &c;
    return nullptr;
}

std::vector<std::string> ValidationReport::failed() const {
    std::vector<std::string> out;
    for (const auto& c : checks)
        if (!c.passed)
            out.push_back(c.name);
    return out;
}

ValidationReport validate_table(const PropertyTable& t, const PropertySpec& spec) {
    ValidationReport report;
    report.checks.push_back({"non_empty", !t.rows.empty(), t.rows.empty() ? "table has no rows" : ""});

    std::vector<std::string> missing;
    for (const auto& col : spec.required_columns)
        if (std::find(t.columns.begin(), t.columns.end(), col) == t.columns.end())
            missing.push_back(col);
    report.checks.push_back({"schema", missing.empty(),
                             missing.empty() ? "" : "missing columns: " + join(missing, ',')});

    std::vector<std::string> nonfinite, outside;
    for (const auto& r : t.rows) {
        if (!std::isfinite(r.value))
            nonfinite.push_back(r.material_id);
        if (!(r.value >= spec.min && r.value <= spec.max))
            outside.push_back(r.material_id + "=" + std::to_string(r.value));
    }
    report.checks.push_back({"finite", nonfinite.empty(),
                             nonfinite.empty() ? "" : "non-finite values for " + join(nonfinite, ',')});
    report.checks.push_back({"range", outside.empty(),
                             outside.empty() ? ""
                                             : "outside [" + std::to_string(spec.min) + ", " +
                                                   std::to_string(spec.max) + "]: " + join(outside, ',')});
    const bool unit_ok = t.unit == spec.unit;
    report.checks.push_back({"unit", unit_ok,
                             unit_ok ? "" : "unit '" + t.unit + "' but spec requires '" + spec.unit + "'"});
    report.passed = std::all_of(report.checks.begin(), report.checks.end(),
                                [](const CheckResult& c) { return c.passed; });
    return report;
}

// ---------------------------------------------------------------- routines

json routine_to_json(const RoutineDescriptor& r) {
    json steps = json::array();
    for (const auto& s : r.steps)
        steps.push_back({{"op", s.op}, {"args", s.args}});
    return {{"endpoint", r.endpoint}, {"ids", r.ids}, {"literal_rows", r.literal_rows},
            {"unit", r.unit}, {"steps", steps}};
}

RoutineDescriptor routine_from_json(const json& j) {
    try {
        RoutineDescriptor r;
        r.endpoint = j.at("endpoint").get<std::string>();
        r.ids = j.value("ids", std::vector<std::string>{});
        r.literal_rows = j.value("literal_rows", json::array());
        r.unit = j.value("unit", std::string());
        for (const auto& s : j.value("steps", json::array()))
            r.steps.push_back({s.at("op").get<std::string>(), s.value("args", json::object())});
        return r;
    } catch (const json::exception& e) {
        throw Error(ErrorKind::DecodeError, std::string("routine: ") + e.what());
    }
}

json diagnostic_to_json(const Diagnostic& d) {
    return {{"attempt", d.attempt}, {"kind", d.kind}, {"message", d.message},
            {"failed_checks", d.failed_checks}};
}

TemplateRoutineSource::TemplateRoutineSource(std::vector<std::string> ids) : ids_(sorted_unique(std::move(ids))) {}

std::string TemplateRoutineSource::cache_tag() const { return "template:" + join(ids_, ','); }

RoutineDescriptor TemplateRoutineSource::produce(const PropertySpec& spec,
                                                 const std::vector<Diagnostic>& prior) {
    RoutineDescriptor r;
    r.endpoint = "elasticity";
    r.ids = ids_;
    r.unit = spec.unit;
    r.steps.push_back({"debye_temperature", json::object()});
    std::set<std::string> failed;
    for (const auto& d : prior)
        failed.insert(d.failed_checks.begin(), d.failed_checks.end());
    if (failed.count("finite"))
        r.steps.push_back({"drop_nonfinite", json::object()});
    if (failed.count("range"))
        r.steps.push_back({"drop_out_of_range", {{"min", spec.min}, {"max", spec.max}}});
    if (failed.count("unit"))
        r.steps.push_back({"set_unit", {{"unit", spec.unit}}});
    return r;
}

ScriptedRoutineSource::ScriptedRoutineSource(std::vector<RoutineDescriptor> script, std::string tag)
    : script_(std::move(script)), tag_(std::move(tag)) {}

RoutineDescriptor ScriptedRoutineSource::produce(const PropertySpec&, const std::vector<Diagnostic>& prior) {
    seen_.push_back(prior.size());
    if (script_.empty())
        throw Error(ErrorKind::InvalidArgument, "empty routine script");
    return script_[std::min(next_++, script_.size() - 1)];
}

RoutineRunner::RoutineRunner(DbClient* client, std::filesystem::path scratch_dir)
    : client_(client), scratch_(std::move(scratch_dir)) {}

PropertyTable RoutineRunner::execute(const RoutineDescriptor& r,
                                     std::chrono::steady_clock::time_point deadline, int attempt) {
    struct Work {
        std::string id, formula;
        std::optional<double> value;
        std::optional<ElasticEntry> elastic;
        json fields;
    };
    auto check_deadline = [&] {
        if (std::chrono::steady_clock::now() > deadline)
            throw Error(ErrorKind::Timeout, "routine exceeded its time limit");
    };
    check_deadline();
    const auto dir = scratch_ / ("attempt-" + std::to_string(attempt));
    write_file_atomic(dir / "routine.json", routine_to_json(r).dump(2));

    std::vector<Work> rows;
    if (r.endpoint == "elasticity" || r.endpoint == "summary") {
        if (client_ == nullptr)
            throw Error(ErrorKind::ExternalProcess, "routine needs a database client");
        if (r.endpoint == "elasticity") {
            for (auto& e : client_->get_elasticity(r.ids).entries)
                rows.push_back({e.material_id, e.formula, std::nullopt, e, json::object()});
        } else {
            std::vector<std::string> ids = sorted_unique(r.ids);
            const json body = client_->get("/materials/summary/", {{"material_ids", join(ids, ',')}});
            for (const auto& d : body.at("data"))
                rows.push_back({d.at("material_id").get<std::string>(), d.value("formula_pretty", std::string()),
                                std::nullopt, std::nullopt, d});
        }
    } else if (r.endpoint == "literal") {
        for (const auto& row : r.literal_rows) {
            Work w{row.value("material_id", std::string()), row.value("formula", std::string()),
                   std::nullopt, std::nullopt, row};
            if (row.contains("value"))
                w.value = json_number(row["value"]);
            rows.push_back(std::move(w));
        }
    } else {
        throw Error(ErrorKind::ExternalProcess, "unknown endpoint '" + r.endpoint + "'");
    }

    std::string unit = r.unit;
    for (const auto& step : r.steps) {
        check_deadline();
        if (step.op == "debye_temperature") {
            for (auto& w : rows) {
                if (!w.elastic)
                    continue;
                try {
                    w.value = debye_from_tensor(w.elastic->structure, w.elastic->tensor);
                } catch (const Error&) {
                    w.value = std::nan("");
                }
            }
        } else if (step.op == "select_field") {
            const auto field = step.args.value("field", std::string());
            for (auto& w : rows) {
                auto f = w.fields.find(field);
                w.value = (f != w.fields.end() && f->is_number()) ? f->get<double>() : std::nan("");
            }
        } else if (step.op == "scale") {
            const double k = step.args.value("factor", 1.0);
            for (auto& w : rows)
                if (w.value)
                    *w.value *= k;
        } else if (step.op == "drop_nonfinite") {
            std::erase_if(rows, [](const Work& w) { return !w.value || !std::isfinite(*w.value); });
        } else if (step.op == "drop_out_of_range") {
            const double lo = step.args.value("min", -HUGE_VAL), hi = step.args.value("max", HUGE_VAL);
            std::erase_if(rows, [&](const Work& w) { return !w.value || !(*w.value >= lo && *w.value <= hi); });
        } else if (step.op == "set_unit") {
            unit = step.args.value("unit", unit);
        } else if (step.op == "sleep_ms") {
            const auto until = std::chrono::steady_clock::now() +
                               std::chrono::milliseconds(step.args.value("ms", 0));
            while (std::chrono::steady_clock::now() < until) {
                check_deadline();
                std::this_thread::sleep_for(std::chrono::milliseconds(5));
            }
        } else if (step.op == "raise") {
            throw Error(ErrorKind::ExternalProcess, step.args.value("message", std::string("routine failed")));
        } else {
            throw Error(ErrorKind::ExternalProcess, "unknown step '" + step.op + "'");
        }
    }
    check_deadline();

    PropertyTable t;
    t.unit = unit;
    t.columns = {"material_id", "formula"};
    const bool all_valued = std::all_of(rows.begin(), rows.end(), [](const Work& w) { return w.value.has_value(); });
    if (all_valued)
        t.columns.push_back("value");
    if (!unit.empty())
        t.columns.push_back("unit");
    for (const auto& w : rows)
        t.rows.push_back({w.id, w.formula, w.value.value_or(std::nan(""))});
    write_file_atomic(dir / "table.json", table_to_json(t).dump(2));
    return t;
}

FetchResult fetch_with_repair(const PropertySpec& spec, RoutineSource& source, RoutineRunner& runner,
                              const RepairOptions& options) {
    if (options.budget < 1)
        throw Error(ErrorKind::InvalidArgument, "retry budget must be at least 1");
    std::filesystem::path cache_file;
    if (!options.cache_dir.empty()) {
        cache_file = options.cache_dir /
                     ("table-" + sha256_hex(spec_to_json(spec).dump() + "\n" + source.cache_tag()) + ".json");
        std::error_code ec;
        if (std::filesystem::exists(cache_file, ec)) {
            auto cached = json::parse(read_file(cache_file), nullptr, false);
            if (!cached.is_discarded()) {
                FetchResult hit;
                hit.table = table_from_json(cached);
                hit.from_cache = true;
                return hit;
            }
        }
    }
    FetchResult result;
    for (int attempt = 1; attempt <= options.budget; ++attempt) {
        result.attempts = attempt;
        const RoutineDescriptor routine = source.produce(spec, result.diagnostics);
        PropertyTable table;
        try {
            table = runner.execute(routine, std::chrono::steady_clock::now() + options.timeout, attempt);
        } catch (const Error& e) {
            if (e.kind() == ErrorKind::Timeout)
                throw Error(ErrorKind::Timeout,
                            "attempt " + std::to_string(attempt) + " timed out: " + e.what());
            if (e.kind() == ErrorKind::AuthError)
                throw;
            result.diagnostics.push_back(
                {attempt, "execution", std::string(to_string(e.kind())) + ": " + e.what(), {}});
            continue;
        }
        const ValidationReport report = validate_table(table, spec);
        if (report.passed) {
            result.table = std::move(table);
            if (!cache_file.empty())
                write_file_atomic(cache_file, table_to_json(result.table).dump());
            return result;
        }
        std::string message;
        for (const auto& c : report.checks)
            if (!c.passed)
                message += (message.empty() ? "" : "; ") + c.name + ": " + c.diagnostic;
        result.diagnostics.push_back({attempt, "validation", message, report.failed()});
    }
    throw BudgetExhaustedError("retry budget of " + std::to_string(options.budget) +
                                   " attempts exhausted for " + spec.name,
                               result.diagnostics);
}

FetchResult derive_debye_table(DbClient& client, const std::vector<std::string>& ids,
                               const std::filesystem::path& scratch_dir, const RepairOptions& options) {
    TemplateRoutineSource source(ids);
    RoutineRunner runner(&client, scratch_dir);
    return fetch_with_repair(debye_spec(), source, runner, options);
}

} // namespace matnav
