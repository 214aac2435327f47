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

#include <matnav/predictor.hpp>
#include <matnav/cif.hpp>
#include <matnav/elements.hpp>
#include <matnav/error.hpp>
#include <matnav/hash.hpp>
#include <matnav/random.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <csignal>
#include <numeric>
#include <set>
#include <sstream>

#include <sys/wait.h>
#include <unistd.h>

namespace matnav {

using nlohmann::json;

namespace {

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream in(line);
    for (std::string cell; std::getline(in, cell, ',');) {
        const auto a = cell.find_first_not_of(" \t\r");
        const auto b = cell.find_last_not_of(" \t\r");
        out.push_back(a == std::string::npos ? "" : cell.substr(a, b - a + 1));
    }
    return out;
}

double parse_double(const std::string& s, const std::string& where) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used == s.size())
            return v;
    } catch (const std::exception&) {
    }
    throw Error(ErrorKind::SchemaViolation, where + ": bad number '" + s + "'");
}

/// Header-indexed CSV rows.
std::vector<std::map<std::string, std::string>> read_csv(const std::filesystem::path& path,
                                                         const std::vector<std::string>& required) {
    std::istringstream in(read_file(path));
    std::string line;
    if (!std::getline(in, line))
        throw Error(ErrorKind::SchemaViolation, path.string() + ": empty file");
    const auto header = split_csv(line);
    for (const auto& r : required)
        if (std::find(header.begin(), header.end(), r) == header.end())
            throw Error(ErrorKind::SchemaViolation, path.string() + ": missing column " + r);
    std::vector<std::map<std::string, std::string>> rows;
    for (int lineno = 2; std::getline(in, line); ++lineno) {
        if (line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        const auto cells = split_csv(line);
        if (cells.size() < header.size())
            throw Error(ErrorKind::SchemaViolation,
                        path.string() + ":" + std::to_string(lineno) + ": expected " +
                            std::to_string(header.size()) + " columns");
        std::map<std::string, std::string> row;
        for (std::size_t i = 0; i < header.size(); ++i)
            row[header[i]] = cells[i];
        row["#line"] = std::to_string(lineno);
        rows.push_back(std::move(row));
    }
    return rows;
}

} // namespace

const std::vector<std::string>& feature_names() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> out;
        for (const char* p : {"mass", "covalent_radius", "electronegativity", "group", "period"})
            for (const char* s : {"mean", "min", "max", "std"})
                out.push_back(std::string(p) + "_" + s);
        out.push_back("n_elements");
        return out;
    }();
    return names;
}

FeatureVector featurize(const Composition& c) {
    const auto frac = atom_fractions(c);
    std::vector<std::array<double, 5>> props;
    std::vector<double> weights;
    for (const auto& [e, f] : frac) {
        const ElementData& d = element_data(e);
        if (d.mass <= 0 || d.covalent_radius <= 0 || d.electronegativity <= 0)
            throw Error(ErrorKind::MissingElementData,
                        "no descriptor data for " + std::string(e.symbol()));
        props.push_back({d.mass, d.covalent_radius, d.electronegativity, double(d.group), double(d.period)});
        weights.push_back(f);
    }
    FeatureVector out;
    for (int p = 0; p < 5; ++p) {
        double mean = 0, lo = HUGE_VAL, hi = -HUGE_VAL;
        for (std::size_t i = 0; i < props.size(); ++i) {
            mean += weights[i] * props[i][p];
            lo = std::min(lo, props[i][p]);
            hi = std::max(hi, props[i][p]);
        }
        double var = 0;
        for (std::size_t i = 0; i < props.size(); ++i)
            var += weights[i] * (props[i][p] - mean) * (props[i][p] - mean);
        out.values.insert(out.values.end(), {mean, lo, hi, std::sqrt(var)});
    }
    out.values.push_back(double(frac.size()));
    return out;
}

void Dataset::validate() const {
    std::set<std::string> ids;
    for (const auto& r : rows) {
        if (!ids.insert(r.material_id).second)
            throw Error(ErrorKind::SchemaViolation, "duplicate material id " + r.material_id);
        if (!(r.label > 0) || !std::isfinite(r.label))
            throw Error(ErrorKind::SchemaViolation, "label of " + r.material_id + " must be finite and positive");
        if (r.features.schema != schema || r.features.values.size() != rows.front().features.values.size())
            throw Error(ErrorKind::SchemaViolation, "feature vector of " + r.material_id + " has the wrong shape");
        for (double v : r.features.values)
            if (!std::isfinite(v))
                throw Error(ErrorKind::SchemaViolation, "non-finite feature for " + r.material_id);
    }
}

std::map<std::string, std::size_t> Dataset::source_counts() const {
    std::map<std::string, std::size_t> out;
    for (const auto& r : rows)
        ++out[r.source];
    return out;
}

DatasetRow make_row(std::string material_id, const std::string& formula, double label, std::string source) {
    return {std::move(material_id), formula, featurize(parse_formula(formula)), label, std::move(source)};
}

Dataset load_dataset_csv(const std::filesystem::path& path) {
    Dataset d;
    for (const auto& row : read_csv(path, {"material_id", "formula", "theta_d_K", "source"})) {
        const auto where = path.string() + ":" + row.at("#line");
        d.rows.push_back(make_row(row.at("material_id"), row.at("formula"),
                                  parse_double(row.at("theta_d_K"), where), row.at("source")));
    }
    d.validate();
    return d;
}

std::string dataset_to_csv(const Dataset& d) {
    std::string out = "material_id,formula,theta_d_K,source\n";
    char buf[64];
    for (const auto& r : d.rows) {
        std::snprintf(buf, sizeof buf, "%.17g", r.label);
        out += r.material_id + "," + r.formula + "," + buf + "," + r.source + "\n";
    }
    return out;
}

std::vector<double> RegressionModel::raw_weights() const {
    std::vector<double> w(weights.size());
    for (std::size_t j = 0; j < w.size(); ++j)
        w[j] = weights[j] / scale[j];
    return w;
}

double RegressionModel::raw_intercept() const {
    double b = intercept;
    for (std::size_t j = 0; j < weights.size(); ++j)
        b -= weights[j] * mean[j] / scale[j];
    return b;
}

RegressionModel train(const Dataset& d, double lambda) {
    if (!(lambda >= 0) || !std::isfinite(lambda))
        throw Error(ErrorKind::InvalidArgument, "ridge strength must be >= 0");
    if (d.rows.empty())
        throw Error(ErrorKind::InsufficientData, "empty training set");
    d.validate();
    const std::size_t p = d.rows.front().features.values.size();
    const std::size_t n = d.rows.size();
    if (n < p + 1)
        throw Error(ErrorKind::InsufficientData, "training needs at least " + std::to_string(p + 1) +
                                                     " rows, got " + std::to_string(n));
    std::vector<const DatasetRow*> order;
    for (const auto& r : d.rows)
        order.push_back(&r);
    std::sort(order.begin(), order.end(),
              [](const DatasetRow* a, const DatasetRow* b) { return a->material_id < b->material_id; });

    RegressionModel m;
    m.feature_schema = d.schema;
    m.lambda = lambda;
    m.n_train = n;
    m.source_counts = d.source_counts();
    m.mean.assign(p, 0);
    m.scale.assign(p, 1);
    m.weights.assign(p, 0);
    double ymean = 0;
    for (const auto* r : order) {
        ymean += r->label;
        for (std::size_t j = 0; j < p; ++j)
            m.mean[j] += r->features.values[j];
    }
    ymean /= n;
    for (auto& v : m.mean)
        v /= n;
    std::vector<std::size_t> kept;
    for (std::size_t j = 0; j < p; ++j) {
        double var = 0;
        for (const auto* r : order)
            var += (r->features.values[j] - m.mean[j]) * (r->features.values[j] - m.mean[j]);
        var /= n;
        const double sd = std::sqrt(var);
        if (sd <= 1e-12 * std::max(1.0, std::abs(m.mean[j]))) {
            m.dropped.push_back(j);
        } else {
            m.scale[j] = sd;
            kept.push_back(j);
        }
    }
    m.intercept = ymean;
    if (kept.empty())
        throw Error(ErrorKind::DegenerateFeatures, "every feature column is constant");

    const Eigen::Index k = static_cast<Eigen::Index>(kept.size());
    Eigen::MatrixXd Z(n, k);
    Eigen::VectorXd y(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < k; ++j)
            Z(i, j) = (order[i]->features.values[kept[j]] - m.mean[kept[j]]) / m.scale[kept[j]];
        y[i] = order[i]->label - ymean;
    }
    Eigen::MatrixXd A = Z.transpose() * Z / double(n);
    A.diagonal().array() += lambda;
    const Eigen::VectorXd rhs = Z.transpose() * y / double(n);
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
    qr.setThreshold(1e-12);
    if (qr.rank() < k)
        throw Error(ErrorKind::DegenerateFeatures, "feature columns are collinear; use a positive ridge strength");
    const Eigen::VectorXd w = qr.solve(rhs);
    for (Eigen::Index j = 0; j < k; ++j)
        m.weights[kept[j]] = w[j];
    return m;
}

double predict(const RegressionModel& m, const FeatureVector& f) {
    if (f.schema != m.feature_schema || f.values.size() != m.weights.size())
        throw Error(ErrorKind::SchemaMismatch, "feature schema " + f.schema + " does not match model schema " +
                                                   m.feature_schema);
    double y = m.intercept;
    for (std::size_t j = 0; j < m.weights.size(); ++j)
        y += m.weights[j] * (f.values[j] - m.mean[j]) / m.scale[j];
    return y;
}

std::vector<double> predict(const RegressionModel& m, const std::vector<FeatureVector>& fs) {
    std::vector<double> out;
    out.reserve(fs.size());
    for (const auto& f : fs)
        out.push_back(predict(m, f));
    return out;
}

json model_to_json(const RegressionModel& m) {
    return {{"schema_id", model_schema_id},
            {"feature_schema", m.feature_schema},
            {"feature_names", m.feature_schema == feature_schema_id ? json(feature_names()) : json::array()},
            {"weights", m.weights},
            {"intercept", m.intercept},
            {"lambda", m.lambda},
            {"mean", m.mean},
            {"scale", m.scale},
            {"dropped", m.dropped},
            {"training", {{"rows", m.n_train}, {"by_source", m.source_counts}}}};
}

RegressionModel model_from_json(const json& j) {
    if (j.value("schema_id", "") != model_schema_id)
        throw Error(ErrorKind::SchemaMismatch, "model file is not " + std::string(model_schema_id));
    try {
        RegressionModel m;
        m.feature_schema = j.at("feature_schema").get<std::string>();
        m.weights = j.at("weights").get<std::vector<double>>();
        m.intercept = j.at("intercept").get<double>();
        m.lambda = j.at("lambda").get<double>();
        m.mean = j.at("mean").get<std::vector<double>>();
        m.scale = j.at("scale").get<std::vector<double>>();
        m.dropped = j.value("dropped", std::vector<std::size_t>{});
        if (j.contains("training")) {
            m.n_train = j["training"].value("rows", std::size_t{0});
            m.source_counts = j["training"].value("by_source", std::map<std::string, std::size_t>{});
        }
        if (m.mean.size() != m.weights.size() || m.scale.size() != m.weights.size())
            throw Error(ErrorKind::SchemaMismatch, "model vectors have inconsistent lengths");
        return m;
    } catch (const json::exception& e) {
        throw Error(ErrorKind::SchemaMismatch, std::string("model file: ") + e.what());
    }
}

EvalReport score(const std::vector<double>& labels, const std::vector<double>& predictions) {
    if (labels.empty())
        throw Error(ErrorKind::EmptyTestSet, "evaluation needs at least one test row");
    if (labels.size() != predictions.size())
        throw Error(ErrorKind::InvalidArgument, "label and prediction counts differ");
    const double n = double(labels.size());
    const double mean = std::accumulate(labels.begin(), labels.end(), 0.0) / n;
    double sse = 0, sst = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        sse += (labels[i] - predictions[i]) * (labels[i] - predictions[i]);
        sst += (labels[i] - mean) * (labels[i] - mean);
    }
    EvalReport r;
    r.n_test = labels.size();
    r.rmse = std::sqrt(sse / n);
    r.r2 = sst > 0 ? 1.0 - sse / sst : (sse == 0 ? 1.0 : 0.0);
    return r;
}

EvalReport evaluate(const RegressionModel& m, const Dataset& test) {
    std::vector<double> labels, preds;
    for (const auto& r : test.rows) {
        labels.push_back(r.label);
        preds.push_back(predict(m, r.features));
    }
    return score(labels, preds);
}

json eval_to_json(const EvalReport& r) { return {{"rmse", r.rmse}, {"r2", r.r2}, {"n_test", r.n_test}}; }

std::pair<Dataset, Dataset> split_dataset(const Dataset& d, double test_fraction, std::uint64_t seed) {
    if (!(test_fraction >= 0 && test_fraction <= 1))
        throw Error(ErrorKind::InvalidArgument, "test fraction must lie in [0, 1]");
    std::vector<const DatasetRow*> order;
    for (const auto& r : d.rows)
        order.push_back(&r);
    std::sort(order.begin(), order.end(),
              [](const DatasetRow* a, const DatasetRow* b) { return a->material_id < b->material_id; });
    CounterRng rng = CounterRng::substream(seed, 0x5b117);
    for (std::size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[rng.below(i)]);
    const auto n_test = static_cast<std::size_t>(std::llround(order.size() * test_fraction));
    Dataset train_set{d.schema, {}}, test_set{d.schema, {}};
    for (std::size_t i = 0; i < order.size(); ++i)
        (i < n_test ? test_set : train_set).rows.push_back(*order[i]);
    return {train_set, test_set};
}

CvResult cross_validate(const Dataset& d, const std::vector<double>& grid, std::size_t folds, std::uint64_t seed) {
    if (folds < 2 || d.rows.size() < folds)
        throw Error(ErrorKind::InsufficientData, "cross-validation needs at least as many rows as folds");
    auto [all, none] = split_dataset(d, 0.0, seed);
    CvResult out;
    double best = HUGE_VAL;
    for (double lambda : grid) {
        double total = 0;
        for (std::size_t f = 0; f < folds; ++f) {
            Dataset tr{d.schema, {}}, te{d.schema, {}};
            for (std::size_t i = 0; i < all.rows.size(); ++i)
                (i % folds == f ? te : tr).rows.push_back(all.rows[i]);
            total += evaluate(train(tr, lambda), te).rmse;
        }
        const double mean = total / double(folds);
        out.rmse[lambda] = mean;
        if (mean <= best) {
            best = mean;
            out.best_lambda = lambda;
        }
    }
    return out;
}

// ---------------------------------------------------------- predictor boundary

std::vector<double> Predictor::predict_batch(const std::vector<Structure>& s) {
    std::vector<double> out;
    out.reserve(s.size());
    for (const auto& x : s)
        out.push_back(predict(x));
    return out;
}

void RidgePredictor::fit(const Dataset& d) {
    model_ = train(d, lambda_);
    trained_ = true;
}

const RegressionModel& RidgePredictor::model() const {
    if (!trained_)
        throw Error(ErrorKind::NotReady, "ridge predictor has not been trained");
    return model_;
}

double RidgePredictor::predict(const Structure& s) {
    return matnav::predict(model(), featurize(s.composition()));
}

json RidgePredictor::save() const { return {{"kind", "ridge"}, {"model", model_to_json(model())}}; }

LookupPredictor LookupPredictor::from_csv(const std::filesystem::path& path) {
    std::map<std::string, double> table;
    for (const auto& row : read_csv(path, {"formula", "theta_d_K"}))
        table[reduced_formula(parse_formula(row.at("formula")))] =
            parse_double(row.at("theta_d_K"), path.string() + ":" + row.at("#line"));
    return LookupPredictor(std::move(table));
}

double LookupPredictor::predict(const Structure& s) {
    const auto key = reduced_formula(s.composition());
    auto it = table_.find(key);
    if (it == table_.end())
        throw Error(ErrorKind::NotFound, "no tabulated prediction for " + key);
    return it->second;
}

json LookupPredictor::save() const { return {{"kind", "lookup"}, {"table", table_}}; }

ExternalProcessPredictor::ExternalProcessPredictor(std::vector<std::string> argv) : argv_(std::move(argv)) {
    if (argv_.empty())
        throw Error(ErrorKind::ConfigError, "external predictor needs a command");
}

ExternalProcessPredictor::~ExternalProcessPredictor() {
    if (to_child_ >= 0)
        ::close(to_child_);
    if (from_child_ >= 0)
        ::close(from_child_);
    if (pid_ > 0) {
        int status = 0;
        ::waitpid(pid_, &status, 0);
    }
}

void ExternalProcessPredictor::start() {
    std::signal(SIGPIPE, SIG_IGN);
    int in[2], out[2];
    if (::pipe(in) != 0 || ::pipe(out) != 0)
        throw Error(ErrorKind::ExternalProcess, "cannot create pipes for the predictor process");
    const pid_t pid = ::fork();
    if (pid < 0)
        throw Error(ErrorKind::ExternalProcess, "cannot fork the predictor process");
    if (pid == 0) {
        ::dup2(in[0], STDIN_FILENO);
        ::dup2(out[1], STDOUT_FILENO);
        ::close(in[0]);
        ::close(in[1]);
        ::close(out[0]);
        ::close(out[1]);
        std::vector<char*> args;
        for (auto& a : argv_)
            args.push_back(a.data());
        args.push_back(nullptr);
        ::execvp(args[0], args.data());
        ::_exit(127);
    }
    ::close(in[0]);
    ::close(out[1]);
    pid_ = pid;
    to_child_ = in[1];
    from_child_ = out[0];
}

json ExternalProcessPredictor::call(const json& request) {
    if (pid_ < 0)
        start();
    const std::string line = request.dump() + "\n";
    for (std::size_t off = 0; off < line.size();) {
        const ssize_t n = ::write(to_child_, line.data() + off, line.size() - off);
        if (n <= 0)
            throw Error(ErrorKind::ExternalProcess, "predictor process closed its input");
        off += static_cast<std::size_t>(n);
    }
    std::size_t nl;
    while ((nl = buffer_.find('\n')) == std::string::npos) {
        char chunk[4096];
        const ssize_t n = ::read(from_child_, chunk, sizeof chunk);
        if (n <= 0)
            throw Error(ErrorKind::ExternalProcess, "predictor process exited without replying");
        buffer_.append(chunk, static_cast<std::size_t>(n));
    }
    const std::string reply = buffer_.substr(0, nl);
    buffer_.erase(0, nl + 1);
    json j = json::parse(reply, nullptr, false);
    if (j.is_discarded() || !j.is_object())
        throw Error(ErrorKind::ExternalProcess, "predictor reply is not a JSON object: " + reply);
    if (j.contains("error"))
        throw Error(ErrorKind::ExternalProcess, "predictor reported: " + j["error"].dump());
    return j;
}

void ExternalProcessPredictor::fit(const Dataset& d) {
    json rows = json::array();
    for (const auto& r : d.rows)
        rows.push_back({{"material_id", r.material_id}, {"formula", r.formula}, {"theta_d_K", r.label},
                        {"source", r.source}});
    call({{"op", "fit"}, {"rows", rows}});
}

double ExternalProcessPredictor::predict(const Structure& s) {
    json reply = call({{"op", "predict"}, {"id", s.id()}, {"formula", reduced_formula(s.composition())},
                       {"cif", write_cif(s)}});
    auto it = reply.find("theta_d");
    if (it == reply.end() || !it->is_number() || !std::isfinite(it->get<double>()))
        throw Error(ErrorKind::ExternalProcess, "predictor reply lacks a finite theta_d");
    return it->get<double>();
}

json ExternalProcessPredictor::save() const { return {{"kind", "external"}, {"command", argv_}}; }

std::unique_ptr<Predictor> load_predictor(const json& j) {
    const auto kind = j.value("kind", "");
    if (kind == "ridge")
        return std::make_unique<RidgePredictor>(model_from_json(j.at("model")));
    if (kind == "lookup")
        return std::make_unique<LookupPredictor>(j.at("table").get<std::map<std::string, double>>());
    if (kind == "external")
        return std::make_unique<ExternalProcessPredictor>(j.at("command").get<std::vector<std::string>>());
    throw Error(ErrorKind::ConfigError, "unknown predictor kind '" + kind + "'");
}

} // namespace matnav
