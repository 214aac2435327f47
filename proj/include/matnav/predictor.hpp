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
/// Composition descriptors, a closed-form ridge baseline, evaluation
/// metrics and the pluggable predictor boundary.
///
/// Feature schema "comp-stats-v1" (21 values): for each of atomic mass,
/// covalent radius, Pauling electronegativity, group and period, the
/// atom-fraction weighted mean, the minimum, the maximum and the
/// weighted standard deviation; then the number of distinct elements.

#include <matnav/core.hpp>

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace matnav {

inline constexpr const char* feature_schema_id = "comp-stats-v1";
inline constexpr const char* model_schema_id = "matnav.ridge.v1";

struct FeatureVector {
    std::string schema = feature_schema_id;
    std::vector<double> values;
};

const std::vector<std::string>& feature_names();

/// Throws Error(MissingElementData).
FeatureVector featurize(const Composition& c);

struct DatasetRow {
    std::string material_id;
    std::string formula;
    FeatureVector features;
    double label = 0; ///< K
    std::string source; ///< literature, derived or estimated
};

struct Dataset {
    std::string schema = feature_schema_id;
    std::vector<DatasetRow> rows;

    /// Throws Error(SchemaViolation) for duplicate ids, non-positive or
    /// non-finite labels, or feature vectors of the wrong shape.
    void validate() const;
    std::map<std::string, std::size_t> source_counts() const;
};

DatasetRow make_row(std::string material_id, const std::string& formula, double label, std::string source);

/// CSV with header material_id,formula,theta_d_K,source; features are
/// recomputed from the formula.
Dataset load_dataset_csv(const std::filesystem::path& path);
std::string dataset_to_csv(const Dataset& d);

struct RegressionModel {
    std::string feature_schema = feature_schema_id;
    std::vector<double> weights; ///< on standardized features, 0 for dropped columns
    double intercept = 0;        ///< label mean
    double lambda = 1.0;
    std::vector<double> mean;
    std::vector<double> scale;   ///< population std, 1 for dropped columns
    std::vector<std::size_t> dropped;
    std::size_t n_train = 0;
    std::map<std::string, std::size_t> source_counts;

    /// Weights and intercept in the units of the raw features.
    std::vector<double> raw_weights() const;
    double raw_intercept() const;
};

/// Minimizes mean squared residual + lambda * |w|^2 on standardized
/// features; rows are taken in material-id order.
/// Throws Error(InsufficientData) or Error(DegenerateFeatures).
RegressionModel train(const Dataset& d, double lambda);

/// Throws Error(SchemaMismatch).
double predict(const RegressionModel& m, const FeatureVector& f);
std::vector<double> predict(const RegressionModel& m, const std::vector<FeatureVector>& fs);

nlohmann::json model_to_json(const RegressionModel& m);
/// Throws Error(SchemaMismatch) for another schema id.
RegressionModel model_from_json(const nlohmann::json& j);

struct EvalReport {
    double rmse = 0; ///< K
    double r2 = 0;
    std::size_t n_test = 0;
};

/// r2 = 1 - SSE/SST; when every label is equal, r2 is 1 for an exact
/// fit and 0 otherwise. Throws Error(EmptyTestSet).
EvalReport score(const std::vector<double>& labels, const std::vector<double>& predictions);
EvalReport evaluate(const RegressionModel& m, const Dataset& test);

nlohmann::json eval_to_json(const EvalReport& r);

/// Seeded shuffle, then the first round(n * test_fraction) rows are
/// the test set.
std::pair<Dataset, Dataset> split_dataset(const Dataset& d, double test_fraction, std::uint64_t seed);

struct CvResult {
    double best_lambda = 1.0;
    std::map<double, double> rmse; ///< lambda -> mean fold RMSE
};

/// k-fold cross-validation over `grid`; ties go to the larger lambda.
CvResult cross_validate(const Dataset& d, const std::vector<double>& grid = {0.01, 0.1, 1, 10, 100},
                        std::size_t folds = 5, std::uint64_t seed = 0);

// ---------------------------------------------------------- predictor boundary

class Predictor {
public:
    virtual ~Predictor() = default;
    virtual std::string kind() const = 0;
    virtual void fit(const Dataset& d) = 0;
    virtual double predict(const Structure& s) = 0;
    virtual std::vector<double> predict_batch(const std::vector<Structure>& s);
    virtual nlohmann::json save() const = 0;
};

class RidgePredictor final : public Predictor {
public:
    explicit RidgePredictor(double lambda = 1.0) : lambda_(lambda) {}
    explicit RidgePredictor(RegressionModel m) : lambda_(m.lambda), model_(std::move(m)), trained_(true) {}
    std::string kind() const override { return "ridge"; }
    void fit(const Dataset& d) override;
    double predict(const Structure& s) override;
    nlohmann::json save() const override;
    const RegressionModel& model() const;

private:
    double lambda_;
    RegressionModel model_;
    bool trained_ = false;
};

/// Values keyed by reduced formula; fit() is a no-op.
class LookupPredictor final : public Predictor {
public:
    explicit LookupPredictor(std::map<std::string, double> table) : table_(std::move(table)) {}
    /// CSV with header formula,theta_d_K.
    static LookupPredictor from_csv(const std::filesystem::path& path);
    std::string kind() const override { return "lookup"; }
    void fit(const Dataset&) override {}
    /// Throws Error(NotFound) for formulas outside the table.
    double predict(const Structure& s) override;
    nlohmann::json save() const override;

private:
    std::map<std::string, double> table_;
};

/// Talks line-delimited JSON with a child process over stdin/stdout.
/// Requests: {"op":"fit","rows":[{material_id,formula,theta_d_K,source}]}
/// and {"op":"predict","id","formula","cif"}; replies {"ok":true} or
/// {"theta_d":x}, or {"error":message}.
class ExternalProcessPredictor final : public Predictor {
public:
    explicit ExternalProcessPredictor(std::vector<std::string> argv);
    ~ExternalProcessPredictor() override;
    std::string kind() const override { return "external"; }
    void fit(const Dataset& d) override;
    double predict(const Structure& s) override;
    nlohmann::json save() const override;

private:
    nlohmann::json call(const nlohmann::json& request);
    void start();

    std::vector<std::string> argv_;
    int pid_ = -1;
    int to_child_ = -1;
    int from_child_ = -1;
    std::string buffer_;
};

/// Throws Error(SchemaMismatch) or Error(ConfigError).
std::unique_ptr<Predictor> load_predictor(const nlohmann::json& j);

} // namespace matnav
