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

#include "test_support.hpp"

#include <matnav/hash.hpp>
#include <matnav/predictor.hpp>

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

using namespace matnav;
using namespace matnav::testing;

namespace {

Dataset synthetic(std::size_t n, std::uint64_t seed, double noise = 0) {
    CounterRng rng(seed);
    Dataset d{"synthetic", {}};
    for (std::size_t i = 0; i < n; ++i) {
        const double x1 = uniform(rng, -3, 3), x2 = uniform(rng, 10, 20);
        char id[16];
        std::snprintf(id, sizeof id, "s-%03zu", i);
        d.rows.push_back({id, "C", {"synthetic", {x1, x2}}, 2 * x1 + 1 + 50 + noise * rng.normal(), "test"});
    }
    return d;
}

Dataset real_dataset() {
    static const std::pair<const char*, double> rows[] = {
        {"C", 2230},    {"Si", 645},   {"Ge", 374},   {"Al", 428},  {"Cu", 343},  {"Fe", 470},  {"W", 400},
        {"Be", 1440},   {"Mg", 400},   {"Li", 344},   {"Na", 158},  {"K", 91},    {"Ca", 230},  {"Pb", 105},
        {"Sn", 200},    {"Ag", 225},   {"Au", 165},   {"Ni", 450},  {"Cr", 630},  {"Mo", 450},  {"Ti", 420},
        {"SiC", 1200},  {"BeO", 1280}, {"MgO", 946},  {"CaO", 648}, {"NaCl", 321}, {"KCl", 235}, {"LiF", 732},
        {"TiC", 940},   {"AlN", 950},  {"GaAs", 344}, {"ZnO", 416}};
    Dataset d;
    int i = 0;
    for (const auto& [f, t] : rows) {
        d.rows.push_back(make_row("lit-" + std::to_string(i), f, t, i % 3 ? "literature" : "derived"));
        ++i;
    }
    return d;
}

long double oracle_rmse(const std::vector<double>& y, const std::vector<double>& p) {
    long double s = 0;
    for (std::size_t i = 0; i < y.size(); ++i)
        s += (static_cast<long double>(y[i]) - p[i]) * (static_cast<long double>(y[i]) - p[i]);
    return std::sqrt(s / y.size());
}

} // namespace

TEST_CASE("featurize") {
    const auto names = feature_names();
    REQUIRE(names.size() == 21);
    CHECK(names.front() == "mass_mean");
    CHECK(names.back() == "n_elements");

    auto c = featurize(parse_formula("C"));
    REQUIRE(c.values.size() == 21);
    CHECK(c.schema == feature_schema_id);
    CHECK(c.values[0] == doctest::Approx(12.011));
    CHECK(c.values[3] == 0.0);
    CHECK(c.values[1] == c.values[2]);
    CHECK(c.values[20] == 1.0);

    auto a = featurize(parse_formula("Be2C"));
    auto b = featurize(parse_formula("Be4C2"));
    CHECK(a.values == b.values);
    CHECK(a.values[20] == 2.0);
    const double mean = (2 * 9.0122 + 12.011) / 3;
    CHECK(a.values[0] == doctest::Approx(mean).epsilon(1e-6));
    CHECK(a.values[1] == doctest::Approx(9.0122));
    CHECK(a.values[2] == doctest::Approx(12.011));
    const double var = (2 * std::pow(9.0122 - mean, 2) + std::pow(12.011 - mean, 2)) / 3;
    CHECK(a.values[3] == doctest::Approx(std::sqrt(var)).epsilon(1e-6));

    for (const char* f : {"MgBe7C4", "CaMgBe14SiC7", "BaMg2Be13C8", "NaCl", "W"}) {
        auto v = featurize(parse_formula(f));
        CHECK(v.values.size() == 21);
        for (double x : v.values)
            CHECK(std::isfinite(x));
        for (int p = 0; p < 5; ++p) {
            CHECK(v.values[4 * p + 1] <= v.values[4 * p] + 1e-9);
            CHECK(v.values[4 * p] <= v.values[4 * p + 2] + 1e-9);
        }
    }
}

TEST_CASE("ridge recovers an exact linear law") {
    auto d = synthetic(30, 1);
    auto m = train(d, 0.0);
    auto w = m.raw_weights();
    CHECK(std::abs(w[0] - 2.0) < 1e-8);
    CHECK(std::abs(w[1]) < 1e-8);
    CHECK(std::abs(m.raw_intercept() - 51.0) < 1e-7);
    CHECK(m.n_train == 30);
    CHECK(m.source_counts.at("test") == 30);

    // prediction at the feature means is the intercept (label mean)
    FeatureVector centre{"synthetic", m.mean};
    CHECK(predict(m, centre) == doctest::Approx(m.intercept));

    auto huge = train(d, 1e12);
    double ymean = 0;
    for (const auto& r : d.rows)
        ymean += r.label;
    ymean /= d.rows.size();
    for (const auto& r : d.rows)
        CHECK(std::abs(predict(huge, r.features) - ymean) < 1e-6);
}

TEST_CASE("ridge invariances") {
    CounterRng rng(99);
    for (int t = 0; t < 20; ++t) {
        auto d = synthetic(12 + rng.below(20), rng(), 1.5);
        const double lambda = std::pow(10.0, uniform(rng, -3, 2));
        const auto base = train(d, lambda);

        auto reversed = d;
        std::reverse(reversed.rows.begin(), reversed.rows.end());
        const auto r = train(reversed, lambda);
        CHECK(r.weights == base.weights);
        CHECK(r.intercept == base.intercept);

        auto doubled = d;
        for (const auto& row : d.rows) {
            auto copy = row;
            copy.material_id += "-dup";
            doubled.rows.push_back(copy);
        }
        const auto dd = train(doubled, lambda);
        for (std::size_t j = 0; j < base.weights.size(); ++j)
            CHECK(std::abs(dd.weights[j] - base.weights[j]) < 1e-9 * (1 + std::abs(base.weights[j])));
        CHECK(std::abs(dd.intercept - base.intercept) < 1e-9 * std::abs(base.intercept));

        // shrinkage: a larger lambda never increases the weight norm
        const auto more = train(d, lambda * 10);
        double n0 = 0, n1 = 0;
        for (std::size_t j = 0; j < base.weights.size(); ++j) {
            n0 += base.weights[j] * base.weights[j];
            n1 += more.weights[j] * more.weights[j];
        }
        CHECK(n1 <= n0 + 1e-12);

        std::vector<FeatureVector> fs;
        for (const auto& row : d.rows)
            fs.push_back(row.features);
        const auto batch = predict(base, fs);
        for (std::size_t i = 0; i < fs.size(); ++i)
            CHECK(batch[i] == predict(base, fs[i]));
    }
}

TEST_CASE("training errors") {
    CHECK(throws_kind([] { train(synthetic(2, 1), 1.0); }, ErrorKind::InsufficientData));
    CHECK(throws_kind([] { train(Dataset{}, 1.0); }, ErrorKind::InsufficientData));
    CHECK(throws_kind([] { train(synthetic(10, 1), -1.0); }, ErrorKind::InvalidArgument));

    auto constant = synthetic(10, 1);
    for (auto& r : constant.rows)
        r.features.values = {1.0, 2.0};
    CHECK(throws_kind([&] { train(constant, 1.0); }, ErrorKind::DegenerateFeatures));

    auto collinear = synthetic(10, 2);
    for (auto& r : collinear.rows)
        r.features.values[1] = 3 * r.features.values[0] + 1;
    CHECK(throws_kind([&] { train(collinear, 0.0); }, ErrorKind::DegenerateFeatures));
    CHECK_NOTHROW(train(collinear, 0.1));

    auto partly = synthetic(10, 3);
    for (auto& r : partly.rows)
        r.features.values[1] = 7.0;
    auto m = train(partly, 0.0);
    CHECK(m.dropped == std::vector<std::size_t>{1});
    CHECK(m.weights[1] == 0.0);
    CHECK(m.scale[1] == 1.0);

    auto dup = synthetic(10, 4);
    dup.rows[3].material_id = dup.rows[2].material_id;
    CHECK(throws_kind([&] { train(dup, 1.0); }, ErrorKind::SchemaViolation));
    auto bad = synthetic(10, 4);
    bad.rows[0].label = -5;
    CHECK(throws_kind([&] { train(bad, 1.0); }, ErrorKind::SchemaViolation));

    auto model = train(synthetic(10, 5), 1.0);
    CHECK(throws_kind([&] { predict(model, featurize(parse_formula("Be2C"))); }, ErrorKind::SchemaMismatch));
    CHECK(throws_kind([&] { predict(model, FeatureVector{"synthetic", {1.0}}); }, ErrorKind::SchemaMismatch));
}

TEST_CASE("metrics") {
    std::vector<double> y = {100, 200, 300, 400};
    std::vector<double> shifted = {110, 210, 310, 410};
    auto s = score(y, shifted);
    CHECK(s.rmse == doctest::Approx(10.0));
    CHECK(s.n_test == 4);
    auto mean = score(y, {250, 250, 250, 250});
    CHECK(mean.r2 == doctest::Approx(0.0));
    CHECK(score(y, y).r2 == 1.0);
    CHECK(score({5, 5}, {5, 5}).r2 == 1.0);
    CHECK(score({5, 5}, {5, 6}).r2 == 0.0);
    CHECK(throws_kind([] { score({}, {}); }, ErrorKind::EmptyTestSet));
    CHECK(throws_kind([] { score({1}, {1, 2}); }, ErrorKind::InvalidArgument));

    CounterRng rng(5);
    for (int t = 0; t < 100; ++t) {
        const std::size_t n = 2 + rng.below(40);
        std::vector<double> a(n), b(n);
        for (std::size_t i = 0; i < n; ++i) {
            a[i] = uniform(rng, 100, 2000);
            b[i] = a[i] + uniform(rng, -300, 300);
        }
        auto r = score(a, b);
        CHECK(std::abs(r.rmse - double(oracle_rmse(a, b))) < 1e-9 * (1 + r.rmse));
        std::vector<double> mean_pred(n, 0.0);
        for (double v : a)
            mean_pred[0] += v / n;
        std::fill(mean_pred.begin(), mean_pred.end(), mean_pred[0]);
        const long double sst = oracle_rmse(a, mean_pred) * oracle_rmse(a, mean_pred) * n;
        const long double sse = oracle_rmse(a, b) * oracle_rmse(a, b) * n;
        CHECK(std::abs(r.r2 - double(1 - sse / sst)) < 1e-9);
        CHECK(r.r2 <= 1.0);
    }
}

TEST_CASE("model JSON round trip") {
    auto d = synthetic(20, 7, 2.0);
    auto m = train(d, 0.3);
    auto j = model_to_json(m);
    CHECK(j["schema_id"] == model_schema_id);
    auto back = model_from_json(nlohmann::json::parse(j.dump()));
    for (const auto& r : d.rows)
        CHECK(predict(back, r.features) == predict(m, r.features));
    CHECK(back.source_counts == m.source_counts);

    j["schema_id"] = "other.v9";
    CHECK(throws_kind([&] { model_from_json(j); }, ErrorKind::SchemaMismatch));
    auto broken = model_to_json(m);
    broken.erase("weights");
    CHECK(throws_kind([&] { model_from_json(broken); }, ErrorKind::SchemaMismatch));

    RidgePredictor rp(m);
    auto loaded = load_predictor(nlohmann::json::parse(RidgePredictor(train(real_dataset(), 1.0)).save().dump()));
    CHECK(loaded->kind() == "ridge");
    CHECK(throws_kind([] { load_predictor({{"kind", "magic"}}); }, ErrorKind::ConfigError));
}

TEST_CASE("dataset CSV, split and cross-validation") {
    const auto dir = std::filesystem::temp_directory_path() / "matnav-predictor-csv";
    std::filesystem::create_directories(dir);
    const auto d = real_dataset();
    write_file_atomic(dir / "d.csv", dataset_to_csv(d));
    auto back = load_dataset_csv(dir / "d.csv");
    REQUIRE(back.rows.size() == d.rows.size());
    for (std::size_t i = 0; i < d.rows.size(); ++i) {
        CHECK(back.rows[i].label == d.rows[i].label);
        CHECK(back.rows[i].features.values == d.rows[i].features.values);
    }
    CHECK(back.source_counts() == d.source_counts());
    write_file_atomic(dir / "bad.csv", "material_id,formula,theta_d_K\nx,C,100\n");
    CHECK(throws_kind([&] { load_dataset_csv(dir / "bad.csv"); }, ErrorKind::SchemaViolation));
    write_file_atomic(dir / "num.csv", "material_id,formula,theta_d_K,source\nx,C,hot,lit\n");
    CHECK(throws_kind([&] { load_dataset_csv(dir / "num.csv"); }, ErrorKind::SchemaViolation));
    std::filesystem::remove_all(dir);

    auto [tr, te] = split_dataset(d, 0.25, 11);
    CHECK(te.rows.size() == static_cast<std::size_t>(std::llround(d.rows.size() * 0.25)));
    CHECK(tr.rows.size() + te.rows.size() == d.rows.size());
    std::set<std::string> ids;
    for (const auto* part : {&tr, &te})
        for (const auto& r : part->rows)
            ids.insert(r.material_id);
    CHECK(ids.size() == d.rows.size());
    auto [tr2, te2] = split_dataset(d, 0.25, 11);
    for (std::size_t i = 0; i < te.rows.size(); ++i)
        CHECK(te.rows[i].material_id == te2.rows[i].material_id);
    auto shuffled = d;
    std::reverse(shuffled.rows.begin(), shuffled.rows.end());
    auto [tr3, te3] = split_dataset(shuffled, 0.25, 11);
    for (std::size_t i = 0; i < te.rows.size(); ++i)
        CHECK(te.rows[i].material_id == te3.rows[i].material_id);

    auto cv = cross_validate(synthetic(40, 3, 0.5), {0.0001, 0.001, 100, 1000}, 5, 1);
    CHECK(cv.rmse.size() == 4);
    CHECK(cv.best_lambda < 1);
    CHECK(cv.rmse.at(1000) > cv.rmse.at(0.001));
    CHECK(throws_kind([] { cross_validate(synthetic(3, 1), {1.0}, 5, 0); }, ErrorKind::InsufficientData));
}

TEST_CASE("lookup predictor") {
    LookupPredictor lp({{"Be2C", 1602.0}, {"SiC", 1200.0}});
    CHECK(lp.predict(be2c_primitive()) == 1602.0);
    CHECK(lp.predict(zincblende("Si", "C", 4.36, "x")) == 1200.0);
    CHECK(throws_kind([&] { lp.predict(zincblende("Ge", "C", 4.6, "y")); }, ErrorKind::NotFound));
    auto again = load_predictor(lp.save());
    CHECK(again->predict(be2c_primitive()) == 1602.0);
}

TEST_CASE("external process predictor") {
    const std::string script = R"(while read -r l; do
  case "$l" in
    *'"op":"fit"'*) echo '{"ok":true}' ;;
    *'"formula":"Be2C"'*) echo '{"theta_d":1602.5}' ;;
    *) echo '{"error":"unknown formula"}' ;;
  esac
done)";
    ExternalProcessPredictor ext({"/bin/sh", "-c", script});
    CHECK(ext.kind() == "external");
    ext.fit(real_dataset());
    CHECK(ext.predict(be2c_primitive()) == 1602.5);
    CHECK(throws_kind([&] { ext.predict(zincblende("Si", "C", 4.36, "x")); }, ErrorKind::ExternalProcess));
    CHECK(ext.predict_batch({be2c_primitive("a"), be2c_primitive("b")}) == std::vector<double>{1602.5, 1602.5});

    ExternalProcessPredictor dead({"/bin/sh", "-c", "exit 0"});
    CHECK(throws_kind([&] { dead.predict(be2c_primitive()); }, ErrorKind::ExternalProcess));
    ExternalProcessPredictor garbage({"/bin/sh", "-c", "read -r l; echo not-json"});
    CHECK(throws_kind([&] { garbage.predict(be2c_primitive()); }, ErrorKind::ExternalProcess));
    CHECK(throws_kind([] { ExternalProcessPredictor({}); }, ErrorKind::ConfigError));
}
