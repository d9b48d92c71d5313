#include <sstream>

#include "doctest.h"
#include "gplvmf/config.hpp"
#include "gplvmf/errors.hpp"
#include "gplvmf/serialize.hpp"
#include "test_support.hpp"

using namespace gplvmf;
using gplvmf::testing::Instance;
using gplvmf::testing::InstanceShape;

namespace {

const char* kConfig = R"({
  "schema": {"users": 4, "items": 6, "contexts": [
    {"name": "mood", "kind": "categorical", "cardinality": 3, "latent_dim": 2},
    {"name": "temp", "kind": "real"}]},
  "data": {"delimiter": "\\t"},
  "rating_scale": [0, 10],
  "model": {"item_dim": 3, "inducing": 7, "use_mean": false},
  "train": {"method": "sgd", "iterations": 12, "learning_rate": 0.02, "seed": 9, "patience": 4},
  "evaluation": {"folds": 4, "seed": 3},
  "predict": {"add_noise": true}
})";

}  // namespace

TEST_CASE("config parses every section") {
  const ExperimentConfig c = parse_config(kConfig);
  CHECK(c.schema.user_count == 4);
  CHECK(c.schema.contexts[0].latent_dim == 2);
  CHECK(c.schema.contexts[1].kind == ContextKind::RealValued);
  CHECK(c.format.delimiter == '\t');
  CHECK(c.scale.max == 10.0);
  CHECK(c.train.dims.item_dim == 3);
  CHECK(c.train.dims.inducing == 7);
  CHECK_FALSE(c.train.dims.use_mean);
  CHECK(c.train.method == Method::SGD);
  CHECK(c.train.iterations == 12);
  CHECK(c.train.seed == 9);
  CHECK(c.folds == 4);
  CHECK(c.add_noise);
  CHECK(c.predict_options().scale.min == 0.0);

  const ExperimentConfig again = parse_config(dump_config(c));
  CHECK(dump_config(again) == dump_config(c));
}

TEST_CASE("config errors") {
  CHECK_THROWS_AS(parse_config("{"), ConfigError);
  CHECK_THROWS_AS(parse_config("{}"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config(R"({"schema": {"users": 1, "items": 1}, "trian": {}})"),
                       doctest::Contains("unknown key 'trian'"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"schema": {"users": 1, "items": 1}, "train": {"iterations": 0}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"schema": {"users": 1, "items": 1}, "train": {"method": "adam"}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"schema": {"users": 1, "items": 1, "contexts": [{"name": "a", "kind": "ordinal"}]}})"),
                  ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"schema": {"users": 1, "items": 1}, "model": {"inducing": "ten"}})"), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent.json"), ConfigError);
}

TEST_CASE("synthetic spec parses") {
  const SyntheticSpec s = parse_synthetic_spec(R"({"users": 5, "items": 4, "ratings_per_user": 3,
    "contexts": [{"name": "a", "kind": "categorical", "cardinality": 2, "alpha": 0, "irrelevant": true}]})");
  CHECK(s.users == 5);
  CHECK(s.contexts[0].irrelevant);
  CHECK(s.contexts[0].alpha == 0.0);
  CHECK_THROWS_AS(parse_synthetic_spec(R"({"users": 0})"), ConfigError);
}

TEST_CASE("model round trip reproduces predictions bit for bit") {
  InstanceShape shape;
  shape.users = 3;
  shape.items = 5;
  shape.ratings_per_user = 4;
  Instance inst = gplvmf::testing::random_instance(shape, 17);
  // user 2 has no training data
  std::vector<UserBlock> training(inst.blocks.begin(), inst.blocks.begin() + 2);
  PredictOptions opt;
  opt.scale = {0.0, 6.0};
  opt.add_noise = true;
  const Predictor pred(inst.state, training, opt);
  const SavedModel saved = SavedModel::capture(pred, shape.dims, inst.table.standardization);
  std::stringstream buf;
  save_model(buf, saved);
  const SavedModel loaded = load_model(buf);
  const Predictor back = loaded.predictor();
  CHECK(pack(back.state()) == pack(pred.state()));
  CHECK_FALSE(back.knows_user(2));
  CHECK(loaded.standardization.mean == inst.table.standardization.mean);
  CHECK(back.options().add_noise);
  for (const auto& b : training)
    for (const auto& r : b.rows) {
      const Prediction p = pred.predict(r), q = back.predict(r);
      CHECK(p.mean == q.mean);
      CHECK(p.variance == q.variance);
      CHECK(p.clamped_mean == q.clamped_mean);
    }
}

TEST_CASE("model loading rejects foreign or damaged files") {
  std::stringstream a("{\"format\": \"other\", \"version\": 1}");
  CHECK_THROWS_AS(load_model(a), DataError);
  std::stringstream b(std::string("{\"format\": \"") + kModelFormat + "\", \"version\": 99}");
  CHECK_THROWS_WITH_AS(load_model(b), doctest::Contains("unsupported version"), DataError);
  std::stringstream c("not json");
  CHECK_THROWS_AS(load_model(c), DataError);

  InstanceShape shape;
  Instance inst = gplvmf::testing::random_instance(shape, 1);
  const Predictor pred(inst.state, inst.blocks);
  std::stringstream buf;
  save_model(buf, SavedModel::capture(pred, shape.dims, inst.table.standardization));
  std::string text = buf.str();
  text.replace(text.find("\"inducing\":10"), 13, "\"inducing\":11");
  std::stringstream d(text);
  CHECK_THROWS_AS(load_model(d), DataError);
}
