#include "c2f/config.hpp"
#include "c2f/error.hpp"
#include "doctest.h"

using namespace c2f;

TEST_CASE("defaults") {
    RunConfig c;
    CHECK(c.lr0 == 0.001);
    CHECK(c.momentum == 0.97);
    CHECK(c.epochs == 500);
    CHECK(c.batch_size == 16);
    CHECK(c.img_size == 128);
    CHECK(c.positive_class == 0);
    CHECK(c.effective_weight_decay() == 0.01);
    c.optimizer = OptimizerKind::sgd;
    CHECK(c.effective_weight_decay() == 0.0005);
    c.optimizer = OptimizerKind::rmsprop;
    CHECK(c.hyper().weight_decay == 0.0);
    CHECK_NOTHROW(c.validate());
}

TEST_CASE("parsing") {
    const RunConfig c = parse_config(
        "# comment\n"
        "optimizer = sgd\n"
        "lr0=0.01\n"
        "\n"
        "weight_decay=0\n"
        "epochs=7\n"
        "data_root=/data/autism\n");
    CHECK(c.optimizer == OptimizerKind::sgd);
    CHECK(c.lr0 == 0.01);
    CHECK(c.effective_weight_decay() == 0.0);
    CHECK(c.epochs == 7);
    CHECK(c.data_root == "/data/autism");

    const RunConfig again = parse_config(c.to_text());
    CHECK(again.to_text() == c.to_text());
}

TEST_CASE("errors name the field") {
    CHECK_THROWS_WITH_AS(parse_config("lr0=fast\n"), doctest::Contains("lr0"), ConfigError);
    CHECK_THROWS_WITH_AS(parse_config("colour=red\n"), doctest::Contains("colour"), ConfigError);
    CHECK_THROWS_WITH_AS(parse_config("epochs\n"), doctest::Contains("line 1"), ConfigError);
    CHECK_THROWS_AS(parse_config("optimizer=lion\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("epochs=-3\n"), ConfigError);

    RunConfig c;
    c.img_size = 100;
    CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("img_size"), ConfigError);
    c = RunConfig{};
    c.batch_size = 0;
    CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("batch_size"), ConfigError);
    c = RunConfig{};
    c.momentum = 1.0;
    CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("momentum"), ConfigError);
    c = RunConfig{};
    c.positive_class = 2;
    CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("positive_class"), ConfigError);
}
