#include "doctest.h"

#include <cstring>
#include <filesystem>

#include "core/errors.hpp"
#include "core/formats.hpp"
#include "core/rng.hpp"
#include "core/settings.hpp"
#include "core/workflow.hpp"
#include "oracles.hpp"

using namespace subpeak;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name)
{
    const auto dir = fs::temp_directory_path() / ("subpeak_test_formats_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("SPSF layout and round trip")
{
    Grid2D g(1, 2, std::vector<float>{1.0f, -2.5f});
    const auto bytes = encode_spsf(FeatureMap({g}));
    REQUIRE(bytes.size() == 4 + 12 + 8);
    CHECK(std::memcmp(bytes.data(), "SPSF", 4) == 0);
    CHECK(bytes[4] == 1);
    CHECK(bytes[8] == 1);
    CHECK(bytes[12] == 2);
    CHECK(bytes[16 + 3] == 0x3f);  // 1.0f little-endian
    CHECK(bytes[16 + 2] == 0x80);

    Rng rng(1);
    const auto x = oracle::random_features(rng, 3, 5, 7);
    const auto enc = encode_spsf(x);
    CHECK(decode_spsf(enc) == x);
    CHECK(encode_spsf(decode_spsf(enc)) == enc);

    const auto dir = scratch_dir("spsf");
    write_spsf(dir / "x.spsf", x);
    CHECK(read_spsf(dir / "x.spsf") == x);
    write_spsf(dir / "g.spsf", g);
    CHECK(read_spsf_grid(dir / "g.spsf") == g);
    CHECK_THROWS_AS(read_spsf_grid(dir / "x.spsf"), IoError);
    CHECK_THROWS_AS(read_spsf(dir / "missing.spsf"), IoError);

    auto bad = enc;
    bad[0] = 'X';
    CHECK_THROWS_AS(decode_spsf(bad), IoError);
    auto short_ = enc;
    short_.pop_back();
    CHECK_THROWS_AS(decode_spsf(short_), IoError);
}

TEST_CASE("weights round trip")
{
    auto w = ClassifierWeights::random(4, 3, 3, 5, 12);
    w.lambda1 = 0.5;
    const auto enc = encode_weights(w);
    CHECK(std::memcmp(enc.data(), "SPSW", 4) == 0);
    const auto back = decode_weights(enc, w);
    CHECK(back.w1 == w.w1);
    CHECK(back.w2 == w.w2);
    CHECK(back.lambda1 == 0.5);
    CHECK(encode_weights(back) == enc);

    const auto dir = scratch_dir("spsw");
    write_weights(dir / "w.spsw", w);
    CHECK(read_weights(dir / "w.spsw").flatten() == w.flatten());
    auto cut = enc;
    cut.resize(cut.size() - 8);
    CHECK_THROWS_AS(decode_weights(cut), IoError);
}

TEST_CASE("PGM export")
{
    Grid2D g(2, 2, std::vector<float>{0, 1, 2, 3});
    const auto pgm = encode_pgm(g);
    const std::string header = "P5\n2 2\n255\n";
    REQUIRE(pgm.size() == header.size() + 4);
    CHECK(std::string(pgm.begin(), pgm.begin() + static_cast<long>(header.size())) == header);
    CHECK(pgm[header.size() + 0] == 0);
    CHECK(pgm[header.size() + 1] == 85);
    CHECK(pgm[header.size() + 2] == 170);
    CHECK(pgm[header.size() + 3] == 255);

    const auto flat = encode_pgm(Grid2D(3, 2, 4.0f));
    for (std::size_t i = flat.size() - 6; i < flat.size(); ++i) {
        CHECK(flat[i] == 0);
    }
}

TEST_CASE("grid CSV round trip")
{
    Rng rng(2);
    const auto g = oracle::random_grid(rng, 4, 6, -1e3, 1e3);
    CHECK(decode_grid_csv(encode_grid_csv(g)) == g);
    const auto dir = scratch_dir("csv");
    export_heatmap(g, dir / "h.pgm", dir / "h.csv");
    CHECK(decode_grid_csv(read_text(dir / "h.csv")) == g);
    CHECK(read_file(dir / "h.pgm") == encode_pgm(g));
    CHECK_THROWS_AS(decode_grid_csv("1,2\n3\n"), IoError);
    CHECK_THROWS_AS(export_heatmap(g, dir / "no" / "such" / "dir" / "h.pgm"), IoError);
}

TEST_CASE("box CSV round trip")
{
    const std::vector<Box> boxes{{1.5, 2.25, 8, 9}, {0.1, 1e-7, 3, 4}};
    CHECK(decode_boxes_csv(encode_boxes_csv(boxes)) == boxes);
}

TEST_CASE("key-value configs")
{
    const auto kv = KeyValueConfig::parse("# c\nframes = 5\n[tracker]\nprp = off # inline\nbrt_ratio=0.25\n", "scene");
    CHECK(kv.section("scene").at("frames") == "5");
    const auto t = tracker_from_config(kv);
    CHECK_FALSE(t.prp_on);
    CHECK(t.brt_ratio == 0.25);
    CHECK(scene_from_config(kv).frames == 5);

    CHECK_THROWS_AS(tracker_from_config(KeyValueConfig::parse("[tracker]\nbogus = 1\n")), ConfigError);
    CHECK_THROWS_AS(tracker_from_config(KeyValueConfig::parse("[tracker]\nbrt_ratio = abc\n")), ConfigError);
    CHECK_THROWS_AS(tracker_from_config(KeyValueConfig::parse("[tracker]\nbrt_ratio = 2\n")), ConfigError);
    CHECK_THROWS_AS(KeyValueConfig::parse("[tracker\n"), ConfigError);
    CHECK_THROWS_AS(KeyValueConfig::parse("just words\n"), ConfigError);
    CHECK_THROWS_AS(KeyValueConfig::parse("a = 1\na = 2\n"), ConfigError);
    CHECK_THROWS_AS(load_scene_config("/nonexistent/scene.cfg"), IoError);
}

TEST_CASE("config text round trips")
{
    SceneConfig s;
    s.motion = MotionModel::sinusoidal;
    s.occlusion = Occlusion{3, 4, 0.5};
    s.noise_sigma = 0.123456789;
    s.scales.scales = {{"a", 1}, {"b", 3}};
    CHECK(scene_from_config(KeyValueConfig::parse(to_config_text(s))) == s);

    TrackerConfig t;
    t.prp_on = false;
    t.brt_domain = BrtDomain::both;
    t.fusion_betas = {0.25, 0.75};
    t.init_optimizer.max_outer_iters = 17;
    const auto back = tracker_from_config(KeyValueConfig::parse(to_config_text(t)));
    CHECK(to_config_text(back) == to_config_text(t));
}
