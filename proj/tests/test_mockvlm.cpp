#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "gvl/client.hpp"
#include "gvl/errors.hpp"
#include "gvl/ingest.hpp"
#include "gvl/metrics.hpp"
#include "gvl/mockvlm.hpp"
#include "gvl/parser.hpp"
#include "gvl/promptgen.hpp"
#include "gvl/rng.hpp"
#include "gvl/sampler.hpp"
#include "test_support.hpp"

using gvl::OracleMode;
using gvl::OracleSpec;

namespace {

// A ready-to-score task over a fixture dataset: episode 0 evaluated with
// episodes 1 and 2 as context, 8 frames each.
struct TaskFixture {
    gvltest::TempDir tmp;
    gvl::EvalTask task;

    TaskFixture() {
        gvl::write_fixture_dataset(tmp.path(), "mockset", 3, 20, 11);
        const gvl::DatasetHandle handle = gvl::open_dataset(tmp.path());
        const gvl::EpisodeRecord eval = gvl::load_episode(handle, 0);

        task.instruction = eval.instruction;
        task.shots = 2;
        task.starting_frame = eval.frames.front();
        for (std::int64_t ctx_index : {1, 2}) {
            const gvl::EpisodeRecord donor = gvl::load_episode(handle, ctx_index);
            task.context_episodes.push_back(
                gvl::shuffle(gvl::sample_frames(donor, 8, 100 + ctx_index), 200 + ctx_index));
        }
        task.eval_selection = gvl::shuffle(gvl::sample_frames(eval, 8, 300), 400);
    }
};

// Parses the oracle text and restores predictions to temporal order.
std::vector<double> score_text(const gvl::EvalTask& task, const std::string& text) {
    const gvl::PromptSequence prompt = gvl::build_prompt(task);
    const gvl::PredictionSet parsed = gvl::parse_predictions(
        text, prompt.first_eval_frame_number(),
        static_cast<int>(task.eval_selection.frames.size()));
    REQUIRE(parsed.status == gvl::ParseStatus::ok);
    return gvl::unshuffle(gvl::values_in_presentation_order(parsed), task.eval_selection.permutation);
}

} // namespace

TEST_CASE("label block round trips through pixels and png bytes") {
    for (double progress : {0.0, 0.1, 33.7, 62.5, 99.9, 100.0}) {
        cv::Mat img(64, 64, CV_8UC3, cv::Scalar(10, 20, 30));
        gvl::encode_label_block(img, progress);
        const auto direct = gvl::decode_label_block(img);
        REQUIRE(direct.has_value());
        CHECK(*direct == progress);

        std::vector<unsigned char> png;
        REQUIRE(cv::imencode(".png", img, png));
        const auto decoded = gvl::decode_label_block(cv::imdecode(png, cv::IMREAD_COLOR));
        REQUIRE(decoded.has_value());
        CHECK(*decoded == progress); // png is lossless; the label survives
    }
}

TEST_CASE("label block rejects unlabeled or unusable images") {
    cv::Mat plain(64, 64, CV_8UC3, cv::Scalar(10, 20, 30));
    CHECK_FALSE(gvl::decode_label_block(plain).has_value());

    cv::Mat tiny(8, 8, CV_8UC3, cv::Scalar(0, 0, 0));
    CHECK_FALSE(gvl::decode_label_block(tiny).has_value());
    CHECK_THROWS_AS(gvl::encode_label_block(tiny, 50.0), gvl::DomainError);

    cv::Mat gray(64, 64, CV_8UC1, cv::Scalar(0));
    CHECK_FALSE(gvl::decode_label_block(gray).has_value());
}

TEST_CASE("fixture dataset loads through the normal ingest path") {
    gvltest::TempDir tmp;
    gvl::write_fixture_dataset(tmp.path(), "fix", 3, 5, 42);

    const gvl::DatasetHandle handle = gvl::open_dataset(tmp.path());
    CHECK(handle.dataset_id == "fix");
    CHECK(handle.episode_indices == std::vector<std::int64_t>{0, 1, 2});

    const gvl::EpisodeRecord ep = gvl::load_episode(handle, 1);
    CHECK(ep.instruction == "open the door");
    REQUIRE(ep.length() == 5);
    for (int t = 0; t < 5; ++t) {
        const gvl::FrameRef& f = ep.frames[static_cast<std::size_t>(t)];
        CHECK(f.width == 64);
        CHECK(f.height == 64);
        const auto label =
            gvl::decode_label_block(cv::imread(f.image_path.string(), cv::IMREAD_COLOR));
        REQUIRE(label.has_value());
        CHECK(*label == doctest::Approx(100.0 * t / 4.0).epsilon(1e-9));
    }

    CHECK_THROWS_AS(gvl::write_fixture_dataset(tmp.path() / "bad", "x", 0, 5, 1),
                    gvl::DomainError);
    CHECK_THROWS_AS(gvl::write_fixture_dataset(tmp.path() / "bad", "x", 1, 1, 1),
                    gvl::DomainError);
}

TEST_CASE("fixture generation is seed-deterministic") {
    gvltest::TempDir a;
    gvltest::TempDir b;
    gvl::write_fixture_dataset(a.path(), "same", 2, 4, 9);
    gvl::write_fixture_dataset(b.path(), "same", 2, 4, 9);
    const auto frame = std::filesystem::path("episodes") / "1" / "frames" / "000002.png";
    CHECK(gvltest::read_file(a.path() / frame) == gvltest::read_file(b.path() / frame));

    gvltest::TempDir c;
    gvl::write_fixture_dataset(c.path(), "same", 2, 4, 10);
    CHECK(gvltest::read_file(a.path() / frame) != gvltest::read_file(c.path() / frame));
}

TEST_CASE("oracle modes produce the expected score signatures") {
    TaskFixture fx;

    SUBCASE("perfect recovers exactly monotone progress") {
        const auto temporal =
            score_text(fx.task, gvl::oracle_predict(fx.task, OracleSpec{OracleMode::perfect}));
        const gvl::Correlation c = gvl::voc(temporal, gvl::Method::spearman);
        CHECK(c.value == 1.0);
        CHECK_FALSE(c.degenerate);
    }

    SUBCASE("reversed inverts the ordering completely") {
        const auto temporal =
            score_text(fx.task, gvl::oracle_predict(fx.task, OracleSpec{OracleMode::reversed}));
        CHECK(gvl::voc(temporal, gvl::Method::spearman).value == -1.0);
        CHECK(gvl::voc(temporal, gvl::Method::kendall).value == -1.0);
    }

    SUBCASE("constant answers are degenerate, scored zero") {
        const auto temporal =
            score_text(fx.task, gvl::oracle_predict(fx.task, OracleSpec{OracleMode::constant}));
        const gvl::Correlation c = gvl::voc(temporal, gvl::Method::spearman);
        CHECK(c.degenerate);
        CHECK(c.value == 0.0);
    }

    SUBCASE("mismatching drops one frame") {
        const std::string text =
            gvl::oracle_predict(fx.task, OracleSpec{OracleMode::mismatching});
        const gvl::PredictionSet parsed = gvl::parse_predictions(
            text, gvl::build_prompt(fx.task).first_eval_frame_number(), 8);
        CHECK(parsed.status == gvl::ParseStatus::mismatch);
    }

    SUBCASE("empty answers nothing") {
        CHECK(gvl::oracle_predict(fx.task, OracleSpec{OracleMode::empty}).empty());
    }
}

TEST_CASE("noisy oracle is deterministic, bounded, and zero-sigma exact") {
    TaskFixture fx;

    OracleSpec zero{OracleMode::noisy, 0.0, 5};
    CHECK(gvl::oracle_predict(fx.task, zero) ==
          gvl::oracle_predict(fx.task, OracleSpec{OracleMode::perfect, 0.0, 5}));

    OracleSpec noisy{OracleMode::noisy, 15.0, 5};
    const std::string a = gvl::oracle_predict(fx.task, noisy);
    CHECK(a == gvl::oracle_predict(fx.task, noisy));

    OracleSpec other{OracleMode::noisy, 15.0, 6};
    CHECK(a != gvl::oracle_predict(fx.task, other)); // seed matters

    const auto temporal = score_text(fx.task, a);
    for (double v : temporal) {
        CHECK(v >= 0.0);
        CHECK(v <= 100.0);
    }
}

TEST_CASE("oracle answer lines follow the requested response format") {
    TaskFixture fx;
    const std::string text = gvl::oracle_predict(fx.task, OracleSpec{OracleMode::perfect});
    const int first = gvl::build_prompt(fx.task).first_eval_frame_number();
    CHECK(first == 17); // 2 context episodes x 8 frames + 1
    CHECK(text.rfind("Frame " + std::to_string(first) + ": Description:", 0) == 0);
    CHECK(text.find("Task Completion Percentages: ") != std::string::npos);
}

TEST_CASE("the mock server answers a real prompt end to end") {
    TaskFixture fx;
    gvl::MockServer server{OracleSpec{OracleMode::perfect}};

    gvl::EndpointConfig cfg;
    cfg.base_url = server.base_url();
    cfg.model_name = "mock-vlm";
    cfg.request_timeout = 30.0;

    const gvl::PromptSequence prompt = gvl::build_prompt(fx.task);
    const gvl::RawCompletion got = gvl::Client{cfg}.complete(prompt);
    CHECK(got.request_id.rfind("mock-", 0) == 0);

    const gvl::PredictionSet parsed =
        gvl::parse_predictions(got.text, prompt.first_eval_frame_number(), 8);
    REQUIRE(parsed.status == gvl::ParseStatus::ok);
    const auto temporal = gvl::unshuffle(gvl::values_in_presentation_order(parsed),
                                         fx.task.eval_selection.permutation);
    CHECK(gvl::voc(temporal, gvl::Method::spearman).value == 1.0);

    // the recovered labels are the true ones (to label precision, 0.1%),
    // not merely co-monotone
    const gvl::EpisodeRecord eval = gvl::load_episode(gvl::open_dataset(fx.tmp.path()), 0);
    std::vector<double> expected;
    for (const auto& lf : gvl::sample_frames(eval, 8, 300))
        expected.push_back(static_cast<double>(std::lround(lf.true_progress * 10.0)) / 10.0);
    REQUIRE(temporal.size() == expected.size());
    for (std::size_t i = 0; i < temporal.size(); ++i)
        CHECK(temporal[i] == doctest::Approx(expected[i]).epsilon(1e-9));
}

TEST_CASE("requests without labeled eval frames get a 400") {
    gvl::MockServer server{OracleSpec{OracleMode::perfect}};
    gvl::EndpointConfig cfg;
    cfg.base_url = server.base_url();
    cfg.model_name = "mock-vlm";

    gvl::PromptSequence prompt;
    gvl::PromptPart part;
    part.kind = gvl::PromptPart::Kind::text;
    part.text = "no images at all";
    prompt.parts.push_back(part);

    CHECK_THROWS_AS(gvl::Client{cfg}.complete(prompt), gvl::PermanentError);
}

TEST_CASE("two servers can run at once on distinct ports") {
    gvl::MockServer a{OracleSpec{}};
    gvl::MockServer b{OracleSpec{}};
    CHECK(a.port() != b.port());
    CHECK_THROWS_AS(gvl::MockServer(OracleSpec{}, a.port()), gvl::BindError);
}

TEST_CASE("oracle mode names round trip") {
    for (OracleMode m : {OracleMode::perfect, OracleMode::noisy, OracleMode::constant,
                         OracleMode::reversed, OracleMode::mismatching, OracleMode::empty})
        CHECK(gvl::oracle_mode_from_string(gvl::to_string(m)) == m);
    CHECK_THROWS_AS(gvl::oracle_mode_from_string("chaotic"), gvl::DomainError);
}
