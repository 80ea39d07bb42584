#include <random>

#include "oracles.hpp"
#include "test_support.hpp"

using namespace thermo;

namespace {

std::vector<Detection> random_dets(std::mt19937_64& rng, int n, bool distinct_conf) {
    std::uniform_int_distribution<int> c(0, 40), s(2, 20);
    std::uniform_real_distribution<double> conf(0, 1);
    std::uniform_int_distribution<int> coarse(1, 4);
    std::vector<Detection> dets;
    for (int i = 0; i < n; ++i) {
        const int x = c(rng), y = c(rng);
        dets.push_back({{x, y, x + s(rng), y + s(rng)}, distinct_conf ? conf(rng) : coarse(rng) / 4.0, 0});
    }
    sort_by_confidence(dets);
    return dets;
}

std::vector<PixelBBox> random_gts(std::mt19937_64& rng, int n) {
    std::uniform_int_distribution<int> c(0, 40), s(2, 20);
    std::vector<PixelBBox> gts;
    for (int i = 0; i < n; ++i) {
        const int x = c(rng), y = c(rng);
        gts.push_back({x, y, x + s(rng), y + s(rng)});
    }
    return gts;
}

MatchResult flags(std::vector<bool> f, std::size_t num_gt) { return {std::move(f), num_gt}; }

std::vector<double> descending(std::size_t n) {
    std::vector<double> c;
    for (std::size_t i = 0; i < n; ++i) c.push_back(1.0 - 0.01 * static_cast<double>(i));
    return c;
}

}  // namespace

TEST(Iou, Examples) {
    EXPECT_EQ(iou({0, 0, 10, 10}, {0, 0, 10, 10}), 1.0);
    EXPECT_EQ(iou({0, 0, 10, 10}, {20, 20, 30, 30}), 0.0);
    EXPECT_DOUBLE_EQ(iou({0, 0, 10, 10}, {5, 0, 15, 10}), 50.0 / 150.0);
    EXPECT_EQ(iou({0, 0, 10, 10}, {10, 0, 20, 10}), 0.0);  // touching edges
}

TEST(Iou, MatchesCellCount) {
    std::mt19937_64 rng(1);
    const auto boxes = random_gts(rng, 300);
    for (std::size_t i = 0; i + 1 < boxes.size(); ++i) {
        EXPECT_EQ(iou(boxes[i], boxes[i + 1]), oracle::box_iou(boxes[i], boxes[i + 1]));
    }
}

TEST(Matching, Examples) {
    // IoU 0.6: 60 shared cells out of 100 union
    const auto m1 = match_greedy({{{0, 0, 10, 6}, 0.9, 0}}, {{0, 0, 10, 10}}, 0.5);
    EXPECT_EQ(m1.tp_flags, std::vector<bool>{true});

    const auto m2 = match_greedy({{{0, 0, 10, 10}, 0.9, 0}, {{0, 0, 10, 9}, 0.8, 0}}, {{0, 0, 10, 10}}, 0.5);
    EXPECT_EQ(m2.tp_flags, (std::vector<bool>{true, false}));
    EXPECT_EQ(m2.num_gt, 1u);
}

TEST(Matching, RejectsUnsortedInput) {
    EXPECT_THROW(match_greedy({{{0, 0, 1, 1}, 0.1, 0}, {{0, 0, 1, 1}, 0.9, 0}}, {}, 0.5), Error);
}

TEST(Matching, PrefersHighestIouThenLowestIndex) {
    const std::vector<PixelBBox> gts{{0, 0, 10, 10}, {0, 0, 10, 10}, {1, 0, 11, 10}};
    const auto m = match_greedy({{{1, 0, 11, 10}, 0.9, 0}, {{0, 0, 10, 10}, 0.8, 0}, {{0, 0, 10, 10}, 0.7, 0}}, gts, 0.5);
    EXPECT_EQ(m.tp_flags, (std::vector<bool>{true, true, true}));
}

TEST(Matching, MatchesOracle) {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 1000; ++trial) {
        const auto dets = random_dets(rng, 10, trial % 2 == 0);
        const auto gts = random_gts(rng, 5);
        const double thr = std::uniform_real_distribution<double>(0.05, 1.0)(rng);
        ASSERT_EQ(match_greedy(dets, gts, thr).tp_flags, oracle::greedy_flags(dets, gts, thr));
    }
}

TEST(AveragePrecision, HandCases) {
    EXPECT_EQ(average_precision(flags({true}, 1), {0.9}), 1.0);
    EXPECT_EQ(average_precision(flags({true, false}, 1), {0.9, 0.8}), 1.0);
    EXPECT_EQ(average_precision(flags({false, true}, 1), {0.9, 0.8}), 0.5);
    EXPECT_EQ(average_precision(flags({}, 0), {}), 1.0);
    EXPECT_EQ(average_precision(flags({false}, 0), {0.5}), 0.0);
    EXPECT_EQ(average_precision(flags({}, 3), {}), 0.0);
}

TEST(AveragePrecision, EnvelopeExample) {
    // P/R points: (1, 1/3) (1/2, 1/3) (2/3, 2/3) (1/2, 2/3) (3/5, 1)
    // envelope: 1 for the first third, 2/3 for the second, 3/5 for the last.
    const double ap = average_precision(flags({true, false, true, false, true}, 3), descending(5));
    EXPECT_NEAR(ap, (1.0 + 2.0 / 3.0 + 0.6) / 3.0, 1e-15);
}

TEST(AveragePrecision, MatchesEnumeration) {
    std::mt19937_64 rng(3);
    std::bernoulli_distribution coin(0.5);
    for (int trial = 0; trial < 2000; ++trial) {
        const std::size_t n = std::uniform_int_distribution<std::size_t>(0, 12)(rng);
        std::vector<bool> f;
        for (std::size_t i = 0; i < n; ++i) f.push_back(coin(rng));
        const auto tp = static_cast<std::size_t>(std::count(f.begin(), f.end(), true));
        const auto num_gt = tp + std::uniform_int_distribution<std::size_t>(0, 3)(rng);
        ASSERT_NEAR(average_precision(flags(f, num_gt), descending(n)), oracle::enumerated_ap(f, num_gt), 1e-12);
    }
}

TEST(AveragePrecision, Misaligned) {
    EXPECT_THROW(average_precision(flags({true}, 1), {}), Error);
    EXPECT_THROW(average_precision(flags({true, true}, 2), {0.1, 0.9}), Error);
}

TEST(Map, PerfectDetector) {
    const std::vector<std::vector<PixelBBox>> gts{{{0, 0, 10, 10}, {20, 20, 30, 35}}, {{5, 5, 9, 9}}};
    std::vector<std::vector<Detection>> dets;
    for (const auto& g : gts) {
        auto& d = dets.emplace_back();
        for (const auto& b : g) d.push_back({b, 1.0, 0});
    }
    const auto r = map_over_thresholds(dets, gts);
    EXPECT_EQ(r.precision, 1.0);
    EXPECT_EQ(r.recall, 1.0);
    EXPECT_EQ(r.map_50, 1.0);
    EXPECT_EQ(r.map_50_95, 1.0);
    EXPECT_EQ(r.per_threshold.size(), 10u);
}

TEST(Map, NoDetections) {
    const auto r = map_over_thresholds({{}, {}}, {{{0, 0, 10, 10}}, {}});
    EXPECT_EQ(r.precision, 0.0);
    EXPECT_EQ(r.recall, 0.0);
    EXPECT_EQ(r.map_50, 0.0);
    EXPECT_EQ(r.map_50_95, 0.0);
}

TEST(Map, ThresholdValidation) {
    EXPECT_THROW(map_over_thresholds({{}}, {{}}, {0.0}), Error);
    EXPECT_THROW(map_over_thresholds({{}}, {{}}, {1.2}), Error);
    EXPECT_THROW(map_over_thresholds({{}}, {}, {0.5}), Error);
}

TEST(Map, ConfidenceThresholdDropsDetections) {
    const std::vector<std::vector<PixelBBox>> gts{{{0, 0, 10, 10}}};
    const std::vector<std::vector<Detection>> dets{{{{0, 0, 10, 10}, 0.9, 0}, {{50, 50, 60, 60}, 0.1, 0}}};
    EXPECT_EQ(map_over_thresholds(dets, gts, {0.5}, 0.0).precision, 0.5);
    EXPECT_EQ(map_over_thresholds(dets, gts, {0.5}, 0.25).precision, 1.0);
}

TEST(Map, MatchesPooledOracle) {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 300; ++trial) {
        const int images = std::uniform_int_distribution<int>(1, 4)(rng);
        std::vector<std::vector<Detection>> dets;
        std::vector<std::vector<PixelBBox>> gts;
        for (int i = 0; i < images; ++i) {
            dets.push_back(random_dets(rng, std::uniform_int_distribution<int>(0, 10)(rng), trial % 3 != 0));
            gts.push_back(random_gts(rng, std::uniform_int_distribution<int>(0, 6)(rng)));
        }
        const auto r = map_over_thresholds(dets, gts);
        ASSERT_NEAR(r.map_50, oracle::pooled_ap(dets, gts, 0.5), 1e-9);
        ASSERT_NEAR(r.map_50_95, oracle::mean_ap(dets, gts), 1e-9);
        const auto single = map_over_thresholds(dets, gts, {0.5});
        ASSERT_EQ(single.map_50_95, single.map_50);
    }
}

TEST(Report, CsvAndText) {
    DetectionEvalReport r;
    r.precision = 0.5;
    r.recall = 0.25;
    r.map_50 = 0.75;
    r.map_50_95 = 0.125;
    EXPECT_EQ(report_csv_header(), "dataset,precision,recall,map50,map5095");
    EXPECT_EQ(report_csv_row("C1", r), "C1,0.500000,0.250000,0.750000,0.125000");
    const auto text = report_text("C1", r);
    EXPECT_NE(text.find("map50=0.750000\n"), std::string::npos);
    EXPECT_NE(text.find("dataset=C1\n"), std::string::npos);
}

TEST(Report, ReplayOverSyntheticFramesIsPerfect) {
    SequenceSpec seq;
    seq.frames = 20;
    seq.layout = LayoutParams{13, 35.5, 37.8, 2};
    ReplayDetector replay;
    std::vector<std::vector<Detection>> dets;
    std::vector<std::vector<PixelBBox>> gts;
    for (int i = 0; i < seq.frames; ++i) {
        auto scene = generate(frame_spec(seq, i));
        scene.frame.source_id = std::to_string(i);
        replay.add(scene.frame.source_id, scene.labels);
        dets.push_back(replay.detect(scene.frame));
        auto& g = gts.emplace_back();
        for (const auto& l : scene.labels) g.push_back(denormalize(l.bbox, scene.frame.width(), scene.frame.height()));
    }
    const auto r = map_over_thresholds(dets, gts);
    EXPECT_EQ(r.map_50, 1.0);
    EXPECT_EQ(r.map_50_95, 1.0);
    EXPECT_EQ(r.precision, 1.0);
    EXPECT_EQ(r.recall, 1.0);
}
