#include "test_support.hpp"

using namespace thermo;

namespace {

SceneSpec three_faces() {
    SceneSpec s;
    s.faces = {{30, 40, 10, 12, 36.4}, {80, 60, 10, 12, 37.9}, {130, 80, 10, 12, 35.8}};
    return s;
}

}  // namespace

TEST(Scene, SparseFacesHaveExactPeaksAndLabels) {
    const auto spec = three_faces();
    const auto scene = generate(spec);
    ASSERT_EQ(scene.labels.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) {
        const auto& f = spec.faces[i];
        EXPECT_EQ(scene.frame.at(f.cx, f.cy), scene.peaks[i]);
        EXPECT_EQ(scene.peaks[i], round_half_up((f.temperature_c - 20.0) / 0.1));
        EXPECT_EQ(extract_max_pixel(scene.frame, scene.boxes[i]), scene.peaks[i]);
        EXPECT_EQ(denormalize(scene.labels[i].bbox, 160, 120), scene.boxes[i]);
        EXPECT_NEAR(spec.law.temperature(scene.peaks[i]), f.temperature_c, 0.05 + 1e-9);
    }
    // Background stays inside the noise band.
    for (int x = 0; x < 160; ++x) {
        EXPECT_GE(scene.frame.at(x, 0), 35);
        EXPECT_LE(scene.frame.at(x, 0), 45);
    }
}

TEST(Scene, DenseLayoutDoesNotOverlap) {
    SequenceSpec seq;
    seq.frames = 10;
    seq.layout = LayoutParams{15, 35.5, 37.8, 2};
    for (int i = 0; i < seq.frames; ++i) {
        const auto scene = generate(frame_spec(seq, i));
        ASSERT_EQ(scene.labels.size(), 15u);
        for (std::size_t a = 0; a < scene.boxes.size(); ++a) {
            for (std::size_t b = a + 1; b < scene.boxes.size(); ++b) EXPECT_EQ(iou(scene.boxes[a], scene.boxes[b]), 0.0);
        }
        for (double t : scene.temperatures) {
            EXPECT_GE(t, 35.5);
            EXPECT_LE(t, 37.8);
        }
    }
}

TEST(Scene, BlobDetectorFindsEveryFace) {
    SequenceSpec seq;
    seq.frames = 5;
    seq.layout = LayoutParams{12, 35.5, 37.8, 2};
    DetectorConfig cfg;
    cfg.blob.intensity_threshold = 60;
    BlobDetector det(cfg);
    for (int i = 0; i < seq.frames; ++i) {
        const auto scene = generate(frame_spec(seq, i));
        const auto dets = det.detect(scene.frame);
        EXPECT_EQ(dets.size(), scene.boxes.size());
        for (const auto& gt : scene.boxes) {
            double best = 0;
            for (const auto& d : dets) best = std::max(best, iou(d.bbox, gt));
            EXPECT_GE(best, 0.5);
        }
    }
}

TEST(Scene, Deterministic) {
    SequenceSpec seq;
    seq.layout = LayoutParams{};
    EXPECT_EQ(generate(frame_spec(seq, 3)).frame, generate(frame_spec(seq, 3)).frame);
    EXPECT_FALSE(generate(frame_spec(seq, 3)).frame == generate(frame_spec(seq, 4)).frame);
    auto other = seq;
    other.base.seed = 99;
    EXPECT_FALSE(generate(frame_spec(seq, 0)).frame == generate(frame_spec(other, 0)).frame);
}

TEST(Scene, Rejections) {
    auto s = three_faces();
    s.faces[0].cx = 2;
    EXPECT_THROW(generate(s), Error);
    s = three_faces();
    s.faces[0].temperature_c = 60;  // beyond 255
    EXPECT_THROW(generate(s), Error);
    s = three_faces();
    s.faces[0].temperature_c = 22;  // below the background band
    EXPECT_THROW(generate(s), Error);
    Rng rng(1);
    EXPECT_THROW(grid_layout(40, 30, LayoutParams{40, 35, 37, 2}, rng), Error);
}

TEST(SpecText, ParsesSectionsAndRejectsMixing) {
    const auto seq = parse_sequence_spec(
        "[scene]\nwidth=160\nheight=120\nframes=4\nseed=9\n"
        "[face]\ncx=40\ncy=50\nax=8\nay=10\ntemperature=36.9\n"
        "[face]\ncx=110\ncy=60\ntemperature=37.2\n");
    EXPECT_EQ(seq.frames, 4);
    EXPECT_EQ(seq.base.seed, 9u);
    ASSERT_EQ(seq.base.faces.size(), 2u);
    EXPECT_EQ(seq.base.faces[1].temperature_c, 37.2);
    EXPECT_FALSE(seq.layout.has_value());

    const auto grid = parse_sequence_spec("[layout]\nfaces=13\n");
    ASSERT_TRUE(grid.layout.has_value());
    EXPECT_EQ(grid.layout->faces, 13);

    EXPECT_THROW(parse_sequence_spec("[layout]\nfaces=2\n[face]\ncx=40\ncy=50\n"), Error);
    EXPECT_THROW(parse_sequence_spec("[scene]\nframes=0\n"), Error);
    EXPECT_THROW(parse_sequence_spec("[scene]\nwidth=abc\n"), Error);
    EXPECT_THROW(parse_sequence_spec("[face]\ncx=1\ncy=1\n"), Error);
}

TEST(CalibrationSet, FollowsLaw) {
    const CalibrationLaw law{20, 0.1};
    const auto s = generate_calibration_set(2000, law, 5, 1.0);
    ASSERT_EQ(s.size(), 2000u);
    double sum = 0;
    for (const auto& x : s) {
        EXPECT_GE(x.temperature_c, 25.8);
        EXPECT_LE(x.temperature_c, 38.8);
        sum += x.max_pixel - law.pixel_for(x.temperature_c);
    }
    EXPECT_NEAR(sum / 2000, 0.0, 0.1);
    EXPECT_EQ(generate_calibration_set(50, law, 5), generate_calibration_set(50, law, 5));
    EXPECT_THROW(generate_calibration_set(5, law, 5), Error);
}
