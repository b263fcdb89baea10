#include "doctest.h"

#include <random>
#include <sstream>

#include "flexitac/contact_sim.hpp"
#include "flexitac/errors.hpp"
#include "flexitac/fusion3d.hpp"

using namespace flexitac;

namespace {

std::vector<FusedPoint> random_cloud(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-0.5, 0.5), f(0.0, 1.0);
    std::vector<FusedPoint> out(n);
    for (auto& p : out) p = {Vec3(u(rng), u(rng), u(rng)), f(rng), Modality::vision};
    return out;
}

RigidTransform random_pose(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    return RigidTransform::from_quaternion(u(rng), u(rng), u(rng), u(rng) + 1e-3,
                                           Vec3(u(rng), u(rng), u(rng)));
}

}  // namespace

TEST_CASE("lift at the noise floor") {
    const auto g = GridConfig::preset("12x32");
    const PadGeometry pad{g, RigidTransform::identity()};
    const NormalizationRule rule{50, 1023};
    const auto frame = make_uniform_frame(g, 50);

    const auto all = lift_tactile(frame, pad, rule, 0.0);
    REQUIRE(all.size() == 384);
    for (const auto& p : all) {
        CHECK(p.magnitude == 0.0);
        CHECK(p.modality == Modality::tactile);
    }
    CHECK(lift_tactile(frame, pad, rule, 0.01).empty());

    const PadGeometry wrong{GridConfig::preset("8x16"), RigidTransform::identity()};
    CHECK_THROWS_AS(lift_tactile(frame, wrong, rule), ContractViolation);
}

TEST_CASE("lifted points follow the simulated contact patch") {
    const auto g = GridConfig::preset("12x32");
    const PadGeometry pad{g, RigidTransform::about_z(0.2, Vec3(0.1, 0.0, 0.3))};
    ContactParams params;
    params.k_n = 500;
    params.k_d = 0;
    params.noise_floor_counts = 50;
    // Sphere pressed into the pad from its normal side, in world coordinates.
    const Vec3 center = pad.pose.apply(Vec3(0.004, 0.002, 0.0195));
    const auto res = step(SdfScene{{SdfShape::sphere(center, 0.02)}}, pad, params, 0.001);
    const auto frame = samples_to_frame(res.samples, params, g, 0, 0);

    const NormalizationRule rule{50, 1023};
    const auto pts = lift_tactile(frame, pad, rule, 1e-12);
    const auto world = taxel_world_positions(pad);
    std::vector<Vec3> expected;
    for (std::size_t i = 0; i < res.samples.size(); ++i)
        if (frame.values[i] > 50) expected.push_back(world[i]);
    REQUIRE(pts.size() == expected.size());
    CHECK(!pts.empty());
    for (std::size_t i = 0; i < pts.size(); ++i) CHECK(pts[i].position == expected[i]);

    // Every lifted taxel had positive simulated force.
    std::size_t positive = 0;
    for (const auto& s : res.samples)
        if (s.force_n * params.counts_per_newton >= 0.5) ++positive;
    CHECK(positive == pts.size());
}

TEST_CASE("magnitudes equal the normalized readings") {
    const auto g = GridConfig::preset("8x16");
    std::mt19937_64 rng(4);
    std::uniform_int_distribution<int> v(0, 1023);
    auto frame = make_uniform_frame(g, 0);
    for (auto& x : frame.values) x = static_cast<std::uint16_t>(v(rng));
    const NormalizationRule rule{40, 1000};
    const auto expect = normalize_frame(frame, rule);
    const auto pts = lift_tactile(frame, {g, RigidTransform::identity()}, rule);
    REQUIRE(pts.size() == expect.size());
    for (std::size_t i = 0; i < pts.size(); ++i) CHECK(pts[i].magnitude == expect[i]);
}

TEST_CASE("rigid equivariance of lifting") {
    const auto g = GridConfig::preset("16x16");
    auto frame = make_uniform_frame(g, 300);
    const NormalizationRule rule{50, 1023};
    const auto base = lift_tactile(frame, {g, RigidTransform::identity()}, rule);
    std::mt19937_64 rng(31);
    for (int t = 0; t < 20; ++t) {
        const auto pose = random_pose(rng);
        const auto moved = lift_tactile(frame, {g, pose}, rule);
        REQUIRE(moved.size() == base.size());
        for (std::size_t i = 0; i < base.size(); ++i)
            CHECK((moved[i].position - pose.apply(base[i].position)).cwiseAbs().maxCoeff() <= 1e-9);
    }
}

TEST_CASE("merge") {
    const auto visual = random_cloud(1000, 1);
    const auto g = GridConfig::preset("12x32");
    const auto tactile = lift_tactile(make_uniform_frame(g, 60), {g, RigidTransform::identity()},
                                      NormalizationRule{50, 1023});
    const auto set = merge(visual, tactile);
    CHECK(set.points.size() == 1384);
    CHECK(set.vision_count == 1000);
    CHECK(set.tactile_count == 384);
    CHECK(filter_modality(set, Modality::vision) == visual);
    CHECK(filter_modality(set, Modality::tactile) == tactile);

    const auto empty = merge({}, {});
    CHECK(empty.points.empty());
    CHECK(empty.vision_count + empty.tactile_count == 0);

    CHECK_THROWS_AS(merge(tactile, {}), ContractViolation);
    CHECK_THROWS_AS(merge({}, visual), ContractViolation);
}

TEST_CASE("merge is associative over concatenation") {
    const auto a = random_cloud(10, 2), b = random_cloud(7, 3);
    auto t1 = random_cloud(5, 4), t2 = random_cloud(6, 5);
    for (auto& p : t1) p.modality = Modality::tactile;
    for (auto& p : t2) p.modality = Modality::tactile;

    auto ab = a;
    ab.insert(ab.end(), b.begin(), b.end());
    auto tt = t1;
    tt.insert(tt.end(), t2.begin(), t2.end());
    const auto whole = merge(ab, tt);

    const auto left = merge(a, t1), right = merge(b, t2);
    auto vis = filter_modality(left, Modality::vision);
    auto more = filter_modality(right, Modality::vision);
    vis.insert(vis.end(), more.begin(), more.end());
    auto tac = filter_modality(left, Modality::tactile);
    more = filter_modality(right, Modality::tactile);
    tac.insert(tac.end(), more.begin(), more.end());
    CHECK(merge(vis, tac).points == whole.points);
}

TEST_CASE("CSV formats") {
    const auto visual = random_cloud(25, 9);
    std::stringstream vcsv;
    write_visual_csv(vcsv, visual);
    CHECK(vcsv.str().rfind("x_m,y_m,z_m,feature\n", 0) == 0);
    CHECK(read_visual_csv(vcsv) == visual);

    auto tactile = random_cloud(5, 10);
    for (auto& p : tactile) p.modality = Modality::tactile;
    const auto set = merge(visual, tactile);
    std::stringstream fcsv;
    write_fused_csv(fcsv, set);
    CHECK(fcsv.str().rfind("x_m,y_m,z_m,magnitude,modality\n", 0) == 0);
    const auto back = read_fused_csv(fcsv);
    CHECK(back.points == set.points);
    CHECK(back.vision_count == 25);

    std::stringstream bad("x_m,y_m,z_m,feature\n0,0,0,2\n");
    CHECK_THROWS_AS(read_visual_csv(bad), ValidationError);
    std::stringstream short_row("x_m,y_m,z_m,feature\n0,0,0\n");
    CHECK_THROWS_AS(read_visual_csv(short_row), ValidationError);
}
