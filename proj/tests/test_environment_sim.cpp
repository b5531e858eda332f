#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "lfd/environment.hpp"
#include "test_util.hpp"

using namespace lfd;

namespace {

const ObjectDatabase kDb = ObjectDatabase::builtin();

ScenarioSpec cucumber_scene(bool force_noise = false, uint64_t seed = 0) {
  ScenarioSpec s;
  s.name = "cucumber_scene";
  s.objects.push_back({0, "cucumber", Vec3(0.35, 0.0, 0.02)});
  s.phases.push_back({PhaseKind::Free, 12, Vec3(0, 0, 0.3), Vec3(0, 0, 0.3), -1});
  s.force_noise = force_noise;
  s.env_seed = seed;
  return s;
}

// Dyadic face extents so peel fractions are exact in floating point.
ObjectDatabase dyadic_db() {
  ObjectDatabase db;
  db.add({"slab", 500.0, 0.1, Vec3(0.5, 0.25, 0.05), {"unpeeled", "peeled"}, 1.5});
  return db;
}

ScenarioSpec slab_scene() {
  ScenarioSpec s;
  s.name = "slab";
  s.objects.push_back({0, "slab", Vec3(0.0, 0.0, 0.025)});
  s.phases.push_back({PhaseKind::Free, 12, Vec3(0, 0, 0.3), Vec3(0, 0, 0.3), -1});
  return s;
}

}  // namespace

TEST_CASE("contact force is zero outside every object") {
  Environment env = Environment::from_scenario(cucumber_scene(), kDb);
  CHECK(env.contact_force(Vec3(0.35, 0.0, 0.30)) == 0.0);
  CHECK(env.last_contact().object_id == -1);
}

TEST_CASE("contact force is stiffness times penetration when noiseless") {
  Environment env = Environment::from_scenario(cucumber_scene(), kDb);
  // Top face at z = 0.04; press 1 mm into a 500 N/m object.
  const double f = env.contact_force(Vec3(0.35, 0.0, 0.04 - 0.001));
  CHECK(f == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(env.last_contact().object_id == 0);
  CHECK(env.last_contact().penetration == doctest::Approx(0.001).epsilon(1e-12));
}

TEST_CASE("force law is linear in penetration") {
  // Shallow contact: below half the extent the top face stays nearest.
  Environment env = Environment::from_scenario(cucumber_scene(), kDb);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> d(1e-4, 0.004);
  for (int i = 0; i < 200; ++i) {
    const double p = d(rng);
    const double f1 = env.contact_force(Vec3(0.35, 0.0, 0.04 - p));
    const double f2 = env.contact_force(Vec3(0.35, 0.0, 0.04 - 2 * p));
    CHECK(f2 == doctest::Approx(2 * f1).epsilon(1e-9));
  }
}

TEST_CASE("force noise is bounded by the stated amplitude") {
  Environment env = Environment::from_scenario(cucumber_scene(true, 99), kDb);
  const Vec3 press(0.35, 0.0, 0.04 - 0.001);
  std::vector<double> samples;
  for (int i = 0; i < 10000; ++i) samples.push_back(env.contact_force(press));
  double mean = 0.0;
  for (double s : samples) mean += s;
  mean /= samples.size();
  CHECK(std::abs(mean - 0.5) < 0.01);
  for (double s : samples) CHECK(std::abs(s - mean) <= Environment::kNoiseAmplitude + 0.01);
  // Noise never produces force in free space.
  CHECK(env.contact_force(Vec3(0.35, 0.0, 0.5)) == 0.0);
}

TEST_CASE("apply_peel sweeps a strip whose area matches the rectangle oracle") {
  Environment env = Environment::from_scenario(cucumber_scene(), kDb);
  // Straight pass along x on the top face, force above the 1.5 N threshold.
  std::vector<Vec3> path;
  std::vector<double> forces;
  for (int i = 0; i <= 60; ++i) {
    path.emplace_back(0.29 + i * 0.002, 0.0, 0.04);
    forces.push_back(2.0);
  }
  env.apply_peel(0, path, forces, 0.02);

  // Oracle: swept rectangle (length + blade) x blade, clipped to the face.
  const double len = 0.12, blade = 0.02;
  const double want = ((len + blade) * blade) / (0.30 * 0.04);
  CHECK(env.object(0).peel_fraction() == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("a pass just below the threshold adds nothing") {
  Environment env = Environment::from_scenario(cucumber_scene(), kDb);
  std::vector<Vec3> path{Vec3(0.30, 0, 0.04), Vec3(0.40, 0, 0.04)};
  std::vector<double> forces{1.49, 1.49};
  env.apply_peel(0, path, forces, 0.02);
  CHECK(env.object(0).peel_fraction() == 0.0);

  // One below-threshold sample spoils the whole pass.
  forces = {2.0, 1.49};
  env.apply_peel(0, path, forces, 0.02);
  CHECK(env.object(0).peel_fraction() == 0.0);

  // At the threshold exactly, the strip peels.
  forces = {1.5, 1.5};
  env.apply_peel(0, path, forces, 0.02);
  CHECK(env.object(0).peel_fraction() > 0.0);
}

TEST_CASE("repeated passes over the same strip do not double-count") {
  Environment env = Environment::from_scenario(cucumber_scene(), kDb);
  std::vector<Vec3> path{Vec3(0.30, 0, 0.04), Vec3(0.40, 0, 0.04)};
  std::vector<double> forces{2.0, 2.0};
  env.apply_peel(0, path, forces, 0.02);
  const double once = env.object(0).peel_fraction();
  env.apply_peel(0, path, forces, 0.02);
  CHECK(env.object(0).peel_fraction() == doctest::Approx(once).epsilon(1e-12));
  // A disjoint strip adds area.
  std::vector<Vec3> path2{Vec3(0.44, 0, 0.04), Vec3(0.48, 0, 0.04)};
  env.apply_peel(0, path2, forces, 0.02);
  CHECK(env.object(0).peel_fraction() > once);
}

TEST_CASE("detect_state flips at the detection fraction, inclusively") {
  const ObjectDatabase db = dyadic_db();
  Environment env = Environment::from_scenario(slab_scene(), db);
  CHECK(env.detect_state(0).label == "unpeeled");  // peel fraction 0

  // Face is 0.5 x 0.25 (area 0.125, a power of two). A strip of width
  // f*0.5 starting at x=0 covers exactly the fraction f: every operation
  // scales by a power of two.
  env.object(0).peeled.push_back({0.0, -0.125, 0.099 * 0.5, 0.125});
  CHECK(env.object(0).peel_fraction() == 0.099);
  CHECK(env.detect_state(0).label == "unpeeled");

  env.object(0).peeled.clear();
  env.object(0).peeled.push_back({0.0, -0.125, 0.10 * 0.5, 0.125});
  CHECK(env.object(0).peel_fraction() == 0.10);
  CHECK(env.detect_state(0).label == "peeled");
}

TEST_CASE("peel progress is monotone and the state never reverts") {
  Environment env = Environment::from_scenario(cucumber_scene(), kDb);
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> dx(0.21, 0.49), dy(-0.015, 0.015), df(0.0, 3.0);
  double last = 0.0;
  bool was_peeled = false;
  for (int i = 0; i < 300; ++i) {
    std::vector<Vec3> path{Vec3(dx(rng), dy(rng), 0.04), Vec3(dx(rng), dy(rng), 0.04)};
    std::vector<double> forces{df(rng), df(rng)};
    env.apply_peel(0, path, forces, 0.02);
    const double frac = env.object(0).peel_fraction();
    CHECK(frac >= last);
    CHECK(frac <= 1.0);
    const bool peeled = env.detect_state(0).label == "peeled";
    if (was_peeled) CHECK(peeled);
    was_peeled = peeled;
    last = frac;
  }
  CHECK(was_peeled);  // random passes eventually cross 10%
}

TEST_CASE("noise-off environments are deterministic") {
  Environment a = Environment::from_scenario(cucumber_scene(), kDb);
  Environment b = Environment::from_scenario(cucumber_scene(), kDb);
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> d(0.0, 0.02);
  for (int i = 0; i < 100; ++i) {
    const Vec3 p(0.35, 0.0, 0.04 - d(rng));
    CHECK(a.contact_force(p) == b.contact_force(p));
  }
  std::vector<Vec3> path{Vec3(0.30, 0, 0.04), Vec3(0.40, 0, 0.04)};
  std::vector<double> forces{2.0, 2.0};
  a.apply_peel(0, path, forces, 0.02);
  b.apply_peel(0, path, forces, 0.02);
  CHECK(a.object(0).peel_fraction() == b.object(0).peel_fraction());
  CHECK(a.detect_state(0).label == b.detect_state(0).label);
}

TEST_CASE("rect_union_area handles overlap, containment and disjoint pieces") {
  CHECK(rect_union_area({}) == 0.0);
  CHECK(rect_union_area({{0, 0, 1, 1}}) == doctest::Approx(1.0));
  CHECK(rect_union_area({{0, 0, 1, 1}, {0.5, 0.0, 1.5, 1.0}}) == doctest::Approx(1.5));
  CHECK(rect_union_area({{0, 0, 1, 1}, {0.25, 0.25, 0.75, 0.75}}) == doctest::Approx(1.0));
  CHECK(rect_union_area({{0, 0, 1, 1}, {2, 2, 3, 3}}) == doctest::Approx(2.0));
}

TEST_CASE("the attached tool never becomes an environment object") {
  ScenarioSpec s = cucumber_scene();
  s.objects.push_back({1, "peeler", Vec3::Zero()});
  s.attached_object = 1;
  Environment env = Environment::from_scenario(s, kDb);
  CHECK(env.objects().size() == 1);
  CHECK_THROWS_AS(env.object(1), Error);
}
