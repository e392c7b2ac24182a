#include <filesystem>
#include <random>

#include "doctest.h"
#include "flydraw/errors.hpp"
#include "flydraw/io.hpp"
#include "flydraw/loop.hpp"
#include "flydraw/refgen.hpp"
#include "flydraw/testset.hpp"

using namespace flydraw;
namespace fs = std::filesystem;

namespace {

VehicleState random_state(std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  VehicleState s;
  s.p = Vec3(n(rng), n(rng), n(rng));
  s.v = Vec3(n(rng), n(rng), n(rng));
  s.euler = 0.1 * Vec3(n(rng), n(rng), n(rng));
  s.omega = Vec3(n(rng), n(rng), n(rng));
  s.zacc = n(rng);
  return s;
}

// Nets whose every output is a fixed constant in standardized units.
ReferenceGenerator constant_generator(const FeatureConfig& f, double out) {
  std::vector<Network> nets;
  for (int k = 0; k < kOutputs; ++k) {
    Network n = Network::zeros(f.feature_length());
    n.layers().back().bias(0) = out;
    nets.push_back(n);
  }
  Offsets scale;
  scale.fill(1.0);
  return ReferenceGenerator(f, nets, Normalizer::identity(f.feature_length()), scale);
}

Network random_net(int dim, std::uint64_t seed) { return Network::he_init(dim, seed, 2, 8); }

ReferenceGenerator random_generator(const FeatureConfig& f, std::uint64_t seed) {
  std::vector<Network> nets;
  for (int k = 0; k < kOutputs; ++k) nets.push_back(random_net(f.feature_length(), seed + k));
  Normalizer norm = Normalizer::identity(f.feature_length());
  for (int i = 0; i < norm.dim(); ++i) {
    norm.mean(i) = 0.01 * i;
    norm.scale(i) = 1.0 + 0.1 * i;
  }
  Offsets scale{0.05, 0.06, 0.07, 0.1, 0.11, 0.12};
  return ReferenceGenerator(f, nets, norm, scale);
}

const DesiredTrajectory& circle() {
  static const DesiredTrajectory t = process_drawn_path(bundled_path("circle").path);
  return t;
}

}  // namespace

TEST_CASE("feature lengths follow the layout formula") {
  CHECK(preset("future-feedback")->feature_length() == 36);
  CHECK(preset("future-no-feedback")->feature_length() == 36);
  CHECK(preset("no-future")->feature_length() == 23);
  CHECK_FALSE(preset("baseline").has_value());
  CHECK_THROWS_AS(preset("nope"), ConfigError);
}

TEST_CASE("feature layout: anchor block, selected blocks, relative positions") {
  std::mt19937_64 rng(1);
  const VehicleState a = random_state(rng), s1 = random_state(rng), s2 = random_state(rng);
  const FeatureConfig cfg = *preset("future-feedback");
  const Eigen::VectorXd x = build_features(a, {s1, s2}, cfg);
  REQUIRE(x.size() == 36);
  int i = 0;
  for (const VehicleState* s : {&a, &s1, &s2}) {
    CHECK(x.segment<3>(i) == s->v);
    CHECK(x.segment<3>(i + 3) == s->euler);
    CHECK(x.segment<3>(i + 6) == s->omega);
    CHECK(x(i + 9) == s->zacc);
    i += kStateBlock;
  }
  CHECK(x.segment<3>(30) == s1.p - a.p);
  CHECK(x.segment<3>(33) == s2.p - a.p);
}

TEST_CASE("no absolute position enters the features") {
  std::mt19937_64 rng(2);
  VehicleState a = random_state(rng), s = random_state(rng);
  const FeatureConfig cfg = *preset("no-future");
  const Eigen::VectorXd x = build_features(a, {s}, cfg);
  const Vec3 shift(5, -3, 2);
  a.p += shift;
  s.p += shift;
  CHECK((build_features(a, {s}, cfg) - x).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("self-difference gives a zero relative block") {
  std::mt19937_64 rng(3);
  const VehicleState a = random_state(rng);
  const Eigen::VectorXd x = build_features(a, {a}, *preset("no-future"));
  CHECK(x.tail<3>() == Eigen::Vector3d::Zero());
}

TEST_CASE("permuting selected states changes the features") {
  std::mt19937_64 rng(4);
  const VehicleState a = random_state(rng), s1 = random_state(rng), s2 = random_state(rng);
  const FeatureConfig cfg = *preset("future-feedback");
  CHECK(build_features(a, {s1, s2}, cfg) != build_features(a, {s2, s1}, cfg));
}

TEST_CASE("selected count mismatch is a shape error") {
  const FeatureConfig cfg = *preset("future-feedback");
  CHECK_THROWS_AS(build_features({}, {VehicleState{}}, cfg), ShapeError);
}

TEST_CASE("feature config validation and descriptors") {
  FeatureConfig f;
  f.deltas = {};
  CHECK_THROWS_AS(f.validate(), ConfigError);
  f.deltas = {3, 3};
  CHECK_THROWS_AS(f.validate(), ConfigError);
  f.deltas = {-1};
  CHECK_THROWS_AS(f.validate(), ConfigError);
  const FeatureConfig p = *preset("future-no-feedback");
  CHECK(describe(p) == "L=2 deltas=4,6 feedback=0");
  CHECK(parse_descriptor(describe(p), p.name) == p);
}

TEST_CASE("normalizer: z-score, constant columns pass through, round trip") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n;
  Eigen::MatrixXd x(3, 400);
  for (int j = 0; j < x.cols(); ++j) {
    x(0, j) = 4.0 + 2.0 * n(rng);
    x(1, j) = 7.5;
    x(2, j) = n(rng);
  }
  const Normalizer norm = Normalizer::fit(x);
  CHECK(norm.mean(1) == 0.0);
  CHECK(norm.scale(1) == 1.0);
  const Eigen::MatrixXd z = norm.normalize_columns(x);
  CHECK(z.row(0).mean() == doctest::Approx(0.0).epsilon(1e-12));
  CHECK((z.row(0).array().square().mean()) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(z.row(1).isApprox(x.row(1)));
  for (int j = 0; j < 10; ++j) {
    const Eigen::VectorXd col = x.col(j);
    CHECK((norm.denormalize(norm.normalize(col)) - col).cwiseAbs().maxCoeff() < 1e-12);
  }
  Eigen::MatrixXd unit(1, 2);
  unit << -1.0, 1.0;
  const Normalizer u = Normalizer::fit(unit);
  CHECK(u.normalize(Eigen::VectorXd::Constant(1, 0.5))(0) == doctest::Approx(0.5));
}

TEST_CASE("zero generator passes the desired state through exactly") {
  const DesiredTrajectory& traj = circle();
  std::mt19937_64 rng(6);
  for (const std::string& name : {"no-future", "future-no-feedback", "future-feedback"}) {
    const ReferenceGenerator gen = ReferenceGenerator::zero(*preset(name));
    for (long t : {0L, 5L, static_cast<long>(traj.size()) - 1}) {
      const VehicleState cur = random_state(rng);
      CHECK(gen.generate(traj, t, cur) == desired_state_at(traj, t));
    }
  }
}

TEST_CASE("attitude, rates and zacc pass through; offsets apply to p and v") {
  const DesiredTrajectory& traj = circle();
  const ReferenceGenerator gen = constant_generator(*preset("future-feedback"), 0.2);
  std::mt19937_64 rng(7);
  const VehicleState cur = random_state(rng);
  const VehicleState d = traj[10];
  const VehicleState r = gen.generate(traj, 10, cur);
  CHECK(r.euler == d.euler);
  CHECK(r.omega == d.omega);
  CHECK(r.zacc == d.zacc);
  CHECK((r.p - d.p - Vec3::Constant(0.2)).norm() < 1e-15);
  CHECK((r.v - d.v - Vec3::Constant(0.2)).norm() < 1e-15);
}

TEST_CASE("offsets are clipped unless clipping is disabled") {
  const DesiredTrajectory& traj = circle();
  ReferenceGenerator gen = constant_generator(*preset("no-future"), 3.0);
  const VehicleState d = traj[4];
  VehicleState r = gen.generate(traj, 4, d);
  CHECK((r.p - d.p - Vec3::Constant(0.5)).norm() < 1e-15);
  CHECK((r.v - d.v - Vec3::Constant(0.5)).norm() < 1e-15);
  gen.set_clip({false, 0.5, 0.5});
  r = gen.generate(traj, 4, d);
  CHECK((r.p - d.p - Vec3::Constant(3.0)).norm() < 1e-14);
}

TEST_CASE("without feedback the reference ignores the current state") {
  const DesiredTrajectory& traj = circle();
  const ReferenceGenerator gen = random_generator(*preset("future-no-feedback"), 11);
  std::mt19937_64 rng(8);
  for (long t : {0L, 1L, 20L, 60L}) {
    const VehicleState a = gen.generate(traj, t, random_state(rng));
    const VehicleState b = gen.generate(traj, t, random_state(rng));
    CHECK(a == b);
  }
  const Eigen::VectorXd x0 = inference_features(gen.features(), traj, 0, random_state(rng));
  CHECK(x0.head(kStateBlock) == build_features(traj[0], {traj[4], traj[6]}, gen.features()).head(kStateBlock));
  const Eigen::VectorXd x5 = inference_features(gen.features(), traj, 5, random_state(rng));
  CHECK(x5 == build_features(traj[4], {traj[9], traj[11]}, gen.features()));
}

TEST_CASE("no-feedback reference sequence does not depend on the plant") {
  const DesiredTrajectory& traj = circle();
  const ReferenceGenerator gen = random_generator(*preset("future-no-feedback"), 21);
  PlantConfig heavy;
  heavy.mass = 0.6;
  heavy.command_delay_steps = 2;
  const FlightLog a = run_closed_loop(traj, ControllerGains{}, PlantConfig{}, &gen);
  const FlightLog b = run_closed_loop(traj, ControllerGains{}, heavy, &gen);
  REQUIRE(a.ticks.size() == b.ticks.size());
  bool states_differ = false;
  for (std::size_t k = 0; k < a.ticks.size(); ++k) {
    CHECK(a.ticks[k].reference == b.ticks[k].reference);
    states_differ |= a.ticks[k].current != b.ticks[k].current;
  }
  CHECK(states_differ);
}

TEST_CASE("feedback features use the current state as anchor") {
  const DesiredTrajectory& traj = circle();
  std::mt19937_64 rng(9);
  const VehicleState cur = random_state(rng);
  const FeatureConfig f = *preset("future-feedback");
  CHECK(inference_features(f, traj, 3, cur) == build_features(cur, {traj[7], traj[9]}, f));
  const long n = static_cast<long>(traj.size());
  CHECK(inference_features(f, traj, n - 2, cur) ==
        build_features(cur, {desired_state_at(traj, n + 2), desired_state_at(traj, n + 4)}, f));
}

TEST_CASE("inconsistent generators are configuration errors") {
  const FeatureConfig f = *preset("future-feedback");
  std::vector<Network> nets(kOutputs, Network::zeros(36));
  Offsets s;
  s.fill(1.0);
  CHECK_THROWS_AS(ReferenceGenerator(f, nets, Normalizer{}, s), ConfigError);
  CHECK_THROWS_AS(ReferenceGenerator(f, nets, Normalizer::identity(23), s), ConfigError);
  CHECK_THROWS_AS(ReferenceGenerator(f, std::vector<Network>(5, Network::zeros(36)),
                                     Normalizer::identity(36), s),
                  ConfigError);
  nets[2] = Network::zeros(23);
  CHECK_THROWS_AS(ReferenceGenerator(f, nets, Normalizer::identity(36), s), ConfigError);
}

TEST_CASE("bundle round trip reproduces the generator bit for bit") {
  const fs::path dir = fs::temp_directory_path() / "flydraw_test_bundle";
  fs::remove_all(dir);
  ReferenceGenerator gen = random_generator(*preset("no-future"), 31);
  gen.set_clip({true, 0.25, 0.4});
  save_bundle(gen, dir.string(), R"({"note": "x"})");
  for (const char* name : kOutputNames) CHECK(fs::exists(dir / (std::string(name) + ".model")));
  CHECK(fs::exists(dir / "manifest.json"));
  CHECK(fs::exists(dir / "norm.txt"));
  const ReferenceGenerator back = load_bundle(dir.string());
  CHECK(back.features() == gen.features());
  CHECK(back.normalizer() == gen.normalizer());
  CHECK(back.target_scale() == gen.target_scale());
  CHECK(back.clip().position == 0.25);
  for (int k = 0; k < kOutputs; ++k) CHECK(back.nets()[k] == gen.nets()[k]);
  const DesiredTrajectory& traj = circle();
  CHECK(back.generate(traj, 12, traj[11]) == gen.generate(traj, 12, traj[11]));
  fs::remove_all(dir);
}

TEST_CASE("missing or damaged bundles are reported") {
  const fs::path dir = fs::temp_directory_path() / "flydraw_test_bundle_bad";
  fs::remove_all(dir);
  CHECK_THROWS_AS(load_bundle(dir.string()), Error);
  save_bundle(random_generator(*preset("no-future"), 41), dir.string());
  fs::remove(dir / "norm.txt");
  CHECK_THROWS_AS(load_bundle(dir.string()), Error);
  fs::remove_all(dir);
}
