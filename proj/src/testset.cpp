#include "flydraw/testset.hpp"

#include <cmath>
#include <numbers>

#include "flydraw/errors.hpp"

namespace flydraw {

namespace {

using Pt = Eigen::Vector2d;
constexpr double kPi = std::numbers::pi;

DrawnPath polyline(std::initializer_list<Pt> pts) { return DrawnPath{std::vector<Pt>(pts)}; }

template <class F>
DrawnPath sampled(int n, F f) {
  DrawnPath p;
  for (int i = 0; i <= n; ++i) p.points.push_back(f(static_cast<double>(i) / n));
  return p;
}

std::vector<NamedPath> make_paths() {
  std::vector<NamedPath> out;
  out.push_back({"circle", sampled(96, [](double u) {
                   const double a = 2 * kPi * u;
                   return Pt(0.8 * std::sin(a), 2.3 - 0.8 * std::cos(a));
                 })});
  out.push_back({"small-circle", sampled(64, [](double u) {
                   const double a = 2 * kPi * u;
                   return Pt(0.4 * std::sin(a), 1.9 - 0.4 * std::cos(a));
                 })});
  out.push_back({"figure-eight", sampled(128, [](double u) {
                   const double a = 2 * kPi * u;
                   return Pt(0.9 * std::sin(a), 1.5 + 0.5 * std::sin(2 * a));
                 })});
  out.push_back({"zigzag", polyline({{-1.2, 1.3}, {-0.8, 1.9}, {-0.4, 1.3}, {0.0, 1.9},
                                     {0.4, 1.3}, {0.8, 1.9}, {1.2, 1.3}})});
  out.push_back({"letter-s", sampled(96, [](double u) {
                   // Two opposite half circles stacked vertically.
                   const double a = 2 * kPi * u;
                   if (u < 0.5) return Pt(-0.4 * std::sin(a), 2.2 - 0.4 * (1 - std::cos(a)));
                   return Pt(0.4 * std::sin(a - kPi), 1.4 - 0.4 * (1 - std::cos(a - kPi)));
                 })});
  out.push_back({"letter-c", sampled(72, [](double u) {
                   const double a = kPi / 4 + 1.5 * kPi * u;
                   return Pt(0.7 * std::cos(a), 1.6 + 0.7 * std::sin(a));
                 })});
  out.push_back({"letter-l", polyline({{-0.5, 2.4}, {-0.5, 1.0}, {0.6, 1.0}})});
  out.push_back({"letter-m", polyline({{-1.0, 1.0}, {-1.0, 2.2}, {-0.4, 1.5}, {0.2, 2.2},
                                       {0.2, 1.0}})});
  out.push_back({"spiral", sampled(160, [](double u) {
                   const double a = 4 * kPi * u;
                   const double r = 0.2 + 0.6 * u;
                   return Pt(r * std::cos(a), 1.7 + r * std::sin(a));
                 })});
  out.push_back({"double-loop", sampled(160, [](double u) {
                   const double a = 4 * kPi * u;
                   return Pt(-1.0 + 2.0 * u + 0.35 * std::sin(a), 1.85 - 0.35 * std::cos(a));
                 })});
  out.push_back({"sine-wave", sampled(120, [](double u) {
                   return Pt(-1.4 + 2.8 * u, 1.6 + 0.4 * std::sin(3 * kPi * u));
                 })});
  out.push_back({"triangle", polyline({{-0.8, 1.1}, {0.8, 1.1}, {0.0, 2.4}, {-0.8, 1.1}})});
  return out;
}

}  // namespace

const std::vector<NamedPath>& bundled_test_paths() {
  static const std::vector<NamedPath> paths = make_paths();
  return paths;
}

const NamedPath& bundled_path(const std::string& name) {
  for (const NamedPath& p : bundled_test_paths())
    if (p.name == name) return p;
  throw NotFound("no bundled path named '" + name + "'");
}

}  // namespace flydraw
