#include "dlrv/quadrature.hpp"

#include <cmath>
#include <map>

#include "dlrv/errors.hpp"

namespace dlrv {

namespace {

QuadRule make_interval_rule(int degree) {
  // Gauss-Legendre on [-1,1], mapped to [0,1]
  std::vector<double> x, w;
  if (degree <= 1) {
    x = {0.0};
    w = {2.0};
  } else if (degree <= 3) {
    double a = 1.0 / std::sqrt(3.0);
    x = {-a, a};
    w = {1.0, 1.0};
  } else if (degree <= 5) {
    double a = std::sqrt(3.0 / 5.0);
    x = {-a, 0.0, a};
    w = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
  } else if (degree <= 7) {
    double a = std::sqrt(3.0 / 7.0 - 2.0 / 7.0 * std::sqrt(6.0 / 5.0));
    double b = std::sqrt(3.0 / 7.0 + 2.0 / 7.0 * std::sqrt(6.0 / 5.0));
    double wa = (18.0 + std::sqrt(30.0)) / 36.0;
    double wb = (18.0 - std::sqrt(30.0)) / 36.0;
    x = {-b, -a, a, b};
    w = {wb, wa, wa, wb};
  } else {
    throw InvalidArgument("interval_rule: degree > 7 not provided");
  }
  QuadRule r;
  for (size_t i = 0; i < x.size(); ++i) {
    r.points.emplace_back(0.5 * (x[i] + 1.0), 0.0);
    r.weights.push_back(0.5 * w[i]);
  }
  return r;
}

void push_sym3(QuadRule& r, double w, double a, double b) {
  // barycentric (a,b,b) orbit; reference coordinates are (λ1, λ2)
  r.points.emplace_back(b, b);
  r.points.emplace_back(a, b);
  r.points.emplace_back(b, a);
  for (int i = 0; i < 3; ++i) r.weights.push_back(0.5 * w);
}

void push_sym6(QuadRule& r, double w, double a, double b, double c) {
  const double l[6][3] = {{a, b, c}, {a, c, b}, {b, a, c},
                          {b, c, a}, {c, a, b}, {c, b, a}};
  for (auto& p : l) {
    r.points.emplace_back(p[1], p[2]);
    r.weights.push_back(0.5 * w);
  }
}

QuadRule make_triangle_rule(int degree) {
  QuadRule r;
  if (degree <= 1) {
    r.points.emplace_back(1.0 / 3.0, 1.0 / 3.0);
    r.weights.push_back(0.5);
  } else if (degree <= 2) {
    push_sym3(r, 1.0 / 3.0, 2.0 / 3.0, 1.0 / 6.0);
  } else if (degree <= 3) {
    r.points.emplace_back(1.0 / 3.0, 1.0 / 3.0);
    r.weights.push_back(0.5 * (-27.0 / 48.0));
    push_sym3(r, 25.0 / 48.0, 0.6, 0.2);
  } else if (degree <= 4) {
    push_sym3(r, 0.223381589678011, 0.108103018168070, 0.445948490915965);
    push_sym3(r, 0.109951743655322, 0.816847572980459, 0.091576213509771);
  } else if (degree <= 5) {
    r.points.emplace_back(1.0 / 3.0, 1.0 / 3.0);
    r.weights.push_back(0.5 * 0.225);
    push_sym3(r, 0.132394152788506, 0.059715871789770, 0.470142064105115);
    push_sym3(r, 0.125939180544827, 0.797426985353087, 0.101286507323456);
  } else if (degree <= 6) {
    push_sym3(r, 0.116786275726379, 0.501426509658179, 0.249286745170910);
    push_sym3(r, 0.050844906370207, 0.873821971016996, 0.063089014491502);
    push_sym6(r, 0.082851075618374, 0.053145049844817, 0.310352451033784,
              0.636502499121399);
  } else {
    throw InvalidArgument("triangle_rule: degree > 6 not provided");
  }
  return r;
}

}  // namespace

const QuadRule& interval_rule(int degree) {
  static std::map<int, QuadRule> cache;
  auto it = cache.find(degree);
  if (it == cache.end()) it = cache.emplace(degree, make_interval_rule(degree)).first;
  return it->second;
}

const QuadRule& triangle_rule(int degree) {
  static std::map<int, QuadRule> cache;
  auto it = cache.find(degree);
  if (it == cache.end()) it = cache.emplace(degree, make_triangle_rule(degree)).first;
  return it->second;
}

}  // namespace dlrv
