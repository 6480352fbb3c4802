#pragma once
// Brute-force reference for the fairness metrics. Deliberately naive: plain
// loops over row structs, no masks, no shared code with the library.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace oracle {

struct Row {
  std::string s;  // protected group
  std::string a;  // category
  double xp = 0;  // privilege proxy
  double xe = 0;  // effort proxy
  int y = 0;
  double h = 0;  // score in [0,1]
};

enum class Kind { EP, DP, CDP, SEP, CSEP, Relaxed };
enum class Scope { Global, PerGroup, PerCategoryGroup };

struct Config {
  Kind kind = Kind::SEP;
  double tau = 0;
  Scope scope = Scope::PerGroup;
  bool unit_zeta = true;
  double cap = 2.0;
  bool literal_t3 = false;
  bool hard = true;
  double cutoff = 0.5;
};

struct Terms {
  std::optional<double> t1, t2, t3;
  double total() const { return t1.value_or(0) + t2.value_or(0) + t3.value_or(0); }
};

// (category, group) -> terms; category "*" when unconditional.
using Result = std::map<std::pair<std::string, std::string>, Terms>;

inline double positive(const Row& r, const Config& c) { return c.hard ? (r.h >= c.cutoff ? 1.0 : 0.0) : r.h; }

inline double mean_of(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// Smallest observed value v with share(x >= v) <= p/100.
inline std::optional<double> top_p_cutoff(const std::vector<double>& x, double p) {
  std::set<double> distinct(x.begin(), x.end());
  for (double v : distinct) {
    std::size_t above = 0;
    for (double u : x) above += u >= v;
    if (100.0 * static_cast<double>(above) <= p * static_cast<double>(x.size())) return v;
  }
  return std::nullopt;
}

inline double effort_cutoff(const std::vector<Row>& rows, const Row& r, Scope scope) {
  std::vector<double> all, grp, cell;
  for (const auto& o : rows) {
    all.push_back(o.xe);
    if (o.s == r.s) grp.push_back(o.xe);
    if (o.s == r.s && o.a == r.a) cell.push_back(o.xe);
  }
  const double global = mean_of(all);
  if (scope == Scope::Global) return global;
  const double group = grp.size() < 2 ? global : mean_of(grp);
  if (scope == Scope::PerGroup) return group;
  return cell.size() < 2 ? group : mean_of(cell);
}

inline Result evaluate(const std::vector<Row>& rows, const Config& c) {
  const bool conditional = c.kind == Kind::CDP || c.kind == Kind::CSEP;
  std::set<std::string> groups, cats;
  for (const auto& r : rows) {
    groups.insert(r.s);
    cats.insert(conditional ? r.a : "*");
  }
  auto in_cat = [&](const Row& r, const std::string& a) { return !conditional || r.a == a; };

  Result out;
  for (const auto& a : cats) {
    for (const auto& s : groups) {
      Terms t;
      if (c.kind == Kind::EP || c.kind == Kind::DP || c.kind == Kind::CDP) {
        double num_all = 0, den_all = 0, num_s = 0, den_s = 0;
        for (const auto& r : rows) {
          if (!in_cat(r, a) || (c.kind == Kind::EP && r.y != 1)) continue;
          num_all += positive(r, c);
          den_all += 1;
          if (r.s == s) {
            num_s += positive(r, c);
            den_s += 1;
          }
        }
        if (den_all > 0 && den_s > 0) t.t1 = std::abs(num_all / den_all - num_s / den_s);
        out[{a, s}] = t;
        continue;
      }

      // T1: category PPR vs underprivileged members of s in the category.
      double num_all = 0, den_all = 0, num_u = 0, den_u = 0;
      double cell_max = -std::numeric_limits<double>::infinity();
      for (const auto& r : rows) {
        if (!in_cat(r, a)) continue;
        num_all += positive(r, c);
        den_all += 1;
        if (r.s == s) cell_max = std::max(cell_max, r.xe);
        if (r.s == s && r.xp < c.tau) {
          num_u += positive(r, c);
          den_u += 1;
        }
      }
      if (den_all > 0 && den_u > 0) t.t1 = std::abs(num_all / den_all - num_u / den_u);

      if (c.kind != Kind::Relaxed) {
        double A = 0, low_neg = 0, B = 0, high_neg = 0, C = 0, priv_neg = 0, B0 = 0, high_neg0 = 0;
        for (const auto& r : rows) {
          if (!in_cat(r, a)) continue;
          const double neg = 1.0 - positive(r, c);
          if (r.xp >= c.tau && r.y == 0) {
            C += 1;
            priv_neg += neg;
          }
          if (r.s != s || r.xp >= c.tau) continue;
          const double e = effort_cutoff(rows, r, c.scope);
          if (r.xe < e) {
            A += 1;
            low_neg += neg;
            continue;
          }
          double z = 1.0;
          if (!c.unit_zeta && cell_max > e) z = 1.0 + std::min((r.xe - e) / (cell_max - e), c.cap - 1.0);
          B += z;
          high_neg += z * neg;
          if (r.y == 0) {
            B0 += z;
            high_neg0 += z * neg;
          }
        }
        if (A > 0 && B > 0) t.t2 = std::abs(low_neg / A - high_neg / B);
        if (C > 0 && B0 > 0) t.t3 = std::abs(priv_neg / C - high_neg0 / (c.literal_t3 ? B : B0));
      }
      out[{a, s}] = t;
    }
  }
  return out;
}

inline double aggregate(const Result& r) {
  double worst = 0;
  for (const auto& [k, t] : r) worst = std::max(worst, t.total());
  return worst;
}

}  // namespace oracle
