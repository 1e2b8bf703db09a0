#include "qcmesh/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <optional>

#include "qcmesh/error.hpp"

namespace qcmesh {

namespace {

const double kH = std::sqrt(3.0) / 2;

bool key_less(const LatticeTri& a, const LatticeTri& b) {
  if (a.level != b.level) return a.level < b.level;
  if (a.j != b.j) return a.j < b.j;
  if (a.i != b.i) return a.i < b.i;
  return a.up > b.up;
}

struct PairHash {
  size_t operator()(const std::array<int64_t, 2>& k) const {
    uint64_t h = static_cast<uint64_t>(k[0]) * 0x9E3779B97F4A7C15ull;
    h ^= static_cast<uint64_t>(k[1]) + 0x632BE59BD9B4E019ull + (h << 6) + (h >> 2);
    return static_cast<size_t>(h);
  }
};

}  // namespace

size_t GradedLattice::KeyHash::operator()(const LatticeTri& t) const {
  uint64_t h = static_cast<uint64_t>(t.i) * 0x9E3779B97F4A7C15ull;
  h ^= static_cast<uint64_t>(t.j) * 0xC2B2AE3D27D4EB4Full + (h << 7);
  h ^= static_cast<uint64_t>(t.level * 2 + (t.up ? 1 : 0)) * 0x165667B19E3779F9ull;
  return static_cast<size_t>(h ^ (h >> 29));
}

std::array<LatticeTri, 4> lattice_children(const LatticeTri& t) {
  const int l = t.level + 1;
  const int64_t i = 2 * t.i, j = 2 * t.j;
  if (t.up) return {{{l, i, j, true}, {l, i + 1, j, true}, {l, i, j + 1, true}, {l, i, j, false}}};
  return {{{l, i + 1, j, false}, {l, i + 1, j + 1, false}, {l, i, j + 1, false}, {l, i + 1, j + 1, true}}};
}

GradedLattice::GradedLattice(double base_side, int max_level) : base_(base_side), max_level_(max_level) {
  if (!(base_side > 0) || !std::isfinite(base_side)) fail(Status::validation, "lattice side must be positive");
  if (max_level < 0 || max_level > 40) fail(Status::validation, "lattice depth must lie in [0, 40]");
}

double GradedLattice::side(int level) const { return std::ldexp(base_, -level); }

std::array<std::array<int64_t, 2>, 3> GradedLattice::corner_keys(const LatticeTri& t) const {
  if (t.up) return {{{t.i, t.j}, {t.i + 1, t.j}, {t.i, t.j + 1}}};
  return {{{t.i + 1, t.j}, {t.i + 1, t.j + 1}, {t.i, t.j + 1}}};
}

std::array<Vec2, 3> GradedLattice::corners(const LatticeTri& t) const {
  const double s = side(t.level);
  std::array<Vec2, 3> out;
  auto k = corner_keys(t);
  for (int c = 0; c < 3; ++c) {
    double i = static_cast<double>(k[c][0]), j = static_cast<double>(k[c][1]);
    out[c] = {(i + 0.5 * j) * s, j * kH * s};
  }
  return out;
}

void GradedLattice::cover_box(Vec2 lo, Vec2 hi) {
  const double s = base_;
  const int64_t j0 = static_cast<int64_t>(std::floor(lo.y / (kH * s))) - 1;
  const int64_t j1 = static_cast<int64_t>(std::ceil(hi.y / (kH * s))) + 1;
  for (int64_t j = j0; j <= j1; ++j) {
    const int64_t i0 = static_cast<int64_t>(std::floor(lo.x / s - 0.5 * j)) - 2;
    const int64_t i1 = static_cast<int64_t>(std::ceil(hi.x / s - 0.5 * j)) + 2;
    for (int64_t i = i0; i <= i1; ++i)
      for (bool up : {true, false}) {
        LatticeTri t{0, i, j, up};
        auto c = corners(t);
        double x0 = std::min({c[0].x, c[1].x, c[2].x}), x1 = std::max({c[0].x, c[1].x, c[2].x});
        double y0 = std::min({c[0].y, c[1].y, c[2].y}), y1 = std::max({c[0].y, c[1].y, c[2].y});
        if (x1 < lo.x || x0 > hi.x || y1 < lo.y || y0 > hi.y) continue;
        if (nodes_.emplace(t, leaf).second) ++leaves_;
      }
  }
}

void GradedLattice::split_leaf(const LatticeTri& t) {
  if (leaves_ + 3 > budget_)
    fail(Status::hypothesis, "lattice refinement exceeds the leaf budget of " + std::to_string(budget_));
  nodes_[t] = split_node;
  for (const auto& c : lattice_children(t)) nodes_[c] = leaf;
  leaves_ += 3;
}

const LatticeTri* GradedLattice::leaf_at(int64_t pi, int64_t pj, int hint) const {
  const int g = max_level_ + 2;
  auto key_at = [&](int l) {
    const int sh = g - l;
    const int64_t i = pi >> sh, j = pj >> sh;
    const int64_t ri = pi - (i << sh), rj = pj - (j << sh);
    return LatticeTri{l, i, j, ri + rj < (int64_t{1} << sh)};
  };
  int l = std::clamp(hint, 0, max_level_);
  auto it = nodes_.find(key_at(l));
  if (it == nodes_.end()) {
    while (--l >= 0) {
      it = nodes_.find(key_at(l));
      if (it != nodes_.end()) return it->second == leaf ? &it->first : nullptr;
    }
    return nullptr;
  }
  while (it->second != leaf) {
    if (++l > max_level_) return nullptr;
    it = nodes_.find(key_at(l));
    if (it == nodes_.end()) fail(Status::internal, "lattice tree lost a child");
  }
  return &it->first;
}

std::array<std::array<int, 2>, 3> GradedLattice::across(const LatticeTri& t,
                                                         std::array<LatticeTri, 6>* found) const {
  static const int64_t medial[6][2] = {{1, 1}, {-1, 2}, {-2, 1}, {-1, -1}, {1, -2}, {2, -1}};
  const int sh = max_level_ + 2 - t.level;
  auto ck = corner_keys(t);
  std::array<std::array<int, 2>, 3> out;
  for (int e = 0; e < 3; ++e) {
    const int64_t ai = ck[e][0] << sh, aj = ck[e][1] << sh;
    const int64_t bi = ck[(e + 1) % 3][0] << sh, bj = ck[(e + 1) % 3][1] << sh;
    double dx = (bi - ai) + 0.5 * (bj - aj), dy = kH * (bj - aj);
    int best = 0;
    double best_dot = -1e300;
    for (int m = 0; m < 6; ++m) {
      double mx = medial[m][0] + 0.5 * medial[m][1], my = kH * medial[m][1];
      double d = mx * dy - my * dx;  // against the right-hand normal
      if (d > best_dot) best_dot = d, best = m;
    }
    for (int q = 0; q < 2; ++q) {
      const int64_t qi = (q == 0 ? 3 * ai + bi : ai + 3 * bi) / 4 + medial[best][0];
      const int64_t qj = (q == 0 ? 3 * aj + bj : aj + 3 * bj) / 4 + medial[best][1];
      const LatticeTri* n = leaf_at(qi, qj, t.level);
      out[e][q] = n ? n->level : -1;
      if (found) (*found)[2 * e + q] = n ? *n : LatticeTri{-1, 0, 0, true};
    }
  }
  return out;
}

void GradedLattice::refine(const std::function<bool(const LatticeTri&)>& split, size_t max_leaves) {
  budget_ = max_leaves;
  if (leaves_ > budget_) fail(Status::hypothesis, "lattice cover exceeds the leaf budget");
  std::vector<LatticeTri> level_leaves;
  for (const auto& [k, v] : nodes_)
    if (v == leaf) level_leaves.push_back(k);
  std::sort(level_leaves.begin(), level_leaves.end(), key_less);
  std::vector<LatticeTri> cur;
  for (int l = 0; l <= max_level_; ++l) {
    cur.clear();
    for (const auto& t : level_leaves)
      if (t.level == l) cur.push_back(t);
    std::vector<LatticeTri> next;
    for (const auto& t : level_leaves)
      if (t.level > l) next.push_back(t);
    if (l < max_level_)
      for (const auto& t : cur)
        if (split(t)) {
          split_leaf(t);
          for (const auto& c : lattice_children(t)) next.push_back(c);
        }
    level_leaves.swap(next);
    if (level_leaves.empty()) break;
  }

  // balance and red closure
  std::vector<LatticeTri> all;
  for (const auto& [k, v] : nodes_)
    if (v == leaf) all.push_back(k);
  std::sort(all.begin(), all.end(), key_less);
  std::deque<LatticeTri> work(all.begin(), all.end());
  std::array<LatticeTri, 6> nb;
  while (!work.empty()) {
    LatticeTri t = work.front();
    work.pop_front();
    auto it = nodes_.find(t);
    if (it == nodes_.end() || it->second != leaf || t.level >= max_level_) continue;
    auto lv = across(t, &nb);
    int hanging = 0;
    bool must = false;
    for (int e = 0; e < 3; ++e) {
      if (lv[e][0] > t.level || lv[e][1] > t.level) ++hanging;
      if (lv[e][0] >= t.level + 2 || lv[e][1] >= t.level + 2) must = true;
    }
    if (!must && hanging < 2) continue;
    split_leaf(t);
    for (const auto& c : lattice_children(t)) work.push_back(c);
    for (const auto& n : nb)
      if (n.level >= 0 && n.level <= t.level) work.push_back(n);
  }
}

LatticeMesh GradedLattice::extract(const std::function<bool(const std::array<Vec2, 3>&)>& keep) const {
  std::vector<LatticeTri> all;
  for (const auto& [k, v] : nodes_)
    if (v == leaf) all.push_back(k);
  std::sort(all.begin(), all.end(), key_less);

  LatticeMesh out;
  std::unordered_map<std::array<int64_t, 2>, int, PairHash> ids;
  const double sm = side(max_level_);
  auto vid = [&](std::array<int64_t, 2> k) {
    auto [it, fresh] = ids.emplace(k, static_cast<int>(out.keys.size()));
    if (fresh) {
      out.keys.push_back(k);
      double i = static_cast<double>(k[0]), j = static_cast<double>(k[1]);
      out.mesh.vertices.push_back({(i + 0.5 * j) * sm, j * kH * sm});
    }
    return it->second;
  };
  auto pos = [&](std::array<int64_t, 2> k) {
    double i = static_cast<double>(k[0]), j = static_cast<double>(k[1]);
    return Vec2{(i + 0.5 * j) * sm, j * kH * sm};
  };
  auto emit = [&](std::array<std::array<int64_t, 2>, 3> k, int level, bool green) {
    if (keep && !keep({pos(k[0]), pos(k[1]), pos(k[2])})) return;
    out.mesh.faces.push_back({vid(k[0]), vid(k[1]), vid(k[2])});
    out.level.push_back(level);
    out.green.push_back(green ? 1 : 0);
  };

  for (const auto& t : all) {
    const int sh = max_level_ - t.level;
    auto ck = corner_keys(t);
    for (auto& c : ck) c = {c[0] << sh, c[1] << sh};
    int hang = -1, count = 0;
    if (t.level < max_level_) {
      auto lv = across(t, nullptr);
      for (int e = 0; e < 3; ++e)
        if (lv[e][0] > t.level) hang = e, ++count;
    }
    if (count > 1) fail(Status::internal, "lattice leaf left with two hanging midpoints");
    if (count == 0) {
      emit(ck, t.level, false);
      continue;
    }
    auto a = ck[hang], b = ck[(hang + 1) % 3], c = ck[(hang + 2) % 3];
    std::array<int64_t, 2> m{(a[0] + b[0]) / 2, (a[1] + b[1]) / 2};
    emit({a, m, c}, t.level, true);
    emit({m, b, c}, t.level, true);
  }
  return out;
}

}  // namespace qcmesh
