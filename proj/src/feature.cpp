#include "ovis/feature.hpp"

#include <algorithm>
#include <bit>
#include <random>

namespace ovis {

int hamming_distance(const Descriptor& a, const Descriptor& b) {
  int d = 0;
  for (int i = 0; i < 4; ++i) d += std::popcount(a.bits[i] ^ b.bits[i]);
  return d;
}

namespace {

// Fixed comparison pattern shared by all descriptors.
struct Pattern {
  std::array<std::array<int8_t, 4>, 256> pairs;  // x1,y1,x2,y2 in [-7,7]
  Pattern() {
    std::mt19937 rng(0x5eed);
    std::uniform_int_distribution<int> off(-7, 7);
    for (auto& p : pairs) {
      p = {int8_t(off(rng)), int8_t(off(rng)), int8_t(off(rng)), int8_t(off(rng))};
    }
  }
};

const Pattern& pattern() {
  static Pattern p;
  return p;
}

float smoothed(const ImageF& img, int x, int y) {
  float s = 0;
  for (int dy = -1; dy <= 1; ++dy)
    for (int dx = -1; dx <= 1; ++dx)
      s += img.at(std::clamp(x + dx, 0, img.width - 1), std::clamp(y + dy, 0, img.height - 1));
  return s / 9.f;
}

}  // namespace

std::vector<Feature> extract_features(const RgbdFrame& frame, const CameraModel& cam,
                                      const FeatureConfig& cfg) {
  const ImageF& I = frame.intensity;
  const int w = I.width, h = I.height;
  const int margin = 9;

  // Shi-Tomasi min-eigenvalue response from central-difference gradients.
  ImageF gx(w, h, 0.f), gy(w, h, 0.f);
  for (int y = 1; y + 1 < h; ++y) {
    for (int x = 1; x + 1 < w; ++x) {
      gx.at(x, y) = 0.5f * (I.at(x + 1, y) - I.at(x - 1, y));
      gy.at(x, y) = 0.5f * (I.at(x, y + 1) - I.at(x, y - 1));
    }
  }
  ImageF score(w, h, 0.f);
  for (int y = margin; y + margin < h; ++y) {
    for (int x = margin; x + margin < w; ++x) {
      double a = 0, b = 0, c = 0;
      for (int dy = -2; dy <= 2; ++dy) {
        for (int dx = -2; dx <= 2; ++dx) {
          double ix = gx.at(x + dx, y + dy), iy = gy.at(x + dx, y + dy);
          a += ix * ix;
          b += ix * iy;
          c += iy * iy;
        }
      }
      double tr = a + c;
      double det = a * c - b * b;
      double disc = std::sqrt(std::max(tr * tr / 4 - det, 0.0));
      score.at(x, y) = float(tr / 2 - disc);
    }
  }

  struct Cand {
    int x, y;
    float s;
  };
  std::vector<Cand> cands;
  for (int y = margin; y + margin < h; ++y) {
    for (int x = margin; x + margin < w; ++x) {
      float s = score.at(x, y);
      if (s < cfg.min_score) continue;
      bool is_max = true;
      for (int dy = -2; dy <= 2 && is_max; ++dy)
        for (int dx = -2; dx <= 2; ++dx) {
          if (dx == 0 && dy == 0) continue;
          float sn = score.at(x + dx, y + dy);
          if (sn > s || (sn == s && (dy < 0 || (dy == 0 && dx < 0)))) {
            is_max = false;
            break;
          }
        }
      if (is_max) cands.push_back({x, y, s});
    }
  }

  // Grid bucketing, then global top-up to the budget.
  auto by_score = [](const Cand& a, const Cand& b) {
    if (a.s != b.s) return a.s > b.s;
    if (a.y != b.y) return a.y < b.y;
    return a.x < b.x;
  };
  std::sort(cands.begin(), cands.end(), by_score);
  int per_cell = std::max(1, cfg.budget / (cfg.grid * cfg.grid));
  std::vector<int> cell_count(cfg.grid * cfg.grid, 0);
  std::vector<Cand> picked, overflow;
  ImageU8 taken(w, h, 0);
  for (const Cand& cd : cands) {
    bool clear = true;
    for (int dy = -cfg.nms_radius; dy <= cfg.nms_radius && clear; ++dy)
      for (int dx = -cfg.nms_radius; dx <= cfg.nms_radius; ++dx) {
        int nx = cd.x + dx, ny = cd.y + dy;
        if (taken.inside(nx, ny) && taken.at(nx, ny)) {
          clear = false;
          break;
        }
      }
    if (!clear) continue;
    int cell = (cd.y * cfg.grid / h) * cfg.grid + (cd.x * cfg.grid / w);
    if (cell_count[cell] < per_cell) {
      picked.push_back(cd);
      ++cell_count[cell];
      taken.at(cd.x, cd.y) = 1;
    } else {
      overflow.push_back(cd);
    }
  }
  for (const Cand& cd : overflow) {
    if (int(picked.size()) >= cfg.budget) break;
    picked.push_back(cd);
  }
  if (int(picked.size()) > cfg.budget) picked.resize(cfg.budget);

  std::vector<Feature> out;
  out.reserve(picked.size());
  for (const Cand& cd : picked) {
    Feature f;
    f.kp.u = cd.x;
    f.kp.v = cd.y;
    f.score = cd.s;
    double d = frame.depth.at(cd.x, cd.y);
    if (d > 0) {
      f.has_depth = true;
      f.kp.d = d;
      f.kp.ur = cd.x - cam.fx * cam.baseline / d;
    }
    const Pattern& pat = pattern();
    for (int i = 0; i < 256; ++i) {
      const auto& p = pat.pairs[i];
      if (smoothed(I, cd.x + p[0], cd.y + p[1]) < smoothed(I, cd.x + p[2], cd.y + p[3])) {
        f.desc.bits[i / 64] |= (1ull << (i % 64));
      }
    }
    out.push_back(f);
  }
  return out;
}

}  // namespace ovis
