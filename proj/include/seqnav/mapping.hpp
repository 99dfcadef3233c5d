#pragma once

// Persistent per-tour occupancy/semantic mapping: depth-ray integration into a
// world-anchored auto-growing grid, egocentric heading-up crops, and a small
// convolutional encoder that turns a crop into a fixed-size embedding.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "seqnav/errors.hpp"
#include "seqnav/geometry.hpp"
#include "seqnav/rng.hpp"
#include "seqnav/scene.hpp"
#include "seqnav/tensor.hpp"

namespace seqnav {

enum class CellState : std::uint8_t { Unknown = 0, Free = 1, Blocked = 2 };

inline constexpr int kCropSize = 64;
inline constexpr int kCropCenter = 32;  // agent cell (row, col) in a crop
inline constexpr int kEncoderInputChannels = 1 + kSemanticClassCount;  // occ + sem
inline constexpr int kEncoderStemChannels = 8;
inline constexpr int kEncoderBlockCount = 4;
inline constexpr int kEncoderOutputChannels = 128;
inline constexpr int kEncoderOutputSpatial = 4;
inline constexpr int kEncoderKernel = 7;

// Crop encoding of occupancy states: neutral mid-value for unexplored space.
inline constexpr double kOccBlockedValue = 0.0;
inline constexpr double kOccUnknownValue = 0.5;
inline constexpr double kOccFreeValue = 1.0;

/**
 * World-anchored occupancy + semantic grid accumulated over a whole tour.
 *
 * Cells live on the same lattice as the scene grid (cell index =
 * floor(coordinate / resolution)); the stored window auto-grows to cover
 * whatever gets marked. Knowledge is monotone: an unknown cell can become
 * free or blocked, a free cell can be upgraded to blocked (blocked wins),
 * and nothing ever reverts to unknown. Semantic bits only accumulate, and
 * only blocked cells carry them.
 */
class TourMap {
 public:
  explicit TourMap(double resolution = kDefaultResolution) : resolution_(resolution) {
    detail::require(resolution > 0.0, "TourMap: resolution must be positive");
  }

  double resolution() const { return resolution_; }
  int width() const { return width_; }
  int height() const { return height_; }
  int origin_cell_x() const { return origin_cx_; }
  int origin_cell_y() const { return origin_cy_; }
  std::int64_t known_cell_count() const { return known_; }

  bool in_bounds(int ix, int iy) const {
    return width_ > 0 && ix >= origin_cx_ && iy >= origin_cy_ &&
           ix < origin_cx_ + width_ && iy < origin_cy_ + height_;
  }

  // Queries take world-lattice cell indices; anything outside the stored
  // window reads as unknown.
  CellState state(int ix, int iy) const {
    if (!in_bounds(ix, iy)) return CellState::Unknown;
    return static_cast<CellState>(occ_[local_index(ix, iy)]);
  }
  std::uint16_t sem_mask(int ix, int iy) const {
    if (!in_bounds(ix, iy)) return 0;
    return sem_[local_index(ix, iy)];
  }
  int cell_of_x(double wx) const { return static_cast<int>(std::floor(wx / resolution_)); }
  int cell_of_y(double wy) const { return static_cast<int>(std::floor(wy / resolution_)); }
  CellState state_at(Vec2 p) const { return state(cell_of_x(p.x), cell_of_y(p.y)); }

  // Low-level cell updates. Marking free never downgrades a blocked cell;
  // marking blocked always wins and records the cell's semantic class bit.
  void mark_free(int ix, int iy) {
    ensure_box(ix, iy, ix, iy);
    std::uint8_t& cell = occ_[local_index(ix, iy)];
    if (cell == static_cast<std::uint8_t>(CellState::Unknown)) {
      cell = static_cast<std::uint8_t>(CellState::Free);
      ++known_;
    }
  }
  void mark_blocked(int ix, int iy, int class_id) {
    detail::require(class_id >= 0 && class_id < kSemanticClassCount,
                    "TourMap::mark_blocked: class id out of range");
    ensure_box(ix, iy, ix, iy);
    std::size_t i = local_index(ix, iy);
    if (occ_[i] == static_cast<std::uint8_t>(CellState::Unknown)) ++known_;
    occ_[i] = static_cast<std::uint8_t>(CellState::Blocked);
    sem_[i] = static_cast<std::uint16_t>(sem_[i] | (1u << class_id));
  }

  // Grows the stored window (with padding) to cover the inclusive cell box.
  void ensure_box(int x0, int y0, int x1, int y1) {
    if (width_ == 0) {
      origin_cx_ = x0 - kGrowPad;
      origin_cy_ = y0 - kGrowPad;
      width_ = (x1 - x0 + 1) + 2 * kGrowPad;
      height_ = (y1 - y0 + 1) + 2 * kGrowPad;
      occ_.assign(static_cast<std::size_t>(width_) * height_, 0);
      sem_.assign(static_cast<std::size_t>(width_) * height_, 0);
      return;
    }
    int nx0 = origin_cx_, ny0 = origin_cy_;
    int nx1 = origin_cx_ + width_ - 1, ny1 = origin_cy_ + height_ - 1;
    bool grow = false;
    if (x0 < nx0) { nx0 = x0 - kGrowPad; grow = true; }
    if (y0 < ny0) { ny0 = y0 - kGrowPad; grow = true; }
    if (x1 > nx1) { nx1 = x1 + kGrowPad; grow = true; }
    if (y1 > ny1) { ny1 = y1 + kGrowPad; grow = true; }
    if (!grow) return;

    int nw = nx1 - nx0 + 1, nh = ny1 - ny0 + 1;
    std::vector<std::uint8_t> nocc(static_cast<std::size_t>(nw) * nh, 0);
    std::vector<std::uint16_t> nsem(static_cast<std::size_t>(nw) * nh, 0);
    int dx = origin_cx_ - nx0, dy = origin_cy_ - ny0;
    for (int y = 0; y < height_; ++y) {
      std::size_t src = static_cast<std::size_t>(y) * width_;
      std::size_t dst = static_cast<std::size_t>(y + dy) * nw + dx;
      std::copy_n(occ_.begin() + src, width_, nocc.begin() + dst);
      std::copy_n(sem_.begin() + src, width_, nsem.begin() + dst);
    }
    occ_ = std::move(nocc);
    sem_ = std::move(nsem);
    origin_cx_ = nx0;
    origin_cy_ = ny0;
    width_ = nw;
    height_ = nh;
  }

  friend bool operator==(const TourMap& a, const TourMap& b) {
    return a.resolution_ == b.resolution_ && a.origin_cx_ == b.origin_cx_ &&
           a.origin_cy_ == b.origin_cy_ && a.width_ == b.width_ &&
           a.height_ == b.height_ && a.known_ == b.known_ && a.occ_ == b.occ_ &&
           a.sem_ == b.sem_;
  }
  friend bool operator!=(const TourMap& a, const TourMap& b) { return !(a == b); }

 private:
  static constexpr int kGrowPad = 8;

  std::size_t local_index(int ix, int iy) const {
    return static_cast<std::size_t>(iy - origin_cy_) * width_ + (ix - origin_cx_);
  }

  double resolution_;
  int origin_cx_ = 0, origin_cy_ = 0;
  int width_ = 0, height_ = 0;
  std::int64_t known_ = 0;
  std::vector<std::uint8_t> occ_;
  std::vector<std::uint16_t> sem_;
};

namespace detail {

// Tolerance separating "cell crossed strictly before the hit" from the hit
// cell itself when re-walking a depth ray.
inline constexpr double kRayBoundaryEps = 1e-9;

// Walks the world cell lattice along one depth ray using the same boundary
// arithmetic as the scene ray caster, so the cell entered at the reported hit
// range is exactly the cell the sensor stopped at.
inline void integrate_ray(TourMap& m, const Pose& pose, const DepthRay& ray) {
  const double res = m.resolution();
  Vec2 origin{pose.x, pose.y};
  Vec2 dir = heading_vector(pose.heading + ray.bearing_deg);
  int cx = m.cell_of_x(origin.x);
  int cy = m.cell_of_y(origin.y);
  m.mark_free(cx, cy);  // the sensing pose itself sits on free space

  int step_x = dir.x > 0 ? 1 : (dir.x < 0 ? -1 : 0);
  int step_y = dir.y > 0 ? 1 : (dir.y < 0 ? -1 : 0);
  double inf = std::numeric_limits<double>::infinity();
  auto boundary_t = [&](double o, double d, int c, int step) {
    if (step == 0) return inf;
    double edge = (step > 0 ? (c + 1) : c) * res;
    return (edge - o) / d;
  };
  double t_max_x = boundary_t(origin.x, dir.x, cx, step_x);
  double t_max_y = boundary_t(origin.y, dir.y, cy, step_y);
  double t_delta_x = step_x != 0 ? res / std::abs(dir.x) : inf;
  double t_delta_y = step_y != 0 ? res / std::abs(dir.y) : inf;

  const bool hit = ray.hit_class >= 0;
  const double limit = ray.hit_range_m;
  for (;;) {
    double t;
    if (t_max_x <= t_max_y) {
      t = t_max_x;
      cx += step_x;
      t_max_x += t_delta_x;
    } else {
      t = t_max_y;
      cy += step_y;
      t_max_y += t_delta_y;
    }
    if (hit) {
      if (t < limit - kRayBoundaryEps) {
        m.mark_free(cx, cy);
        continue;
      }
      // When the ray stops exactly on a lattice corner, two cells are entered
      // at the stopping range and the ray alone cannot tell which one stopped
      // it. Leave both for rays that cross the wall at a clean angle.
      if (std::min(t_max_x, t_max_y) - t < kRayBoundaryEps) return;
      m.mark_blocked(cx, cy, ray.hit_class);
      return;
    }
    if (t > limit) return;  // free space confirmed out to the sensing range
    m.mark_free(cx, cy);
  }
}

}  // namespace detail

/**
 * Projects every depth ray of an observation into the map: cells crossed
 * before a ray's stopping range become free, the cell a ray stopped at becomes
 * blocked and gains that ray's semantic class bit. Re-integrating the same
 * observation is a no-op; knowledge never regresses.
 *
 * The map's resolution must match the grid the observation was sensed on for
 * hit cells to land exactly.
 */
inline TourMap integrate_observation(TourMap map, const Observation& obs) {
  double reach = 0.0;
  for (const DepthRay& r : obs.depth_rays) reach = std::max(reach, r.hit_range_m);
  int pcx = map.cell_of_x(obs.pose.x);
  int pcy = map.cell_of_y(obs.pose.y);
  int span = static_cast<int>(std::ceil(reach / map.resolution())) + 2;
  map.ensure_box(pcx - span, pcy - span, pcx + span, pcy + span);
  for (const DepthRay& r : obs.depth_rays) detail::integrate_ray(map, obs.pose, r);
  return map;
}

/**
 * Egocentric 64×64 window of the map: the pose's cell lands at (row 32,
 * col 32) and the pose heading points toward row 0 ("up"). Occupancy encodes
 * blocked/unknown/free as 0 / 0.5 / 1; each semantic channel is a 0/1 mask.
 */
struct EgoCrop {
  Tensor occ;  // {1, 64, 64}
  Tensor sem;  // {13, 64, 64}
  Pose pose_used;
};

inline EgoCrop crop_ego(const TourMap& map, const Pose& pose) {
  EgoCrop crop;
  crop.pose_used = pose;
  crop.occ = Tensor({1, kCropSize, kCropSize});
  crop.sem = Tensor({static_cast<std::size_t>(kSemanticClassCount), kCropSize, kCropSize});
  const Vec2 fwd = heading_vector(pose.heading);
  const Vec2 right = heading_vector(pose.heading - 90.0);
  const double res = map.resolution();
  for (int r = 0; r < kCropSize; ++r) {
    for (int c = 0; c < kCropSize; ++c) {
      double f = static_cast<double>(kCropCenter - r);  // cells ahead of the agent
      double s = static_cast<double>(c - kCropCenter);  // cells to the agent's right
      double wx = pose.x + (f * fwd.x + s * right.x) * res;
      double wy = pose.y + (f * fwd.y + s * right.y) * res;
      int ix = map.cell_of_x(wx);
      int iy = map.cell_of_y(wy);
      CellState st = map.state(ix, iy);
      crop.occ(0, r, c) = st == CellState::Blocked
                              ? kOccBlockedValue
                              : (st == CellState::Free ? kOccFreeValue : kOccUnknownValue);
      std::uint16_t mask = map.sem_mask(ix, iy);
      for (int ch = 0; ch < kSemanticClassCount; ++ch)
        crop.sem(ch, r, c) = (mask >> ch) & 1u ? 1.0 : 0.0;
    }
  }
  return crop;
}

// ---------------------------------------------------------------------------
// Crop encoder: a 1×1 stem projection followed by four stages of
// [conv 7×7 (channels ×2) → batch-norm (inference) → ReLU → 2×2 average pool
// → spatial attention gate], taking 14×64×64 down to 128×4×4.
// ---------------------------------------------------------------------------

struct CbraaBlockWeights {
  Tensor conv_weight;  // {out, in, 7, 7}
  Tensor conv_bias;    // {out}
  Tensor bn_gamma;     // {out}
  Tensor bn_beta;      // {out}
  Tensor bn_mean;      // {out}
  Tensor bn_var;       // {out}
  double bn_eps = 0.0;
  Tensor att_weight;  // {1, 2, 7, 7}: channel-mean map, channel-max map → gate logit
  double att_bias = 0.0;
};

struct MapEncoderWeights {
  Tensor stem_weight;  // {8, 14, 1, 1}
  Tensor stem_bias;    // {8}
  std::array<CbraaBlockWeights, kEncoderBlockCount> blocks;

  // All-zero conv/attention weights with identity batch-norm statistics:
  // annihilates any input (useful as a structural baseline).
  static MapEncoderWeights zeros() { return filled(nullptr); }

  // Deterministic small random conv/attention weights (identity batch-norm),
  // for shape and invariance checks; this artifact ships no trained weights.
  static MapEncoderWeights seeded(std::uint64_t seed) {
    Rng rng(seed);
    return filled(&rng);
  }

 private:
  static MapEncoderWeights filled(Rng* rng) {
    auto fill = [&](Tensor& t) {
      if (rng)
        for (double& v : t.values()) v = 0.05 * rng->gaussian();
    };
    MapEncoderWeights w;
    w.stem_weight = Tensor({kEncoderStemChannels, kEncoderInputChannels, 1, 1});
    fill(w.stem_weight);
    w.stem_bias = Tensor({kEncoderStemChannels});
    std::size_t ch = kEncoderStemChannels;
    for (auto& b : w.blocks) {
      std::size_t out = ch * 2;
      b.conv_weight = Tensor({out, ch, kEncoderKernel, kEncoderKernel});
      fill(b.conv_weight);
      b.conv_bias = Tensor({out});
      b.bn_gamma = Tensor::from_values({out}, std::vector<double>(out, 1.0));
      b.bn_beta = Tensor({out});
      b.bn_mean = Tensor({out});
      b.bn_var = Tensor::from_values({out}, std::vector<double>(out, 1.0));
      b.bn_eps = rng ? 1e-5 : 0.0;
      b.att_weight = Tensor({1, 2, kEncoderKernel, kEncoderKernel});
      fill(b.att_weight);
      b.att_bias = 0.0;
      ch = out;
    }
    return w;
  }
};

struct MapEmbedding {
  Tensor zm;  // {128, 4, 4}
};

namespace detail {

// Same-size convolution with zero padding. in {C,H,W}, w {O,C,k,k} (k odd),
// bias {O} or empty → {O,H,W}.
inline Tensor conv2d(const Tensor& in, const Tensor& w, const Tensor& bias) {
  require(in.rank() == 3 && w.rank() == 4, "conv2d: input must be rank 3, weight rank 4");
  const int C = static_cast<int>(in.shape()[0]);
  const int H = static_cast<int>(in.shape()[1]);
  const int W = static_cast<int>(in.shape()[2]);
  const int O = static_cast<int>(w.shape()[0]);
  const int K = static_cast<int>(w.shape()[2]);
  require(static_cast<int>(w.shape()[1]) == C, "conv2d: channel mismatch");
  require(static_cast<int>(w.shape()[3]) == K && K % 2 == 1,
          "conv2d: kernel must be square with odd size");
  require(bias.empty() || (bias.rank() == 1 && static_cast<int>(bias.shape()[0]) == O),
          "conv2d: bias shape mismatch");
  const int half = K / 2;
  Tensor out({static_cast<std::size_t>(O), static_cast<std::size_t>(H),
              static_cast<std::size_t>(W)});
  const double* ip = in.values().data();
  const double* wp = w.values().data();
  double* op = out.values().data();
  for (int o = 0; o < O; ++o) {
    const double b = bias.empty() ? 0.0 : bias(o);
    for (int r = 0; r < H; ++r) {
      const int kr0 = std::max(0, half - r), kr1 = std::min(K, H + half - r);
      for (int c = 0; c < W; ++c) {
        const int kc0 = std::max(0, half - c), kc1 = std::min(K, W + half - c);
        double acc = b;
        for (int ci = 0; ci < C; ++ci) {
          const double* iplane = ip + static_cast<std::size_t>(ci) * H * W;
          const double* wplane = wp + (static_cast<std::size_t>(o) * C + ci) * K * K;
          for (int kr = kr0; kr < kr1; ++kr) {
            const double* irow = iplane + static_cast<std::size_t>(r + kr - half) * W;
            const double* wrow = wplane + static_cast<std::size_t>(kr) * K;
            for (int kc = kc0; kc < kc1; ++kc) acc += irow[c - half + kc] * wrow[kc];
          }
        }
        op[(static_cast<std::size_t>(o) * H + r) * W + c] = acc;
      }
    }
  }
  return out;
}

// Inference-mode batch normalization followed by ReLU, applied in place.
inline void batch_norm_relu(Tensor& t, const Tensor& gamma, const Tensor& beta,
                            const Tensor& mean, const Tensor& var, double eps) {
  require(t.rank() == 3, "batch_norm_relu: input must be rank 3");
  const std::size_t C = t.shape()[0];
  require(gamma.same_shape({C}) && beta.same_shape({C}) && mean.same_shape({C}) &&
              var.same_shape({C}),
          "batch_norm_relu: parameter shape mismatch");
  const std::size_t plane = t.shape()[1] * t.shape()[2];
  for (std::size_t c = 0; c < C; ++c) {
    require(var(c) + eps > 0.0, "batch_norm_relu: variance plus epsilon must be positive");
    const double scale = gamma(c) / std::sqrt(var(c) + eps);
    const double shift = beta(c) - mean(c) * scale;
    double* p = t.values().data() + c * plane;
    for (std::size_t i = 0; i < plane; ++i) p[i] = std::max(0.0, p[i] * scale + shift);
  }
}

// Non-overlapping 2×2 mean pooling; spatial dimensions must be even.
inline Tensor avg_pool2(const Tensor& in) {
  require(in.rank() == 3, "avg_pool2: input must be rank 3");
  const std::size_t C = in.shape()[0], H = in.shape()[1], W = in.shape()[2];
  require(H % 2 == 0 && W % 2 == 0, "avg_pool2: spatial dimensions must be even");
  Tensor out({C, H / 2, W / 2});
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t r = 0; r < H / 2; ++r)
      for (std::size_t col = 0; col < W / 2; ++col)
        out(c, r, col) = 0.25 * (in(c, 2 * r, 2 * col) + in(c, 2 * r, 2 * col + 1) +
                                 in(c, 2 * r + 1, 2 * col) + in(c, 2 * r + 1, 2 * col + 1));
  return out;
}

// Spatial attention: per-position channel mean and max → 7×7 conv → logistic
// gate, multiplied into every channel in place.
inline void spatial_attention(Tensor& t, const Tensor& att_weight, double att_bias) {
  require(t.rank() == 3, "spatial_attention: input must be rank 3");
  require(att_weight.rank() == 4 && att_weight.shape()[0] == 1 && att_weight.shape()[1] == 2,
          "spatial_attention: weight must map two channel-pool maps to one gate");
  const std::size_t C = t.shape()[0], H = t.shape()[1], W = t.shape()[2];
  Tensor pooled({2, H, W});
  for (std::size_t r = 0; r < H; ++r) {
    for (std::size_t c = 0; c < W; ++c) {
      double sum = 0.0, mx = -std::numeric_limits<double>::infinity();
      for (std::size_t ch = 0; ch < C; ++ch) {
        double v = t(ch, r, c);
        sum += v;
        mx = std::max(mx, v);
      }
      pooled(0, r, c) = sum / static_cast<double>(C);
      pooled(1, r, c) = mx;
    }
  }
  Tensor bias = Tensor::from_values({1}, {att_bias});
  Tensor logits = conv2d(pooled, att_weight, bias);
  for (std::size_t r = 0; r < H; ++r)
    for (std::size_t c = 0; c < W; ++c) {
      double gate = 1.0 / (1.0 + std::exp(-logits(0, r, c)));
      for (std::size_t ch = 0; ch < C; ++ch) t(ch, r, c) *= gate;
    }
}

}  // namespace detail

// One encoder stage: conv 7×7 → batch-norm → ReLU → 2×2 average pool →
// spatial attention gate. Doubles channels, halves each spatial dimension.
inline Tensor cbraa_forward(const Tensor& in, const CbraaBlockWeights& bw) {
  Tensor x = detail::conv2d(in, bw.conv_weight, bw.conv_bias);
  detail::batch_norm_relu(x, bw.bn_gamma, bw.bn_beta, bw.bn_mean, bw.bn_var, bw.bn_eps);
  x = detail::avg_pool2(x);
  detail::spatial_attention(x, bw.att_weight, bw.att_bias);
  return x;
}

inline void validate_map_encoder_weights(const MapEncoderWeights& w) {
  using detail::require;
  require(w.stem_weight.same_shape({kEncoderStemChannels, kEncoderInputChannels, 1, 1}),
          "map encoder: stem weight must be {8,14,1,1}");
  require(w.stem_bias.same_shape({kEncoderStemChannels}), "map encoder: stem bias must be {8}");
  std::size_t ch = kEncoderStemChannels;
  for (const auto& b : w.blocks) {
    std::size_t out = ch * 2;
    require(b.conv_weight.same_shape({out, ch, kEncoderKernel, kEncoderKernel}),
            "map encoder: block conv weight shape mismatch");
    require(b.conv_bias.same_shape({out}), "map encoder: block conv bias shape mismatch");
    require(b.bn_gamma.same_shape({out}) && b.bn_beta.same_shape({out}) &&
                b.bn_mean.same_shape({out}) && b.bn_var.same_shape({out}),
            "map encoder: batch-norm parameter shape mismatch");
    for (std::size_t c = 0; c < out; ++c)
      require(b.bn_var(c) + b.bn_eps > 0.0,
              "map encoder: variance plus epsilon must be positive");
    require(b.att_weight.same_shape({1, 2, kEncoderKernel, kEncoderKernel}),
            "map encoder: attention weight shape mismatch");
    ch = out;
  }
  require(ch == kEncoderOutputChannels, "map encoder: channel progression must end at 128");
}

/**
 * Full crop-encoder forward pass: stack occupancy and semantic channels into a
 * 14×64×64 input, project to 8 channels with the 1×1 stem, then apply the four
 * doubling/halving stages. Output is always 128×4×4 with finite values.
 */
inline MapEmbedding encode_map(const EgoCrop& crop, const MapEncoderWeights& w) {
  using detail::require;
  require(crop.occ.same_shape({1, kCropSize, kCropSize}),
          "encode_map: occupancy crop must be {1,64,64}");
  require(crop.sem.same_shape(
              {static_cast<std::size_t>(kSemanticClassCount), kCropSize, kCropSize}),
          "encode_map: semantic crop must be {13,64,64}");
  validate_map_encoder_weights(w);

  Tensor x({kEncoderInputChannels, kCropSize, kCropSize});
  const std::size_t plane = static_cast<std::size_t>(kCropSize) * kCropSize;
  std::copy_n(crop.occ.values().begin(), plane, x.values().begin());
  std::copy_n(crop.sem.values().begin(), plane * kSemanticClassCount,
              x.values().begin() + plane);

  x = detail::conv2d(x, w.stem_weight, w.stem_bias);
  for (const auto& b : w.blocks) x = cbraa_forward(x, b);
  require(x.same_shape({kEncoderOutputChannels, kEncoderOutputSpatial, kEncoderOutputSpatial}),
          "encode_map: unexpected output shape");
  for (double v : x.values())
    require(std::isfinite(v), "encode_map: output must be finite");
  return MapEmbedding{std::move(x)};
}

// ---------------------------------------------------------------------------
// Weight (de)serialization via the tensor-manifest format.
// ---------------------------------------------------------------------------

inline TensorMap map_encoder_weights_to_tensors(const MapEncoderWeights& w) {
  TensorMap t;
  t["stem.weight"] = w.stem_weight;
  t["stem.bias"] = w.stem_bias;
  for (int i = 0; i < kEncoderBlockCount; ++i) {
    const auto& b = w.blocks[i];
    std::string p = "block" + std::to_string(i) + ".";
    t[p + "conv.weight"] = b.conv_weight;
    t[p + "conv.bias"] = b.conv_bias;
    t[p + "bn.gamma"] = b.bn_gamma;
    t[p + "bn.beta"] = b.bn_beta;
    t[p + "bn.mean"] = b.bn_mean;
    t[p + "bn.var"] = b.bn_var;
    t[p + "bn.eps"] = Tensor::from_values({1}, {b.bn_eps});
    t[p + "att.weight"] = b.att_weight;
    t[p + "att.bias"] = Tensor::from_values({1}, {b.att_bias});
  }
  return t;
}

inline MapEncoderWeights map_encoder_weights_from_tensors(const TensorMap& t) {
  MapEncoderWeights w;
  w.stem_weight =
      manifest_tensor(t, "stem.weight", {kEncoderStemChannels, kEncoderInputChannels, 1, 1});
  w.stem_bias = manifest_tensor(t, "stem.bias", {kEncoderStemChannels});
  std::size_t ch = kEncoderStemChannels;
  for (int i = 0; i < kEncoderBlockCount; ++i) {
    auto& b = w.blocks[i];
    std::size_t out = ch * 2;
    std::string p = "block" + std::to_string(i) + ".";
    b.conv_weight = manifest_tensor(t, p + "conv.weight", {out, ch, kEncoderKernel, kEncoderKernel});
    b.conv_bias = manifest_tensor(t, p + "conv.bias", {out});
    b.bn_gamma = manifest_tensor(t, p + "bn.gamma", {out});
    b.bn_beta = manifest_tensor(t, p + "bn.beta", {out});
    b.bn_mean = manifest_tensor(t, p + "bn.mean", {out});
    b.bn_var = manifest_tensor(t, p + "bn.var", {out});
    b.bn_eps = manifest_tensor(t, p + "bn.eps", {1})(0);
    b.att_weight = manifest_tensor(t, p + "att.weight", {1, 2, kEncoderKernel, kEncoderKernel});
    b.att_bias = manifest_tensor(t, p + "att.bias", {1})(0);
    ch = out;
  }
  for (int i = 0; i < kEncoderBlockCount; ++i) {
    const auto& b = w.blocks[i];
    for (std::size_t c = 0; c < b.bn_var.shape()[0]; ++c)
      if (!(b.bn_var(c) + b.bn_eps > 0.0))
        throw ParseError("map encoder weights: block " + std::to_string(i) +
                         " has non-positive variance plus epsilon");
  }
  return w;
}

inline std::string map_encoder_weights_to_json(const MapEncoderWeights& w) {
  return tensors_to_json(map_encoder_weights_to_tensors(w));
}

inline MapEncoderWeights map_encoder_weights_from_json(const std::string& text) {
  return map_encoder_weights_from_tensors(tensors_from_json(text));
}

// ---------------------------------------------------------------------------
// Debug snapshot export: portable graymap plus JSON metadata.
// ---------------------------------------------------------------------------

inline constexpr const char* kMapSnapshotFormat = "seqnav-mapsnap/1";

// ASCII PGM with the top row at the highest y, so the image matches a
// conventional top-down view. Blocked = 0, unknown = 128, free = 255.
inline std::string map_to_pgm(const TourMap& m) {
  std::string out = "P2\n" + std::to_string(m.width()) + " " + std::to_string(m.height()) +
                    "\n255\n";
  for (int y = m.height() - 1; y >= 0; --y) {
    for (int x = 0; x < m.width(); ++x) {
      CellState st = m.state(m.origin_cell_x() + x, m.origin_cell_y() + y);
      int v = st == CellState::Blocked ? 0 : (st == CellState::Free ? 255 : 128);
      out += std::to_string(v);
      out += x + 1 == m.width() ? '\n' : ' ';
    }
  }
  return out;
}

inline std::string map_meta_json(const TourMap& m) {
  std::int64_t free = 0, blocked = 0;
  for (int y = 0; y < m.height(); ++y)
    for (int x = 0; x < m.width(); ++x) {
      CellState st = m.state(m.origin_cell_x() + x, m.origin_cell_y() + y);
      if (st == CellState::Free) ++free;
      if (st == CellState::Blocked) ++blocked;
    }
  nlohmann::json j;
  j["format"] = kMapSnapshotFormat;
  j["resolution"] = m.resolution();
  j["origin_cell"] = {m.origin_cell_x(), m.origin_cell_y()};
  j["width"] = m.width();
  j["height"] = m.height();
  j["known_cells"] = m.known_cell_count();
  j["free_cells"] = free;
  j["blocked_cells"] = blocked;
  return j.dump();
}

}  // namespace seqnav
