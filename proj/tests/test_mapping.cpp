#include <catch_amalgamated.hpp>

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "seqnav/mapping.hpp"
#include "seqnav/scene.hpp"
#include "test_util.hpp"

using namespace seqnav;

namespace {

EgoCrop patterned_crop() {
  EgoCrop crop;
  crop.occ = Tensor({1, kCropSize, kCropSize});
  crop.sem = Tensor({static_cast<std::size_t>(kSemanticClassCount), kCropSize, kCropSize});
  for (int r = 0; r < kCropSize; ++r)
    for (int c = 0; c < kCropSize; ++c) {
      crop.occ(0, r, c) = ((r * 31 + c * 7) % 3) * 0.5;  // cycles through 0, 0.5, 1
      for (int ch = 0; ch < kSemanticClassCount; ++ch)
        crop.sem(ch, r, c) = (ch + r + c) % 5 == 0 ? 1.0 : 0.0;
    }
  return crop;
}

// A single forward-facing depth ray: fov 0 collapses the fan to bearing 0.
const SensorConfig kSingleRay{0.0, 2.0, 5.0};

}  // namespace

TEST_CASE("tensor indexing and manifest round trip") {
  Tensor t3 = Tensor::from_values({2, 2, 2}, {1, 2, 3, 4, 5, 6, 7, 8});
  CHECK(t3(0, 0, 0) == 1.0);
  CHECK(t3(0, 1, 1) == 4.0);
  CHECK(t3(1, 0, 1) == 6.0);
  CHECK(t3(1, 1, 0) == 7.0);
  CHECK_THROWS_AS(t3(2, 0, 0), ContractViolation);
  CHECK_THROWS_AS(t3(0, 0), ContractViolation);  // wrong rank
  CHECK_THROWS_AS(Tensor::from_values({2, 3}, {1, 2, 3}), ContractViolation);

  TensorMap m;
  m["alpha"] = t3;
  m["beta"] = Tensor::from_values({3}, {0.1, -2.5e-17, 3e300});
  std::string json = tensors_to_json(m);
  TensorMap back = tensors_from_json(json);
  REQUIRE(back.size() == 2);
  CHECK(back["alpha"] == t3);
  CHECK(back["beta"] == m["beta"]);  // doubles survive the round trip exactly

  CHECK_THROWS_AS(tensors_from_json("{\"format\":\"other/9\",\"tensors\":[]}"), ParseError);
  CHECK_THROWS_AS(tensors_from_json("not json at all"), ParseError);
  CHECK_THROWS_AS(
      tensors_from_json("{\"format\":\"seqnav-tensors/1\",\"tensors\":[{\"name\":\"a\","
                        "\"shape\":[2],\"values\":[1.0]}]}"),
      ParseError);  // value count mismatch
  CHECK_THROWS_AS(
      tensors_from_json("{\"format\":\"seqnav-tensors/1\",\"tensors\":[{\"name\":\"a\","
                        "\"shape\":[1],\"values\":[1.0]},{\"name\":\"a\",\"shape\":[1],"
                        "\"values\":[2.0]}]}"),
      ParseError);  // duplicate name
  CHECK_THROWS_AS(
      tensors_from_json("{\"format\":\"seqnav-tensors/1\",\"tensors\":[{\"name\":\"a\","
                        "\"shape\":[1],\"values\":[null]}]}"),
      ParseError);  // non-numeric value
  CHECK_THROWS_AS(
      tensors_from_json("{\"format\":\"seqnav-tensors/1\",\"tensors\":[{\"name\":\"a\","
                        "\"shape\":[0],\"values\":[]}]}"),
      ParseError);  // zero dimension

  CHECK_THROWS_AS(manifest_tensor(m, "missing", {1}), ParseError);
  CHECK_THROWS_AS(manifest_tensor(m, "beta", {4}), ParseError);
  CHECK(manifest_tensor(m, "beta", {3}) == m["beta"]);
}

TEST_CASE("encoder stage reproduces the hand-computed fixture") {
  Tensor in = Tensor::from_values(
      {1, 4, 4}, {1, 2, -1, 0.5, 0, 3, 2.5, -2, 4, -0.5, 1.5, 1, -3, 2, 0, 2.5});

  CbraaBlockWeights bw;
  bw.conv_weight = Tensor({2, 1, 7, 7});
  bw.conv_weight(0, 0, 3, 3) = 1.0;   // identity tap
  bw.conv_weight(0, 0, 3, 4) = 0.5;   // right neighbour
  bw.conv_weight(1, 0, 3, 3) = -1.0;  // negated identity
  bw.conv_weight(1, 0, 2, 3) = 0.75;  // neighbour one row up
  bw.conv_bias = Tensor::from_values({2}, {0.25, -0.1});
  bw.bn_gamma = Tensor::from_values({2}, {2.0, 3.0});
  bw.bn_beta = Tensor::from_values({2}, {0.5, -0.2});
  bw.bn_mean = Tensor::from_values({2}, {1.0, 0.5});
  bw.bn_var = Tensor::from_values({2}, {4.0, 2.25});
  bw.bn_eps = 0.0;
  bw.att_weight = Tensor({1, 2, 7, 7});
  bw.att_weight(0, 0, 3, 3) = 1.0;   // channel-mean map
  bw.att_weight(0, 1, 3, 3) = -0.5;  // channel-max map
  bw.att_bias = 0.1;

  Tensor out = cbraa_forward(in, bw);
  REQUIRE(out.shape() == std::vector<std::size_t>{2, 2, 2});

  const double expected[2][2][2] = {
      {{1.0891967097172983, 0.21426899312884964},
       {0.8932074572998173, 0.7926094532013943}},
      {{0.01320238436020968, 0.5642416819059707},
       {2.500980880439489, 0.11716835395151044}}};
  for (int ch = 0; ch < 2; ++ch)
    for (int r = 0; r < 2; ++r)
      for (int c = 0; c < 2; ++c)
        CHECK(out(ch, r, c) == Catch::Approx(expected[ch][r][c]).margin(1e-9));
}

TEST_CASE("zero weights annihilate any input") {
  MapEncoderWeights w = MapEncoderWeights::zeros();
  MapEmbedding emb = encode_map(patterned_crop(), w);
  REQUIRE(emb.zm.shape() ==
          std::vector<std::size_t>{kEncoderOutputChannels, kEncoderOutputSpatial,
                                   kEncoderOutputSpatial});
  for (double v : emb.zm.values()) CHECK(v == 0.0);
}

TEST_CASE("identity batch-norm statistics leave activations unchanged") {
  Tensor t = Tensor::from_values({2, 1, 3}, {0.5, 1.25, 2.0, 0.125, 3.5, 0.75});
  Tensor keep = t;
  Tensor ones = Tensor::from_values({2}, {1.0, 1.0});
  Tensor zero2 = Tensor({2});
  detail::batch_norm_relu(t, ones, zero2, zero2, ones, 0.0);
  for (std::size_t i = 0; i < t.size(); ++i)
    CHECK(t.values()[i] == Catch::Approx(keep.values()[i]).margin(1e-6));

  Tensor neg = Tensor::from_values({2, 1, 1}, {-0.5, -3.0});
  detail::batch_norm_relu(neg, ones, zero2, zero2, ones, 0.0);
  CHECK(neg(0, 0, 0) == 0.0);  // rectification still applies
  CHECK(neg(1, 0, 0) == 0.0);

  Tensor bad = Tensor::from_values({1, 1, 1}, {1.0});
  Tensor one1 = Tensor::from_values({1}, {1.0});
  Tensor zero1 = Tensor({1});
  Tensor negvar = Tensor::from_values({1}, {-0.5});
  CHECK_THROWS_AS(detail::batch_norm_relu(bad, one1, zero1, zero1, negvar, 0.0),
                  ContractViolation);
}

TEST_CASE("encoder stages double channels and halve spatial extent") {
  MapEncoderWeights w = MapEncoderWeights::seeded(7);
  EgoCrop crop = patterned_crop();

  Tensor x({kEncoderInputChannels, kCropSize, kCropSize});
  const std::size_t plane = static_cast<std::size_t>(kCropSize) * kCropSize;
  std::copy_n(crop.occ.values().begin(), plane, x.values().begin());
  std::copy_n(crop.sem.values().begin(), plane * kSemanticClassCount,
              x.values().begin() + plane);

  x = detail::conv2d(x, w.stem_weight, w.stem_bias);
  CHECK(x.shape() == std::vector<std::size_t>{8, 64, 64});
  std::size_t ch = 16, side = 32;
  for (const auto& b : w.blocks) {
    x = cbraa_forward(x, b);
    CHECK(x.shape() == std::vector<std::size_t>{ch, side, side});
    ch *= 2;
    side /= 2;
  }
  CHECK(x.shape() == std::vector<std::size_t>{128, 4, 4});
}

TEST_CASE("seeded encoder is deterministic with finite output") {
  EgoCrop crop = patterned_crop();
  MapEncoderWeights w7 = MapEncoderWeights::seeded(7);
  MapEmbedding a = encode_map(crop, w7);
  MapEmbedding b = encode_map(crop, MapEncoderWeights::seeded(7));
  CHECK(a.zm == b.zm);
  for (double v : a.zm.values()) REQUIRE(std::isfinite(v));
  MapEmbedding c = encode_map(crop, MapEncoderWeights::seeded(8));
  CHECK(a.zm != c.zm);

  // Shape contracts on the way in.
  EgoCrop badcrop = crop;
  badcrop.occ = Tensor({1, 32, 32});
  CHECK_THROWS_AS(encode_map(badcrop, w7), ContractViolation);
}

TEST_CASE("a depth ray carves free cells and pins the wall it stopped at") {
  // One corridor row; the wall cell lies exactly 2 m (8 cells) ahead of the
  // agent cell, so the seven cells 0.25 m … 1.75 m ahead come back free and
  // the 2 m cell comes back blocked.
  Scene sc = scene_from_ascii({"##########",
                               "#........#",
                               "##########"});
  Pose pose{sc.cell_center(1, 1).x, sc.cell_center(1, 1).y, 0.0};
  Observation obs = observe(sc, pose, kSingleRay);
  REQUIRE(obs.depth_rays.size() == 1);
  REQUIRE(obs.depth_rays[0].hit_class == kClassStructure);

  TourMap map = integrate_observation(TourMap{}, obs);
  CHECK(map.state(1, 1) == CellState::Free);  // the agent's own cell
  for (int dx = 1; dx <= 7; ++dx) CHECK(map.state(1 + dx, 1) == CellState::Free);
  CHECK(map.state(9, 1) == CellState::Blocked);
  CHECK(map.sem_mask(9, 1) == (1u << kClassStructure));
  // A single forward ray says nothing about anything off its line.
  CHECK(map.state(5, 0) == CellState::Unknown);
  CHECK(map.state(5, 2) == CellState::Unknown);
  CHECK(map.state(10, 1) == CellState::Unknown);
  CHECK(map.known_cell_count() == 9);
}

TEST_CASE("re-integrating an observation is a no-op") {
  Scene sc = scene_from_ascii({"############",
                               "#..........#",
                               "#..aa......#",
                               "#..........#",
                               "############"});
  Pose pose{sc.cell_center(2, 2).x, sc.cell_center(2, 2).y, 30.0};
  Observation obs = observe(sc, pose);
  TourMap once = integrate_observation(TourMap{}, obs);
  TourMap twice = integrate_observation(once, obs);
  CHECK(once == twice);
  CHECK(twice.known_cell_count() == once.known_cell_count());
}

TEST_CASE("episode sweep grows the map monotonically and counts match a recount") {
  Scene sc = generate_scene(91);
  EpisodeOptions opts;
  opts.goal_landmarks = {0, 2};
  ReferenceEpisode ep = generate_reference_episode(sc, 91, 2, opts);

  TourMap map;
  std::int64_t prev_known = 0;
  bool checked_persistence = false;
  int probe_x = 0, probe_y = 0;
  CellState probe_state = CellState::Unknown;
  for (const Vec2& p : ep.path) {
    for (double heading : {0.0, 90.0, 180.0, 270.0}) {
      map = integrate_observation(std::move(map), observe(sc, {p.x, p.y, heading}));
      REQUIRE(map.known_cell_count() >= prev_known);
      prev_known = map.known_cell_count();
    }
    if (!checked_persistence) {
      // Remember one known cell from the first pose; later growth of the
      // stored window must not disturb it.
      probe_x = map.cell_of_x(p.x);
      probe_y = map.cell_of_y(p.y);
      probe_state = map.state(probe_x, probe_y);
      REQUIRE(probe_state == CellState::Free);
      checked_persistence = true;
    }
  }
  CHECK(map.state(probe_x, probe_y) == probe_state);

  // Independent recount of non-unknown cells across the stored window.
  std::int64_t recount = 0;
  for (int y = 0; y < map.height(); ++y)
    for (int x = 0; x < map.width(); ++x) {
      int ix = map.origin_cell_x() + x, iy = map.origin_cell_y() + y;
      CellState st = map.state(ix, iy);
      if (st != CellState::Unknown) ++recount;
      // Everything the map claims must agree with the world it observed.
      if (st == CellState::Free) CHECK(sc.free_cell(ix, iy));
      if (st == CellState::Blocked) CHECK_FALSE(sc.free_cell(ix, iy));
    }
  CHECK(recount == map.known_cell_count());
}

TEST_CASE("blank maps crop to uniform unknown") {
  TourMap map;
  Pose pose{10.0, -3.0, 45.0};
  EgoCrop crop = crop_ego(map, pose);
  REQUIRE(crop.occ.same_shape({1, kCropSize, kCropSize}));
  REQUIRE(crop.sem.same_shape(
      {static_cast<std::size_t>(kSemanticClassCount), kCropSize, kCropSize}));
  CHECK(crop.pose_used == pose);
  for (double v : crop.occ.values()) CHECK(v == kOccUnknownValue);
  for (double v : crop.sem.values()) CHECK(v == 0.0);
}

TEST_CASE("a wall one metre ahead lands four rows above the crop centre") {
  // 9×9 box, agent at the centre cell: every wall is exactly 4 cells away.
  Scene sc = scene_from_ascii({"#########",
                               "#.......#",
                               "#.......#",
                               "#.......#",
                               "#.......#",
                               "#.......#",
                               "#.......#",
                               "#.......#",
                               "#########"});
  Vec2 center = sc.cell_center(4, 4);
  TourMap map;
  for (double heading : {0.0, 90.0, 180.0, 270.0})
    map = integrate_observation(std::move(map), observe(sc, {center.x, center.y, heading}));

  for (double heading : {0.0, 90.0, 180.0, 270.0}) {
    EgoCrop crop = crop_ego(map, {center.x, center.y, heading});
    INFO("heading " << heading);
    CHECK(crop.occ(0, kCropCenter, kCropCenter) == kOccFreeValue);
    CHECK(crop.occ(0, kCropCenter - 4, kCropCenter) == kOccBlockedValue);  // dead ahead
    CHECK(crop.occ(0, kCropCenter + 4, kCropCenter) == kOccBlockedValue);  // behind
    CHECK(crop.occ(0, kCropCenter, kCropCenter + 4) == kOccBlockedValue);  // to the right
    CHECK(crop.occ(0, kCropCenter, kCropCenter - 4) == kOccBlockedValue);  // to the left
    CHECK(crop.occ(0, kCropCenter - 3, kCropCenter) == kOccFreeValue);
    CHECK(crop.sem(kClassStructure, kCropCenter - 4, kCropCenter) == 1.0);
    for (int ch = 0; ch < kSemanticClassCount; ++ch)
      if (ch != kClassStructure) CHECK(crop.sem(ch, kCropCenter - 4, kCropCenter) == 0.0);
  }
}

TEST_CASE("crops at cardinal headings are exact rotations of each other") {
  Scene sc = scene_from_ascii({"############",
                               "#....#.....#",
                               "#....#..bb.#",
                               "#..........#",
                               "#.cc.......#",
                               "############"});
  Vec2 at = sc.cell_center(3, 3);
  TourMap map;
  for (double heading : {0.0, 90.0, 180.0, 270.0})
    map = integrate_observation(std::move(map), observe(sc, {at.x, at.y, heading}));

  EgoCrop c0 = crop_ego(map, {at.x, at.y, 0.0});
  EgoCrop c90 = crop_ego(map, {at.x, at.y, 90.0});
  // Turning the agent 90° left turns the crop content 90° clockwise about the
  // agent cell: (r, c) in the 90° crop reads (64−c, r) in the 0° crop.
  for (int r = 0; r < kCropSize; ++r)
    for (int c = 1; c < kCropSize; ++c) {
      int r2 = kCropSize - c, c2 = r;
      REQUIRE(c90.occ(0, r, c) == c0.occ(0, r2, c2));
      REQUIRE(c90.sem(kClassStructure, r, c) == c0.sem(kClassStructure, r2, c2));
    }
}

TEST_CASE("map snapshots export as a graymap plus metadata") {
  Scene sc = scene_from_ascii({"########",
                               "#......#",
                               "#......#",
                               "########"});
  Vec2 at = sc.cell_center(3, 1);
  TourMap map;
  for (double heading : {0.0, 90.0, 180.0, 270.0})
    map = integrate_observation(std::move(map), observe(sc, {at.x, at.y, heading}));

  std::string pgm = map_to_pgm(map);
  std::istringstream in(pgm);
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  in >> magic >> w >> h >> maxval;
  CHECK(magic == "P2");
  CHECK(w == map.width());
  CHECK(h == map.height());
  CHECK(maxval == 255);
  int pixel = 0, count = 0, free_px = 0, blocked_px = 0;
  while (in >> pixel) {
    ++count;
    CHECK((pixel == 0 || pixel == 128 || pixel == 255));
    if (pixel == 255) ++free_px;
    if (pixel == 0) ++blocked_px;
  }
  CHECK(count == w * h);
  CHECK(free_px + blocked_px == map.known_cell_count());

  nlohmann::json meta = nlohmann::json::parse(map_meta_json(map));
  CHECK(meta["format"] == kMapSnapshotFormat);
  CHECK(meta["width"] == map.width());
  CHECK(meta["height"] == map.height());
  CHECK(meta["known_cells"] == map.known_cell_count());
  CHECK(meta["free_cells"].get<std::int64_t>() + meta["blocked_cells"].get<std::int64_t>() ==
        map.known_cell_count());
  CHECK(meta["resolution"] == map.resolution());
}

TEST_CASE("encoder weight manifests round trip and reject bad shapes") {
  MapEncoderWeights w = MapEncoderWeights::seeded(42);
  EgoCrop crop = patterned_crop();
  MapEmbedding before = encode_map(crop, w);

  std::string json = map_encoder_weights_to_json(w);
  MapEncoderWeights back = map_encoder_weights_from_json(json);
  MapEmbedding after = encode_map(crop, back);
  CHECK(before.zm == after.zm);  // weights survived serialization exactly

  TensorMap t = map_encoder_weights_to_tensors(w);
  TensorMap missing = t;
  missing.erase("block2.bn.var");
  CHECK_THROWS_AS(map_encoder_weights_from_tensors(missing), ParseError);

  TensorMap badshape = t;
  badshape["stem.weight"] = Tensor({3, 3});
  CHECK_THROWS_AS(map_encoder_weights_from_tensors(badshape), ParseError);

  TensorMap badvar = t;
  Tensor var = badvar["block0.bn.var"];
  var(0) = -2.0;
  badvar["block0.bn.var"] = var;
  badvar["block0.bn.eps"] = Tensor::from_values({1}, {0.0});
  CHECK_THROWS_AS(map_encoder_weights_from_tensors(badvar), ParseError);
}
