#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "gradcheck.hpp"
#include "oracles.hpp"
#include "pfci/models.hpp"
#include "tmpdir.hpp"

using namespace pfci;

namespace {

NetConfig small_resnet() {
  NetConfig c;
  c.input_size = 16;
  c.depth = 2;
  c.base_width = 4;
  c.disc_base_width = 4;
  c.disc_receptive_field = 10;
  return c;
}

NetConfig small_unet() {
  NetConfig c;
  c.input_size = 16;
  c.depth = 2;
  c.base_width = 4;
  return c;
}

NetConfig small_pix2pix() {
  NetConfig c;
  c.input_size = 16;
  c.depth = 3;
  c.base_width = 4;
  c.disc_base_width = 4;
  c.disc_receptive_field = 10;
  return c;
}

TrainConfig quick(TrainConfig t, int epochs, std::uint64_t seed = 3) {
  t.epochs = epochs;
  t.seed = seed;
  return t;
}

FloatImage disk_image(int size, double cx, double cy, double r) {
  std::vector<double> px(static_cast<std::size_t>(size) * size);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      const double d = std::hypot(x - cx, y - cy);
      px[static_cast<std::size_t>(y) * size + x] = d < r ? 1.0 - d / (2 * r) : 0.0;
    }
  return FloatImage(size, size, std::move(px));
}

FloatImage pm1_noise(std::mt19937_64& rng, int size) { return normalize_pm1(oracle::random_image(rng, size, size)); }

void zero_tensors(Checkpoint& ck, const std::string& prefix) {
  for (auto& t : ck.tensors)
    if (t.name.rfind(prefix, 0) == 0) std::fill(t.data.begin(), t.data.end(), 0.0f);
}

NamedTensor& tensor_ref(Checkpoint& ck, const std::string& name) {
  for (auto& t : ck.tensors)
    if (t.name == name) return t;
  throw std::runtime_error("no tensor " + name);
}

}  // namespace

TEST(DiceLoss, ClosedForms) {
  const BinaryImage t(4, 4, {1, 1, 0, 0, 1, 1, 0, 0, 1, 1, 0, 0, 1, 1, 0, 0});
  EXPECT_LE(dice_loss(to_float(t), t), 1e-6);

  std::vector<double> inv(16);
  for (int i = 0; i < 16; ++i) inv[static_cast<std::size_t>(i)] = t.bits()[static_cast<std::size_t>(i)] ? 0.0 : 1.0;
  EXPECT_NEAR(dice_loss(FloatImage(4, 4, inv), t), 1.0, 1e-6);

  const double p = 16.0, eps = 1e-6;
  const double expected = 1.0 - (2 * 0.25 * p + eps) / (0.5 * p + 0.5 * p + eps);
  EXPECT_NEAR(dice_loss(FloatImage(4, 4, std::vector<double>(16, 0.5)), t), expected, 1e-12);
  EXPECT_NEAR(expected, 0.5, 1e-6);
}

TEST(DiceLoss, Errors) {
  const BinaryImage t(4, 4);
  EXPECT_THROW(dice_loss(FloatImage(4, 3), t), ShapeError);
  EXPECT_THROW(dice_loss(FloatImage(4, 4, std::vector<double>(16, 1.5)), t), RangeError);
}

TEST(Normalization, Pm1RangeAndAffineInvariance) {
  std::mt19937_64 rng(5);
  const FloatImage img = oracle::random_image(rng, 7, 5);
  const FloatImage n = normalize_pm1(img);
  const auto [lo, hi] = std::minmax_element(n.pixels().begin(), n.pixels().end());
  EXPECT_DOUBLE_EQ(*lo, -1.0);
  EXPECT_DOUBLE_EQ(*hi, 1.0);

  std::vector<double> shifted = oracle::pixels(img);
  for (auto& v : shifted) v = 3.0 * v - 11.0;
  const FloatImage n2 = normalize_pm1(FloatImage(7, 5, shifted));
  for (std::size_t i = 0; i < shifted.size(); ++i) EXPECT_NEAR(n.pixels()[i], n2.pixels()[i], 1e-12);

  const FloatImage c = normalize_pm1(FloatImage(3, 3, std::vector<double>(9, 4.0)));
  for (double v : c.pixels()) EXPECT_EQ(v, 0.0);

  const FloatImage u = pm1_to_unit(FloatImage(3, 1, {-1.0, 0.0, 1.0}));
  EXPECT_EQ(oracle::pixels(u), (std::vector<double>{0.0, 0.5, 1.0}));
}

TEST(Training, ZeroEpochsReturnsSeededInitialization) {
  std::mt19937_64 rng(1);
  const FloatImage a = pm1_noise(rng, 16), b = pm1_noise(rng, 16);
  const BinaryImage m = to_binary(a, 0.0);

  const TrainConfig tc = quick(cyclegan_train_defaults(), 0);
  const TrainResult cg = train_cyclegan({a}, {b}, small_resnet(), tc);
  EXPECT_EQ(cg.checkpoint.tensors, init_cyclegan_checkpoint(small_resnet(), tc).tensors);
  EXPECT_TRUE(cg.log.rows().empty());

  const TrainConfig tu = quick(unet_train_defaults(), 0);
  const TrainResult un = train_unet({{a}, {m}}, small_unet(), tu);
  EXPECT_EQ(un.checkpoint.tensors, init_unet_checkpoint(small_unet(), tu).tensors);

  const TrainConfig tp = quick(pix2pix_train_defaults(), 0);
  const TrainResult pp = train_pix2pix({{a}, {b}}, small_pix2pix(), tp);
  EXPECT_EQ(pp.checkpoint.tensors, init_pix2pix_checkpoint(small_pix2pix(), tp).tensors);
}

TEST(Training, DeterministicRerunsAreByteIdentical) {
  std::mt19937_64 rng(2);
  std::vector<FloatImage> a, b;
  for (int i = 0; i < 3; ++i) {
    a.push_back(pm1_noise(rng, 16));
    b.push_back(pm1_noise(rng, 16));
  }
  const TrainConfig tc = quick(cyclegan_train_defaults(), 2);
  const std::string first = serialize_checkpoint(train_cyclegan(a, b, small_resnet(), tc).checkpoint);
  const std::string second = serialize_checkpoint(train_cyclegan(a, b, small_resnet(), tc).checkpoint);
  EXPECT_EQ(first, second);

  TrainConfig other = tc;
  other.seed = 4;
  EXPECT_NE(first, serialize_checkpoint(train_cyclegan(a, b, small_resnet(), other).checkpoint));

  const TrainConfig tp = quick(pix2pix_train_defaults(), 2);
  EXPECT_EQ(serialize_checkpoint(train_pix2pix({a, b}, small_pix2pix(), tp).checkpoint),
            serialize_checkpoint(train_pix2pix({a, b}, small_pix2pix(), tp).checkpoint));
}

TEST(Training, LossLogHasOneRowPerEpochAndTerm) {
  std::mt19937_64 rng(3);
  const FloatImage a = pm1_noise(rng, 16);
  const BinaryImage m = to_binary(a, 0.0);
  const TrainResult r = train_unet({{a}, {m}}, small_unet(), quick(unet_train_defaults(), 4));
  EXPECT_EQ(r.log.rows().size(), 12u);
  for (const char* term : {"bce", "dice", "total"}) EXPECT_EQ(r.log.values(term).size(), 4u);
  for (const auto& row : r.log.rows()) EXPECT_TRUE(std::isfinite(row.value));

  const std::string csv = r.log.to_csv();
  EXPECT_EQ(csv.rfind("epoch,term,value\n", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 13);
}

TEST(Training, ValidationKeepsBestEpoch) {
  std::mt19937_64 rng(4);
  const FloatImage a = pm1_noise(rng, 16);
  const BinaryImage m = to_binary(a, 0.0);
  const SegmentationSet val{{a}, {m}};
  const TrainResult r = train_unet({{a}, {m}}, small_unet(), quick(unet_train_defaults(), 5), {}, &val);
  const auto v = r.log.values("val_total");
  ASSERT_EQ(v.size(), 5u);
  const int sel = r.checkpoint.meta.at("selected_epoch").get<int>();
  ASSERT_GE(sel, 0);
  if (sel > 0) {
    EXPECT_EQ(*std::min_element(v.begin(), v.end()), v[static_cast<std::size_t>(sel - 1)]);
  }
}

TEST(Training, EmptyOrMismatchedDataIsRejected) {
  std::mt19937_64 rng(5);
  const FloatImage a = pm1_noise(rng, 16);
  EXPECT_THROW(train_cyclegan({}, {a}, small_resnet(), quick(cyclegan_train_defaults(), 1)), DataError);
  EXPECT_THROW(train_unet({{a}, {}}, small_unet(), quick(unet_train_defaults(), 1)), DataError);
  EXPECT_THROW(train_pix2pix({{}, {}}, small_pix2pix(), quick(pix2pix_train_defaults(), 1)), DataError);
}

TEST(Training, DivergenceRaisesNumericError) {
  std::mt19937_64 rng(6);
  const FloatImage a = pm1_noise(rng, 16);
  const BinaryImage m = to_binary(a, 0.0);
  TrainConfig t = quick(unet_train_defaults(), 6);
  t.learning_rate = 1e38;
  EXPECT_THROW(train_unet({{a}, {m}}, small_unet(), t), NumericError);
}

TEST(Inference, DeterministicAndBounded) {
  std::mt19937_64 rng(7);
  const Checkpoint cg = init_cyclegan_checkpoint(small_resnet(), quick(cyclegan_train_defaults(), 0));
  const Checkpoint pp = init_pix2pix_checkpoint(small_pix2pix(), quick(pix2pix_train_defaults(), 0));
  for (int k = 0; k < 5; ++k) {
    const FloatImage x = pm1_noise(rng, 16);
    for (Direction d : {Direction::AtoB, Direction::BtoA}) {
      const FloatImage y1 = cyclegan_translate(cg, x, d);
      EXPECT_EQ(oracle::pixels(y1), oracle::pixels(cyclegan_translate(cg, x, d)));
      for (double v : y1.pixels()) EXPECT_TRUE(v >= -1.0 && v <= 1.0);
    }
    const FloatImage z = pix2pix_translate(pp, x);
    EXPECT_EQ(oracle::pixels(z), oracle::pixels(pix2pix_translate(pp, x)));
    for (double v : z.pixels()) EXPECT_TRUE(v >= -1.0 && v <= 1.0);
  }
  EXPECT_THROW(cyclegan_translate(cg, FloatImage(8, 8), Direction::AtoB), ShapeError);
  EXPECT_THROW(unet_segment(cg, FloatImage(16, 16)), FormatError);
}

TEST(Inference, ZeroedResidualBlocksPassFeaturesThrough) {
  NetConfig deep = small_resnet();
  deep.depth = 3;
  Checkpoint ck = init_cyclegan_checkpoint(deep, quick(cyclegan_train_defaults(), 0));
  for (int i = 0; i < deep.depth; ++i) {
    zero_tensors(ck, "G_AB/res" + std::to_string(i) + ".c2");
  }

  Checkpoint shallow = ck;
  shallow.net.depth = 0;
  std::erase_if(shallow.tensors, [](const NamedTensor& t) { return t.name.find("/res") != std::string::npos; });

  std::mt19937_64 rng(8);
  const FloatImage x = pm1_noise(rng, 16);
  EXPECT_EQ(oracle::pixels(cyclegan_translate(ck, x, Direction::AtoB)),
            oracle::pixels(cyclegan_translate(shallow, x, Direction::AtoB)));
  EXPECT_NE(oracle::pixels(cyclegan_translate(ck, x, Direction::BtoA)),
            oracle::pixels(cyclegan_translate(shallow, x, Direction::BtoA)));
}

TEST(Inference, ZeroedTranslatorEmitsHeadBiasActivation) {
  Checkpoint ck = init_pix2pix_checkpoint(small_pix2pix(), quick(pix2pix_train_defaults(), 0));
  zero_tensors(ck, "G/");
  tensor_ref(ck, "G/up0.b").data[0] = 0.3f;
  std::mt19937_64 rng(9);
  const FloatImage y = pix2pix_translate(ck, pm1_noise(rng, 16));
  for (double v : y.pixels()) EXPECT_NEAR(v, std::tanh(0.3), 1e-6);
}

TEST(Inference, ZeroLogitsSegmentEverything) {
  Checkpoint ck = init_unet_checkpoint(small_unet(), quick(unet_train_defaults(), 0));
  zero_tensors(ck, "S/head");
  std::mt19937_64 rng(10);
  const FloatImage x = pm1_noise(rng, 16);
  const UNetModel model(ck);
  for (const auto r = model.probabilities(x); double p : r.pixels()) EXPECT_EQ(p, 0.5);
  const BinaryImage m = model.segment(x);
  EXPECT_EQ(m.popcount(), 256u);
}

TEST(Checkpoint, RoundTripKeepsForwardPassBitwise) {
  TempDir dir;
  std::mt19937_64 rng(11);
  const FloatImage a = pm1_noise(rng, 16), b = pm1_noise(rng, 16);
  const Checkpoint ck = train_pix2pix({{a}, {b}}, small_pix2pix(), quick(pix2pix_train_defaults(), 2)).checkpoint;
  save_checkpoint((dir / "p.nnck").string(), ck);
  const Checkpoint back = load_checkpoint((dir / "p.nnck").string());
  EXPECT_EQ(back, ck);
  EXPECT_EQ(oracle::pixels(pix2pix_translate(back, a)), oracle::pixels(pix2pix_translate(ck, a)));
  const auto bytes = oracle::read_bytes(dir / "p.nnck");
  EXPECT_EQ(std::string(bytes.begin(), bytes.end()), serialize_checkpoint(ck));
}

TEST(Checkpoint, LayoutAndMalformedInput) {
  const Checkpoint ck = init_unet_checkpoint(small_unet(), quick(unet_train_defaults(), 0));
  const std::string bytes = serialize_checkpoint(ck);
  ASSERT_EQ(bytes.rfind("NNCK1\n", 0), 0u);
  const std::size_t eol = bytes.find('\n', 6);
  std::size_t floats = 0;
  for (const auto& t : ck.tensors) floats += t.numel();
  EXPECT_EQ(bytes.size() - eol - 1, floats * 4);
  const auto header = nlohmann::json::parse(bytes.substr(6, eol - 6));
  EXPECT_EQ(header.at("stage"), "unet");

  EXPECT_THROW(parse_checkpoint("NNCK2\n{}\n"), FormatError);
  EXPECT_THROW(parse_checkpoint("NNCK1\n{not json\n"), FormatError);
  EXPECT_THROW(parse_checkpoint(bytes.substr(0, bytes.size() - 4)), SizeMismatchError);
  EXPECT_THROW(parse_checkpoint(bytes + "xxxx"), SizeMismatchError);
  EXPECT_THROW(load_checkpoint("/nonexistent/x.nnck"), IoError);

  Checkpoint wrong = ck;
  wrong.net.base_width = 8;
  EXPECT_THROW(UNetModel{wrong}, ShapeError);
}

TEST(Overfit, SegmenterLearnsOneMask) {
  const FloatImage img = disk_image(16, 7.5, 8.0, 5.0);
  const BinaryImage mask = to_binary(img, 0.0);
  NetConfig net = small_unet();
  net.base_width = 8;
  const TrainResult r = train_unet({{img}, {mask}}, net, quick(unet_train_defaults(), 150));
  const auto total = r.log.values("total");
  EXPECT_LT(total.back(), 0.1 * total.front());
  const BinaryImage pred = unet_segment(r.checkpoint, prepare_image(img, 16));
  EXPECT_LE(dice_loss(to_float(pred), mask), 0.05);
}

TEST(Overfit, TranslatorFitsOnePair) {
  const FloatImage x = disk_image(16, 8.0, 8.0, 6.0), y = disk_image(16, 6.0, 9.0, 4.0);
  NetConfig net = small_pix2pix();
  net.base_width = net.disc_base_width = 8;
  const TrainResult r = train_pix2pix({{x}, {y}}, net, quick(pix2pix_train_defaults(), 200));
  const auto l1 = r.log.values("l1");
  EXPECT_LT(l1.back(), 0.1 * l1.front());
}

TEST(Overfit, CycleLossFalls) {
  const FloatImage a = disk_image(16, 8.0, 8.0, 6.0), b = disk_image(16, 6.0, 9.0, 4.0);
  const TrainResult r = train_cyclegan({a, a}, {b, b}, small_resnet(), quick(cyclegan_train_defaults(), 40));
  const auto c = r.log.values("cycle");
  EXPECT_LT(c.back(), c.front());
}

// Central differences converge at second order, so the gap to the analytic gradient shrinks
// about 100x per 10x step reduction until rounding takes over.
TEST(GradientCheck, FiniteDifferencesConvergeToAnalytic) {
  const auto coarse = gradcheck::cyclegan<double>(1e-4, 40, 1);
  const auto fine = gradcheck::cyclegan<double>(1e-6, 40, 1);
  EXPECT_GT(fine.checked, 0u);
  EXPECT_LT(fine.normwise_error, coarse.normwise_error * 1e-2 * 5);
  EXPECT_LT(fine.normwise_error, 1e-5);
}

TEST(GradientCheck, StageLossesIn64Bit) {
  EXPECT_LT(gradcheck::segmentation<double>(1e-5, 40, 2).normwise_error, 1e-6);
  EXPECT_LT(gradcheck::pix2pix<double>(1e-5, 40, 2).normwise_error, 1e-6);
  EXPECT_LT(gradcheck::cyclegan<double>(1e-7, 40, 2).normwise_error, 1e-6);
}
