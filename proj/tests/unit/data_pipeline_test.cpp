/* Copyright 2026 The ALA-Net Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/


#include "alanet/data_pipeline.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include <gtest/gtest.h>

#include "alanet/error.hpp"
#include "alanet/image.hpp"
#include "fixtures.hpp"

namespace alanet {
namespace {

Keypoints uniform_keypoints(double x, double y) {
  Keypoints k;
  k.fill(Point{x, y});
  return k;
}

TEST(ResizeTest, HalvesLargeImage) {
  Image img(768, 1024, 0.5);
  ResizedSample r = resize_keep_aspect(img, uniform_keypoints(10, 10), 512);
  EXPECT_EQ(r.image.width, 512);
  EXPECT_EQ(r.image.height, 384);
  EXPECT_DOUBLE_EQ(r.scale, 0.5);
  EXPECT_DOUBLE_EQ(r.keypoints[0].x, 5.0);
}

TEST(ResizeTest, IdentityWhenLongSideMatches) {
  Image img(400, 512, 0.25);
  img.at(3, 7) = 0.9;
  ResizedSample r = resize_keep_aspect(img, uniform_keypoints(1, 2), 512);
  EXPECT_DOUBLE_EQ(r.scale, 1.0);
  EXPECT_EQ(r.image, img);
}

TEST(ResizeTest, ScalesKeypoints) {
  Image img(480, 640);
  ResizedSample r = resize_keep_aspect(img, uniform_keypoints(320, 240), 512);
  EXPECT_EQ(r.image.width, 512);
  EXPECT_EQ(r.image.height, 384);
  EXPECT_NEAR(r.keypoints[0].x, 256.0, 1e-12);
  EXPECT_NEAR(r.keypoints[0].y, 192.0, 1e-12);
}

TEST(ResizeTest, RejectsEmpty) {
  EXPECT_THROW(resize_keep_aspect(Image(0, 5), Keypoints{}, 512), InvalidInput);
  EXPECT_THROW(resize_keep_aspect(Image(5, 5), Keypoints{}, 0), InvalidInput);
}

TEST(ResizeTest, AspectWithinOnePixel) {
  for (int h : {97, 300, 511, 1000}) {
    for (int w : {64, 333, 777}) {
      ResizedSample r = resize_keep_aspect(Image(h, w), Keypoints{}, 256);
      EXPECT_EQ(std::max(r.image.height, r.image.width), 256);
      EXPECT_LE(std::abs(r.image.height - h * r.scale), 0.5 + 1e-9);
      EXPECT_LE(std::abs(r.image.width - w * r.scale), 0.5 + 1e-9);
    }
  }
}

TEST(KeypointBoxTest, Examples) {
  const std::vector<Point> pts = {{100, 100}, {10, 10}};
  auto b = keypoints_to_boxes(pts, 64, 512, 512);
  EXPECT_EQ(b[0], (Box{68, 68, 132, 132}));
  EXPECT_EQ(b[1], (Box{0, 0, 42, 42}));
  const std::vector<Point> center = {{256, 256}};
  EXPECT_EQ(keypoints_to_boxes(center, 2, 512, 512)[0], (Box{255, 255, 257, 257}));
}

TEST(KeypointBoxTest, ClampsFarEdge) {
  const std::vector<Point> pts = {{500, 20}};
  EXPECT_EQ(keypoints_to_boxes(pts, 64, 512, 512)[0], (Box{468, 0, 512, 52}));
}

TEST(KeypointBoxTest, ResizeThenBoxCentersOnKeypoints) {
  auto recs = testing::synth_records(6, 3);
  for (const ImageRecord& r : recs) {
    ResizedSample s = resize_keep_aspect(r.image, r.keypoints, 200);
    auto boxes = keypoints_to_boxes(s.keypoints, 16, s.image.width, s.image.height);
    for (std::size_t k = 0; k < boxes.size(); ++k) {
      EXPECT_TRUE(boxes[k].valid());
      const bool inner = boxes[k].x1 > 0 && boxes[k].y1 > 0 && boxes[k].x2 < s.image.width &&
                         boxes[k].y2 < s.image.height;
      if (inner) {
        EXPECT_NEAR(boxes[k].center_x(), s.keypoints[k].x, 0.5);
        EXPECT_NEAR(boxes[k].center_y(), s.keypoints[k].y, 0.5);
      }
    }
  }
}

TEST(AugmentTest, FlipReflectsBoxes) {
  Image img(100, 512);
  const std::vector<Box> boxes = {{10, 20, 74, 84}};
  AugmentedSample a = augment(img, boxes, true, 1.0);
  EXPECT_EQ(a.boxes[0], (Box{438, 20, 502, 84}));
}

TEST(AugmentTest, IdentityWithoutFlipAtUnitScale) {
  Image img(20, 30);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) img.pixels[i] = (i % 7) / 7.0;
  const std::vector<Box> boxes = {{1, 2, 3, 4}};
  AugmentedSample a = augment(img, boxes, false, 1.0);
  EXPECT_EQ(a.image, img);
  EXPECT_EQ(a.boxes, boxes);
}

TEST(AugmentTest, ScalesCoordinates) {
  Image img(300, 300);
  const std::vector<Box> boxes = {{100, 100, 164, 164}};
  AugmentedSample a = augment(img, boxes, false, 0.5);
  EXPECT_EQ(a.boxes[0], (Box{50, 50, 82, 82}));
  EXPECT_EQ(a.image.width, 150);
}

TEST(AugmentTest, DoubleFlipIsIdentityOnBoxes) {
  Rng rng(2);
  Image img(64, 97);
  for (int t = 0; t < 50; ++t) {
    std::vector<Box> boxes = {testing::random_box(rng, 40)};
    AugmentedSample once = augment(img, boxes, true, 1.0);
    AugmentedSample twice = augment(once.image, once.boxes, true, 1.0);
    ASSERT_EQ(twice.boxes.size(), 1u);
    EXPECT_NEAR(twice.boxes[0].x1, boxes[0].x1, 1e-12);
    EXPECT_NEAR(twice.boxes[0].x2, boxes[0].x2, 1e-12);
    EXPECT_EQ(twice.boxes[0].y1, boxes[0].y1);
    EXPECT_EQ(twice.boxes[0].y2, boxes[0].y2);
  }
}

TEST(GenderTest, Bijection) {
  EXPECT_EQ(encode_gender(Gender::kFemale), 0);
  EXPECT_EQ(encode_gender(Gender::kMale), 1);
  for (Gender g : {Gender::kFemale, Gender::kMale}) EXPECT_EQ(decode_gender(encode_gender(g)), g);
  EXPECT_THROW(decode_gender(2), InvalidInput);
  EXPECT_EQ(parse_gender("M"), Gender::kMale);
  EXPECT_THROW(parse_gender("x"), InvalidInput);
}

TEST(ManifestTest, LineRoundTrip) {
  ManifestEntry e;
  e.image_path = "images/a.pgm";
  e.age_months = 131;
  e.gender = Gender::kMale;
  for (int k = 0; k < kNumKeypoints; ++k) e.keypoints[k] = Point{k * 1.1 + 0.1, 200.0 / (k + 3)};
  const std::string line = format_manifest_line(e);
  EXPECT_EQ(std::count(line.begin(), line.end(), '\t'), 3);
  EXPECT_EQ(parse_manifest_line(line), e);
}

TEST(ManifestTest, RejectsMalformedLines) {
  EXPECT_THROW(parse_manifest_line("a.pgm\t12\tfemale"), InvalidInput);
  EXPECT_THROW(parse_manifest_line("a.pgm\tx\tfemale\t1,2"), InvalidInput);
  EXPECT_THROW(parse_manifest_line("a.pgm\t12\tfemale\t1,2;3,4"), InvalidInput);
}

TEST(ManifestTest, ValidationCatchesDuplicatesAndAges) {
  DatasetManifest m;
  ManifestEntry e;
  e.image_path = "x.pgm";
  m.entries = {e, e};
  EXPECT_THROW(m.validate(240), InvalidInput);
  m.entries = {e};
  m.entries[0].age_months = 240;
  EXPECT_THROW(m.validate(240), InvalidInput);
}

TEST(ManifestTest, FileRoundTripAndLoad) {
  const auto dir = testing::scratch_dir("manifest");
  SynthDataset d = synth_generate(4, 12);
  write_synth_dataset(d, dir);
  DatasetManifest back = read_manifest(dir / "manifest.tsv");
  EXPECT_EQ(back.entries, d.manifest.entries);
  for (std::size_t i = 0; i < back.entries.size(); ++i) {
    ImageRecord r = load_record(back.entries[i], dir);
    EXPECT_EQ(r.image, d.images[i]);
    EXPECT_EQ(r.age_months, d.manifest.entries[i].age_months);
  }
}

TEST(ManifestTest, ReadReportsLineNumber) {
  const auto dir = testing::scratch_dir("manifest_bad");
  std::ofstream(dir / "m.tsv") << "\nbroken line\n";
  try {
    read_manifest(dir / "m.tsv");
    FAIL();
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("2"), std::string::npos);
  }
}

TEST(PgmTest, RoundTrip) {
  const auto dir = testing::scratch_dir("pgm");
  Image img(5, 7);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) img.pixels[i] = static_cast<double>(i * 7 % 256) / 255.0;
  write_pgm(dir / "a.pgm", img);
  EXPECT_EQ(read_pgm(dir / "a.pgm"), img);
  EXPECT_THROW(read_pgm(dir / "missing.pgm"), IoError);
}

TEST(SynthTest, Deterministic) {
  SynthDataset a = synth_generate(8, 0), b = synth_generate(8, 0);
  EXPECT_EQ(a.manifest.entries, b.manifest.entries);
  EXPECT_EQ(a.images, b.images);
  SynthDataset c = synth_generate(8, 1);
  EXPECT_NE(a.images, c.images);
}

TEST(SynthTest, RecordsAreValidAndBlobsSitOnKeypoints) {
  SynthDataset d = synth_generate(16, 5);
  d.manifest.validate(240);
  std::set<int> genders;
  for (std::size_t i = 0; i < d.images.size(); ++i) {
    ImageRecord r = d.record(i);
    EXPECT_NO_THROW(r.validate(240));
    genders.insert(encode_gender(r.gender));
    ASSERT_EQ(d.blobs[i].size(), static_cast<std::size_t>(kNumKeypoints));
    for (int k = 0; k < kNumKeypoints; ++k) {
      EXPECT_EQ(d.blobs[i][k].center, r.keypoints[k]);
      for (double v : r.image.pixels) {
        ASSERT_GE(v, 0.0);
        ASSERT_LE(v, 1.0);
      }
    }
  }
  EXPECT_EQ(genders.size(), 2u);
}

TEST(SynthTest, BlobsBrighterWithAge) {
  SynthConfig young;
  young.age_min = young.age_max = 10;
  SynthConfig old = young;
  old.age_min = old.age_max = 220;
  SynthDataset a = synth_generate(8, 4, young), b = synth_generate(8, 4, old);
  double ra = 0, rb = 0;
  for (std::size_t i = 0; i < 8; ++i) {
    for (const SynthBlob& blob : a.blobs[i]) ra += blob.radius * blob.intensity;
    for (const SynthBlob& blob : b.blobs[i]) rb += blob.radius * blob.intensity;
  }
  EXPECT_GT(rb, ra);
}

}  // namespace
}  // namespace alanet
