#include <gtest/gtest.h>

#include <bit>
#include <cstring>
#include <filesystem>
#include <limits>
#include <sstream>

#include "looming/io.hpp"
#include "looming/synth.hpp"
#include "test_support.hpp"

using namespace looming;
using namespace looming::io;
using looming::testing::Rng;

namespace {

std::string record(float x, float y, float z, float refl) {
  std::string out(16, '\0');
  const float v[4] = {x, y, z, refl};
  for (int k = 0; k < 4; ++k) {
    const auto u = std::bit_cast<std::uint32_t>(v[k]);
    for (int b = 0; b < 4; ++b) out[4 * k + b] = static_cast<char>((u >> (8 * b)) & 0xFFu);
  }
  return out;
}

GridSpec small_spec(std::size_t w = 6, std::size_t h = 3) {
  GridSpec s;
  s.width = w;
  s.height = h;
  return s;
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("looming_io_" + name);
}

}  // namespace

TEST(Velodyne, TwoRecords) {
  const std::string bytes = record(1.0f, 2.0f, 3.0f, 0.5f) + record(-4.0f, 0.0f, 0.25f, 1.0f);
  ASSERT_EQ(bytes.size(), 32u);
  const VelodyneScan scan = parse_velodyne(bytes);
  ASSERT_EQ(scan.records, 2u);
  ASSERT_EQ(scan.cloud.points.size(), 2u);
  EXPECT_EQ(scan.cloud.points[0].x, 1.0);
  EXPECT_EQ(scan.cloud.points[0].y, 2.0);
  EXPECT_EQ(scan.cloud.points[0].z, 3.0);
  EXPECT_EQ(scan.cloud.intensity[0], 0.5f);
  EXPECT_EQ(scan.cloud.points[1].x, -4.0);
  EXPECT_EQ(scan.cloud.points[1].z, 0.25);
}

TEST(Velodyne, RecordProjectsToForwardCell) {
  const VelodyneScan scan = parse_velodyne(record(10.0f, 0.0f, 0.0f, 0.7f));
  const RangeImage img = project(scan.cloud, GridSpec{});
  EXPECT_EQ(img.valid_count(), 1u);
  EXPECT_EQ(sample(img, 0.0, 0.0), 10.0);
}

TEST(Velodyne, TruncatedReportsOffset) {
  const std::string bytes = record(1, 2, 3, 4) + std::string(5, '\0');
  try {
    parse_velodyne(bytes);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_TRUE(e.has_location());
    EXPECT_EQ(e.location(), 16u);
  }
}

TEST(Velodyne, NonFiniteRecordsAreDroppedAndCounted) {
  const float nan = std::numeric_limits<float>::quiet_NaN();
  const VelodyneScan scan = parse_velodyne(record(1, 1, 1, 0) + record(nan, 0, 0, 0) + record(2, 2, 2, 0));
  EXPECT_EQ(scan.records, 3u);
  EXPECT_EQ(scan.dropped_nonfinite, 1u);
  EXPECT_EQ(scan.cloud.points.size(), 2u);
}

TEST(Velodyne, ParserIsTotalOnRandomBytes) {
  Rng rng(31);
  for (int trial = 0; trial < 500; ++trial) {
    const auto n = static_cast<std::size_t>(rng.uniform(0, 200));
    std::string bytes(n, '\0');
    for (char& c : bytes) c = static_cast<char>(rng.engine()() & 0xFFu);
    try {
      const VelodyneScan scan = parse_velodyne(bytes);
      ASSERT_EQ(n % 16, 0u);
      ASSERT_EQ(scan.records, n / 16);
      ASSERT_EQ(scan.cloud.points.size() + scan.dropped_nonfinite, scan.records);
      for (const Vec3& p : scan.cloud.points) ASSERT_TRUE(is_finite(p));
    } catch (const ParseError&) {
      ASSERT_NE(n % 16, 0u);
    }
  }
}

TEST(Velodyne, EncodeRoundTripAndFile) {
  Rng rng(32);
  PointCloud cloud;
  for (int k = 0; k < 100; ++k) {
    const Vec3 p = rng.vec(-50, 50);
    cloud.points.push_back({static_cast<float>(p.x), static_cast<float>(p.y), static_cast<float>(p.z)});
    cloud.intensity.push_back(static_cast<float>(rng.uniform(0, 1)));
  }
  const std::string bytes = encode_velodyne(cloud);
  EXPECT_EQ(bytes.size(), 1600u);
  EXPECT_EQ(encode_velodyne(parse_velodyne(bytes).cloud), bytes);

  const auto path = temp_path("scan.bin");
  write_velodyne_bin(cloud, path);
  EXPECT_EQ(read_file(path), bytes);
  EXPECT_EQ(read_velodyne_bin(path).cloud.points.size(), 100u);
  std::filesystem::remove(path);
  EXPECT_THROW(read_velodyne_bin(path), IoError);
}

TEST(EgoMotion, InterpolatesAndClamps) {
  std::istringstream in("# t,vx,vy,vz\n0.0,1,0,0\n\n1.0, 3, 2, 0  # comment\n2.0,3,2,4\n");
  const EgoMotionTrack track = parse_ego_motion(in);
  ASSERT_EQ(track.records().size(), 3u);
  const Vec3 mid = track.velocity_at(0.25);
  EXPECT_DOUBLE_EQ(mid.x, 1.5);
  EXPECT_DOUBLE_EQ(mid.y, 0.5);
  EXPECT_DOUBLE_EQ(track.velocity_at(1.5).z, 2.0);
  EXPECT_DOUBLE_EQ(track.velocity_at(-3).x, 1.0);
  EXPECT_DOUBLE_EQ(track.velocity_at(9).z, 4.0);
  EXPECT_DOUBLE_EQ(track.velocity_at(1.0).y, 2.0);
}

TEST(EgoMotion, MalformedLineNumber) {
  const auto line_of = [](const std::string& text) -> std::size_t {
    std::istringstream in(text);
    try {
      parse_ego_motion(in);
    } catch (const ParseError& e) {
      return e.location();
    }
    return 0;
  };
  EXPECT_EQ(line_of("0,1,0,0\n1,1,0\n"), 2u);
  EXPECT_EQ(line_of("0,1,0,0\n#\n1,x,0,0\n"), 3u);
  EXPECT_EQ(line_of("0,1,0,0\n1,1,0,0,5\n"), 2u);
  EXPECT_EQ(line_of("1,1,0,0\n1,1,0,0\n"), 2u);
  EXPECT_EQ(line_of("0,1,0,nan\n"), 1u);
  EXPECT_THROW(EgoMotionTrack{}.velocity_at(0.0), InvalidInput);
}

TEST(Ppm, AllEmptyIsBlack) {
  const LoomingMap map(small_spec());
  const PpmImage img = decode_ppm(encode_looming_ppm(map, ColorScale{}));
  EXPECT_EQ(img.width, 6u);
  EXPECT_EQ(img.height, 3u);
  for (const Rgb& p : img.pixels) EXPECT_EQ(p, (Rgb{0, 0, 0}));
}

TEST(Ppm, ColorRamp) {
  const ColorScale scale{2.0};
  EXPECT_EQ(looming_color(2.0, scale), (Rgb{255, 0, 0}));
  EXPECT_EQ(looming_color(50.0, scale), (Rgb{255, 0, 0}));
  // 0.5 * 255 = 127.5 rounds half up
  EXPECT_EQ(looming_color(-1.0, scale), (Rgb{0, 0, 128}));
  EXPECT_EQ(looming_color(0.0, scale), (Rgb{0, 0, 0}));
  EXPECT_THROW(encode_looming_ppm(LoomingMap(small_spec()), ColorScale{0.0}), InvalidInput);
}

TEST(Ppm, TopRowIsHighestElevation) {
  LoomingMap map(small_spec(2, 2));
  map.store(map.spec.width * 1 + 0, 1.0);  // row 1 = upper row, column 0
  const PpmImage img = decode_ppm(encode_looming_ppm(map, ColorScale{}));
  EXPECT_EQ(img.pixels[0], (Rgb{255, 0, 0}));
  EXPECT_EQ(img.pixels[2], (Rgb{0, 0, 0}));
}

TEST(Ppm, ThreatPaletteRoundTrip) {
  Rng rng(33);
  LoomingMap map(small_spec(40, 8));
  for (std::size_t i = 0; i < map.values.size(); ++i) {
    if (rng.uniform(0, 1) < 0.8) map.store(i, rng.uniform(-0.5, 2.0));
  }
  const ThreatMap threat = classify_threat(map, ThreatThresholds{});
  const std::string bytes = encode_threat_ppm(threat);
  EXPECT_EQ(decode_threat_ppm(bytes), threat.classes);
  EXPECT_EQ(encode_threat_ppm(threat), bytes);
}

TEST(Ppm, DecodeRejectsBadInput) {
  EXPECT_THROW(decode_ppm("P5\n1 1\n255\n\0\0\0"), FormatError);
  EXPECT_THROW(decode_ppm("P6\n2 2\n255\nabc"), ParseError);
  EXPECT_THROW(decode_threat_ppm(std::string("P6\n1 1\n255\n") + std::string{'\1', '\2', '\3'}), ParseError);
}

TEST(Rgrid, RoundTripIsBitExact) {
  Rng rng(34);
  RangeImage img(small_spec(50, 10), 12.5);
  for (std::size_t i = 0; i < img.spec().cell_count(); ++i) {
    if (rng.uniform(0, 1) < 0.6) img.set(i, static_cast<float>(rng.uniform(0.5, 119)));
  }
  const std::string bytes = encode_rgrid(img);
  const RangeImage back = decode_rgrid(bytes);
  EXPECT_EQ(back, img);
  EXPECT_EQ(back.timestamp(), 12.5);
  EXPECT_EQ(encode_rgrid(back), bytes);

  const auto path = temp_path("scan.rgrid");
  write_rgrid(img, path);
  EXPECT_EQ(read_rgrid(path), img);
  std::filesystem::remove(path);
}

TEST(Rgrid, HeaderErrors) {
  const RangeImage img(small_spec());
  std::string bytes = encode_rgrid(img);
  std::string bad = bytes;
  bad[0] = 'X';
  try {
    decode_rgrid(bad);
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("RGRID"), std::string::npos);
  }
  bad = bytes;
  bad.replace(bad.find(" 1 "), 3, " 7 ");
  EXPECT_THROW(decode_rgrid(bad), FormatError);
  EXPECT_THROW(decode_rgrid(bytes.substr(0, bytes.size() - 1)), ParseError);
  EXPECT_THROW(decode_rgrid(encode_lgrid(LoomingMap(small_spec()))), FormatError);
}

TEST(Lgrid, RoundTripKeepsMaskAndValues) {
  Rng rng(35);
  LoomingMap map(small_spec(30, 5), 3.0);
  map.timestamp = 4.25;
  for (std::size_t i = 0; i < map.values.size(); ++i) {
    if (rng.uniform(0, 1) < 0.7) map.store(i, static_cast<float>(rng.uniform(-5, 5)));
  }
  const std::string bytes = encode_lgrid(map);
  const LoomingMap back = decode_lgrid(bytes, 3.0);
  EXPECT_EQ(back.mask, map.mask);
  EXPECT_EQ(back.values, map.values);
  EXPECT_EQ(back.timestamp, 4.25);
  EXPECT_EQ(back.clamped, count_at_clamp(map, 3.0));
  EXPECT_EQ(encode_lgrid(back), bytes);
}

TEST(Lgrid, MaskSizeMismatchNamesBothSizes) {
  const std::string bytes = encode_lgrid(LoomingMap(small_spec()));
  try {
    decode_lgrid(bytes.substr(0, bytes.size() - 2));
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("16"), std::string::npos) << msg;
    EXPECT_NE(msg.find("18"), std::string::npos) << msg;
  }
  std::string bad = bytes;
  bad.back() = '\7';
  EXPECT_THROW(decode_lgrid(bad), ParseError);
}

TEST(Grid, DecodersAreTotalOnCorruption) {
  Rng rng(36);
  RangeImage img(small_spec(8, 4));
  img.set(3, 7.0);
  const std::string good = encode_rgrid(img);
  for (int trial = 0; trial < 2000; ++trial) {
    std::string bytes = good;
    const auto k = static_cast<std::size_t>(rng.uniform(0, static_cast<double>(bytes.size())));
    bytes[k] = static_cast<char>(rng.engine()() & 0xFFu);
    if (rng.uniform(0, 1) < 0.3) bytes.resize(k);
    try {
      (void)decode_rgrid(bytes);
    } catch (const ParseError&) {
    } catch (const InvalidInput&) {
    }
  }
}

TEST(Determinism, SameInputSameBytes) {
  const synth::Scene scene = synth::demo_scene();
  synth::VehicleState s;
  s.t = {5, 0, 0};
  const GridSpec spec;
  const LoomingMap a = synth::ground_truth_map(scene, s, spec, 0.0);
  const LoomingMap b = synth::ground_truth_map(scene, s, spec, 0.0);
  EXPECT_EQ(encode_lgrid(a), encode_lgrid(b));
  EXPECT_EQ(encode_looming_ppm(a, ColorScale{}), encode_looming_ppm(b, ColorScale{}));
  EXPECT_EQ(encode_rgrid(synth::simulate_scan(scene, s, spec, 0.0)),
            encode_rgrid(synth::simulate_scan(scene, s, spec, 0.0)));
}
