#include "gocc/lidar.hpp"

#include <gtest/gtest.h>

#include <Eigen/Geometry>
#include <algorithm>
#include <unordered_map>

#include "gocc/rng.hpp"

using gocc::CameraModel;
using gocc::GridSpec;
using gocc::LidarSweep;
using gocc::PointCloud;
using gocc::Vec3;

namespace {

LidarSweep sweep_with_pose(const Eigen::Quaterniond& q, const Vec3& t) {
  LidarSweep s;
  s.rot = q.normalized().toRotationMatrix();
  s.trans = t;
  return s;
}

PointCloud random_cloud(gocc::RngSequence& rng, int n, double extent) {
  PointCloud c;
  for (int i = 0; i < n; ++i) {
    c.positions.emplace_back(rng.uniform(-extent, extent), rng.uniform(-extent, extent),
                             rng.uniform(-extent, extent));
    c.intensities.push_back(rng.u01());
  }
  return c;
}

}  // namespace

TEST(AggregateSweeps, IdentityPosePassesThrough) {
  LidarSweep s = sweep_with_pose(Eigen::Quaterniond::Identity(), Vec3::Zero());
  s.points = {{Vec3(1, 2, 3), 0.5}, {Vec3(-1, 0, 2), 0.25}};
  PointCloud c = gocc::aggregate_sweeps({s});
  ASSERT_EQ(c.size(), 2u);
  EXPECT_TRUE(c.positions[0].isApprox(Vec3(1, 2, 3)));
  EXPECT_TRUE(c.positions[1].isApprox(Vec3(-1, 0, 2)));
  EXPECT_DOUBLE_EQ(c.intensities[0], 0.5);
  EXPECT_DOUBLE_EQ(c.intensities[1], 0.25);
}

TEST(AggregateSweeps, TranslationOnly) {
  LidarSweep s = sweep_with_pose(Eigen::Quaterniond::Identity(), Vec3(10, 0, -1));
  s.points = {{Vec3(1, 2, 3), 1.0}};
  PointCloud c = gocc::aggregate_sweeps({s});
  EXPECT_TRUE(c.positions[0].isApprox(Vec3(11, 2, 2)));
}

TEST(AggregateSweeps, MatchesIsometryOracle) {
  gocc::RngSequence rng(21);
  std::vector<LidarSweep> sweeps;
  std::vector<Eigen::Isometry3d> poses;
  for (int k = 0; k < 4; ++k) {
    Eigen::Quaterniond q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
    q.normalize();
    Vec3 t(rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-1, 1));
    LidarSweep s = sweep_with_pose(q, t);
    s.timestamp = 0.1 * k;
    for (int i = 0; i < 25; ++i)
      s.points.push_back({Vec3(rng.uniform(-10, 10), rng.uniform(-10, 10),
                               rng.uniform(-2, 2)),
                          rng.u01()});
    sweeps.push_back(s);
    Eigen::Isometry3d iso = Eigen::Isometry3d::Identity();
    iso.linear() = q.toRotationMatrix();
    iso.translation() = t;
    poses.push_back(iso);
  }
  PointCloud c = gocc::aggregate_sweeps(sweeps);
  ASSERT_EQ(c.size(), 100u);
  std::size_t at = 0;
  for (int k = 0; k < 4; ++k) {
    for (const auto& pt : sweeps[k].points) {
      Vec3 expect = poses[k] * pt.position;
      EXPECT_TRUE(c.positions[at].isApprox(expect, 1e-12)) << "point " << at;
      EXPECT_DOUBLE_EQ(c.intensities[at], pt.intensity);
      ++at;
    }
  }
}

TEST(AggregateSweeps, EmptySetThrows) {
  EXPECT_THROW(gocc::aggregate_sweeps({}), std::invalid_argument);
}

TEST(NormalizeIntensity, MapsToUnitRange) {
  PointCloud c;
  c.positions = {Vec3::Zero(), Vec3::Zero(), Vec3::Zero()};
  c.intensities = {2.0, 6.0, 4.0};
  gocc::normalize_intensity(c);
  EXPECT_DOUBLE_EQ(c.intensities[0], 0.0);
  EXPECT_DOUBLE_EQ(c.intensities[1], 1.0);
  EXPECT_DOUBLE_EQ(c.intensities[2], 0.5);
}

TEST(Voxelize, SinglePoint) {
  GridSpec spec;
  spec.origin = Vec3(0, 0, 0);
  spec.resolution = Vec3(1, 1, 1);
  spec.counts = {4, 4, 4};
  PointCloud c;
  c.positions = {Vec3(1.25, 2.5, 3.75)};
  c.intensities = {0.625};
  auto vf = gocc::voxelize(c, spec);
  ASSERT_EQ(vf.voxels.size(), 1u);
  EXPECT_EQ(vf.voxels[0].idx, (std::array<std::int64_t, 3>{1, 2, 3}));
  EXPECT_TRUE(vf.voxels[0].mean_position.isApprox(Vec3(1.25, 2.5, 3.75)));
  EXPECT_DOUBLE_EQ(vf.voxels[0].mean_intensity, 0.625);
  EXPECT_EQ(vf.voxels[0].count, 1u);
}

TEST(Voxelize, TwoPointsAverage) {
  GridSpec spec;
  spec.origin = Vec3(0, 0, 0);
  spec.resolution = Vec3(2, 2, 2);
  spec.counts = {2, 2, 2};
  PointCloud c;
  c.positions = {Vec3(0.5, 0.5, 0.5), Vec3(1.5, 1.5, 1.5)};
  c.intensities = {0.2, 0.8};
  auto vf = gocc::voxelize(c, spec);
  ASSERT_EQ(vf.voxels.size(), 1u);
  EXPECT_TRUE(vf.voxels[0].mean_position.isApprox(Vec3(1, 1, 1)));
  EXPECT_DOUBLE_EQ(vf.voxels[0].mean_intensity, 0.5);
  EXPECT_EQ(vf.voxels[0].count, 2u);
}

TEST(Voxelize, MatchesGroupByOracle) {
  gocc::RngSequence rng(22);
  GridSpec spec;
  spec.origin = Vec3(-8, -8, -2);
  spec.resolution = Vec3(0.4, 0.4, 0.25);
  spec.counts = {40, 40, 16};
  PointCloud c = random_cloud(rng, 10000, 9.0);  // some points fall outside

  struct Acc {
    Vec3 pos = Vec3::Zero();
    double inten = 0.0;
    std::size_t n = 0;
  };
  std::unordered_map<std::size_t, Acc> ref;
  for (std::size_t i = 0; i < c.size(); ++i) {
    auto loc = spec.locate(c.positions[i]);
    if (!loc) continue;
    Acc& a = ref[spec.linear((*loc)[0], (*loc)[1], (*loc)[2])];
    a.pos += c.positions[i];
    a.inten += c.intensities[i];
    a.n += 1;
  }

  auto vf = gocc::voxelize(c, spec);
  ASSERT_EQ(vf.voxels.size(), ref.size());
  std::size_t total = 0;
  for (const auto& v : vf.voxels) {
    auto it = ref.find(spec.linear(v.idx[0], v.idx[1], v.idx[2]));
    ASSERT_NE(it, ref.end());
    const Acc& a = it->second;
    EXPECT_EQ(v.count, a.n);
    EXPECT_TRUE(v.mean_position.isApprox(a.pos / double(a.n), 1e-9));
    EXPECT_NEAR(v.mean_intensity, a.inten / double(a.n), 1e-9);
    total += v.count;
  }
  std::size_t in_bounds = 0;
  for (const auto& p : c.positions)
    if (spec.locate(p)) ++in_bounds;
  EXPECT_EQ(total, in_bounds);
  EXPECT_LT(in_bounds, c.size());  // the cloud was built to spill outside
}

TEST(Voxelize, PermutationInvariant) {
  gocc::RngSequence rng(23);
  GridSpec spec;
  spec.origin = Vec3(-4, -4, -4);
  spec.resolution = Vec3(0.5, 0.5, 0.5);
  spec.counts = {16, 16, 16};
  PointCloud c = random_cloud(rng, 5000, 4.0);

  PointCloud shuffled = c;
  std::vector<std::size_t> perm(c.size());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  gocc::partial_shuffle(perm, perm.size(), rng);
  for (std::size_t i = 0; i < perm.size(); ++i) {
    shuffled.positions[i] = c.positions[perm[i]];
    shuffled.intensities[i] = c.intensities[perm[i]];
  }

  auto a = gocc::voxelize(c, spec);
  auto b = gocc::voxelize(shuffled, spec);
  ASSERT_EQ(a.voxels.size(), b.voxels.size());
  for (std::size_t i = 0; i < a.voxels.size(); ++i) {
    EXPECT_EQ(a.voxels[i].idx, b.voxels[i].idx);
    EXPECT_EQ(a.voxels[i].count, b.voxels[i].count);
    EXPECT_TRUE(a.voxels[i].mean_position.isApprox(b.voxels[i].mean_position, 1e-9));
    EXPECT_NEAR(a.voxels[i].mean_intensity, b.voxels[i].mean_intensity,
                1e-9 * (1 + std::abs(a.voxels[i].mean_intensity)));
  }
}

TEST(Voxelize, MeansStayInsideVoxelBounds) {
  gocc::RngSequence rng(24);
  GridSpec spec;
  spec.origin = Vec3(0, 0, 0);
  spec.resolution = Vec3(0.3, 0.7, 0.2);
  spec.counts = {10, 5, 12};
  PointCloud c = random_cloud(rng, 3000, 2.0);
  for (auto& p : c.positions) p += Vec3(1.5, 1.5, 1.2);  // center on the grid
  auto vf = gocc::voxelize(c, spec);
  ASSERT_GT(vf.voxels.size(), 0u);
  for (const auto& v : vf.voxels) {
    for (int a = 0; a < 3; ++a) {
      double lo = spec.origin[a] + spec.resolution[a] * double(v.idx[a]);
      EXPECT_GE(v.mean_position[a], lo - 1e-12);
      EXPECT_LE(v.mean_position[a], lo + spec.resolution[a] + 1e-12);
    }
  }
}

TEST(Voxelize, SortedByLinearIndex) {
  gocc::RngSequence rng(25);
  GridSpec spec;
  spec.origin = Vec3(-4, -4, -4);
  spec.resolution = Vec3(0.5, 0.5, 0.5);
  spec.counts = {16, 16, 16};
  auto vf = gocc::voxelize(random_cloud(rng, 2000, 4.0), spec);
  for (std::size_t i = 1; i < vf.voxels.size(); ++i) {
    auto a = vf.voxels[i - 1].idx;
    auto b = vf.voxels[i].idx;
    EXPECT_LT(spec.linear(a[0], a[1], a[2]), spec.linear(b[0], b[1], b[2]));
  }
}

namespace {

CameraModel test_camera() {
  CameraModel cam;
  cam.width = 640;
  cam.height = 480;
  cam.fx = 500;
  cam.fy = 480;
  cam.cx = 320;
  cam.cy = 240;
  cam.rot = gocc::Mat3::Identity();  // reference frame == camera frame
  cam.trans = Vec3::Zero();
  return cam;
}

}  // namespace

TEST(ProjectDepth, OpticalAxisPointHitsPrincipalPixel) {
  PointCloud c;
  c.positions = {Vec3(0, 0, 5)};
  c.intensities = {1.0};
  auto dm = gocc::project_depth(c, test_camera(), 0, 51.2);
  ASSERT_TRUE(dm.has_depth(320, 240));
  EXPECT_DOUBLE_EQ(*dm.depth_at(320, 240), 5.0);
  std::size_t filled = 0;
  for (int v = 0; v < dm.height; ++v)
    for (int u = 0; u < dm.width; ++u)
      if (dm.has_depth(u, v)) ++filled;
  EXPECT_EQ(filled, 1u);
}

TEST(ProjectDepth, ZBufferKeepsNearest) {
  PointCloud c;
  c.positions = {Vec3(0, 0, 9), Vec3(0, 0, 3), Vec3(0, 0, 6)};
  c.intensities = {1, 1, 1};
  auto dm = gocc::project_depth(c, test_camera(), 0, 51.2);
  ASSERT_TRUE(dm.has_depth(320, 240));
  EXPECT_DOUBLE_EQ(*dm.depth_at(320, 240), 3.0);
}

TEST(ProjectDepth, MatchesPinholeOracle) {
  gocc::RngSequence rng(26);
  CameraModel cam = test_camera();
  Eigen::Quaterniond q(0.9, 0.1, -0.2, 0.05);
  q.normalize();
  cam.rot = q.toRotationMatrix();
  cam.trans = Vec3(0.3, -0.1, 0.5);

  for (int i = 0; i < 200; ++i) {
    Vec3 p(rng.uniform(-10, 10), rng.uniform(-6, 6), rng.uniform(-2, 20));
    PointCloud c;
    c.positions = {p};
    c.intensities = {1.0};
    auto dm = gocc::project_depth(c, cam, 0, 51.2);

    Vec3 pc = cam.rot * p + cam.trans;
    bool expect_hit = pc.z() > 0.0 && pc.z() <= 51.2;
    int u = 0, v = 0;
    if (expect_hit) {
      double uu = cam.fx * pc.x() / pc.z() + cam.cx;
      double vv = cam.fy * pc.y() / pc.z() + cam.cy;
      u = static_cast<int>(std::floor(uu));
      v = static_cast<int>(std::floor(vv));
      expect_hit = u >= 0 && u < cam.width && v >= 0 && v < cam.height;
    }
    std::size_t filled = 0;
    for (int y = 0; y < dm.height; ++y)
      for (int x = 0; x < dm.width; ++x)
        if (dm.has_depth(x, y)) ++filled;
    if (expect_hit) {
      ASSERT_EQ(filled, 1u) << "case " << i;
      ASSERT_TRUE(dm.has_depth(u, v)) << "case " << i;
      EXPECT_DOUBLE_EQ(*dm.depth_at(u, v), pc.z());
    } else {
      EXPECT_EQ(filled, 0u) << "case " << i;
    }
  }
}

TEST(ProjectDepth, PyramidPixelsNest) {
  // With intrinsics halved per level, a point's pixel at scale k is
  // floor(pixel_0 / 2^k).
  gocc::RngSequence rng(27);
  CameraModel cam = test_camera();
  for (int i = 0; i < 100; ++i) {
    Vec3 p(rng.uniform(-4, 4), rng.uniform(-3, 3), rng.uniform(1, 30));
    PointCloud c;
    c.positions = {p};
    c.intensities = {1.0};
    auto d0 = gocc::project_depth(c, cam, 0, 51.2);
    int u0 = -1, v0 = -1;
    for (int y = 0; y < d0.height; ++y)
      for (int x = 0; x < d0.width; ++x)
        if (d0.has_depth(x, y)) {
          u0 = x;
          v0 = y;
        }
    if (u0 < 0) continue;
    for (int k = 1; k <= 3; ++k) {
      auto dk = gocc::project_depth(c, cam, k, 51.2);
      EXPECT_EQ(dk.width, cam.width >> k);
      ASSERT_TRUE(dk.has_depth(u0 >> k, v0 >> k)) << "scale " << k;
      EXPECT_DOUBLE_EQ(*dk.depth_at(u0 >> k, v0 >> k), *d0.depth_at(u0, v0));
    }
  }
}

TEST(ProjectDepth, DropsBehindCameraAndBeyondRange) {
  PointCloud c;
  c.positions = {Vec3(0, 0, -5), Vec3(0, 0, 60), Vec3(0, 0, 0)};
  c.intensities = {1, 1, 1};
  auto dm = gocc::project_depth(c, test_camera(), 0, 51.2);
  for (int v = 0; v < dm.height; ++v)
    for (int u = 0; u < dm.width; ++u) EXPECT_FALSE(dm.has_depth(u, v));
}

TEST(ProjectDepth, RejectsBadArguments) {
  PointCloud c;
  c.positions = {Vec3(0, 0, 5)};
  c.intensities = {1};
  CameraModel cam = test_camera();
  EXPECT_THROW(gocc::project_depth(c, cam, -1, 51.2), std::invalid_argument);
  EXPECT_THROW(gocc::project_depth(c, cam, 0, 0.0), std::invalid_argument);
  cam.width = 0;
  EXPECT_THROW(gocc::project_depth(c, cam, 0, 51.2), std::invalid_argument);
}
