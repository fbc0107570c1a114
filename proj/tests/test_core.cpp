#include <gtest/gtest.h>

#include "support.hpp"

using namespace annoconsist;
using testkit::rect_mask;

TEST(MaskIou, IdenticalMasks) {
    const auto a = rect_mask(8, 8, 1, 1, 4, 5);
    EXPECT_DOUBLE_EQ(mask_iou(a, a), 1.0);
}

TEST(MaskIou, DisjointMasks) {
    EXPECT_DOUBLE_EQ(mask_iou(rect_mask(8, 8, 0, 0, 2, 2), rect_mask(8, 8, 4, 4, 6, 6)), 0.0);
}

TEST(MaskIou, ColumnsVersusRows) {
    const auto cols = rect_mask(4, 4, 0, 0, 1, 3);
    const auto rows = rect_mask(4, 4, 0, 0, 3, 1);
    EXPECT_DOUBLE_EQ(mask_iou(cols, rows), 4.0 / 12.0);
}

TEST(MaskIou, BothEmptyIsZero) {
    EXPECT_DOUBLE_EQ(mask_iou(PixelMask(5, 5), PixelMask(5, 5)), 0.0);
}

TEST(MaskIou, DimensionMismatchThrows) {
    EXPECT_THROW((void)mask_iou(PixelMask(4, 4), PixelMask(4, 5)), DimensionError);
}

TEST(OverlapFraction, Cases) {
    const auto a = rect_mask(8, 8, 0, 0, 3, 3);
    EXPECT_DOUBLE_EQ(overlap_fraction(a, a), 1.0);
    EXPECT_DOUBLE_EQ(overlap_fraction(a, rect_mask(8, 8, 1, 1, 2, 2)), 1.0);
    EXPECT_DOUBLE_EQ(overlap_fraction(rect_mask(8, 8, 0, 0, 1, 3), a), 0.5);
    EXPECT_THROW((void)overlap_fraction(a, PixelMask(8, 8)), std::invalid_argument);
}

TEST(TightBox, Cases) {
    PixelMask one(8, 8);
    one.set(2, 3);
    EXPECT_EQ(tight_box(one), (Box{2, 3, 2, 3}));
    EXPECT_EQ(tight_box(rect_mask(8, 8, 0, 0, 7, 7)), (Box{0, 0, 7, 7}));

    PixelMask ell(8, 8);
    for (int y = 1; y <= 4; ++y) ell.set(2, y);
    for (int x = 2; x <= 5; ++x) ell.set(x, 4);
    EXPECT_EQ(tight_box(ell), (Box{2, 1, 5, 4}));
    EXPECT_THROW((void)tight_box(PixelMask(4, 4)), std::invalid_argument);
}

TEST(BuildAdjacency, SeparatedMasksAreNotNeighbours) {
    const std::vector<PixelMask> pool{rect_mask(10, 10, 0, 0, 2, 2), rect_mask(10, 10, 5, 5, 7, 7)};
    const auto adj = build_adjacency(pool, EdgeMap(10, 10), 1);
    EXPECT_TRUE(adj.neighbors[0].empty());
    EXPECT_TRUE(adj.neighbors[1].empty());
}

TEST(BuildAdjacency, AbuttingMasksZeroEdges) {
    const std::vector<PixelMask> pool{rect_mask(10, 10, 0, 0, 2, 2), rect_mask(10, 10, 3, 0, 5, 2)};
    const auto adj = build_adjacency(pool, EdgeMap(10, 10), 1);
    ASSERT_EQ(adj.neighbors[0], std::vector<int>{1});
    EXPECT_DOUBLE_EQ(adj.weight(0, 1), 0.0);
}

TEST(BuildAdjacency, ContactBandSumsEdgeValues) {
    // Columns 2 and 3 over rows 0-2 form the band: 3 pixels on each side.
    const std::vector<PixelMask> pool{rect_mask(10, 10, 0, 0, 2, 2), rect_mask(10, 10, 3, 0, 5, 2)};
    EdgeMap e(10, 10);
    for (int y = 0; y <= 2; ++y) {
        e.at(2, y) = 1.0f;
        e.at(3, y) = 1.0f;
    }
    const auto adj = build_adjacency(pool, e, 1);
    EXPECT_DOUBLE_EQ(adj.weight(0, 1), 6.0);
    EXPECT_DOUBLE_EQ(adj.weight(1, 0), 6.0);

    const auto norm = build_adjacency(pool, e, 1, true);
    EXPECT_DOUBLE_EQ(norm.weight(0, 1), 1.0);
}

TEST(BuildAdjacency, RejectsBadInput) {
    const std::vector<PixelMask> pool{rect_mask(10, 10, 0, 0, 2, 2)};
    EXPECT_THROW((void)build_adjacency(pool, EdgeMap(9, 10), 1), DimensionError);
    EXPECT_THROW((void)build_adjacency(pool, EdgeMap(10, 10), 0), std::invalid_argument);
}

TEST(CoreProperties, IouSymmetricAndReflexive) {
    Rng rng(11);
    for (int i = 0; i < 300; ++i) {
        const auto a = testkit::random_mask(9, 7, rng.uniform(0.05, 0.6), rng);
        const auto b = testkit::random_mask(9, 7, rng.uniform(0.05, 0.6), rng);
        EXPECT_DOUBLE_EQ(mask_iou(a, b), mask_iou(b, a));
        EXPECT_DOUBLE_EQ(mask_iou(a, a), 1.0);
        const double iou = mask_iou(a, b);
        EXPECT_GE(iou, 0.0);
        EXPECT_LE(iou, 1.0);
    }
}

TEST(CoreProperties, OverlapFractionOneForSubsets) {
    Rng rng(12);
    for (int i = 0; i < 200; ++i) {
        const auto a = testkit::random_mask(10, 10, 0.5, rng);
        PixelMask b(10, 10);
        for (std::size_t k = 0; k < a.size(); ++k)
            if (a.bits()[k] && rng.bernoulli(0.5)) b.bits()[k] = 1;
        if (b.empty()) continue;
        EXPECT_DOUBLE_EQ(overlap_fraction(a, b), 1.0);
    }
}

TEST(CoreProperties, AdjacencySymmetric) {
    Rng rng(13);
    for (int trial = 0; trial < 40; ++trial) {
        std::vector<PixelMask> pool;
        const int n = rng.uniform_int(2, 9);
        for (int i = 0; i < n; ++i) pool.push_back(testkit::random_rect(16, 16, rng));
        const auto edges = testkit::random_edges(16, 16, rng);
        const auto adj = build_adjacency(pool, edges, rng.uniform_int(1, 2));
        for (int u = 0; u < n; ++u) {
            for (const int v : adj.neighbors[static_cast<std::size_t>(u)]) {
                EXPECT_NE(u, v);
                EXPECT_EQ(adj.weight(u, v), adj.weight(v, u));
                EXPECT_GE(adj.weight(u, v), 0.0);
            }
        }
    }
}

TEST(CoreProperties, TightBoxIsMinimal) {
    Rng rng(14);
    for (int i = 0; i < 200; ++i) {
        const auto m = testkit::random_mask(11, 9, rng.uniform(0.01, 0.3), rng);
        const Box b = tight_box(m);
        bool left = false, right = false, top = false, bottom = false;
        for (int y = 0; y < m.height(); ++y) {
            for (int x = 0; x < m.width(); ++x) {
                if (!m.at(x, y)) continue;
                EXPECT_TRUE(x >= b.x_min && x <= b.x_max && y >= b.y_min && y <= b.y_max);
                left |= x == b.x_min;
                right |= x == b.x_max;
                top |= y == b.y_min;
                bottom |= y == b.y_max;
            }
        }
        // every side touches a set pixel, so no smaller box contains them all
        EXPECT_TRUE(left && right && top && bottom);
    }
}

TEST(Codec, RleRoundTrip) {
    Rng rng(15);
    for (int i = 0; i < 50; ++i) {
        const auto m = testkit::random_mask(13, 7, rng.uniform(0.0, 1.0), rng);
        EXPECT_EQ(rle_decode(rle_encode(m), 13, 7), m);
    }
}

TEST(Codec, Base64FloatRoundTrip) {
    const std::vector<double> v{0.0, -1.5, 3.141592653589793, 1e-300, 42.0};
    EXPECT_EQ(unpack_f64(pack_f64(v)), v);
}
