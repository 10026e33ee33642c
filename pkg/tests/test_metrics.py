import numpy as np
import pytest
from scipy.spatial.distance import cdist

from algebra.tensor import Tensor3
from errors import ShapeError, UndefinedStatisticError
from tools.metrics import (
    LabelVolume,
    asd,
    dice,
    dice_from_jaccard,
    histogram_entropy,
    jaccard,
    masked_range,
    masked_stats,
    ncc,
    sparse_support_mask,
    support_f1,
    surface,
)


def label_from_flat(indices, dims):
    flat = np.zeros(int(np.prod(dims)), dtype=bool)
    flat[list(indices)] = True
    return LabelVolume(flat.reshape(dims, order="F"))


def box(dims, lo, hi):
    mask = np.zeros(dims, dtype=bool)
    mask[lo[0]:hi[0], lo[1]:hi[1], lo[2]:hi[2]] = True
    return mask


class TestMaskedStats:
    def test_constant_region(self):
        x = Tensor3(np.full((4, 4, 3), 7.5))
        stats = masked_stats(x, LabelVolume.full(x.dims))
        assert stats.sigma == 0.0
        assert stats.entropy_bits == 0.0
        assert stats.voxel_count == 48

    def test_two_levels_is_one_bit(self):
        data = np.zeros((4, 4, 2))
        data[:, :, 1] = 1.0
        stats = masked_stats(Tensor3(data), LabelVolume.full(data.shape))
        assert stats.entropy_bits == pytest.approx(1.0)
        assert stats.sigma == pytest.approx(0.5)

    def test_only_masked_voxels_count(self):
        data = np.zeros((4, 4, 2))
        data[0, 0, 0] = 1000.0
        mask = np.ones(data.shape, dtype=bool)
        mask[0, 0, 0] = False
        stats = masked_stats(Tensor3(data), LabelVolume(mask))
        assert stats.sigma == 0.0

    def test_empty_mask(self):
        x = Tensor3(np.ones((3, 3, 3)))
        with pytest.raises(UndefinedStatisticError):
            masked_stats(x, LabelVolume(np.zeros((3, 3, 3), dtype=bool)))

    def test_dims_mismatch(self):
        with pytest.raises(ShapeError):
            masked_stats(Tensor3(np.ones((3, 3, 3))), LabelVolume.full((3, 3, 2)))

    def test_entropy_is_affine_invariant(self, rng):
        values = rng.standard_normal(5000)
        h = histogram_entropy(values)
        assert histogram_entropy(3.0 * values + 11.0) == pytest.approx(h, abs=1e-9)

    def test_entropy_bounded_by_bins(self, rng):
        values = rng.uniform(size=100000)
        assert histogram_entropy(values, bins=16) <= 4.0 + 1e-12

    def test_shared_range_counts_narrower_image_in_fewer_bins(self, rng):
        wide = rng.standard_normal(20000)
        narrow = 0.25 * wide
        # On its own range the scaled copy has the same histogram.
        assert histogram_entropy(narrow) == pytest.approx(histogram_entropy(wide), abs=1e-9)
        shared = (float(wide.min()), float(wide.max()))
        assert histogram_entropy(narrow, value_range=shared) < histogram_entropy(wide, value_range=shared) - 1.5

    def test_values_outside_range_fall_in_edge_bins(self):
        values = np.array([-5.0, 0.2, 0.7, 9.0])
        # Clipped to [0, 1] with 2 bins: {-5, 0.2} low, {0.7, 9} high.
        assert histogram_entropy(values, bins=2, value_range=(0.0, 1.0)) == pytest.approx(1.0)

    def test_degenerate_and_reversed_range(self, rng):
        values = rng.standard_normal(100)
        assert histogram_entropy(values, value_range=(1.0, 1.0)) == 0.0
        with pytest.raises(ValueError):
            histogram_entropy(values, value_range=(1.0, 0.0))

    def test_masked_range_and_shared_stats(self):
        data = np.zeros((4, 4, 2))
        data[:, :, 1] = 1.0
        data[0, 0, 0] = -50.0
        mask = np.ones(data.shape, dtype=bool)
        mask[0, 0, 0] = False
        x = Tensor3(data)
        assert masked_range(x, LabelVolume(mask)) == (0.0, 1.0)
        stats = masked_stats(x, LabelVolume(mask), bins=4, value_range=(0.0, 1.0))
        assert stats.bin_count == 4
        assert 0.0 < stats.entropy_bits <= 1.0


class TestNcc:
    def test_self_is_one(self, random_tensor):
        a = random_tensor((5, 5, 4))
        assert ncc(a, a) == pytest.approx(1.0)

    def test_negation_is_minus_one(self, random_tensor):
        a = random_tensor((5, 5, 4))
        assert ncc(a, -a) == pytest.approx(-1.0)

    def test_affine_invariant(self, random_tensor):
        a, b = random_tensor((6, 5, 4)), random_tensor((6, 5, 4))
        assert ncc(a, 2.5 * b + 3.0) == pytest.approx(ncc(a, b), abs=1e-12)

    def test_bounded(self, random_tensor):
        for _ in range(20):
            value = ncc(random_tensor((4, 4, 4)), random_tensor((4, 4, 4)))
            assert -1.0 <= value <= 1.0

    def test_region(self, random_tensor):
        a = random_tensor((4, 4, 4))
        b = Tensor3(a.data.copy())
        b.data[0, :, :] = 0.0
        region = LabelVolume(box((4, 4, 4), (1, 0, 0), (4, 4, 4)))
        assert ncc(a, b, region) == pytest.approx(1.0)

    def test_constant_image(self, random_tensor):
        with pytest.raises(UndefinedStatisticError):
            ncc(random_tensor((3, 3, 3)), Tensor3(np.ones((3, 3, 3))))


class TestOverlap:
    def test_shifted_blocks(self):
        dims = (10, 10, 2)
        a = label_from_flat(range(0, 100), dims)
        b = label_from_flat(range(20, 120), dims)
        assert dice(a, b) == pytest.approx(100.0 * 160 / 200)
        assert jaccard(a, b) == pytest.approx(100.0 * 80 / 120)

    def test_known_percentages(self):
        dims = (10, 10, 2)
        a = label_from_flat(range(0, 100), dims)
        b = label_from_flat(range(20, 100), dims)
        assert dice(a, b) == pytest.approx(88.888888, abs=1e-5)
        assert jaccard(a, b) == pytest.approx(80.0)

    def test_identical_and_disjoint(self):
        a = LabelVolume(box((6, 6, 6), (0, 0, 0), (3, 3, 3)))
        b = LabelVolume(box((6, 6, 6), (3, 3, 3), (6, 6, 6)))
        assert dice(a, a) == 100.0 and jaccard(a, a) == 100.0
        assert dice(a, b) == 0.0 and jaccard(a, b) == 0.0

    def test_both_empty(self):
        empty = LabelVolume(np.zeros((3, 3, 3), dtype=bool))
        assert dice(empty, empty) == 100.0
        assert jaccard(empty, empty) == 100.0

    def test_closed_form_relation(self, rng):
        for _ in range(100):
            a = LabelVolume(rng.uniform(size=(6, 6, 4)) < rng.uniform())
            b = LabelVolume(rng.uniform(size=(6, 6, 4)) < rng.uniform())
            d, j = dice(a, b), jaccard(a, b)
            assert d >= j
            assert d == pytest.approx(dice_from_jaccard(j), abs=1e-9)


def brute_force_asd(a, b, spacing):
    def surface_points(mask):
        padded = np.pad(mask, 1)
        core = padded[1:-1, 1:-1, 1:-1]
        neighbors = [
            padded[2:, 1:-1, 1:-1], padded[:-2, 1:-1, 1:-1],
            padded[1:-1, 2:, 1:-1], padded[1:-1, :-2, 1:-1],
            padded[1:-1, 1:-1, 2:], padded[1:-1, 1:-1, :-2],
        ]
        boundary = core & ~np.logical_and.reduce(neighbors)
        return np.argwhere(boundary) * np.asarray(spacing)

    pa, pb = surface_points(a), surface_points(b)
    dist = cdist(pa, pb)
    return (dist.min(axis=1).sum() + dist.min(axis=0).sum()) / (len(pa) + len(pb))


class TestAsd:
    def test_identical(self):
        a = LabelVolume(box((8, 8, 8), (2, 2, 2), (6, 6, 6)))
        assert asd(a, a) == 0.0

    def test_single_voxel_offset(self):
        ma = np.zeros((5, 5, 5), dtype=bool)
        mb = np.zeros((5, 5, 5), dtype=bool)
        ma[1, 2, 2] = True
        mb[2, 2, 2] = True
        a = LabelVolume(ma, (2.0, 1.0, 1.0))
        b = LabelVolume(mb, (2.0, 1.0, 1.0))
        assert asd(a, b) == pytest.approx(2.0)

    def test_symmetric(self, rng):
        a = LabelVolume(rng.uniform(size=(8, 8, 6)) < 0.3)
        b = LabelVolume(rng.uniform(size=(8, 8, 6)) < 0.3)
        assert asd(a, b) == pytest.approx(asd(b, a))

    def test_matches_brute_force(self, rng):
        spacing = (0.8, 1.0, 2.5)
        for _ in range(10):
            ma = rng.uniform(size=(9, 8, 7)) < 0.25
            mb = rng.uniform(size=(9, 8, 7)) < 0.25
            value = asd(LabelVolume(ma, spacing), LabelVolume(mb, spacing))
            assert value == pytest.approx(brute_force_asd(ma, mb, spacing), rel=1e-9)

    def test_surface_of_solid_box(self):
        label = LabelVolume(box((7, 7, 7), (1, 1, 1), (6, 6, 6)))
        # 5^3 box minus its 3^3 interior.
        assert np.count_nonzero(surface(label)) == 125 - 27

    def test_empty_mask(self):
        full = LabelVolume.full((3, 3, 3))
        empty = LabelVolume(np.zeros((3, 3, 3), dtype=bool))
        with pytest.raises(UndefinedStatisticError):
            asd(full, empty)

    def test_spacing_mismatch(self):
        a = LabelVolume(box((6, 6, 6), (1, 1, 1), (4, 4, 4)), (1.0, 1.0, 1.0))
        b = LabelVolume(box((6, 6, 6), (2, 2, 2), (5, 5, 5)), (1.0, 1.0, 2.0))
        with pytest.raises(ShapeError):
            asd(a, b)
        with pytest.raises(ShapeError):
            asd(b, a)


class TestSupport:
    def test_sparse_support_mask(self):
        data = np.zeros((3, 3, 2))
        data[0, 0, 0] = 0.5
        data[1, 1, 1] = -0.05
        support = sparse_support_mask(Tensor3(data), 0.1)
        assert support.voxel_count == 1 and support.mask[0, 0, 0]

    def test_f1_perfect_and_empty(self):
        truth = np.zeros((4, 4, 2), dtype=bool)
        truth[1, 2, 1] = True
        estimate = Tensor3(np.where(truth, 3.0, 0.0))
        assert support_f1(estimate, LabelVolume(truth), 1e-3) == 1.0
        zeros = Tensor3.zeros((4, 4, 2))
        assert support_f1(zeros, LabelVolume(np.zeros((4, 4, 2), dtype=bool)), 1e-3) == 1.0

    def test_f1_partial(self):
        truth = np.zeros((4, 4, 2), dtype=bool)
        truth[0, :2, 0] = True
        estimate = np.zeros((4, 4, 2))
        estimate[0, 0, 0] = 1.0
        estimate[3, 3, 1] = 1.0
        # tp=1, fp=1, fn=1.
        assert support_f1(Tensor3(estimate), LabelVolume(truth), 0.5) == pytest.approx(0.5)
