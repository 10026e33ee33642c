import numpy as np
import pytest
from pydantic import ValidationError

from algebra.tensor import Tensor3
from algebra.transforms import build_transform
from algebra.tsvd import avg_rank, tsvd, tubal_rank
from data.phantom import PhantomSpec, drift_anchor_positions, make_background, make_phantom, make_rng


def test_defaults():
    spec = PhantomSpec()
    assert spec.dims == (64, 64, 30)
    assert spec.tubal_rank == 5
    assert spec.n_volumes == 6
    assert spec.transform == "dct"


def test_volume_is_exact_sum_of_truths():
    phantom = make_phantom(PhantomSpec(dims=(16, 16, 8), tubal_rank=3, n_volumes=3, seed=4))
    assert len(phantom.volumes) == 3
    for x, low, sparse in zip(phantom.volumes, phantom.truth_low_rank, phantom.truth_sparse):
        np.testing.assert_array_equal(x.data, low.data + sparse.data)


def test_same_seed_is_bitwise_identical():
    spec = PhantomSpec(dims=(16, 12, 7), tubal_rank=2, n_volumes=2, slice_drift=0.5, seed=99)
    a, b = make_phantom(spec), make_phantom(spec)
    for va, vb in zip(a.volumes, b.volumes):
        np.testing.assert_array_equal(va.data, vb.data)
    for ma, mb in zip(a.anomaly_masks, b.anomaly_masks):
        np.testing.assert_array_equal(ma.mask, mb.mask)


def test_different_seeds_differ():
    a = make_phantom(PhantomSpec(dims=(8, 8, 4), tubal_rank=2, n_volumes=1, seed=1))
    b = make_phantom(PhantomSpec(dims=(8, 8, 4), tubal_rank=2, n_volumes=1, seed=2))
    assert not np.array_equal(a.volumes[0].data, b.volumes[0].data)


def test_no_anomalies_without_sparse_fraction():
    phantom = make_phantom(PhantomSpec(dims=(12, 12, 6), tubal_rank=2, n_volumes=2, sparse_fraction=0.0))
    for sparse, mask in zip(phantom.truth_sparse, phantom.anomaly_masks):
        assert np.all(sparse.data == 0.0)
        assert mask.voxel_count == 0


@pytest.mark.parametrize("kind", ["dct", "fft", "dwt4"])
def test_background_has_requested_tubal_rank(kind):
    spec = PhantomSpec(tubal_rank=5, transform=kind)
    background = make_background(spec, make_rng(spec.seed))
    t = build_transform(kind, spec.dims[2])
    assert tubal_rank(tsvd(t, background)) == 5
    assert background.data.std() == pytest.approx(1.0)


def test_background_segments_stay_low_rank():
    spec = PhantomSpec(dims=(20, 20, 12), tubal_rank=3)
    background = make_background(spec, make_rng(spec.seed))
    segment = Tensor3(background.data[:, :, 3:9])
    t = build_transform("dwt4", 6)
    assert tubal_rank(tsvd(t, segment)) == 3
    # Every one of the 6 transform-domain slices has rank <= 3.
    assert avg_rank(t, segment) <= 3.0 * 6


def drifting_background(drift, seed=0):
    spec = PhantomSpec(dims=(32, 32, 20), tubal_rank=2, slice_drift=drift, seed=seed)
    return spec, make_background(spec, make_rng(spec.seed))


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_drift_raises_whole_stack_rank(seed):
    t = build_transform("dct", 20)
    _, still = drifting_background(0.0, seed)
    _, drifting = drifting_background(1.0, seed)
    assert tubal_rank(tsvd(t, still)) == 2
    assert tubal_rank(tsvd(t, drifting)) > 2 * 2


def test_drifting_segment_inside_one_anchor_interval_stays_low_rank():
    spec, background = drifting_background(1.0)
    anchors = drift_anchor_positions(spec.dims[2])
    # Slices 5..9 sit between the second and third anchors.
    assert anchors[1] <= 5 and 9 <= anchors[2]
    segment = Tensor3(background.data[:, :, 5:10])
    assert tubal_rank(tsvd(build_transform("dct", 5), segment)) <= 2 * spec.tubal_rank


def test_drift_is_deterministic_and_changes_the_background():
    _, a = drifting_background(0.5, seed=3)
    _, b = drifting_background(0.5, seed=3)
    _, still = drifting_background(0.0, seed=3)
    np.testing.assert_array_equal(a.data, b.data)
    assert not np.allclose(a.data, still.data)
    assert a.data.std() == pytest.approx(1.0)


def test_zero_rank_background():
    phantom = make_phantom(PhantomSpec(dims=(8, 8, 6), tubal_rank=0, n_volumes=1, sparse_fraction=0.0))
    assert np.all(phantom.volumes[0].data == 0.0)


def test_rank_above_slice_size_rejected():
    with pytest.raises(ValidationError):
        PhantomSpec(dims=(4, 6, 5), tubal_rank=5)


def test_custom_transform_rejected():
    with pytest.raises(ValidationError):
        PhantomSpec(transform="custom")


def test_scatter_anomalies_hit_exact_count():
    spec = PhantomSpec(dims=(10, 10, 10), tubal_rank=2, n_volumes=2, anomaly_shape="scatter", sparse_fraction=0.05)
    phantom = make_phantom(spec)
    for sparse, mask in zip(phantom.truth_sparse, phantom.anomaly_masks):
        assert mask.voxel_count == 50
        np.testing.assert_array_equal(sparse.data != 0, mask.mask)
        assert set(np.unique(np.abs(sparse.data[mask.mask]))) == {spec.sparse_magnitude}


def test_ellipsoid_anomalies_reach_target_fraction():
    spec = PhantomSpec(dims=(32, 32, 16), tubal_rank=2, n_volumes=3, sparse_fraction=0.03, seed=5)
    phantom = make_phantom(spec)
    target = 0.03 * 32 * 32 * 16
    for sparse, mask in zip(phantom.truth_sparse, phantom.anomaly_masks):
        assert mask.voxel_count >= target
        np.testing.assert_array_equal(sparse.data != 0, mask.mask)
        assert mask.spacing == spec.spacing


def test_first_volume_has_unit_gain():
    spec = PhantomSpec(dims=(12, 12, 6), tubal_rank=2, n_volumes=3, sparse_fraction=0.0, seed=8)
    phantom = make_phantom(spec)
    background = make_background(spec, make_rng(spec.seed))
    np.testing.assert_array_equal(phantom.truth_low_rank[0].data, background.data)
    ratio = phantom.truth_low_rank[1].data / background.data
    assert np.allclose(ratio, ratio.flat[0])
