import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hsicompress.data import (ContainerError, HsiCube, JacobiConvergenceError,
                              LabelRaster, PcaModel, PreprocessConfig, SplitError, Standardizer,
                              SyntheticConfig, extract_patches, indian_pines_removal, jacobi_eigh,
                              load_cube, make_synthetic_scene, pca_fit, pca_transform, prepare,
                              remove_bands, save_container, split_disjoint, split_random,
                              standardize_fit)
from hsicompress.data.types import SplitMask


def small_dataset(seed=0, **kw):
    cfg = SyntheticConfig(bands=12, height=16, width=14, classes=4, seed=seed, **kw)
    return make_synthetic_scene(cfg)


# -- container ------------------------------------------------------------

def test_container_round_trip(tmp_path):
    ds = small_dataset()
    ds.mask = split_disjoint(ds.labels, 0.5)
    header = save_container(ds, tmp_path, "scene")
    back = load_cube(header)
    np.testing.assert_array_equal(back.cube.data, ds.cube.data)
    np.testing.assert_array_equal(back.labels.ids, ds.labels.ids)
    np.testing.assert_array_equal(back.mask.codes, ds.mask.codes)
    assert back.classes == 4 and back.class_names == ds.class_names


def test_truncated_payload_names_byte_counts(tmp_path):
    header = save_container(small_dataset(), tmp_path, "scene")
    data = header.with_suffix(".hsib")
    data.write_bytes(data.read_bytes()[:-8])
    expected = 4 * 12 * 16 * 14
    with pytest.raises(ContainerError, match=f"expected {expected} bytes, found {expected - 8}"):
        load_cube(header)


def test_bad_magic_and_non_finite(tmp_path):
    header = save_container(small_dataset(), tmp_path, "scene")
    text = header.read_text()
    header.write_text(text.replace("HSIC1", "HSIC0"))
    with pytest.raises(ContainerError, match="magic"):
        load_cube(header)
    header.write_text(text)
    raw = np.fromfile(header.with_suffix(".hsib"), "<f4")
    raw[5] = np.nan
    raw.tofile(header.with_suffix(".hsib"))
    with pytest.raises(ContainerError, match="non-finite"):
        load_cube(header)


def test_dimension_mismatch_detected(tmp_path):
    header = save_container(small_dataset(), tmp_path, "scene")
    header.write_text(header.read_text().replace('"bands": 12', '"bands": 13'))
    with pytest.raises(ContainerError, match="bytes"):
        load_cube(header)


def test_label_raster_requires_a_label():
    with pytest.raises(ValueError):
        LabelRaster(np.zeros((3, 3)), 2)


def test_mask_on_unlabeled_pixel_rejected():
    labels = LabelRaster(np.array([[1, 0], [2, 1]]), 2)
    with pytest.raises(ValueError, match="unlabeled"):
        SplitMask(np.array([[1, 2], [2, 1]])).check_against(labels)


# -- band removal ---------------------------------------------------------

def test_remove_bands_examples():
    cube = HsiCube(np.arange(3 * 2 * 2, dtype=np.float32).reshape(3, 2, 2))
    assert np.array_equal(remove_bands(cube, []).data, cube.data)
    np.testing.assert_array_equal(remove_bands(cube, [1]).data, cube.data[[0, 2]])
    with pytest.raises(ValueError):
        remove_bands(cube, [3])
    with pytest.raises(ValueError):
        remove_bands(cube, [0, 0])


@pytest.mark.parametrize("bands", [224, 220])
def test_indian_pines_default_removal_reaches_200(bands):
    cube = HsiCube(np.zeros((bands, 2, 2), np.float32))
    assert remove_bands(cube, indian_pines_removal(bands)).bands == 200
    removed = set(indian_pines_removal(bands))
    assert {103, 107, 149, 162, 219} <= removed  # 1-based 104, 108, 150, 163, 220


# -- standardization ------------------------------------------------------

def test_standardize_examples():
    cube = HsiCube(np.array([[[1.0, 3.0]], [[5.0, 5.0]]], np.float32))
    out = standardize_fit(cube).apply(cube)
    np.testing.assert_allclose(out.data[0, 0], [-1, 1])
    assert np.all(out.data[1] == 0)


def test_standardize_reapply_is_idempotent(rng):
    cube = HsiCube(rng.normal(3.0, 5.0, size=(6, 20, 20)))
    once = standardize_fit(cube).apply(cube)
    twice = standardize_fit(once).apply(once)
    px = twice.pixels()
    assert np.abs(px.mean(axis=0)).max() < 1e-5 and np.abs(px.std(axis=0) - 1).max() < 1e-5


def test_standardize_before_fit_errors():
    with pytest.raises(RuntimeError):
        Standardizer().apply(HsiCube(np.zeros((1, 1, 1))))


# -- Jacobi / PCA ---------------------------------------------------------

@pytest.mark.parametrize("n", [1, 2, 5, 17, 64])
def test_jacobi_matches_lapack_oracle(rng, n):
    x = rng.normal(size=(3 * n + 5, n)) * rng.uniform(0.1, 4, n)
    a = np.atleast_2d(np.cov(x.T))
    vals, vecs, _ = jacobi_eigh(a)
    np.testing.assert_allclose(np.sort(vals), np.linalg.eigvalsh(a), atol=1e-9 * np.trace(a))
    np.testing.assert_allclose(vecs.T @ vecs, np.eye(n), atol=1e-10)
    np.testing.assert_allclose(a @ vecs, vecs * vals, atol=1e-8 * np.trace(a))


def test_jacobi_non_convergence_is_reported(rng):
    a = np.cov(rng.normal(size=(50, 10)).T)
    with pytest.raises(JacobiConvergenceError, match="1 sweeps"):
        jacobi_eigh(a, max_sweeps=1)


def test_pca_full_rank_reconstruction(rng):
    x = rng.normal(size=(200, 8)) @ rng.normal(size=(8, 8))
    m = pca_fit(x, 8)
    assert np.abs(m.inverse_pixels(m.transform_pixels(x)) - x).max() < 1e-4


def test_pca_first_component_on_diagonal_line(rng):
    t = rng.normal(size=2000)
    x = np.stack([t, t + 0.05 * rng.normal(size=t.size)], axis=1)
    c = pca_fit(x, 1).components[0]
    angle = math.degrees(math.acos(min(1.0, abs(c @ np.array([1, 1]) / math.sqrt(2)))))
    assert angle < 1.0
    assert c[np.abs(c).argmax()] > 0


def test_pca_eigenvalues_sorted_on_random_matrices(rng):
    for _ in range(100):
        b = int(rng.integers(2, 9))
        m = pca_fit(rng.normal(size=(30, b)) * rng.uniform(0.1, 3, b), b)
        assert np.all(np.diff(m.eigenvalues) <= 0) and m.eigenvalues.min() >= -1e-8
        np.testing.assert_allclose(m.components @ m.components.T, np.eye(b), atol=1e-5)


def test_pca_serialization_keeps_orthonormality(tmp_path, rng):
    m = pca_fit(rng.normal(size=(100, 10)), 6)
    m.save(tmp_path / "pca.json")
    back = PcaModel.load(tmp_path / "pca.json")
    np.testing.assert_allclose(back.components @ back.components.T, np.eye(6), atol=1e-6)
    np.testing.assert_array_equal(back.components, m.components)


def test_pca_transform_examples(rng):
    cube = HsiCube(rng.normal(size=(6, 5, 4)))
    m = pca_fit(cube.pixels(), 6)
    assert pca_transform(cube, m, 1).bands == 1
    assert np.abs(m.transform_pixels(m.mean[None])).max() == 0.0
    with pytest.raises(ValueError, match="band mismatch"):
        pca_transform(HsiCube(np.zeros((5, 2, 2))), m, 2)
    with pytest.raises(ValueError):
        pca_fit(cube.pixels(), 7)


# -- patches --------------------------------------------------------------

def test_patch_d1_is_pixel_spectrum():
    ds = small_dataset()
    ps = extract_patches(ds.cube, ds.labels, 1)
    r, c = ps.coords[3]
    np.testing.assert_array_equal(ps.batch([3])[0, :, 0, 0], ds.cube.data[:, r, c])
    np.testing.assert_array_equal(ps.spectra([3])[0], ds.cube.data[:, r, c])


def test_interior_patch_is_raw_window_and_border_reflects():
    ids = np.zeros((16, 14), int)
    ids[8, 7] = 1
    ids[0, 0] = 2
    ds = small_dataset()
    ps = extract_patches(ds.cube, LabelRaster(ids, 2), 5)
    border, interior = ps.batch()
    np.testing.assert_array_equal(interior, ds.cube.data[:, 6:11, 5:10])
    np.testing.assert_array_equal(border[:, 2, 2], ds.cube.data[:, 0, 0])
    np.testing.assert_array_equal(border[:, 0, 2], ds.cube.data[:, 2, 0])  # reflect, not edge
    assert ps.labels.tolist() == [1, 0]


def test_patch_count_and_even_size():
    ds = small_dataset()
    ps = extract_patches(ds.cube, ds.labels, 7)
    assert len(ps) == int(np.count_nonzero(ds.labels.ids))
    assert ps.labels.min() >= 0 and ps.labels.max() < ds.classes
    with pytest.raises(ValueError, match="odd"):
        extract_patches(ds.cube, ds.labels, 4)


# -- splits ---------------------------------------------------------------

def test_split_random_counts_and_determinism():
    ds = small_dataset()
    m = split_random(ds.labels, 0.55, seed=3)
    for cls in range(1, 5):
        n = int((ds.labels.ids == cls).sum())
        assert int((m.train & (ds.labels.ids == cls)).sum()) == math.floor(0.55 * n + 0.5)
    assert np.array_equal(m.codes, split_random(ds.labels, 0.55, seed=3).codes)
    assert not np.array_equal(m.codes, split_random(ds.labels, 0.55, seed=4).codes)


def test_split_disjoint_is_rowmajor_prefix():
    ds = small_dataset()
    m = split_disjoint(ds.labels, 0.55)
    flat_ids, flat_codes = ds.labels.ids.reshape(-1), m.codes.reshape(-1)
    for cls in range(1, 5):
        codes = flat_codes[flat_ids == cls]
        k = int((codes == 1).sum())
        assert np.all(codes[:k] == 1) and np.all(codes[k:] == 2)
    assert np.array_equal(m.train.sum(), split_random(ds.labels, 0.55, 0).train.sum())


@given(seed=st.integers(0, 1000), frac=st.floats(0.05, 0.95))
def test_split_partitions_labeled_pixels(seed, frac):
    ds = small_dataset(seed % 5)
    for m in (split_random(ds.labels, frac, seed), split_disjoint(ds.labels, frac)):
        assert not np.any(m.train & m.test)
        assert np.array_equal(m.train | m.test, ds.labels.labeled)
        m.check_against(ds.labels)


def test_split_errors():
    labels = LabelRaster(np.array([[1, 1, 2]]), 2)
    with pytest.raises(SplitError, match="fewer than 2"):
        split_random(labels, 0.5, 0)
    with pytest.raises(SplitError):
        split_disjoint(LabelRaster(np.array([[1, 1]]), 1), 1.0)


# -- pipeline -------------------------------------------------------------

@pytest.mark.parametrize("split", ["random", "disjoint"])
def test_pipeline_preserves_patch_count(split):
    ds = make_synthetic_scene(SyntheticConfig(bands=30, seed=2))
    p = prepare(ds, PreprocessConfig(pca_components=10, patch_size=9, split=split))
    assert len(p.train) + len(p.test) == int(np.count_nonzero(ds.labels.ids))
    var = p.cube.pixels(ds.labels.labeled).var(axis=0)
    assert np.all(np.diff(var) <= 1e-6 * var[0])


def test_pipeline_uses_container_mask_for_disjoint():
    ds = small_dataset()
    ds.mask = split_random(ds.labels, 0.3, 9)
    ds.mask.kind = "file"
    p = prepare(ds, PreprocessConfig(pca_components=4, patch_size=3))
    assert p.info["split_kind"] == "file"
    assert len(p.train) == int(ds.mask.train.sum())
