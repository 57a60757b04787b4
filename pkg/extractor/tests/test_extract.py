"""Extraction pipeline tests on the weight-free toy backbone."""

import logging

import numpy as np
import pytest

from scpclust import load_scpf
from scpclust.data import sample_pairs
import scpclust.data as scp_data

from scpextract import (
    DatasetError,
    ExtractJob,
    JobConfigError,
    WeightsUnavailableError,
    extract,
    get_spec,
    load_backbone,
    preprocess,
)
from scpextract.datasets import load_dataset


def toy_npz(tmp_path, n_per_class=4, n_classes=3, side=32, with_labels=True):
    """Classes are solid color bands with pixel noise: separable by color."""
    rng = np.random.default_rng(0)
    images, labels = [], []
    base = np.array([[220, 40, 40], [40, 220, 40], [40, 40, 220]], dtype=np.int64)
    for c in range(n_classes):
        for _ in range(n_per_class):
            img = np.clip(
                base[c % 3] + rng.integers(-30, 30, size=(side, side, 3)), 0, 255
            ).astype(np.uint8)
            images.append(img)
            labels.append(c)
    path = tmp_path / ("toy.npz" if with_labels else "toy_unlabeled.npz")
    arrays = {"images": np.stack(images)}
    if with_labels:
        arrays["labels"] = np.asarray(labels, dtype=np.int64)
    np.savez(path, **arrays)
    return str(path)


# ---------------------------------------------------------------------------
# backbones

def test_toy_backbone_deterministic():
    spec = get_spec("toy")
    embed = load_backbone("toy")
    rng = np.random.default_rng(3)
    batch = rng.random((5, 3, spec.input_size, spec.input_size)).astype(np.float32)
    a = embed(batch)
    b = load_backbone("toy")(batch)
    np.testing.assert_array_equal(a, b)
    assert a.shape == (5, spec.dim)
    assert np.isfinite(a).all()


def test_unknown_backbone_rejected():
    with pytest.raises(JobConfigError, match="unknown backbone"):
        get_spec("resnet50")


def test_real_backbone_error_is_actionable(monkeypatch):
    # force the import failure path regardless of what is installed
    import builtins

    real_import = builtins.__import__

    def no_torch(name, *args, **kwargs):
        if name in ("torch", "transformers"):
            raise ImportError(f"No module named {name!r}")
        return real_import(name, *args, **kwargs)

    monkeypatch.setattr(builtins, "__import__", no_torch)
    with pytest.raises(WeightsUnavailableError, match="pip install torch transformers"):
        load_backbone("clip-vit-b32")


def test_preprocess_normalizes():
    spec = get_spec("toy")
    img = np.full((1, 16, 16, 3), 255, dtype=np.uint8)
    out = preprocess(img, spec)
    assert out.shape == (1, 3, spec.input_size, spec.input_size)
    np.testing.assert_allclose(out, 1.0, atol=1e-6)  # toy stats are identity


# ---------------------------------------------------------------------------
# datasets

def test_npz_roundtrip(tmp_path):
    path = toy_npz(tmp_path)
    images, labels, n_classes, skipped = load_dataset(path)
    assert len(images) == 12 and skipped == 0
    assert n_classes == 3
    assert labels.tolist() == [0] * 4 + [1] * 4 + [2] * 4


def test_npz_validation(tmp_path):
    bad = tmp_path / "bad.npz"
    np.savez(bad, images=np.zeros((2, 4, 4, 3), dtype=np.float32))
    with pytest.raises(DatasetError, match="uint8"):
        load_dataset(str(bad))
    np.savez(bad, pixels=np.zeros((2, 4, 4, 3), dtype=np.uint8))
    with pytest.raises(DatasetError, match="images"):
        load_dataset(str(bad))
    np.savez(
        bad,
        images=np.zeros((2, 4, 4, 3), dtype=np.uint8),
        labels=np.array([0, 1, 2]),
    )
    with pytest.raises(DatasetError, match="labels"):
        load_dataset(str(bad))


def test_image_dir_skips_unreadable(tmp_path, caplog):
    pytest.importorskip("PIL")
    from PIL import Image

    root = tmp_path / "data"
    for cls in ("cats", "dogs"):
        folder = root / cls
        folder.mkdir(parents=True)
        for i in range(2):
            Image.fromarray(
                np.full((8, 8, 3), 60 * i + 40, dtype=np.uint8)
            ).save(folder / f"{i}.png")
    (root / "cats" / "broken.png").write_bytes(b"not an image")

    with caplog.at_level(logging.WARNING):
        images, labels, n_classes, skipped = load_dataset(str(root))
    assert len(images) == 4 and skipped == 1
    assert n_classes == 2
    assert labels.tolist() == [0, 0, 1, 1]
    assert any("skipping unreadable" in r.message for r in caplog.records)


def test_empty_dir_errors(tmp_path):
    pytest.importorskip("PIL")
    root = tmp_path / "empty"
    root.mkdir()
    with pytest.raises(DatasetError, match="no readable images"):
        load_dataset(str(root))


# ---------------------------------------------------------------------------
# extract

def run_job(tmp_path, **overrides):
    params = dict(
        data=toy_npz(tmp_path),
        backbone="toy",
        n_aug_views=2,
        include_clean=True,
        batch_size=5,  # deliberately not a divisor of 12
        out=str(tmp_path / "out.scpf"),
        seed=0,
    )
    params.update(overrides)
    job = ExtractJob(**params)
    return job, extract(job)


def test_extract_header_matches_job(tmp_path):
    job, ds = run_job(tmp_path)
    loaded = load_scpf(job.out)
    assert loaded.features.shape == (12, 3, get_spec("toy").dim)
    assert loaded.view0_is_clean and not loaded.l2_normalized
    assert loaded.n_classes == 3
    np.testing.assert_array_equal(loaded.features, ds.features)
    np.testing.assert_array_equal(loaded.labels, ds.labels)


def test_extract_same_seed_byte_identical(tmp_path):
    job1, _ = run_job(tmp_path, out=str(tmp_path / "a.scpf"))
    job2, _ = run_job(tmp_path, out=str(tmp_path / "b.scpf"))
    assert open(job1.out, "rb").read() == open(job2.out, "rb").read()


def test_extract_batch_size_irrelevant(tmp_path):
    # augmentation draws are per-item, so batching only changes BLAS blocking
    _, a = run_job(tmp_path, batch_size=3, out=str(tmp_path / "a.scpf"))
    _, b = run_job(tmp_path, batch_size=12, out=str(tmp_path / "b.scpf"))
    np.testing.assert_allclose(a.features, b.features, atol=1e-5)


def test_clean_view_ignores_seed(tmp_path):
    _, a = run_job(tmp_path, seed=0, out=str(tmp_path / "a.scpf"))
    _, b = run_job(tmp_path, seed=99, out=str(tmp_path / "b.scpf"))
    np.testing.assert_array_equal(a.features[:, 0, :], b.features[:, 0, :])
    # augmented views do depend on the seed
    assert not np.array_equal(a.features[:, 1, :], b.features[:, 1, :])


def test_extract_without_clean_or_labels(tmp_path):
    job, ds = run_job(
        tmp_path,
        data=toy_npz(tmp_path, with_labels=False),
        include_clean=False,
        n_aug_views=2,
    )
    loaded = load_scpf(job.out)
    assert loaded.features.shape[1] == 2
    assert not loaded.view0_is_clean
    assert loaded.labels is None


def test_degenerate_single_view_warns_in_trainer(tmp_path, caplog):
    job, _ = run_job(tmp_path, n_aug_views=0, include_clean=True)
    loaded = load_scpf(job.out)
    assert loaded.n_views == 1
    scp_data._warned_single_view = False
    with caplog.at_level(logging.WARNING, logger="scpclust.data"):
        next(sample_pairs(loaded, 4, np.random.default_rng(0)))
    assert any("single-view" in r.message for r in caplog.records)


def test_job_validation(tmp_path):
    with pytest.raises(JobConfigError):
        ExtractJob(data="x.npz", n_aug_views=-1).validate()
    with pytest.raises(JobConfigError):
        ExtractJob(data="x.npz", n_aug_views=0, include_clean=False).validate()
    with pytest.raises(JobConfigError):
        ExtractJob(data="x.npz", batch_size=0).validate()
    with pytest.raises(JobConfigError):
        ExtractJob(data="x.npz", backbone="nope").validate()


def test_missing_dataset_errors(tmp_path):
    job = ExtractJob(data=str(tmp_path / "nope.npz"), backbone="toy")
    with pytest.raises(DatasetError):
        extract(job)
