"""SCPF serialization, pair sampling, concatenation, and blob generation."""

import logging

import numpy as np
import pytest

import scpclust as sc
from scpclust import data as data_mod


def small_dataset(rng, n=10, v=2, d=8, labels=True):
    feats = rng.normal(size=(n, v, d)).astype("<f4")
    return sc.EmbeddingDataset(
        features=feats,
        labels=rng.integers(0, 3, size=n).astype(np.int64) if labels else None,
        n_classes=3 if labels else None,
    )


# ---- SCPF round trips ----

def test_scpf_round_trip_bitwise(tmp_path):
    rng = np.random.default_rng(0)
    ds = small_dataset(rng)
    path = tmp_path / "a.scpf"
    sc.save_scpf(ds, str(path))
    got = sc.load_scpf(str(path))
    assert got.features.tobytes() == ds.features.tobytes()
    assert np.array_equal(got.labels, ds.labels)
    assert got.n_classes == 3
    # write -> load -> write reproduces identical bytes
    path2 = tmp_path / "b.scpf"
    sc.save_scpf(got, str(path2))
    assert path.read_bytes() == path2.read_bytes()


def test_scpf_optional_labels_absent(tmp_path):
    rng = np.random.default_rng(1)
    ds = small_dataset(rng, labels=False)
    path = tmp_path / "nolabel.scpf"
    sc.save_scpf(ds, str(path))
    got = sc.load_scpf(str(path))
    assert got.labels is None
    assert got.n_classes is None


def test_scpf_flags_round_trip(tmp_path):
    rng = np.random.default_rng(2)
    feats = rng.normal(size=(4, 3, 5))
    feats /= np.linalg.norm(feats, axis=2, keepdims=True)
    ds = sc.EmbeddingDataset(
        features=feats.astype("<f4"), l2_normalized=True, view0_is_clean=True
    )
    path = tmp_path / "flags.scpf"
    sc.save_scpf(ds, str(path))
    got = sc.load_scpf(str(path))
    assert got.l2_normalized and got.view0_is_clean


def test_scpf_truncation_names_offsets(tmp_path):
    rng = np.random.default_rng(3)
    ds = small_dataset(rng)
    path = tmp_path / "full.scpf"
    sc.save_scpf(ds, str(path))
    blob = path.read_bytes()
    cut = tmp_path / "cut.scpf"
    cut.write_bytes(blob[: len(blob) // 3])
    with pytest.raises(sc.FormatError, match=r"need bytes \[\d+, \d+\), file has \d+"):
        sc.load_scpf(str(cut))


def test_scpf_bad_magic_and_version(tmp_path):
    rng = np.random.default_rng(4)
    ds = small_dataset(rng)
    path = tmp_path / "x.scpf"
    sc.save_scpf(ds, str(path))
    blob = bytearray(path.read_bytes())

    bad = tmp_path / "bad.scpf"
    bad.write_bytes(b"NOPE" + bytes(blob[4:]))
    with pytest.raises(sc.FormatError, match="magic"):
        sc.load_scpf(str(bad))

    bad.write_bytes(bytes(blob[:4]) + (7).to_bytes(4, "little") + bytes(blob[8:]))
    with pytest.raises(sc.FormatError, match="version"):
        sc.load_scpf(str(bad))

    bad.write_bytes(bytes(blob) + b"\x00")
    with pytest.raises(sc.FormatError, match="trailing"):
        sc.load_scpf(str(bad))


def test_scpf_nan_features_rejected(tmp_path):
    rng = np.random.default_rng(5)
    feats = rng.normal(size=(3, 1, 4)).astype("<f4")
    feats[1, 0, 2] = np.nan
    ds = sc.EmbeddingDataset(features=feats)
    with pytest.raises(sc.DataError):
        sc.save_scpf(ds, str(tmp_path / "nan.scpf"))

    # craft the file directly so the load path is exercised too
    good = sc.EmbeddingDataset(features=rng.normal(size=(3, 1, 4)).astype("<f4"))
    path = tmp_path / "crafted.scpf"
    sc.save_scpf(good, str(path))
    blob = bytearray(path.read_bytes())
    blob[24:28] = np.array([np.nan], "<f4").tobytes()
    path.write_bytes(bytes(blob))
    with pytest.raises(sc.DataError):
        sc.load_scpf(str(path))


def test_scpf_label_out_of_range_rejected(tmp_path):
    rng = np.random.default_rng(6)
    ds = small_dataset(rng)
    path = tmp_path / "lbl.scpf"
    sc.save_scpf(ds, str(path))
    blob = bytearray(path.read_bytes())
    blob[-4:] = (99).to_bytes(4, "little")  # last label -> out of range
    path.write_bytes(bytes(blob))
    with pytest.raises(sc.DataError):
        sc.load_scpf(str(path))


def test_l2_flag_enforced():
    rng = np.random.default_rng(7)
    ds = sc.EmbeddingDataset(
        features=rng.normal(size=(3, 1, 4)).astype("<f4"), l2_normalized=True
    )
    with pytest.raises(sc.DataError, match="norm"):
        ds.validate()


# ---- pair sampling ----

def test_epoch_covers_every_item_once():
    rng = np.random.default_rng(0)
    ds = small_dataset(rng, n=5, v=2)
    batches = list(sc.sample_pairs(ds, 2, np.random.default_rng(1)))
    assert [b.item_ids.size for b in batches] == [2, 2, 1]
    ids = np.concatenate([b.item_ids for b in batches])
    assert sorted(ids.tolist()) == [0, 1, 2, 3, 4]


def test_pair_views_distinct_and_features_aligned():
    rng = np.random.default_rng(1)
    ds = small_dataset(rng, n=20, v=4)
    for batch in sc.sample_pairs(ds, 7, np.random.default_rng(2)):
        assert (batch.view_a != batch.view_b).all()
        for j, item in enumerate(batch.item_ids):
            assert np.array_equal(
                batch.feats_a[j], ds.features[item, batch.view_a[j]].astype(np.float64)
            )
            assert np.array_equal(
                batch.feats_b[j], ds.features[item, batch.view_b[j]].astype(np.float64)
            )


def test_clean_view_excluded_when_enough_augmented():
    rng = np.random.default_rng(2)
    feats = rng.normal(size=(30, 3, 4)).astype("<f4")
    ds = sc.EmbeddingDataset(features=feats, view0_is_clean=True)
    srng = np.random.default_rng(3)
    for _ in range(5):
        for batch in sc.sample_pairs(ds, 8, srng):
            assert (batch.view_a >= 1).all()
            assert (batch.view_b >= 1).all()


def test_two_views_with_clean_flag_fall_back_to_both():
    rng = np.random.default_rng(3)
    feats = rng.normal(size=(10, 2, 4)).astype("<f4")
    ds = sc.EmbeddingDataset(features=feats, view0_is_clean=True)
    batch = next(sc.sample_pairs(ds, 10, np.random.default_rng(0)))
    assert set(batch.view_a).issubset({0, 1})
    assert (batch.view_a != batch.view_b).all()


def test_single_view_self_pairs_with_one_warning(caplog):
    rng = np.random.default_rng(4)
    ds = small_dataset(rng, n=6, v=1)
    data_mod._warned_single_view = False
    with caplog.at_level(logging.WARNING, logger="scpclust.data"):
        list(sc.sample_pairs(ds, 3, np.random.default_rng(0)))
        list(sc.sample_pairs(ds, 3, np.random.default_rng(0)))
    assert sum("single-view" in r.message for r in caplog.records) == 1


def test_sampler_determinism():
    rng = np.random.default_rng(5)
    ds = small_dataset(rng, n=17, v=3)

    def epoch(seed):
        out = []
        for b in sc.sample_pairs(ds, 4, np.random.default_rng(seed)):
            out.append((b.item_ids.tolist(), b.view_a.tolist(), b.view_b.tolist()))
        return out

    assert epoch(42) == epoch(42)
    assert epoch(42) != epoch(43)


def test_view_pair_frequencies_uniform():
    # V=3 without a clean view: 3 unordered pairs, chi-square style 3-sigma check.
    rng = np.random.default_rng(6)
    feats = rng.normal(size=(100, 3, 2)).astype("<f4")
    ds = sc.EmbeddingDataset(features=feats, view0_is_clean=False)
    srng = np.random.default_rng(7)
    counts = {(0, 1): 0, (0, 2): 0, (1, 2): 0}
    draws = 0
    for _ in range(100):  # 100 epochs x 100 items = 10k draws
        for batch in sc.sample_pairs(ds, 100, srng):
            for a, b in zip(batch.view_a, batch.view_b):
                counts[tuple(sorted((int(a), int(b))))] += 1
                draws += 1
    expect = draws / 3
    sigma = np.sqrt(draws * (1 / 3) * (2 / 3))
    for pair, count in counts.items():
        assert abs(count - expect) < 3 * sigma, (pair, count, expect)


def test_batch_size_zero_rejected():
    rng = np.random.default_rng(8)
    ds = small_dataset(rng)
    with pytest.raises(sc.ConfigError):
        list(sc.sample_pairs(ds, 0, np.random.default_rng(0)))


# ---- concatenation ----

def test_concat_dims_add():
    rng = np.random.default_rng(9)
    a = small_dataset(rng, d=5)
    b = sc.EmbeddingDataset(
        features=rng.normal(size=(10, 2, 7)).astype("<f4"),
        labels=a.labels.copy(),
        n_classes=3,
    )
    merged = sc.concat_features(a, b)
    assert merged.dim == 12
    assert merged.n_items == 10
    assert np.array_equal(merged.features[:, :, :5], a.features)
    assert np.array_equal(merged.features[:, :, 5:], b.features)


def test_concat_self_doubles():
    rng = np.random.default_rng(10)
    a = small_dataset(rng, d=4)
    merged = sc.concat_features(a, a)
    assert np.array_equal(merged.features[:, :, :4], merged.features[:, :, 4:])


def test_concat_alignment_errors():
    rng = np.random.default_rng(11)
    a = small_dataset(rng, n=10)
    b = small_dataset(rng, n=11)
    with pytest.raises(sc.AlignmentError):
        sc.concat_features(a, b)

    c = small_dataset(rng, n=10, v=3)
    with pytest.raises(sc.AlignmentError):
        sc.concat_features(a, c)

    d = sc.EmbeddingDataset(
        features=a.features.copy(), labels=a.labels.copy(), n_classes=3
    )
    d.labels[4] = (d.labels[4] + 1) % 3
    with pytest.raises(sc.AlignmentError, match="item 4"):
        sc.concat_features(a, d)


# ---- synthetic blobs ----

def test_blobs_zero_view_noise_identical_views():
    ds = sc.make_blobs(3, 5, 8, center_sep=5.0, view_noise=0.0, n_views=3, seed=0)
    assert np.array_equal(ds.features[:, 0], ds.features[:, 1])
    assert np.array_equal(ds.features[:, 0], ds.features[:, 2])


def test_blobs_determinism():
    a = sc.make_blobs(4, 10, 8, seed=5)
    b = sc.make_blobs(4, 10, 8, seed=5)
    assert a.features.tobytes() == b.features.tobytes()
    assert np.array_equal(a.labels, b.labels)
    c = sc.make_blobs(4, 10, 8, seed=6)
    assert a.features.tobytes() != c.features.tobytes()


def test_blobs_center_separation():
    ds = sc.make_blobs(4, 50, 16, center_sep=9.0, view_noise=0.1, seed=2)
    # recover empirical centers from labels; they should be ~9 apart
    clean = ds.view(0)
    centers = np.stack([clean[ds.labels == k].mean(axis=0) for k in range(4)])
    for i in range(4):
        for j in range(i + 1, 4):
            d = np.linalg.norm(centers[i] - centers[j])
            assert 8.0 < d < 10.0


def test_blobs_structure_and_validation():
    ds = sc.make_blobs(3, 7, 8, n_views=2, seed=1)
    assert ds.n_items == 21
    assert ds.n_views == 2
    assert ds.view0_is_clean
    assert ds.n_classes == 3
    assert np.array_equal(np.bincount(ds.labels), [7, 7, 7])

    with pytest.raises(sc.ConfigError):
        sc.make_blobs(1, 5, 8)
    with pytest.raises(sc.ConfigError):
        sc.make_blobs(5, 5, 3)  # dim < n_clusters
    with pytest.raises(sc.ConfigError):
        sc.make_blobs(3, 5, 8, center_sep=0.0)
    with pytest.raises(sc.ConfigError):
        sc.make_blobs(3, 5, 8, view_noise=-1.0)
    with pytest.raises(sc.ConfigError):
        sc.make_blobs(3, 0, 8)
    with pytest.raises(sc.ConfigError):
        sc.make_blobs(3, 5, 8, n_views=0)


def test_blobs_kmeans_separable():
    ds = sc.make_blobs(5, 60, 16, center_sep=10.0, view_noise=0.5, seed=3)
    result = sc.kmeans(ds, 5, seed=0)
    acc, _ = sc.hungarian_acc(result.assignments, ds.labels)
    assert acc == 1.0
