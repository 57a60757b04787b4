"""CLI behavior and end-to-end interop with the clustering package."""

import numpy as np
import pytest

from scpclust import TrainConfig, load_scpf, train
from scpextract.cli import main

from test_extract import toy_npz


def test_cli_extract_and_verify(tmp_path, capsys):
    data = toy_npz(tmp_path)
    out = str(tmp_path / "feats.scpf")
    code = main([
        "extract", "--data", data, "--backbone", "toy",
        "--views", "2", "--batch-size", "5", "--out", out, "--seed", "1",
    ])
    assert code == 0
    assert "n_items=12" in capsys.readouterr().out

    code = main(["verify", out])
    assert code == 0
    text = capsys.readouterr().out
    assert text.startswith(f"ok {out}:")
    assert "n_views=3" in text and "view0_is_clean=true" in text


def test_cli_verify_rejects_corruption(tmp_path, capsys):
    data = toy_npz(tmp_path)
    out = str(tmp_path / "feats.scpf")
    assert main(["extract", "--data", data, "--backbone", "toy", "--out", out]) == 0
    capsys.readouterr()

    blob = open(out, "rb").read()
    bad = tmp_path / "bad.scpf"
    bad.write_bytes(b"XXXX" + blob[4:])
    assert main(["verify", str(bad)]) == 3

    short = tmp_path / "short.scpf"
    short.write_bytes(blob[:-9])
    assert main(["verify", str(short)]) == 3

    assert main(["verify", str(tmp_path / "missing.scpf")]) == 3


def test_cli_unknown_backbone(tmp_path):
    data = toy_npz(tmp_path)
    with pytest.raises(SystemExit):  # argparse rejects the choice itself
        main(["extract", "--data", data, "--backbone", "resnet50"])


def test_extracted_features_train_in_primary(tmp_path):
    data = toy_npz(tmp_path, n_per_class=8)
    out = str(tmp_path / "feats.scpf")
    assert main([
        "extract", "--data", data, "--backbone", "toy", "--views", "2",
        "--out", out, "--seed", "0",
    ]) == 0

    ds = load_scpf(out)
    cfg = TrainConfig(k=3, epochs=1, batch_size=8, eval_every_epochs=0, log_every=0)
    head, trace, report = train(ds, cfg)
    assert head.dim_in == ds.dim
    assert report.n_items == 24
    assert len(trace.records) == 3
    assert all(np.isfinite(p).all() for p in head.parameters())
