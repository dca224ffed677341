import json
import math
import os

import cv2
import numpy as np
import pytest

import castscan


def synth(ide, seed, side=64):
    rng = np.random.default_rng(seed)
    img = rng.uniform(0.2, 0.8, (side, side))
    img[: side // 4, : side // 4] = 1.0 if ide else 0.1
    return (img * 255).round().astype(np.uint8)


def test_schedule_and_metrics():
    assert castscan.sample_schedule(600, 30) == [30.0 * k for k in range(21)]
    m = castscan.metrics(16, 1, 0)
    assert m["precision"] == pytest.approx(16 / 17)
    assert m["f1"] == pytest.approx(0.9697, abs=1e-4)


def test_nrmse_and_duplicates():
    ref = np.ones((2, 2))
    other = ref.copy()
    other[1, 1] = 0
    assert castscan.nrmse(ref, other) == 0.5
    assert castscan.nrmse(ref, ref) == 0.0
    a = np.zeros((8, 8), np.float32)
    b = np.ones((8, 8), np.float32)
    marked = castscan.mark_duplicates([b, b, a, a], 0.05)
    assert marked["duplicate"] == [False, True, False, True]
    assert marked["reference_index"] == [None, 0, 0, 2]
    with pytest.raises(ValueError):
        castscan.mark_duplicates([], 0.05)


def test_decide():
    assert castscan.decide(["ide"] * 4)["is_screencast"]
    v = castscan.decide(["ide", "ide", None, "ide", "ide"])
    assert not v["is_screencast"]
    assert v["longest_run"] == 2
    assert v["n_info"] == 4


def test_baselines():
    truth = {f"p{i}": True for i in range(16)} | {f"n{i}": False for i in range(7)}
    allpos = castscan.all_positive_baseline(truth)
    assert allpos["precision"] == pytest.approx(16 / 23)
    rnd = castscan.random_baseline(truth, runs=2000, seed=1)
    assert abs(rnd["recall"] - 0.5) < 0.03
    assert "tp" not in rnd


def test_load_frame(tmp_path):
    path = tmp_path / "f.png"
    cv2.imwrite(str(path), synth(True, 1))
    frame = castscan.load_frame(path)
    assert frame.shape == (castscan.FRAME_SIDE, castscan.FRAME_SIDE)
    assert frame.dtype == np.float32
    assert frame[:8, :8].mean() > 0.9
    with pytest.raises(castscan.DecodeError):
        castscan.load_frame(tmp_path / "missing.png")


def test_scan(tmp_path):
    videos = {"live": [True] * 5, "talk": [False] * 5}
    with open(tmp_path / "manifest.jsonl", "w") as out:
        for vid, shots in videos.items():
            d = tmp_path / vid
            d.mkdir()
            for i, ide in enumerate(shots):
                cv2.imwrite(str(d / f"frame_{30 * i}.png"), synth(ide, hash((vid, i)) % 1000))
            out.write(json.dumps({"video_id": vid, "source": vid, "truth_label": shots[0]}) + "\n")
    records = castscan.scan(tmp_path / "manifest.jsonl", classifier="marker_oracle", jobs=1)
    by_type = {}
    for r in records:
        by_type.setdefault(r["type"], []).append(r)
    verdicts = {r["video_id"]: r["verdict"]["is_screencast"] for r in by_type["video"]}
    assert verdicts == {"live": True, "talk": False}
    assert by_type["summary"][0]["failed"] == 0
    with pytest.raises(ValueError):
        castscan.scan(tmp_path / "manifest.jsonl", bogus_key=1)
