import json
import shutil
from pathlib import Path

import numpy as np
import pytest

from smokelab.arrays import BG, HIGH, LOW
from smokelab.fileio import load_mask, load_probmap, save_mask, save_opacity, save_probmap
from smokelab.minidata import write_mini_dataset
from smokelab.pipeline import (RunConfig, frame_paths, resolve_seed, run_crop, run_evaluate,
                               run_pseudolabel, video_seed)
from PIL import Image


@pytest.fixture
def mini(tmp_path):
    return write_mini_dataset(tmp_path / "mini")


def test_mini_pseudolabel(mini):
    cfg = RunConfig.from_json(mini / "config.json")
    m = run_pseudolabel(cfg)
    status = {v["video_id"]: v["status"] for v in m["videos"]}
    assert status == {"vid_001": "processed", "vid_002": "skipped", "vid_003": "processed"}
    out = mini / "out"
    assert sorted(p.name for p in out.iterdir() if p.is_dir()) == ["vid_001", "vid_003"]
    v1 = next(v for v in m["videos"] if v["video_id"] == "vid_001")
    assert v1["selected_frames"] == [3, 4, 5, 6, 7]
    for rel in v1["output_mask_paths"]:
        vid, idx = rel.split("/")
        src = load_probmap(mini / "frames" / vid / idx)
        assert load_mask(out / rel).shape == src.shape
    assert m["summary"] == {"processed": 2, "skipped": 1, "error": 0}
    assert json.loads((out / "manifest.json").read_text()) == m


def test_rerun_byte_identical(mini):
    cfg = RunConfig.from_json(mini / "config.json")
    run_pseudolabel(cfg)
    first = {p.relative_to(mini / "out"): p.read_bytes() for p in (mini / "out").rglob("*") if p.is_file()}
    shutil.rmtree(mini / "out")
    run_pseudolabel(cfg, jobs=4)
    second = {p.relative_to(mini / "out"): p.read_bytes() for p in (mini / "out").rglob("*") if p.is_file()}
    assert first == second


def test_errors_recorded_and_run_continues(mini):
    (mini / "frames" / "vid_004").mkdir()
    (mini / "frames" / "vid_005").mkdir()
    save_probmap(np.zeros((8, 8)), mini / "frames" / "vid_005" / "0.png")
    save_probmap(np.zeros((9, 8)), mini / "frames" / "vid_005" / "1.png")
    m = run_pseudolabel(RunConfig.from_json(mini / "config.json"))
    by_id = {v["video_id"]: v for v in m["videos"]}
    assert by_id["vid_004"]["status"] == "error" and "no probability maps" in by_id["vid_004"]["reason"]
    assert by_id["vid_005"]["status"] == "error" and "differing shapes" in by_id["vid_005"]["reason"]
    assert by_id["vid_004"]["label_raw"] == -1
    assert by_id["vid_001"]["status"] == "processed"
    assert len(m["videos"]) == 5


def test_empty_root(tmp_path):
    (tmp_path / "frames").mkdir()
    (tmp_path / "labels.csv").write_text("video_id,label\n")
    cfg = RunConfig("frames", "labels.csv", "out", base_dir=str(tmp_path))
    with pytest.raises(ValueError, match="no videos found"):
        run_pseudolabel(cfg)


def test_config_validation(tmp_path):
    with pytest.raises(ValueError, match="unknown config keys"):
        RunConfig.from_dict({"dataset_root": "a", "labels_csv": "b", "output_dir": "c", "bogus": 1})
    with pytest.raises(ValueError):
        RunConfig("a", "b", "c", parallelism=0)
    cfg = RunConfig.from_dict({"dataset_root": "a", "labels_csv": "b", "output_dir": "/abs",
                               "selection": {"top_k": 5}}, base_dir=tmp_path)
    assert cfg.selection.top_k == 5
    assert cfg.path("dataset_root") == tmp_path / "a"
    assert cfg.path("output_dir") == Path("/abs")


def test_seed_precedence(monkeypatch):
    monkeypatch.delenv("SMOKELAB_SEED", raising=False)
    assert resolve_seed(3) == 3
    monkeypatch.setenv("SMOKELAB_SEED", "11")
    assert resolve_seed(3) == 11
    assert resolve_seed(3, 5) == 5


def test_video_seed_stable():
    assert video_seed(0, "vid_001") == video_seed(0, "vid_001")
    assert video_seed(0, "vid_001") != video_seed(1, "vid_001")
    assert 0 <= video_seed(0, "x") < 2**64


def test_frame_order_numeric(tmp_path):
    for i in (0, 2, 10, 1):
        save_probmap(np.zeros((2, 2)), tmp_path / f"{i}.png")
    assert [p.stem for p in frame_paths(tmp_path)] == ["0", "1", "2", "10"]


def _write_pair(root, name, pred, gt, truth=None):
    save_mask(pred, root / "pred" / name)
    save_mask(gt, root / "gt" / name)
    if truth is not None:
        save_opacity(truth, root / "op" / name)


def test_evaluate_perfect(tmp_path, rng):
    for i in range(3):
        m = rng.random((6, 6)) > 0.5
        _write_pair(tmp_path, f"img{i}.png", m, m)
    rep = run_evaluate(tmp_path / "pred", tmp_path / "gt", tmp_path / "rep")
    for k in ("recall", "precision", "f1", "iou_smoke", "iou_background", "miou"):
        assert rep.means[k] == 1.0
    assert rep.means["mmse"] == 0.0
    csv_lines = (tmp_path / "rep" / "report.csv").read_text().splitlines()
    assert csv_lines[0].startswith("recall,precision,f1,iou_smoke")
    data = json.loads((tmp_path / "rep" / "report.json").read_text())
    assert len(data["rows"]) == 3 and data["mode"] == "macro"


def test_evaluate_worked_example(tmp_path):
    row = lambda *idx: np.isin(np.arange(4), idx)[None, :]  # noqa: E731
    truth = np.array([[HIGH, LOW, BG, BG]], np.uint8)
    _write_pair(tmp_path, "a.png", row(1, 2), row(0, 1), truth)
    rep = run_evaluate(tmp_path / "pred", tmp_path / "gt", tmp_path / "rep", opacity_dir=tmp_path / "op")
    r = rep.rows[0]
    assert r["image"] == "a.png"
    assert (r["recall"], r["precision"], r["f1"], r["mmse"]) == (0.5, 0.5, 0.5, 0.5)
    assert r["iou_smoke"] == pytest.approx(1 / 3, abs=1e-15)
    assert r["recall_high"] == 0.0 and r["recall_low"] == 1.0


def test_evaluate_opacity_only_and_micro(tmp_path):
    truth = np.array([[HIGH, LOW, BG, BG]], np.uint8)
    save_mask(np.array([[True, True, False, False]]), tmp_path / "pred" / "x.png")
    save_opacity(truth, tmp_path / "op" / "x.png")
    rep = run_evaluate(tmp_path / "pred", None, tmp_path / "rep", opacity_dir=tmp_path / "op", micro=True)
    assert rep.mode == "micro" and rep.means["recall"] == 1.0 and rep.means["recall_high"] == 1.0


def test_evaluate_orphans(tmp_path):
    _write_pair(tmp_path, "a.png", np.ones((2, 2)), np.ones((2, 2)))
    save_mask(np.ones((2, 2)), tmp_path / "pred" / "b.png")
    save_mask(np.ones((2, 2)), tmp_path / "gt" / "c.png")
    with pytest.raises(ValueError) as exc:
        run_evaluate(tmp_path / "pred", tmp_path / "gt", tmp_path / "rep")
    assert "b.png" in str(exc.value) and "c.png" in str(exc.value)


def test_evaluate_prob_predictions(tmp_path):
    save_probmap(np.array([[0.9, 0.2]]), tmp_path / "pred" / "a.png")
    save_mask(np.array([[True, False]]), tmp_path / "gt" / "a.png")
    rep = run_evaluate(tmp_path / "pred", tmp_path / "gt", tmp_path / "rep", mmse_mode="prob")
    assert rep.means["recall"] == 1.0
    assert rep.means["mmse"] == pytest.approx((0.1 ** 2 + 0.2 ** 2) / 2, abs=1e-5)  # 16-bit quantisation


def test_run_crop(tmp_path, rng):
    img = (rng.random((30, 40, 3)) * 255).astype(np.uint8)
    gt = np.zeros((30, 40), bool)
    gt[5:8, 5:8] = gt[20:25, 30:35] = True
    (tmp_path / "img").mkdir()
    Image.fromarray(img).save(tmp_path / "img" / "a.png")
    save_mask(gt, tmp_path / "msk" / "a.png")
    from smokelab.cropping import PatchSpec
    rec = run_crop(tmp_path / "img", tmp_path / "msk", tmp_path / "out", PatchSpec(16, 4, 1))
    assert len(rec["images"]["a.png"]) == 5
    for k, r in enumerate(rec["images"]["a.png"]):
        patch = np.asarray(Image.open(tmp_path / "out" / "images" / f"a_{k}.png"))
        np.testing.assert_array_equal(patch, img[r["top"]:r["top"] + 16, r["left"]:r["left"] + 16])
        assert Image.open(tmp_path / "out" / "masks" / f"a_{k}.png").size == (16, 16)
    rec2 = run_crop(tmp_path / "img", tmp_path / "msk", tmp_path / "out2", PatchSpec(16, 4, 1))
    assert rec2 == rec
