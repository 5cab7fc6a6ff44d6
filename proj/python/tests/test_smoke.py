import numpy as np
import pytest

import cxr_cad


def test_paper_matrix_report():
    r = cxr_cad.report([[260, 24, 4], [16, 494, 8], [0, 0, 42]])
    assert r["n"] == 848 and r["correct"] == 796
    assert r["accuracy"] == pytest.approx(796 / 848)
    assert r["per_class"]["covid19"]["recall"] == 1.0
    assert r["per_class"]["covid19"]["precision"] == pytest.approx(42 / 54)
    assert (r["binary"]["tp"], r["binary"]["fp"], r["binary"]["fn"]) == (42, 12, 0)
    assert r["kappa"] == pytest.approx(0.8805, abs=5e-5)


def test_undefined_precision_is_none():
    r = cxr_cad.report([[5, 0, 0], [0, 5, 0], [3, 0, 0]])
    assert r["per_class"]["covid19"]["precision"] is None
    assert r["warnings"]


def test_phantom_preprocess_shapes():
    img = cxr_cad.generate_phantom("covid19", 3, 64)
    assert img.shape == (64, 64)
    assert np.array_equal(img, cxr_cad.generate_phantom("covid19", 3, 64))
    sample, removed = cxr_cad.preprocess(img, "full")
    assert sample.shape == (3, 224, 224)
    assert removed
    assert sample.min() >= 0.0 and sample.max() <= 1.0
    simple, removed_simple = cxr_cad.preprocess(img, "simple")
    assert not removed_simple
    assert np.array_equal(simple[0], simple[1]) and np.array_equal(simple[1], simple[2])


def test_bilateral_huge_sigma_range_is_gaussian_blur():
    rng = np.random.default_rng(1)
    img = rng.random((12, 12))
    out = cxr_cad.bilateral_filter(img, 2, 1.5, 1e6)
    r = np.arange(-2, 3)
    w = np.exp(-(r[:, None] ** 2 + r[None, :] ** 2) / (2 * 1.5**2))
    y, x = 6, 5
    ref = (w * img[y - 2 : y + 3, x - 2 : x + 3]).sum() / w.sum()
    assert out[y, x] == pytest.approx(ref, abs=1e-6)


def test_param_counts():
    assert cxr_cad.vgg16_transfer_param_count(5)[1] == 6_456_067
    total, trainable = cxr_cad.param_count(8, [4], 2, [8, 4], 0)
    assert total == trainable == 112 + 148 + (64 * 8 + 8) + (8 * 4 + 4) + (4 * 3 + 3)


def test_errors_are_translated(tmp_path):
    with pytest.raises(cxr_cad.CxrError, match="data"):
        cxr_cad.report([[0, 0, 0], [0, 0, 0], [0, 0, 0]])
    with pytest.raises(cxr_cad.CxrError, match="usage"):
        cxr_cad.preprocess(np.zeros((8, 8)), "full", {"preprocess.connectivity": "5"})
    with pytest.raises(cxr_cad.CxrError, match="data"):
        cxr_cad.load_image(tmp_path / "missing.pgm")


def test_tiny_pipeline(tmp_path):
    manifest = cxr_cad.make_phantoms(tmp_path / "ph", count=10, seed=1, size=48)
    cfg = {
        "paths.manifest": str(manifest),
        "paths.samples": str(tmp_path / "samples"),
        "paths.reports": str(tmp_path / "reports"),
        "optimizer.max_epochs": "2",
        "net.input_size": "16",
    }
    ok, failed = cxr_cad.run_preprocess(cfg, "full")
    assert (ok, failed) == (30, 0)
    r = cxr_cad.run(cfg, "full")
    assert r["n"] == 3
    assert len(r["train_acc"]) == 2
    assert (tmp_path / "reports" / "full" / "report.txt").exists()
