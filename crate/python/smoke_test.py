"""Smoke test for the fuselage extension module.

Build and install first, e.g.:
    pip install maturin && maturin develop --release -m crates/python/Cargo.toml
"""

import json
import os
import tempfile

import fuselage


def main():
    samples = fuselage.synth_dataset(6, seed=3, width=400, height=400, defects=1, kinds=["dent"])
    assert len(samples) == 6 and all(s.image.width == 400 for s in samples)
    assert sum(s.defect_pixels() for s in samples) > 0

    cfg = fuselage.PipelineConfig(seed=1)
    assert cfg.feature == "lbp" and cfg.mode == "washed" and not cfg.expansion_enabled()
    assert cfg.with_mode("unwashed").expansion_enabled()

    model = fuselage.train(samples[:4], cfg)
    assert len(model.weights) == 59
    assert fuselage.train(samples[:4], cfg).to_bytes() == model.to_bytes()

    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "model.bin")
        model.save(path)
        assert fuselage.Model.load(path).to_bytes() == model.to_bytes()

    held_out = samples[4]
    dmap = model.infer(held_out.image, image_id=held_out.id)
    entries = dmap.entries()
    assert len(entries) == dmap.rows * dmap.cols == 49
    assert {e[3] for e in entries} <= {"classifier", "expanded", "gated_out"}
    assert json.loads(dmap.to_json())["image_id"] == held_out.id
    assert fuselage.DefectMap.from_json(dmap.to_json()).defect_count() == dmap.defect_count()

    metrics = dmap.evaluate(held_out)
    assert metrics.tp + metrics.fp + metrics.tn + getattr(metrics, "fn") == 49
    print("held-out", metrics)

    full = model.classify_all(held_out.image)
    assert full.rows == dmap.rows
    timing = model.benchmark(held_out.image)
    assert timing["gated_patches"] <= timing["full_patches"]

    folds, mean, csv = fuselage.cross_validate(samples, k=3, config=cfg)
    assert len(folds) == 3 and csv.startswith("fold,")
    print("cv mean", mean)

    assert len(fuselage.patch_features(held_out.image, "hsv-hist")) == 96
    assert len(fuselage.patch_features(held_out.image, "surf")) == 64
    flat = fuselage.Image(64, 64, bytes([90] * 64 * 64 * 3))
    assert fuselage.detect_keypoints(flat) == []

    try:
        fuselage.PipelineConfig(patch_size=5)
    except ValueError:
        pass
    else:
        raise AssertionError("patch size 5 accepted")

    print("smoke test passed")


if __name__ == "__main__":
    main()
