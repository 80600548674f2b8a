"""Smoke test for the `ircount` extension module.

Build first with `cargo build -p ircount-py --release`, then run
`python3 python/smoke_test.py`. If `ircount` is not installed, the freshly
built library under target/ is loaded instead.
"""

import importlib.util
import json
import math
import pathlib
import shutil
import sys
import tempfile

ROOT = pathlib.Path(__file__).resolve().parent.parent


def load_module():
    try:
        import ircount

        return ircount
    except ImportError:
        pass
    for profile in ("release", "debug"):
        lib = ROOT / "target" / profile / "libircount.so"
        if lib.exists():
            tmp = pathlib.Path(tempfile.mkdtemp()) / "ircount.so"
            shutil.copy(lib, tmp)
            spec = importlib.util.spec_from_file_location("ircount", tmp)
            module = importlib.util.module_from_spec(spec)
            spec.loader.exec_module(module)
            return module
    sys.exit("ircount not found; run `cargo build -p ircount-py` first")


def close(a, b, tol=1e-12):
    return abs(a - b) <= tol


def main():
    ic = load_module()

    m = ic.match_points([(0.1, 0.1), (0.9, 0.9)], [(0.9, 0.9), (0.1, 0.1), (0.5, 0.5)])
    assert [(g, p) for g, p, _ in m.pairs] == [(0, 1), (1, 0)], m.pairs
    assert m.unmatched_pred == 1 and m.unmatched_gt == 0
    assert close(m.objective(1.0), 1.0)
    assert close(ic.brute_force_match([(0.1, 0.1)], [(0.4, 0.5)]).objective(1.0), 0.5)
    assert ic.hungarian([[4, 1, 3], [2, 0, 5], [3, 2, 2]]) == [(0, 1), (1, 0), (2, 2)]

    d = 0.3
    assert close(ic.maed_image([(0.2, 0.2)], [(0.2, 0.2 + d), (0.7, 0.7)]), (d * d + 1) / 2)
    assert close(ic.maed([[], [(0.5, 0.5)]], [[], []]), 0.5)

    r = ic.count_metrics([1, 2, 2, 0], [1, 3, 2, 0], per_class=True)
    assert close(r["accuracy"], 0.75) and close(r["mse"], 0.25)
    assert r["per_class"][2] == (0.5, 2, 1)
    assert ic.decide_count_regression(2.5) == 3
    assert ic.decide_count_classification([0.1, 0.7, 0.7]) == 1

    assert close(ic.iou((0.5, 0.5, 0.2, 0.2), (0.5, 0.5, 0.2, 0.2)), 1.0)
    assert ic.nms([(0.5, 0.5, 0.2, 0.2, 0.6), (0.5, 0.5, 0.2, 0.2, 0.9), (0.1, 0.1, 0.05, 0.05, 0.3)]) == [1, 2]
    assert len(ic.threshold_grid()) == 1001

    frame = [float(v) for v in range(1, 101)]
    clipped = ic.winsorize(frame, 10)
    assert close(min(clipped), 5.95, 1e-9) and close(max(clipped), 95.05, 1e-9)
    assert ic.normalize_unit([3.0, 3.0]) == [0.0, 0.0]

    scene = ic.synth_scene(3, seed=5)
    assert len(scene.points) == 3 and len(scene.values) == 64 * 64
    loc = ic.locate_people(scene.values, scene.width, 3, seed=1)
    assert loc.branch == "exact" and not loc.degenerate
    for px, py in loc.points:
        nearest = min(math.hypot(px - gx, py - gy) for gx, gy in scene.points)
        assert nearest < 1.5 / 64, nearest

    assert close(ic.break_even([0.1, 0.2, 0.5], [0.70, 0.85, 0.90], 0.79), 0.16)
    assert ic.break_even([0.1, 0.2], [0.5, 0.6], 0.9) is None

    manifest = {
        "name": "toy",
        "records": [{"id": f"i{k}", "width": 8, "height": 8, "count": k % 3} for k in range(10)],
    }
    ds = ic.Dataset.from_json(json.dumps(manifest))
    train, test = ds.split(7, 42)
    assert len(train) == 7 and len(test) == 3
    assert sorted(train.ids() + test.ids()) == sorted(ds.ids())
    assert [len(s) for s in ds.ablate([0.5, 1.0], 0)] == [5, 10]
    try:
        ic.Dataset.from_json('{"name": "x", "records": [{"id": "a", "width": 0, "height": 8}]}')
    except ValueError:
        pass
    else:
        raise AssertionError("invalid manifest accepted")

    print(f"ircount {ic.__version__}: smoke test passed")


if __name__ == "__main__":
    main()
