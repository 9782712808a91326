"""Smoke test for the pyheavybranch extension.

Build and run from the repository root:

    cargo build --release -p heavybranch-py --features extension-module
    cp target/release/libpyheavybranch.so python/pyheavybranch.so
    python3 python/smoke_test.py
"""

import json
import math
import os
import sys
import tempfile

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import pyheavybranch as hb


def main():
    a = hb.Distribution("bernoulli", p=0.5)
    b = hb.Distribution("discrete_pareto", alpha=0.8, scale=1.0)
    assert a.family == "bernoulli"
    assert b.tail_index == 0.8
    assert abs(b.tail_prob(0) - 1.0) < 1e-12

    model = hb.Model(a, b, regime="model_i")
    assert model.mu == 0.5
    report = hb.check_ergodicity(model)
    assert report["ergodic"], report

    path = model.simulate_path(10_000, seed=1)
    assert len(path) == 10_000
    assert path == model.simulate_path(10_000, seed=1)
    assert path != model.simulate_path(10_000, seed=2)

    c = hb.model1_tail_constant(0.5, 0.8)
    assert abs(c - 1.0 / (1.0 - 0.5 ** 0.8)) < 1e-12
    theta = hb.extremal_index(0.5, 0.8)
    assert abs(theta - (1.0 - 0.5 ** 0.8)) < 1e-15

    xs = model.sample_stationary(50_000, seed=3)
    h = hb.hill(xs, 500)
    assert 0.6 < h["alpha_hat"] < 1.0, h

    light = hb.Model(a, hb.Distribution("bernoulli", p=0.5))
    mean, var = light.stationary_moments()
    pmf = light.stationary_pmf()
    assert abs(sum(pmf) - 1.0) < 1e-9
    assert abs(sum(n * p for n, p in enumerate(pmf)) - mean) < 1e-9
    lrv = hb.long_run_variance(light.simulate_path(100_000, seed=4))
    assert math.isfinite(lrv) and lrv > 0

    # `lambda` is a Python keyword, so pass it through a dict
    supercritical = hb.Model(hb.Distribution("poisson", **{"lambda": 1.5}),
                             hb.Distribution("poisson", **{"lambda": 1.0}))
    try:
        supercritical.validate()
    except ValueError as e:
        assert "ergodic" in str(e)
    else:
        raise AssertionError("non-ergodic model accepted")

    cfg = {"model": json.loads(light.to_json()), "sizes": {"n": 100}, "seed": 7}
    with tempfile.TemporaryDirectory() as out:
        digest = hb.run_experiment(json.dumps(cfg), "simulate", out)
        assert digest.startswith("simulate:"), digest
        assert os.path.exists(os.path.join(out, "simulate.csv"))

    print("smoke test ok:", digest)


if __name__ == "__main__":
    main()
