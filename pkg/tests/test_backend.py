import os
import subprocess
import sys

import numpy as np
import pytest

from superheat import _backend, _pure

core = pytest.importorskip("superheat._core")


def chord_inputs(rng, n=5000, m=7, pad=20):
    cum = np.concatenate([[0.0], np.cumsum(rng.standard_normal(n + 2 * pad))])
    centers = rng.integers(pad, n + pad, size=400).astype(np.intp)
    offsets = rng.integers(-3, 4, size=m).astype(np.intp)
    widths = rng.integers(0, 10, size=m).astype(np.intp)
    return cum, centers, offsets, widths


@pytest.mark.parametrize("seed", range(5))
def test_chord_sums_bitwise(seed):
    args = chord_inputs(np.random.default_rng(seed))
    np.testing.assert_array_equal(core.chord_sums(*args), _pure.chord_sums(*args))


@pytest.mark.parametrize("shape,nw", [((3, 50), 5), ((40, 257), 33), ((1, 9), 9)])
def test_correlate_rows_matches(shape, nw):
    rng = np.random.default_rng(nw)
    rows, w = rng.standard_normal(shape), rng.random(nw)
    a, b = core.correlate_rows(rows, w), _pure.correlate_rows(rows, w)
    assert a.shape == (shape[0], shape[1] - nw + 1)
    np.testing.assert_array_equal(a, b)


def test_env_forces_fallback():
    code = "from superheat import _backend; print(_backend.NAME)"
    env = {**os.environ, "SUPERHEAT_PURE": "1"}
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
    assert out.stdout.strip() == "python"
    assert _backend.NAME in ("cython", "python")
