import numpy as np
import pytest

from offswitch import kernels
from offswitch.kernels import _pykernels as py

ck = pytest.importorskip("offswitch.kernels._ckernels", reason="compiled kernels not built")


def test_splitmix64_reference_outputs():
    rng = py.SplitMix64(0)
    assert [rng.next() for _ in range(3)] == [0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4, 0x06C45D188009454F]


@pytest.mark.parametrize("args", [
    (1, 5000, 1, 0.3, 0.0, 1.0),
    (2, 5000, 3, 0.3, 0.1, 1.0),
    (3, 5000, 4, 0.7, 0.0, 0.5),
    (2**64 - 1, 100, 0, 0.5, 0.5, 0.5),
])
def test_glitch_backends_agree(args):
    assert ck.glitch_trials(*args) == py.glitch_trials(*args)


def test_forgery_backends_agree():
    targets = np.array([0, 5, 63, 2**40 + 3], dtype=np.uint64)
    widths = np.array([0, 3, 6, 12], dtype=np.int64)
    a = ck.forgery_attempts(7, targets, widths, 1 << 20)
    b = py.forgery_attempts(7, targets, widths, 1 << 20)
    assert np.array_equal(a, b)
    assert a[0] == 1


def test_forgery_cap():
    out = py.forgery_attempts(1, np.array([1], dtype=np.uint64), np.array([40], dtype=np.int64), 10)
    assert out[0] == 10


@pytest.mark.parametrize("args", [(4, 3000, 5, 0.95, 0.1), (5, 3000, 1, 0.5, 0.5), (6, 10, 0, 1.0, 0.0)])
def test_edit_backends_agree(args):
    assert ck.edit_trials(*args) == py.edit_trials(*args)


def test_collision_backends_agree():
    assert ck.collision_trials(9, 2000, 300, 16) == py.collision_trials(9, 2000, 300, 16)
    with pytest.raises(ValueError):
        ck.collision_trials(9, 1, 1, 40)


def test_dispatch_reports_backend():
    assert kernels.BACKEND in ("cython", "python")


def test_forced_fallback(monkeypatch):
    import importlib

    monkeypatch.setenv("OFFSWITCH_PURE_PYTHON", "1")
    reloaded = importlib.reload(kernels)
    try:
        assert reloaded.BACKEND == "python"
        assert reloaded.glitch_trials is py.glitch_trials
    finally:
        monkeypatch.delenv("OFFSWITCH_PURE_PYTHON")
        importlib.reload(kernels)
