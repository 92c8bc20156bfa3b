"""Backend selection for the numerical kernels.

The compiled ``_ckernels`` extension is used when it was built; otherwise the
numpy implementations in ``_pykernels`` are used. Setting the environment
variable ``STAGEGAME_PURE_PYTHON=1`` forces the numpy backend.
"""
import importlib
import os

from . import _pykernels

UNREACHABLE = _pykernels.UNREACHABLE


def available_backends():
    names = ["python"]
    try:
        importlib.import_module("stagegame._ckernels")
    except ImportError:
        pass
    else:
        names.insert(0, "cython")
    return names


def get_backend(name):
    if name == "python":
        return _pykernels
    if name == "cython":
        return importlib.import_module("stagegame._ckernels")
    raise ValueError(f"unknown kernel backend {name!r}")


def _select():
    if os.environ.get("STAGEGAME_PURE_PYTHON", "") not in ("", "0"):
        return "python"
    return available_backends()[0]


BACKEND = _select()
_impl = get_backend(BACKEND)

bfs_hops = _impl.bfs_hops
received_power_field = _impl.received_power_field
max_power_field = _impl.max_power_field
coverage_sums = _impl.coverage_sums
mf_sweep = _impl.mf_sweep
free_energy = _impl.free_energy
