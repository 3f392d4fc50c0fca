"""Pick the compiled kernels when built, else the pure-Python ones."""

from __future__ import annotations

import importlib
import os


def _load():
    if os.environ.get("ARTIFACT_PURE_PYTHON") != "1":
        try:
            return "compiled", importlib.import_module("artifact._kernels")
        except ImportError:
            pass
    return "python", importlib.import_module("artifact._pykernels")


BACKEND, _impl = _load()
fold_edges = _impl.fold_edges
read_all = _impl.read_all
