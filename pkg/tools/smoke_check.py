#!/usr/bin/env python3
"""Lightweight local sanity checks for Social Interactions Lab."""

from __future__ import annotations

import compileall
import importlib
import platform
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
SRC_PATH = ROOT / "src"

if str(SRC_PATH) not in sys.path:
    sys.path.insert(0, str(SRC_PATH))

MODULES = [
    "numpy",
    "pandas",
    "scipy",
    "networkx",
    "sklearn",
    "jsonschema",
    "sil.model",
    "sil.data",
    "sil.identification",
    "sil.estimation",
    "sil.netstats",
    "sil.harness",
    "sil.counterfactual",
    "sil.storage",
    "sil.log_store",
    "sil.schemas",
    "sil.runconfig",
    "sil.cli",
]


def _module_version(name: str) -> str:
    module = importlib.import_module(name.split(".")[0])
    return getattr(module, "__version__", "unknown")


def _worked_example() -> bool:
    import numpy as np

    from sil.model import Network, StructuralParams, reduced_form

    w = Network(np.array([[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]]))
    pi = reduced_form(StructuralParams(w, 0.3, (0.5,), (0.4,))).first
    expected = np.array([[275.0, 310.0, 0.0], [310.0, 275.0, 0.0], [0.0, 0.0, 182.0]]) / 455.0
    return bool(np.max(np.abs(pi - expected)) <= 1e-12)


def main() -> int:
    print(f"Python: {platform.python_version()}")
    for module_name in MODULES:
        importlib.import_module(module_name)
    for name in ("numpy", "pandas", "scipy", "networkx", "sklearn", "jsonschema", "sil"):
        print(f"{name}: {_module_version(name)}")

    if not _worked_example():
        print("reduced-form worked example failed")
        return 1

    from sil import schemas

    for name in (schemas.CONFIG, schemas.RESULTS):
        for kind in schemas.kinds(name):
            schemas.validator(name, kind)

    ok = compileall.compile_dir(str(SRC_PATH), quiet=1)
    if not ok:
        print("compileall failed")
        return 1

    print("smoke check passed")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
