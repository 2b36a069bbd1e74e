"""Expansion kernel selection: compiled extension with pure-Python fallback.

The compiled kernel (`graphmill._kernel`, Cython) and the pure twin
(`graphmill._kernel_py`) implement identical semantics; the compiled one
releases the GIL inside the hot loop so multi-worker generation can use
real CPU parallelism. Selection order: explicit argument, then the
GRAPHMILL_KERNEL environment variable (`compiled` or `pure`), then
whatever is importable, preferring compiled.
"""

from __future__ import annotations

import os

from .errors import ConfigError

from . import _kernel_py

try:
    from . import _kernel  # compiled extension, optional
except ImportError:
    _kernel = None


def compiled_available() -> bool:
    return _kernel is not None


def load_kernel(name: str | None = None):
    """Return the kernel module to use; `name` in {None, 'auto', 'compiled', 'pure'}."""
    if name is None or name == "auto":
        name = os.environ.get("GRAPHMILL_KERNEL", "auto")
    if name in (None, "auto", ""):
        return _kernel if _kernel is not None else _kernel_py
    if name == "pure":
        return _kernel_py
    if name == "compiled":
        if _kernel is None:
            raise ConfigError("compiled kernel requested but graphmill._kernel is not built")
        return _kernel
    raise ConfigError(f"unknown kernel {name!r}")


def active_kind(name: str | None = None) -> str:
    return load_kernel(name).KIND


def available_kernels() -> list[str]:
    """The kernels importable right now, compiled first when built."""
    return ["compiled", "pure"] if _kernel is not None else ["pure"]
