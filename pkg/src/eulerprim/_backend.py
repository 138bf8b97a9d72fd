"""Select the compiled kernel core when available.

Set ``EULERPRIM_BACKEND=python`` to force the numpy fallback.
"""

import os

from . import _pykernels

kernels = _pykernels
if os.environ.get("EULERPRIM_BACKEND", "").lower() != "python":
    try:
        from . import _kernels as kernels  # noqa: F811
    except ImportError:
        kernels = _pykernels

BACKEND = kernels.NAME


def get(name: str):
    """Kernel module by name: 'python' or 'cython'."""
    if name == "python":
        return _pykernels
    if name == "cython":
        from . import _kernels

        return _kernels
    raise ValueError(f"unknown backend {name!r}")
