"""JSON-friendly encodings for complex matrices and vectors.

Complex arrays serialize as nested lists of [re, im] pairs, which keeps
test fixtures human-readable and diffable.
"""

from __future__ import annotations

import numpy as np


def complex_to_json(array) -> list:
    """Encode a complex vector or matrix as nested [re, im] pairs."""
    a = np.asarray(array, dtype=complex)
    if a.ndim == 1:
        return [[float(z.real), float(z.imag)] for z in a]
    if a.ndim == 2:
        return [[[float(z.real), float(z.imag)] for z in row] for row in a]
    raise ValueError(f"only 1- or 2-d arrays supported, got ndim={a.ndim}")


def complex_from_json(data) -> np.ndarray:
    """Decode the nested [re, im] encoding back into a complex array."""
    a = np.asarray(data, dtype=float)
    if a.ndim == 2 and a.shape[-1] == 2:
        return a[..., 0] + 1j * a[..., 1]
    if a.ndim == 3 and a.shape[-1] == 2:
        return a[..., 0] + 1j * a[..., 1]
    raise ValueError(f"unrecognized complex encoding with shape {a.shape}")
