"""Arithmetic of X-type qudit operators over Z_d.

An X-type operator on n qudits is stored as its exponent vector: entry k
on a site means the cyclic shift X^k acts there.  Composition adds
exponents mod d, the identity is the zero vector, and phases are never
tracked -- commutation with Z-type operators is summarized by an integer
exponent of omega = exp(2*pi*i/d).
"""

from __future__ import annotations

import numpy as np


def as_exponents(values, d: int) -> np.ndarray:
    """Coerce ``values`` to an integer exponent vector reduced mod d."""
    if d < 2:
        raise ValueError(f"qudit dimension must be >= 2, got {d}")
    arr = np.asarray(values, dtype=np.int64)
    return np.mod(arr, d)


def _check_same_length(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")


def compose(a, b, d: int) -> np.ndarray:
    """Compose two X-type operators: component-wise exponent sum mod d.

    This is the group operation on Z_d^n; the zero vector is the identity
    and ``negate`` gives inverses.
    """
    av, bv = as_exponents(a, d), as_exponents(b, d)
    _check_same_length(av, bv)
    return (av + bv) % d


def negate(a, d: int) -> np.ndarray:
    """Inverse of an X-type operator: component-wise negation mod d."""
    return (-as_exponents(a, d)) % d


def commutation_exponent(x_powers, z_powers, d: int) -> int:
    """Exponent of omega picked up commuting a Z-type past an X-type operator.

    For tensor products of Z^{a_i} and X^{b_i} the phase is
    omega^(sum_i a_i * b_i); the returned value is that sum mod d.
    """
    xv, zv = as_exponents(x_powers, d), as_exponents(z_powers, d)
    _check_same_length(xv, zv)
    return int(np.dot(xv, zv) % d)
