"""Belief propagation between neighboring renormalization cells.

Cells share their boundary qudits 0, 1, 8, 9 with their neighbors; message
passing reconciles the marginal beliefs about those shared qudits before a
renormalization round.  A cell sends its outgoing message on qudit 0 to
the cell above, where it arrives as the incoming message on qudit 9, and
its message on qudit 1 to the cell to the west, arriving on qudit 8 (and
conversely).

Messages are distributions over one-qudit X-exponents.  The first round
sends the defect-conditioned marginal of each boundary qudit; subsequent
rounds weight each cell configuration by the incoming messages of the
other three boundary qudits and divide out the qudit's own prior, so a
message never echoes the recipient's own evidence back to it.
"""

from __future__ import annotations

import numpy as np

from .cell import (BOUNDARY_QUDITS, CellBasis, batch_weights,
                   defect_representative, _shift_rows)
from .noise import DegenerateDistributionError

# Enumeration-coordinate axis (within the 7 coordinate axes, 0-based) and
# sign through which each boundary qudit's exponent is determined:
# qudit 0 = s0, qudit 1 = s1, qudit 8 = e0, qudit 9 = -e1.
_COORD_AXIS = {0: 4, 1: 5, 8: 2, 9: 3}
_COORD_SIGN = {0: +1, 1: +1, 8: +1, 9: -1}


def _interior_product(d: int, shifted: np.ndarray) -> np.ndarray:
    """Product of the six interior qudit priors over all (l, e, s) terms."""
    from .cell import _enum_tables

    base_cfg = _enum_tables(d)
    w = np.take(shifted[:, 2, :], base_cfg[:, 2], axis=1)
    for q in range(3, 8):
        w *= np.take(shifted[:, q, :], base_cfg[:, q], axis=1)
    return w


def _boundary_vector(d: int, shifted: np.ndarray, q: int, m_loc=None) -> np.ndarray:
    """Per-coordinate factor of boundary qudit q: prior (times message).

    Returns (R, d) indexed by the value of q's enumeration coordinate.
    """
    idx = (_COORD_SIGN[q] * np.arange(d)) % d
    vec = shifted[:, q, :][:, idx]
    if m_loc is not None:
        k = BOUNDARY_QUDITS.index(q)
        vec = vec * m_loc[:, k, :][:, idx]
    return vec


def _bcast(vec: np.ndarray, q: int, d: int) -> np.ndarray:
    """Reshape an (R, d) coordinate vector for broadcasting over (R, d^7)."""
    shape = [vec.shape[0]] + [1] * 7
    shape[1 + _COORD_AXIS[q]] = d
    return vec.reshape(shape)


def _scatter_messages(raw: np.ndarray, q: int, tvec: np.ndarray, d: int) -> np.ndarray:
    """Map per-coordinate sums to exponent space: p = sign*c + t_q mod d."""
    R = raw.shape[0]
    exps = (_COORD_SIGN[q] * np.arange(d)[None, :] + tvec[:, q, None]) % d
    out = np.zeros((R, d))
    np.put_along_axis(out, exps, raw, axis=1)
    return out


def _normalize_messages(msgs: np.ndarray):
    """Normalize rows in place; zero-mass rows fall back to uniform."""
    d = msgs.shape[-1]
    mass = msgs.sum(axis=-1, keepdims=True)
    dead = (mass == 0.0)
    n_dead = int(dead.sum())
    if n_dead:
        msgs[dead[..., 0]] = 1.0 / d
        mass = np.where(dead, 1.0, mass)
    msgs /= mass
    return msgs, n_dead


def _sum_keeping(w7: np.ndarray, q: int) -> np.ndarray:
    keep = 1 + _COORD_AXIS[q]
    axes = tuple(a for a in range(1, 8) if a != keep)
    return w7.sum(axis=axes)


def batch_initial_messages(d: int, cell_noise: np.ndarray, tvec: np.ndarray):
    """Defect-conditioned marginals of the four boundary qudits.

    ``cell_noise`` is (R, 10, d) and ``tvec`` (R, 10); returns a
    ((R, 4, d) message stack, zero-mass fallback count) pair.
    """
    w7 = batch_weights(d, cell_noise, tvec).reshape((-1,) + (d,) * 7)
    R = w7.shape[0]
    out = np.empty((R, 4, d))
    for k, q in enumerate(BOUNDARY_QUDITS):
        out[:, k, :] = _scatter_messages(_sum_keeping(w7, q), q, tvec, d)
    return _normalize_messages(out)


def batch_message_update(d: int, cell_noise: np.ndarray, tvec: np.ndarray,
                         incoming: np.ndarray):
    """One synchronous message update for a batch of cells.

    For each boundary qudit the outgoing message sums, over all cell
    configurations restricted to that exponent, the interior probability
    times the priors and incoming messages of the *other three* boundary
    qudits -- equivalently P(tles)/P_q times the incoming products.
    """
    shifted = _shift_rows(np.asarray(cell_noise, dtype=np.float64),
                          np.asarray(tvec, dtype=np.int64))
    m_loc = _shift_rows(np.asarray(incoming, dtype=np.float64),
                        np.asarray(tvec)[:, list(BOUNDARY_QUDITS)])
    interior = _interior_product(d, shifted).reshape((-1,) + (d,) * 7)
    R = interior.shape[0]
    b = {q: _bcast(_boundary_vector(d, shifted, q, m_loc), q, d)
         for q in BOUNDARY_QUDITS}

    out = np.empty((R, 4, d))
    north_south = interior * b[8] * b[9]
    out[:, 0, :] = _scatter_messages(_sum_keeping(north_south * b[1], 0), 0, tvec, d)
    out[:, 1, :] = _scatter_messages(_sum_keeping(north_south * b[0], 1), 1, tvec, d)
    east_west = interior * b[0] * b[1]
    out[:, 2, :] = _scatter_messages(_sum_keeping(east_west * b[9], 8), 8, tvec, d)
    out[:, 3, :] = _scatter_messages(_sum_keeping(east_west * b[8], 9), 9, tvec, d)
    return _normalize_messages(out)


def exchange(messages: np.ndarray, grid) -> np.ndarray:
    """Swap outgoing messages across shared boundaries (periodic).

    ``messages`` is (..., n_cells, 4, d) in BOUNDARY_QUDITS slot order with
    cell index c = J * ncx + I; returns the incoming stack of the same
    shape.  Slot 0 receives the northern neighbor's slot 3 (qudit 9) and
    so on around the torus.
    """
    ncy, ncx = grid
    m = np.asarray(messages)
    lead = m.shape[:-3]
    view = m.reshape(lead + (ncy, ncx, 4, m.shape[-1]))
    ax_j, ax_i = len(lead), len(lead) + 1
    out = np.empty_like(view)
    out[..., 0, :] = np.roll(view[..., 3, :], -1, axis=ax_j)
    out[..., 3, :] = np.roll(view[..., 0, :], +1, axis=ax_j)
    out[..., 1, :] = np.roll(view[..., 2, :], +1, axis=ax_i)
    out[..., 2, :] = np.roll(view[..., 1, :], -1, axis=ax_i)
    return out.reshape(m.shape)


def bp_messages(d: int, cell_noise: np.ndarray, tvec: np.ndarray, grid,
                rounds: int):
    """Run ``rounds`` of message passing over a (batch of) cell grid(s).

    ``cell_noise`` is (..., n_cells, 10, d) and ``tvec`` (..., n_cells, 10).
    Returns (incoming messages ready for the marginalization, fallback
    count); rounds = 0 returns (None, 0), reducing the marginal to the
    message-free form.
    """
    if rounds < 0:
        raise ValueError(f"rounds must be >= 0, got {rounds}")
    if rounds == 0:
        return None, 0
    noise = np.asarray(cell_noise, dtype=np.float64)
    shape = noise.shape[:-2]
    flat_noise = noise.reshape(-1, 10, noise.shape[-1])
    flat_t = np.asarray(tvec, dtype=np.int64).reshape(-1, 10)

    m_out, fallbacks = batch_initial_messages(d, flat_noise, flat_t)
    m_in = exchange(m_out.reshape(shape + (4, d)), grid)
    for _ in range(rounds - 1):
        m_out, n_dead = batch_message_update(
            d, flat_noise, flat_t, m_in.reshape(-1, 4, d))
        fallbacks += n_dead
        m_in = exchange(m_out.reshape(shape + (4, d)), grid)
    return m_in, fallbacks


def initial_messages(basis: CellBasis, a, cell_noise) -> np.ndarray:
    """First-round outgoing messages of one cell ((4, d), BOUNDARY order)."""
    d = basis.d
    tvec = defect_representative(basis, a)
    msgs, n_dead = batch_initial_messages(
        d, np.asarray(cell_noise, dtype=np.float64)[None], tvec[None])
    if n_dead:
        raise DegenerateDistributionError(
            f"cell with defect triple {tuple(np.asarray(a))} has zero-mass messages")
    return msgs[0]


def message_update(basis: CellBasis, a, cell_noise, incoming) -> np.ndarray:
    """Updated outgoing messages of one cell given incoming ones ((4, d))."""
    d = basis.d
    tvec = defect_representative(basis, a)
    msgs, n_dead = batch_message_update(
        d, np.asarray(cell_noise, dtype=np.float64)[None], tvec[None],
        np.asarray(incoming, dtype=np.float64)[None])
    if n_dead:
        raise DegenerateDistributionError(
            f"cell with defect triple {tuple(np.asarray(a))} produced a "
            "zero-mass message")
    return msgs[0]
