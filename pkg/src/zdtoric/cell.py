"""The ten-qudit renormalization cell: operator basis and marginalization.

A 2x2 block of plaquettes is processed as one cell.  Its qudit set is the
union of the edges of the three measured plaquettes (north-west, north-east,
south-west); the south-east plaquette is left fluctuating and only enters
through the renormalized charge.  Local labels, with (0, 0) the cell's
south-west site, horizontal edge h(x, y) pointing east and vertical edge
v(x, y) pointing north:

    0: h(0,2)   north boundary, shared with the cell above
    1: v(0,1)   west boundary, shared with the cell to the west
    2: h(1,2)
    3: v(1,1)
    4: h(0,1)
    5: v(0,0)
    6: h(1,1)
    7: v(1,0)
    8: v(2,1)   east boundary, shared with the cell to the east
    9: h(0,0)   south boundary, shared with the cell below

This placement is the unique one compatible with the generator set below
and the lattice orientation convention; ``build_cell_basis`` re-validates
it for every d.

The ten generators decompose any X-type error on the cell as t*l*e*s:
the T_i build a representative of the measured defect triple, the L_i
carry the charge flow through the north and west boundaries (the output
of a renormalization round), the E_i route charge through the south and
east boundaries into the fluctuating plaquette, and the S_i deform
strings without moving any charge.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .noise import DegenerateDistributionError

GENERATOR_NAMES = ("S0", "S1", "S2", "T0", "T1", "T2", "E0", "E1", "L0", "L1")

# Exponent vectors over the ten local qudits; -1 stands for d-1.
_GENERATORS = {
    "S0": {0: +1, 2: -1, 3: -1},
    "S1": {1: +1, 4: -1, 5: -1},
    "S2": {3: +1, 4: +1, 6: -1, 7: -1},
    "T0": {4: +1, 7: -1},
    "T1": {6: +1},
    "T2": {7: -1},
    "E0": {6: +1, 8: +1},
    "E1": {7: -1, 9: -1},
    "L0": {2: +1, 6: +1},
    "L1": {5: +1, 7: +1},
}

# Signed incidence of the three measured plaquettes (rows NW, NE, SW) on
# the local qudits, in the lattice orientation convention.
MEASURED_PLAQUETTES = np.array([
    [-1, +1, 0, -1, +1, 0, 0, 0, 0, 0],
    [0, 0, -1, +1, 0, 0, +1, 0, -1, 0],
    [0, 0, 0, 0, -1, +1, 0, -1, 0, +1],
], dtype=np.int64)
MEASURED_PLAQUETTES.setflags(write=False)

# Charge crossing the north boundary is read off qudits 0 and 2; the west
# boundary off qudits 1 and 5.  L0 and L1 are the unique generators with
# nonzero crossing (one unit each).
NORTH_FLOW = np.array([1, 0, 1, 0, 0, 0, 0, 0, 0, 0], dtype=np.int64)
WEST_FLOW = np.array([0, 1, 0, 0, 0, 1, 0, 0, 0, 0], dtype=np.int64)
NORTH_FLOW.setflags(write=False)
WEST_FLOW.setflags(write=False)

# Shared qudits in message order; messages are exchanged along 0<->9
# (north/south) and 1<->8 (west/east).
BOUNDARY_QUDITS = (0, 1, 8, 9)


@dataclass(frozen=True, eq=False)
class CellBasis:
    """The ten generators for qudit dimension d.

    ``matrix`` holds one exponent vector per row in ``GENERATOR_NAMES``
    order; ``inverse`` is its exact integer inverse (the matrix is
    unimodular, so the decomposition of any length-10 vector is unique
    for every d).
    """

    d: int
    matrix: np.ndarray
    inverse: np.ndarray

    def vector(self, name: str) -> np.ndarray:
        return self.matrix[GENERATOR_NAMES.index(name)]

    @property
    def t_block(self) -> np.ndarray:
        """Rows T0, T1, T2 as a (3, 10) matrix."""
        return self.matrix[3:6]

    @property
    def l_block(self) -> np.ndarray:
        """Rows L0, L1 as a (2, 10) matrix."""
        return self.matrix[8:10]


@lru_cache(maxsize=8)
def build_cell_basis(d: int) -> CellBasis:
    """Construct and validate the cell basis for qudit dimension d."""
    if d < 2:
        raise ValueError(f"qudit dimension must be >= 2, got {d}")
    signed = np.zeros((10, 10), dtype=np.int64)
    for r, name in enumerate(GENERATOR_NAMES):
        for q, c in _GENERATORS[name].items():
            signed[r, q] = c

    # The signed matrix is unimodular over Z, so its integer inverse
    # decomposes exponent vectors uniquely for every d.
    inverse = np.rint(np.linalg.inv(signed)).astype(np.int64)
    if not np.array_equal(signed @ inverse, np.eye(10, dtype=np.int64)):
        raise ValueError("cell basis is not unimodular; geometry bug")
    matrix = signed % d

    # Only the T_i may touch the measured plaquettes, each creating the
    # corresponding unit defect; everything else must commute.
    defects = MEASURED_PLAQUETTES @ matrix.T % d  # (3, 10) per generator
    expected = np.zeros((3, 10), dtype=np.int64)
    expected[:, 3:6] = np.eye(3, dtype=np.int64)
    if not np.array_equal(defects, expected):
        raise ValueError("defect pattern of cell generators violates the "
                         "sign convention; geometry bug")

    flows = np.stack([matrix @ NORTH_FLOW % d, matrix @ WEST_FLOW % d])
    expected_flows = np.zeros((2, 10), dtype=np.int64)
    expected_flows[0, 8] = 1  # L0 crosses north once
    expected_flows[1, 9] = 1  # L1 crosses west once
    if not np.array_equal(flows, expected_flows):
        raise ValueError("boundary charge flow of cell generators is wrong")

    matrix.setflags(write=False)
    inverse.setflags(write=False)
    return CellBasis(d=d, matrix=matrix, inverse=inverse)


def defect_syndrome(op, d: int) -> np.ndarray:
    """Charges of the three measured plaquettes for a ten-qudit operator."""
    arr = np.asarray(op, dtype=np.int64)
    return arr @ MEASURED_PLAQUETTES.T % d


def defect_representative(basis: CellBasis, a) -> np.ndarray:
    """t(a) = T0^{a0} T1^{a1} T2^{a2}: creates exactly the defect triple a."""
    triple = np.asarray(a, dtype=np.int64)
    if triple.shape != (3,):
        raise ValueError(f"defect triple must have 3 entries, got {triple.shape}")
    return triple @ basis.t_block % basis.d


def coset_coordinates(basis: CellBasis, op):
    """Unique (t, l, e, s) exponents with op = t*l*e*s.

    Returns the defect triple t, the boundary-flow pair l, the
    charge-fluctuation pair e, and the deformation triple s.
    """
    arr = np.asarray(op, dtype=np.int64)
    if arr.shape != (10,):
        raise ValueError(f"cell operator must have 10 entries, got {arr.shape}")
    coords = arr @ basis.inverse % basis.d
    return coords[3:6], coords[8:10], coords[6:8], coords[0:3]


# --- vectorized marginalization engine -----------------------------------
#
# All (l, e, s) combinations are enumerated once per d as a configuration
# table; the defect part t enters by cyclically shifting each qudit's
# distribution, so one table serves every cell.  Coordinate axis order is
# (i, j, e0, e1, s0, s1, s2) with i outermost.

# Boundary qudits depend on exactly one enumeration coordinate each:
# qudit 0 equals s0, qudit 1 equals s1, qudit 8 equals e0, qudit 9 equals
# -e1.  (axis index among the seven coordinates, sign)
_BOUNDARY_AXIS = {0: (4, +1), 1: (5, +1), 8: (2, +1), 9: (3, -1)}


@lru_cache(maxsize=8)
def _enum_tables(d: int):
    basis = build_cell_basis(d)
    coords = np.indices((d,) * 7).reshape(7, -1).T  # (d^7, 7)
    gen_rows = np.stack([basis.vector(n) for n in
                         ("L0", "L1", "E0", "E1", "S0", "S1", "S2")])
    base_cfg = (coords @ gen_rows % d).astype(np.int8)  # (d^7, 10)
    base_cfg.setflags(write=False)
    return base_cfg


def _shift_rows(table: np.ndarray, shifts: np.ndarray) -> np.ndarray:
    """Cyclic row shifts: out[..., g] = table[..., (g + shift) % d]."""
    d = table.shape[-1]
    idx = (np.arange(d) + shifts[..., None]) % d
    return np.take_along_axis(table, idx, axis=-1)


def batch_weights(d: int, cell_noise: np.ndarray, tvec: np.ndarray,
                  messages=None) -> np.ndarray:
    """Probability of every (l, e, s) combination for a batch of cells.

    ``cell_noise`` is (R, 10, d), ``tvec`` the (R, 10) defect-representative
    exponents, ``messages`` an optional (R, 4, d) stack of incoming
    messages on the boundary qudits.  Returns (R, d^7) weights whose terms
    are P(t*l*e*s) [times incoming message factors].
    """
    base_cfg = _enum_tables(d)
    shifted = _shift_rows(np.asarray(cell_noise, dtype=np.float64),
                          np.asarray(tvec, dtype=np.int64))
    w = np.take(shifted[:, 0, :], base_cfg[:, 0], axis=1)
    for q in range(1, 10):
        w *= np.take(shifted[:, q, :], base_cfg[:, q], axis=1)
    if messages is not None:
        m = np.asarray(messages, dtype=np.float64)
        m_loc = _shift_rows(m, np.asarray(tvec)[:, list(BOUNDARY_QUDITS)])
        for k, q in enumerate(BOUNDARY_QUDITS):
            w *= np.take(m_loc[:, k, :], base_cfg[:, q], axis=1)
    return w


def batch_pair_marginals(d: int, weights: np.ndarray) -> np.ndarray:
    """Sum weights over (e, s) for each boundary-flow pair: (R, d, d), raw."""
    R = weights.shape[0]
    return weights.reshape(R, d, d, -1).sum(axis=3)


def cell_marginal(basis: CellBasis, a, cell_noise, messages=None) -> np.ndarray:
    """Distribution of the charge flow (L0, L1) conditioned on defects a.

    Sums the probability of t*l*e*s over the d^2 charge fluctuations e and
    d^3 deformations s for each of the d^2 flows l (d^7 terms in total),
    optionally weighting each term by incoming messages on the boundary
    qudits (given in BOUNDARY_QUDITS order).  The output (d, d) array is
    normalized; index [i, j] is P(L0 = i, L1 = j).
    """
    d = basis.d
    noise_rows = np.asarray(cell_noise, dtype=np.float64)
    if noise_rows.shape != (10, d):
        raise ValueError(f"cell noise must be (10, {d}), got {noise_rows.shape}")
    tvec = defect_representative(basis, a)
    msg = None if messages is None else np.asarray(messages)[None, :, :]
    w = batch_weights(d, noise_rows[None, :, :], tvec[None, :], msg)
    pair = batch_pair_marginals(d, w)[0]
    total = pair.sum()
    if total == 0.0:
        raise DegenerateDistributionError(
            f"cell with defect triple {tuple(np.asarray(a))} has zero total mass")
    return pair / total


def brute_force_cell_marginal(basis: CellBasis, a, cell_noise) -> np.ndarray:
    """Reference flow marginal: enumerate all d^10 ten-qudit errors.

    Filters errors by the measured defect triple and bins them by their
    (L0, L1) coset coordinates.  Used to cross-check ``cell_marginal``.
    """
    d = basis.d
    if d > 4:
        raise ValueError("brute force enumeration limited to d <= 4")
    noise_rows = np.asarray(cell_noise, dtype=np.float64)
    triple = np.asarray(a, dtype=np.int64) % d

    ops = np.indices((d,) * 10).reshape(10, -1).T  # (d^10, 10)
    keep = np.all(defect_syndrome(ops, d) == triple[None, :], axis=1)
    ops = ops[keep]
    probs = noise_rows[np.arange(10), ops].prod(axis=1)
    l_coords = ops @ basis.inverse[:, 8:10] % d

    out = np.zeros((d, d))
    np.add.at(out, (l_coords[:, 0], l_coords[:, 1]), probs)
    total = out.sum()
    if total == 0.0:
        raise DegenerateDistributionError(
            f"cell with defect triple {tuple(triple)} has zero total mass")
    return out / total
