"""Torus lattice geometry, stabilizers, syndromes, and exact class decoding.

The code lives on an L x L square lattice with periodic boundaries; each
edge carries one qudit, so there are 2*L^2 qudits.  Horizontal edge (x, y)
points east from site (x, y), vertical edge (x, y) points north.

Orientation convention (fixed once, then verified by the commutation and
defect tests):

* plaquette (x, y) spans sites (x, y)..(x+1, y+1) and reads its four edges
  with signs +bottom, -top, +left, -right.  A single X^a error therefore
  deposits charge +a on the plaquette to its north (horizontal edge) or
  east (vertical edge) and -a on the opposite neighbor.
* vertex (x, y) applies X powers +1 to its east and south edges and -1 to
  its west and north edges, which makes every vertex operator commute with
  every plaquette operator.

Winding numbers are signed sums over two fixed homology cuts: the column
of vertical edges at x = 0 and the row of horizontal edges at y = 0.  Both
cuts are aligned with renormalization-cell boundaries at every level.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import logsumexp

from .noise import DegenerateDistributionError, NoiseModel

# Default enumeration bound for the exact class decoder.
EXACT_DECODER_MAX_SIZE = 2
_MAX_ENUMERATION_TERMS = 50_000_000


def h_edge_index(L: int, x: int, y: int) -> int:
    """Index of the horizontal edge leaving site (x, y) eastward."""
    return (y % L) * L + (x % L)


def v_edge_index(L: int, x: int, y: int) -> int:
    """Index of the vertical edge leaving site (x, y) northward."""
    return L * L + (y % L) * L + (x % L)


def plaquette_index(L: int, x: int, y: int) -> int:
    return (y % L) * L + (x % L)


@dataclass(frozen=True, eq=False)
class TorusLattice:
    """Immutable incidence structure of the L x L torus.

    ``plaq_edges``/``plaq_signs`` and ``vertex_edges``/``vertex_signs`` are
    (L^2, 4) arrays listing, for each plaquette or vertex, its incident
    edges and orientation signs.  ``cut_edges`` holds the two homology
    cuts used by ``winding``.
    """

    L: int
    d: int
    n_edges: int
    plaq_edges: np.ndarray
    plaq_signs: np.ndarray
    vertex_edges: np.ndarray
    vertex_signs: np.ndarray
    cut_edges: tuple
    cut_signs: tuple


@lru_cache(maxsize=32)
def build_lattice(L: int, d: int) -> TorusLattice:
    """Build the torus incidence structure for linear size L, dimension d.

    L must be even and >= 2 so the lattice tiles into 2x2 renormalization
    cells.
    """
    if L < 2 or L % 2 != 0:
        raise ValueError(f"L must be even and >= 2, got {L}")
    if d < 2:
        raise ValueError(f"qudit dimension must be >= 2, got {d}")

    n_plaq = L * L
    plaq_edges = np.zeros((n_plaq, 4), dtype=np.int64)
    vertex_edges = np.zeros((n_plaq, 4), dtype=np.int64)
    for y in range(L):
        for x in range(L):
            i = plaquette_index(L, x, y)
            plaq_edges[i] = [
                h_edge_index(L, x, y),      # bottom
                h_edge_index(L, x, y + 1),  # top
                v_edge_index(L, x, y),      # left
                v_edge_index(L, x + 1, y),  # right
            ]
            vertex_edges[i] = [
                h_edge_index(L, x, y),      # east
                h_edge_index(L, x - 1, y),  # west
                v_edge_index(L, x, y),      # north
                v_edge_index(L, x, y - 1),  # south
            ]
    plaq_signs = np.tile(np.array([1, -1, 1, -1], dtype=np.int64), (n_plaq, 1))
    vertex_signs = np.tile(np.array([1, -1, -1, 1], dtype=np.int64), (n_plaq, 1))

    cut1 = np.array([v_edge_index(L, 0, y) for y in range(L)], dtype=np.int64)
    cut2 = np.array([h_edge_index(L, x, 0) for x in range(L)], dtype=np.int64)
    ones = np.ones(L, dtype=np.int64)

    for arr in (plaq_edges, plaq_signs, vertex_edges, vertex_signs, cut1, cut2, ones):
        arr.setflags(write=False)

    return TorusLattice(
        L=L,
        d=d,
        n_edges=2 * L * L,
        plaq_edges=plaq_edges,
        plaq_signs=plaq_signs,
        vertex_edges=vertex_edges,
        vertex_signs=vertex_signs,
        cut_edges=(cut1, cut2),
        cut_signs=(ones, ones),
    )


def _check_op(lattice: TorusLattice, op) -> np.ndarray:
    arr = np.asarray(op, dtype=np.int64)
    if arr.shape[-1] != lattice.n_edges:
        raise ValueError(f"operator length {arr.shape[-1]} != {lattice.n_edges} edges")
    return arr % lattice.d


def syndrome(lattice: TorusLattice, error) -> np.ndarray:
    """Plaquette charges of an X-type error (length L^2, values in Z_d).

    Supports a leading batch dimension: (B, n_edges) -> (B, L^2).
    """
    err = _check_op(lattice, error)
    charges = (err[..., lattice.plaq_edges] * lattice.plaq_signs).sum(axis=-1)
    return charges % lattice.d


def vertex_stabilizer(lattice: TorusLattice, vertex_exponents) -> np.ndarray:
    """Exponent vector of the product of vertex operators A_v^{k_v}."""
    k = np.asarray(vertex_exponents, dtype=np.int64)
    if k.shape != (lattice.L ** 2,):
        raise ValueError(f"need one exponent per vertex, got shape {k.shape}")
    op = np.zeros(lattice.n_edges, dtype=np.int64)
    np.add.at(op, lattice.vertex_edges.ravel(),
              (k[:, None] * lattice.vertex_signs).ravel())
    return op % lattice.d


def winding(lattice: TorusLattice, op) -> tuple:
    """Signed exponent sums over the two homology cuts, mod d.

    For syndrome-free operators this is the homology class of the dual
    chain; composing with any vertex stabilizer leaves it unchanged.
    Supports a leading batch dimension (returns a pair of arrays).
    """
    arr = _check_op(lattice, op)
    w1 = (arr[..., lattice.cut_edges[0]] * lattice.cut_signs[0]).sum(axis=-1) % lattice.d
    w2 = (arr[..., lattice.cut_edges[1]] * lattice.cut_signs[1]).sum(axis=-1) % lattice.d
    if arr.ndim == 1:
        return (int(w1), int(w2))
    return (w1, w2)


@lru_cache(maxsize=32)
def _logical_pair(L: int, d: int) -> np.ndarray:
    """Unit logical cocycles: rows (2, n_edges) with winding (1,0) and (0,1)."""
    l1 = np.zeros(2 * L * L, dtype=np.int64)
    l2 = np.zeros(2 * L * L, dtype=np.int64)
    for x in range(L):
        l1[v_edge_index(L, x, 0)] = 1
    for y in range(L):
        l2[h_edge_index(L, 0, y)] = 1
    out = np.stack([l1, l2])
    out.setflags(write=False)
    return out


def logical_representative(lattice: TorusLattice, w1: int, w2: int) -> np.ndarray:
    """A fixed syndrome-free operator with winding (w1, w2)."""
    pair = _logical_pair(lattice.L, lattice.d)
    return (w1 * pair[0] + w2 * pair[1]) % lattice.d


def _check_syndrome(lattice: TorusLattice, s) -> np.ndarray:
    arr = np.asarray(s, dtype=np.int64) % lattice.d
    if arr.shape[-1] != lattice.L ** 2:
        raise ValueError(f"syndrome length {arr.shape[-1]} != {lattice.L ** 2}")
    if np.any(arr.sum(axis=-1) % lattice.d != 0):
        raise ValueError("total plaquette charge must vanish on the torus")
    return arr


def canonical_representative(lattice: TorusLattice, s) -> np.ndarray:
    """Deterministic error with syndrome ``s``.

    Charges are routed west along each plaquette row to column 0, then
    south along column 0 to plaquette (0, 0).  The routing never touches
    the homology cuts, so the representative always has winding (0, 0).
    Supports a leading batch dimension.
    """
    charges = _check_syndrome(lattice, s)
    batched = charges.ndim == 2
    grid = charges.reshape(-1, lattice.L, lattice.L)  # [b, y, x]
    B, L, d = grid.shape[0], lattice.L, lattice.d

    op = np.zeros((B, lattice.n_edges), dtype=np.int64)
    # Moving charge a from plaquette (x, y) to (x-1, y) puts X^{-a} on the
    # shared vertical edge v(x, y); suffix sums give every edge at once.
    row_suffix = np.cumsum(grid[:, :, ::-1], axis=2)[:, :, ::-1]
    for x in range(1, L):
        for y in range(L):
            op[:, v_edge_index(L, x, y)] = -row_suffix[:, y, x]
    col = row_suffix[:, :, 0]  # per-row totals, now sitting in column 0
    col_suffix = np.cumsum(col[:, ::-1], axis=1)[:, ::-1]
    for y in range(1, L):
        op[:, h_edge_index(L, 0, y)] = -col_suffix[:, y]
    op %= d
    return op if batched else op[0]


@lru_cache(maxsize=16)
def _stabilizer_table(L: int, d: int) -> np.ndarray:
    """Exponent vectors of all d^(L^2-1) distinct X-type stabilizer elements.

    Vertex (0, 0) is pinned to exponent 0; the only relation among vertex
    operators is the all-equal one, so this enumerates each element once.
    """
    n_vert = L * L
    n_free = n_vert - 1
    count = d ** n_free
    if count * 2 * L * L > _MAX_ENUMERATION_TERMS:
        raise ValueError(
            f"stabilizer enumeration too large: d^{n_free} elements at L={L}")
    ks = np.zeros((count, n_vert), dtype=np.int64)
    rng_idx = np.arange(count)
    for v in range(n_free):
        ks[:, v + 1] = (rng_idx // d ** v) % d

    lattice = build_lattice(L, d)
    incidence = np.zeros((n_vert, 2 * L * L), dtype=np.int64)
    rows = np.repeat(np.arange(n_vert), 4)
    np.add.at(incidence, (rows, lattice.vertex_edges.ravel()),
              lattice.vertex_signs.ravel())
    table = (ks @ incidence % d).astype(np.int8)
    table.setflags(write=False)
    return table


def exact_class_probabilities(lattice: TorusLattice, s, noise: NoiseModel,
                              max_size: int = EXACT_DECODER_MAX_SIZE) -> np.ndarray:
    """Maximum-likelihood class distribution by full stabilizer-group summation.

    Returns a (d, d) array: entry (w1, w2) is the probability of the class
    of errors ``canonical_representative(s) * logical(w1, w2) * stabilizer``,
    i.e. labels are relative to the canonical representative.  Sums are
    accumulated in log space.  Only small lattices are allowed
    (L <= max_size); the work scales as d^(L^2+1).
    """
    result = exact_class_probabilities_batch(
        lattice, np.asarray(s)[None, :], noise.probs[None, :, :], max_size)
    return result[0]


def exact_class_probabilities_batch(lattice: TorusLattice, syndromes,
                                    noise_probs, max_size: int = EXACT_DECODER_MAX_SIZE
                                    ) -> np.ndarray:
    """Batched ``exact_class_probabilities``.

    ``syndromes`` is (B, L^2); ``noise_probs`` is (B, n_edges, d) or
    (1, n_edges, d) shared across the batch.  Returns (B, d, d).
    """
    L, d, n = lattice.L, lattice.d, lattice.n_edges
    if L > max_size:
        raise ValueError(f"lattice too large for exact decoding: L={L} > {max_size}")
    charges = _check_syndrome(lattice, syndromes)
    B = charges.shape[0]

    stabs = _stabilizer_table(L, d)  # (n_stab, n)
    reps = canonical_representative(lattice, charges)  # (B, n)
    pair = _logical_pair(L, d)
    labels = np.indices((d, d)).reshape(2, -1).T  # (d^2, 2)
    logicals = labels @ pair % d  # (d^2, n)

    # configs[b, l, s, e] = exponent of edge e in rep_b * logical_l * stab_s
    base = (reps[:, None, :] + logicals[None, :, :]) % d  # (B, d^2, n)
    configs = (base[:, :, None, :].astype(np.int16) + stabs[None, None, :, :]) % d

    with np.errstate(divide="ignore"):
        logp = np.log(np.asarray(noise_probs, dtype=np.float64))  # (B|1, n, d)
    if logp.shape[0] == 1 and B > 1:
        edge_logp = logp[0][np.arange(n), configs]  # broadcast shared noise
    else:
        edge_logp = np.take_along_axis(
            logp[:, None, None, :, :],
            configs[..., None], axis=-1)[..., 0]
    term_logp = edge_logp.sum(axis=-1)  # (B, d^2, n_stab)
    class_logp = logsumexp(term_logp, axis=-1)  # (B, d^2)

    total = logsumexp(class_logp, axis=-1)
    if np.any(np.isneginf(total)):
        raise DegenerateDistributionError(
            "no error consistent with the syndrome has nonzero probability")
    probs = np.exp(class_logp - total[:, None])
    return probs.reshape(B, d, d)


def brute_force_class_probabilities(lattice: TorusLattice, s, noise: NoiseModel
                                    ) -> np.ndarray:
    """Class distribution by enumerating every exponent vector on the lattice.

    Reference implementation for cross-checking ``exact_class_probabilities``;
    feasible only for tiny lattices (d^(2 L^2) configurations).  Labels are
    relative to the canonical representative, as in the structured version.
    """
    L, d, n = lattice.L, lattice.d, lattice.n_edges
    if d ** n > _MAX_ENUMERATION_TERMS:
        raise ValueError(f"enumeration of d^{n} errors is too large")
    charges = _check_syndrome(lattice, s)

    ops = np.zeros((d ** n, n), dtype=np.int64)
    idx = np.arange(d ** n)
    for e in range(n):
        ops[:, e] = (idx // d ** e) % d

    syn = syndrome(lattice, ops)
    mask = np.all(syn == charges[None, :], axis=1)
    ops = ops[mask]

    probs = noise.probs[np.arange(n), ops].prod(axis=1)
    w1, w2 = winding(lattice, ops)
    rep = canonical_representative(lattice, charges)
    r1, r2 = winding(lattice, rep)
    rel1, rel2 = (w1 - r1) % d, (w2 - r2) % d

    out = np.zeros((d, d))
    np.add.at(out, (rel1, rel2), probs)
    total = out.sum()
    if total == 0.0:
        raise DegenerateDistributionError(
            "no error consistent with the syndrome has nonzero probability")
    return out / total
