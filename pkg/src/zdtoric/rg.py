"""Renormalization-group soft decoder.

Each round cuts the lattice into 2x2-plaquette cells, marginalizes every
cell over its charge fluctuations and string deformations, and keeps only
the distribution of the charge flow through the cell's north and west
boundaries.  The flows become the edges of a half-size torus: the north
flow of cell (I, J) is the coarse horizontal edge between coarse
plaquettes (I, J) and (I, J+1), the west in-flow is the coarse vertical
edge between (I-1, J) and (I, J).  Coarse plaquette (I, J) carries the
summed charge of the cell's four fine plaquettes.  Recursion stops at a
small lattice where exact maximum-likelihood-class decoding is feasible.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .bp import bp_messages
from .cell import batch_pair_marginals, batch_weights, build_cell_basis
from .lattice import (TorusLattice, build_lattice, canonical_representative,
                      exact_class_probabilities_batch, h_edge_index,
                      plaquette_index, v_edge_index, winding)
from .noise import DegenerateDistributionError, NoiseModel


@dataclass(frozen=True, eq=False)
class CellGeometry:
    """Maps between one level's lattice and its 2x2 cell tiling.

    ``edge_idx[c, q]`` is the global edge of cell c's local qudit q;
    ``measured_plaq``/``all_plaq`` list each cell's (NW, NE, SW) and
    (NW, NE, SW, SE) plaquettes; ``coarse_h``/``coarse_v`` give the coarse
    edge receiving each cell's north-flow and west-flow marginal.  Cells
    are indexed c = J * (L/2) + I, matching coarse plaquette indices.
    """

    L: int
    grid: tuple
    edge_idx: np.ndarray
    measured_plaq: np.ndarray
    all_plaq: np.ndarray
    coarse_h: np.ndarray
    coarse_v: np.ndarray


@lru_cache(maxsize=16)
def build_cell_geometry(L: int) -> CellGeometry:
    if L < 4 or L % 2 != 0:
        raise ValueError(f"cell tiling needs even L >= 4, got {L}")
    Lc = L // 2
    n_cells = Lc * Lc
    edge_idx = np.zeros((n_cells, 10), dtype=np.int64)
    measured = np.zeros((n_cells, 3), dtype=np.int64)
    all_plaq = np.zeros((n_cells, 4), dtype=np.int64)
    coarse_h = np.zeros(n_cells, dtype=np.int64)
    coarse_v = np.zeros(n_cells, dtype=np.int64)
    for J in range(Lc):
        for I in range(Lc):
            c = J * Lc + I
            ox, oy = 2 * I, 2 * J
            edge_idx[c] = [
                h_edge_index(L, ox, oy + 2),      # 0 north boundary
                v_edge_index(L, ox, oy + 1),      # 1 west boundary
                h_edge_index(L, ox + 1, oy + 2),  # 2
                v_edge_index(L, ox + 1, oy + 1),  # 3
                h_edge_index(L, ox, oy + 1),      # 4
                v_edge_index(L, ox, oy),          # 5
                h_edge_index(L, ox + 1, oy + 1),  # 6
                v_edge_index(L, ox + 1, oy),      # 7
                v_edge_index(L, ox + 2, oy + 1),  # 8 east boundary
                h_edge_index(L, ox, oy),          # 9 south boundary
            ]
            measured[c] = [
                plaquette_index(L, ox, oy + 1),      # NW
                plaquette_index(L, ox + 1, oy + 1),  # NE
                plaquette_index(L, ox, oy),          # SW
            ]
            all_plaq[c, :3] = measured[c]
            all_plaq[c, 3] = plaquette_index(L, ox + 1, oy)  # SE, fluctuating
            coarse_h[c] = plaquette_index(Lc, I, J + 1)
            coarse_v[c] = Lc * Lc + plaquette_index(Lc, I, J)

    counts = np.bincount(edge_idx.ravel(), minlength=2 * L * L)
    interior = edge_idx[:, 2:8].ravel()
    shared = edge_idx[:, [0, 1, 8, 9]].ravel()
    if (np.any(counts == 0) or np.any(counts[interior] != 1)
            or np.any(counts[shared] != 2)):
        raise ValueError("cell tiling does not cover the lattice correctly")
    # Shared qudits pair up as 0<->9 (north/south) and 1<->8 (west/east).
    for J in range(Lc):
        for I in range(Lc):
            c = J * Lc + I
            north = ((J + 1) % Lc) * Lc + I
            east = J * Lc + (I + 1) % Lc
            assert edge_idx[c, 0] == edge_idx[north, 9]
            assert edge_idx[c, 8] == edge_idx[east, 1]

    for arr in (edge_idx, measured, all_plaq, coarse_h, coarse_v):
        arr.setflags(write=False)
    return CellGeometry(L=L, grid=(Lc, Lc), edge_idx=edge_idx,
                        measured_plaq=measured, all_plaq=all_plaq,
                        coarse_h=coarse_h, coarse_v=coarse_v)


def _renormalize_batch(lattice: TorusLattice, syndromes: np.ndarray,
                       noise_probs: np.ndarray, bp_rounds: int):
    """One coarse-graining step for a batch of trials.

    ``syndromes`` is (B, L^2); ``noise_probs`` is (B, n_edges, d) or
    (1, n_edges, d) shared.  Returns (coarse lattice, coarse syndromes,
    coarse noise_probs, min cell mass per trial, degenerate mask,
    bp fallback count).  Degenerate cells are replaced by uniform flow
    distributions so that the batch can continue; callers must treat the
    flagged trials as decoding failures.
    """
    d, L = lattice.d, lattice.L
    geometry = build_cell_geometry(L)
    B = syndromes.shape[0]
    n_c = geometry.edge_idx.shape[0]
    basis = build_cell_basis(d)

    a = syndromes[:, geometry.measured_plaq]  # (B, n_c, 3)
    tvec = a @ basis.t_block % d  # (B, n_c, 10)
    cell_noise = np.broadcast_to(
        noise_probs[:, geometry.edge_idx, :], (B, n_c, 10, d))

    msgs, fallbacks = bp_messages(d, cell_noise, tvec, geometry.grid, bp_rounds)
    flat_msgs = None if msgs is None else msgs.reshape(-1, 4, d)
    w = batch_weights(d, cell_noise.reshape(-1, 10, d),
                      tvec.reshape(-1, 10), flat_msgs)
    pair = batch_pair_marginals(d, w).reshape(B, n_c, d, d)

    mass = pair.sum(axis=(2, 3))
    degenerate = np.any(mass == 0.0, axis=1)
    min_mass = mass.min(axis=1)
    if np.any(degenerate):
        uniform = np.full((d, d), 1.0 / (d * d))
        pair = np.where((mass == 0.0)[..., None, None], uniform, pair)
        mass = np.where(mass == 0.0, 1.0, mass)
    pair = pair / mass[..., None, None]

    coarse_lattice = build_lattice(L // 2, d)
    coarse_probs = np.zeros((B, coarse_lattice.n_edges, d))
    coarse_probs[:, geometry.coarse_h, :] = pair.sum(axis=3)  # north-flow marginal
    coarse_probs[:, geometry.coarse_v, :] = pair.sum(axis=2)  # west-flow marginal
    coarse_syndromes = syndromes[:, geometry.all_plaq].sum(axis=2) % d
    return (coarse_lattice, coarse_syndromes, coarse_probs,
            min_mass, degenerate, fallbacks)


def renormalize(lattice: TorusLattice, s, noise: NoiseModel,
                bp_rounds: int = 0):
    """Coarse-grain one level: half-size lattice, summed charges, flow noise.

    Returns (coarse lattice, coarse syndrome, coarse NoiseModel).  Raises
    DegenerateDistributionError if any cell has zero total mass.
    """
    syndromes = np.asarray(s, dtype=np.int64)[None, :] % lattice.d
    (coarse_lat, coarse_s, coarse_probs,
     _, degenerate, _) = _renormalize_batch(
        lattice, syndromes, noise.probs[None], bp_rounds)
    if degenerate[0]:
        raise DegenerateDistributionError(
            "a cell marginal has zero total mass")
    return coarse_lat, coarse_s[0], NoiseModel(coarse_probs[0])


@dataclass(frozen=True)
class DecodeOutcome:
    """Result of decoding one syndrome.

    ``class_probs`` is the (d, d) distribution over absolute winding
    labels; ``argmax`` the most likely label (ties broken toward the
    lexicographically smallest); ``levels_used`` counts renormalization
    rounds; ``diagnostics`` records the per-level minimum cell mass and
    the number of zero-mass message fallbacks.
    """

    class_probs: np.ndarray
    argmax: tuple
    levels_used: int
    diagnostics: dict


def recursion_levels(L: int, base_size: int) -> int:
    """Number of RG rounds from L down to base_size; raises if impossible."""
    if base_size < 2 or base_size % 2 != 0:
        raise ValueError(f"base_size must be even and >= 2, got {base_size}")
    levels = 0
    size = L
    while size > base_size:
        if size % 2 != 0:
            break
        size //= 2
        levels += 1
    if size != base_size:
        raise ValueError(
            f"L={L} is not base_size={base_size} times a power of 2")
    return levels


def decode_batch(lattice: TorusLattice, syndromes, noise: NoiseModel,
                 bp_rounds: int = 3, base_size: int = 2):
    """Decode a batch of syndromes sharing one level-0 noise model.

    Returns (labels (B, 2) of absolute winding estimates, class_probs
    (B, d, d), levels_used, diagnostics dict with per-level min masses,
    the degenerate-trial mask, and message fallback count).
    """
    d = lattice.d
    recursion_levels(lattice.L, base_size)
    cur_s = np.asarray(syndromes, dtype=np.int64) % d
    if cur_s.ndim != 2 or cur_s.shape[1] != lattice.L ** 2:
        raise ValueError(f"syndromes must be (B, {lattice.L ** 2})")
    B = cur_s.shape[0]

    cur_lat = lattice
    cur_probs = noise.probs[None]
    degenerate = np.zeros(B, dtype=bool)
    min_masses = []
    fallbacks = 0
    levels = 0
    while cur_lat.L > base_size:
        (cur_lat, cur_s, cur_probs, mm, dg, fb) = _renormalize_batch(
            cur_lat, cur_s, cur_probs, bp_rounds)
        degenerate |= dg
        min_masses.append(mm)
        fallbacks += fb
        levels += 1

    rel = exact_class_probabilities_batch(cur_lat, cur_s, cur_probs)
    reps = canonical_representative(cur_lat, cur_s)
    off1, off2 = winding(cur_lat, reps)
    off1, off2 = np.atleast_1d(off1), np.atleast_1d(off2)

    # Shift relative labels by the representative's winding -> absolute.
    probs = np.zeros_like(rel)
    w1 = (np.arange(d)[None, :, None] + off1[:, None, None]) % d
    w2 = (np.arange(d)[None, None, :] + off2[:, None, None]) % d
    b_idx = np.arange(B)[:, None, None]
    probs[b_idx, w1, w2] = rel

    flat = probs.reshape(B, -1).argmax(axis=1)
    labels = np.stack(divmod(flat, d), axis=1)
    diagnostics = {
        "min_cell_mass": min_masses,
        "degenerate": degenerate,
        "bp_fallbacks": fallbacks,
    }
    return labels, probs, levels, diagnostics


def decode(lattice: TorusLattice, s, noise: NoiseModel, *,
           bp_rounds: int = 3, base_size: int = 2) -> DecodeOutcome:
    """Decode one syndrome to the most likely absolute winding class.

    Renormalizes until the lattice reaches ``base_size``, then solves the
    base case exactly; the reported label is the coarse class label plus
    the winding of the coarse canonical representative, so it is directly
    comparable to the winding of the sampled physical error.
    """
    syndromes = np.asarray(s, dtype=np.int64)[None, :]
    labels, probs, levels, diag = decode_batch(
        lattice, syndromes, noise, bp_rounds=bp_rounds, base_size=base_size)
    if diag["degenerate"][0]:
        raise DegenerateDistributionError(
            "a cell marginal has zero total mass")
    return DecodeOutcome(
        class_probs=probs[0],
        argmax=(int(labels[0, 0]), int(labels[0, 1])),
        levels_used=levels,
        diagnostics={
            "min_cell_mass": [float(m[0]) for m in diag["min_cell_mass"]],
            "bp_fallbacks": diag["bp_fallbacks"],
        },
    )
