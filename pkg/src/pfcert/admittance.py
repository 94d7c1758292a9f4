"""Bus admittance matrix assembly, network reduction, and normalized impedances.

The reduction eliminates generator buses from the nodal equations: with the
generator phasors fixed, the load-bus voltages satisfy V_L = E - Z I_L where
E is the zero-load voltage profile induced by the generators and Z inverts
the load-load admittance block. Normalizing by E (and optionally by a known
solution) yields the unitless impedance matrices the stress measures and the
fixed-point map are built on.
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .net_model import CaseError, NetworkCase, generator_phasors, partition_buses

FACTOR_TOL = 1e-10  # max |Y_LL Z - I| accepted from the factorization
SOLUTION_TOL = 1e-6  # fixed-point residual accepted for a "known solution"


class SingularNetworkError(RuntimeError):
    """Y_LL is numerically singular (load island unreachable from all generators)."""


class NotASolutionError(ValueError):
    """A claimed known solution fails the fixed-point residual check."""


@dataclass(frozen=True)
class AdmittanceMatrix:
    """Complex bus admittance matrix in the generators-first bus ordering."""

    matrix: sp.csc_matrix
    bus_order: tuple[int, ...]
    n_gen: int

    @property
    def dimension(self) -> int:
        return len(self.bus_order)

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()


@dataclass(frozen=True)
class GridReduction:
    """Reduced network quantities over the load buses.

    Zhat is the E-normalized impedance (units 1/power in the per-unit system);
    Ztilde additionally normalizes by a known solution v0 and equals Zhat when
    v0 = 1, S0 = 0.
    """

    generator_ids: tuple[int, ...]
    load_ids: tuple[int, ...]
    Y_LL: sp.csc_matrix
    Y_LG: sp.csc_matrix
    V_G: np.ndarray
    E: np.ndarray
    Z: np.ndarray
    Zhat: np.ndarray
    Ztilde: np.ndarray
    v0: np.ndarray
    S0: np.ndarray

    @property
    def n_load(self) -> int:
        return len(self.load_ids)

    def load_index(self, bus_id: int) -> int:
        return self.load_ids.index(bus_id)


def build_admittance(case: NetworkCase, partition=None) -> AdmittanceMatrix:
    """Assemble the nodal admittance matrix from branch pi-models and bus shunts.

    Branch stamps follow the from-side off-nominal tap convention: with series
    admittance y, charging b, tap t and shift phi, the from/to blocks are
    (y + jb/2)/t^2, -y/(t e^{-j phi}), -y/(t e^{j phi}), y + jb/2.
    """
    if partition is None:
        partition = partition_buses(case)
    generator_ids, load_ids = partition
    order = generator_ids + load_ids
    pos = {bus_id: k for k, bus_id in enumerate(order)}
    n = len(order)

    rows: list[int] = []
    cols: list[int] = []
    vals: list[complex] = []

    def stamp(i: int, j: int, v: complex) -> None:
        rows.append(i)
        cols.append(j)
        vals.append(v)

    for br in case.branches:
        if not br.in_service:
            continue
        if br.series_impedance == 0:
            raise CaseError(
                f"in-service branch {br.from_bus}-{br.to_bus} has zero series impedance"
            )
        ys = 1.0 / br.series_impedance
        ych = 0.5j * br.charging
        t = br.tap_ratio * cmath.exp(1j * br.phase_shift)
        f = pos[br.from_bus]
        to = pos[br.to_bus]
        stamp(f, f, (ys + ych) / (t * t.conjugate()))  # |t|^2 on the from side
        stamp(f, to, -ys / t.conjugate())
        stamp(to, f, -ys / t)
        stamp(to, to, ys + ych)

    for b in case.buses:
        if b.shunt != 0:
            k = pos[b.id]
            stamp(k, k, b.shunt)

    matrix = sp.coo_matrix((vals, (rows, cols)), shape=(n, n), dtype=complex).tocsc()
    return AdmittanceMatrix(matrix=matrix, bus_order=order, n_gen=len(generator_ids))


def reduce_network(Y: AdmittanceMatrix, partition, V_G: np.ndarray) -> GridReduction:
    """Factorize Y_LL once and compute E, Z, and the normalized impedance Zhat.

    Returns the reduction in the no-known-solution normalization (v0 = 1,
    S0 = 0, Ztilde = Zhat).
    """
    generator_ids, load_ids = partition
    m, n = len(generator_ids), len(load_ids)
    if n < 1:
        raise CaseError("reduction requires at least one load bus")
    V_G = np.asarray(V_G, dtype=complex)
    if V_G.shape != (m,):
        raise CaseError(f"V_G has shape {V_G.shape}, expected ({m},)")
    if np.any(V_G == 0):
        raise CaseError("V_G entries must be nonzero")

    Y_GG = Y.matrix[:m, :m]
    Y_LG = Y.matrix[m:, :m].tocsc()
    Y_LL = Y.matrix[m:, m:].tocsc()

    try:
        lu = spla.splu(Y_LL)
    except RuntimeError as exc:
        raise SingularNetworkError(f"Y_LL is singular: {exc}") from exc

    E = lu.solve(-(Y_LG @ V_G))
    Z = lu.solve(np.eye(n, dtype=complex))

    residual = np.abs(Y_LL @ Z - np.eye(n)).max()
    if not np.isfinite(residual) or residual > FACTOR_TOL:
        raise SingularNetworkError(
            f"Y_LL factorization residual {residual:.3e} exceeds {FACTOR_TOL:g}; "
            "the load subnetwork is singular or nearly so"
        )
    if np.any(np.abs(E) < 1e-12):
        raise SingularNetworkError("equivalent voltage E has (near-)zero entries")

    Zhat = Z / np.outer(E, E.conj())
    del Y_GG
    ones = np.ones(n, dtype=complex)
    return GridReduction(
        generator_ids=tuple(generator_ids),
        load_ids=tuple(load_ids),
        Y_LL=Y_LL,
        Y_LG=Y_LG,
        V_G=V_G,
        E=E,
        Z=Z,
        Zhat=Zhat,
        Ztilde=Zhat,
        v0=ones,
        S0=np.zeros(n, dtype=complex),
    )


def reduce_case(case: NetworkCase, V_G: np.ndarray | None = None) -> GridReduction:
    """build_admittance + reduce_network with generator phasors from the case."""
    partition = partition_buses(case)
    Y = build_admittance(case, partition)
    if V_G is None:
        V_G = generator_phasors(case, partition[0])
    return reduce_network(Y, partition, V_G)


def fixed_point_residual(red: GridReduction, v: np.ndarray, S: np.ndarray) -> float:
    """Residual ||v - (1 - Zhat diag(v*)^-1 S*)||_inf of the E-normalized equations."""
    v = np.asarray(v, dtype=complex)
    S = np.asarray(S, dtype=complex)
    return float(np.abs(v - (1.0 - red.Zhat @ (S.conj() / v.conj()))).max())


def renormalize_about_solution(red: GridReduction, v0: np.ndarray, S0: np.ndarray) -> GridReduction:
    """Re-center the reduction on a known solution (v0, S0).

    v0 is in E-normalized coordinates and must satisfy the fixed-point
    equations for load S0 to within SOLUTION_TOL.
    """
    v0 = np.asarray(v0, dtype=complex)
    S0 = np.asarray(S0, dtype=complex)
    if v0.shape != (red.n_load,) or S0.shape != (red.n_load,):
        raise CaseError("v0/S0 dimension mismatch with the reduction")
    if np.any(v0 == 0):
        raise NotASolutionError("v0 has zero entries")
    residual = fixed_point_residual(red, v0, S0)
    if residual >= SOLUTION_TOL:
        raise NotASolutionError(
            f"(v0, S0) residual {residual:.3e} >= {SOLUTION_TOL:g}: not a power-flow solution"
        )
    Ztilde = red.Zhat / np.outer(v0, v0.conj())
    return GridReduction(
        generator_ids=red.generator_ids,
        load_ids=red.load_ids,
        Y_LL=red.Y_LL,
        Y_LG=red.Y_LG,
        V_G=red.V_G,
        E=red.E,
        Z=red.Z,
        Zhat=red.Zhat,
        Ztilde=Ztilde,
        v0=v0,
        S0=S0,
    )


def reduction_dump(red: GridReduction) -> dict:
    """E and Zhat as JSON-ready structures ([re, im] pairs) for debugging."""
    return {
        "load_ids": list(red.load_ids),
        "E": [[z.real, z.imag] for z in red.E],
        "Zhat": [[[z.real, z.imag] for z in row] for row in red.Zhat],
    }
