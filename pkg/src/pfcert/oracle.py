"""Independent ground truth: Newton power flow, loading-limit bisection,
and the closed-form single-load oracle used throughout the test suite.

The Newton solver treats generator buses as fixed phasors and solves the
polar mismatch equations at the load buses with an analytic Jacobian. The
base-case variant solves the conventional slack + voltage-controlled
formulation once, to fix generator angles the way solved case files do.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .admittance import SingularNetworkError, build_admittance
from .net_model import (
    CaseError,
    NetworkCase,
    generator_phasors,
    load_power_vector,
    partition_buses,
)


@dataclass(frozen=True)
class NewtonResult:
    converged: bool
    V_L: np.ndarray
    iterations: int
    mismatch_norm: float  # inf-norm of the per-unit power mismatch


@dataclass(frozen=True)
class PolarNetwork:
    """Per-case quantities shared by repeated Newton solves."""

    generator_ids: tuple[int, ...]
    load_ids: tuple[int, ...]
    Y: sp.csc_matrix  # full admittance, generators first
    V_G: np.ndarray
    E: np.ndarray  # zero-load load voltages, the default start


def prepare_network(case: NetworkCase, V_G: np.ndarray | None = None) -> PolarNetwork:
    partition = partition_buses(case)
    generator_ids, load_ids = partition
    Y = build_admittance(case, partition)
    if V_G is None:
        V_G = generator_phasors(case, generator_ids)
    m = len(generator_ids)
    Y_LL = Y.matrix[m:, m:].tocsc()
    Y_LG = Y.matrix[m:, :m]
    try:
        lu = spla.splu(Y_LL)
    except RuntimeError as exc:
        raise SingularNetworkError(f"Y_LL is singular: {exc}") from exc
    E = lu.solve(-(Y_LG @ np.asarray(V_G, dtype=complex)))
    return PolarNetwork(
        generator_ids=tuple(generator_ids),
        load_ids=tuple(load_ids),
        Y=Y.matrix,
        V_G=np.asarray(V_G, dtype=complex),
        E=E,
    )


def _power_injections(Y: sp.csc_matrix, V: np.ndarray) -> np.ndarray:
    return V * np.conj(Y @ V)


def newton_solve(
    case: NetworkCase,
    S_L: np.ndarray | None = None,
    start: np.ndarray | None = None,
    tol: float = 1e-8,
    max_iter: int = 30,
    network: PolarNetwork | None = None,
) -> NewtonResult:
    """Solve the load-bus power-flow equations with fixed generator phasors.

    Unknowns are the load-bus voltage magnitudes and angles; convergence is
    declared when the inf-norm of the complex power mismatch (per-unit)
    drops below tol. Non-convergence and singular Jacobians are reported as
    converged=False results so the solver can serve as a feasibility probe.
    """
    net = network if network is not None else prepare_network(case)
    m = len(net.generator_ids)
    n = len(net.load_ids)
    if S_L is None:
        S_L = load_power_vector(case, net.load_ids)
    S_L = np.asarray(S_L, dtype=complex)

    V_L = net.E.copy() if start is None else np.array(start, dtype=complex)
    theta = np.angle(V_L)
    vm = np.abs(V_L)
    L = slice(m, m + n)

    mismatch_norm = math.inf
    for iteration in range(max_iter + 1):
        V = np.concatenate([net.V_G, vm * np.exp(1j * theta)])
        mis = _power_injections(net.Y, V)[L] + S_L
        mismatch_norm = float(np.abs(np.concatenate([mis.real, mis.imag])).max())
        if not math.isfinite(mismatch_norm):
            return NewtonResult(False, V[L], iteration, mismatch_norm)
        if mismatch_norm < tol:
            return NewtonResult(True, V[L], iteration, mismatch_norm)
        if iteration == max_iter:
            break

        ib = np.arange(m + n)
        Ibus = net.Y @ V
        diagV = sp.csr_matrix((V, (ib, ib)))
        diagI = sp.csr_matrix((Ibus, (ib, ib)))
        diagVnorm = sp.csr_matrix((V / np.abs(V), (ib, ib)))
        dS_dVm = diagV @ (net.Y @ diagVnorm).conj() + diagI.conj() @ diagVnorm
        dS_dVa = 1j * diagV @ (diagI - net.Y @ diagV).conj()

        Jaa = dS_dVa[L, L]
        Jam = dS_dVm[L, L]
        J = sp.bmat([[Jaa.real, Jam.real], [Jaa.imag, Jam.imag]], format="csc")
        rhs = -np.concatenate([mis.real, mis.imag])
        try:
            dx = spla.spsolve(J, rhs)
        except RuntimeError:
            return NewtonResult(False, V[L], iteration, mismatch_norm)
        if not np.all(np.isfinite(dx)):
            return NewtonResult(False, V[L], iteration, mismatch_norm)
        theta = theta + dx[:n]
        vm = vm + dx[n:]
        if np.any(vm <= 0):
            return NewtonResult(False, vm * np.exp(1j * theta), iteration + 1, math.inf)

    return NewtonResult(False, vm * np.exp(1j * theta), max_iter, mismatch_norm)


def newton_base_case(case: NetworkCase, tol: float = 1e-8, max_iter: int = 30) -> dict[int, complex]:
    """Conventional slack / voltage-controlled / load power flow on the whole case.

    Generator buses hold their setpoint magnitude and scheduled active power
    (the slack bus also holds its case-file angle and absorbs the imbalance);
    load buses hold their complex demand. Returns solved phasors for every
    bus. Used to fix generator angles from a solved operating point when the
    case file carries flat ones.
    """
    partition = partition_buses(case)
    generator_ids, load_ids = partition
    order = generator_ids + load_ids
    Y = build_admittance(case, partition).matrix
    nb = len(order)
    m = len(generator_ids)

    slack_bus = case.slack_bus if case.slack_bus in generator_ids else generator_ids[0]
    slack = order.index(slack_bus)
    pv = [k for k in range(m) if k != slack]
    pq = list(range(m, nb))
    non_slack = pv + pq

    setpoint = {}
    p_sched = np.zeros(nb)
    for g in case.gens:
        if g.in_service:
            setpoint.setdefault(g.bus, g.voltage_setpoint)
            p_sched[order.index(g.bus)] += g.active_power
    demand = np.array([case.bus(i).demand for i in order])
    p_spec = p_sched - demand.real
    q_spec = -demand.imag

    vm = np.ones(nb)
    for k in range(m):
        vm[k] = setpoint[order[k]]
    theta = np.full(nb, case.bus(slack_bus).voltage_angle)

    for iteration in range(max_iter + 1):
        V = vm * np.exp(1j * theta)
        S = _power_injections(Y, V)
        dp = S.real[non_slack] - p_spec[non_slack]
        dq = S.imag[pq] - q_spec[pq]
        f = np.concatenate([dp, dq])
        if float(np.abs(f).max()) < tol:
            return {order[k]: V[k] for k in range(nb)}
        if iteration == max_iter:
            break

        ib = np.arange(nb)
        Ibus = Y @ V
        diagV = sp.csr_matrix((V, (ib, ib)))
        diagI = sp.csr_matrix((Ibus, (ib, ib)))
        diagVnorm = sp.csr_matrix((V / np.abs(V), (ib, ib)))
        dS_dVm = diagV @ (Y @ diagVnorm).conj() + diagI.conj() @ diagVnorm
        dS_dVa = 1j * diagV @ (diagI - Y @ diagV).conj()

        J = sp.bmat(
            [
                [dS_dVa[non_slack][:, non_slack].real, dS_dVm[non_slack][:, pq].real],
                [dS_dVa[pq][:, non_slack].imag, dS_dVm[pq][:, pq].imag],
            ],
            format="csc",
        )
        dx = spla.spsolve(J, -f)
        theta[non_slack] += dx[: len(non_slack)]
        vm[pq] += dx[len(non_slack):]
        if np.any(vm <= 0) or not np.all(np.isfinite(vm)):
            raise SingularNetworkError("base-case power flow diverged")

    raise SingularNetworkError(
        f"base-case power flow did not converge within {max_iter} iterations"
    )


def solved_generator_phasors(case: NetworkCase) -> np.ndarray:
    """Generator phasors from a conventional solved base case, in partition order."""
    phasors = newton_base_case(case)
    generator_ids, _ = partition_buses(case)
    return np.array([phasors[i] for i in generator_ids], dtype=complex)


def actual_limit(
    case: NetworkCase,
    direction: np.ndarray | None = None,
    bracket: tuple[float, float | None] = (1.0, None),
    tol: float = 1e-4,
    network: PolarNetwork | None = None,
    newton_tol: float = 1e-8,
    newton_max_iter: int = 40,
) -> float:
    """True solvability limit along a loading direction, by bisection.

    Scales `direction` (default: the case demands) by lambda and bisects on
    Newton feasibility, warm-starting every probe from the last feasible
    solution. The lower bracket end must be feasible. Returns the bracket
    midpoint once its width drops below tol.
    """
    net = network if network is not None else prepare_network(case)
    if direction is None:
        direction = load_power_vector(case, net.load_ids)
    direction = np.asarray(direction, dtype=complex)

    lo, hi = bracket
    warm = net.E.copy()

    def probe(lam: float, start: np.ndarray) -> NewtonResult:
        return newton_solve(
            case, lam * direction, start=start, tol=newton_tol, max_iter=newton_max_iter, network=net
        )

    res = probe(lo, warm)
    if not res.converged:
        raise CaseError(f"lower bracket end lambda={lo} is itself infeasible")
    warm = res.V_L

    if hi is None:
        hi = 2.0 * lo
        for _ in range(60):
            res = probe(hi, warm)
            if not res.converged:
                break
            lo, warm = hi, res.V_L
            hi *= 2.0
        else:
            raise CaseError("no infeasible upper bracket found; direction may be unbounded")
    else:
        if not hi > lo:
            raise CaseError("bracket upper end must exceed the lower end")
        if probe(hi, warm).converged:
            raise CaseError(f"upper bracket end lambda={hi} is feasible; widen the bracket")

    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        res = probe(mid, warm)
        if res.converged:
            lo, warm = mid, res.V_L
        else:
            hi = mid
    return 0.5 * (lo + hi)


def two_bus_analytic(p: float, q: float, x: float) -> tuple[complex, ...]:
    """All load-voltage solutions of one load p + jq behind a pure reactance x.

    With v = a + jb and E = 1: b = -x p and a solves a^2 - a + (q x + x^2 p^2) = 0.
    Returns the high-voltage root first; empty when no solution exists.
    """
    if x <= 0:
        raise ValueError("reactance x must be positive")
    disc = 1.0 - 4.0 * q * x - 4.0 * x * x * p * p
    b = -x * p
    if disc < 0:
        return ()
    if disc == 0:
        return (complex(0.5, b),)
    root = math.sqrt(disc)
    return (complex((1.0 + root) / 2.0, b), complex((1.0 - root) / 2.0, b))
