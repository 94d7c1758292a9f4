"""Solvability certificates: the polydisc condition and two baseline shells.

The primary certificate holds when

    gamma + 2 xi eta < 1   (stress level, strict)
    xi - eta <= 1          (stress spread, non-strict)

and then guarantees exactly one solution of the fixed-point power-flow
equations in the closed polydisc with per-bus centers 1 - eta_i and radii
r_lo xi_i, no solutions elsewhere in the region |u_i - 1|/|u_i| < r_hi, and
linear convergence of the fixed-point iteration started anywhere in that
region. The two baselines (Wang-style and Dvijotham-style conditions from
the solvability literature) certify annular shells in |u_i| instead; both
are implemented for side-by-side comparison and are provably dominated by
the polydisc condition.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .admittance import GridReduction
from .stress import DiscRadii, NoCertificate, StressMeasures, compute_radii

REASON_LEVEL = "stress_level"
REASON_SPREAD = "stress_spread"

_MU_GRID = 63  # interior radii probed when bounding the contraction factor
_MU_BOUNDARY_SAMPLES = 256


@dataclass(frozen=True)
class Certificate:
    holds: bool
    reason: str | None  # which condition failed, when holds is False
    measures: StressMeasures
    radii: DiscRadii | None
    disc_centers: np.ndarray | None  # 1 - eta_i, in normalized (u) coordinates
    disc_radii: np.ndarray | None  # r_lo * xi_i
    solutionless_radius: float | None  # r_hi
    mu_bound: float | None  # contraction factor estimate, < 1 when available


@dataclass(frozen=True)
class ShellCertificate:
    """Baseline condition certifying an annulus in |u_i| (method: wang/dvijotham)."""

    method: str
    holds: bool
    radius: float | None
    uniqueness: bool
    condition_value: float  # the scalar the condition compares against its threshold

    def magnitude_interval(self) -> tuple[float, float] | None:
        """(low, high) multipliers on |E_i v0_i| bounding certified voltages."""
        if not self.holds or self.radius is None:
            return None
        r = self.radius
        if self.method == "wang":
            return (1.0 - r, 1.0 + r)
        return (1.0 / (1.0 + r), math.inf if r >= 1.0 else 1.0 / (1.0 - r))


@dataclass(frozen=True)
class VoltageBounds:
    load_ids: tuple[int, ...]
    magnitude_low: np.ndarray
    magnitude_high: np.ndarray
    angle_low: np.ndarray  # radians; full-circle buses carry [-pi, pi]
    angle_high: np.ndarray
    approx: np.ndarray  # physical disc centers, the approximate solution
    full_circle: np.ndarray  # bool: disc contains the origin, angle unbounded


def certify(m: StressMeasures) -> Certificate:
    """Evaluate the polydisc certificate on precomputed stress measures.

    A failing certificate is a valid result (holds=False plus the failed
    condition); only malformed inputs raise.
    """
    level_ok = m.stress_level < 1.0
    spread_ok = m.stress_spread <= 1.0
    if not (level_ok and spread_ok):
        return Certificate(
            holds=False,
            reason=REASON_LEVEL if not level_ok else REASON_SPREAD,
            measures=m,
            radii=None,
            disc_centers=None,
            disc_radii=None,
            solutionless_radius=None,
            mu_bound=None,
        )
    radii = compute_radii(m)
    centers = 1.0 - m.eta_complex
    disc_radii = (0.0 if radii.degenerate else radii.r_lo) * m.xi
    return Certificate(
        holds=True,
        reason=None,
        measures=m,
        radii=radii,
        disc_centers=centers,
        disc_radii=disc_radii,
        solutionless_radius=radii.r_hi,
        mu_bound=estimate_contraction(m, radii),
    )


def estimate_contraction(m: StressMeasures, radii: DiscRadii) -> float | None:
    """Upper bound on the iteration contraction factor mu in [0, 1).

    mu is defined as sup over the invariant polydisc of max_i |u_i - 1|/|u_i|
    divided by the polydisc scale r'. The sup is bounded per bus by
    (|eta_i| + r' xi_i)/(|c_i| - r' xi_i); when that coarse bound is not
    conclusive for any admissible r', the disc boundaries are sampled (the
    ratio is the modulus of a Mobius map, so its maximum sits on the
    boundary). Returns None when no bound below 1 is found.
    """
    if radii.degenerate:
        return 0.0
    centers = 1.0 - m.eta_complex
    abs_c = np.abs(centers)
    best = math.inf
    ts = np.linspace(1.0 / (_MU_GRID + 1), _MU_GRID / (_MU_GRID + 1.0), _MU_GRID)
    grid = radii.r_lo + ts * (radii.r_hi - radii.r_lo)
    for r in grid:
        rho = r * m.xi
        margin = abs_c - rho
        if np.any(margin <= 0):
            continue
        coarse = float(((m.eta_abs + rho) / margin).max()) / r
        best = min(best, coarse)
    if best < 1.0:
        return best
    theta = np.exp(2j * np.pi * np.arange(_MU_BOUNDARY_SAMPLES) / _MU_BOUNDARY_SAMPLES)
    for r in grid:
        rho = r * m.xi
        if np.any(abs_c <= rho):
            continue
        boundary = centers[:, None] + rho[:, None] * theta[None, :]
        ratio = float((np.abs(boundary - 1.0) / np.abs(boundary)).max()) / r
        best = min(best, ratio)
    return best if best < 1.0 else None


def certify_wang(m_base: StressMeasures, m_incr: StressMeasures) -> ShellCertificate:
    """Baseline shell certificate driven by xi alone.

    m_base carries xi at the known base load S0 (zero in the from-scratch
    mode), m_incr carries xi at the increment sigma. Requires xi(S0) < 1;
    holds when (1 - xi(S0))^2 - 4 xi(sigma) > 0 (strict).
    """
    xi0 = m_base.xi_max
    xis = m_incr.xi_max
    if xi0 >= 1.0:
        raise NoCertificate(f"xi at the base load is {xi0:.6g} >= 1; shell condition undefined")
    disc = (1.0 - xi0) ** 2 - 4.0 * xis
    holds = disc > 0.0
    radius = (1.0 - xi0 - math.sqrt(disc)) / 2.0 if holds else None
    return ShellCertificate(
        method="wang", holds=holds, radius=radius, uniqueness=True, condition_value=disc
    )


def certify_dvijotham(m: StressMeasures) -> ShellCertificate:
    """Baseline existence-only shell: holds when sqrt(xi) + sqrt(eta) <= 1."""
    xi, eta = m.xi_max, m.eta_max
    value = math.sqrt(xi) + math.sqrt(eta)
    holds = value <= 1.0 + 1e-12  # non-strict boundary, robust to roundoff
    radius = None
    if holds:
        if xi > 0.0:
            inner = max((1.0 - xi - eta) ** 2 - 4.0 * xi * eta, 0.0)
            radius = (1.0 - xi - eta - math.sqrt(inner)) / (2.0 * xi)
        else:
            radius = 0.0 if eta == 0.0 else eta / (1.0 - eta)
    return ShellCertificate(
        method="dvijotham", holds=holds, radius=radius, uniqueness=False, condition_value=value
    )


def voltage_bounds(cert: Certificate, red: GridReduction) -> VoltageBounds:
    """Physical per-bus voltage enclosures implied by a holding certificate.

    The normalized discs map to physical discs with centers E_i v0_i (1-eta_i)
    and radii |E_i v0_i| r_lo xi_i; magnitude bounds are |center| +- radius and
    angle bounds arg(center) +- arcsin(radius/|center|). A disc reaching the
    origin leaves the angle unconstrained and is flagged full_circle.
    """
    if not cert.holds:
        raise NoCertificate("voltage bounds require a holding certificate")
    scale = red.E * red.v0
    centers = scale * cert.disc_centers
    rho = np.abs(scale) * cert.disc_radii
    abs_c = np.abs(centers)
    full = rho >= abs_c
    mag_low = np.where(full, 0.0, abs_c - rho)
    mag_high = abs_c + rho
    arg_c = np.angle(centers)
    with np.errstate(invalid="ignore"):
        half_width = np.arcsin(np.where(full, 1.0, rho / np.where(abs_c > 0, abs_c, 1.0)))
    angle_low = np.where(full, -np.pi, arg_c - half_width)
    angle_high = np.where(full, np.pi, arg_c + half_width)
    return VoltageBounds(
        load_ids=red.load_ids,
        magnitude_low=mag_low,
        magnitude_high=mag_high,
        angle_low=angle_low,
        angle_high=angle_high,
        approx=centers,
        full_circle=full,
    )


def certificate_to_dict(cert: Certificate) -> dict:
    """JSON-ready view of a certificate (complex numbers as [re, im] pairs)."""
    m = cert.measures
    out = {
        "holds": cert.holds,
        "reason": cert.reason,
        "stress": {
            "eta_max": m.eta_max,
            "xi_max": m.xi_max,
            "gamma_max": m.gamma_max,
            "delta": m.Delta,
            "stress_level": m.stress_level,
            "stress_spread": m.stress_spread,
        },
    }
    if cert.holds:
        out["radii"] = {
            "r_lo": cert.radii.r_lo,
            "r_hi": cert.radii.r_hi,
            "degenerate": cert.radii.degenerate,
        }
        out["disc_centers"] = [[z.real, z.imag] for z in cert.disc_centers]
        out["disc_radii"] = list(map(float, cert.disc_radii))
        out["solutionless_radius"] = cert.solutionless_radius
        out["mu_bound"] = cert.mu_bound
    return out


def voltage_bounds_to_dict(vb: VoltageBounds) -> dict:
    """JSON-ready view of voltage bounds, angles in degrees."""
    deg = 180.0 / math.pi
    return {
        "buses": [
            {
                "bus": bus,
                "magnitude": [float(vb.magnitude_low[k]), float(vb.magnitude_high[k])],
                "angle_deg": [float(vb.angle_low[k] * deg), float(vb.angle_high[k] * deg)],
                "approx": [float(vb.approx[k].real), float(vb.approx[k].imag)],
                "approx_magnitude": float(abs(vb.approx[k])),
                "approx_angle_deg": float(np.angle(vb.approx[k]) * deg),
                "full_circle": bool(vb.full_circle[k]),
            }
            for k, bus in enumerate(vb.load_ids)
        ]
    }
