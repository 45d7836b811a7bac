"""The discrete Hilbert-complex segment and its energy functionals.

A segment couples two finite-dimensional spaces through a differential.  On
the first space live the Gram matrices A (inertia weight alpha) and Bm
(damping weight beta); on the second G (weight gamma), M2 (unweighted
product), and H (weight 1/gamma).  D holds the coefficients of the
differential, and K = M2 D realizes the pairing of a second-space vector
with the image of a first-space vector, so the adjoint never has to be
materialized: it only ever appears transposed against test vectors.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, NotSPD
from .linalg import spd_factor

COUPLING_RTOL = 1e-14
CAUCHY_SCHWARZ_RTOL = 1e-12
VALIDATION_SAMPLES = 100


def _frozen(a) -> np.ndarray:
    """Owned, read-only float copy."""
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class ComplexSegment:
    """Immutable coefficient realization of one complex segment.

    Instances come from :func:`make_segment`, which freezes the arrays;
    structural soundness is established separately by
    :func:`validate_segment`.
    """

    n1: int
    n2: int
    A: np.ndarray
    Bm: np.ndarray
    G: np.ndarray
    M2: np.ndarray
    H: np.ndarray
    D: np.ndarray
    K: np.ndarray


@dataclass(frozen=True)
class State:
    """Coefficient vectors (u, ustar) of the two solution components."""

    u: np.ndarray
    ustar: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "u", np.asarray(self.u, dtype=float))
        object.__setattr__(self, "ustar", np.asarray(self.ustar, dtype=float))


@dataclass(frozen=True)
class PrimitivePair:
    """Coefficient vectors (w, wstar) of the time-integrated primitives."""

    w: np.ndarray
    wstar: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "w", np.asarray(self.w, dtype=float))
        object.__setattr__(self, "wstar", np.asarray(self.wstar, dtype=float))


def make_segment(A, Bm, G, M2, H, D, K=None) -> ComplexSegment:
    """Assemble an immutable segment from coefficient matrices.

    K defaults to M2 @ D.  Only shapes are checked here; definiteness and
    consistency are the job of validate_segment so that builders can
    construct first and diagnose afterwards.
    """
    A = _frozen(A)
    Bm = _frozen(Bm)
    G = _frozen(G)
    M2 = _frozen(M2)
    H = _frozen(H)
    D = _frozen(D)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionMismatch(f"A must be square, got {A.shape}")
    if G.ndim != 2 or G.shape[0] != G.shape[1]:
        raise DimensionMismatch(f"G must be square, got {G.shape}")
    n1 = A.shape[0]
    n2 = G.shape[0]
    for name, M, shape in (
        ("Bm", Bm, (n1, n1)),
        ("M2", M2, (n2, n2)),
        ("H", H, (n2, n2)),
        ("D", D, (n2, n1)),
    ):
        if M.shape != shape:
            raise DimensionMismatch(f"{name} must have shape {shape}, got {M.shape}")
    if K is None:
        K = M2 @ D
    K = _frozen(K)
    if K.shape != (n2, n1):
        raise DimensionMismatch(f"K must have shape {(n2, n1)}, got {K.shape}")
    return ComplexSegment(n1=n1, n2=n2, A=A, Bm=Bm, G=G, M2=M2, H=H, D=D, K=K)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    magnitude: float


@dataclass(frozen=True)
class ValidationReport:
    """Per-invariant pass/fail list with measured violation magnitudes."""

    checks: tuple[CheckResult, ...]

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    def __str__(self) -> str:
        lines = [
            f"{'PASS' if c.passed else 'FAIL'}  {c.name}  (violation {c.magnitude:.3e})"
            for c in self.checks
        ]
        return "\n".join(lines)


def _spd_check(name: str, M: np.ndarray) -> CheckResult:
    asym = float(np.max(np.abs(M - M.T))) if M.size else 0.0
    if asym != 0.0:
        return CheckResult(f"{name} symmetric", False, asym)
    try:
        spd_factor(M, name)
    except NotSPD:
        # magnitude: how far below zero the spectrum reaches
        lam_min = float(np.linalg.eigvalsh(M)[0])
        return CheckResult(f"{name} positive definite", False, max(0.0, -lam_min))
    return CheckResult(f"{name} positive definite", True, 0.0)


def validate_segment(
    seg: ComplexSegment,
    coupling_rtol: float = COUPLING_RTOL,
    cs_rtol: float = CAUCHY_SCHWARZ_RTOL,
    n_samples: int = VALIDATION_SAMPLES,
    seed: int = 0,
) -> ValidationReport:
    """Check the structural invariants of a segment.

    Checks, in order: A, Bm, G, M2, H are symmetric positive definite
    (by factorization); K equals M2 D entrywise within ``coupling_rtol``
    relative; and the three second-space masses are Cauchy-Schwarz
    consistent, (y' M2 y)^2 <= (y' G y)(y' H y), probed on ``n_samples``
    seeded Gaussian vectors.  Failures are report entries, never raises.
    """
    checks: list[CheckResult] = []
    for name in ("A", "Bm", "G", "M2", "H"):
        checks.append(_spd_check(name, getattr(seg, name)))

    ref = seg.M2 @ seg.D
    scale = float(np.max(np.abs(ref))) or 1.0
    dev = float(np.max(np.abs(seg.K - ref))) / scale
    checks.append(CheckResult("K = M2 D coupling", dev <= coupling_rtol, dev))

    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_samples):
        y = rng.standard_normal(seg.n2)
        mid = float(y @ seg.M2 @ y) ** 2
        prod = float(y @ seg.G @ y) * float(y @ seg.H @ y)
        if prod > 0:
            worst = max(worst, mid / prod - 1.0)
        elif mid > 0:
            worst = np.inf
    checks.append(
        CheckResult("Cauchy-Schwarz mass consistency", worst <= cs_rtol, max(0.0, worst))
    )
    return ValidationReport(tuple(checks))


def _check_state(seg: ComplexSegment, s: State) -> None:
    if s.u.shape != (seg.n1,):
        raise DimensionMismatch(f"u has shape {s.u.shape}, expected ({seg.n1},)")
    if s.ustar.shape != (seg.n2,):
        raise DimensionMismatch(f"ustar has shape {s.ustar.shape}, expected ({seg.n2},)")


def energy(seg: ComplexSegment, s: State) -> float:
    """E0 = (u' A u + ustar' G ustar) / 2, the physical energy."""
    _check_state(seg, s)
    return 0.5 * (float(s.u @ seg.A @ s.u) + float(s.ustar @ seg.G @ s.ustar))


def damping_power(seg: ComplexSegment, s: State) -> float:
    """u' Bm u, the instantaneous dissipation rate."""
    _check_state(seg, s)
    return float(s.u @ seg.Bm @ s.u)


def modified_energy(seg: ComplexSegment, s: State, p: PrimitivePair, delta: float) -> float:
    """E0 + delta * u' A w, the shifted Lyapunov functional.

    For delta between 0 and the certified threshold this stays within
    [E0/2, 3 E0/2] along admissible trajectories, which is what makes it
    usable as a decay witness.
    """
    _check_state(seg, s)
    if p.w.shape != (seg.n1,):
        raise DimensionMismatch(f"w has shape {p.w.shape}, expected ({seg.n1},)")
    if p.wstar.shape != (seg.n2,):
        raise DimensionMismatch(f"wstar has shape {p.wstar.shape}, expected ({seg.n2},)")
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    return energy(seg, s) + delta * float(s.u @ seg.A @ p.w)


def segment_to_dict(seg: ComplexSegment) -> dict:
    """JSON-ready dict with dense matrix fields; K is derived, not stored."""
    return {
        "n1": seg.n1,
        "n2": seg.n2,
        "A": seg.A.tolist(),
        "Bm": seg.Bm.tolist(),
        "G": seg.G.tolist(),
        "M2": seg.M2.tolist(),
        "H": seg.H.tolist(),
        "D": seg.D.tolist(),
    }


def segment_from_dict(data: dict) -> ComplexSegment:
    """Inverse of segment_to_dict; K is recomputed as M2 D."""
    seg = make_segment(
        A=data["A"], Bm=data["Bm"], G=data["G"], M2=data["M2"], H=data["H"], D=data["D"]
    )
    if seg.n1 != int(data["n1"]) or seg.n2 != int(data["n2"]):
        raise DimensionMismatch(
            f"declared dimensions ({data['n1']}, {data['n2']}) do not match "
            f"matrices ({seg.n1}, {seg.n2})"
        )
    return seg


def save_segment(path, seg: ComplexSegment) -> None:
    with open(path, "w") as f:
        json.dump(segment_to_dict(seg), f, indent=2, sort_keys=True)
        f.write("\n")


def load_segment(path) -> ComplexSegment:
    with open(path) as f:
        return segment_from_dict(json.load(f))
