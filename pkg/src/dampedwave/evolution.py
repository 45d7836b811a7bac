"""Backward Euler evolution, primitives, energy ledger, and the dense
matrix-exponential reference.

Each implicit step eliminates the second component through the SPD Schur
complement A/tau + Bm + tau K' G^{-1} K, so stepping is unconditionally
well posed.  simulate() factors this operator once, converts the two
per-step solves into dense matrix products, and fills the whole energy
ledger (E0, modified energy, damping power, certified bound) after the
loop with vectorized quadratic forms.

Initial data must satisfy the compatibility condition G ustar0 in
range(K); otherwise the primitive initialization has no solution and the
certificate does not apply.  Incompatible runs are still allowed on
request: they track the conserved pairings with the kernel of K' and
exhibit the persistent non-decaying mode instead of certified decay.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .complex_core import ComplexSegment, PrimitivePair, State, energy
from .errors import (
    DimensionMismatch,
    IncompatibleInitialData,
    NonPositiveEnergy,
    NonPositiveTau,
    NotSPD,
    SingularSaddle,
    SizeLimitExceeded,
    WindowTooShort,
)
from .linalg import DENSE_LIMIT, expm_apply, kernel_basis, spd_factor, spd_solve
from .spectral import ConstantsReport

COMPAT_RTOL = 1e-8
BOUND_SLACK = 1e-8
SADDLE_RTOL = 1e-9

# Relative floating-point measurement floor for energies.  Rounding of the
# initial data leaves a ~1e-16 component along the conserved directions
# (and in the primitive sums); being invariant, it floors E0 near
# 1e-33 * E0(0) on segments with nontrivial ker(K').  Samples below
# ENERGY_FLOOR_RTOL * E0(0) are treated as zero by the bound check: decay
# is still verified six orders deeper than the exp(-50) design depth of
# the certificate while float noise cannot raise spurious violations.
ENERGY_FLOOR_RTOL = 1e-28

CSV_HEADER = "step,t,E0,Edelta,damping,bound"


@dataclass(frozen=True)
class CompatibilityReport:
    """Diagnostics of the compatibility condition for one initial value.

    residual_norm is the gamma-norm of the component of ustar0 that no
    element of the first space can reach through the constraint equation;
    conserved_moments are the pairings of gamma ustar0 with an orthonormal
    basis of ker(K'), which the flow preserves exactly.
    """

    residual_norm: float
    conserved_moments: np.ndarray


@dataclass(frozen=True)
class Trajectory:
    """Time grid, per-sample states/primitives, and the energy ledger.

    Samples are rows: U[n] is the first component after n steps.  For runs
    started from incompatible data the primitives, Edelta, bound, delta,
    violations and worst_excess are all None; the certificate does not
    apply there and only E0, damping and the conserved moments remain
    meaningful.
    """

    tau: float
    times: np.ndarray
    U: np.ndarray
    Ustar: np.ndarray
    W: np.ndarray | None
    Wstar: np.ndarray | None
    E0: np.ndarray
    damping: np.ndarray
    Edelta: np.ndarray | None
    bound: np.ndarray | None
    delta: float | None
    moments: np.ndarray
    violations: np.ndarray | None
    worst_excess: float | None

    @property
    def n_steps(self) -> int:
        return len(self.times) - 1

    @property
    def compatible(self) -> bool:
        return self.Edelta is not None

    def state(self, n: int) -> State:
        return State(self.U[n], self.Ustar[n])

    def primitive(self, n: int) -> PrimitivePair:
        if self.W is None:
            raise IncompatibleInitialData("run has no primitives (incompatible data)")
        return PrimitivePair(self.W[n], self.Wstar[n])


def _gamma_cholesky(seg: ComplexSegment) -> np.ndarray:
    try:
        return sla.cholesky(seg.G, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise NotSPD(f"G is not positive definite: {exc}") from exc


def _gamma_norm(seg: ComplexSegment, y: np.ndarray) -> float:
    return float(np.sqrt(max(0.0, y @ seg.G @ y)))


def kernel_functionals(seg: ComplexSegment) -> np.ndarray:
    """Orthonormal basis Y of ker(K'): the directions no image can excite."""
    return kernel_basis(seg.K.T)


def compatibility_check(seg: ComplexSegment, ustar0) -> CompatibilityReport:
    """Measure how far ustar0 is from the compatible subspace.

    Solves K x = G ustar0 in the G^{-1}-weighted least-squares sense
    (through the Cholesky factor of G) and reports the gamma-norm of the
    defect, which vanishes exactly when G ustar0 is in range(K).  Also
    returns the conserved pairings Y' G ustar0 for Y = kernel_functionals.
    """
    ustar0 = np.asarray(ustar0, dtype=float)
    if ustar0.shape != (seg.n2,):
        raise DimensionMismatch(f"ustar0 shape {ustar0.shape}, expected ({seg.n2},)")
    Y = kernel_functionals(seg)
    moments = Y.T @ (seg.G @ ustar0)
    L = _gamma_cholesky(seg)
    B = sla.solve_triangular(L, seg.K, lower=True, check_finite=False)
    c = L.T @ ustar0
    x, *_ = np.linalg.lstsq(B, c, rcond=None)
    return CompatibilityReport(
        residual_norm=float(np.linalg.norm(B @ x - c)),
        conserved_moments=moments,
    )


def is_compatible(seg: ComplexSegment, ustar0, rtol: float = COMPAT_RTOL) -> bool:
    """True when the compatibility defect is below rtol * ||ustar0||_gamma."""
    ustar0 = np.asarray(ustar0, dtype=float)
    rep = compatibility_check(seg, ustar0)
    return rep.residual_norm <= rtol * _gamma_norm(seg, ustar0)


def project_compatible(seg: ComplexSegment, ustar0) -> np.ndarray:
    """Gamma-orthogonal projection of ustar0 onto the range of D.

    Solves min ||D x - ustar0||_gamma with the minimum-norm x (unique on
    the complement of ker D) and returns D x.  Idempotent, and the defect
    ustar0 - D x is gamma-orthogonal to every image D y.
    """
    ustar0 = np.asarray(ustar0, dtype=float)
    if ustar0.shape != (seg.n2,):
        raise DimensionMismatch(f"ustar0 shape {ustar0.shape}, expected ({seg.n2},)")
    L = _gamma_cholesky(seg)
    B = L.T @ seg.D
    c = L.T @ ustar0
    x, *_ = np.linalg.lstsq(B, c, rcond=None)
    return seg.D @ x


def _solve_saddle(seg: ComplexSegment, s0: State) -> PrimitivePair:
    """Saddle solve for the primitive initial values, no compatibility gate.

    System: Bm w - K' wstar = -A u0 and K w = -G ustar0.  The coefficient
    matrix is singular exactly along {0} x ker(K'); the minimum-norm
    least-squares solution therefore selects the unique wstar that is
    Euclidean-orthogonal to ker(K'), which is the documented normalization.
    """
    n1, n2 = seg.n1, seg.n2
    Mb = np.zeros((n1 + n2, n1 + n2))
    Mb[:n1, :n1] = seg.Bm
    Mb[:n1, n1:] = -seg.K.T
    Mb[n1:, :n1] = seg.K
    rhs = np.concatenate([-(seg.A @ s0.u), -(seg.G @ s0.ustar)])
    sol, *_ = np.linalg.lstsq(Mb, rhs, rcond=None)
    defect = float(np.linalg.norm(Mb @ sol - rhs))
    scale = float(np.linalg.norm(rhs))
    if defect > SADDLE_RTOL * max(scale, 1e-300):
        raise SingularSaddle(
            f"saddle system inconsistent: residual {defect:.3e} vs scale {scale:.3e}"
        )
    return PrimitivePair(sol[:n1], sol[n1:])


def initialize_primitives(
    seg: ComplexSegment, s0: State, compat_rtol: float = COMPAT_RTOL
) -> PrimitivePair:
    """Primitive initial values (w0, wstar0) for compatible initial data.

    Both equations of the saddle system hold to 1e-9 relative; wstar0 is
    normalized Euclidean-orthogonal to ker(K').  Raises
    IncompatibleInitialData when the compatibility defect of ustar0
    exceeds ``compat_rtol`` relative to its gamma-norm.
    """
    rep = compatibility_check(seg, s0.ustar)
    gnorm = _gamma_norm(seg, s0.ustar)
    if rep.residual_norm > compat_rtol * gnorm:
        raise IncompatibleInitialData(
            f"compatibility defect {rep.residual_norm:.3e} exceeds "
            f"{compat_rtol:g} * ||ustar0||_gamma = {compat_rtol * gnorm:.3e}"
        )
    return _solve_saddle(seg, s0)


def _schur_operators(seg: ComplexSegment, tau: float):
    """Factor the step: returns (E, F, GK) with u_n = E u + F ustar and
    ustar_n = ustar - GK u_n."""
    GiK = spd_solve(seg.G, seg.K)
    S = seg.K.T @ GiK
    S = 0.5 * (S + S.T)
    M = seg.A / tau + seg.Bm + tau * S
    cM = spd_factor(M, "reduced step operator")
    E = sla.cho_solve(cM, seg.A, check_finite=False) / tau
    F = sla.cho_solve(cM, seg.K.T, check_finite=False)
    return E, F, tau * GiK


def backward_euler_step(seg: ComplexSegment, s: State, tau: float) -> State:
    """One implicit step of length tau.

    Solves (A/tau + Bm + tau K' G^{-1} K) u_n = (A/tau) u + K' ustar, then
    recovers ustar_n = ustar - tau G^{-1} K u_n.  The monolithic residual
    of the coupled system stays below 1e-10 relative.
    """
    if tau <= 0:
        raise NonPositiveTau(f"tau must be positive, got {tau}")
    if s.u.shape != (seg.n1,) or s.ustar.shape != (seg.n2,):
        raise DimensionMismatch(
            f"state shapes {s.u.shape}, {s.ustar.shape} do not match "
            f"segment ({seg.n1}, {seg.n2})"
        )
    GiK = spd_solve(seg.G, seg.K)
    S = seg.K.T @ GiK
    S = 0.5 * (S + S.T)
    M = seg.A / tau + seg.Bm + tau * S
    rhs = seg.A @ s.u / tau + seg.K.T @ s.ustar
    u_n = spd_solve(M, rhs)
    ustar_n = s.ustar - tau * (GiK @ u_n)
    return State(u_n, ustar_n)


def verify_decay_bound(
    times, E0, c_prime: float, slack: float = BOUND_SLACK, floor: float = 0.0
) -> tuple[np.ndarray, float]:
    """Check E0(t_n) <= 3 exp(-c_prime (t_n - t_m)) E0(t_m) for all m <= n.

    Runs in log space with a prefix minimum, so all anchors m are covered
    in one pass.  A sample violates when it exceeds the tightest anchored
    bound by more than the relative ``slack`` plus the absolute ``floor``
    (see ENERGY_FLOOR_RTOL for how simulate picks the floor).  Returns
    (violations, worst_excess): a per-sample flag vector and the largest
    relative exceedance over the floored bound, negative meaning margin.
    """
    times = np.asarray(times, dtype=float)
    E0 = np.asarray(E0, dtype=float)
    if times.shape != E0.shape:
        raise DimensionMismatch(f"times {times.shape} vs E0 {E0.shape}")
    with np.errstate(divide="ignore"):
        logs = c_prime * times + np.log(E0)
    pmin = np.minimum.accumulate(logs)
    with np.errstate(over="ignore"):
        best = 3.0 * np.exp(pmin - c_prime * times)
    violations = E0 > best * (1.0 + slack) + floor
    denom = best + floor
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(denom > 0, E0 / denom, np.where(E0 > 0, np.inf, 1.0))
    worst = float(np.max(ratio) - 1.0) if ratio.size else 0.0
    return violations, worst


def _row_quadratic(X: np.ndarray, M: np.ndarray) -> np.ndarray:
    """x_n' M x_n for every row, one pass of BLAS."""
    return np.einsum("ij,ij->i", X @ M, X)


def simulate(
    seg: ComplexSegment,
    s0: State,
    tau: float,
    n_steps: int,
    cert: ConstantsReport,
    delta: float | None = None,
    allow_incompatible: bool = False,
    compat_rtol: float = COMPAT_RTOL,
    bound_slack: float = BOUND_SLACK,
) -> Trajectory:
    """Run backward Euler for n_steps and assemble the energy ledger.

    Parameters
    ----------
    seg, s0, tau, n_steps
        Segment, initial state, step size (> 0), number of steps (>= 0).
    cert
        Certificate of the segment; supplies c_prime for the bound column
        and the default delta = delta_double_star for the modified energy.
    delta
        Optional override of the modified-energy shift; must lie in
        (0, delta_star].
    allow_incompatible
        When the initial data fails the compatibility test, opt into a run
        without primitives, modified energy, or bound checking instead of
        raising IncompatibleInitialData.

    Notes
    -----
    The primitive rows obey w_n = w_{n-1} + tau u_n (and likewise for
    wstar) with exactly the floating-point results of the sequential
    recursion.  Every sample n is checked against the certified bound
    anchored at every earlier sample m; violations beyond ``bound_slack``
    relative are flagged per sample.
    """
    if tau <= 0:
        raise NonPositiveTau(f"tau must be positive, got {tau}")
    if n_steps < 0:
        raise ValueError(f"n_steps must be nonnegative, got {n_steps}")
    if s0.u.shape != (seg.n1,) or s0.ustar.shape != (seg.n2,):
        raise DimensionMismatch(
            f"initial shapes {s0.u.shape}, {s0.ustar.shape} do not match "
            f"segment ({seg.n1}, {seg.n2})"
        )

    compat = compatibility_check(seg, s0.ustar)
    compatible = compat.residual_norm <= compat_rtol * _gamma_norm(seg, s0.ustar)
    if not compatible and not allow_incompatible:
        raise IncompatibleInitialData(
            f"compatibility defect {compat.residual_norm:.3e}; project the "
            "initial value or pass allow_incompatible=True"
        )
    if compatible:
        if delta is None:
            delta = cert.delta_double_star
        elif not 0.0 < delta <= cert.delta_star:
            raise ValueError(
                f"delta={delta} outside (0, delta_star={cert.delta_star}]"
            )
        p0 = _solve_saddle(seg, s0)

    E, F, GK = _schur_operators(seg, tau)
    # compose the two stages into one step matrix so the hot loop is a
    # single matrix-vector product per step
    n1, dim = seg.n1, seg.n1 + seg.n2
    T = np.empty((dim, dim))
    T[:n1, :n1] = E
    T[:n1, n1:] = F
    T[n1:, :n1] = -(GK @ E)
    T[n1:, n1:] = np.eye(seg.n2) - GK @ F
    n = n_steps
    X = np.empty((n + 1, dim))
    X[0, :n1] = s0.u
    X[0, n1:] = s0.ustar
    x = X[0].copy()
    for k in range(1, n + 1):
        x = T @ x
        X[k] = x
    U = X[:, :n1]
    Ustar = X[:, n1:]

    times = tau * np.arange(n + 1)
    UA = U @ seg.A
    E0 = 0.5 * (np.einsum("ij,ij->i", UA, U) + _row_quadratic(Ustar, seg.G))
    damping = _row_quadratic(U, seg.Bm)
    Y = kernel_functionals(seg)
    moments = Ustar @ (seg.G @ Y)

    if compatible:
        W = np.add.accumulate(np.vstack([p0.w[None, :], tau * U[1:]]), axis=0)
        Wstar = np.add.accumulate(np.vstack([p0.wstar[None, :], tau * Ustar[1:]]), axis=0)
        Edelta = E0 + delta * np.einsum("ij,ij->i", UA, W)
        bound = cert.C_prime * np.exp(-cert.c_prime * times) * E0[0]
        violations, worst = verify_decay_bound(
            times, E0, cert.c_prime, bound_slack, floor=ENERGY_FLOOR_RTOL * E0[0]
        )
    else:
        W = Wstar = Edelta = bound = violations = None
        worst = None
        delta = None

    return Trajectory(
        tau=tau,
        times=times,
        U=U,
        Ustar=Ustar,
        W=W,
        Wstar=Wstar,
        E0=E0,
        damping=damping,
        Edelta=Edelta,
        bound=bound,
        delta=delta,
        moments=moments,
        violations=violations,
        worst_excess=worst,
    )


def generator(seg: ComplexSegment) -> np.ndarray:
    """Block generator of d/dt (u, ustar): [[-A^{-1}Bm, A^{-1}K'], [-G^{-1}K, 0]]."""
    n1, n2 = seg.n1, seg.n2
    Gen = np.zeros((n1 + n2, n1 + n2))
    Gen[:n1, :n1] = -spd_solve(seg.A, seg.Bm)
    Gen[:n1, n1:] = spd_solve(seg.A, seg.K.T)
    Gen[n1:, :n1] = -spd_solve(seg.G, seg.K)
    return Gen


def extended_generator(seg: ComplexSegment) -> np.ndarray:
    """Generator for (u, ustar, w, wstar): the primitives integrate the states."""
    n = seg.n1 + seg.n2
    Gb = np.zeros((2 * n, 2 * n))
    Gb[:n, :n] = generator(seg)
    Gb[n:, :n] = np.eye(n)
    return Gb


def reference_solution(
    seg: ComplexSegment, s0: State, t: float, size_limit: int = DENSE_LIMIT
) -> State:
    """Exact semigroup solution at time t through the dense matrix exponential."""
    if seg.n1 + seg.n2 > size_limit:
        raise SizeLimitExceeded(
            f"segment order {seg.n1 + seg.n2} exceeds dense limit {size_limit}"
        )
    x0 = np.concatenate([s0.u, s0.ustar])
    x = expm_apply(generator(seg), x0, t, size_limit=size_limit)
    return State(x[: seg.n1], x[seg.n1 :])


def fit_decay_rate(times, energies, window) -> tuple[float, float, float]:
    """Least-squares exponential rate over a sample window.

    Fits a line to (t, ln E) on ``window`` (a slice or a (start, stop)
    pair, half-open) and returns (rate, intercept, r_squared) with rate
    the negated slope.

    Raises WindowTooShort for fewer than 3 samples and NonPositiveEnergy
    when any windowed energy is <= 0.
    """
    times = np.asarray(times, dtype=float)
    energies = np.asarray(energies, dtype=float)
    if times.shape != energies.shape:
        raise DimensionMismatch(f"times {times.shape} vs energies {energies.shape}")
    sl = window if isinstance(window, slice) else slice(int(window[0]), int(window[1]))
    t = times[sl]
    e = energies[sl]
    if t.size < 3:
        raise WindowTooShort(f"window has {t.size} samples, need at least 3")
    if np.any(e <= 0):
        raise NonPositiveEnergy("window contains nonpositive energies")
    y = np.log(e)
    slope, intercept = np.polyfit(t, y, 1)
    resid = y - (slope * t + intercept)
    ss_res = float(resid @ resid)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return float(-slope), float(intercept), float(r2)


def trajectory_to_csv(traj: Trajectory, path) -> None:
    """Write the ledger, one row per sample, >= 15 significant digits.

    Edelta and bound cells are left empty for incompatible runs, where
    those columns are undefined.
    """
    with open(path, "w", newline="") as f:
        f.write(CSV_HEADER + "\n")
        for k in range(len(traj.times)):
            ed = "" if traj.Edelta is None else f"{traj.Edelta[k]:.17g}"
            bd = "" if traj.bound is None else f"{traj.bound[k]:.17g}"
            f.write(
                f"{k},{traj.times[k]:.17g},{traj.E0[k]:.17g},{ed},"
                f"{traj.damping[k]:.17g},{bd}\n"
            )


def read_energy_csv(path) -> dict:
    """Read back a ledger CSV; empty optional columns come out as None."""
    import csv as _csv

    with open(path, newline="") as f:
        reader = _csv.reader(f)
        header = next(reader)
        if header != CSV_HEADER.split(","):
            raise ValueError(f"unexpected CSV header {header!r}")
        rows = list(reader)
    steps = np.array([int(r[0]) for r in rows])
    times = np.array([float(r[1]) for r in rows])
    E0 = np.array([float(r[2]) for r in rows])
    damping = np.array([float(r[4]) for r in rows])
    has_edelta = all(r[3] != "" for r in rows) and len(rows) > 0
    Edelta = np.array([float(r[3]) for r in rows]) if has_edelta else None
    has_bound = all(r[5] != "" for r in rows) and len(rows) > 0
    bound = np.array([float(r[5]) for r in rows]) if has_bound else None
    return {
        "step": steps,
        "t": times,
        "E0": E0,
        "Edelta": Edelta,
        "damping": damping,
        "bound": bound,
    }
