"""Spectral constants and the explicit decay certificate.

Three numbers control how fast the damped system provably loses energy:
the norm-equivalence constants of the damping form against the inertia
form (extreme eigenvalues of Bm against A), and a discrete Poincare
constant measured on the damping-orthogonal complement of the kernel of
the differential.  From them the certificate derives thresholds
delta_star and delta_double_star for the modified-energy shift and the
guaranteed bound

    E0(t) <= C_prime * exp(-c_prime * (t - s)) * E0(s)

with C_prime = 3 and c_prime = (2/3) delta_double_star.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .complex_core import ComplexSegment
from .errors import NonPositiveInput, ZeroDifferential
from .linalg import gen_eig_extremes, kernel_basis, spd_solve


@dataclass(frozen=True)
class ConstantsReport:
    """The decay certificate of one segment.

    poincare_variant_dhd carries the alternative Poincare constant built
    from the D' H D quadratic form; it is diagnostic only and never enters
    the certified rate.
    """

    c_beta: float
    C_beta: float
    C_P: float
    delta_star: float
    delta_double_star: float
    C_prime: float
    c_prime: float
    kernel_dim: int
    poincare_variant_dhd: float | None = None


def norm_equivalence_constants(seg: ComplexSegment) -> tuple[float, float]:
    """Extreme eigenvalues (c_beta, C_beta) of Bm x = lambda A x.

    These are the best constants in
    c_beta ||u||_A^2 <= ||u||_Bm^2 <= C_beta ||u||_A^2; physically,
    reciprocals of the slowest and fastest relaxation times.
    """
    return gen_eig_extremes(seg.Bm, seg.A)


def beta_complement_basis(seg: ComplexSegment) -> np.ndarray:
    """Basis of the Bm-orthogonal complement of ker(D).

    Returns full-column-rank V spanning {v : Z' Bm v = 0} for Z a kernel
    basis of D; the identity when the kernel is trivial, and a zero-column
    matrix when D is the zero map (everything is kernel).
    """
    Z = kernel_basis(seg.D)
    if Z.shape[1] == 0:
        return np.eye(seg.n1)
    return kernel_basis(Z.T @ seg.Bm)


def _schur_form(seg: ComplexSegment) -> np.ndarray:
    """K' G^{-1} K, symmetrized against roundoff."""
    S = seg.K.T @ spd_solve(seg.G, seg.K)
    return 0.5 * (S + S.T)


def discrete_poincare_constant(seg: ComplexSegment, use_dhd: bool = False) -> float:
    """Best constant C with ||v||_A <= C |v|_* on the complement of ker(D).

    The reference seminorm |v|_* defaults to the K' G^{-1} K form, the
    G-norm of the primitive velocity forced by the constraint equation;
    this is exactly the quantity the decay proof divides by, so the
    certificate stays valid as stated.  With ``use_dhd`` the D' H D form
    (the 1/gamma-weighted image seminorm) is used instead; it dominates the
    default form, so the resulting constant never exceeds the default and
    is reported for comparison only.

    Raises ZeroDifferential when the complement is empty (D vanishes).
    """
    V = beta_complement_basis(seg)
    if V.shape[1] == 0:
        raise ZeroDifferential("differential is zero: no complement to measure")
    den = seg.D.T @ seg.H @ seg.D if use_dhd else _schur_form(seg)
    _, lam_max = gen_eig_extremes(seg.A, den, subspace_basis=V)
    return float(np.sqrt(lam_max))


def decay_certificate(
    c_beta: float,
    C_beta: float,
    C_P: float,
    kernel_dim: int = 0,
    poincare_variant_dhd: float | None = None,
) -> ConstantsReport:
    """Assemble the certificate from the three spectral constants.

    delta_star  = (1/2) c_beta / (2 + C_P c_beta)
    delta_double_star
                = min(delta_star,
                      c_beta / (2 + 2 C_beta/c_beta + (C_P C_beta)^2))
    C_prime = 3,  c_prime = (2/3) delta_double_star.
    """
    if c_beta <= 0 or C_beta <= 0 or C_P <= 0:
        raise NonPositiveInput(
            f"constants must be positive, got ({c_beta}, {C_beta}, {C_P})"
        )
    if c_beta > C_beta:
        raise ValueError(f"c_beta={c_beta} exceeds C_beta={C_beta}")
    delta_star = 0.5 * c_beta / (2.0 + C_P * c_beta)
    alternative = c_beta / (2.0 + 2.0 * C_beta / c_beta + (C_P * C_beta) ** 2)
    delta_double_star = min(delta_star, alternative)
    return ConstantsReport(
        c_beta=float(c_beta),
        C_beta=float(C_beta),
        C_P=float(C_P),
        delta_star=float(delta_star),
        delta_double_star=float(delta_double_star),
        C_prime=3.0,
        c_prime=2.0 * float(delta_double_star) / 3.0,
        kernel_dim=int(kernel_dim),
        poincare_variant_dhd=poincare_variant_dhd,
    )


def constants_report(seg: ComplexSegment) -> ConstantsReport:
    """Full pipeline: measure every constant of a segment and certify."""
    c_beta, C_beta = norm_equivalence_constants(seg)
    C_P = discrete_poincare_constant(seg)
    dhd = discrete_poincare_constant(seg, use_dhd=True)
    kdim = kernel_basis(seg.D).shape[1]
    return decay_certificate(
        c_beta, C_beta, C_P, kernel_dim=kdim, poincare_variant_dhd=dhd
    )


def report_to_dict(rep: ConstantsReport) -> dict:
    out = {
        "c_beta": rep.c_beta,
        "C_beta": rep.C_beta,
        "C_P": rep.C_P,
        "delta_star": rep.delta_star,
        "delta_double_star": rep.delta_double_star,
        "C_prime": rep.C_prime,
        "c_prime": rep.c_prime,
        "kernel_dim": rep.kernel_dim,
    }
    if rep.poincare_variant_dhd is not None:
        out["poincare_variant_dhd"] = rep.poincare_variant_dhd
    return out


def report_from_dict(data: dict) -> ConstantsReport:
    return ConstantsReport(
        c_beta=float(data["c_beta"]),
        C_beta=float(data["C_beta"]),
        C_P=float(data["C_P"]),
        delta_star=float(data["delta_star"]),
        delta_double_star=float(data["delta_double_star"]),
        C_prime=float(data["C_prime"]),
        c_prime=float(data["c_prime"]),
        kernel_dim=int(data["kernel_dim"]),
        poincare_variant_dhd=(
            float(data["poincare_variant_dhd"])
            if data.get("poincare_variant_dhd") is not None
            else None
        ),
    )
