"""Quadratic stability of the velocity-angle loop over an uncertain steering gain.

The tracking-error dynamics of the middle loop, closed around the position
servo, are affine in the steering gain K.  Over an interval of K the loop is
quadratically stable if a single P > 0 makes ``A^T P + P A`` negative definite
at both interval ends.  The search here is a small derivative-free
optimisation; whatever it returns is re-checked with plain eigenvalues before
being reported as a certificate.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg, optimize

from .errors import Infeasible, NotHurwitz

TOL_FEAS = 1e-6
EPS_P = 1e-9


@dataclass(frozen=True)
class ParamBox:
    speed: tuple[float, float] = (2.0, 80.0)
    Eeq: tuple[float, float] = (2.0, 8.0)
    CL: tuple[float, float] = (0.4, 1.0)
    area: tuple[float, float] = (6.0, 12.0)
    span: tuple[float, float] = (1.8, 3.1)
    mass: tuple[float, float] = (1.7, 3.0)
    rho: float = 1.2

    def __post_init__(self):
        for name in ("speed", "Eeq", "CL", "area", "span", "mass"):
            lo, hi = getattr(self, name)
            if not 0 < lo <= hi:
                raise ValueError(f"{name}: need 0 < min <= max, got {(lo, hi)}")
        if not self.rho > 0:
            raise ValueError("rho must be > 0")

    @classmethod
    def point(cls, speed, Eeq, CL, area, span, mass, rho=1.2) -> "ParamBox":
        return cls((speed, speed), (Eeq, Eeq), (CL, CL), (area, area), (span, span), (mass, mass), rho)


def _ktilde(speed, Eeq, CL, area, span, mass, rho):
    return rho * CL * area * (1.0 + 1.0 / Eeq**2) ** 2 * speed / (2.0 * mass * span)


def ktilde_bounds(box: ParamBox) -> tuple[float, float]:
    """Exact K range: K grows with speed, CL, area and falls with Eeq, span, mass."""
    lo = _ktilde(box.speed[0], box.Eeq[1], box.CL[0], box.area[0], box.span[1], box.mass[1], box.rho)
    hi = _ktilde(box.speed[1], box.Eeq[0], box.CL[1], box.area[1], box.span[0], box.mass[0], box.rho)
    return lo, hi


def acl_matrix(ktilde: float, Kc: float, Kdelta: float, zeta_cl: float, w_cl: float) -> np.ndarray:
    """Closed-loop matrix on (gamma error, dm, dm_dot)."""
    w2 = w_cl * w_cl
    return np.array([
        [0.0, -ktilde * Kdelta, 0.0],
        [0.0, 0.0, 1.0],
        [Kc * w2, -w2, -2.0 * zeta_cl * w_cl],
    ])


def hurwitz_limit(Kc: float, Kdelta: float, zeta_cl: float, w_cl: float) -> float:
    """Largest K keeping ``s^3 + 2 zeta w s^2 + w^2 s + Kc Kdelta K w^2`` Hurwitz."""
    for name, v in (("Kc", Kc), ("Kdelta", Kdelta), ("zeta_cl", zeta_cl), ("w_cl", w_cl)):
        if not v > 0:
            raise ValueError(f"{name} must be > 0")
    return 2.0 * zeta_cl * w_cl / (Kc * Kdelta)


def spectral_abscissa(A) -> float:
    return float(np.max(np.linalg.eigvals(A).real))


def is_hurwitz(A) -> bool:
    return spectral_abscissa(A) < 0.0


@dataclass(frozen=True)
class StabilityCertificate:
    P: np.ndarray
    margin: float
    feasible: bool
    vertex_max_eigs: tuple[float, ...] = ()
    p_min_eig: float = float("nan")


def lyapunov_eigs(A, P) -> np.ndarray:
    M = A.T @ P + P @ A
    return np.linalg.eigvalsh(0.5 * (M + M.T))


def verify(P, matrices) -> tuple[float, float, list[float]]:
    """Independent check: (margin, min eig of P, per-matrix max eig)."""
    P = 0.5 * (np.asarray(P) + np.asarray(P).T)
    tops = [float(lyapunov_eigs(np.asarray(A), P)[-1]) for A in matrices]
    return -max(tops), float(np.linalg.eigvalsh(P)[0]), tops


def _balancing_scale(mats) -> np.ndarray:
    """Diagonal similarity that evens out row/column norms of the summed matrix."""
    M = sum(np.abs(A) for A in mats) + 1e-12
    s = np.ones(M.shape[0])
    for _ in range(50):
        Ms = M * s[None, :] / s[:, None]
        r = np.linalg.norm(Ms, axis=1)
        c = np.linalg.norm(Ms, axis=0)
        s *= np.sqrt(r / c)
        s /= s[0]
    return s


def _tril_to_P(x, n):
    L = np.zeros((n, n))
    L[np.tril_indices(n)] = x
    P = L @ L.T
    return 3.0 * P / np.trace(P)


def quadratic_stability(A1, A2, tol_feas: float = TOL_FEAS, eps: float = EPS_P,
                        restarts: int = 4, seed: int = 0) -> StabilityCertificate:
    """Common Lyapunov matrix for the segment between ``A1`` and ``A2``.

    The search works in balanced coordinates ``A~ = S^-1 A S`` and maps the
    result back with ``P = S^-T P~ S^-1``, which is exact.  Raises
    :class:`NotHurwitz` if a vertex is unstable and :class:`Infeasible` when no
    certificate passes verification.
    """
    A1 = np.asarray(A1, dtype=float)
    A2 = np.asarray(A2, dtype=float)
    for name, A in (("A1", A1), ("A2", A2)):
        if not is_hurwitz(A):
            raise NotHurwitz(f"{name} has spectral abscissa {spectral_abscissa(A):.3g}")
    n = A1.shape[0]
    s = _balancing_scale([A1, A2])
    S, Si = np.diag(s), np.diag(1.0 / s)
    B = [Si @ A1 @ S, Si @ A2 @ S]

    def back(Pt):
        P = Si @ Pt @ Si
        return 3.0 * P / np.trace(P)

    def objective(x):
        Pt = _tril_to_P(x, n)
        top = max(lyapunov_eigs(Bi, Pt)[-1] for Bi in B)
        # P's scale is fixed by the trace. Keep it away from singular
        return max(top, eps - np.linalg.eigvalsh(Pt)[0])

    starts = []
    for Bi in (0.5 * (B[0] + B[1]), B[0], B[1]):
        Pt = linalg.solve_continuous_lyapunov(Bi.T, -np.eye(n))
        try:
            starts.append(np.linalg.cholesky(0.5 * (Pt + Pt.T))[np.tril_indices(n)])
        except np.linalg.LinAlgError:
            pass
    rng = np.random.default_rng(seed)
    starts += [rng.normal(size=n * (n + 1) // 2) for _ in range(restarts)]

    best_x, best_f = None, math.inf
    for x0 in starts:
        res = optimize.minimize(objective, x0, method="Nelder-Mead",
                                options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 4000})
        if res.fun < best_f:
            best_x, best_f = res.x, res.fun
        if best_f < -10 * tol_feas:
            break

    P = back(_tril_to_P(best_x, n))
    margin, pmin, tops = verify(P, [A1, A2])
    feasible = margin > tol_feas and pmin > 0
    if not feasible:
        raise Infeasible(f"no common Lyapunov matrix found (margin {margin:.3g})", margin)
    return StabilityCertificate(P, margin, True, tuple(tops), pmin)


def certify_box(box: ParamBox, Kc: float = 0.046, Kdelta: float = 4.0, zeta_cl: float = 0.7,
                w_cl: float = 78.0) -> tuple[tuple[float, float], StabilityCertificate]:
    k1, k2 = ktilde_bounds(box)
    cert = quadratic_stability(acl_matrix(k1, Kc, Kdelta, zeta_cl, w_cl),
                               acl_matrix(k2, Kc, Kdelta, zeta_cl, w_cl))
    return (k1, k2), cert
