"""Closed-form curvature quantities on a chamber.

Chamber-coordinate formulas (``beta`` runs over the marked roots)::

    X(Y)    = -sum m_V cot(beta(Y)) beta  +  sum m_H tan(beta(Y)) beta
    rho(Y)  = -sum m_V log|sin beta(Y)|   -  sum m_H log cos beta(Y)
    Hess    =  sum m_V / sin^2 beta  beta beta^T  +  sum m_H / cos^2 beta  beta beta^T

with ``grad rho = X``.  The same data can be re-expressed as an isoparametric
family in a Hilbert space (:func:`lift_family`); its mean curvature at a
normal vector ``w`` is the chamber field at ``Y0 + w``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DomainError
from .rootsys import chamber

EPS_POLE = 1e-12


def _as_point(Y, rank):
    Y = np.asarray(Y, dtype=float)
    if Y.shape != (rank,):
        raise DomainError(f"expected a point with {rank} coordinates, got shape {Y.shape}")
    if not np.all(np.isfinite(Y)):
        raise DomainError(f"non-finite point {Y.tolist()}")
    return Y


def check_interior(spec, Y, eps_pole=EPS_POLE):
    """Return ``Y`` as an array, or raise :class:`DomainError` naming the closest violated wall."""
    ch = chamber(spec)
    Y = _as_point(Y, ch.rank)
    m = ch.margins(Y)
    k = int(np.argmin(m))
    if m[k] <= eps_pole:
        raise DomainError(
            f"{spec.name}: point {Y.tolist()} is not interior ({ch.describe(k)} has margin {m[k]:.3e})",
            constraint=ch.constraints[k], margin=float(m[k]))
    return Y


def _masks(spec):
    return spec.m_V > 0, spec.m_H > 0


def field_coefficients(spec, Y):
    """Per-root scalar ``c_i`` with ``X = sum c_i beta_i``; no domain check."""
    beta = spec.vectors @ Y
    v, h = _masks(spec)
    coef = np.zeros(len(beta))
    coef[v] -= spec.m_V[v] / np.tan(beta[v])
    coef[h] += spec.m_H[h] * np.tan(beta[h])
    return coef


def vector_field_X(spec, Y, eps_pole=EPS_POLE):
    """The flow field at an interior chamber point."""
    Y = check_interior(spec, Y, eps_pole)
    return field_coefficients(spec, Y) @ spec.vectors


def gradient_rho(spec, Y, eps_pole=EPS_POLE):
    """Gradient of :func:`potential_rho`; identical to :func:`vector_field_X`."""
    return vector_field_X(spec, Y, eps_pole)


def potential_rho(spec, Y, eps_pole=EPS_POLE):
    Y = check_interior(spec, Y, eps_pole)
    beta = spec.vectors @ Y
    v, h = _masks(spec)
    terms = np.concatenate([-spec.m_V[v] * np.log(np.abs(np.sin(beta[v]))),
                            -spec.m_H[h] * np.log(np.cos(beta[h]))])
    return math.fsum(terms)


def hessian_rho(spec, Y, eps_pole=EPS_POLE):
    Y = check_interior(spec, Y, eps_pole)
    B = spec.vectors
    beta = B @ Y
    v, h = _masks(spec)
    w = np.zeros(len(beta))
    w[v] += spec.m_V[v] / np.sin(beta[v]) ** 2
    w[h] += spec.m_H[h] / np.cos(beta[h]) ** 2
    H = (B * w[:, None]).T @ B
    return 0.5 * (H + H.T)


# ---------------------------------------------------------------------------
# shape operator of an orbit


class SpectrumEntry(NamedTuple):
    eigenvalue: float
    multiplicity: int
    root: int
    block: str  # "vertical" or "horizontal"


def orbit_shape_spectrum(spec, Y0, v, eps_pole=EPS_POLE):
    """Eigenvalues of the orbit's shape operator in the normal direction ``v``.

    Each vertical root block contributes ``-beta(v)/tan beta(Y0)`` and each
    horizontal block ``beta(v) tan beta(Y0)``, with the block's multiplicity.
    """
    Y0 = check_interior(spec, Y0, eps_pole)
    v = _as_point(v, spec.rank)
    out = []
    for i, r in enumerate(spec.roots):
        b0, bv = r(Y0), r(v)
        if r.m_V:
            out.append(SpectrumEntry(-bv / math.tan(b0), r.m_V, i, "vertical"))
        if r.m_H:
            out.append(SpectrumEntry(bv * math.tan(b0), r.m_H, i, "horizontal"))
    return out


# ---------------------------------------------------------------------------
# lifted isoparametric family


class FamilyEntry(NamedTuple):
    lam: tuple  # covector lambda_a
    b: float
    m_e: int
    m_o: int
    root: int | None = None

    @property
    def normal(self):
        return np.array(self.lam)


@dataclass(frozen=True)
class CurvatureFamily:
    """Curvature data ``{(lambda_a, b_a, m_e, m_o)}``; principal curvatures are ``lambda_a/(1 + b_a j)``."""

    entries: tuple
    basepoint: tuple | None = None

    def __post_init__(self):
        entries = tuple(FamilyEntry(tuple(float(x) for x in e[0]), float(e[1]), int(e[2]), int(e[3]),
                                    *(e[4:] if len(e) > 4 else ()))
                        for e in self.entries)
        for k, e in enumerate(entries):
            if not any(e.lam):
                raise ValueError(f"family entry {k}: lambda must be nonzero")
            if e.b <= 0:
                raise ValueError(f"family entry {k}: b must be positive")
            if e.m_e < 0 or e.m_o < 0:
                raise ValueError(f"family entry {k}: multiplicities must be nonnegative")
        object.__setattr__(self, "entries", entries)
        if self.basepoint is not None:
            object.__setattr__(self, "basepoint", tuple(float(x) for x in self.basepoint))

    @property
    def rank(self):
        return len(self.entries[0].lam)

    def lambdas(self):
        return np.array([e.lam for e in self.entries])

    def bs(self):
        return np.array([e.b for e in self.entries])


def lift_family(spec, Y0, eps_pole=EPS_POLE):
    """Translate chamber data at ``Y0`` into lifted curvature data.

    V-only roots give ``(-beta/beta(Y0), pi/beta(Y0))``, H-only roots give
    ``(-beta/(beta(Y0)+pi/2), pi/(beta(Y0)+pi/2))`` (both with m_e = m_o),
    and roots in both blocks give ``(-beta/beta(Y0), pi/(2 beta(Y0)))`` with
    ``m_e = m_V`` and ``m_o = m_H``.
    """
    Y0 = check_interior(spec, Y0, eps_pole)
    oriented = chamber(spec).spec
    entries = []
    for i, r in enumerate(oriented.roots):
        b0 = r(Y0)
        vec = np.array(r.vector)
        if r.m_V and r.m_H:
            entries.append(FamilyEntry(tuple(-vec / b0), math.pi / (2 * b0), r.m_V, r.m_H, i))
        elif r.m_V:
            entries.append(FamilyEntry(tuple(-vec / b0), math.pi / b0, r.m_V, r.m_V, i))
        else:
            s = b0 + math.pi / 2
            entries.append(FamilyEntry(tuple(-vec / s), math.pi / s, r.m_H, r.m_H, i))
    return CurvatureFamily(tuple(entries), tuple(Y0))


def _angles(family, w, eps_pole):
    w = _as_point(w, family.rank)
    L, b = family.lambdas(), family.bs()
    theta = (math.pi / (2 * b)) * (1.0 - L @ w)
    for k, (e, t) in enumerate(zip(family.entries, theta)):
        if (e.m_e and abs(math.sin(t)) <= eps_pole) or (e.m_o and abs(math.cos(t)) <= eps_pole):
            raise DomainError(f"family entry {k} is at a pole (angle {t!r})", constraint=k,
                              margin=min(abs(math.sin(t)), abs(math.cos(t))))
    return theta


def lift_mean_curvature(family, w, eps_pole=EPS_POLE):
    """Mean curvature vector of the parallel submanifold at normal vector ``w``."""
    theta = _angles(family, w, eps_pole)
    out = np.zeros(family.rank)
    for e, t in zip(family.entries, theta):
        c = 0.0
        if e.m_e:
            c += e.m_e / math.tan(t)
        if e.m_o:
            c -= e.m_o * math.tan(t)
        out += c * (math.pi / (2 * e.b)) * e.normal
    return out


def lift_potential(family, w, eps_pole=EPS_POLE):
    """Lifted potential ``-sum(m_e log sin t_a + m_o log cos t_a)``; differs from rho by a constant."""
    theta = _angles(family, w, eps_pole)
    terms = []
    for e, t in zip(family.entries, theta):
        if e.m_e:
            terms.append(-e.m_e * math.log(abs(math.sin(t))))
        if e.m_o:
            terms.append(-e.m_o * math.log(abs(math.cos(t))))
    return math.fsum(terms)


# ---------------------------------------------------------------------------
# truncated spectral sums


def _window(x, J):
    """Integers k with |x + k| <= 2J + 1 (a window symmetric about the pole -x)."""
    n = 2 * J + 1
    return np.arange(math.ceil(-n - x - 1e-12), math.floor(n - x + 1e-12) + 1)


def cot_series(theta, J):
    """Truncated ``sum 2/(theta + 2 j pi)`` over ``|theta + 2 j pi| <= (2J+1) pi``.

    For ``theta < pi`` this is exactly the ``|j| <= J`` sum; at ``theta = pi``
    the window also takes ``j = -J-1`` so that pairs cancel and the result
    is exactly zero.
    """
    if J < 0:
        raise ValueError("J must be nonnegative")
    u = float(theta) / math.pi
    lo = math.ceil((-(2 * J + 1) - u) / 2 - 1e-12)
    hi = math.floor(((2 * J + 1) - u) / 2 + 1e-12)
    den = u + 2.0 * np.arange(lo, hi + 1)
    if np.any(den == 0.0):
        raise DomainError(f"theta={theta!r} is a pole of the cot series")
    return (2.0 / math.pi) * math.fsum(1.0 / den)


class TraceResult(NamedTuple):
    partial: float
    closed: float


def regularized_trace(family, w, v, J, eps_pole=EPS_POLE):
    """Truncated regularized trace of the lifted shape operator against its closed form.

    Summand ``lambda_{a,k}(v) / (1 - lambda_{a,k}(w))`` with
    ``lambda_{a,k} = lambda_a / (1 + b_a k)`` and weight ``m_e`` (k even) or
    ``m_o`` (k odd); indices are kept symmetric about each family's pole.
    """
    if J < 1:
        raise ValueError("J must be >= 1")
    w = _as_point(w, family.rank)
    v = _as_point(v, family.rank)
    parts = []
    for idx, e in enumerate(family.entries):
        lv = float(np.dot(e.lam, v))
        if lv == 0.0:
            continue
        x = (1.0 - float(np.dot(e.lam, w))) / e.b
        k = _window(x, J)
        den = x + k
        weight = np.where(k % 2 == 0, e.m_e, e.m_o).astype(float)
        if np.any((den == 0.0) & (weight != 0)):
            raise DomainError(f"family entry {idx}: w lies on a focal hyperplane", constraint=idx)
        keep = weight != 0
        parts.append(lv / e.b * math.fsum(weight[keep] / den[keep]))
    closed = float(np.dot(lift_mean_curvature(family, w, eps_pole), v))
    return TraceResult(math.fsum(parts), closed)


def lift_principal_curvatures(family, w, v, J):
    """Principal curvatures ``lambda_{a,j}(v) / (1 - lambda_{a,j}(w))`` for ``|j| <= J``.

    Returns ``(value, multiplicity, entry_index, j)`` tuples; even ``j``
    carries ``m_e`` and odd ``j`` carries ``m_o``.
    """
    w = _as_point(w, family.rank)
    v = _as_point(v, family.rank)
    out = []
    for a, e in enumerate(family.entries):
        lw, lv = float(np.dot(e.lam, w)), float(np.dot(e.lam, v))
        for j in range(-J, J + 1):
            m = e.m_e if j % 2 == 0 else e.m_o
            if m == 0:
                continue
            scale = 1.0 + e.b * j
            den = scale - lw
            if scale == 0.0 or abs(den) <= EPS_POLE * max(1.0, abs(scale)):
                raise DomainError(f"w is focal for family entry {a}, index {j}", constraint=(a, j))
            out.append((lv / den, m, a, j))
    return out


@dataclass(frozen=True)
class ArctanSpectrum:
    values: tuple
    sup_norm: float


def lifted_spectrum_arctan(lam, mu, K):
    """Eigenvalues ``sqrt(mu)/(arctan(sqrt(mu)/lam) + k pi)``, ``|k| <= K``, principal arctan.

    With ``mu == 0`` the spectrum is just ``{lam}``.
    """
    if K < 0:
        raise ValueError("K must be nonnegative")
    if mu < 0:
        raise ValueError("mu must be nonnegative")
    lam, mu = float(lam), float(mu)
    if mu == 0.0:
        return ArctanSpectrum((lam,), abs(lam))
    s = math.sqrt(mu)
    phase = math.pi / 2 if lam == 0.0 else math.atan(s / lam)
    values = tuple(s / (phase + k * math.pi) for k in range(-K, K + 1))
    top = math.pi / 2 if lam == 0.0 else math.atan(s / abs(lam))
    return ArctanSpectrum(values, s / top)
