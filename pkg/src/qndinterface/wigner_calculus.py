"""Wigner functions of the form polynomial x Gaussian.

A :class:`GaussPolyWigner` represents

    W(xi) = P(xi) * exp(-1/2 xi^T A xi + b^T xi + c)

with ``A`` symmetric positive definite.  The family is closed under linear
changes of variables, products and integration of any subset of variables
over the real line, all of which are done in closed form here.

Convention: the vacuum has quadrature variance 1/2, i.e. its Wigner
function is ``exp(-x^2 - p^2) / pi``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg

from .polynomial import Poly

VACUUM_VARIANCE = 0.5
DEGREE_CAP = 8
CONDITION_LIMIT = 1e12
_SYM_RTOL = 1e-12


class SubVacuumError(ValueError):
    """Variance below the vacuum level."""


class DegreeOverflowError(ValueError):
    """Polynomial degree exceeds the configured cap."""


class IllConditionedError(ArithmeticError):
    """A Gaussian integral needs a solve with an unacceptable condition number."""


class GaussPolyWigner:
    """``P(xi) exp(-xi^T A xi / 2 + b^T xi + c)`` over ``dim`` real variables."""

    __slots__ = ("poly", "A", "b", "c", "degree_cap")

    def __init__(
        self,
        poly: Poly,
        A: np.ndarray,
        b: Optional[np.ndarray] = None,
        c: float = 0.0,
        degree_cap: int = DEGREE_CAP,
    ):
        A = np.array(A, dtype=float, ndmin=2)
        n = A.shape[0]
        if A.shape != (n, n):
            raise ValueError(f"quadratic form must be square, got {A.shape}")
        if poly.nvars != n:
            raise ValueError(f"polynomial has {poly.nvars} variables, form has {n}")
        scale = max(1.0, float(np.max(np.abs(A)))) if n else 1.0
        if n and np.max(np.abs(A - A.T)) > _SYM_RTOL * scale:
            raise ValueError("quadratic form is not symmetric")
        A = 0.5 * (A + A.T)
        if n and np.min(np.linalg.eigvalsh(A)) <= 0:
            raise ValueError("quadratic form is not positive definite")
        if poly.degree > degree_cap:
            raise DegreeOverflowError(
                f"polynomial degree {poly.degree} exceeds cap {degree_cap}"
            )
        b = np.zeros(n) if b is None else np.array(b, dtype=float).reshape(n)
        A.setflags(write=False)
        b.setflags(write=False)
        self.poly = poly
        self.A = A
        self.b = b
        self.c = float(c)
        self.degree_cap = degree_cap

    @property
    def dim(self) -> int:
        return self.A.shape[0]

    @property
    def degree(self) -> int:
        return self.poly.degree

    def __repr__(self) -> str:
        return f"GaussPolyWigner(dim={self.dim}, degree={self.degree}, terms={len(self.poly.terms)})"

    def __call__(self, points) -> np.ndarray:
        return evaluate(self, points)

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "poly": self.poly.to_list(),
            "A": self.A.tolist(),
            "b": self.b.tolist(),
            "c": self.c,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, obj: dict) -> "GaussPolyWigner":
        dim = int(obj["dim"])
        return cls(Poly.from_list(dim, obj["poly"]), obj["A"], obj["b"], obj["c"])

    @classmethod
    def from_json(cls, text: str) -> "GaussPolyWigner":
        return cls.from_dict(json.loads(text))


def thermal_wigner(V: float) -> GaussPolyWigner:
    """Thermal state of quadrature variance ``V`` (``V = 1/2`` is the vacuum)."""
    if not V >= VACUUM_VARIANCE:
        raise SubVacuumError(f"variance {V} is below the vacuum level {VACUUM_VARIANCE}")
    return GaussPolyWigner(
        Poly.constant(2), np.eye(2) / V, c=-np.log(2 * np.pi * V)
    )


def vacuum_wigner() -> GaussPolyWigner:
    return thermal_wigner(VACUUM_VARIANCE)


def single_photon_wigner() -> GaussPolyWigner:
    """``(2x^2 + 2p^2 - 1) exp(-x^2 - p^2) / pi``."""
    poly = Poly(2, {(2, 0): 2.0, (0, 2): 2.0, (0, 0): -1.0})
    return GaussPolyWigner(poly, 2 * np.eye(2), c=-np.log(np.pi))


def product_embed(
    states: Sequence[Tuple[GaussPolyWigner, Sequence[int]]], dim: Optional[int] = None
) -> GaussPolyWigner:
    """Tensor product of states placed on the given variable indices.

    ``states`` is a list of ``(W, indices)``; together the indices must cover
    ``0..dim-1`` exactly once.
    """
    used = [i for _, idx in states for i in idx]
    dim = len(used) if dim is None else dim
    if sorted(used) != list(range(dim)):
        raise ValueError(f"variable assignments {used} do not cover 0..{dim - 1} exactly once")
    poly = Poly.constant(dim)
    A = np.zeros((dim, dim))
    b = np.zeros(dim)
    c = 0.0
    for W, idx in states:
        idx = list(idx)
        if len(idx) != W.dim:
            raise ValueError(f"state of dim {W.dim} assigned to {len(idx)} variables")
        poly = poly * W.poly.embed(dim, idx)
        A[np.ix_(idx, idx)] = W.A
        b[idx] = W.b
        c += W.c
    return GaussPolyWigner(poly, A, b, c)


def multiply(W1: GaussPolyWigner, W2: GaussPolyWigner) -> GaussPolyWigner:
    """Pointwise product of two functions over the same variables."""
    if W1.dim != W2.dim:
        raise ValueError("dimension mismatch")
    return GaussPolyWigner(
        W1.poly * W2.poly, W1.A + W2.A, W1.b + W2.b, W1.c + W2.c,
        degree_cap=max(W1.degree_cap, W2.degree_cap),
    )


def substitute_linear(W: GaussPolyWigner, T: np.ndarray) -> GaussPolyWigner:
    """Return ``xi -> W(T xi)``."""
    T = np.asarray(T, dtype=float)
    if T.shape != (W.dim, W.dim):
        raise ValueError(f"expected a {W.dim}x{W.dim} matrix")
    if abs(np.linalg.det(T)) < 1e-300 or np.linalg.cond(T) > 1 / np.finfo(float).eps:
        raise np.linalg.LinAlgError("substitution matrix is singular")
    A = T.T @ W.A @ T
    return GaussPolyWigner(
        W.poly.substitute_affine(T), 0.5 * (A + A.T), T.T @ W.b, W.c, W.degree_cap
    )


def fix_variables(
    W: GaussPolyWigner, indices: Sequence[int], values: Sequence[float]
) -> GaussPolyWigner:
    """Slice of ``W`` with the listed variables held at ``values``."""
    indices = list(indices)
    values = np.asarray(values, dtype=float)
    keep = [i for i in range(W.dim) if i not in indices]
    A_kk = W.A[np.ix_(keep, keep)]
    A_kf = W.A[np.ix_(keep, indices)]
    A_ff = W.A[np.ix_(indices, indices)]
    b = W.b[keep] - A_kf @ values
    c = W.c - 0.5 * values @ A_ff @ values + W.b[indices] @ values
    return GaussPolyWigner(W.poly.fix(indices, values), A_kk, b, c, W.degree_cap)


def _integrate_out(W: GaussPolyWigner, indices: Sequence[int]):
    """Integrate the listed variables over the real line.

    Returns ``(poly, A, b, c)`` over the remaining variables (in order).
    """
    y = sorted(set(indices))
    z = [i for i in range(W.dim) if i not in y]
    k = len(y)
    A_yy = W.A[np.ix_(y, y)]
    A_yz = W.A[np.ix_(y, z)]
    cond = np.linalg.cond(A_yy)
    if not np.isfinite(cond) or cond > CONDITION_LIMIT:
        raise IllConditionedError(
            f"conditional quadratic form has condition number {cond:.3g} > {CONDITION_LIMIT:g}"
        )
    chol = linalg.cho_factor(A_yy)
    cov = linalg.cho_solve(chol, np.eye(k))
    cov = 0.5 * (cov + cov.T)
    mean0 = linalg.cho_solve(chol, W.b[y])
    mean_lin = -linalg.cho_solve(chol, A_yz)

    # old variable -> (u_1..u_k, z_1..z_r) with y = mean0 + mean_lin z + u
    r = len(z)
    sub = np.zeros((W.dim, k + r))
    offset = np.zeros(W.dim)
    for i, yi in enumerate(y):
        sub[yi, i] = 1.0
        sub[yi, k:] = mean_lin[i]
        offset[yi] = mean0[i]
    for j, zj in enumerate(z):
        sub[zj, k + j] = 1.0
    poly = W.poly.substitute_affine(sub, offset).gaussian_expectation(k, cov)

    A = W.A[np.ix_(z, z)] + A_yz.T @ mean_lin
    b = W.b[z] + mean_lin.T @ W.b[y]
    logdet = 2.0 * np.sum(np.log(np.diag(chol[0])))
    c = W.c + 0.5 * W.b[y] @ mean0 + 0.5 * k * np.log(2 * np.pi) - 0.5 * logdet
    return poly, 0.5 * (A + A.T), b, c


def marginalize_full(W: GaussPolyWigner, variables: Sequence[int]) -> GaussPolyWigner:
    """Integrate ``variables`` out over the whole real line, analytically."""
    variables = sorted(set(variables))
    if not variables or len(variables) >= W.dim:
        raise ValueError("marginalize a non-empty proper subset of the variables")
    if any(v < 0 or v >= W.dim for v in variables):
        raise IndexError(f"variables {variables} out of range for dim {W.dim}")
    poly, A, b, c = _integrate_out(W, variables)
    return GaussPolyWigner(poly, A, b, c, W.degree_cap)


def total_integral(W: GaussPolyWigner) -> float:
    poly, _, _, c = _integrate_out(W, range(W.dim))
    return poly.terms.get((), 0.0) * float(np.exp(c))


def overlap(W1: GaussPolyWigner, W2: GaussPolyWigner) -> float:
    """``integral W1 * W2`` over all variables (no 2 pi factor)."""
    try:
        prod = multiply(W1, W2)
    except ValueError as exc:
        if "positive definite" in str(exc):
            raise np.linalg.LinAlgError(str(exc)) from exc
        raise
    return total_integral(prod)


def evaluate(W: GaussPolyWigner, points) -> np.ndarray:
    """Evaluate at ``points`` of shape ``(..., dim)``; a single point gives a scalar."""
    pts = np.asarray(points, dtype=float)
    if pts.shape[-1] != W.dim:
        raise ValueError(f"points have {pts.shape[-1]} coordinates, expected {W.dim}")
    quad = np.einsum("...i,ij,...j->...", pts, W.A, pts)
    vals = W.poly.evaluate(pts) * np.exp(-0.5 * quad + pts @ W.b + W.c)
    return vals if vals.ndim else float(vals)


def gaussian_moments(W: GaussPolyWigner) -> Tuple[np.ndarray, np.ndarray]:
    """Mean and covariance of the Gaussian factor alone."""
    cov = np.linalg.inv(W.A)
    return cov @ W.b, cov


def gauss_legendre(order: int, lo: float, hi: float) -> Tuple[np.ndarray, np.ndarray]:
    t, w = np.polynomial.legendre.leggauss(order)
    half = 0.5 * (hi - lo)
    return lo + half * (t + 1.0), half * w


@dataclass
class WindowSlices:
    """Tensor Gauss-Legendre discretisation of ``W`` over a box in two variables.

    Integrating ``W`` over the box in ``variables`` and over anything else in
    the remaining variables amounts to a weighted sum over ``nodes``.
    """

    source: GaussPolyWigner
    variables: Tuple[int, ...]
    bounds: Tuple[Tuple[float, float], ...]
    order: int
    points: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)

    @property
    def remaining(self) -> List[int]:
        return [i for i in range(self.source.dim) if i not in self.variables]

    @cached_property
    def nodes(self) -> List[Tuple[float, Tuple[float, ...], GaussPolyWigner]]:
        return [
            (float(w), tuple(pt), fix_variables(self.source, self.variables, pt))
            for w, pt in zip(self.weights, self.points)
        ]

    @cached_property
    def _stacked(self):
        """Per-node Gaussian parameters and polynomial coefficients over the remaining variables.

        All slices share the quadratic form; only the linear term, the
        log-scale and the polynomial coefficients depend on the node.
        """
        W, fix, keep = self.source, list(self.variables), self.remaining
        pts = self.points
        A_kf = W.A[np.ix_(keep, fix)]
        A_ff = W.A[np.ix_(fix, fix)]
        B = W.b[keep][None, :] - pts @ A_kf.T
        cvec = W.c - 0.5 * np.einsum("ni,ij,nj->n", pts, A_ff, pts) + pts @ W.b[fix]
        columns = {}
        for exp, coeff in W.poly.terms.items():
            key = tuple(exp[i] for i in keep)
            val = coeff * np.prod(pts ** np.array([exp[i] for i in fix]), axis=1)
            columns[key] = columns.get(key, 0.0) + val
        exps = list(columns)
        C = np.stack([columns[e] for e in exps], axis=1) * self.weights[:, None]
        return W.A[np.ix_(keep, keep)], B, cvec, np.array(exps), C

    def weighted_evaluate(self, points, budget: int = 1 << 22) -> np.ndarray:
        """``sum_i w_i slice_i(points)`` for points over the remaining variables."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        A, B, cvec, exps, C = self._stacked
        out = np.empty(len(pts))
        chunk = max(1, budget // len(B))
        for s in range(0, len(pts), chunk):
            z = pts[s : s + chunk]
            expo = (-0.5 * np.einsum("pi,ij,pj->p", z, A, z))[:, None] + z @ B.T + cvec
            mono = np.prod(z[:, None, :] ** exps[None, :, :], axis=2)
            out[s : s + chunk] = np.sum(np.exp(expo) * (mono @ C.T), axis=1)
        return out

    def weighted_total(self) -> float:
        """``sum_i w_i total_integral(slice_i)``, via the closed-form marginal."""
        marginal = marginalize_full(self.source, self.remaining)
        return float(self.weights @ evaluate(marginal, self.points))

    def weighted_overlap(self, ref: GaussPolyWigner) -> float:
        """``sum_i w_i overlap(slice_i, ref)`` for a reference over the remaining variables."""
        rem = self.remaining
        A = self.source.A.copy()
        A[np.ix_(rem, rem)] += ref.A
        b = self.source.b.copy()
        b[rem] += ref.b
        joint = GaussPolyWigner(
            self.source.poly * ref.poly.embed(self.source.dim, rem),
            A, b, self.source.c + ref.c, self.source.degree_cap,
        )
        marginal = marginalize_full(joint, rem)
        return float(self.weights @ evaluate(marginal, self.points))


def window_reduce(
    W: GaussPolyWigner,
    variables: Sequence[int],
    Q: float,
    order: int = 32,
    bounds: Optional[Sequence[Tuple[float, float]]] = None,
) -> WindowSlices:
    """Gauss-Legendre grid over ``[-Q, Q]`` in each of ``variables``.

    ``bounds`` may narrow the box per axis (it must lie inside ``[-Q, Q]``);
    see :func:`clipped_window`.
    """
    if not Q > 0:
        raise ValueError("window half-width must be positive")
    if order < 2:
        raise ValueError("quadrature order must be at least 2")
    variables = tuple(variables)
    if bounds is None:
        bounds = [(-Q, Q)] * len(variables)
    bounds = tuple((float(lo), float(hi)) for lo, hi in bounds)
    for lo, hi in bounds:
        if lo < -Q or hi > Q or lo >= hi:
            raise ValueError(f"bounds ({lo}, {hi}) not inside [-{Q}, {Q}]")
    rules = [gauss_legendre(order, lo, hi) for lo, hi in bounds]
    grids = np.meshgrid(*[r[0] for r in rules], indexing="ij")
    wgrids = np.meshgrid(*[r[1] for r in rules], indexing="ij")
    points = np.stack([g.ravel() for g in grids], axis=-1)
    weights = np.prod(np.stack([w.ravel() for w in wgrids], axis=-1), axis=-1)
    return WindowSlices(W, variables, bounds, order, points, weights)


def clipped_window(
    W: GaussPolyWigner, variables: Sequence[int], Q: float, nsigma: float = 12.0
) -> List[Tuple[float, float]]:
    """Per-axis sub-box of ``[-Q, Q]`` outside which the Gaussian factor is negligible.

    Each axis keeps ``mean +/- nsigma * std`` of the Gaussian marginal; the
    discarded mass is below ``exp(-nsigma^2 / 2)`` times a polynomial.
    """
    mean, cov = gaussian_moments(W)
    out = []
    for v in variables:
        s = nsigma * np.sqrt(cov[v, v])
        lo, hi = max(-Q, mean[v] - s), min(Q, mean[v] + s)
        if lo >= hi:
            lo, hi = -Q, Q
        out.append((lo, hi))
    return out


def brute_force_integral(W: GaussPolyWigner, box_halfwidth: float, grid_n: int) -> float:
    """Trapezoid rule over ``[-h, h]^dim`` centred on the Gaussian mean.

    Independent of the closed-form machinery; cost grows as ``grid_n**dim``.
    """
    mean, _ = gaussian_moments(W)
    axes = [np.linspace(m - box_halfwidth, m + box_halfwidth, grid_n) for m in mean]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    vals = evaluate(W, mesh)
    for ax in reversed(axes):
        vals = np.trapezoid(vals, ax, axis=-1)
    return float(vals)
