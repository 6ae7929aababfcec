"""Transfer protocols assembled from the elementary gates.

Three pipelines are provided:

* sequential QND couplings with feed-forward (deterministic),
* the joint (parallel) QND coupling with feed-forward (deterministic),
* the sequential chain with homodyne post-selection instead of
  feed-forward (probabilistic), evaluated on Wigner functions.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Tuple

import numpy as np

from . import phase_space as ps_
from .phase_space import ConditionalAffineMap
from .wigner_calculus import (
    GaussPolyWigner,
    WindowSlices,
    clipped_window,
    marginalize_full,
    product_embed,
    substitute_linear,
    thermal_wigner,
    total_integral,
    window_reduce,
    evaluate,
)

X_L, P_L, X_M, P_M, X_A, P_A = range(6)

# Quadratures read out by the homodyne detectors, in feed-forward order (x gain, p gain).
SEQUENTIAL_MEASURED = ("x_M", "p_L")
JOINT_MEASURED = ("x_L", "p_M")

MAX_QUAD_ORDER = 256
CONVERGENCE_RTOL = 1e-8
PS_UNDERFLOW = 1e-300


class ZeroSuccessError(ArithmeticError):
    """Post-selection probability underflowed."""


@dataclass(frozen=True)
class SequentialConfig:
    """Gains of the sequential scheme; ``None`` fields take their ideal values.

    Ideal values: ``kappa3 = kappa3_sign / (kappa1 kappa2)``, ``g = kappa2``,
    ``gamma_x = -1/kappa1``, ``gamma_p = 1/kappa2``.
    """

    kappa1: float
    kappa2: float
    kappa3: Optional[float] = None
    g: Optional[float] = None
    gamma_x: Optional[float] = None
    gamma_p: Optional[float] = None
    kappa3_sign: int = 1

    def __post_init__(self):
        for name in ("kappa1", "kappa2"):
            v = getattr(self, name)
            if not np.isfinite(v) or v == 0:
                raise ValueError(f"{name} must be finite and nonzero, got {v}")
        if self.kappa3_sign not in (1, -1):
            raise ValueError("kappa3_sign must be +1 or -1")
        k1, k2 = self.kappa1, self.kappa2
        defaults = {
            "kappa3": self.kappa3_sign / (k1 * k2),
            "g": k2,
            "gamma_x": -1.0 / k1,
            "gamma_p": 1.0 / k2,
        }
        for name, value in defaults.items():
            if getattr(self, name) is None:
                object.__setattr__(self, name, value)

    @property
    def is_ideal(self) -> bool:
        k1, k2 = self.kappa1, self.kappa2
        return bool(
            np.isclose(self.g, k2, rtol=1e-12, atol=0)
            and np.isclose(self.kappa3, 1.0 / (k1 * k2), rtol=1e-12, atol=0)
            and np.isclose(self.gamma_x, -1.0 / k1, rtol=1e-12, atol=0)
            and np.isclose(self.gamma_p, 1.0 / k2, rtol=1e-12, atol=0)
        )


@dataclass(frozen=True)
class JointConfig:
    """Gains of the joint scheme; ideal ``g = sqrt2/kappa``, ``gamma_x = -gamma_p = -1/kappa``."""

    kappa: float
    g: Optional[float] = None
    gamma_x: Optional[float] = None
    gamma_p: Optional[float] = None
    preprocess: bool = True

    def __post_init__(self):
        if not np.isfinite(self.kappa) or self.kappa == 0:
            raise ValueError(f"kappa must be finite and nonzero, got {self.kappa}")
        defaults = {
            "g": np.sqrt(2.0) / self.kappa,
            "gamma_x": -1.0 / self.kappa,
            "gamma_p": 1.0 / self.kappa,
        }
        for name, value in defaults.items():
            if getattr(self, name) is None:
                object.__setattr__(self, name, value)


def sequential_chain(cfg: SequentialConfig) -> np.ndarray:
    """Forward Heisenberg map: squeeze L, QND3 (M->L), QND1 (A->M), QND2 (L->A)."""
    return ps_.compose(
        [
            ps_.squeeze_gate("L", cfg.g),
            ps_.qnd_gate("M", "L", cfg.kappa3),  # H3 = chi3 x_M p_L
            ps_.qnd_gate("A", "M", cfg.kappa1),  # H1 = chi1 x_A p_M
            ps_.qnd_gate("L", "A", cfg.kappa2),  # H2 = chi2 x_L p_A
        ]
    )


def joint_chain(cfg: JointConfig) -> np.ndarray:
    """Forward map of the joint scheme.

    Pre-processing is a balanced beam splitter on (M, L) followed by a pair of
    orthogonally oriented squeezers of gain ``g`` (M squeezed in p, L in x).
    """
    gates = []
    if cfg.preprocess:
        gates += [
            ps_.balanced_bs_gate("M", "L"),
            ps_.squeeze_gate("M", 1.0 / cfg.g),
            ps_.squeeze_gate("L", cfg.g),
        ]
    gates.append(ps_.joint_qnd_gate(cfg.kappa))
    return ps_.compose(gates)


def deterministic_sequential_map(cfg: SequentialConfig) -> ConditionalAffineMap:
    return ps_.conditional_map(
        sequential_chain(cfg), SEQUENTIAL_MEASURED, (cfg.gamma_x, cfg.gamma_p)
    )


def deterministic_joint_map(cfg: JointConfig) -> ConditionalAffineMap:
    """Joint scheme with feed-forward from the ``x'_L`` and ``p'_M`` readouts."""
    return ps_.conditional_map(
        joint_chain(cfg), JOINT_MEASURED, (cfg.gamma_x, cfg.gamma_p)
    )


def paper_matrix_residual(cfg: SequentialConfig) -> float:
    """Distance between the published variable map and the composed pullback.

    The printed matrix equals the inverse of :func:`sequential_chain` for the
    ideal gains, up to a sign flip of both output ``L`` quadratures.  That flip
    leaves the post-selected output unchanged (``x_L`` is integrated over the
    line and ``p_L`` over a symmetric window).
    """
    flip = np.diag([-1.0, -1.0, 1.0, 1.0, 1.0, 1.0])
    pull = flip @ ps_.symplectic_inverse(sequential_chain(cfg))
    ref = ps_.paper_matrix_u(cfg.kappa1, cfg.kappa2)
    return float(np.max(np.abs(pull - ref)) / max(1.0, np.max(np.abs(ref))))


def single_qnd_reference(kappa: float) -> Tuple[float, float]:
    """Transmissions of the single-QND transfer and of its squeezing-compensated variant."""
    if not np.isfinite(kappa):
        raise ValueError("kappa must be finite")
    k2 = kappa * kappa
    return k2 / (1 + k2), k2 / (1 + k2) ** 2


@dataclass(frozen=True)
class ProbabilisticConfig:
    sequential: SequentialConfig
    v_m: float = 0.5
    v_a: float = 5.0
    q: float = 0.1
    quad_order: int = 32

    def __post_init__(self):
        if not self.q > 0:
            raise ValueError(f"window half-width must be positive, got {self.q}")
        for name in ("v_m", "v_a"):
            if not getattr(self, name) >= 0.5:
                raise ValueError(f"{name} must be >= 1/2 (vacuum), got {getattr(self, name)}")
        if self.quad_order < 2:
            raise ValueError("quad_order must be at least 2")

    @classmethod
    def symmetric(cls, kappa: float, **kwargs) -> "ProbabilisticConfig":
        """``kappa1 = kappa2 = kappa`` with ideal pre-processing."""
        return cls(SequentialConfig(kappa, kappa), **kwargs)


@dataclass(frozen=True)
class ProbabilisticResult:
    """Post-selected matter-mode state.

    ``w_out`` holds the unnormalised output as weighted slices over
    ``(x_A, p_A)``; ``ps`` is its total weight.
    """

    w_out: WindowSlices = field(repr=False)
    ps: float
    q: float
    order: int
    config: ProbabilisticConfig = field(repr=False)

    def evaluate(self, points) -> np.ndarray:
        """Normalised ``W_out`` at ``points`` of shape ``(n, 2)`` or ``(2,)``."""
        pts = np.asarray(points, dtype=float)
        vals = self.w_out.weighted_evaluate(pts.reshape(-1, 2)) / self.ps
        return vals.reshape(pts.shape[:-1]) if pts.ndim > 1 else float(vals[0])

    __call__ = evaluate


class PostSelection:
    """Precomputed post-selection pipeline for one input state and configuration.

    The output-variable Wigner function ``W_in(S^-1 xi)`` is integrated over
    ``x_L`` and ``p_M`` once; only the window over ``(p_L, x_M)`` depends on
    ``Q``.  ``cfg.q`` is ignored here; pass ``q`` per call.
    """

    # reduced variables after the full-line integration
    WINDOW = (0, 1)  # p_L, x_M
    KEPT = (2, 3)  # x_A, p_A

    def __init__(self, input_L: GaussPolyWigner, cfg: ProbabilisticConfig):
        if input_L.dim != 2:
            raise ValueError("input state must be single-mode")
        norm = total_integral(input_L)
        if abs(norm - 1.0) > 1e-8:
            raise ValueError(f"input state is not normalised (integral {norm})")
        self.input_L = input_L
        self.config = cfg
        forward = sequential_chain(cfg.sequential)
        if cfg.sequential.is_ideal:
            resid = paper_matrix_residual(cfg.sequential)
            if resid > 1e-12:
                raise RuntimeError(f"composed chain disagrees with the published map ({resid:.3g})")
        self.pullback = ps_.symplectic_inverse(forward)
        w_in = product_embed(
            [
                (input_L, (X_L, P_L)),
                (thermal_wigner(cfg.v_m), (X_M, P_M)),
                (thermal_wigner(cfg.v_a), (X_A, P_A)),
            ]
        )
        w_out = substitute_linear(w_in, self.pullback)
        self.joint = marginalize_full(w_out, [X_L, P_M])
        self.measured = marginalize_full(self.joint, list(self.KEPT))

    def _ps_at(self, q: float, order: int) -> float:
        bounds = clipped_window(self.measured, (0, 1), q)
        rules = [np.polynomial.legendre.leggauss(order) for _ in bounds]
        axes, wts = [], []
        for (lo, hi), (t, w) in zip(bounds, rules):
            half = 0.5 * (hi - lo)
            axes.append(lo + half * (t + 1.0))
            wts.append(half * w)
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
        return float(np.einsum("i,j,ij->", wts[0], wts[1], evaluate(self.measured, grid)))

    def converged_order(self, q: float) -> int:
        """Smallest doubling of ``quad_order`` whose PS agrees with the next doubling."""
        order = self.config.quad_order
        while True:
            a, b = self._ps_at(q, order), self._ps_at(q, 2 * order)
            if abs(a - b) <= CONVERGENCE_RTOL * abs(b) or 2 * order > MAX_QUAD_ORDER:
                return order
            order *= 2

    def success_probability(self, q: float, order: Optional[int] = None) -> float:
        if not q > 0:
            raise ValueError("window half-width must be positive")
        order = self.converged_order(q) if order is None else order
        return self._ps_at(q, order)

    def run(self, q: Optional[float] = None, order: Optional[int] = None) -> ProbabilisticResult:
        q = self.config.q if q is None else q
        if not q > 0:
            raise ValueError("window half-width must be positive")
        order = self.converged_order(q) if order is None else order
        bounds = clipped_window(self.joint, self.WINDOW, q)
        slices = window_reduce(self.joint, self.WINDOW, q, order, bounds=bounds)
        ps = slices.weighted_total()
        if not ps > PS_UNDERFLOW:
            raise ZeroSuccessError(f"success probability underflow ({ps:.3g}) at Q={q}")
        return ProbabilisticResult(slices, ps, q, order, replace(self.config, q=q))


def probabilistic_output(
    input_L: GaussPolyWigner, cfg: ProbabilisticConfig
) -> ProbabilisticResult:
    """Post-selected output of the sequential chain for window half-width ``cfg.q``."""
    return PostSelection(input_L, cfg).run(cfg.q)
