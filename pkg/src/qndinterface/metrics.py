"""Figures of merit for the post-selected transfer."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, replace
from typing import Callable, Optional, Tuple, Union

import numpy as np

from .protocols import (
    PostSelection,
    ProbabilisticConfig,
    ProbabilisticResult,
    single_qnd_reference,
)
from .wigner_calculus import GaussPolyWigner, evaluate, overlap, single_photon_wigner

__all__ = [
    "MeritReport",
    "UnreachableTargetError",
    "fidelity",
    "negativity",
    "invert_ps",
    "merit_report",
    "single_qnd_reference",
]

Q_BRACKET = (1e-6, 20.0)
PS_RTOL = 1e-4


class UnreachableTargetError(ValueError):
    """The requested success probability lies outside the bracket of window sizes."""

    def __init__(self, target: float, ps_low: float, ps_high: float, bracket):
        self.target, self.ps_low, self.ps_high, self.bracket = target, ps_low, ps_high, bracket
        super().__init__(
            f"PS={target:g} not reachable for Q in [{bracket[0]:g}, {bracket[1]:g}]; "
            f"achievable range is [{ps_low:.6g}, {ps_high:.6g}]"
        )


@dataclass(frozen=True)
class MeritReport:
    fidelity: float
    negativity: float
    ps: float
    q_used: float

    def to_json(self) -> str:
        return json.dumps(asdict(self))

    def csv_row(self) -> str:
        return f"{self.q_used!r},{self.ps!r},{self.fidelity!r},{self.negativity!r}"


_DIRECTIONS = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])

State = Union[ProbabilisticResult, GaussPolyWigner]


def fidelity(w_out: State, w_ref: GaussPolyWigner) -> float:
    """Overlap fidelity ``2 pi * integral W_out W_ref`` with a pure single-mode reference."""
    if w_ref.dim != 2:
        raise ValueError("reference must be a single-mode Wigner function")
    if isinstance(w_out, GaussPolyWigner):
        return 2 * math.pi * overlap(w_out, w_ref)
    return 2 * math.pi * w_out.w_out.weighted_overlap(w_ref) / w_out.ps


def _as_function(w: State) -> Callable[[np.ndarray], np.ndarray]:
    if isinstance(w, GaussPolyWigner):
        return lambda pts: evaluate(w, pts)
    return lambda pts: w.evaluate(np.asarray(pts).reshape(-1, 2))


def negativity(
    w_out: State,
    extent: float = 4.0,
    grid_n: int = 81,
    tol: float = 1e-6,
) -> float:
    """Minimum of the Wigner function over the plane.

    Coarse search on ``[-extent, extent]^2`` with ``grid_n`` points per axis,
    then coordinate descent with step halving down to ``tol``, kept inside
    the search box.
    """
    f = _as_function(w_out)
    axis = np.linspace(-extent, extent, grid_n)
    grid = np.stack(np.meshgrid(axis, axis, indexing="ij"), axis=-1).reshape(-1, 2)
    vals = np.asarray(f(grid))
    k = int(np.argmin(vals))
    best, x = float(vals[k]), grid[k].copy()
    step = axis[1] - axis[0]
    while step >= tol:
        trials = np.clip(x + step * _DIRECTIONS, -extent, extent)
        tv = np.asarray(f(trials))
        j = int(np.argmin(tv))
        if tv[j] < best:
            best, x = float(tv[j]), trials[j]
        else:
            step /= 2
    return best


def invert_ps(
    target_ps: float,
    cfg: ProbabilisticConfig,
    input_L: Optional[GaussPolyWigner] = None,
    bracket: Tuple[float, float] = Q_BRACKET,
    rtol: float = PS_RTOL,
    engine: Optional[PostSelection] = None,
) -> float:
    """Window half-width ``Q`` whose success probability is ``target_ps``.

    Bisection in ``log Q`` on the monotone map ``Q -> PS(Q)``; ``cfg.q`` is
    ignored.  The input defaults to a single photon.
    """
    if engine is None:
        engine = PostSelection(input_L or single_photon_wigner(), cfg)
    lo, hi = bracket
    ps_lo, ps_hi = engine.success_probability(lo), engine.success_probability(hi)
    if not (0 < target_ps < 1) or not (ps_lo <= target_ps <= ps_hi):
        raise UnreachableTargetError(target_ps, ps_lo, ps_hi, bracket)
    a, b = math.log(lo), math.log(hi)
    for _ in range(200):
        mid = 0.5 * (a + b)
        q = math.exp(mid)
        ps = engine.success_probability(q)
        if abs(ps - target_ps) <= rtol * target_ps:
            return q
        if ps < target_ps:
            a = mid
        else:
            b = mid
    raise ArithmeticError(f"bisection for PS={target_ps} did not converge")


def merit_report(
    engine: PostSelection, q: float, w_ref: Optional[GaussPolyWigner] = None
) -> MeritReport:
    """Fidelity, negativity and PS at window half-width ``q``."""
    result = engine.run(q)
    ref = engine.input_L if w_ref is None else w_ref
    return MeritReport(fidelity(result, ref), negativity(result), result.ps, q)
