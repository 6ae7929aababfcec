"""Symplectic gates on the three-mode quadrature vector.

Every matrix in this package acts on the ordered vector

    (x_L, p_L, x_M, p_M, x_A, p_A)

where ``L`` and ``M`` are light modes and ``A`` is the matter mode.  A gate
``S`` is the Heisenberg-picture map: the output quadrature operators are
``S @ xi`` in terms of the input ones.  Composition follows temporal order,
``compose([S1, S2]) == S2 @ S1``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import reduce
from typing import Iterable, Sequence, Tuple

import numpy as np

MODES = ("L", "M", "A")
ORDERING = ("x_L", "p_L", "x_M", "p_M", "x_A", "p_A")
DIM = len(ORDERING)
SYMPLECTIC_ATOL = 1e-12

OMEGA = np.kron(np.eye(3), np.array([[0.0, 1.0], [-1.0, 0.0]]))
OMEGA.setflags(write=False)
_OMEGA_1 = np.array([[0.0, 1.0], [-1.0, 0.0]])


@dataclass(frozen=True)
class QuadratureIndex:
    mode: str
    quadrature: str

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        if self.quadrature not in ("x", "p"):
            raise ValueError(f"unknown quadrature {self.quadrature!r}")

    @classmethod
    def parse(cls, label: "str | QuadratureIndex") -> "QuadratureIndex":
        """Accept labels such as ``"x_M"`` or ``"pL"``."""
        if isinstance(label, QuadratureIndex):
            return label
        text = label.replace("_", "")
        if len(text) != 2:
            raise ValueError(f"cannot parse quadrature label {label!r}")
        return cls(mode=text[1], quadrature=text[0])

    @property
    def index(self) -> int:
        return 2 * MODES.index(self.mode) + (0 if self.quadrature == "x" else 1)

    def __str__(self) -> str:
        return f"{self.quadrature}_{self.mode}"


def _mode_slot(mode: str) -> int:
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")
    return 2 * MODES.index(mode)


def _frozen(matrix: np.ndarray) -> np.ndarray:
    matrix.setflags(write=False)
    return matrix


def _check_finite(*values: float) -> None:
    for v in values:
        if not np.isfinite(v):
            raise ValueError(f"gain must be finite, got {v!r}")


def identity() -> np.ndarray:
    return _frozen(np.eye(DIM))


def symplectic_residual(S: np.ndarray) -> float:
    """Max-abs entry of ``S Omega S^T - Omega``."""
    S = np.asarray(S, dtype=float)
    return float(np.max(np.abs(S @ OMEGA @ S.T - OMEGA)))


def is_symplectic(S: np.ndarray, atol: float = SYMPLECTIC_ATOL) -> bool:
    return symplectic_residual(S) <= atol


def qnd_gate(ctl: str, tgt: str, kappa: float) -> np.ndarray:
    """QND coupling generated by ``H = chi * x_ctl * p_tgt`` with gain ``kappa``.

    Heisenberg action: ``x_tgt -> x_tgt + kappa * x_ctl`` and
    ``p_ctl -> p_ctl - kappa * p_tgt``; the other quadratures are untouched.
    For ``ctl="A", tgt="L"`` this is the basic light-matter coupling
    ``x_L += kappa x_A, p_A -= kappa p_L``.
    """
    _check_finite(kappa)
    c, t = _mode_slot(ctl), _mode_slot(tgt)
    if c == t:
        raise ValueError("QND gate needs two distinct modes")
    S = np.eye(DIM)
    S[t, c] = kappa
    S[c + 1, t + 1] = -kappa
    return _frozen(S)


def joint_qnd_gate(kappa: float) -> np.ndarray:
    """Simultaneous coupling ``H = chi (x_A p_L + p_A x_M)`` of both light modes to ``A``."""
    _check_finite(kappa)
    xL, pL, xM, pM, xA, pA = range(DIM)
    S = np.eye(DIM)
    S[xA, xM] = kappa
    S[pA, pL] = -kappa
    S[xL, xA] = kappa
    S[xL, xM] = kappa**2 / 2
    S[pM, pA] = -kappa
    S[pM, pL] = kappa**2 / 2
    return _frozen(S)


def squeeze_gate(mode: str, g: float) -> np.ndarray:
    """Single-mode squeezer: ``x -> x / g``, ``p -> g p``."""
    _check_finite(g)
    if g == 0:
        raise ValueError("squeezing gain must be nonzero")
    i = _mode_slot(mode)
    S = np.eye(DIM)
    S[i, i] = 1.0 / g
    S[i + 1, i + 1] = g
    return _frozen(S)


def balanced_bs_gate(mode1: str, mode2: str) -> np.ndarray:
    """Balanced beam splitter ``(q1, q2) -> ((q1 + q2)/sqrt2, (q1 - q2)/sqrt2)`` for q in {x, p}.

    With this (reflection) convention the gate is an involution: applying it
    twice gives the identity.
    """
    i, j = _mode_slot(mode1), _mode_slot(mode2)
    if i == j:
        raise ValueError("beam splitter needs two distinct modes")
    r = 1.0 / np.sqrt(2.0)
    S = np.eye(DIM)
    for q in (0, 1):
        a, b = i + q, j + q
        S[a, a], S[a, b] = r, r
        S[b, a], S[b, b] = r, -r
    return _frozen(S)


def symplectic_inverse(S: np.ndarray) -> np.ndarray:
    """Exact inverse of a symplectic matrix, ``-Omega S^T Omega``."""
    S = np.asarray(S, dtype=float)
    return _frozen(-OMEGA @ S.T @ OMEGA)


def compose(gates: Iterable[np.ndarray]) -> np.ndarray:
    """Chain gates in temporal order (first element acts first)."""
    gates = [np.asarray(g, dtype=float) for g in gates]
    for g in gates:
        if g.shape != (DIM, DIM):
            raise ValueError(f"expected a {DIM}x{DIM} matrix, got shape {g.shape}")
    return _frozen(reduce(lambda acc, g: g @ acc, gates, np.eye(DIM)))


@dataclass(frozen=True)
class ConditionalAffineMap:
    """Output quadratures of mode ``A`` as linear forms of the six input quadratures.

    Row 0 is ``x_A_out``, row 1 is ``p_A_out``; no offset term.
    """

    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        if m.shape != (2, DIM):
            raise ValueError(f"expected a 2x{DIM} matrix, got shape {m.shape}")
        object.__setattr__(self, "matrix", _frozen(m))

    def commutator_residual(self) -> float:
        """Deviation of ``M Omega M^T`` from the single-mode form."""
        return float(np.max(np.abs(self.matrix @ OMEGA @ self.matrix.T - _OMEGA_1)))

    def transfer_residual(self, source: str = "L") -> float:
        """Max deviation from the ideal map ``(x_out, p_out) = (x_source, p_source)``."""
        ideal = np.zeros((2, DIM))
        s = _mode_slot(source)
        ideal[0, s] = ideal[1, s + 1] = 1.0
        return float(np.max(np.abs(self.matrix - ideal)))

    def coefficient(self, out: str, inp: str) -> float:
        """Coefficient of input quadrature ``inp`` in output ``"x"`` or ``"p"``."""
        row = {"x": 0, "p": 1}[out]
        return float(self.matrix[row, QuadratureIndex.parse(inp).index])


def conditional_map(
    U: np.ndarray,
    measured: Sequence["str | QuadratureIndex"],
    gains: Tuple[float, float],
) -> ConditionalAffineMap:
    """Matter-mode output after homodyne readout and displacement feed-forward.

    ``x_A_out = x'_A + gains[0] * m0'`` and ``p_A_out = p'_A + gains[1] * m1'``
    where ``m0, m1 = measured`` and primes denote rows of ``U``.
    """
    if len(measured) != 2 or len(gains) != 2:
        raise ValueError("need exactly two measured quadratures and two gains")
    m0, m1 = (QuadratureIndex.parse(m) for m in measured)
    if "A" in (m0.mode, m1.mode):
        raise ValueError("the matter mode A cannot be measured")
    if {m0.mode, m1.mode} != {"L", "M"}:
        raise ValueError("measure one quadrature of L and one of M")
    U = np.asarray(U, dtype=float)
    xA, pA = QuadratureIndex("A", "x").index, QuadratureIndex("A", "p").index
    rows = np.vstack(
        [U[xA] + gains[0] * U[m0.index], U[pA] + gains[1] * U[m1.index]]
    )
    return ConditionalAffineMap(rows)


def paper_matrix_u(kappa1: float, kappa2: float) -> np.ndarray:
    """Literal published variable map of the sequential chain (with kappa3 = -1/(kappa1 kappa2)).

    Kept as a cross-check fixture; the protocols build their matrices with
    :func:`compose`.
    """
    _check_finite(kappa1, kappa2)
    if kappa1 == 0 or kappa2 == 0:
        raise ValueError("kappa1 and kappa2 must be nonzero")
    k1, k2 = kappa1, kappa2
    U = np.array(
        [
            [0, 0, 1 / k1, 0, -1, 0],
            [0, -1 / k2, 0, 0, 0, -1],
            [k1 * k2, 0, 1, 0, -k1, 0],
            [0, 1 / (k1 * k2), 0, 1, 0, 1 / k1],
            [-k2, 0, 0, 0, 1, 0],
            [0, 0, 0, k1, 0, 1],
        ],
        dtype=float,
    )
    return _frozen(U)


def matrix_to_json(S: np.ndarray) -> str:
    S = np.asarray(S, dtype=float)
    return json.dumps(
        {"ordering": list(ORDERING), "shape": list(S.shape), "data": S.ravel().tolist()}
    )


def matrix_from_json(text: str) -> np.ndarray:
    obj = json.loads(text)
    if list(obj["ordering"]) != list(ORDERING):
        raise ValueError(f"unsupported quadrature ordering {obj['ordering']}")
    shape = tuple(obj.get("shape", (DIM, DIM)))
    return _frozen(np.array(obj["data"], dtype=float).reshape(shape))
