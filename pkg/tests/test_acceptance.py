"""Acceptance criteria 1-9.

Each test records a PASS/FAIL line (shown in the terminal summary) and then
asserts, so a failing criterion also fails the suite.
"""

import numpy as np
import pytest

from oracle import PipelineOracle
from qndinterface.metrics import fidelity, invert_ps, merit_report, negativity
from qndinterface.phase_space import (
    balanced_bs_gate,
    joint_qnd_gate,
    qnd_gate,
    squeeze_gate,
    symplectic_residual,
)
from qndinterface.polynomial import Poly, monomials
from qndinterface.protocols import (
    JointConfig,
    PostSelection,
    ProbabilisticConfig,
    SequentialConfig,
    deterministic_joint_map,
    deterministic_sequential_map,
    joint_chain,
    sequential_chain,
    single_qnd_reference,
)
from qndinterface.wigner_calculus import (
    GaussPolyWigner,
    brute_force_integral,
    marginalize_full,
    substitute_linear,
    total_integral,
)

INV_PI = 1 / np.pi


def test_criterion_1_sequential_identity(rng, acceptance):
    worst = max(
        deterministic_sequential_map(SequentialConfig(k1, k2)).transfer_residual("L")
        for k1, k2 in rng.uniform(0.05, 1.0, size=(100, 2))
    )
    assert acceptance(1, worst < 1e-12, f"max off-selector coefficient {worst:.2e} (< 1e-12)")


def test_criterion_2_joint_identity(rng, acceptance):
    worst = max(
        deterministic_joint_map(JointConfig(k)).transfer_residual("L")
        for k in rng.uniform(0.05, 1.0, size=100)
    )
    assert acceptance(2, worst < 1e-12, f"max off-selector coefficient {worst:.2e} (< 1e-12)")


def test_criterion_3_symplectic(rng, acceptance):
    worst = 0.0
    for k1, k2 in rng.uniform(0.05, 1.0, size=(100, 2)):
        mats = [
            qnd_gate("A", "L", k1),
            qnd_gate("A", "M", k1),
            qnd_gate("L", "A", k2),
            qnd_gate("M", "L", 1 / (k1 * k2)),
            joint_qnd_gate(k1),
            squeeze_gate("L", k2),
            squeeze_gate("M", np.sqrt(2) / k1),
            balanced_bs_gate("M", "L"),
            sequential_chain(SequentialConfig(k1, k2)),
            joint_chain(JointConfig(k1)),
        ]
        worst = max(worst, max(symplectic_residual(S) for S in mats))
    assert acceptance(3, worst < 1e-12, f"max |S Omega S^T - Omega| {worst:.2e} (< 1e-12)")


def test_criterion_4_small_window_limit(photon, fig3_engines, acceptance):
    res = fig3_engines[0.5].run(1e-3)
    f, n = fidelity(res, photon), negativity(res)
    ok = f >= 0.999 and abs(n + INV_PI) <= 1e-3
    assert acceptance(4, ok, f"F = {f:.6f} (>= 0.999), N = {n:.6f} (-1/pi +- 1e-3)")


def test_criterion_5_fig3(photon, fig3_engines, acceptance):
    parts, ok = [], True
    for k, eng in fig3_engines.items():
        q = invert_ps(0.01, eng.config, engine=eng)
        rep = merit_report(eng, q, photon)
        good = (
            abs(rep.ps / 0.01 - 1) <= 0.05
            and 0.85 <= rep.fidelity <= 0.95
            and -0.35 <= rep.negativity <= -0.25
        )
        ok &= good
        parts.append(f"kappa={k}: Q={q:.4f} PS={rep.ps:.4g} F={rep.fidelity:.4f} N={rep.negativity:.4f}")
    assert acceptance(5, ok, "; ".join(parts))


def _random_instance(rng):
    dim = int(rng.integers(2, 4))
    Q, _ = np.linalg.qr(rng.normal(size=(dim, dim)))
    A = Q @ np.diag(rng.uniform(0.7, 2.0, size=dim)) @ Q.T
    exps = monomials(dim, 4)[1:]
    pick = rng.choice(len(exps), size=4, replace=False)
    terms = {exps[i]: 0.4 * rng.normal() for i in pick}
    terms[(0,) * dim] = 1.0
    W = GaussPolyWigner(Poly(dim, terms), A, rng.normal(scale=0.4, size=dim), rng.normal(scale=0.3))
    # push through a random shear so substitution is exercised too
    T = np.eye(dim) + np.triu(rng.normal(scale=0.3, size=(dim, dim)), 1)
    return substitute_linear(W, T)


def test_criterion_6_oracle(rng, photon, acceptance):
    worst_inst = 0.0
    for _ in range(50):
        W = _random_instance(rng)
        engine = total_integral(marginalize_full(W, [0])) if W.dim > 1 else total_integral(W)
        grid = brute_force_integral(W, 12.0, 81 if W.dim == 3 else 241)
        worst_inst = max(worst_inst, abs(engine - grid) / abs(grid))

    worst_ps, worst_w = 0.0, 0.0
    points = rng.uniform(-2.0, 2.0, size=(10, 2))
    for k, q in ((0.3, 0.1), (0.5, 0.15), (0.5, 1.0)):
        cfg = ProbabilisticConfig.symmetric(k, v_m=0.5, v_a=5.0)
        res = PostSelection(photon, cfg).run(q)
        oracle = PipelineOracle(photon, sequential_chain(cfg.sequential), 0.5, 5.0, q, n_open=161)
        ps_ref = oracle.success_probability()
        worst_ps = max(worst_ps, abs(res.ps - ps_ref) / ps_ref)
        ref = np.array([oracle.unnormalised_output(x, p) for x, p in points]) / ps_ref
        worst_w = max(worst_w, float(np.max(np.abs(res(points) - ref))))

    ok = worst_inst <= 1e-4 and worst_ps <= 1e-4 and worst_w <= 1e-4
    assert acceptance(
        6,
        ok,
        f"instances rel {worst_inst:.1e}, pipeline PS rel {worst_ps:.1e}, W_out abs {worst_w:.1e} (<= 1e-4)",
    )


def test_criterion_7_ps(fig3_engines, acceptance):
    eng = fig3_engines[0.5]
    qs = np.geomspace(1e-3, 20.0, 20)
    ps = np.array([eng.success_probability(q) for q in qs])
    increasing = bool(np.all(np.diff(ps) > 0))
    sat = ps[-1]
    ratio = (eng.success_probability(1e-3) / 1e-6) / (eng.success_probability(5e-4) / 2.5e-7)
    ok = increasing and abs(sat - 1) <= 1e-4 and abs(ratio - 1) <= 0.02
    assert acceptance(
        7, ok, f"increasing={increasing}, PS(20)={sat:.8f}, PS/Q^2 ratio {ratio:.5f}"
    )


def _fidelity_at(photon, ps, kappa=0.5, v_a=5.0):
    eng = PostSelection(photon, ProbabilisticConfig.symmetric(kappa, v_m=0.5, v_a=v_a))
    return fidelity(eng.run(invert_ps(ps, eng.config, engine=eng)), photon)


def test_criterion_8_trends(photon, acceptance):
    kappas = np.round(np.arange(1, 11) / 10, 1)
    noises = np.arange(1, 11, dtype=float)
    f_kappa = [_fidelity_at(photon, 1e-4, kappa=k) for k in kappas]
    f_noise = [_fidelity_at(photon, 1e-4, v_a=v) for v in noises]
    f_trend = [_fidelity_at(photon, 1e-2, v_a=v) for v in noises]
    decreasing = all(b <= a + 1e-3 for a, b in zip(f_trend, f_trend[1:]))
    ok = min(f_kappa) >= 0.95 and min(f_noise) >= 0.95 and decreasing
    assert acceptance(
        8,
        ok,
        f"min F(kappa)={min(f_kappa):.4f}, min F(V_A)={min(f_noise):.4f} at PS=1e-4; "
        f"F(V_A) at PS=1e-2 from {f_trend[0]:.4f} to {f_trend[-1]:.4f}, weakly decreasing={decreasing}",
    )


def test_criterion_9_reference(acceptance):
    eta, eta_p = single_qnd_reference(1.0)
    assert acceptance(9, eta == 0.5 and eta_p == 0.25, f"eta(1)={eta}, eta'(1)={eta_p}")
