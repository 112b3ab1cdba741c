import math

import numpy as np
import pytest

import nsoc


def test_scalar_kernel_matches_closed_form():
    assert nsoc.phi(-4.0, 0.5) == pytest.approx(-2.0)
    assert nsoc.potential(4.0, 0.5) == pytest.approx(4.0 ** 1.5 / 1.5)
    x = nsoc.prox_potential(3.0, 0.7, 0.5)
    assert x + 0.7 * math.sqrt(x) == pytest.approx(3.0, abs=1e-12)
    assert nsoc.prox_potential(0.0, 1.0, 0.5) == 0.0
    assert np.allclose(nsoc.phi(np.array([-1.0, 0.0, 1.0]), 0.25), [-1.0, 0.0, 1.0])


def test_expansion_residuals_small():
    r = nsoc.expansion_residuals(0.3, 0.2, -0.7, 0.5)
    assert max(abs(v) for v in r) < 1e-8


def test_zero_control_gives_zero_state():
    d = nsoc.Discretization(1, 32)
    sol = nsoc.solve_state(d, 0.5, np.zeros(d.size))
    assert np.all(sol["y"] == 0.0)


def test_state_solvers_agree_and_residual_small():
    d = nsoc.Discretization(2, 10)
    u = 5.0 * np.sin(np.pi * d.coords[:, 0]) * np.sin(np.pi * d.coords[:, 1]) - 1.0
    a = nsoc.solve_state(d, 0.5, u, tol=1e-11)
    b = nsoc.solve_state(d, 0.5, u, tol=1e-11, method="coord_descent")
    assert np.max(np.abs(a["y"] - b["y"])) < 1e-8
    assert nsoc.pde_residual(d, 0.5, a["y"], u) < 1e-10


def test_stability_in_dual_norm():
    d = nsoc.Discretization(1, 64)
    rng = np.random.default_rng(3)
    u1, u2 = rng.normal(size=d.size), rng.normal(size=d.size)
    y1 = nsoc.solve_state(d, 0.25, u1, tol=1e-11)["y"]
    y2 = nsoc.solve_state(d, 0.25, u2, tol=1e-11)["y"]
    assert d.h01_norm(y1 - y2) <= (1 + 1e-8) * d.hminus1_norm(u1 - u2)


def test_wrong_length_rejected():
    d = nsoc.Discretization(1, 16)
    with pytest.raises(ValueError):
        nsoc.solve_state(d, 0.5, np.zeros(3))


def test_adjoint_identity():
    d = nsoc.Discretization(1, 64)
    u = 10.0 + np.sin(2 * np.pi * d.coords[:, 0])
    y = nsoc.solve_state(d, 0.5, u, tol=1e-12)["y"]
    target = np.zeros(d.size)
    rg = nsoc.reduced_gradient(d, 0.5, target, 1e-2, u)
    h = np.cos(np.pi * d.coords[:, 0])
    delta = nsoc.apply_S_prime(d, 0.5, y, h)
    lhs = d.l2_inner(y - target, delta)
    rhs = d.l2_inner(rg["p"], h)
    assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(lhs))


def test_optimizer_reaches_kkt_point():
    d = nsoc.Discretization(1, 32)
    _, target = nsoc.manufactured_instance(d, "sine", 0.5)
    out = nsoc.optimize(d, 0.5, target, 1e-2, np.ones(d.size), lower=0.0, upper=2.0, tol=1e-8)
    assert out["converged"]
    assert out["kkt_residual"] <= 1e-8
    assert np.all((out["u"] >= 0.0) & (out["u"] <= 2.0))
    assert out["bouligand_gap"] >= -1e-8


def test_exponent_tables():
    primal, dual = nsoc.embedding_exponents(3)
    assert primal[2] == pytest.approx(6.0) and primal[3]
    assert dual[0] == pytest.approx(1.2)
    lo, lo_closed, hi, _ = nsoc.admissible_adjoint_exponents(math.inf, 1)
    assert hi == math.inf


def test_experiment_runs_and_writes(tmp_path):
    code, report, _ = nsoc.run_experiment("solve", {"n": "16", "control": "constant:1"}, str(tmp_path))
    assert code == 0
    assert report["status"] == "ok"
    assert (tmp_path / "state.csv").exists()
    code, _, _ = nsoc.run_experiment("solve", {"n": "-1"}, str(tmp_path / "bad"))
    assert code == 2
