"""One test per acceptance criterion; each prints a PASS/FAIL line with its measured values."""

import time

import numpy as np

from helpers import overlap, random_ld_model, random_normal_traceless, random_pure

from fbdd.conditions import brute_force_mixing, check_mixing, solve_qubit_feedback
from fbdd.cxmat import dag, eig, expm, fro, hs_inner, random_hermitian, random_unitary
from fbdd.decoupling import evolve_cycle, max_dd, sel_dd, sequence_by_name
from fbdd.estimate import EstimationState, tune
from fbdd.feedback import (
    FeedbackCycleSpec, def_spec, fdd_repeated, fdd_spec, fed_spec, fdd_cycle, outcome_probability,
    sample_records, system_state,
)
from fbdd.fidelity import channel_from_unitary, entanglement_fidelity, unitary_fidelity
from fbdd.magnus import effective_hamiltonian, first_order_correction, toggled_sequence
from fbdd.model import QubitErrorModel, make_model, propagator
from fbdd.pauli import I2, SX, SY, SZ
from fbdd.protocols import ProtocolRun, run


def _slope(x, y):
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def verdict(label, ok, detail, elapsed, limit):
    ok = bool(ok) and elapsed < limit
    print(f"[{'PASS' if ok else 'FAIL'}] {label}: {detail}; runtime {elapsed:.2f}s (limit {limit}s)")
    return ok


def test_free_evolution_fidelity():
    start = time.perf_counter()
    res = run(ProtocolRun.over("free", QubitErrorModel(), 0.01, 20.0))
    err = float(np.max(np.abs(res.fidelities - np.cos(res.times) ** 2)))
    assert verdict("free evolution F = cos^2(t)", err <= 1e-9, f"max error {err:.2e}",
                   time.perf_counter() - start, 1)


def test_mixing_matches_exhaustive_search():
    rng = np.random.default_rng(101)
    start = time.perf_counter()
    agree, total, worst = 0, 0, 0.0
    for k in range(1200):
        n = 2 + k % 5
        x = random_normal_traceless(rng, n, symmetric=bool(k % 2))
        rep = check_mixing(x)
        total += 1
        agree += rep.satisfied == brute_force_mixing(eig(x)[0])
        if rep.satisfied:
            worst = max(worst, fro(x + dag(rep.solution_u) @ x @ rep.solution_u) / fro(x))
    ok = agree == total and worst <= 1e-9
    assert verdict("mixing condition vs brute force", ok,
                   f"{agree}/{total} agree, worst relative residual {worst:.2e}",
                   time.perf_counter() - start, 30)


def test_qubit_feedback_restores_state():
    rng = np.random.default_rng(202)
    start = time.perf_counter()
    worst, failures = 1.0, 0
    count = 120
    for k in range(count):
        d_e = 2 + k % 3
        m = random_ld_model(rng, 2, d_e)
        t = float(rng.uniform(0.1, 20.0))
        sol = solve_qubit_feedback(propagator(m, t), d_e)
        if not sol.ok:
            failures += 1
            continue
        psi = random_pure(rng)
        for b in fdd_cycle(m, FeedbackCycleSpec(sol.u_s, sol.u_fb, t), rho_s=np.outer(psi, psi.conj())):
            if b.probability > 1e-12:
                worst = min(worst, overlap(system_state(b, m), psi))
    ok = failures == 0 and worst >= 1 - 1e-8
    assert verdict("constructed one-bit feedback restores the system", ok,
                   f"{count} propagators, {failures} construction failures, worst fidelity 1 - {1 - worst:.2e}",
                   time.perf_counter() - start, 60)


def test_zeno_limit():
    rng = np.random.default_rng(303)
    start = time.perf_counter()
    m = make_model(0 * SZ, np.diag([0.2, -0.3]).astype(complex), [(SZ, random_hermitian(2, rng))])
    ns = np.array([10, 30, 100, 300, 1000])
    dev = [1 - fdd_repeated(m, fdd_spec(2.0 / n, u_s=SX), int(n)).joint_probability for n in ns]
    slope = _slope(ns, dev)
    assert verdict("Zeno limit of the all-zero record", abs(slope + 1) <= 0.15,
                   f"log-log slope {slope:.3f}, deviation at N=1000 {dev[-1]:.2e}",
                   time.perf_counter() - start, 30)


def test_magnus_consistency():
    rng = np.random.default_rng(404)
    start = time.perf_counter()
    slopes = []
    tcs = np.geomspace(0.02, 0.2, 6)
    for name in ("seldd-x", "maxdd:IXZY", "maxdd:IYXZ"):
        h = random_hermitian(2, rng)
        errs = []
        for tc in tcs:
            seq = sequence_by_name(name, tc)
            errs.append(fro(evolve_cycle(h, seq) - expm(effective_hamiltonian(h, seq, order=1), -1j * tc)))
        slopes.append(_slope(tcs, errs))
    sym = max(fro(first_order_correction(toggled_sequence(random_hermitian(2, rng), sel_dd(a, 0.37, True))))
              for a in "xyz")
    ok = min(slopes) >= 2.7 and sym <= 1e-12
    assert verdict("Magnus consistency", ok,
                   f"error slopes {np.round(slopes, 3).tolist()}, symmetrized correction {sym:.1e}",
                   time.perf_counter() - start, 10)


def test_path_asymmetry():
    rng = np.random.default_rng(505)
    start = time.perf_counter()
    h1 = random_hermitian(2, rng, traceless=True)
    h1 = h1 - np.trace(SZ @ h1) / 2 * SZ
    h1 /= fro(h1)
    dt = 0.05
    eps = np.geomspace(1e-4, 1e-2, 5)
    norms = {p: [fro(first_order_correction(toggled_sequence(SZ + e * h1, max_dd(p, 4 * dt)))) for e in eps]
             for p in ("IXZY", "IYXZ")}
    s_good, s_bad = _slope(eps, norms["IXZY"]), _slope(eps, norms["IYXZ"])
    # linear-in-eps part of the selective {I, X} correction
    e = 1e-3
    sel = lambda s: first_order_correction(toggled_sequence(SZ + s * e * h1, sel_dd("x", 2 * dt)))  # noqa: E731
    lin = (sel(1) - sel(-1)) / 2
    comps = {lab: abs(hs_inner(p, lin)) / 2 for lab, p in zip("IXYZ", (I2, SX, SY, SZ))}
    others = max(comps["I"], comps["X"], comps["Z"])
    ok = abs(s_good - 2) <= 0.1 and abs(s_bad - 1) <= 0.1 and others <= 1e-10 and comps["Y"] > 1e-8
    assert verdict("ordering asymmetry of maximal paths", ok,
                   f"IXZY slope {s_good:.3f}, IYXZ slope {s_bad:.3f}, selective overlaps "
                   f"Y {comps['Y']:.2e} others {others:.1e}",
                   time.perf_counter() - start, 10)


def test_figure_one_reproduction():
    start = time.perf_counter()
    m = QubitErrorModel(eps_x=0.05, eps_y=0.1)
    res = {n: run(ProtocolRun.over(n, m, 0.04, 30.0)) for n in ("cp-x", "cp-y", "fdd")}
    track_x = float(np.max(np.abs(res["cp-x"].fidelities - np.cos(0.05 * res["cp-x"].times) ** 2)))
    track_y = float(np.max(np.abs(res["cp-y"].fidelities - np.cos(0.1 * res["cp-y"].times) ** 2)))
    avg = {n: r.time_average for n, r in res.items()}
    tracking = track_x <= 0.05 and track_y <= 0.05
    ordering = avg["fdd"] > avg["cp-x"] and avg["fdd"] > avg["cp-y"]
    assert verdict("selective envelopes and FDD ordering", tracking and ordering,
                   f"envelope errors x {track_x:.1e} y {track_y:.1e}; time averages fdd {avg['fdd']:.4f} "
                   f"seldd-x {avg['cp-x']:.4f} seldd-y {avg['cp-y']:.4f}",
                   time.perf_counter() - start, 30)


def test_figure_two_reproduction():
    start = time.perf_counter()
    m = QubitErrorModel(eps_x=0.1, eps_y=0.1)
    avg = {n: run(ProtocolRun.over(n, m, 0.32, 120.0)).time_average for n in ("maxdd", "fed", "fed-plain", "def")}
    ok = avg["fed"] >= avg["maxdd"] and avg["fed"] >= avg["fed-plain"] and avg["def"] < avg["maxdd"]
    detail = ", ".join(f"{k} {v:.4f}" for k, v in avg.items())
    assert verdict("FED/MaxDD/DEF ordering", ok, f"time averages {detail}", time.perf_counter() - start, 60)


def test_estimation_convergence():
    start = time.perf_counter()
    m = QubitErrorModel(eps_x=0.05, eps_z=0.1)
    state = tune(EstimationState(), m, 8, 1.0, 1e-3)
    norms = [r["est_error_norm"] for r in state.history]
    first = state.history[0]
    monotone = len(norms) >= 5 and all(b < a for a, b in zip(norms, norms[1:]))
    ex, ez = abs(first["est_eps_x"] - 0.05), abs(first["est_eps_z"] - 0.1)
    ok = monotone and ex <= 1e-4 and ez <= 1e-4
    assert verdict("estimation convergence", ok,
                   f"{len(norms)} iterations, norms {norms[0]:.2e} -> {norms[-1]:.2e}, "
                   f"|eps_x| error {ex:.1e}, eps_z error {ez:.1e}",
                   time.perf_counter() - start, 10)


def test_channel_fidelity_cross_check():
    rng = np.random.default_rng(606)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(100):
        u = random_unitary(2, rng)
        worst = max(worst, abs(entanglement_fidelity(channel_from_unitary(u)) - unitary_fidelity(u)))
    assert verdict("channel fidelity equals |tr U|^2 / 4", worst <= 1e-12, f"max difference {worst:.1e}",
                   time.perf_counter() - start, 5)


def test_sampled_statistics():
    rng = np.random.default_rng(707)
    start = time.perf_counter()
    shots = 10_000
    worst = 0.0
    for k in range(50):
        eps = rng.uniform(-0.3, 0.3, 3)
        m = QubitErrorModel(1.0, *eps)
        dt = float(rng.choice([0.02, 0.05, 0.1]))
        spec = (fdd_spec(dt * 4), fed_spec(8 * dt, dt), def_spec(8 * dt, dt))[k % 3]
        rho = np.eye(2) / 2
        p = outcome_probability(m, spec, rho_s=rho)
        freq = float(sample_records(m, spec, 1, shots, seed=k, rho_s=rho).mean())
        sigma = np.sqrt(max(p * (1 - p), 1e-12) / shots)
        worst = max(worst, abs(freq - p) / sigma)
    assert verdict("sampled outcome frequencies vs exact", worst <= 3, f"worst deviation {worst:.2f} sigma",
                   time.perf_counter() - start, 60)
