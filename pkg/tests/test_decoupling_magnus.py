import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fbdd.cxmat import comm, dag, expm, fro, identity, random_hermitian, random_unitary
from fbdd.decoupling import (
    PulseSequence, all_maxdd_paths, evolve_cycle, evolve_n_cycles, evolve_physical, free_sequence,
    max_dd, parse_path, sel_dd, sequence_by_name,
)
from fbdd.errors import ValidationError
from fbdd.magnus import (
    ToggledHamiltonianSequence, average_hamiltonian, effective_hamiltonian, first_order_correction,
    first_order_correction_equal, toggled_sequence,
)
from fbdd.pauli import I2, SX, SY, SZ


def _slope(xs, ys):
    return np.polyfit(np.log(xs), np.log(ys), 1)[0]


class TestPulseSequence:
    def test_sel_dd_plain(self):
        seq = sel_dd("x", 2.0)
        assert [f for _, f in seq.segments] == [0.5, 0.5]
        assert np.array_equal(seq.segments[1][0], SX)
        assert seq.durations == [1.0, 1.0]

    def test_sel_dd_symmetrized(self):
        seq = sel_dd("x", 1.0, symmetrized=True)
        assert [f for _, f in seq.segments] == [0.25, 0.5, 0.25]
        assert np.array_equal(seq.segments[1][0], SX) and seq.name == "cp-x"

    @pytest.mark.parametrize("seq", [sel_dd("y", 1.0), sel_dd("z", 1.0, True), max_dd("IYXZ", 1.0)])
    def test_pulses_are_cyclic(self, seq):
        total = identity(2)
        for p in seq.pulses():
            total = p @ total
        assert np.allclose(total, identity(2))

    def test_validation(self):
        with pytest.raises(ValueError):
            PulseSequence(((I2, 0.5), (SX, 0.4)), 1.0)
        with pytest.raises(ValidationError):
            PulseSequence(((2 * SX, 1.0),), 1.0)
        with pytest.raises(ValueError):
            PulseSequence(((I2, 1.0),), 0.0)

    def test_path_parsing(self):
        assert parse_path("I, X, Z, Y") == "IXZY"
        assert parse_path(["I", "sx", "sz", "sy"]) == "IXZY"
        with pytest.raises(ValueError):
            parse_path("IXXY")
        assert len(all_maxdd_paths()) == 24

    def test_names(self):
        assert sequence_by_name("maxdd", 1.0).name == "maxdd:IXZY"
        assert sequence_by_name("cp-y", 1.0).name == "cp-y"
        assert sequence_by_name("free", 1.0).name == "free"
        with pytest.raises(ValueError):
            sequence_by_name("udd", 1.0)


class TestAverageHamiltonian:
    def test_selective_removes_z(self):
        seq = toggled_sequence(SZ, sel_dd("x", 1.0))
        assert np.allclose(seq.hamiltonians[1], -SZ)
        assert np.allclose(average_hamiltonian(seq), 0)

    def test_selective_keeps_x(self):
        assert np.allclose(average_hamiltonian(toggled_sequence(SX, sel_dd("x", 1.0))), SX)

    def test_single_frame(self, rng):
        h = random_hermitian(2, rng)
        seq = toggled_sequence(h, free_sequence(1.0))
        assert len(seq.terms) == 1 and np.allclose(seq.hamiltonians[0], h)

    def test_all_paths_vanish(self, rng):
        h = random_hermitian(2, rng, traceless=True)
        for path in all_maxdd_paths():
            assert fro(average_hamiltonian(toggled_sequence(h, max_dd(path, 1.0)))) <= 1e-14

    def test_toggling_preserves_spectrum(self, rng):
        h = random_hermitian(4, rng)
        w = np.linalg.eigvalsh(h)
        for ht in toggled_sequence(h, max_dd("IXZY", 1.0)).hamiltonians:
            assert np.allclose(np.linalg.eigvalsh(ht), w)

    def test_group_average_commutes_with_group(self, rng):
        # open system: the average over {I, X, Y, Z} on S is I_S (x) B
        h = random_hermitian(6, rng)
        hbar = average_hamiltonian(toggled_sequence(h, max_dd("IXZY", 1.0)))
        for g in (SX, SY, SZ):
            gl = np.kron(g, np.eye(3))
            assert fro(comm(hbar, gl)) <= 1e-12

    def test_sequence_validation(self):
        with pytest.raises(ValidationError):
            ToggledHamiltonianSequence(((SX @ SY, 1.0),))
        with pytest.raises(ValueError):
            ToggledHamiltonianSequence(((SX, 0.0),))


class TestFirstOrderCorrection:
    def test_commuting_sequence(self):
        seq = ToggledHamiltonianSequence(((SZ, 0.3), (SZ, 0.2), (2 * SZ, 0.5)))
        assert np.allclose(first_order_correction(seq), 0)

    def test_equal_spacing_form_agrees(self, rng):
        h = random_hermitian(2, rng)
        seq = toggled_sequence(h, max_dd("IYZX", 0.8))
        assert np.allclose(first_order_correction(seq), first_order_correction_equal(seq.hamiltonians, 0.2))

    def test_two_segment_closed_form(self, rng):
        a, b = random_hermitian(2, rng), random_hermitian(2, rng)
        seq = ToggledHamiltonianSequence(((a, 0.3), (b, 0.5)))
        expected = -0.5j * 0.3 * 0.5 * comm(b, a) / 0.8
        assert np.allclose(first_order_correction(seq), expected)

    @pytest.mark.parametrize("name", ["seldd-x", "maxdd:IYXZ", "cp-y", "maxdd:IXZY"])
    def test_third_order_consistency(self, rng, name):
        h = random_hermitian(2, rng)
        tcs = np.geomspace(0.02, 0.2, 6)
        errs = []
        for tc in tcs:
            seq = sequence_by_name(name, tc)
            u = evolve_cycle(h, seq)
            errs.append(fro(u - expm(effective_hamiltonian(h, seq, order=1), -1j * tc)))
        assert _slope(tcs, errs) >= 2.7

    def test_symmetrized_correction_vanishes(self, rng):
        h = random_hermitian(2, rng)
        for axis in "xyz":
            assert fro(first_order_correction(toggled_sequence(h, sel_dd(axis, 0.37, True)))) <= 1e-12

    def test_path_formulas(self, rng):
        # closed forms derived for H = Z + eps H1 with tr(Z H1) = 0, cycle 4 dt
        h1 = random_hermitian(2, rng, traceless=True)
        h1 = h1 - np.trace(SZ @ h1) / 2 * SZ
        dt, eps = 0.1, 1e-3
        tc = 4 * dt
        h = SZ + eps * h1
        ixzy = first_order_correction(toggled_sequence(h, max_dd("IXZY", tc)))
        assert fro(ixzy + 1j * dt**2 / tc * eps**2 * comm(SX @ h1 @ SX, h1)) <= 1e-15
        odd = lambda s: (first_order_correction(toggled_sequence(SZ + eps * h1, s))  # noqa: E731
                         - first_order_correction(toggled_sequence(SZ - eps * h1, s))) / 2
        iyxz = odd(max_dd("IYXZ", tc))
        assert fro(iyxz + 1j * dt**2 / tc * eps * comm(SY @ h1 @ SY + h1, SZ)) <= 1e-15
        tc2 = 2 * dt
        selx = odd(sel_dd("x", tc2))
        assert fro(selx + 0.5j * eps * dt**2 / tc2 * comm(SX @ h1 @ SX + h1, SZ)) <= 1e-15


class TestEvolution:
    def test_zero_hamiltonian(self):
        assert np.allclose(evolve_cycle(np.zeros((2, 2)), max_dd("IXZY", 1.0)), identity(2))

    def test_free_sequence(self, rng):
        h = random_hermitian(2, rng)
        assert np.allclose(evolve_cycle(h, free_sequence(0.7)), expm(h, -0.7j))
        assert np.allclose(evolve_n_cycles(h, free_sequence(0.7), 5), expm(h, -3.5j))

    def test_single_cycle(self, rng):
        h = random_hermitian(2, rng)
        seq = sel_dd("x", 0.3)
        assert np.allclose(evolve_n_cycles(h, seq, 1), evolve_cycle(h, seq))
        with pytest.raises(ValueError):
            evolve_n_cycles(h, seq, 0)

    def test_unitarity_over_many_cycles(self, rng):
        u = evolve_n_cycles(random_hermitian(2, rng), max_dd("IXZY", 0.1), 1000)
        assert fro(dag(u) @ u - identity(2)) <= 1e-8

    def test_selective_cycle_is_second_order(self):
        tcs = np.geomspace(1e-3, 1e-2, 5)
        errs = [fro(evolve_cycle(SZ, sel_dd("x", tc)) - identity(2)) for tc in tcs]
        # the two frames carry Z and -Z, which commute: the cycle is exactly the identity
        assert max(errs) <= 1e-13
        h = SZ + 0.3 * SX
        errs = [fro(evolve_cycle(h, sel_dd("x", tc)) - expm(0.3 * SX, -1j * tc)) for tc in tcs]
        assert _slope(tcs, errs) == pytest.approx(2.0, abs=0.1)

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), path=st.sampled_from(all_maxdd_paths()))
    def test_physical_pulses_reproduce_frame_product(self, seed, path):
        rng = np.random.default_rng(seed)
        h = random_hermitian(4, rng)  # qubit (x) 2-level environment
        seq = max_dd(path, float(rng.uniform(0.1, 2.0)))
        assert fro(evolve_cycle(h, seq) - evolve_physical(h, seq)) <= 1e-12

    def test_converges_to_average_hamiltonian(self, rng):
        h = SZ + 0.2 * SX + random_hermitian(2, rng) * 0.05
        seq_t = 2.0
        dts = [0.02 / 2**k for k in range(4)]
        errs = []
        for dt in dts:
            seq = sel_dd("x", 2 * dt)
            n = int(round(seq_t / (2 * dt)))
            hbar = average_hamiltonian(toggled_sequence(h, seq))
            errs.append(fro(evolve_n_cycles(h, seq, n) - expm(hbar, -1j * seq_t)))
        assert _slope(dts, errs) >= 0.9

    def test_control_dimension_must_divide(self, rng):
        with pytest.raises(Exception):
            evolve_cycle(random_hermitian(3, rng), sel_dd("x", 1.0))

    def test_random_unitary_pulses(self, rng):
        g = random_unitary(2, rng)
        seq = PulseSequence(((I2, 0.5), (g, 0.5)), 1.0)
        assert np.allclose(seq.pulses()[1], g) and np.allclose(seq.pulses()[2], dag(g))


def test_every_pair_of_paths_shares_zeroth_order(rng):
    h = SZ + 0.1 * SX
    hbars = [average_hamiltonian(toggled_sequence(h, max_dd(p, 1.0))) for p in itertools.islice(all_maxdd_paths(), 6)]
    assert all(np.allclose(hb, 0) for hb in hbars)
