import logging

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rotconsensus import spectral
from rotconsensus.ambiguity import AgentAmbiguity, assemble_global, homogeneous, unambiguous
from rotconsensus.exceptions import ContractError, DimensionError
from rotconsensus.stability import (
    Verdict,
    check_rotation_lemma,
    homogeneous_margin,
    mixed_rotation_evidence,
    reduced_matrix,
    reduced_spectrum,
    stability_check,
    sufficient_check,
    sweep_heterogeneous,
    sweep_homogeneous,
    system_matrix,
)

from conftest import random_connected_graph
from rotconsensus.graph import build_laplacian


def random_proper_set(rng, n, d=2, span=np.pi):
    return assemble_global([AgentAmbiguity(t, True, d) for t in rng.uniform(-span, span, n)])


def random_orthogonal(rng, n):
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.diag(r))


class TestStabilityCheck:
    def test_unambiguous(self, rendezvous_laplacian):
        r = stability_check(rendezvous_laplacian, unambiguous(4))
        assert r.verdict is Verdict.STABLE and r.consistent
        assert r.min_eig_gamma == pytest.approx(1.0, abs=1e-12)
        assert r.max_real_nonzero == pytest.approx(-2.0, abs=1e-12)
        assert r.zero_multiplicity == r.expected_zero_multiplicity == 2

    def test_cycle_sixty_degrees(self, cycle4_laplacian):
        r = stability_check(cycle4_laplacian, homogeneous(4, np.pi / 3))
        assert r.verdict is Verdict.STABLE
        assert r.min_eig_gamma == pytest.approx(0.5, abs=1e-12)
        assert r.max_real_nonzero == pytest.approx(-2 * 0.5, abs=1e-12)

    @pytest.mark.parametrize("theta", [0.0, 0.4, -2.0, np.pi])
    def test_improper_unstable(self, cycle4_laplacian, theta):
        r = stability_check(cycle4_laplacian, homogeneous(4, theta, proper=False))
        assert r.verdict is Verdict.UNSTABLE
        assert r.spectral_verdict is Verdict.UNSTABLE

    def test_quarter_turn_marginal(self, cycle4_laplacian):
        r = stability_check(cycle4_laplacian, homogeneous(4, np.pi / 2))
        assert r.verdict is Verdict.MARGINAL
        assert r.spectral_verdict is Verdict.MARGINAL
        assert r.consistent

    def test_raw_matrix_accepted(self, cycle4_laplacian):
        amb = homogeneous(4, 0.3)
        a, b = stability_check(cycle4_laplacian, amb), stability_check(cycle4_laplacian, amb.matrix)
        assert a.min_eig_gamma == b.min_eig_gamma

    def test_size_mismatch(self, cycle4_laplacian):
        with pytest.raises(DimensionError):
            stability_check(cycle4_laplacian, unambiguous(3))

    def test_zero_laplacian(self):
        with pytest.raises(ContractError):
            stability_check(np.zeros((2, 2)), unambiguous(2))

    def test_report_dict(self, cycle4_laplacian):
        d = stability_check(cycle4_laplacian, unambiguous(4)).to_dict()
        assert d["verdict"] == "Stable" and len(d["spectrum"]) == 8

    def test_zero_multiplicity_on_stress(self, formation_stress):
        for d in (2, 3):
            r = stability_check(formation_stress, unambiguous(7, d))
            assert r.zero_multiplicity == r.expected_zero_multiplicity == (7 - 4) * d

    def test_zero_multiplicity_random(self, rng):
        for _ in range(50):
            n = int(rng.integers(2, 8))
            L = build_laplacian(random_connected_graph(rng, n))
            r = stability_check(L, random_proper_set(rng, n, span=1.2))
            assert r.zero_multiplicity == r.expected_zero_multiplicity == 2


class TestProperties:
    def test_congruence_invariance(self, rng):
        for _ in range(100):
            n = int(rng.integers(2, 8))
            L = build_laplacian(random_connected_graph(rng, n, weighted=True))
            amb = random_proper_set(rng, n)
            M = reduced_matrix(L, amb)
            split = spectral.split_range_nullspace(L)
            U1, _, _ = split.lift(2)
            P = random_orthogonal(rng, U1.shape[1])
            rotated = (U1 @ P).T @ amb.matrix @ (U1 @ P)
            a = np.linalg.eigvalsh(spectral.gamma(M))[0]
            b = np.linalg.eigvalsh(spectral.gamma(rotated))[0]
            assert abs(a - b) < 1e-9

    def test_sufficiency_nesting(self):
        rng = np.random.default_rng(11)
        hits = 0
        for _ in range(1000):
            n = int(rng.integers(2, 8))
            L = build_laplacian(random_connected_graph(rng, n))
            amb = random_proper_set(rng, n, span=np.pi / 2 + 0.3)
            ok, lo = sufficient_check(amb)
            assert lo == pytest.approx(min(np.cos(a.theta) for a in amb.agents), abs=1e-12)
            if ok:
                hits += 1
                assert stability_check(L, amb).verdict is Verdict.STABLE
        assert hits > 50

    def test_reduced_spectrum_identity(self, rng):
        for _ in range(100):
            n = int(rng.integers(2, 8))
            d = int(rng.choice([2, 3]))
            L = build_laplacian(random_connected_graph(rng, n, weighted=True))
            agents = [AgentAmbiguity(t, bool(rng.integers(2)), d) for t in rng.uniform(-np.pi, np.pi, n)]
            amb = assemble_global(agents)
            if np.linalg.cond(reduced_matrix(L, amb)) > 1e8:
                # zero mode is defective; covered by the next test
                continue
            full = spectral.general_eig(system_matrix(L, amb))
            nonzero = full[np.argsort(np.abs(full), kind="stable")[d:]]
            assert spectral.match_spectra(nonzero, reduced_spectrum(L, amb)) < 1e-8

    def test_balanced_improper_gives_defective_zero(self, cycle4_laplacian):
        # the last axis evolves under -S L with S = diag(1, -1, 1, -1); 1^T S 1 = 0
        # makes the zero eigenvalue defective, so it is only resolved to ~sqrt(eps)
        agents = [AgentAmbiguity(0.2, k % 2 == 0, 3) for k in range(4)]
        amb = assemble_global(agents)
        assert np.linalg.svd(reduced_matrix(cycle4_laplacian, amb), compute_uv=False)[-1] < 1e-12
        full = spectral.general_eig(system_matrix(cycle4_laplacian, amb))
        nonzero = full[np.argsort(np.abs(full), kind="stable")[3:]]
        assert spectral.match_spectra(nonzero, reduced_spectrum(cycle4_laplacian, amb)) < 1e-6
        r = stability_check(cycle4_laplacian, amb)
        assert r.verdict is not Verdict.STABLE and r.spectral_verdict is not Verdict.STABLE

    def test_gamma_certificate_is_not_necessary(self):
        # path graph: the spectrum is stable although the symmetric part is indefinite
        L = np.array([[1, -1, 0], [-1, 2, -1], [0, -1, 1.0]])
        amb = assemble_global([AgentAmbiguity(t) for t in (1.5596, -0.3595, -1.8266)])
        r = stability_check(L, amb)
        assert r.min_eig_gamma == pytest.approx(-0.12907, abs=1e-5)
        assert r.max_real_nonzero == pytest.approx(-0.46351, abs=1e-5)
        assert r.verdict is Verdict.UNSTABLE and r.spectral_verdict is Verdict.STABLE
        assert not r.consistent

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(-1.5, 1.5), min_size=4, max_size=4))
    def test_inside_box_always_stable(self, thetas):
        L = np.array([[3, -1, -1, -1], [-1, 2, -1, 0], [-1, -1, 3, -1], [-1, 0, -1, 2.0]])
        r = stability_check(L, assemble_global([AgentAmbiguity(t) for t in thetas]))
        assert r.verdict is Verdict.STABLE and r.spectral_verdict is Verdict.STABLE


class TestSufficientCheck:
    def test_all_inside(self):
        ok, lo = sufficient_check(assemble_global([AgentAmbiguity(t) for t in (0.1, -0.5, 1.2)]))
        assert ok and lo == pytest.approx(np.cos(1.2))

    def test_improper_present(self):
        assert not sufficient_check(assemble_global([AgentAmbiguity(), AgentAmbiguity(0.0, False)]))[0]
        assert not sufficient_check(assemble_global([AgentAmbiguity(0.0, False, 3)]))[0]

    def test_quarter_turn(self):
        ok, lo = sufficient_check(assemble_global([AgentAmbiguity(), AgentAmbiguity(np.pi / 2)]))
        assert not ok and lo == pytest.approx(0.0, abs=1e-15)


class TestHomogeneousMargin:
    @pytest.mark.parametrize(
        "theta, proper, expected",
        [
            (np.pi / 4, True, Verdict.STABLE),
            (np.pi / 2, True, Verdict.MARGINAL),
            (-np.pi / 2, True, Verdict.MARGINAL),
            (2.0, True, Verdict.UNSTABLE),
            (0.1, False, Verdict.UNSTABLE),
            (2 * np.pi + 0.2, True, Verdict.STABLE),
        ],
    )
    def test_examples(self, theta, proper, expected):
        assert homogeneous_margin(theta, proper) is expected

    def test_dimension(self):
        with pytest.raises(DimensionError):
            homogeneous_margin(0.0, True, 4)

    @given(st.floats(-np.pi, np.pi), st.booleans(), st.sampled_from([2, 3]))
    def test_agrees_with_matrix_test(self, theta, proper, d):
        L = np.array([[2, -1, -1], [-1, 2, -1], [-1, -1, 2.0]])
        closed = homogeneous_margin(theta, proper, d, tol=1e-6)
        r = stability_check(L, homogeneous(3, theta, proper, d), tol=1e-6)
        assert closed is r.verdict


class TestRotatedSpectrum:
    def test_proper_cycle(self, cycle4_laplacian):
        assert check_rotation_lemma(cycle4_laplacian, 0.9) < 1e-8

    def test_improper_mirrored(self, cycle4_laplacian):
        assert check_rotation_lemma(cycle4_laplacian, 0.0, proper=False) < 1e-8
        ev = spectral.general_eig(system_matrix(cycle4_laplacian, homogeneous(4, 0.0, False)))
        assert spectral.match_spectra(ev, [0, 0, 2, -2, 2, -2, 4, -4]) < 1e-12

    def test_zero_angle(self, cycle4_laplacian):
        ev = spectral.general_eig(system_matrix(cycle4_laplacian, unambiguous(4, 3)))
        assert spectral.match_spectra(ev, np.repeat([0, -2, -2, -4], 3)) < 1e-12
        assert check_rotation_lemma(cycle4_laplacian, 0.0, d=3) < 1e-8


class TestSweeps:
    def test_homogeneous_cos(self, cycle4_laplacian):
        thetas = np.linspace(-np.pi, np.pi, 37)
        grid = sweep_homogeneous(cycle4_laplacian, 2, True, thetas)
        np.testing.assert_allclose(grid.values, np.cos(thetas), atol=1e-9)

    def test_improper_nonpositive(self, cycle4_laplacian):
        for d in (2, 3):
            grid = sweep_homogeneous(cycle4_laplacian, d, False, np.linspace(-np.pi, np.pi, 25))
            assert np.all(grid.values <= 1e-12)

    def test_single_point(self, cycle4_laplacian):
        assert sweep_homogeneous(cycle4_laplacian, 2, True, [0.0]).values == pytest.approx([1.0])

    def test_empty(self, cycle4_laplacian):
        with pytest.raises(ContractError):
            sweep_homogeneous(cycle4_laplacian, 2, True, [])

    def test_heterogeneous_matches_direct(self, rendezvous_laplacian, rng):
        fixed = {0: AgentAmbiguity(0.3), 1: AgentAmbiguity(-0.2)}
        t1, t2 = rng.uniform(-np.pi, np.pi, 5), rng.uniform(-np.pi, np.pi, 4)
        grid = sweep_heterogeneous(rendezvous_laplacian, 2, (2, 3), t1, t2, fixed)
        assert grid.values.shape == (5, 4)
        for p, a in enumerate(t1):
            for q, b in enumerate(t2):
                amb = assemble_global([fixed[0], fixed[1], AgentAmbiguity(a), AgentAmbiguity(b)])
                assert grid.values[p, q] == pytest.approx(stability_check(rendezvous_laplacian, amb).min_eig_gamma, abs=1e-12)

    def test_heterogeneous_single_cell(self, rendezvous_laplacian):
        fixed = {0: AgentAmbiguity(), 1: AgentAmbiguity()}
        grid = sweep_heterogeneous(rendezvous_laplacian, 2, (2, 3), [0.0], [0.0], fixed)
        assert grid.values[0, 0] == pytest.approx(1.0)

    @pytest.mark.parametrize(
        "free, fixed",
        [((2, 2), {0: None, 1: None}), ((2, 9), {0: None, 1: None}), ((2, 3), {0: None}), ((2, 3), {0: None, 1: None, 2: None})],
    )
    def test_heterogeneous_errors(self, rendezvous_laplacian, free, fixed):
        fixed = {k: AgentAmbiguity() for k in fixed}
        with pytest.raises((ContractError, IndexError)):
            sweep_heterogeneous(rendezvous_laplacian, 2, free, [0.0], [0.0], fixed)


class TestMixedEvidence:
    def test_single_improper_others_zero(self, rendezvous_laplacian):
        amb = assemble_global([AgentAmbiguity()] * 3 + [AgentAmbiguity(0.0, False)])
        r = stability_check(rendezvous_laplacian, amb)
        assert r.verdict is Verdict.UNSTABLE and r.spectral_verdict is Verdict.UNSTABLE

    def test_counterexample_is_reported(self, rendezvous_laplacian, caplog):
        # a draw where the improper agent does not destabilise the spectrum
        thetas = [1.44914820607465, -0.8697961015927933, -1.7949055718733495]
        amb = assemble_global([AgentAmbiguity(t) for t in thetas] + [AgentAmbiguity(0.0, False)])
        r = stability_check(rendezvous_laplacian, amb)
        assert r.verdict is Verdict.UNSTABLE
        assert r.spectral_verdict is Verdict.STABLE
        assert not r.consistent

    def test_bookkeeping(self, rendezvous_laplacian, caplog):
        with caplog.at_level(logging.WARNING):
            ev = mixed_rotation_evidence(rendezvous_laplacian, 2, 3, 200, seed=3)
        assert ev.trials == 200
        assert len(ev.counterexamples) == len([r for r in caplog.records if "stable draw" in r.message])
        assert ev.stable_count <= len(ev.counterexamples)
        assert ev.max_min_eig_gamma < 0
        assert set(ev.to_dict()) >= {"stable_count", "counterexamples"}

    def test_deterministic(self, rendezvous_laplacian):
        a = mixed_rotation_evidence(rendezvous_laplacian, 2, 3, 50, seed=5)
        b = mixed_rotation_evidence(rendezvous_laplacian, 2, 3, 50, seed=5)
        assert a == b

    def test_errors(self, rendezvous_laplacian):
        with pytest.raises(ContractError):
            mixed_rotation_evidence(rendezvous_laplacian, 2, 3, 0)
        with pytest.raises(IndexError):
            mixed_rotation_evidence(rendezvous_laplacian, 2, 4, 10)
