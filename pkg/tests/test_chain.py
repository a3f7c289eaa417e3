import numpy as np
import pytest
from numpy.testing import assert_allclose

from mschain.chain import (
    BASIS_1,
    BASIS_2,
    Gemenge,
    HamiltonianSpec,
    MSState,
    PREMEASURE_UNITARY,
    READY_STATE,
    Scenario,
    attach_factor,
    decohere,
    factorize_branch,
    full_chain,
    gemenge_restriction,
    hamiltonian_premeasure_crosscheck,
    make_gemenge,
    object_detector_state,
    pointer_branch_amplitudes,
    premeasure,
    prepare_gemenge,
    prepare_object_state,
    scenario_digest,
    statistical_restriction,
)
from mschain.discriminate import ObservableSpec, build_pointer_algebra, combine_observable
from mschain.errors import (
    CapacityError,
    DecompositionError,
    PreconditionError,
    UsageError,
    ValidationError,
)
from mschain.linalg import TensorLayout, expectation

SYM = 2**-0.5


def sd_ready_state(a1, a2):
    vec = np.kron(prepare_object_state(a1, a2), READY_STATE)
    return MSState(vec, TensorLayout((("S", 2), ("D", 2))))


class TestPrepare:
    def test_eigenstate(self):
        assert_allclose(prepare_object_state(1.0, 0.0), BASIS_1)

    def test_symmetric(self):
        assert_allclose(prepare_object_state(SYM, SYM), [SYM, SYM])

    def test_complex_amplitudes(self):
        vec = prepare_object_state(0.6, 0.8j)
        assert_allclose(np.abs(vec) ** 2, [0.36, 0.64], atol=1e-12)

    def test_rejects_unnormalized(self):
        with pytest.raises(ValidationError):
            prepare_object_state(1.0, 1.0)

    def test_gemenge_symmetric(self):
        w = prepare_gemenge(SYM, SYM)
        assert [p for _, p in w.branches] == pytest.approx([0.5, 0.5])
        assert_allclose(w.branches[0][0], BASIS_1)
        assert_allclose(w.branches[1][0], BASIS_2)

    def test_gemenge_degenerate_amplitude(self):
        w = prepare_gemenge(1.0, 0.0)
        assert len(w.branches) == 1
        assert w.branches[0][1] == pytest.approx(1.0)
        assert w.notes  # degeneracy is flagged, not an error

    def test_gemenge_squared_moduli(self):
        w = prepare_gemenge(np.sqrt(0.3), np.sqrt(0.7))
        assert [p for _, p in w.branches] == pytest.approx([0.3, 0.7])


class TestPremeasure:
    def test_eigenstate_maps_to_pointer(self):
        out = premeasure(sd_ready_state(1.0, 0.0), "S", "D")
        assert_allclose(out.vector, np.kron(BASIS_1, BASIS_1), atol=1e-12)

    def test_superposition_entangles(self):
        a1, a2 = 0.6, 0.8j
        out = premeasure(sd_ready_state(a1, a2), "S", "D")
        expected = a1 * np.kron(BASIS_1, BASIS_1) + a2 * np.kron(BASIS_2, BASIS_2)
        assert_allclose(out.vector, expected, atol=1e-12)

    def test_unitary(self):
        assert_allclose(
            PREMEASURE_UNITARY.conj().T @ PREMEASURE_UNITARY, np.eye(4), atol=1e-12
        )

    def test_norm_preserved(self):
        rng = np.random.default_rng(23)
        for _ in range(20):
            a = rng.normal(size=2) + 1j * rng.normal(size=2)
            a /= np.linalg.norm(a)
            out = premeasure(sd_ready_state(a[0], a[1]), "S", "D")
            assert abs(np.linalg.norm(out.vector) - 1.0) < 1e-12

    def test_ready_state_enforced(self):
        vec = np.kron(BASIS_1, BASIS_1)  # apparatus already collapsed
        state = MSState(vec, TensorLayout((("S", 2), ("D", 2))))
        with pytest.raises(PreconditionError):
            premeasure(state, "S", "D")
        out = premeasure(state, "S", "D", allow_any_apparatus_state=True)
        assert abs(np.linalg.norm(out.vector) - 1.0) < 1e-12


class TestFullChain:
    def test_symmetric_pure(self):
        ms = full_chain(Scenario(SYM, SYM, "pure"))
        expected = np.zeros(8, dtype=complex)
        expected[0] = expected[7] = SYM
        assert_allclose(ms.vector, expected, atol=1e-12)
        assert ms.layout.labels == ("S", "D", "O")

    def test_eigenstate_gives_product(self):
        ms = full_chain(Scenario(1.0, 0.0, "pure"))
        expected = np.zeros(8, dtype=complex)
        expected[0] = 1.0
        assert_allclose(ms.vector, expected, atol=1e-12)
        factors = factorize_branch(ms)
        for label in ("S", "D", "O"):
            assert_allclose(factors[label], BASIS_1, atol=1e-12)

    def test_gemenge_chain(self):
        w = full_chain(Scenario(np.sqrt(0.3), np.sqrt(0.7), "gemenge"))
        assert isinstance(w, Gemenge)
        assert [p for _, p in w.branches] == pytest.approx([0.3, 0.7])
        for i, (branch, _) in enumerate(w.branches):
            expected = np.zeros(8, dtype=complex)
            expected[0 if i == 0 else 7] = 1.0
            assert_allclose(branch.vector, expected, atol=1e-12)

    def test_intermediate_detector_state(self):
        sd = object_detector_state(0.6, 0.8j)
        expected = 0.6 * np.kron(BASIS_1, BASIS_1) + 0.8j * np.kron(BASIS_2, BASIS_2)
        assert_allclose(sd.vector, expected, atol=1e-12)


class TestRestrictions:
    @pytest.mark.parametrize("theta", np.linspace(0.05, np.pi / 2 - 0.05, 8))
    def test_statistical_restriction_diag(self, theta):
        a1, a2 = np.cos(theta), np.sin(theta)
        ms = full_chain(Scenario(a1, a2, "pure"))
        assert_allclose(
            statistical_restriction(ms), np.diag([a1**2, a2**2]), atol=1e-12
        )

    def test_product_restriction_is_pure(self):
        ms = full_chain(Scenario(0.0, 1.0, "pure"))
        assert_allclose(statistical_restriction(ms), np.diag([0.0, 1.0]), atol=1e-12)

    def test_gemenge_density_restriction(self):
        w = full_chain(Scenario(np.sqrt(0.3), np.sqrt(0.7), "gemenge"))
        rho = statistical_restriction(w.density(), w.layout)
        assert_allclose(rho, np.diag([0.3, 0.7]), atol=1e-12)

    def test_missing_observer_factor(self):
        state = MSState(np.kron(BASIS_1, BASIS_1), TensorLayout((("S", 2), ("D", 2))))
        with pytest.raises(UsageError):
            statistical_restriction(state)

    def test_gemenge_restriction(self):
        w = full_chain(Scenario(np.sqrt(0.3), np.sqrt(0.7), "gemenge"))
        w_o = gemenge_restriction(w)
        assert [p for _, p in w_o.branches] == pytest.approx([0.3, 0.7])
        assert_allclose(w_o.branches[0][0], BASIS_1, atol=1e-12)
        assert_allclose(w_o.branches[1][0], BASIS_2, atol=1e-12)

    def test_restriction_consistency(self):
        # density of the branchwise restriction equals the traced density
        for a1, a2 in ((SYM, SYM), (np.sqrt(0.2), np.sqrt(0.8)), (0.6, 0.8)):
            w = full_chain(Scenario(a1, a2, "gemenge"))
            via_branches = gemenge_restriction(w).density()
            via_trace = statistical_restriction(w.density(), w.layout)
            assert np.max(np.abs(via_branches - via_trace)) < 1e-12

    def test_entangled_branch_rejected(self):
        ms = full_chain(Scenario(SYM, SYM, "pure"))
        w = Gemenge(((ms, 1.0),))
        with pytest.raises(PreconditionError):
            gemenge_restriction(w)

    def test_restriction_phase_blind(self):
        # equal moduli, any relative phase: identical observer restriction
        base = statistical_restriction(full_chain(Scenario(np.sqrt(0.3), np.sqrt(0.7), "pure")))
        for phi in np.linspace(0.0, 2 * np.pi, 12):
            a2 = np.sqrt(0.7) * np.exp(1j * phi)
            rho = statistical_restriction(full_chain(Scenario(np.sqrt(0.3), a2, "pure")))
            assert np.max(np.abs(rho - base)) < 1e-12


class TestDecohere:
    def test_unit_overlap_changes_nothing(self):
        ms = full_chain(Scenario(SYM, SYM, "pure"))
        for n_env in (0, 1, 3):
            result = decohere(ms, n_env, 1.0)
            assert result.coherence_factor == pytest.approx(1.0)
            assert np.max(np.abs(result.reduced_ms - ms.density())) < 1e-12

    def test_orthogonal_environment_diagonalizes(self):
        ms = full_chain(Scenario(np.sqrt(0.3), np.sqrt(0.7), "pure"))
        w = full_chain(Scenario(np.sqrt(0.3), np.sqrt(0.7), "gemenge"))
        result = decohere(ms, 1, 0.0)
        assert np.max(np.abs(result.reduced_ms - w.density())) < 1e-12

    def test_product_overlap_law_cross_checked(self):
        ms = full_chain(Scenario(SYM, SYM, "pure"))
        result = decohere(ms, 4, 0.5)
        assert result.coherence_factor == pytest.approx(0.0625)
        # oracle: the explicit partial trace must scale every pointer
        # off-diagonal element by the same product of per-element overlaps
        rho0 = ms.density()
        expected = rho0.copy()
        expected[0, 7] *= 0.0625
        expected[7, 0] *= 0.0625
        assert np.max(np.abs(result.reduced_ms - expected)) < 1e-12

    def test_pointer_product_states_are_fixed_points(self):
        for a1, a2 in ((1.0, 0.0), (0.0, 1.0)):
            ms = full_chain(Scenario(a1, a2, "pure"))
            for eps in (0.0, 0.3, 0.9, 1.0):
                for n_env in (0, 2, 5):
                    result = decohere(ms, n_env, eps)
                    assert np.max(np.abs(result.reduced_ms - ms.density())) < 1e-12

    def test_enlarged_state_layout(self):
        ms = full_chain(Scenario(SYM, SYM, "pure"))
        result = decohere(ms, 3, 0.5)
        assert result.state.layout.labels == ("S", "D", "O", "E1", "E2", "E3")
        assert abs(np.linalg.norm(result.state.vector) - 1.0) < 1e-12

    def test_capacity(self):
        ms = full_chain(Scenario(SYM, SYM, "pure"))
        with pytest.raises(CapacityError):
            decohere(ms, 10, 0.5)

    def test_parameter_validation(self):
        ms = full_chain(Scenario(SYM, SYM, "pure"))
        with pytest.raises(ValidationError):
            decohere(ms, 2, 1.5)
        with pytest.raises(ValidationError):
            decohere(ms, -1, 0.5)


class TestHamiltonianCrosscheck:
    def test_tuned_on_eigenstate(self):
        spec = HamiltonianSpec(coupling=2.0, duration=0.5)
        result = hamiltonian_premeasure_crosscheck(spec, sd_ready_state(1.0, 0.0))
        assert result.tuned
        assert result.fidelity_to_canonical > 1 - 1e-9
        overlap = abs(np.vdot(result.state.vector, np.kron(BASIS_1, BASIS_1))) ** 2
        assert overlap > 1 - 1e-9

    def test_zero_coupling_is_identity(self):
        spec = HamiltonianSpec(coupling=0.0, duration=1.0)
        state = sd_ready_state(SYM, SYM)
        result = hamiltonian_premeasure_crosscheck(spec, state)
        assert not result.tuned
        assert result.diagnostic is not None
        assert_allclose(result.state.vector, state.vector, atol=1e-12)

    def test_tuned_matches_premeasure_on_superposition(self):
        spec = HamiltonianSpec(coupling=1.0, duration=1.0)
        state = sd_ready_state(0.6, 0.8j)
        result = hamiltonian_premeasure_crosscheck(spec, state)
        canonical = premeasure(state, "S", "D")
        fid = abs(np.vdot(canonical.vector, result.state.vector)) ** 2
        assert fid > 1 - 1e-9

    def test_untuned_returns_diagnostic(self):
        spec = HamiltonianSpec(coupling=1.0, duration=0.37)
        result = hamiltonian_premeasure_crosscheck(spec, sd_ready_state(SYM, SYM))
        assert not result.tuned
        assert "not tuned" in result.diagnostic


class TestInvariants:
    def test_detector_observables_blind_to_purity(self):
        # every detector-scoped observable has equal expectations on the pure
        # entangled state and on the matching mixture
        a1, a2 = np.sqrt(0.3), np.sqrt(0.7) * np.exp(0.4j)
        sd_pure = object_detector_state(a1, a2)
        rho_d_pure = sd_pure.reduced(("D",))
        rho_d_mixed = np.diag([abs(a1) ** 2, abs(a2) ** 2]).astype(complex)
        alg = build_pointer_algebra("D")
        rng = np.random.default_rng(29)
        for _ in range(40):
            d = rng.normal(size=3)
            d /= np.linalg.norm(d)
            obs = combine_observable(alg, ObservableSpec(*d))
            lhs = expectation(rho_d_pure, obs.matrix)
            rhs = expectation(rho_d_mixed, obs.matrix)
            assert abs(lhs - rhs) < 1e-12

    def test_fixed_moduli_share_one_restriction(self):
        # fixed moduli, arbitrary phases: the observer restriction is one matrix
        rng = np.random.default_rng(31)
        for _ in range(10):
            theta = rng.uniform(0.1, np.pi / 2 - 0.1)
            base = None
            for phi in rng.uniform(0, 2 * np.pi, size=6):
                ms = full_chain(Scenario(np.cos(theta), np.sin(theta) * np.exp(1j * phi), "pure"))
                rho = statistical_restriction(ms)
                if base is None:
                    base = rho
                else:
                    assert np.max(np.abs(rho - base)) < 1e-12

    def test_pointer_branch_amplitudes(self):
        a1, a2 = 0.6, 0.8j
        ms = full_chain(Scenario(a1, a2, "pure"))
        b1, b2 = pointer_branch_amplitudes(ms)
        assert b1 == pytest.approx(a1, abs=1e-12)
        assert b2 == pytest.approx(a2, abs=1e-12)

    def test_pointer_branch_amplitudes_rejects_other_states(self):
        vec = np.zeros(8, dtype=complex)
        vec[1] = 1.0  # not a diagonal branch product
        state = MSState(vec, TensorLayout((("S", 2), ("D", 2), ("O", 2))))
        with pytest.raises(DecompositionError):
            pointer_branch_amplitudes(state)


class TestGemengeType:
    def test_probability_sum_enforced(self):
        with pytest.raises(ValidationError):
            Gemenge(((BASIS_1, 0.5), (BASIS_2, 0.4)))

    def test_merge_coinciding_branches(self):
        w = make_gemenge(((BASIS_1, 0.25), (BASIS_1, 0.25), (BASIS_2, 0.5)))
        assert len(w.branches) == 2
        assert w.branches[0][1] == pytest.approx(0.5)

    def test_drop_negligible_branch(self):
        w = make_gemenge(((BASIS_1, 1.0 - 1e-13), (BASIS_2, 1e-13)))
        assert len(w.branches) == 1
        assert w.branches[0][1] == pytest.approx(1.0)
        assert any("dropped" in note for note in w.notes)


class TestScenario:
    def test_validation(self):
        with pytest.raises(ValidationError):
            Scenario(1.0, 1.0)
        with pytest.raises(ValidationError):
            Scenario(SYM, SYM, "foo")
        with pytest.raises(ValidationError):
            Scenario(SYM, SYM, trials=0)
        with pytest.raises(ValidationError):
            Scenario(SYM, SYM, env_overlap=1.2)
        with pytest.raises(ValidationError):
            Scenario(SYM, SYM, n_env=-1)

    def test_digest_stable_and_sensitive(self):
        s = Scenario(SYM, SYM, "pure", seed=7)
        assert scenario_digest(s) == scenario_digest(Scenario(SYM, SYM, "pure", seed=7))
        assert scenario_digest(s) != scenario_digest(Scenario(SYM, SYM, "pure", seed=8))


class TestAttachFactor:
    def test_layout_grows(self):
        ms = MSState(BASIS_1, TensorLayout((("S", 2),)))
        grown = attach_factor(ms, "D", READY_STATE)
        assert grown.layout.labels == ("S", "D")
        assert_allclose(grown.vector, np.kron(BASIS_1, READY_STATE))

    def test_capacity_respected(self):
        ms = MSState(BASIS_1, TensorLayout((("S", 2),)))
        with pytest.raises(CapacityError):
            attach_factor(ms, "X", np.ones(4096) / 64.0, max_dim=4096)
