import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qmachine.aerts_machine import (
    ElasticExperiment,
    MachineState,
    Outcome,
    machine_outcomes,
    machine_probabilities,
    run_machine_trial,
)
from qmachine.bloch import (
    BlochVector,
    DensityOperator2,
    density_from_mixture,
    directions_for_gamma,
    qm_probabilities,
    spinor_from_angles,
)
from qmachine.errors import DomainError

from conftest import random_unit, unit_vectors


def setup(gamma, radius=1.0):
    v, u = directions_for_gamma(gamma)
    return MachineState(v.scaled(radius)), ElasticExperiment(u)


def five_sigma(p, n):
    return 5 * math.sqrt(p * (1 - p) / n)


class TestMachineProbabilities:
    def test_aligned(self):
        assert machine_probabilities(*setup(0.0)) == (1.0, 0.0)

    def test_sixty_degrees(self):
        mu1, mu2 = machine_probabilities(*setup(math.pi / 3))
        assert mu1 == pytest.approx(0.75, abs=1e-15)
        assert mu2 == pytest.approx(0.25, abs=1e-15)

    @pytest.mark.parametrize("gamma", [0.0, 0.4, 2.0, math.pi])
    def test_centre(self, gamma):
        assert machine_probabilities(*setup(gamma, radius=0.0)) == (0.5, 0.5)

    @given(w=unit_vectors(), u=unit_vectors(), r=st.floats(0, 1))
    def test_sums_to_one(self, w, u, r):
        mu1, mu2 = machine_probabilities(MachineState(w.scaled(r)), ElasticExperiment(u))
        assert mu1 + mu2 == 1.0
        assert 0.0 <= mu1 <= 1.0

    def test_equals_born_rule_pure(self, rng):
        for _ in range(500):
            v, u = random_unit(rng), random_unit(rng)
            rho = DensityOperator2.pure(spinor_from_angles(*v.angles()))
            assert machine_probabilities(MachineState(v), ElasticExperiment(u)) == pytest.approx(
                qm_probabilities(rho, u), abs=1e-12
            )

    def test_equals_born_rule_mixed(self, rng):
        for _ in range(500):
            v, u = random_unit(rng), random_unit(rng)
            lam = rng.uniform()
            psi = spinor_from_angles(*v.angles())
            rho = density_from_mixture(lam, psi, 1 - lam, psi.orthogonal())
            w = v.scaled(2 * lam - 1)
            assert machine_probabilities(MachineState(w), ElasticExperiment(u)) == pytest.approx(
                qm_probabilities(rho, u), abs=1e-12
            )

    def test_experiment_needs_unit_direction(self):
        with pytest.raises(DomainError):
            ElasticExperiment(BlochVector(0, 0, 0.5))


class TestTrials:
    def test_tie_goes_to_o1(self):
        # u = 0.5 gives b = 0 exactly
        assert machine_outcomes(0.0, np.array([0.5]))[0] == Outcome.O1
        assert machine_outcomes(0.0, np.array([0.5 + 1e-12]))[0] == Outcome.O2

    def test_aligned_always_o1(self, rng):
        state, exp = setup(0.0)
        assert all(run_machine_trial(state, exp, rng) is Outcome.O1 for _ in range(1000))

    def test_antialigned_always_o2(self, rng):
        state, exp = setup(math.pi)
        assert all(run_machine_trial(state, exp, rng) is Outcome.O2 for _ in range(1000))

    def test_single_trial_frequency(self):
        state, exp = setup(math.pi / 3)
        rng = np.random.default_rng(3)
        n = 20_000
        hits = sum(run_machine_trial(state, exp, rng) is Outcome.O1 for _ in range(n))
        assert abs(hits / n - 0.75) < five_sigma(0.75, n)

    @pytest.mark.parametrize("gamma,radius,p", [(math.pi / 3, 1.0, 0.75), (math.pi / 2, 0.5, 0.5), (2.2, 0.3, None)])
    def test_batch_frequency(self, gamma, radius, p):
        state, exp = setup(gamma, radius)
        if p is None:
            p = machine_probabilities(state, exp)[0]
        n = 10**6
        codes = machine_outcomes(state.position.dot(exp.direction), np.random.default_rng(11).random(n))
        freq = np.mean(codes == Outcome.O1)
        assert abs(freq - p) < five_sigma(p, n)
