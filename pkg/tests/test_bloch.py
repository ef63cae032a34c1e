import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qmachine.bloch import (
    BlochVector,
    DensityOperator2,
    SpinState,
    angle_between,
    bloch_map,
    density_from_mixture,
    qm_probabilities,
    spin_operator,
    spinor_from_angles,
)
from qmachine.errors import DomainError

from conftest import angles_phi, angles_theta, random_unit, unit_vectors

Z = BlochVector(0, 0, 1)
X = BlochVector(1, 0, 0)


class TestSpinor:
    def test_north_pole(self):
        s = spinor_from_angles(0.0, 0.0)
        assert s.amplitude_plus == 1
        assert s.amplitude_minus == 0

    def test_south_pole(self):
        s = spinor_from_angles(math.pi, 0.0)
        assert abs(s.amplitude_plus) < 1e-16
        assert s.amplitude_minus == pytest.approx(1.0)

    def test_equator(self):
        s = spinor_from_angles(math.pi / 2, 0.0)
        assert s.amplitude_plus == pytest.approx(1 / math.sqrt(2), abs=1e-15)
        assert s.amplitude_minus == pytest.approx(1 / math.sqrt(2), abs=1e-15)

    def test_phase_convention(self):
        theta, phi = 1.1, 2.3
        s = spinor_from_angles(theta, phi)
        assert s.amplitude_plus == pytest.approx(math.cos(theta / 2) * np.exp(-0.5j * phi), abs=1e-15)
        assert s.amplitude_minus == pytest.approx(math.sin(theta / 2) * np.exp(0.5j * phi), abs=1e-15)

    @pytest.mark.parametrize("theta", [-1e-9, math.pi + 1e-9, float("nan")])
    def test_theta_out_of_range(self, theta):
        with pytest.raises(DomainError):
            spinor_from_angles(theta, 0.0)

    def test_unnormalized_state_rejected(self):
        with pytest.raises(DomainError):
            SpinState(1.0, 1.0)

    def test_zero_state_rejected(self):
        with pytest.raises(DomainError):
            SpinState.normalized(0, 0)


class TestBlochMap:
    def test_basis(self):
        assert bloch_map(SpinState(1, 0)) == BlochVector(0, 0, 1)

    def test_equator(self):
        w = bloch_map(SpinState.normalized(1, 1))
        assert (w.x, w.y, w.z) == pytest.approx((1, 0, 0), abs=1e-15)

    def test_round_trip_grid(self):
        thetas = np.linspace(0, math.pi, 22)[1:-1]
        phis = np.linspace(0, 2 * math.pi, 20, endpoint=False)
        for theta in thetas:
            for phi in phis:
                t, p = bloch_map(spinor_from_angles(theta, phi)).angles()
                assert t == pytest.approx(theta, abs=1e-10)
                dphi = (p - phi + math.pi) % (2 * math.pi) - math.pi
                assert abs(dphi) < 1e-10

    @pytest.mark.parametrize("phi", [0.0, 1.0, 4.0])
    def test_poles_ignore_phi(self, phi):
        n = bloch_map(spinor_from_angles(0.0, phi))
        s = bloch_map(spinor_from_angles(math.pi, phi))
        assert n.as_array() == pytest.approx([0, 0, 1], abs=1e-15)
        assert s.as_array() == pytest.approx([0, 0, -1], abs=1e-15)
        assert n.angles() == (0.0, 0.0)
        assert s.angles()[1] == 0.0

    def test_zero_vector_has_no_angles(self):
        with pytest.raises(DomainError):
            BlochVector(0, 0, 0).angles()

    @given(theta=angles_theta, phi=angles_phi)
    def test_inverse_up_to_phase(self, theta, phi):
        s = spinor_from_angles(theta, phi)
        t, p = bloch_map(s).angles()
        assert s.same_ray(spinor_from_angles(t, p), tol=1e-9)

    def test_norm_bound(self):
        with pytest.raises(DomainError):
            BlochVector(1, 1, 0)
        assert BlochVector(1 + 1e-13, 0, 0).is_pure


class TestSpinOperator:
    def test_sigma_z(self):
        assert spin_operator(Z) == pytest.approx(np.diag([0.5, -0.5]))

    def test_sigma_x(self):
        assert spin_operator(X) == pytest.approx(0.5 * np.array([[0, 1], [1, 0]]))

    def test_eigenvalues(self, rng):
        for _ in range(200):
            ev = np.linalg.eigvalsh(spin_operator(random_unit(rng)))
            assert ev == pytest.approx([-0.5, 0.5], abs=1e-12)

    def test_non_unit_rejected(self):
        with pytest.raises(DomainError):
            spin_operator(BlochVector(0, 0, 0.5))


def eigen_oracle(rho: np.ndarray, u: BlochVector) -> float:
    """Tr(rho P+) with P+ built from a numerical eigenvector."""
    vals, vecs = np.linalg.eigh(spin_operator(u))
    e = vecs[:, np.argmax(vals)]
    return float(np.real(e.conj() @ rho @ e))


class TestQMProbabilities:
    def test_equator_half(self):
        p = qm_probabilities(DensityOperator2.pure(spinor_from_angles(math.pi / 2, 0.3)), Z)
        assert p == pytest.approx((0.5, 0.5), abs=1e-15)

    def test_aligned(self):
        assert qm_probabilities(DensityOperator2.pure(SpinState(1, 0)), Z) == (1.0, 0.0)

    def test_pure_matches_cos2(self, rng):
        for _ in range(300):
            v, u = random_unit(rng), random_unit(rng)
            theta, phi = v.angles()
            rho = DensityOperator2.pure(spinor_from_angles(theta, phi))
            gamma = angle_between(u, bloch_map(spinor_from_angles(theta, phi)))
            p_plus, p_minus = qm_probabilities(rho, u)
            assert p_plus == pytest.approx(math.cos(gamma / 2) ** 2, abs=1e-12)
            assert p_minus == pytest.approx(math.sin(gamma / 2) ** 2, abs=1e-12)
            assert p_plus == pytest.approx(eigen_oracle(rho.matrix, u), abs=1e-12)

    def test_mixture_formula(self, rng):
        for _ in range(300):
            r = rng.uniform(0, 1)
            w = random_unit(rng).scaled(r)
            u = random_unit(rng)
            rho = DensityOperator2.from_bloch(w)
            p_plus, _ = qm_probabilities(rho, u)
            cos_g = w.dot(u) / r if r > 0 else 0.0
            assert p_plus == pytest.approx((1 + r * cos_g) / 2, abs=1e-12)
            assert p_plus == pytest.approx(eigen_oracle(rho.matrix, u), abs=1e-12)

    @settings(max_examples=200)
    @given(w=unit_vectors(), u=unit_vectors(), r=st.floats(0, 1))
    def test_normalized(self, w, u, r):
        p_plus, p_minus = qm_probabilities(DensityOperator2.from_bloch(w.scaled(r)), u)
        assert 0.0 <= p_plus <= 1.0 and 0.0 <= p_minus <= 1.0
        assert abs(p_plus + p_minus - 1.0) <= 1e-12


class TestAngle:
    def test_cases(self):
        assert angle_between(Z, Z) == 0.0
        assert angle_between(Z, -Z) == pytest.approx(math.pi)
        assert angle_between(Z, X) == pytest.approx(math.pi / 2)

    def test_clamped(self):
        a = BlochVector(0.6, 0.8, 0.0)
        assert angle_between(a, a) == 0.0

    def test_zero(self):
        with pytest.raises(DomainError):
            angle_between(Z, BlochVector(0, 0, 0))


class TestDensityFromMixture:
    def setup_method(self):
        self.psi1 = spinor_from_angles(0.7, 1.9)
        self.psi2 = self.psi1.orthogonal()

    def test_orthogonal_partner_is_antipode(self):
        v1 = bloch_map(self.psi1)
        v2 = bloch_map(self.psi2)
        assert v2.as_array() == pytest.approx(-v1.as_array(), abs=1e-15)
        assert abs(self.psi1.inner(self.psi2)) < 1e-15

    def test_maximally_mixed(self):
        rho = density_from_mixture(0.5, self.psi1, 0.5, self.psi2)
        assert rho.matrix == pytest.approx(0.5 * np.eye(2), abs=1e-15)
        assert rho.bloch_vector().norm == pytest.approx(0.0, abs=1e-15)

    def test_pure_limit(self):
        rho = density_from_mixture(1.0, self.psi1, 0.0, self.psi2)
        assert rho.matrix == pytest.approx(self.psi1.projector(), abs=1e-15)
        assert rho.bloch_vector().norm == pytest.approx(1.0, abs=1e-12)

    def test_three_quarters(self):
        rho = density_from_mixture(0.75, self.psi1, 0.25, self.psi2)
        w = rho.bloch_vector()
        assert w.norm == pytest.approx(0.5, abs=1e-12)
        expected = 0.5 * bloch_map(self.psi1).as_array()
        assert w.as_array() == pytest.approx(expected, abs=1e-12)

    def test_non_orthogonal(self):
        with pytest.raises(DomainError):
            density_from_mixture(0.5, self.psi1, 0.5, spinor_from_angles(0.1, 0.0))

    def test_weights(self):
        with pytest.raises(DomainError):
            density_from_mixture(0.6, self.psi1, 0.6, self.psi2)
        with pytest.raises(DomainError):
            density_from_mixture(1.2, self.psi1, -0.2, self.psi2)

    def test_invalid_density(self):
        with pytest.raises(DomainError):
            DensityOperator2([[1, 0], [0, 1]])
        with pytest.raises(DomainError):
            DensityOperator2([[1.5, 0], [0, -0.5]])
        with pytest.raises(DomainError):
            DensityOperator2([[0.5, 1], [0, 0.5]])
