import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hypobridge.errors import NonFinite, NotControllable, ShapeMismatch
from hypobridge.fluct import u_hat
from hypobridge.matcore import expm
from hypobridge.model import (adapted, adjoint_power, build_model, controllability_matrix,
                              filtration, principal_part, scaled_pair, u_blocks)
from hypobridge.presets import preset
from oracles import random_controllable

KOL_A = [[0.0, 0.0], [1.0, 0.0]]
E1 = [[1.0], [0.0]]


@st.composite
def random_specs(draw, max_d=5, max_m=2):
    seed = draw(st.integers(0, 2**32 - 1))
    d = draw(st.integers(1, max_d))
    m = draw(st.integers(1, min(max_m, d)))
    A, B = random_controllable(np.random.default_rng(seed), d, m)
    return build_model(A, B)


def _project_out(basis, M):
    return M - basis @ (basis.T @ M)


class TestBuildModel:
    def test_kolmogorov(self):
        spec = build_model(KOL_A, E1)
        assert (spec.d, spec.m) == (2, 1)

    def test_sec43_valid(self):
        assert build_model([[-1.0, 0.0], [1.0, 2.0]], E1).d == 2

    def test_not_controllable_reports_rank(self):
        with pytest.raises(NotControllable) as exc:
            build_model(np.zeros((2, 2)), E1)
        assert exc.value.rank == 1 and exc.value.dim == 2
        assert "rank 1" in str(exc.value)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatch):
            build_model(np.zeros((2, 3)), E1)
        with pytest.raises(ShapeMismatch):
            build_model(KOL_A, [[1.0], [0.0], [0.0]])

    def test_non_finite(self):
        with pytest.raises(NonFinite, match=r"A\[1\]\[1\]"):
            build_model([[0.0, 0.0], [1.0, np.nan]], E1)

    def test_arrays_read_only(self):
        spec = build_model(KOL_A, E1)
        with pytest.raises(ValueError):
            spec.A[0, 0] = 1.0

    def test_flat_b_is_column(self):
        assert build_model(KOL_A, [1.0, 0.0]).B.shape == (2, 1)


class TestFiltration:
    def test_kolmogorov(self):
        f = build_model(KOL_A, E1).filt
        assert f.n == 2 and f.dims == (1, 2)
        np.testing.assert_array_equal(f.basis, np.eye(2))

    def test_iterated_four(self):
        f = preset("iterated_kolmogorov", 4).spec.filt
        assert f.n == 4 and f.dims == (1, 2, 3, 4)
        np.testing.assert_array_equal(f.basis, np.eye(4))

    def test_full_noise_single_level(self):
        A = np.random.default_rng(0).standard_normal((3, 3))
        f = build_model(A, np.eye(3)).filt
        assert f.n == 1 and f.dims == (3,)

    def test_rotated_model_is_not_identity(self):
        theta = 0.3
        R = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
        spec = build_model(R @ np.array(KOL_A) @ R.T, R @ np.array(E1))
        f = spec.filt
        assert f.dims == (1, 2)
        assert abs(abs(f.basis[:, 0] @ R[:, 0]) - 1) < 1e-14

    @given(random_specs())
    def test_invariants(self, spec):
        f = spec.filt
        Qb = f.basis
        np.testing.assert_allclose(Qb.T @ Qb, np.eye(spec.d), atol=1e-10)
        assert f.dims[-1] == spec.d
        assert all(a < b for a, b in zip(f.dims, f.dims[1:]))
        assert f.n == 1 or f.dims[-2] < spec.d
        for k, dk in enumerate(f.dims, start=1):
            C = controllability_matrix(spec.A, spec.B, k)
            span = Qb[:, :dk]
            assert np.abs(_project_out(span, C)).max() <= 1e-8 * max(1.0, np.abs(C).max())
            # and the first d_k basis vectors lie inside that span
            cq = np.linalg.qr(C)[0][:, :np.linalg.matrix_rank(C)]
            assert np.abs(_project_out(cq, span)).max() <= 1e-8

    @given(random_specs(max_m=3), st.integers(0, 2**32 - 1))
    def test_dims_invariant_under_noise_rotation(self, spec, seed):
        O = np.linalg.qr(np.random.default_rng(seed).standard_normal((spec.m, spec.m)))[0]
        assert build_model(spec.A, spec.B @ O).filt.dims == spec.filt.dims

    def test_rank_tolerance_override(self):
        spec = build_model(KOL_A, E1)
        assert filtration(spec, 1e-6).dims == (1, 2)


class TestUBlocks:
    @pytest.mark.parametrize("name", ["kolmogorov", "ou_area", "sec43"])
    def test_two_dim_presets(self, name):
        ub = u_blocks(preset(name).spec)
        assert [u.tolist() for u in ub.blocks] == [[[1.0]], [[1.0]]]

    def test_iterated(self):
        ub = u_blocks(preset("iterated_kolmogorov", 5).spec)
        expected = [1.0, 1.0, 0.5, 1.0 / 6.0, 1.0 / 24.0]
        np.testing.assert_allclose([u[0, 0] for u in ub.blocks], expected, rtol=1e-15)

    @given(random_specs(max_m=3))
    def test_shapes_and_full_row_rank(self, spec):
        ub = u_blocks(spec)
        assert ub.dims == spec.filt.dims
        assert ub.n == spec.filt.n and ub.m == spec.m
        for u in ub.blocks:
            assert np.linalg.matrix_rank(u) == u.shape[0]

    @given(random_specs(max_d=4), st.integers(0, 2**32 - 1))
    def test_invariant_under_filtration_preserving_perturbation(self, spec, seed):
        f = spec.filt
        lev = f.levels
        Nb = np.random.default_rng(seed).standard_normal((spec.d, spec.d))
        Nb[lev[:, None] > lev[None, :]] = 0.0  # maps each E_k into itself
        perturbed = build_model(spec.A + f.basis @ Nb @ f.basis.T, spec.B)
        assert perturbed.filt.dims == f.dims
        for u, v in zip(u_blocks(spec).blocks, u_blocks(perturbed).blocks):
            np.testing.assert_allclose(u, v, atol=1e-10)


class TestPrincipalPart:
    def test_kolmogorov(self):
        spec = preset("kolmogorov").spec
        np.testing.assert_array_equal(principal_part(spec), spec.A)

    def test_ou_area(self):
        np.testing.assert_array_equal(principal_part(preset("ou_area").spec), KOL_A)

    def test_full_noise(self):
        A = np.random.default_rng(1).standard_normal((3, 3))
        np.testing.assert_array_equal(principal_part(build_model(A, np.eye(3))), 0.0)

    @given(random_specs(max_m=3))
    def test_powers_move_one_level(self, spec):
        f = spec.filt
        Ah = principal_part(spec)
        _, B_ad = adapted(spec)
        P = B_ad.copy()
        for l in range(f.n + 1):
            outside = np.ones(spec.d, dtype=bool)
            if l < f.n:
                outside[f.block(l + 1)] = False
            assert np.abs(P[outside]).max(initial=0.0) <= 1e-10 * max(1.0, np.abs(B_ad).max())
            P = Ah @ P

    @given(random_specs(max_m=2), st.lists(st.floats(-1, 1), min_size=20, max_size=20))
    def test_uhat_is_exponential_of_principal_part(self, spec, rs):
        Ah = principal_part(spec)
        _, B_ad = adapted(spec)
        ub = u_blocks(spec)
        for r in rs:
            np.testing.assert_allclose(u_hat(ub, r), expm(r * Ah) @ B_ad, atol=1e-10)


class TestAdjointPower:
    def test_zero_is_b(self):
        spec = preset("kolmogorov").spec
        np.testing.assert_array_equal(adjoint_power(spec, 0), spec.B)

    def test_kolmogorov_first(self):
        np.testing.assert_array_equal(adjoint_power(preset("kolmogorov").spec, 1), [[0.0], [-1.0]])

    def test_iterated_second(self):
        np.testing.assert_array_equal(adjoint_power(preset("iterated_kolmogorov", 3).spec, 2),
                                      [[0.0], [0.0], [1.0]])

    def test_negative(self):
        with pytest.raises(ValueError):
            adjoint_power(preset("kolmogorov").spec, -1)

    @given(random_specs(max_m=3))
    def test_spans_reproduce_filtration(self, spec):
        f = spec.filt
        for k, dk in enumerate(f.dims, start=1):
            cols = np.hstack([adjoint_power(spec, l) for l in range(k)])
            span = f.basis[:, :dk]
            assert np.abs(_project_out(span, cols)).max() <= 1e-8 * max(1.0, np.abs(cols).max())
            assert np.linalg.matrix_rank(cols, tol=1e-8 * np.abs(cols).max()) == dk


class TestScaledPair:
    @given(random_specs(max_m=2), st.floats(0.01, 1.0))
    def test_similarity(self, spec, eps):
        A_s, B_s = scaled_pair(spec, eps)
        A_ad, B_ad = adapted(spec)
        Dg = eps ** (spec.filt.levels - 1.0)
        ref = eps * (A_ad * Dg[None, :] / Dg[:, None])
        gap = spec.filt.levels[:, None] - spec.filt.levels[None, :]
        keep = gap <= 1
        np.testing.assert_allclose(A_s[keep], ref[keep], rtol=1e-12, atol=1e-14)
        assert np.all(A_s[~keep] == 0)
        np.testing.assert_allclose(B_s, B_ad, atol=1e-12)

    def test_kolmogorov_is_eps_free(self):
        spec = preset("kolmogorov").spec
        for eps in (0.01, 0.5, 1.0):
            A_s, B_s = scaled_pair(spec, eps)
            np.testing.assert_array_equal(A_s, KOL_A)
            np.testing.assert_array_equal(B_s, E1)
