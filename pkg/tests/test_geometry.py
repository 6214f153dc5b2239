import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from geocano.errors import DegenerateColumns, NonSymmetric
from geocano.geometry import (
    RigidTransform,
    gram_schmidt,
    orthogonality_error,
    random_euclidean,
    random_reflection,
    random_rotation,
    rotation_z,
    sym_eig3,
)

from oracles import cubic_eigenvalues


def random_symmetric(rng, count, low=-10.0, high=10.0):
    a = rng.uniform(low, high, size=(count, 3, 3))
    return 0.5 * (a + np.swapaxes(a, 1, 2))


class TestSymEig3:
    def test_identity(self):
        dec = sym_eig3(np.eye(3))
        np.testing.assert_array_equal(dec.values, [1.0, 1.0, 1.0])
        np.testing.assert_array_equal(dec.vectors, np.eye(3))

    def test_diagonal(self):
        dec = sym_eig3(np.diag([3.0, 2.0, 1.0]))
        np.testing.assert_array_equal(dec.values, [3.0, 2.0, 1.0])
        np.testing.assert_array_equal(dec.vectors, np.eye(3))

    def test_unsorted_diagonal_is_sorted(self):
        dec = sym_eig3(np.diag([1.0, 5.0, -2.0]))
        np.testing.assert_array_equal(dec.values, [5.0, 1.0, -2.0])
        np.testing.assert_allclose(dec.reconstruct(), np.diag([1.0, 5.0, -2.0]), atol=1e-15)

    def test_against_cubic_root_oracle(self):
        rng = np.random.default_rng(11)
        for m in random_symmetric(rng, 300):
            expected = cubic_eigenvalues(m)
            got = sym_eig3(m).values
            assert np.max(np.abs(got - expected)) < 1e-9

    def test_bulk_reconstruction_and_orthogonality(self):
        rng = np.random.default_rng(12)
        worst_rec, worst_orth = 0.0, 0.0
        for m in random_symmetric(rng, 10_000):
            dec = sym_eig3(m)
            worst_rec = max(worst_rec, float(np.max(np.abs(dec.reconstruct() - m))))
            worst_orth = max(worst_orth, orthogonality_error(dec.vectors))
        assert worst_rec < 1e-9
        assert worst_orth < 1e-9

    def test_matches_numpy_eigvalsh(self):
        rng = np.random.default_rng(13)
        for m in random_symmetric(rng, 200):
            np.testing.assert_allclose(sym_eig3(m).values, np.linalg.eigvalsh(m)[::-1], atol=1e-10)

    def test_sign_convention(self):
        rng = np.random.default_rng(14)
        for m in random_symmetric(rng, 200):
            vecs = sym_eig3(m).vectors
            for col in vecs.T:
                assert col[np.argmax(np.abs(col))] > 0

    def test_repeated_eigenvalue(self):
        r = random_rotation(3).rotation
        m = r @ np.diag([2.0, 2.0, -1.0]) @ r.T
        dec = sym_eig3(m)
        np.testing.assert_allclose(dec.values, [2.0, 2.0, -1.0], atol=1e-12)
        np.testing.assert_allclose(dec.reconstruct(), m, atol=1e-12)
        assert orthogonality_error(dec.vectors) < 1e-12

    def test_scaled_identity_rotated(self):
        m = 4.0 * np.eye(3)
        m[0, 1] = m[1, 0] = 1e-300
        dec = sym_eig3(m)
        np.testing.assert_allclose(dec.values, [4.0, 4.0, 4.0])

    def test_nonsymmetric_rejected(self):
        m = np.eye(3)
        m[0, 1] = 1.0
        with pytest.raises(NonSymmetric):
            sym_eig3(m)

    def test_wrong_shape_rejected(self):
        with pytest.raises(NonSymmetric):
            sym_eig3(np.eye(2))

    @settings(max_examples=200, deadline=None)
    @given(arrays(np.float64, (3, 3), elements=st.floats(-1e3, 1e3)))
    def test_property_reconstruction(self, a):
        m = 0.5 * (a + a.T)
        dec = sym_eig3(m)
        scale = max(1.0, float(np.max(np.abs(m))))
        assert np.max(np.abs(dec.reconstruct() - m)) < 1e-10 * scale
        assert orthogonality_error(dec.vectors) < 1e-10
        assert np.all(np.diff(dec.values) <= 0)


class TestGramSchmidt:
    def test_hand_example(self):
        m = np.column_stack([[1, 0, 0], [1, 1, 0], [1, 1, 1]]).astype(float)
        np.testing.assert_allclose(gram_schmidt(m), np.eye(3), atol=1e-15)

    def test_orthogonal_input_unchanged(self):
        r = random_rotation(5).rotation
        np.testing.assert_allclose(gram_schmidt(r), r, atol=1e-12)

    def test_idempotent(self):
        rng = np.random.default_rng(6)
        for _ in range(100):
            q = gram_schmidt(rng.standard_normal((3, 3)))
            np.testing.assert_allclose(gram_schmidt(q), q, atol=1e-12)

    def test_sweep_of_random_matrices(self):
        rng = np.random.default_rng(7)
        worst = max(orthogonality_error(gram_schmidt(rng.standard_normal((3, 3)))) for _ in range(1000))
        assert worst < 1e-10

    def test_flag_preserved(self):
        rng = np.random.default_rng(8)
        m = rng.standard_normal((3, 3))
        q = gram_schmidt(m)
        # q = m @ upper-triangular with positive diagonal
        r = q.T @ m
        np.testing.assert_allclose(np.tril(r, -1), 0.0, atol=1e-12)
        assert np.all(np.diag(r) > 0)

    def test_dependent_columns(self):
        m = np.column_stack([[1, 2, 3], [2, 4, 6], [0, 0, 1]]).astype(float)
        with pytest.raises(DegenerateColumns):
            gram_schmidt(m)

    def test_zero_column(self):
        with pytest.raises(DegenerateColumns):
            gram_schmidt(np.zeros((3, 3)))


class TestRandomTransforms:
    def test_rotation_deterministic(self):
        a = random_rotation(42).rotation
        b = random_rotation(42).rotation
        np.testing.assert_array_equal(a, b)

    def test_rotation_orthogonal_and_proper(self):
        rng = np.random.default_rng(0)
        for _ in range(500):
            g = random_rotation(rng)
            assert orthogonality_error(g.rotation) < 1e-12
            assert g.det == pytest.approx(1.0, abs=1e-12)

    def test_haar_first_entry_mean(self):
        rng = np.random.default_rng(1)
        vals = [random_rotation(rng).rotation[0, 0] for _ in range(10_000)]
        assert abs(np.mean(vals)) < 0.02

    def test_haar_trace_distribution(self):
        # under Haar measure E[tr R] = 0 and E[tr R^2] = 1
        rng = np.random.default_rng(2)
        tr = np.array([np.trace(random_rotation(rng).rotation) for _ in range(10_000)])
        assert abs(tr.mean()) < 0.05
        assert abs((tr**2).mean() - 1.0) < 0.1

    def test_composition_with_reflection(self):
        r = random_rotation(3).rotation
        assert np.linalg.det(r @ np.diag([1.0, 1.0, -1.0])) == pytest.approx(-1.0, abs=1e-12)

    def test_random_reflection(self):
        g = random_reflection(4)
        assert g.det == pytest.approx(-1.0, abs=1e-12)
        np.testing.assert_allclose(g.rotation @ g.rotation, np.eye(3), atol=1e-12)

    def test_random_euclidean_forced_parity(self):
        assert random_euclidean(1, reflect=True).det < 0
        assert random_euclidean(1, reflect=False).det > 0

    def test_rotation_z_quarter_turn(self):
        np.testing.assert_allclose(rotation_z(np.pi / 2).apply([[1.0, 0.0, 0.0]]), [[0.0, 1.0, 0.0]], atol=1e-15)


class TestRigidTransform:
    def test_inverse_roundtrip(self):
        rng = np.random.default_rng(9)
        g = random_euclidean(rng)
        x = rng.standard_normal((10, 3))
        np.testing.assert_allclose(g.inverse().apply(g.apply(x)), x, atol=1e-12)
        np.testing.assert_allclose(g.apply_inverse(g.apply(x)), x, atol=1e-12)

    def test_compose_order(self):
        rng = np.random.default_rng(10)
        g, h = random_euclidean(rng), random_euclidean(rng)
        x = rng.standard_normal((5, 3))
        np.testing.assert_allclose(g.compose(h).apply(x), g.apply(h.apply(x)), atol=1e-12)

    def test_rotate_ignores_translation(self):
        g = RigidTransform(np.eye(3), [1.0, 2.0, 3.0])
        np.testing.assert_array_equal(g.rotate([[1.0, 0.0, 0.0]]), [[1.0, 0.0, 0.0]])
