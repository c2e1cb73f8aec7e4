import io
import math

import numpy as np
import pytest
import scipy.io

from spectralab.assemble import (
    SparseSymMatrix,
    assemble,
    rayleigh_quotient,
    write_matrix_market,
)
from spectralab.coeffs import SpdViolationError, preset, with_shifted_eta
from spectralab.domain import Interval, Rectangle, build_mesh, refine
from spectralab.eigen import dense_oracle

PI = math.pi


def gauss2(f, a, b):
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    off = half / math.sqrt(3.0)
    return half * (f(mid - off) + f(mid + off))


class TestTextbookMatrices:
    def test_interval_laplacian_3_elements(self, interval_spec, problem_cache):
        _, _, dp = problem_cache(interval_spec, 3, "laplacian", 1)
        h = PI / 3.0
        np.testing.assert_allclose(
            dp.stiffness.to_dense(), np.array([[2.0, -1.0], [-1.0, 2.0]]) / h, rtol=1e-14
        )
        np.testing.assert_allclose(
            dp.mass.to_dense(),
            h * np.array([[2.0 / 3.0, 1.0 / 6.0], [1.0 / 6.0, 2.0 / 3.0]]),
            rtol=1e-14,
        )

    def test_constant_tensor_scales_stiffness_exactly(self, interval_spec, problem_cache):
        _, _, base = problem_cache(interval_spec, 3, "laplacian", 1)
        _, _, scaled = problem_cache(interval_spec, 3, "const_T", 1, matrix=[[4.0]])
        # scaling by a power of two is exact in floating point
        np.testing.assert_array_equal(scaled.stiffness.vals, 4.0 * base.stiffness.vals)
        np.testing.assert_array_equal(scaled.mass.vals, base.mass.vals)

    def test_generic_tensor_scaling(self, interval_spec):
        mesh = build_mesh(interval_spec, 5)
        base = assemble(mesh, preset("laplacian", 1))
        scaled = assemble(mesh, preset("const_T", 1, matrix=[[3.0]]))
        np.testing.assert_allclose(scaled.stiffness.vals, 3.0 * base.stiffness.vals, rtol=1e-15)
        lam0 = dense_oracle(base).eigenvalues
        lam3 = dense_oracle(scaled).eigenvalues
        np.testing.assert_allclose(lam3, 3.0 * lam0, rtol=1e-12)


class TestWeightedAssembly:
    def test_drifted_entries_reproduce_the_quadrature_rule(self, interval_spec):
        # independent re-evaluation of the fixed 2-point rule, entry by entry
        mesh = build_mesh(interval_spec, 3)
        dp = assemble(mesh, preset("drifted_linear", 1, c=1.0))
        h = PI / 3.0
        w = lambda x: math.exp(-x)
        a11 = (gauss2(w, 0.0, h) + gauss2(w, h, 2 * h)) / h**2
        a22 = (gauss2(w, h, 2 * h) + gauss2(w, 2 * h, PI)) / h**2
        a12 = -gauss2(w, h, 2 * h) / h**2
        np.testing.assert_allclose(
            dp.stiffness.to_dense(), [[a11, a12], [a12, a22]], rtol=1e-10
        )

    def test_quadrature_error_is_within_theory(self, interval_spec):
        # against a near-exact composite rule the fixed rule's O(h^4)
        # coefficient error must stay below 1e-3 relative on h = pi/3
        mesh = build_mesh(interval_spec, 3)
        dp = assemble(mesh, preset("drifted_linear", 1, c=1.0))
        w = lambda x: math.exp(-x)
        h = PI / 3.0

        def composite(a, b, panels=1000):
            xs = np.linspace(a, b, panels + 1)
            return sum(gauss2(w, xs[i], xs[i + 1]) for i in range(panels))

        exact_a11 = (composite(0.0, h) + composite(h, 2 * h)) / h**2
        assembled = dp.stiffness.to_dense()[0, 0]
        assert abs(assembled - exact_a11) / exact_a11 < 1e-3
        assert abs(assembled - exact_a11) / exact_a11 > 1e-12  # rule is not exact here

    def test_weight_shift_scales_matrices(self, interval_spec):
        mesh = build_mesh(interval_spec, 6)
        base_field = preset("drifted_linear", 1, c=0.5)
        shifted_field = with_shifted_eta(base_field, 1.7)
        base = assemble(mesh, base_field)
        shifted = assemble(mesh, shifted_field)
        factor = math.exp(-1.7)
        np.testing.assert_allclose(shifted.stiffness.vals, factor * base.stiffness.vals, rtol=1e-14)
        np.testing.assert_allclose(shifted.mass.vals, factor * base.mass.vals, rtol=1e-14)
        np.testing.assert_allclose(
            dense_oracle(shifted).eigenvalues, dense_oracle(base).eigenvalues, rtol=1e-12
        )

    def test_spd_violation_names_quadrature_point(self, interval_spec):
        mesh = build_mesh(interval_spec, 8)
        with pytest.raises(SpdViolationError, match="quadrature point"):
            assemble(mesh, preset("scalar_T", 1, poly=[1.0, -1.0, 0.0]))


class TestMatrixProperties:
    @pytest.mark.parametrize("res,kind", [(12, "interval"), (6, "square")])
    def test_bitwise_symmetry(self, res, kind, interval_spec, square_spec):
        spec = interval_spec if kind == "interval" else square_spec
        n = spec.n
        mesh = build_mesh(spec, res)
        dp = assemble(mesh, preset("gaussian_soliton", n))
        for mat in (dp.stiffness, dp.mass):
            c = mat.to_csr().tocoo()
            ct = mat.to_csr().T.tocoo()
            order = np.lexsort((c.col, c.row))
            order_t = np.lexsort((ct.col, ct.row))
            assert np.array_equal(c.data[order], ct.data[order_t])

    def test_positive_definiteness_sampled(self, square_spec):
        mesh = build_mesh(square_spec, 5)
        dp = assemble(mesh, preset("drifted_linear", 2, c=1.0))
        A = dp.stiffness.to_csr()
        M = dp.mass.to_csr()
        rng = np.random.default_rng(11)
        for _ in range(100):
            v = rng.standard_normal(dp.dimension)
            assert v @ (A @ v) > 0.0
            assert v @ (M @ v) > 0.0

    def test_dimension_is_interior_count(self, square_spec):
        mesh = build_mesh(square_spec, 4)
        dp = assemble(mesh, preset("laplacian", 2))
        assert dp.dimension == int((~mesh.boundary_mask).sum()) == 9
        assert np.all(dp.vertex_to_unknown[mesh.boundary_mask] == -1)
        assert np.array_equal(
            dp.vertex_to_unknown[dp.unknown_to_vertex], np.arange(dp.dimension)
        )

    def test_no_explicit_zeros(self, square_spec):
        mesh = build_mesh(square_spec, 6)
        dp = assemble(mesh, preset("laplacian", 2))
        assert np.all(dp.stiffness.vals != 0.0)
        assert np.all(dp.mass.vals != 0.0)

    def test_dimension_mismatch_raises(self, interval_spec):
        mesh = build_mesh(interval_spec, 4)
        with pytest.raises(ValueError, match="chart dimension"):
            assemble(mesh, preset("laplacian", 2))


class TestRayleighQuotient:
    def test_eigenvector_gives_eigenvalue(self, interval_spec, problem_cache):
        _, _, dp = problem_cache(interval_spec, 24, "laplacian", 1)
        sp = dense_oracle(dp)
        rq = rayleigh_quotient(dp, sp.eigenvectors[:, 0])
        assert rq == pytest.approx(sp.eigenvalues[0], rel=1e-12)

    def test_minimum_principle(self, interval_spec, problem_cache):
        _, _, dp = problem_cache(interval_spec, 24, "laplacian", 1)
        lam1 = dense_oracle(dp).eigenvalues[0]
        rng = np.random.default_rng(5)
        for _ in range(25):
            assert rayleigh_quotient(dp, rng.standard_normal(dp.dimension)) >= lam1 - 1e-12

    def test_sin_interpolant_approaches_one_from_above(self, interval_spec):
        mesh = build_mesh(interval_spec, 16)
        values = []
        for _ in range(3):
            dp = assemble(mesh, preset("laplacian", 1))
            v = np.sin(mesh.vertices[~mesh.boundary_mask, 0])
            values.append(rayleigh_quotient(dp, v))
            mesh = refine(mesh)
        assert all(v >= 1.0 for v in values)
        assert values[0] > values[1] > values[2]
        assert values[2] == pytest.approx(1.0, abs=1e-3)

    def test_zero_vector_rejected(self, interval_spec, problem_cache):
        _, _, dp = problem_cache(interval_spec, 8, "laplacian", 1)
        with pytest.raises(ValueError, match="zero vector"):
            rayleigh_quotient(dp, np.zeros(dp.dimension))
        with pytest.raises(ValueError, match="dimension"):
            rayleigh_quotient(dp, np.ones(3))


class TestSparseSymMatrix:
    def test_duplicate_folding(self):
        mat = SparseSymMatrix.from_coo(3, [0, 1, 2, 2], [1, 0, 2, 2], [1.0, 2.0, 3.0, -3.0])
        # (0,1) and (1,0) fold into one upper entry; (2,2) cancels out
        assert mat.nnz == 1
        assert mat.rows.tolist() == [0] and mat.cols.tolist() == [1]
        assert mat.vals.tolist() == [3.0]

    def test_add_scaled(self):
        a = SparseSymMatrix.from_coo(2, [0, 1], [0, 1], [1.0, 2.0])
        b = SparseSymMatrix.from_coo(2, [0, 0], [0, 1], [1.0, 1.0])
        c = a.add_scaled(b, 2.0)
        np.testing.assert_allclose(c.to_dense(), [[3.0, 2.0], [2.0, 2.0]])

    def test_matrix_market_round_trip(self, square_spec):
        mesh = build_mesh(square_spec, 4)
        dp = assemble(mesh, preset("laplacian", 2))
        buf = io.StringIO()
        write_matrix_market(dp.stiffness, buf)
        buf.seek(0)
        back = scipy.io.mmread(buf)
        np.testing.assert_allclose(back.toarray(), dp.stiffness.to_dense(), rtol=1e-15)
        buf.seek(0)
        assert buf.readline().strip() == "%%MatrixMarket matrix coordinate real symmetric"
