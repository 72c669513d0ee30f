import numpy as np
import pytest

from barrierplan.barrier import PairPenaltyBlocks
from barrierplan.common import CONVERGED, SolverSettings, eigen_adjust
from barrierplan.ecb import (
    assemble_schur_theta,
    back_substitute_planes,
    build_workspace,
    ecb_solve,
    eliminate_plane,
)
from barrierplan.errors import InfeasibleStartError
from barrierplan.geometry import CollisionPairSet
from scenes import box_settle, quadratic_bowl, replicated_pairs, two_cube_attraction
from support import rel_err


class TestEigenAdjust:
    def test_clamps_negative_eigenvalues(self):
        H = np.diag([-1.0, 0.5, 2.0])
        out = eigen_adjust(H, 1e-3)
        assert np.allclose(np.sort(np.linalg.eigvalsh(out)), [1e-3, 0.5, 2.0], atol=1e-12)

    def test_positive_definite_is_exact_fixed_point(self):
        H = np.array([[2.0, 0.3], [0.3, 1.0]])
        assert eigen_adjust(H, 1e-3) is H

    def test_floor_applied_to_small_positive(self):
        H = np.diag([1e-6, 1.0])
        out = eigen_adjust(H, 1e-3)
        assert np.linalg.eigvalsh(out).min() >= 1e-3 - 1e-15

    def test_symmetrizes(self):
        H = np.array([[1.0, 0.5], [0.1, -1.0]])
        out = eigen_adjust(H, 0.01)
        assert np.allclose(out, out.T)
        assert np.linalg.eigvalsh(out).min() >= 0.01 - 1e-15


def _random_unit3(rng):
    v = rng.normal(size=3)
    return v / np.linalg.norm(v)


def _synthetic_blocks(rng, m, coupled=True, pd_shift=0.01, rank=5):
    """Pair blocks with the coupling structure of a real pair: theta-theta
    and mixed blocks come from shared Gram factors, the plane block is
    shifted positive definite (or indefinite when uncoupled)."""
    if coupled:
        B = rng.normal(size=(rank, m))
        C = rng.normal(size=(rank, 4))
        H_pp = C.T @ C + pd_shift * np.eye(4)
        H_ptheta = C.T @ B
        H_thth = B.T @ B
    else:
        S = rng.normal(size=(4, 4))
        H_pp = 0.5 * (S + S.T)  # generally indefinite
        H_ptheta = np.zeros((4, m))
        H_thth = np.zeros((m, m))
    return PairPenaltyBlocks(
        value=0.0,
        grad_p=rng.normal(size=4),
        grad_theta=rng.normal(size=m) if coupled else np.zeros(m),
        H_pp=H_pp,
        H_ptheta=H_ptheta,
        H_thetatheta=H_thth,
    )


def _synthetic_instance(rng, coupled=True, pd_shift=0.01):
    m = int(rng.integers(2, 21))
    n_pairs = int(rng.integers(1, 11))
    A0 = rng.normal(size=(m, m))
    obj_hess = A0.T @ A0 + pd_shift * np.eye(m)
    obj_grad = rng.normal(size=m)
    blocks = [_synthetic_blocks(rng, m, coupled=coupled, pd_shift=pd_shift) for _ in range(n_pairs)]
    normals = [_random_unit3(rng) for _ in range(n_pairs)]
    return obj_grad, obj_hess, blocks, normals


def dense_kkt_solve(obj_grad, obj_hess, blocks_list, normals, eps1):
    """Independent oracle: assemble and solve the full KKT system with the
    same floored plane blocks, planes kept explicit, one multiplier per
    unit-normal constraint."""
    m = obj_grad.size
    P = len(blocks_list)
    dim = m + 5 * P
    M = np.zeros((dim, dim))
    rhs = np.zeros(dim)
    M[:m, :m] = obj_hess + sum(b.H_thetatheta for b in blocks_list)
    rhs[:m] = -(obj_grad + sum(b.grad_theta for b in blocks_list))
    for i, (b, n) in enumerate(zip(blocks_list, normals)):
        o = m + 4 * i
        lo = m + 4 * P + i
        w, V = np.linalg.eigh(0.5 * (b.H_pp + b.H_pp.T))
        M[o : o + 4, o : o + 4] = (V * np.maximum(w, eps1)) @ V.T
        M[:m, o : o + 4] = b.H_ptheta.T
        M[o : o + 4, :m] = b.H_ptheta
        n4 = np.append(n, 0.0)
        M[o : o + 4, lo] = n4
        M[lo, o : o + 4] = n4
        rhs[o : o + 4] = -b.grad_p
    sol = np.linalg.solve(M, rhs)
    delta_theta = sol[:m]
    delta_ps = [sol[m + 4 * i : m + 4 * i + 4] for i in range(P)]
    lams = sol[m + 4 * P :]
    return delta_theta, delta_ps, lams


class TestEliminatePlane:
    def test_identity_block(self):
        elim = eliminate_plane(np.eye(4), np.array([1.0, 0.0, 0.0]), 0.1)
        assert np.allclose(elim.H_ij, np.diag([0.0, 1.0, 1.0, 1.0]), atol=1e-14)
        assert np.allclose(elim.adjusted_H_pp, np.eye(4))

    def test_annihilates_constraint_normal(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            C = rng.normal(size=(6, 4))
            H_pp = C.T @ C + 0.01 * np.eye(4)
            n = _random_unit3(rng)
            elim = eliminate_plane(H_pp, n, 1e-3)
            assert np.max(np.abs(elim.H_ij @ elim.n4)) <= 1e-10
            assert np.allclose(elim.H_ij, elim.H_ij.T)

    def test_bounded_between_zero_and_inverse(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            S = rng.normal(size=(4, 4))
            H_pp = 0.5 * (S + S.T)
            n = _random_unit3(rng)
            elim = eliminate_plane(H_pp, n, 1e-3)
            assert np.linalg.eigvalsh(elim.H_ij).min() >= -1e-10
            gap = np.linalg.eigvalsh(elim.inv_adjusted - elim.H_ij)
            assert gap.min() >= -1e-10
            assert np.linalg.eigvalsh(elim.adjusted_H_pp).min() >= 1e-3 - 1e-12

    def test_adjustment_is_fixed_point_when_positive(self):
        H_pp = np.diag([0.5, 1.0, 2.0, 3.0])
        elim = eliminate_plane(H_pp, np.array([0.0, 1.0, 0.0]), 1e-3)
        assert np.allclose(elim.adjusted_H_pp, H_pp, atol=1e-14)


class TestSchurAssembly:
    def test_no_pairs_reduces_to_objective(self):
        rng = np.random.default_rng(2)
        A = rng.normal(size=(5, 5))
        obj_hess = A.T @ A + 0.5 * np.eye(5)
        obj_grad = rng.normal(size=5)
        schur = assemble_schur_theta(obj_grad, obj_hess, [], eps2=1e-3)
        # the floor leaves an already positive definite Hessian untouched,
        # and the step solves H delta = -grad
        assert np.array_equal(schur.H_theta, obj_hess)
        assert np.array_equal(schur.H_theta, schur.H_theta_raw)
        assert np.allclose(schur.rhs, -obj_grad)
        assert np.allclose(schur.grad_theta, obj_grad)

    @pytest.mark.parametrize("coupled", [True, False])
    def test_matches_dense_kkt_oracle(self, coupled):
        rng = np.random.default_rng(3 if coupled else 4)
        eps1, eps2 = 1e-3, 1e-3
        for case in range(25):
            obj_grad, obj_hess, blocks, normals = _synthetic_instance(rng, coupled=coupled)
            if not coupled:
                # force at least one clamp to be active
                blocks[0].H_pp -= 2.0 * np.eye(4)
            elims = [eliminate_plane(b.H_pp, n, eps1) for b, n in zip(blocks, normals)]
            items = list(zip(blocks, elims))
            schur = assemble_schur_theta(obj_grad, obj_hess, items, eps2)
            # construction keeps the reduced Hessian above the floor, so the
            # Schur path and the dense path solve the same system
            assert np.linalg.eigvalsh(schur.H_theta_raw).min() >= eps2
            delta_theta = np.linalg.solve(schur.H_theta, schur.rhs)
            deltas = back_substitute_planes(items, delta_theta)
            ref_theta, ref_ps, ref_lams = dense_kkt_solve(
                obj_grad, obj_hess, blocks, normals, eps1
            )
            assert rel_err(delta_theta, ref_theta) <= 1e-8, f"case {case}"
            for (dp, lam), rp, rl in zip(deltas, ref_ps, ref_lams):
                assert rel_err(dp, rp) <= 1e-8
                assert abs(lam - rl) <= 1e-8 * max(1.0, abs(rl))
                assert abs(float(np.append(normals[0] * 0, 0) @ dp)) < np.inf  # shape guard

    def test_plane_steps_tangent_to_constraint(self):
        rng = np.random.default_rng(5)
        for _ in range(10):
            obj_grad, obj_hess, blocks, normals = _synthetic_instance(rng)
            elims = [eliminate_plane(b.H_pp, n, 1e-3) for b, n in zip(blocks, normals)]
            items = list(zip(blocks, elims))
            schur = assemble_schur_theta(obj_grad, obj_hess, items, 1e-3)
            delta_theta = np.linalg.solve(schur.H_theta, schur.rhs)
            for (dp, _), n in zip(back_substitute_planes(items, delta_theta), normals):
                assert abs(float(np.append(n, 0.0) @ dp)) <= 1e-10 * max(1.0, np.linalg.norm(dp))

    def test_reduced_hessian_inherits_convexity_floor(self):
        # when the full coupled system is bounded below by shift * identity,
        # the reduced configuration Hessian keeps that bound
        rng = np.random.default_rng(6)
        shift = 0.01
        for _ in range(20):
            obj_grad, obj_hess, blocks, normals = _synthetic_instance(rng, pd_shift=shift)
            elims = [eliminate_plane(b.H_pp, n, 1e-4) for b, n in zip(blocks, normals)]
            schur = assemble_schur_theta(obj_grad, obj_hess, list(zip(blocks, elims)), 1e-4)
            assert np.linalg.eigvalsh(schur.H_theta_raw).min() >= shift - 1e-9


class TestEcbSolve:
    def test_quadratic_converges_in_two_iterations(self):
        problem = quadratic_bowl()
        result = ecb_solve(problem, SolverSettings(eps=1e-8, max_iters=10))
        assert result.converged
        assert len(result.trace.records) <= 2
        assert np.allclose(result.theta, [0.3, -0.2, 0.5, 0.1, 0.0, -0.4], atol=1e-8)

    def test_two_cube_attraction(self):
        problem = two_cube_attraction()
        result = ecb_solve(problem, SolverSettings(eps=1e-6, max_iters=400))
        assert result.converged
        # the mover is stopped by the barrier just outside contact
        assert 1.0 < result.theta[0] < 1.15
        clearance, _ = problem.min_clearance(result.theta)
        assert clearance > 0.0
        assert result.trace.records[-1].grad_inf_norm <= 1e-6

    def test_objective_monotone_at_fixed_pair_set(self):
        problem = two_cube_attraction()
        result = ecb_solve(problem, SolverSettings(eps=1e-6, max_iters=400))
        counts = [rec.active_pairs for rec in result.trace.records]
        assert counts == [1] * len(counts)
        objectives = [result.trace.initial_objective] + [
            rec.objective for rec in result.trace.records
        ]
        assert all(b < a for a, b in zip(objectives, objectives[1:]))

    def test_every_iterate_collision_free(self):
        problem = two_cube_attraction()
        settings = SolverSettings(eps=1e-6, max_iters=400, record_iterates=True)
        result = ecb_solve(problem, settings)
        assert result.converged
        for theta in result.trace.iterates:
            clearance, _ = problem.min_clearance(theta)
            assert clearance > 0.0

    def test_activation_guard_prevents_tunneling(self):
        # starts outside the broadphase margin with a strong pull; the
        # line search must refuse steps that land in overlap
        problem = two_cube_attraction(start_x=1.4, weight=5.0)
        result = ecb_solve(problem, SolverSettings(eps=1e-6, max_iters=400))
        assert result.converged
        assert result.theta[0] > 1.0
        clearance, _ = problem.min_clearance(result.theta)
        assert clearance > 0.0

    def test_box_settle_reaches_tolerance(self):
        problem = box_settle(6)
        settings = SolverSettings(eps=1e-4, max_iters=2000)
        result = ecb_solve(problem, settings)
        assert result.converged
        clearance, _ = problem.min_clearance(result.theta)
        assert clearance > 0.0
        # at the solution the reduced Hessian is positive semidefinite
        # before any flooring
        pairs = result.pairs
        ws = build_workspace(problem, result.theta, pairs, settings)
        assert np.linalg.eigvalsh(ws.schur.H_theta_raw).min() >= -1e-6

    def test_infeasible_start_raises(self):
        problem = two_cube_attraction(start_x=0.9)
        with pytest.raises(InfeasibleStartError) as err:
            ecb_solve(problem, SolverSettings())
        assert "moving" in str(err.value)

    def test_deterministic_repeat(self):
        settings = SolverSettings(eps=1e-6, max_iters=400)
        r1 = ecb_solve(two_cube_attraction(), settings)
        r2 = ecb_solve(two_cube_attraction(), settings)
        assert np.array_equal(r1.theta, r2.theta)
        assert [rec.objective for rec in r1.trace.records] == [
            rec.objective for rec in r2.trace.records
        ]
        assert [rec.grad_inf_norm for rec in r1.trace.records] == [
            rec.grad_inf_norm for rec in r2.trace.records
        ]

    def test_trace_bookkeeping(self):
        result = ecb_solve(two_cube_attraction(), SolverSettings(eps=1e-6, max_iters=400))
        trace = result.trace
        assert trace.termination == CONVERGED
        iters = [rec.iter for rec in trace.records]
        assert iters == list(range(1, len(iters) + 1))
        elapsed = [rec.elapsed_s for rec in trace.records]
        assert all(b >= a for a, b in zip(elapsed, elapsed[1:]))
        assert all(0.0 < rec.alpha <= 1.0 for rec in trace.records)
        assert trace.iterations_to(1e10) == 0
        assert trace.iterations_to(1e-6) == len(trace.records)
        assert trace.iterations_to(0.0) is None

    def test_max_iters_termination(self):
        result = ecb_solve(two_cube_attraction(), SolverSettings(eps=1e-14, max_iters=3))
        assert result.trace.termination == "max-iters"
        assert len(result.trace.records) == 3

    def test_pair_scaling_same_direction(self):
        # replicated coincident pairs keep the step direction identical
        r1 = ecb_solve(replicated_pairs(1), SolverSettings(eps=1e-6, max_iters=200))
        r4 = ecb_solve(replicated_pairs(4), SolverSettings(eps=1e-6, max_iters=200))
        assert r1.converged and r4.converged
        assert len(r4.pairs) == 4
