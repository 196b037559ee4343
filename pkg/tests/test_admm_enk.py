import numpy as np
import pytest
import scipy.sparse as sp

from hybridsvm.admm import (EnkParams, EnkState, EnsvmParams, EnsvmState,
                            REASON_ITERATION_LIMIT, admm_enk_run,
                            admm_enk_step, admm_ensvm_run, admm_ensvm_step,
                            enk_objective)
from hybridsvm.data import (DataMatrix, KnowledgeSet, SyntheticSpec,
                            generate_knowledge_synthetic)
from hybridsvm.linalg import NotPositiveDefiniteError

from conftest import toy_two_sample


def small_benchmark(seed=3):
    spec = SyntheticSpec(n_train=50, n_test=100, n_features=500, block_len=10,
                         seed=seed)
    return generate_knowledge_synthetic(spec)


def random_state(rng, n, m, k1, k2):
    return EnkState(w=rng.normal(size=m), b=float(rng.normal()),
                    a=rng.normal(size=n), c=rng.normal(size=m),
                    gamma1=rng.normal(size=n), gamma2=rng.normal(size=m),
                    iteration=0, u=rng.normal(size=k1), v=rng.normal(size=k2),
                    s=rng.uniform(0, 1, size=k1), t=rng.uniform(0, 1, size=k2),
                    p=float(rng.normal()), q=float(rng.normal()),
                    gamma3=float(rng.normal()), gamma4=float(rng.normal()),
                    gamma5=rng.normal(size=k1), gamma6=rng.normal(size=k2))


class TestEmptyKnowledgeReduction:
    def test_single_step_matches_plain_solver(self, rng):
        X = sp.csr_matrix(rng.normal(size=(6, 4)))
        y = np.where(rng.random(6) < 0.5, 1.0, -1.0)
        data = DataMatrix(X, y, 4)
        ks = KnowledgeSet.empty(4)
        params = EnkParams(lambda1=0.1)
        base = EnsvmState.zeros(6, 4)
        enk = EnkState.zeros(6, 4, 0, 0)
        for _ in range(5):
            base = admm_ensvm_step(base, data, EnsvmParams(lambda1=0.1))
            enk = admm_enk_step(enk, data, ks, params)
            np.testing.assert_allclose(enk.w, base.w, atol=1e-12)
            assert enk.b == pytest.approx(base.b, abs=1e-12)
            np.testing.assert_allclose(enk.a, base.a, atol=1e-12)
            np.testing.assert_allclose(enk.c, base.c, atol=1e-12)

    def test_full_run_matches_plain_solver(self):
        data = toy_two_sample()
        plain = admm_ensvm_run(data, EnsvmParams(lambda1=0.01, max_iter=500))
        withk = admm_enk_run(data, KnowledgeSet.empty(2),
                             EnkParams(lambda1=0.01, max_iter=500))
        assert withk.reason == plain.reason
        np.testing.assert_allclose(withk.state.w, plain.state.w, atol=1e-10)
        assert withk.state.b == pytest.approx(plain.state.b, abs=1e-10)
        assert withk.objective == pytest.approx(plain.objective, abs=1e-10)
        np.testing.assert_array_equal(withk.support, plain.support)


class TestSingleStep:
    def test_hand_evaluated_k1_update_chain(self):
        # N=1, m=2, one positive-class rule; every piece is scalar arithmetic
        data = DataMatrix(sp.csr_matrix(np.array([[1.0, 0.5]])),
                          np.array([1.0]), 2)
        B = sp.csr_matrix(np.array([[1.0, 0.0]]))
        ks = KnowledgeSet(B, np.array([-4.0]), sp.csr_matrix((0, 2)), np.zeros(0))
        params = EnkParams.shared(rho=2.0, knowledge_mu=1.0, lambda1=0.5,
                                  lambda2=1.0, mu1=1.0, mu2=1.0)
        state = EnkState(w=np.array([0.2, -0.1]), b=0.1, a=np.array([0.3]),
                         c=np.array([0.1, 0.0]), gamma1=np.array([0.05]),
                         gamma2=np.array([-0.1, 0.2]), iteration=0,
                         u=np.array([0.15]), v=np.zeros(0), s=np.array([0.1]),
                         t=np.zeros(0), p=0.0, q=-0.2, gamma3=0.3, gamma4=0.0,
                         gamma5=np.array([0.05]), gamma6=np.zeros(0))
        new = admm_enk_step(state, data, ks, params)

        # independent straight-line evaluation of the same update chain
        kappa1 = 1.0 + 1.0 + 2.0          # lambda2 + mu2 + rho1 (k2 empty)
        kappa2 = 1.0                      # mu3 only
        M = np.array([[kappa1 + 1.0, 0.5, 1.0],
                      [0.5, kappa1 + 0.25, 0.5],
                      [1.0, 0.5, 1.0 + kappa2]])
        h = 0.05 + (1.0 - 0.3)
        rhs = np.array([1.0 * h - (-0.1) + 0.1 - 2.0 * 0.15,
                        0.5 * h - 0.2 + 0.0 - 0.0,
                        h + 0.3 + 1.0 * ((-4.0) * 0.15 + 1.0 - (-0.2))])
        wb = np.linalg.solve(M, rhs)
        np.testing.assert_allclose(new.w, wb[:2], atol=1e-9)
        assert new.b == pytest.approx(wb[2], abs=1e-9)

        m_u = 2.0 * 1.0 + 1.0 * 16.0 + 1.0    # rho1*BB' + mu3*dd' + mu5
        r_u = (-2.0 * wb[0] + 1.0 * (-4.0) * wb[2] + (-4.0) * (-0.2 - 1.0)
               - (-4.0) * 0.3 + 0.05 + 1.0 * 0.1)
        u_new = r_u / m_u
        assert new.u[0] == pytest.approx(u_new, abs=1e-9)
        assert new.s[0] == pytest.approx(max(0.0, u_new - 0.05), abs=1e-9)

        score = wb[0] + 0.5 * wb[1] + wb[2]
        omega_a = 1.0 + 0.05 - score
        a_new = omega_a - 1.0 if omega_a > 1.0 else (omega_a if omega_a < 0 else 0.0)
        assert new.a[0] == pytest.approx(a_new, abs=1e-9)
        c_new = np.sign(np.array([-0.1, 0.2]) + wb[:2]) * np.maximum(
            0.0, np.abs(np.array([-0.1, 0.2]) + wb[:2]) - 0.5)
        np.testing.assert_allclose(new.c, c_new, atol=1e-9)

        omega_q = -4.0 * u_new - wb[2] + 1.0 + 0.3
        q_new = omega_q - 2.0 if omega_q > 2.0 else (omega_q if omega_q < 0 else 0.0)
        assert new.q == pytest.approx(q_new, abs=1e-9)
        assert new.gamma3 == pytest.approx(
            0.3 + (-4.0 * u_new - wb[2] + 1.0 - q_new), abs=1e-9)
        np.testing.assert_allclose(
            new.gamma5, 0.05 + (max(0.0, u_new - 0.05) - u_new), atol=1e-9)
        # untouched negative side
        assert new.p == 0.0 and new.gamma4 == 0.0
        assert new.v.size == 0 and new.t.size == 0

    def test_q_update_consistent_with_scalar_prox(self, rng):
        train, _, ks = small_benchmark()
        params = EnkParams.shared(rho=1.5, knowledge_mu=1.0, lambda1=0.05)
        state = random_state(rng, train.n_samples, train.n_features, 1, 1)
        new = admm_enk_step(state, train, ks, params)
        omega = float(ks.d @ new.u) - new.b + 1.0 + state.gamma3 / params.mu3
        lam = params.rho2 / params.mu3
        expected = omega - lam if omega > lam else (omega if omega < 0 else 0.0)
        assert new.q == pytest.approx(expected, abs=1e-12)

    def test_slacks_stay_nonnegative(self):
        train, _, ks = small_benchmark()
        params = EnkParams.shared(rho=5.0, knowledge_mu=1.0, lambda1=0.05)
        state = EnkState.zeros(train.n_samples, train.n_features, 1, 1)
        from hybridsvm.admm import _EnkWorkspace
        ws = _EnkWorkspace(train, ks, params)
        for _ in range(60):
            state = admm_enk_step(state, train, ks, params, ws)
            assert np.all(state.s >= 0.0)
            assert np.all(state.t >= 0.0)

    def test_cached_cholesky_matches_fresh_dense_solve(self, rng):
        train, _, ks = small_benchmark()
        params = EnkParams.shared(rho=3.0, knowledge_mu=1.0, lambda1=0.05)
        from hybridsvm.admm import _EnkWorkspace
        ws = _EnkWorkspace(train, ks, params)
        M = (params.rho1 * (ks.B @ ks.B.T).toarray()
             + params.mu3 * np.outer(ks.d, ks.d) + params.mu5 * np.eye(1))
        for _ in range(5):
            r = rng.normal(size=1)
            np.testing.assert_allclose(ws.u_factor.solve(r),
                                       np.linalg.solve(M, r), atol=1e-10)


class TestRun:
    def test_rule_blocks_enter_the_classifier(self):
        train, test, ks = small_benchmark()
        params = EnkParams.shared(rho=10.0, knowledge_mu=1.0, lambda1=0.05,
                                  max_iter=1500)
        out = admm_enk_run(train, ks, params)
        st = out.state
        rule_coords = np.concatenate([np.arange(0, 10), np.arange(30, 40)])
        assert np.any(st.w[rule_coords] != 0.0)
        # zeroing the rule blocks strictly increases the knowledge objective
        w_zeroed = st.w.copy()
        w_zeroed[rule_coords] = 0.0
        full = enk_objective(st.w, st.b, st.u, st.v, train, ks, params)
        zeroed = enk_objective(w_zeroed, st.b, st.u, st.v, train, ks, params)
        assert zeroed > full

    def test_converged_feasibility_residuals(self):
        train, _, ks = small_benchmark()
        params = EnkParams.shared(rho=5.0, knowledge_mu=1.0, lambda1=0.05,
                                  max_iter=3000)
        out = admm_enk_run(train, ks, params)
        assert out.reason == "converged"
        st = out.state
        eps1 = params.eps1
        margin = train.y * (train.X @ st.w + st.b)
        assert np.linalg.norm(st.a - (1.0 - margin)) <= eps1
        assert np.linalg.norm(st.c - st.w) <= eps1
        assert np.linalg.norm(st.u - st.s) <= eps1
        assert np.linalg.norm(st.v - st.t) <= eps1
        assert abs(float(ks.d @ st.u) - st.b + 1.0 - st.q) <= eps1
        assert abs(float(ks.g @ st.v) + st.b + 1.0 - st.p) <= eps1

    def test_max_iter_zero_returns_init(self):
        train, _, ks = small_benchmark()
        init = EnkState.zeros(train.n_samples, train.n_features, 1, 1)
        out = admm_enk_run(train, ks, EnkParams(max_iter=0), init=init)
        assert out.reason == REASON_ITERATION_LIMIT
        assert out.state is init

    def test_trace_includes_knowledge_residuals(self):
        train, _, ks = small_benchmark()
        records = []
        admm_enk_run(train, ks, EnkParams.shared(rho=2.0, lambda1=0.05,
                                                 max_iter=3),
                     callback=records.append)
        for key in ("feas_u", "feas_v", "feas_q", "feas_p"):
            assert key in records[0]

    def test_rank_deficient_knowledge_rejected(self):
        train, _, _ = small_benchmark()
        m = train.n_features
        row = np.zeros(m)
        row[:10] = -0.1
        B = sp.csr_matrix(np.vstack([row, row]))  # duplicated rule
        ks = KnowledgeSet(B, np.array([-4.0, -4.0]), sp.csr_matrix((0, m)),
                          np.zeros(0))
        with pytest.raises(NotPositiveDefiniteError):
            admm_enk_run(train, ks, EnkParams(lambda1=0.05, max_iter=5))

    def test_dimension_mismatch_rejected(self):
        train, _, _ = small_benchmark()
        ks = KnowledgeSet.empty(train.n_features + 1)
        with pytest.raises(ValueError):
            admm_enk_run(train, ks, EnkParams(max_iter=5))
