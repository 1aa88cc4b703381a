import math

import numpy as np
import pytest
from scipy.spatial.distance import cdist
from scipy.stats import chi2, kstest

from sdedit import (
    AnalyticGmmScore,
    DomainError,
    EditMask,
    GmmClassifier,
    GmmSpec,
    Guide,
    ProtocolError,
    SdeditConfig,
    ShapeMismatchError,
    T0SearchState,
    VeSchedule,
    ZeroScore,
    forward_perturb,
    reverse_step_ve,
    reverse_step_vp,
    sdedit,
    sdedit_class_conditional,
    sdedit_masked,
    t0_binary_search,
)


class TestForwardPerturb:
    def test_t0_zero_returns_guide(self, ve_toy, vp_default):
        g = np.array([0.3, -0.7, 1.1])
        for sched in (ve_toy, vp_default):
            out = forward_perturb(g, sched, 0.0, rng=0)
            np.testing.assert_array_equal(out, g)

    def test_ve_full_noise_std(self, ve_toy):
        # t0=1 from the origin: per-coordinate std = sigma_max within 1%
        g = np.zeros((100_000, 2))
        out = forward_perturb(g, ve_toy, 1.0, rng=np.random.default_rng(0))
        assert out.std() == pytest.approx(25.0, rel=0.01)

    def test_vp_full_noise_is_standard_normal(self, vp_default):
        # discrete alpha(1) ~ 4e-5, so the unit-norm guide contributes ~nothing
        g = np.tile(np.array([1.0, 0.0]) , (100_000, 1))
        out = forward_perturb(g, vp_default, 1.0, rng=np.random.default_rng(1),
                              n_steps=1000)
        mean_norm = np.linalg.norm(out.mean(axis=0))
        assert mean_norm <= 0.02 * math.sqrt(2)
        assert out.var() == pytest.approx(1.0, rel=0.02)

    def test_guide_object_accepted(self, ve_toy):
        g = Guide.from_vector([1.0, 2.0])
        out = forward_perturb(g, ve_toy, 0.5, rng=3)
        assert out.shape == (2,)


class TestReverseStepVe:
    def test_zero_score_zero_noise_is_identity(self, ve_toy):
        x = np.array([0.4, -0.2])
        out = reverse_step_ve(x, 0.5, 0.01, ZeroScore(), ve_toy, z=np.zeros(2))
        np.testing.assert_array_equal(out, x)

    def test_algebraic_identity(self, ve_toy, gmm3_2d):
        # output - x - eps^2 s == eps z for a recorded z
        score = AnalyticGmmScore(gmm3_2d, ve_toy)
        x = np.array([1.5, 0.5])
        t, dt = 0.6, 0.002
        z = np.random.default_rng(5).standard_normal(2)
        out = reverse_step_ve(x, t, dt, score, ve_toy, z=z)
        eps2 = ve_toy.sigma2(t) - ve_toy.sigma2(t - dt)
        np.testing.assert_allclose(out - x - eps2 * score(x, t),
                                   math.sqrt(eps2) * z, atol=1e-14)

    def test_negative_increment_rejected(self):
        # a decreasing "schedule" stand-in triggers the resolution check
        class Decreasing(VeSchedule):
            def sigma2(self, t):
                return 1.0 - np.asarray(t)

        from sdedit import ResolutionError
        with pytest.raises(ResolutionError):
            reverse_step_ve(np.zeros(2), 0.5, 0.1, ZeroScore(), Decreasing(0.01, 1.0),
                            z=np.zeros(2))

    def test_single_gaussian_recovery(self, ve_toy):
        # integrate the full reverse chain from t0=1 with the exact score:
        # the output population must match the data Gaussian
        mu, std = np.array([1.0, -0.5]), 0.8
        gmm = GmmSpec([1.0], [mu], [std])
        score = AnalyticGmmScore(gmm, ve_toy)
        config = SdeditConfig(t0=1.0, n_steps=1200, seed=17)
        out = sdedit(np.tile(mu, (10_000, 1)), score, ve_toy, config).output
        np.testing.assert_allclose(out.mean(axis=0), mu, atol=0.03 * std)
        cov = np.cov(out.T)
        np.testing.assert_allclose(np.diag(cov), std**2, rtol=0.03)
        assert abs(cov[0, 1]) < 0.03 * std**2


class TestReverseStepVp:
    def test_pure_rescale(self, vp_default):
        x = np.array([2.0, -4.0])
        t, dt = 0.5, 1e-3
        out = reverse_step_vp(x, t, dt, ZeroScore(), vp_default, z=np.zeros(2))
        bdt = vp_default.beta(t) * dt
        np.testing.assert_allclose(out, x / math.sqrt(1 - bdt), rtol=1e-14)

    def test_algebraic_identity(self, vp_default, gmm3_2d):
        score = AnalyticGmmScore(gmm3_2d, vp_default)
        x = np.array([0.2, 0.9])
        t, dt = 0.4, 1e-3
        z = np.random.default_rng(6).standard_normal(2)
        out = reverse_step_vp(x, t, dt, score, vp_default, z=z)
        bdt = vp_default.beta(t) * dt
        expected = (x + bdt * score(x, t)) / math.sqrt(1 - bdt) + math.sqrt(bdt) * z
        np.testing.assert_allclose(out, expected, atol=1e-14)

    def test_resolution_error(self, vp_default):
        from sdedit import ResolutionError
        with pytest.raises(ResolutionError):
            reverse_step_vp(np.zeros(2), 1.0, 0.1, ZeroScore(), vp_default,
                            z=np.zeros(2))

    def test_single_gaussian_recovery(self, vp_default):
        mu, std = np.array([0.8, -0.3]), 0.6
        gmm = GmmSpec([1.0], [mu], [std])
        score = AnalyticGmmScore(gmm, vp_default)
        config = SdeditConfig(t0=1.0, n_steps=800, seed=23)
        out = sdedit(np.tile(mu, (10_000, 1)), score, vp_default, config).output
        np.testing.assert_allclose(out.mean(axis=0), mu, atol=0.03 * std)
        np.testing.assert_allclose(np.diag(np.cov(out.T)), std**2, rtol=0.03)


class TestSdedit:
    def test_t0_zero_returns_guide_any_repeats(self, ve_toy, gmm3_2d):
        g = np.array([3.0, 3.0])
        score = AnalyticGmmScore(gmm3_2d, ve_toy)
        for k in (1, 3):
            res = sdedit(g, score, ve_toy, SdeditConfig(t0=0.0, n_steps=10, repeats=k))
            np.testing.assert_array_equal(res.output, g)
            assert res.steps_run == 0

    def test_off_manifold_guide_lands_near_mode(self, ve_church):
        # guide at (3,3), modes at (+-1,0): t0=0.5 pulls it onto the manifold
        gmm = GmmSpec([0.5, 0.5], [[-1.0, 0.0], [1.0, 0.0]], [0.5, 0.5])
        score = AnalyticGmmScore(gmm, ve_church)
        batch = np.tile([3.0, 3.0], (1000, 1))
        res = sdedit(batch, score, ve_church, SdeditConfig(t0=0.5, n_steps=500, seed=9))
        dist = np.minimum(
            np.linalg.norm(res.output - [1.0, 0.0], axis=1),
            np.linalg.norm(res.output - [-1.0, 0.0], axis=1))
        assert np.mean(dist <= 3 * 0.5) >= 0.95

    def test_determinism_bit_identical(self, ve_toy, gmm3_2d):
        score = AnalyticGmmScore(gmm3_2d, ve_toy)
        config = SdeditConfig(t0=0.6, n_steps=40, repeats=2, seed=123)
        g = np.array([0.5, -1.0])
        a = sdedit(g, score, ve_toy, config)
        b = sdedit(g, score, ve_toy, config)
        np.testing.assert_array_equal(a.output, b.output)
        np.testing.assert_array_equal(a.perturbed, b.perturbed)

    def test_seed_changes_output(self, ve_toy, gmm3_2d):
        score = AnalyticGmmScore(gmm3_2d, ve_toy)
        g = np.array([0.5, -1.0])
        a = sdedit(g, score, ve_toy, SdeditConfig(t0=0.6, n_steps=40, seed=1))
        b = sdedit(g, score, ve_toy, SdeditConfig(t0=0.6, n_steps=40, seed=2))
        assert not np.array_equal(a.output, b.output)

    def test_snapshots_strided_descending(self, ve_toy, gmm3_2d):
        score = AnalyticGmmScore(gmm3_2d, ve_toy)
        config = SdeditConfig(t0=0.5, n_steps=50, seed=0, snapshot_stride=10)
        res = sdedit(np.zeros(2), score, ve_toy, config)
        assert len(res.snapshots) == 5
        times = [t for _, t, _ in res.snapshots]
        assert times == sorted(times, reverse=True)
        np.testing.assert_array_equal(res.snapshots[-1][2], res.output)

    def test_guide_object_round_trip(self, ve_toy, gmm3_2d):
        score = AnalyticGmmScore(gmm3_2d, ve_toy)
        g = Guide.from_vector([0.1, 0.2])
        res = sdedit(g, score, ve_toy, SdeditConfig(t0=0.3, n_steps=20, seed=4))
        assert res.output.shape == (2,) and res.shape == (2,)

    def test_variant_mismatch_rejected(self, ve_toy, gmm3_2d):
        score = AnalyticGmmScore(gmm3_2d, ve_toy)
        with pytest.raises(DomainError):
            sdedit(np.zeros(2), score, ve_toy,
                   SdeditConfig(t0=0.5, n_steps=10, variant="vp"))

    def test_chi2_displacement_quick(self, ve_toy):
        # ZeroScore: ||x(t0) - output||^2 / sigma^2(t0) is chi^2 with d dof
        t0 = math.log(1.0 / 0.01) / math.log(25.0 / 0.01)  # sigma(t0) = 1
        config = SdeditConfig(t0=t0, n_steps=60, seed=77)
        res = sdedit(np.zeros((20_000, 2)), ZeroScore(), ve_toy, config)
        stat = np.sum((res.output - res.perturbed) ** 2, axis=1) / ve_toy.sigma2(t0)
        ks = kstest(stat, chi2(2).cdf).statistic
        assert ks <= 0.015


class TestMasked:
    def test_all_ones_mask_reduces_to_plain(self, ve_toy, gmm3_2d):
        score = AnalyticGmmScore(gmm3_2d, ve_toy)
        config = SdeditConfig(t0=0.45, n_steps=30, seed=5)
        g = np.array([1.0, 2.0])
        plain = sdedit(g, score, ve_toy, config)
        masked = sdedit_masked(g, EditMask(np.ones(2), (2,)), score, ve_toy, config)
        np.testing.assert_array_equal(plain.output, masked.output)

    def test_all_zeros_mask_keeps_guide_with_decayed_noise(self, ve_toy, gmm3_2d):
        score = AnalyticGmmScore(gmm3_2d, ve_toy)
        t0, n = 0.45, 200
        config = SdeditConfig(t0=t0, n_steps=n, seed=6)
        g = np.tile([1.0, 2.0], (1000, 1))
        res = sdedit_masked(g, EditMask(np.zeros(2), (2,)), score, ve_toy, config)
        sigma_last = ve_toy.sigma(t0 / n)
        dev = np.linalg.norm(res.output - g, axis=1)
        assert np.all(dev <= 4 * sigma_last * math.sqrt(2))

    def test_half_mask_preserves_and_edits(self, ve_church):
        gmm = GmmSpec([0.5, 0.5], [[-1.0, 0.0], [1.0, 0.0]], [0.5, 0.5])
        score = AnalyticGmmScore(gmm, ve_church)
        t0, n = 0.5, 400
        config = SdeditConfig(t0=t0, n_steps=n, seed=7)
        g = np.tile([3.0, 3.0], (1000, 1))
        omega = EditMask(np.array([1.0, 0.0]), (2,))  # first coord editable
        res = sdedit_masked(g, omega, score, ve_church, config)
        sigma_last = ve_church.sigma(t0 / n)
        assert np.max(np.abs(res.output[:, 1] - 3.0)) <= 4 * sigma_last
        modes = np.array([[-1.0, 0.0], [1.0, 0.0]])
        d_before = np.min(np.linalg.norm(np.array([3.0, 3.0]) - modes, axis=1))
        d_after = np.min(cdist(res.output, modes), axis=1)
        assert np.mean(d_after < d_before) >= 0.90

    def test_hard_restore_exact(self, ve_toy, gmm3_2d):
        score = AnalyticGmmScore(gmm3_2d, ve_toy)
        config = SdeditConfig(t0=0.45, n_steps=50, seed=8, hard_restore=True)
        g = np.array([1.0, 2.0])
        res = sdedit_masked(g, EditMask(np.array([0.0, 1.0]), (2,)), score, ve_toy, config)
        assert res.output[0] == g[0]

    def test_shape_mismatch(self, ve_toy, gmm3_2d):
        score = AnalyticGmmScore(gmm3_2d, ve_toy)
        with pytest.raises(ShapeMismatchError):
            sdedit_masked(np.zeros(2), EditMask(np.ones(3), (3,)), score, ve_toy,
                          SdeditConfig(t0=0.5, n_steps=10))

    def test_repeats_use_original_guide(self, ve_toy, gmm3_2d):
        # K>1 must pin the uneditable region to the *original* guide
        score = AnalyticGmmScore(gmm3_2d, ve_toy)
        config = SdeditConfig(t0=0.45, n_steps=100, repeats=3, seed=9)
        g = np.array([1.0, 2.0])
        res = sdedit_masked(g, EditMask(np.array([1.0, 0.0]), (2,)), score, ve_toy, config)
        assert abs(res.output[1] - 2.0) <= 4 * ve_toy.sigma(0.45 / 100)

    def test_vp_all_ones_mask_reduces_to_plain(self, vp_default, gmm3_2d):
        score = AnalyticGmmScore(gmm3_2d, vp_default)
        config = SdeditConfig(t0=0.5, n_steps=100, seed=15)
        g = np.array([1.0, 2.0])
        plain = sdedit(g, score, vp_default, config)
        masked = sdedit_masked(g, EditMask(np.ones(2), (2,)), score, vp_default, config)
        np.testing.assert_array_equal(plain.output, masked.output)

    def test_vp_masked_pins_uneditable_region(self, vp_default, gmm3_2d):
        # uneditable part ends as sqrt(a1) x0 + sqrt(1 - a1) z with
        # a1 = 1 - beta(t0/N) dt, so the residual noise is tiny
        score = AnalyticGmmScore(gmm3_2d, vp_default)
        t0, n = 0.5, 200
        config = SdeditConfig(t0=t0, n_steps=n, seed=16)
        g = np.tile([1.0, 2.0], (500, 1))
        res = sdedit_masked(g, EditMask(np.array([1.0, 0.0]), (2,)), score,
                            vp_default, config)
        a1 = vp_default.discrete_alpha_prefix(t0, n)[1]
        ceiling = (1 - np.sqrt(a1)) * 2.0 + 4 * np.sqrt(1 - a1)
        assert np.max(np.abs(res.output[:, 1] - 2.0)) <= ceiling
        # editable coordinate actually moved
        assert np.std(res.output[:, 0]) > 10 * np.sqrt(1 - a1)


class TestClassConditional:
    def test_single_component_identical_to_plain(self, ve_toy):
        gmm = GmmSpec([1.0], [[0.5, -0.5]], [0.6])
        score = AnalyticGmmScore(gmm, ve_toy)
        clf = GmmClassifier(gmm, ve_toy)
        config = SdeditConfig(t0=0.7, n_steps=40, seed=11, label=0)
        g = np.array([2.0, 2.0])
        plain = sdedit(g, score, ve_toy, SdeditConfig(t0=0.7, n_steps=40, seed=11))
        guided = sdedit_class_conditional(g, score, clf, ve_toy, config)
        np.testing.assert_allclose(guided.output, plain.output, atol=1e-12)

    def test_guides_into_labelled_basin_at_full_noise(self, ve_toy):
        gmm = GmmSpec([0.5, 0.5], [[-2.0, 0.0], [2.0, 0.0]], [0.3, 0.3])
        score = AnalyticGmmScore(gmm, ve_toy)
        clf = GmmClassifier(gmm, ve_toy)
        config = SdeditConfig(t0=1.0, n_steps=300, seed=12, label=1)
        batch = np.zeros((1000, 2))
        res = sdedit_class_conditional(batch, score, clf, ve_toy, config)
        assert np.mean(res.output[:, 0] > 0) >= 0.95

    def test_guidance_beats_unguided_from_central_guide(self, ve_toy):
        gmm = GmmSpec([0.5, 0.5], [[-2.0, 0.0], [2.0, 0.0]], [0.3, 0.3])
        score = AnalyticGmmScore(gmm, ve_toy)
        clf = GmmClassifier(gmm, ve_toy)
        batch = np.zeros((1000, 2))
        cfg_g = SdeditConfig(t0=0.4, n_steps=200, seed=13, label=1)
        cfg_u = SdeditConfig(t0=0.4, n_steps=200, seed=13)
        guided = sdedit_class_conditional(batch, score, clf, ve_toy, cfg_g)
        unguided = sdedit(batch, score, ve_toy, cfg_u)
        rate_g = np.mean(guided.output[:, 0] > 0)
        rate_u = np.mean(unguided.output[:, 0] > 0)
        assert rate_g >= rate_u + 0.10

    def test_vp_guided_basin(self, vp_default):
        gmm = GmmSpec([0.5, 0.5], [[-2.0, 0.0], [2.0, 0.0]], [0.3, 0.3])
        score = AnalyticGmmScore(gmm, vp_default)
        clf = GmmClassifier(gmm, vp_default)
        config = SdeditConfig(t0=1.0, n_steps=300, seed=14, label=0)
        res = sdedit_class_conditional(np.zeros((500, 2)), score, clf, vp_default, config)
        assert np.mean(res.output[:, 0] < 0) >= 0.95

    def test_label_required(self, ve_toy, gmm3_2d):
        score = AnalyticGmmScore(gmm3_2d, ve_toy)
        clf = GmmClassifier(gmm3_2d, ve_toy)
        with pytest.raises(DomainError):
            sdedit_class_conditional(np.zeros(2), score, clf, ve_toy,
                                     SdeditConfig(t0=0.5, n_steps=10))


def _energy_pvalue(a, b, n_perm, rng):
    """Two-sample energy-distance permutation test (oracle, self-contained)."""
    pooled = np.vstack([a, b])
    n, total = len(a), len(pooled)
    dmat = cdist(pooled, pooled)
    row_sums = dmat.sum(axis=1)
    grand = dmat.sum()

    def statistic(mask_a):
        w = dmat @ mask_a
        sxx = mask_a @ w
        sxy = mask_a @ row_sums - sxx
        syy = grand - 2 * sxy - sxx
        m = total - n
        return 2 * sxy / (n * m) - sxx / (n * n) - syy / (m * m)

    base = np.zeros(total)
    base[:n] = 1.0
    obs = statistic(base)
    hits = 0
    for _ in range(n_perm):
        perm = np.zeros(total)
        perm[rng.choice(total, size=n, replace=False)] = 1.0
        if statistic(perm) >= obs:
            hits += 1
    return (hits + 1) / (n_perm + 1)


class TestUnconditionalLimit:
    def test_t0_one_matches_prior_sampling(self, ve_toy, gmm3_2d):
        # sdedit at t0=1 from a real guide vs direct reverse-SDE sampling from
        # the prior: statistically indistinguishable populations
        score = AnalyticGmmScore(gmm3_2d, ve_toy)
        n = 10_000
        cfg_a = SdeditConfig(t0=1.0, n_steps=300, seed=21)
        cfg_b = SdeditConfig(t0=1.0, n_steps=300, seed=22)
        from_guide = sdedit(np.tile([3.0, 3.0], (n, 1)), score, ve_toy, cfg_a).output
        from_prior = sdedit(np.zeros((n, 2)), score, ve_toy, cfg_b).output
        rng = np.random.default_rng(0)
        sub_a = from_guide[rng.choice(n, 2000, replace=False)]
        sub_b = from_prior[rng.choice(n, 2000, replace=False)]
        assert _energy_pvalue(sub_a, sub_b, 199, np.random.default_rng(1)) > 0.01


class TestT0Search:
    def test_bisection_examples(self):
        state = T0SearchState()
        assert state.probe == pytest.approx(0.45)
        up = t0_binary_search(state, "more_realistic")
        assert up.lo == state.probe and up.hi == 0.6  # lo := probe
        assert up.probe == pytest.approx(0.525)
        down = t0_binary_search(state, "more_faithful")
        assert down.lo == 0.3 and down.hi == state.probe  # hi := probe
        assert down.probe == pytest.approx(0.375)

    def test_interval_halves_each_step(self):
        state = T0SearchState()
        width = state.hi - state.lo
        rng = np.random.default_rng(0)
        for i in range(10):
            verdict = "more_realistic" if rng.random() < 0.5 else "more_faithful"
            state = t0_binary_search(state, verdict)
        assert state.hi - state.lo == pytest.approx(width * 2**-10)
        assert state.iterations == 10

    def test_accept_is_terminal(self):
        start = T0SearchState()
        state = t0_binary_search(start, "accept")
        assert state.accepted
        assert state.history[-1] == (start.probe, "accept")
        with pytest.raises(ProtocolError):
            t0_binary_search(state, "more_realistic")

    def test_unknown_feedback(self):
        with pytest.raises(ProtocolError):
            t0_binary_search(T0SearchState(), "louder")


class TestGuideAndMaskTypes:
    def test_guide_validation(self):
        with pytest.raises(DomainError):
            Guide.from_vector([np.nan, 1.0])
        with pytest.raises(DomainError):
            Guide.from_image(np.full((2, 2), 1.5))

    def test_mask_validation(self):
        with pytest.raises(DomainError):
            EditMask(np.array([0.0, 0.5]), (2,))

    def test_mask_channel_broadcast(self):
        m = EditMask.from_image(np.ones((4, 4)), channels=3)
        assert m.shape == (4, 4, 3) and m.dim == 48
