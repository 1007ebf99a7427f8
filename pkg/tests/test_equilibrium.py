import numpy as np
import pytest

from olgsim import (
    GBM,
    ConfigurationError,
    DemographicFlow,
    DiscountSpec,
    IncomeModel,
    PointLaw,
    RatePath,
    StationaryExponential,
    StationaryUniform,
    TimeGrid,
    clearing_rate_update,
    lifecycle_equilibrium_solve,
    olg_aggregates,
    olg_phi_map,
    picard_solve,
    rate_sensitivity_dK,
    solve_cohort_family,
    stationary_rate_bisect,
)

K = 10.0


@pytest.fixture(scope="module")
def economy(crra, discount, gbm_income, small_grid):
    eq = lifecycle_equilibrium_solve(
        crra, crra, discount, gbm_income, small_grid, 300, 42, K, PointLaw(K)
    )
    return eq


class TestClearingUpdate:
    def test_constant_excess_consumption(self):
        mean_c = np.full(3, 0.5)
        mean_eta = np.full(3, 0.2)
        np.testing.assert_allclose(
            clearing_rate_update(K, 0.0, mean_c, mean_eta), 0.03, rtol=1e-14
        )

    def test_zero_numerator_zero_rate(self):
        x = np.array([1.0, 2.0])
        np.testing.assert_array_equal(clearing_rate_update(5.0, 0.0, x, x), 0.0)

    def test_growing_capital_raises_rate(self):
        x = np.array([1.0, 1.0])
        r = clearing_rate_update(K, 0.5, x, x)
        np.testing.assert_allclose(r, 0.05, rtol=1e-14)

    def test_zero_capital_rejected(self):
        with pytest.raises(ConfigurationError):
            clearing_rate_update(0.0, 0.0, np.ones(2), np.ones(2))


class TestLifecycleEquilibrium:
    def test_converges_and_clears(self, economy):
        assert economy.converged
        assert economy.clearing_residual <= 1e-1

    def test_rate_is_finite_and_moderate(self, economy):
        assert np.all(np.isfinite(economy.rate.values))
        assert np.max(np.abs(economy.rate.values)) < 1.0

    def test_fresh_seed_resimulation_clears(
        self, economy, crra, discount, gbm_income, small_grid
    ):
        # the equilibrium rate must clear the market on noise it never saw
        sol = picard_solve(
            crra, crra, discount, economy.rate, gbm_income, small_grid, 300, 777,
            initial_wealth_law=PointLaw(K),
        )
        mean_w = sol.ensemble.wealth.mean(axis=0)
        se = sol.ensemble.wealth.std(axis=0, ddof=1) / np.sqrt(300)
        slack = 3.0 * se + economy.clearing_residual
        assert np.all(np.abs(mean_w - K) <= slack)

    def test_mean_shift_of_initial_law_is_annihilated(
        self, economy, crra, discount, gbm_income, small_grid
    ):
        # clearing pins E[w_0] = K, so the solver recenters any mean
        # shift of the initial wealth law before solving
        shifted = lifecycle_equilibrium_solve(
            crra, crra, discount, gbm_income, small_grid, 300, 42, K, PointLaw(K + 0.5)
        )
        np.testing.assert_array_equal(shifted.rate.values, economy.rate.values)

    def test_rate_response_to_capital_bump_is_bounded(
        self, economy, crra, discount, gbm_income, small_grid
    ):
        # stability: |r(K + eps) - r(K)| <= C eps with C stable under
        # shrinking eps (no blow-up of the sensitivity)
        ratios = []
        for eps in (0.4, 0.2, 0.1):
            bumped = lifecycle_equilibrium_solve(
                crra, crra, discount, gbm_income, small_grid, 300, 42, K + eps, PointLaw(K)
            )
            d = np.max(np.abs(bumped.rate.values - economy.rate.values))
            ratios.append(d / eps)
        assert max(ratios) <= 0.05
        assert max(ratios) <= 3.0 * min(ratios)


class TestRateSensitivity:
    def test_zero_capital_rejected(self, crra, discount, gbm_income, small_grid):
        with pytest.raises(ConfigurationError):
            rate_sensitivity_dK(
                crra, crra, discount, gbm_income, small_grid, 50, 42, 0.0,
                PointLaw(0.0), 0.1,
            )

    def test_no_bequest_weight_closed_form(self, crra, gbm_income, small_grid):
        # without terminal utility weight consumption saturates at the
        # cap kappa, so clearing gives r_t = (kappa - E[eta_t]) / K and
        # hence dr/dK = -r/K exactly; K is scaled so the cap is large
        # relative to income but small next to wealth
        disc = DiscountSpec(delta=0.02, lam=0.0)
        big_K = 1e22
        tol_eq = 1e-8 * big_K
        base = lifecycle_equilibrium_solve(
            crra, crra, disc, gbm_income, small_grid, 100, 42, big_K,
            PointLaw(big_K), tol_eq=tol_eq,
        )
        assert base.converged
        sens = rate_sensitivity_dK(
            crra, crra, disc, gbm_income, small_grid, 100, 42, big_K,
            PointLaw(big_K), 0.01 * big_K, base=base, tol_eq=tol_eq,
        )
        np.testing.assert_allclose(
            sens.drdK, -base.rate.values / big_K, rtol=1e-3
        )
        assert sens.identity_residual <= 5e-2 * sens.rate_norm


LIFESPAN = 5.0


@pytest.fixture(scope="module")
def family(crra, discount, gbm_income):
    r = RatePath.constant(0.03, TimeGrid(0.0, LIFESPAN, 10))
    births = np.array([-5.0, -2.5, 0.0, 2.5, 5.0])
    return solve_cohort_family(
        crra, crra, discount, gbm_income, r, births, LIFESPAN, 20, 200, 42,
        PointLaw(1.0),
    )


@pytest.fixture(scope="module")
def olg_setup(crra, discount, gbm_income):
    cal = TimeGrid(0.0, LIFESPAN, 10)
    r = RatePath.constant(-0.3, cal)
    births = np.linspace(-LIFESPAN, LIFESPAN, 9)
    flow_u = DemographicFlow(StationaryUniform(), LIFESPAN, (0.0, LIFESPAN))
    flow_e = DemographicFlow(StationaryExponential(0.05), LIFESPAN, (0.0, LIFESPAN))
    shared = solve_cohort_family(
        crra, crra, discount, gbm_income, r, births, LIFESPAN, 30, 400, 42,
        PointLaw(0.5), shared=True,
    )
    full = solve_cohort_family(
        crra, crra, discount, gbm_income, r, births, LIFESPAN, 30, 400, 42,
        PointLaw(0.5), shared=False,
    )
    return cal, r, flow_u, flow_e, shared, full


class TestCohortFamily:
    L = LIFESPAN

    def test_lookup_at_nodes_matches_cached_means(self, family):
        b = family.births[1]
        ages = family.age_nodes
        for k in (0, len(ages) // 2, len(ages) - 1):
            assert family.wealth_at(b, b + ages[k]).item() == pytest.approx(
                family.mean_w[1][k], rel=1e-12
            )

    def test_birth_interpolation_is_linear(self, family):
        b1, b2 = family.births[1], family.births[2]
        mid = 0.5 * (b1 + b2)
        got = family.wealth_at(mid, mid + 2.5).item()
        avg = 0.5 * (
            family.wealth_at(b1, b1 + 2.5).item()
            + family.wealth_at(b2, b2 + 2.5).item()
        )
        assert got == pytest.approx(avg, rel=1e-10)

    def test_initial_wealth_at_birth(self, family):
        for i, b in enumerate(family.births):
            assert family.wealth_at(b, b).item() == pytest.approx(1.0, rel=1e-12)

    def test_shared_family_replicates_representative_cohort(
        self, crra, discount, gbm_income
    ):
        r = RatePath.constant(0.03, TimeGrid(0.0, self.L, 10))
        births = np.array([-5.0, -2.5, 0.0])
        fam = solve_cohort_family(
            crra, crra, discount, gbm_income, r, births, self.L, 20, 200, 42,
            PointLaw(1.0), shared=True,
        )
        for i in range(1, len(births)):
            np.testing.assert_array_equal(fam.mean_w[i], fam.mean_w[0])
            np.testing.assert_array_equal(fam.mean_c[i], fam.mean_c[0])


class TestOlgAggregation:
    L = LIFESPAN

    def test_out_of_window_time_rejected(self, olg_setup):
        cal, r, flow_u, *_ , full = olg_setup
        with pytest.raises(ValueError):
            olg_aggregates(full, flow_u, -1.0)
        with pytest.raises(ValueError):
            olg_aggregates(full, flow_u, self.L + 1.0)

    def test_aggregate_income_matches_age_average(self, olg_setup):
        # income grows at mu = 0.01 with age, so the uniform-age
        # aggregate is (e^{mu L} - 1)/(mu L) in expectation
        cal, r, flow_u, flow_e, shared, full = olg_setup
        expected = (np.exp(0.01 * self.L) - 1.0) / (0.01 * self.L)
        for t in (0.0, 2.0, 4.5):
            _, _, agg_income = olg_aggregates(full, flow_u, t)
            assert agg_income == pytest.approx(expected, rel=2e-2)

    def test_stationary_shared_aggregate_is_time_invariant(self, olg_setup):
        cal, r, flow_u, flow_e, shared, full = olg_setup
        W = np.array([olg_aggregates(shared, flow_u, float(t))[0] for t in cal.nodes])
        assert np.max(np.abs(W - W[0])) <= 1e-10

    def test_phi_map_reduces_to_rW_for_stationary_aggregate(self, olg_setup):
        # with a time-invariant aggregate, Phi(r)_t = r_t W_t - dW/dt
        # collapses to r_t W_t
        cal, r, flow_u, flow_e, shared, full = olg_setup
        phi = olg_phi_map(r, shared, flow_u, cal)
        W0 = olg_aggregates(shared, flow_u, 0.0)[0]
        np.testing.assert_allclose(phi.values, -0.3 * W0, atol=1e-3)

    def test_phi_map_matches_finite_difference_identity(self, olg_setup):
        # Phi(r)_t = r_t W_t - dW/dt, with dW/dt taken by central
        # differences of the quadrature aggregate
        cal, r, flow_u, flow_e, shared, full = olg_setup
        phi = olg_phi_map(r, full, flow_e, cal)
        h = 1e-3
        for t in cal.nodes[1:-1]:
            t = float(t)
            W = olg_aggregates(full, flow_e, t)[0]
            dW = (
                olg_aggregates(full, flow_e, t + h)[0]
                - olg_aggregates(full, flow_e, t - h)[0]
            ) / (2.0 * h)
            assert phi(t).item() == pytest.approx(-0.3 * W - dW, abs=2e-3)


class TestStationaryBisect:
    L = 5.0

    def test_finds_clearing_rate(self, crra, discount, gbm_income):
        flow = DemographicFlow(StationaryUniform(), self.L, (0.0, self.L))
        res = stationary_rate_bisect(
            crra, crra, discount, gbm_income, flow, 2.0, (-1.0, 0.5), 30, 300, 42,
            PointLaw(0.5), n_cohorts=7, tol=1e-3,
        )
        assert res.converged
        assert np.ptp(res.rate.values) == 0.0  # constant-rate equilibrium
        # re-aggregated wealth matches the target within combined noise;
        # the bisection target carries its own Monte Carlo error
        W = np.asarray(res.diagnostics["aggregate_wealth"])
        se = np.asarray(res.diagnostics["aggregate_se"])
        slack = 3.0 * np.sqrt(se**2 + res.diagnostics["target_se"] ** 2)
        assert np.all(np.abs(W - 2.0) <= np.maximum(slack, 5e-2))

    def test_unattainable_target_reports_no_bracket(self, crra, discount, gbm_income):
        flow = DemographicFlow(StationaryUniform(), self.L, (0.0, self.L))
        with pytest.raises(ConfigurationError, match="sign change"):
            stationary_rate_bisect(
                crra, crra, discount, gbm_income, flow, 1e9, (-0.5, 0.5), 20, 100,
                42, PointLaw(0.5), n_cohorts=5, tol=1e-2, max_widenings=1,
            )

    def test_nonstationary_flow_rejected(self, crra, discount, gbm_income):
        from olgsim import CustomFlow

        flow = DemographicFlow(
            CustomFlow(lambda t, b: np.full_like(b, 1.0 / self.L)), self.L, (0.0, self.L)
        )
        with pytest.raises(ConfigurationError):
            stationary_rate_bisect(
                crra, crra, discount, gbm_income, flow, 1.0, (-0.5, 0.5), 20, 50,
                42, PointLaw(0.5), n_cohorts=3,
            )
