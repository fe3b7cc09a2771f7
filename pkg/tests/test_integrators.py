"""Tests pour integrators/ — cache, cœurs, compositions de Strang et pilote."""

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from core.errors import InvalidArgumentError, StepFailureError
from core.matfun import TimeDependentDamping, damping_propagator, expm
from core.models import SolverControls
from core.solver_stats import SolverStats
from core.system import (
    SchemeState,
    SemidiscreteSystem,
    modified_energy,
    predictor_exponential,
    sav_direction,
)
from harness.experiments import monotonicity
from integrators import steppers
from integrators.driver import METHODS, get_method, integrate, method_applicable, step_count
from integrators.nonlinear import fixed_point_solve, solve_multiplier
from integrators.propagators import build_cache
from integrators.splitting import step_seisav
from integrators.steppers import step_eilm, step_eisav, step_lm_cn
from tests.conftest import extended_lm_rhs, extended_sav_rhs, random_spd

J2 = np.array([[0.0, 1.0], [-1.0, 0.0]])


def _quartic_2d():
    return SemidiscreteSystem(
        label="quartic",
        S=J2,
        M=np.eye(2),
        potential=lambda z: 0.25 * float(np.sum(z ** 4)),
        grad_potential=lambda z: z ** 3,
    )


def _per_step_drift(values):
    values = np.asarray(values)
    return np.abs(np.diff(values)) / (1.0 + np.abs(values[:-1]))


# ── Cache ────────────────────────────────────────────────────────────────────

class TestPropagatorCache:
    def test_klein_gordon_passes_residual_check(self, kg_system):
        cache = build_cache(kg_system, 1.0 / 32.0)
        assert cache.matches(kg_system, 1.0 / 32.0)
        left, right = cache.damping_halves(0.0)
        assert np.allclose(left, damping_propagator(kg_system.damping, 0.0, 1.0 / 64.0))
        assert left is right

    def test_undamped_halves_are_identity(self, kg_conservative):
        left, right = build_cache(kg_conservative, 0.1).damping_halves(3.0)
        assert np.array_equal(left, np.eye(40))
        assert np.array_equal(right, np.eye(40))

    def test_zero_operator(self):
        system = SemidiscreteSystem(
            label="static", S=J2, M=np.zeros((2, 2)),
            potential=lambda z: 0.0, grad_potential=lambda z: np.zeros_like(z),
        )
        cache = build_cache(system, 0.5)
        assert np.allclose(cache.E, np.eye(2), rtol=0, atol=1e-15)
        assert np.allclose(cache.Phi1, np.eye(2), rtol=0, atol=1e-15)

    def test_time_dependent_halves_computed_per_step(self, rng):
        D0 = random_spd(rng, 2, 0.5, 1.0)
        damping = TimeDependentDamping(lambda t: (1.0 + t) * D0, lambda a, b: ((b - a) + 0.5 * (b * b - a * a)) * D0)
        system = SemidiscreteSystem(
            label="td", S=J2, M=np.eye(2),
            potential=lambda z: 0.0, grad_potential=lambda z: np.zeros_like(z), damping=damping,
        )
        cache = build_cache(system, 0.2)
        assert cache.Psi_half_left is None
        left, _ = cache.damping_halves(1.0)
        assert np.allclose(left, expm(-(0.1 + 0.5 * (1.21 - 1.0)) * D0))

    def test_rejects_invalid_step(self, kg_system):
        with pytest.raises(InvalidArgumentError, match="h doit être > 0"):
            build_cache(kg_system, -0.1)

    def test_foreign_cache_rejected(self, kg_system):
        cache = build_cache(kg_system, 0.1)
        state = SchemeState.initial(kg_system, kg_system.z0, "sav")
        with pytest.raises(InvalidArgumentError, match="incompatible"):
            step_seisav(kg_system, state, 0.05, cache)


# ── Schémas non scindés ──────────────────────────────────────────────────────

class TestEisav:
    def test_zero_potential_is_exact_flow(self, toy_system_factory, rng):
        system = toy_system_factory(quartic=0.0)
        h = 0.1
        cache = build_cache(system, h)
        state = SchemeState.initial(system, rng.standard_normal(4), "sav")
        new = step_eisav(system, state, h, cache)
        assert np.allclose(new.z, cache.E @ state.z, rtol=0, atol=1e-15)
        assert new.aux == state.aux

    def test_matches_dense_coupled_solve(self, toy_system_factory, rng):
        """Résolution directe du système (z¹, r¹) de taille d+1 sur 50 problèmes aléatoires."""
        h = 0.1
        for _ in range(50):
            system = toy_system_factory(d=4)
            z = 0.5 * rng.standard_normal(4)
            state = SchemeState.initial(system, z, "sav")
            cache = build_cache(system, h)

            g = sav_direction(system, predictor_exponential(system, z, h, cache))
            w = cache.Phi1 @ (system.S @ g)
            A = np.zeros((5, 5))
            A[:4, :4] = np.eye(4)
            A[:4, 4] = -0.5 * h * w
            A[4, :4] = -0.5 * g
            A[4, 4] = 1.0
            rhs = np.concatenate([cache.E @ z + 0.5 * h * w * state.aux, [state.aux - 0.5 * g @ z]])
            expected = np.linalg.solve(A, rhs)

            new = step_eisav(system, state, h, cache)
            assert np.max(np.abs(new.z - expected[:4])) <= 1e-12 * (1.0 + np.max(np.abs(expected[:4])))
            assert abs(new.aux - expected[4]) <= 1e-12 * (1.0 + abs(expected[4]))

    def test_conserves_modified_energy_on_toy(self, toy_system_factory, rng):
        system = toy_system_factory(d=4)
        state = SchemeState.initial(system, 0.5 * rng.standard_normal(4), "sav")
        cache = build_cache(system, 0.05)
        before = modified_energy(system, state)
        for _ in range(100):
            state = step_eisav(system, state, 0.05, cache)
        assert abs(modified_energy(system, state) - before) <= 1e-11 * (1.0 + abs(before))

    def test_rejects_lm_state(self, kg_system):
        state = SchemeState.initial(kg_system, kg_system.z0, "lm")
        with pytest.raises(InvalidArgumentError, match="exige un état 'sav'"):
            step_eisav(kg_system, state, 0.1)


class TestEilm:
    def test_multiplier_matches_grid_scan(self):
        system = _quartic_2d()
        h = 0.1
        z = np.array([1.0, 0.5])
        cache = build_cache(system, h)
        state = SchemeState.initial(system, z, "lm")
        new = step_eilm(system, state, h, cache)

        f = system.grad_potential(predictor_exponential(system, z, h, cache))
        p = cache.E @ z
        q = h * (cache.Phi1 @ (system.S @ f))
        eta = float((new.z - p) @ q / (q @ q))
        assert np.allclose(new.z, p + eta * q, rtol=0, atol=1e-14)

        def residual(e):
            z1 = p + e * q
            return system.potential(z1) - state.aux - e * (f @ (z1 - z))

        grid = np.linspace(0.5, 1.5, 100001)
        values = np.array([residual(e) for e in grid])
        crossings = np.nonzero(np.sign(values[:-1]) != np.sign(values[1:]))[0]
        assert crossings.size > 0
        nearest = grid[crossings[np.argmin(np.abs(grid[crossings] - eta))]]
        assert abs(nearest - eta) <= 2.0 * (grid[1] - grid[0])
        assert abs(residual(eta)) <= 1e-13

    def test_zero_potential_gives_unit_multiplier(self, toy_system_factory, rng):
        system = toy_system_factory(quartic=0.0)
        cache = build_cache(system, 0.1)
        state = SchemeState.initial(system, rng.standard_normal(4), "lm")
        stats = SolverStats()
        new = step_eilm(system, state, 0.1, cache, stats=stats)
        assert np.allclose(new.z, cache.E @ state.z, rtol=0, atol=1e-15)
        assert stats.iterative_solves == 0

    def test_lm_cn_records_newton_solves(self, kg_system):
        stats = SolverStats()
        state = SchemeState.initial(kg_system, kg_system.z0, "lm")
        step_lm_cn(kg_system, state, 1.0 / 32.0, stats=stats)
        assert stats.iterative_solves == 1


# ── Solveurs itératifs ───────────────────────────────────────────────────────

class TestFixedPoint:
    def test_contraction(self):
        stats = SolverStats()
        result = fixed_point_solve(lambda x: 0.5 * x + 1.0, np.zeros(3), SolverControls(), stats)
        assert np.allclose(result, 2.0, rtol=0, atol=1e-14)
        assert stats.iterative_solves == 1
        assert stats.fixed_point_iters > 1

    def test_divergence_detected(self):
        with pytest.raises(StepFailureError, match="Divergence"):
            fixed_point_solve(lambda x: 2.0 * x + 1.0, np.zeros(2), SolverControls())

    def test_iteration_limit(self):
        controls = SolverControls(fixed_point_max_iter=10)
        with pytest.raises(StepFailureError, match="non convergé"):
            fixed_point_solve(lambda x: -x, np.ones(2), controls)


class TestMultiplier:
    # V(z) = ½z², p = 0, q = 1, z_n = 0, f = 2 ⇒ F(η) = −1.5η² − V_n
    @staticmethod
    def _solve(V_n, controls=None, stats=None):
        return solve_multiplier(
            lambda z: 0.5 * float(z @ z), lambda z: z,
            np.zeros(1), np.ones(1), np.zeros(1), V_n, np.array([2.0]),
            controls or SolverControls(), stats,
        )

    def test_newton_root(self):
        stats = SolverStats()
        assert self._solve(-1.5 * 1.2 ** 2, stats=stats) == pytest.approx(1.2, rel=1e-12)
        assert stats.ladder_fallbacks == 0

    def test_fallback_ladder(self, caplog):
        stats = SolverStats()
        controls = SolverControls(newton_max_iter=1)
        eta = self._solve(-1.5 * 1.2 ** 2, controls=controls, stats=stats)
        assert eta == pytest.approx(1.2, rel=1e-10)
        assert stats.ladder_fallbacks == 1
        assert "brentq" in caplog.text

    def test_no_root(self):
        with pytest.raises(StepFailureError, match="sans solution") as exc_info:
            self._solve(1.0)
        assert exc_info.value.diagnostics["eta_iterates"]
        assert len(exc_info.value.diagnostics["residuals"]) == len(exc_info.value.diagnostics["eta_iterates"])

    def test_no_real_root_accepts_least_residual(self, caplog):
        # F(η) = −1.5η² − 1e−11 : maximum −1e−11 en η = 0, sans racine
        stats = SolverStats()
        eta = self._solve(1e-11, stats=stats)
        assert eta == pytest.approx(0.0, abs=1e-4)
        assert "sans racine réelle" in caplog.text
        assert stats.ladder_fallbacks == 1

    def test_flat_residual_keeps_unit_multiplier(self):
        stats = SolverStats()
        eta = self._solve(-1.5 + 5e-12, stats=stats)
        assert eta == 1.0
        assert stats.newton_iters == 0
        assert stats.iterative_solves == 1

    def test_degenerate_constraint(self):
        eta = solve_multiplier(
            lambda z: 0.0, lambda z: np.zeros_like(z), np.ones(2), np.ones(2), np.zeros(2), 0.0,
            np.zeros(2), SolverControls(),
        )
        assert eta == 1.0


# ── Propriétés structurelles ─────────────────────────────────────────────────

CONSERVATIVE_FIXTURES = ["kg_conservative", "afpu_undamped", "gkdv_undamped"]


class TestConservativeLimit:
    """Sans amortissement, H̃ (SAV) ou H (LM, AVF) est conservée pas à pas."""

    @pytest.mark.parametrize("name", CONSERVATIVE_FIXTURES)
    @pytest.mark.parametrize("method", list(METHODS))
    def test_per_step_drift(self, name, method, request):
        system = request.getfixturevalue(name)
        h = 2.0 ** -6
        traj = integrate(system, method, system.z0, h, 10_000 * h)
        assert len(traj) == 10_001
        assert np.max(_per_step_drift(traj.tracked_energy)) <= 1e-10

    def test_split_equals_unsplit_without_damping(self, kg_conservative):
        h = 2.0 ** -5
        for split, unsplit in (("seisav", "eisav"), ("seilm", "eilm")):
            a = integrate(kg_conservative, split, None, h, 100 * h)
            b = integrate(kg_conservative, unsplit, None, h, 100 * h)
            assert np.array_equal(a.states, b.states)


DISSIPATIVE_FIXTURES = ["kg_system", "afpu_system", "afpu_dissipative", "gkdv_system"]


class TestDissipation:
    @pytest.mark.parametrize("name", DISSIPATIVE_FIXTURES)
    @pytest.mark.parametrize("method", list(METHODS))
    def test_reference_configurations(self, name, method, request):
        system = request.getfixturevalue(name)
        if not method_applicable(method, system):
            pytest.skip(f"{method} non applicable à {system.label}")
        traj = integrate(system, method, system.z0, 2.0 ** -6, 50.0)
        report = monotonicity(traj.tracked_energy, 1e-10)
        assert report.violations == 0, report.violating_steps[:5]
        assert traj.tracked_energy[-1] < traj.tracked_energy[0]

    @pytest.mark.parametrize("method", list(METHODS))
    def test_all_methods_on_klein_gordon(self, kg_system, method):
        traj = integrate(kg_system, method, kg_system.z0, 2.0 ** -5, 10.0)
        assert monotonicity(traj.tracked_energy, 1e-10).violations == 0

    @pytest.mark.parametrize("method", ["lm_cn", "seilm"])
    def test_lm_constraint_exact(self, kg_system, method):
        traj = integrate(kg_system, method, kg_system.z0, 2.0 ** -5, 10.0)
        V = np.array([kg_system.potential(z) for z in traj.states])
        assert np.max(np.abs(traj.aux - V) / (1.0 + np.abs(V))) <= 10 * SolverControls().newton_tol


class TestSplittingOrder:
    @pytest.mark.parametrize("method", ["seisav", "seilm", "seavf"])
    def test_linear_problem_second_order(self, method, toy_system_factory, rng):
        B = rng.standard_normal((4, 2))
        D = B @ B.T
        system = toy_system_factory(d=4, quartic=0.0, damping=D)
        z0 = rng.standard_normal(4)
        T = 1.0
        exact = expm(T * (system.SM - system.damping.matrix)) @ z0
        steps = [2.0 ** -k for k in range(5, 9)]
        errors = [np.max(np.abs(integrate(system, method, z0, h, T).terminal_state - exact)) for h in steps]
        slope = np.polyfit(np.log(steps), np.log(errors), 1)[0]
        assert 1.9 <= slope <= 2.1


    def test_seisav_local_error_third_order(self, toy_system_factory, rng):
        B = rng.standard_normal((4, 2))
        D = B @ B.T
        system = toy_system_factory(d=4, quartic=0.0, damping=D)
        z0 = rng.standard_normal(4)
        state = SchemeState.initial(system, z0, "sav")
        steps = [2.0 ** -k for k in range(3, 7)]
        errors = [
            np.max(np.abs(step_seisav(system, state, h).z - expm(h * (system.SM - D)) @ z0))
            for h in steps
        ]
        slope = np.polyfit(np.log(steps), np.log(errors), 1)[0]
        assert slope >= 2.9


class TestSeisavIsDirect:
    def test_no_iterative_solver_invoked(self, kg_system, mocker):
        forbidden = AssertionError("solveur itératif appelé")
        fp = mocker.patch("integrators.steppers.fixed_point_solve", side_effect=forbidden)
        newton = mocker.patch("integrators.steppers.solve_multiplier", side_effect=forbidden)
        traj = integrate(kg_system, "seisav", None, 2.0 ** -5, 1.0)
        assert traj.stats.iterative_solves == 0
        fp.assert_not_called()
        newton.assert_not_called()

    def test_implicit_baselines_count_solves(self, kg_system):
        for method in ("seilm", "avf", "seavf", "lm_cn"):
            assert integrate(kg_system, method, None, 2.0 ** -5, 1.0).stats.iterative_solves > 0


class TestCnPredictor:
    @pytest.mark.parametrize("method", ["sav_cn", "lm_cn"])
    def test_cores_use_midpoint_predictor(self, method, kg_system, mocker):
        spy = mocker.spy(steppers, "predictor_midpoint_linear")
        integrate(kg_system, method, None, 2.0 ** -5, 4 * 2.0 ** -5)
        assert spy.call_count == 4


class TestExtendedSystem:
    """SAV/CN et LM/CN convergent vers le flot exact du système étendu."""

    T = 1.0
    STEPS = [2.0 ** -k for k in range(5, 8)]

    @staticmethod
    def _exact(rhs, y0, T, t_eval=None):
        sol = solve_ivp(rhs, (0.0, T), y0, method="DOP853", rtol=1e-12, atol=1e-12, t_eval=t_eval)
        assert sol.success
        return sol

    def test_sav_extended_flow_invariants(self, toy_system_factory, rng):
        system = toy_system_factory()
        z0 = 0.5 * rng.standard_normal(4)
        y0 = np.append(z0, np.sqrt(system.potential(z0) + system.sav_shift))
        sol = self._exact(extended_sav_rhs(system), y0, self.T, t_eval=np.linspace(0.0, self.T, 11))
        def extended_energy(z, r):
            return 0.5 * float(z @ system.M @ z) + r ** 2 - system.sav_shift

        H0 = extended_energy(z0, y0[-1])
        for y in sol.y.T:
            z, r = y[:-1], y[-1]
            assert r == pytest.approx(np.sqrt(system.potential(z) + system.sav_shift), rel=1e-9)
            assert extended_energy(z, r) == pytest.approx(H0, abs=1e-8)

    def test_lm_extended_flow_tracks_potential(self, toy_system_factory, rng):
        system = toy_system_factory()
        z0 = 0.5 * rng.standard_normal(4)
        sol = self._exact(extended_lm_rhs(system), np.append(z0, system.potential(z0)), self.T,
                          t_eval=np.linspace(0.0, self.T, 11))
        for y in sol.y.T:
            assert y[-1] == pytest.approx(system.potential(y[:-1]), abs=1e-10)

    @pytest.mark.parametrize(
        "method,rhs_factory,aux0",
        [
            ("sav_cn", extended_sav_rhs, lambda s, z: np.sqrt(s.potential(z) + s.sav_shift)),
            ("lm_cn", extended_lm_rhs, lambda s, z: s.potential(z)),
        ],
    )
    def test_second_order_against_extended_flow(self, method, rhs_factory, aux0, toy_system_factory, rng):
        system = toy_system_factory()
        z0 = 0.5 * rng.standard_normal(4)
        exact = self._exact(rhs_factory(system), np.append(z0, aux0(system, z0)), self.T).y[:, -1]
        errors = []
        for h in self.STEPS:
            traj = integrate(system, method, z0, h, self.T)
            error = np.max(np.abs(traj.terminal_state - exact[:-1]))
            if method == "lm_cn":
                # V stocké contre s(T) = V(z(T))
                error = max(error, abs(traj.aux[-1] - exact[-1]))
            errors.append(error)
        slope = np.polyfit(np.log(self.STEPS), np.log(errors), 1)[0]
        assert 1.8 <= slope <= 2.2


# ── Pilote ───────────────────────────────────────────────────────────────────

class TestDriver:
    def test_record_every_keeps_final_state(self, kg_system):
        traj = integrate(kg_system, "seisav", None, 1.0 / 32.0, 1.0, record_every=5)
        assert list(traj.steps) == [0, 5, 10, 15, 20, 25, 30, 32]
        assert traj.times[-1] == pytest.approx(1.0)

    def test_zero_horizon(self, kg_system):
        traj = integrate(kg_system, "seilm", None, 0.1, 0.0)
        assert len(traj) == 1
        assert np.array_equal(traj.terminal_state, kg_system.z0)

    def test_step_count(self):
        assert step_count(0.1, 0.3) == 3
        assert step_count(2.0 ** -6, 50.0) == 3200
        with pytest.raises(InvalidArgumentError, match="multiple entier"):
            step_count(0.3, 1.0)

    def test_unknown_method(self):
        with pytest.raises(InvalidArgumentError, match="Méthode inconnue"):
            get_method("rk4")

    def test_unsplit_rejected_on_gkdv(self, gkdv_system):
        with pytest.raises(InvalidArgumentError, match="non applicable"):
            integrate(gkdv_system, "avf", None, 2.0 ** -6, 1.0)

    def test_step_failure_is_annotated(self, kg_system, mocker):
        mocker.patch("integrators.steppers.sav_direction", side_effect=StepFailureError("V + C ≤ 0"))
        with pytest.raises(StepFailureError, match="Pas 1") as exc_info:
            integrate(kg_system, "seisav", None, 2.0 ** -5, 1.0)
        assert exc_info.value.step_index == 1

    def test_tracked_energy(self, kg_system):
        sav = integrate(kg_system, "seisav", None, 2.0 ** -5, 0.25)
        lm = integrate(kg_system, "seilm", None, 2.0 ** -5, 0.25)
        assert get_method("seisav").tracked_column == "H_tilde"
        assert np.array_equal(sav.tracked_energy, sav.aux)
        assert np.array_equal(lm.tracked_energy, lm.H)
        # H̃ = H à l'instant initial
        assert sav.aux[0] == pytest.approx(sav.H[0], abs=1e-13)
