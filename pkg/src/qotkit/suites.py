"""Randomized verification of the transport and entropy inequalities.

Every suite draws its trial ``t`` from ``numpy.random.default_rng([seed, t])``
so a report depends on ``(suite, seed, params)`` only. A check records
``margin = rhs - lhs`` and counts as a violation when the margin is below
``-tol``. Trials whose relative entropy is infinite are skipped.
"""

import csv
import io
import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.special import entr, logsumexp

from . import conf
from .channels import random_channel, random_neighbor_pair
from .classical import kl, tv
from .conic import SolveOptions
from .exceptions import DomainError, QotkitError, ShapeMismatch
from .linalg import FactorShape
from .quadratic import (
    centered_from_values,
    cost_operator,
    dquad,
    dquad_lower_bound,
    lieb_monotonicity_gap,
    plan_cost,
    self_cost_identity,
)
from .serializers import digest, encode_complex_array
from .states import (
    DensityOperator,
    Observable,
    helstrom_distributions,
    random_observable,
    random_product_state,
    random_state,
    rel_entropy,
    trace_distance,
    vn_entropy,
)
from .wasserstein import lipschitz, spectrum_interval_check, w1, w1_dual, w1_with_dual


logger = logging.getLogger(__name__)

DELTA_GRID = (0.5, 1.0, 2.0)
GIBBS_TIMES = (-2.0, -1.0, -0.5, 0.5, 1.0, 2.0)
CSV_FIELDS = ("trial", "seed", "check", "lhs", "rhs", "margin")


def binary_entropy(x: float) -> float:
    """``h2(x) = -(1-x) ln(1-x) - x ln x`` on ``[0, 1]`` with ``h2(0) = h2(1) = 0``.

    Raises
    ------
    DomainError
        If ``x`` lies outside ``[0, 1]``.
    """
    x = float(x)
    if not 0.0 <= x <= 1.0:
        raise DomainError(f"Binary entropy needs x in [0, 1], got {x}")
    return float(entr(x) + entr(1.0 - x))


def spectral_tail_count(eigenvalues, delta: float, n: int) -> int:
    """Number of eigenvalues ``w`` with ``w >= δ sqrt(n) / 2``."""
    return int(np.sum(np.asarray(eigenvalues) >= delta * np.sqrt(n) / 2))


@dataclass
class CheckRow:
    trial: int
    check: str
    lhs: float
    rhs: float
    margin: float


@dataclass
class SuiteReport:
    """Rows of one suite run, with the violations and the worst margin.

    ``notes`` holds counters that are reported but never fail a run, such as
    the experimental centered-cost triangle check.
    """

    suite: str
    seed: int
    trials: int
    params: dict
    rows: list = field(default_factory=list)
    violations: list = field(default_factory=list)
    skipped: int = 0
    notes: dict = field(default_factory=dict)

    @property
    def worst_margin(self) -> float:
        return min((row.margin for row in self.rows), default=float("inf"))

    @property
    def passed(self) -> bool:
        return not self.violations

    def note(self, key: str, amount: int = 1) -> None:
        self.notes[key] = self.notes.get(key, 0) + amount

    def to_dict(self) -> dict:
        worst = self.worst_margin
        return {
            "suite": self.suite,
            "seed": self.seed,
            "trials": self.trials,
            "params": self.params,
            "skipped": self.skipped,
            "notes": dict(sorted(self.notes.items())),
            "worstMargin": worst if np.isfinite(worst) else None,
            "violations": self.violations,
            "rows": [
                {"trial": r.trial, "check": r.check, "lhs": r.lhs, "rhs": r.rhs, "margin": r.margin}
                for r in self.rows
            ],
        }

    def to_csv(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(CSV_FIELDS)
        for r in self.rows:
            writer.writerow([r.trial, self.seed, r.check, repr(r.lhs), repr(r.rhs), repr(r.margin)])
        return buffer.getvalue()


class Suite:
    """Base class of the verification suites.

    Subclasses set ``name`` and ``tolerances`` (check name to additive
    tolerance) and implement :meth:`run_trial`. ``tol`` tightens every
    tolerance to at most its value and never loosens one.
    """

    name = None
    tolerances = None
    qubits = True

    def __init__(
        self,
        n: int = 2,
        trials: int = 100,
        seed: int = 0,
        tol: Optional[float] = None,
        options: Optional[SolveOptions] = None,
        w1_fn: Optional[Callable] = None,
        w1_dual_fn: Optional[Callable] = None,
    ):
        if self.name is None:
            raise NotImplementedError("The name attribute must be set.")
        if self.tolerances is None:
            raise NotImplementedError("The tolerances attribute must be set.")
        if isinstance(n, bool) or not isinstance(n, int) or n < 1:
            raise ShapeMismatch(f"n must be a positive integer, got {n!r}")
        if self.qubits and n > conf.nmax():
            raise ShapeMismatch(f"{n} qubits exceed the cap of {conf.nmax()} (QOTKIT_NMAX)")
        if isinstance(trials, bool) or not isinstance(trials, int) or trials < 0:
            raise QotkitError(f"trials must be a nonnegative integer, got {trials!r}")
        if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
            raise QotkitError(f"seed must be a nonnegative integer, got {seed!r}")
        if tol is not None and not tol > 0:
            raise QotkitError(f"tol must be positive, got {tol!r}")
        self.n = n
        self.trials = trials
        self.seed = seed
        self.tol = tol
        self.options = options
        self.w1_hooked = w1_fn is not None or w1_dual_fn is not None
        self.w1_fn = w1_fn or (lambda rho, sigma: w1(rho, sigma, self.options).value)
        self.w1_dual_fn = w1_dual_fn or (lambda rho, sigma: w1_dual(rho, sigma, self.options))
        if tol is not None and tol > max(self.tolerances.values()):
            logger.warning(f"tol={tol} is looser than every {self.name} tolerance and has no effect")

    @property
    def shape(self) -> FactorShape:
        return FactorShape.qubits(self.n)

    def params(self) -> dict:
        params = {"n": self.n}
        if self.tol is not None:
            params["tol"] = self.tol
        return params

    def tolerance(self, check: str) -> float:
        base = self.tolerances[check]
        return base if self.tol is None else min(base, self.tol)

    def record(self, report: SuiteReport, trial: int, check: str, lhs, rhs, inputs=()) -> bool:
        """Add a row and, when the margin is below ``-tol``, a violation with the inputs digest."""
        lhs, rhs = float(lhs), float(rhs)
        margin = rhs - lhs
        report.rows.append(CheckRow(trial, check, lhs, rhs, margin))
        if margin >= -self.tolerance(check):
            return True
        described = [encode_complex_array(getattr(x, "mat", x)) for x in inputs]
        report.violations.append(
            {
                "trial": trial,
                "seed": [self.seed, trial],
                "check": check,
                "margin": margin,
                "inputsDigest": digest(described),
            }
        )
        logger.warning(f"{self.name}: {check} violated in trial {trial} (seed {self.seed}), margin {margin:.3e}")
        return False

    def run_trial(self, report: SuiteReport, trial: int, rng: np.random.Generator) -> None:
        raise NotImplementedError

    def run(self) -> SuiteReport:
        report = SuiteReport(self.name, self.seed, self.trials, self.params())
        for trial in range(self.trials):
            self.run_trial(report, trial, np.random.default_rng([self.seed, trial]))
        logger.info(
            f"{self.name}: {self.trials} trials, {len(report.violations)} violations, "
            f"{report.skipped} skipped, worst margin {report.worst_margin:.3e}"
        )
        return report


class PinskerSuite(Suite):
    """``D_tr(ρ, σ) <= sqrt(S(ρ||σ) / 2)`` and the Helstrom measurement step ``S(r||s) <= S(ρ||σ)``."""

    name = "pinsker"
    tolerances = {"pinsker": 1e-7, "helstrom_monotonicity": 1e-7, "helstrom_trace_distance": 1e-8}

    def run_trial(self, report, trial, rng):
        rho, sigma = random_state(self.shape, seed=rng), random_state(self.shape, seed=rng)
        entropy = rel_entropy(rho, sigma)
        if not np.isfinite(entropy):
            report.skipped += 1
            return
        distance = trace_distance(rho, sigma)
        self.record(report, trial, "pinsker", distance, np.sqrt(entropy / 2), (rho, sigma))
        r, s = helstrom_distributions(rho, sigma)
        self.record(report, trial, "helstrom_monotonicity", kl(r, s), entropy, (rho, sigma))
        self.record(report, trial, "helstrom_trace_distance", abs(tv(r, s) - distance), 0.0, (rho, sigma))


class MartonSuite(Suite):
    """``W1(ρ, σ) <= sqrt(n/2 S(ρ||σ))`` for product ``σ``, with ``D_tr <= W1`` alongside."""

    name = "marton"
    tolerances = {"marton": 1e-6, "trace_distance_floor": 1e-6}

    def run_trial(self, report, trial, rng):
        rho = random_state(self.shape, seed=rng)
        sigma = random_product_state(self.n, seed=rng)
        entropy = rel_entropy(rho, sigma)
        if not np.isfinite(entropy):
            report.skipped += 1
            return
        value = self.w1_fn(rho, sigma)
        self.record(report, trial, "marton", value, np.sqrt(self.n / 2 * entropy), (rho, sigma))
        self.record(report, trial, "trace_distance_floor", trace_distance(rho, sigma), value, (rho, sigma))


class ConcentrationSuite(Suite):
    """Spectral concentration of traceless observables with ``||A||_L <= 1``.

    For each ``δ`` the number of eigenvalues at least ``δ sqrt(n) / 2`` is at
    most ``2^n exp(-δ^2 / 2)``, and ``ln tr exp(tA) <= n ln 2 + n t^2 / 8``.
    """

    name = "concentration"
    tolerances = {"eigenvalue_count": 0.0, "gibbs_moment": 1e-9, "spectrum_interval": 0.0}

    def __init__(self, *args, delta_grid=DELTA_GRID, **kwargs):
        super().__init__(*args, **kwargs)
        self.delta_grid = tuple(float(d) for d in delta_grid)

    def params(self) -> dict:
        return {**super().params(), "deltaGrid": list(self.delta_grid)}

    def run_trial(self, report, trial, rng):
        A = random_observable(self.shape, seed=rng).mat
        A = A - np.trace(A).real / A.shape[0] * np.eye(A.shape[0])
        result = lipschitz(Observable(A, self.shape), self.options)
        if result.value > 0:
            A = A / result.value
        observable = Observable(A, self.shape)
        w = np.linalg.eigvalsh(observable.mat)
        for delta in self.delta_grid:
            count = spectral_tail_count(w, delta, self.n)
            bound = 2 ** self.n * np.exp(-(delta ** 2) / 2)
            self.record(report, trial, "eigenvalue_count", count, bound, (observable,))
        for t in GIBBS_TIMES:
            self.record(
                report,
                trial,
                "gibbs_moment",
                logsumexp(t * w),
                self.n * np.log(2) + self.n * t ** 2 / 8 + np.log1p(1e-9),
                (observable,),
            )
        holds = spectrum_interval_check(observable, 1.0 if result.value > 0 else 0.0)
        self.record(report, trial, "spectrum_interval", 0.0 if holds else 1.0, 0.0, (observable,))


class EntropyContinuitySuite(Suite):
    """``|S(ρ) - S(σ)| <= n h2(W1/n) + W1 ln 3``.

    The Fannes-Audenaert bound ``h2(D_tr) + D_tr ln(2^n - 1)`` is evaluated
    alongside; the note ``w1_bound_tighter`` counts trials where the W1
    bound is the smaller one.
    """

    name = "entropy"
    tolerances = {"entropy_continuity": 1e-7}

    def run_trial(self, report, trial, rng):
        rho, sigma = random_state(self.shape, seed=rng), random_state(self.shape, seed=rng)
        value = self.w1_fn(rho, sigma)
        gap = abs(vn_entropy(rho) - vn_entropy(sigma))
        # h2 is increasing on [0, 1/2] only
        x = min(max(value, 0.0) / self.n, 0.5)
        w1_bound = self.n * binary_entropy(x) + max(value, 0.0) * np.log(3)
        self.record(report, trial, "entropy_continuity", gap, w1_bound, (rho, sigma))
        distance = min(trace_distance(rho, sigma), 1.0)
        fannes = binary_entropy(distance) + distance * np.log(2 ** self.n - 1)
        if w1_bound < fannes:
            report.note("w1_bound_tighter")


class DataProcessingSuite(Suite):
    """Trace distance and relative entropy do not increase under a random channel."""

    name = "dataproc"
    tolerances = {"trace_distance_monotonicity": 1e-8, "rel_entropy_monotonicity": 1e-6}

    def run_trial(self, report, trial, rng):
        dim = 2 ** self.n
        channel = random_channel(dim, dim, int(rng.integers(1, 5)), seed=rng)
        rho, sigma = random_state(self.shape, seed=rng), random_state(self.shape, seed=rng)
        out_rho = DensityOperator(channel.apply(rho.mat), self.shape)
        out_sigma = DensityOperator(channel.apply(sigma.mat), self.shape)
        self.record(
            report,
            trial,
            "trace_distance_monotonicity",
            trace_distance(out_rho, out_sigma),
            trace_distance(rho, sigma),
            (rho, sigma),
        )
        before, after = rel_entropy(rho, sigma), rel_entropy(out_rho, out_sigma)
        if not (np.isfinite(before) and np.isfinite(after)):
            report.skipped += 1
            return
        self.record(report, trial, "rel_entropy_monotonicity", after, before, (rho, sigma))


class QuadraticSuite(Suite):
    """Properties of the quadratic transport cost on random instances.

    States live on ``dims`` dimensions (``min(2^n, 4)`` by default) and the
    cost uses ``d`` random observables. The centered-cost triangle
    inequality is an open question; its failures are counted in the notes
    and logged, never reported as violations.
    """

    name = "quadratic"
    qubits = False
    tolerances = {
        "symmetry": 1e-6,
        "lower_bound": 1e-6,
        "self_cost": 1e-6,
        "average_self_cost": 1e-6,
        "modified_triangle": 1e-5,
        "lieb_monotonicity": 1e-7,
        "plan_optimality": 1e-6,
    }

    def __init__(self, *args, dims: Optional[int] = None, d: int = 2, **kwargs):
        super().__init__(*args, **kwargs)
        self.dims = min(2 ** self.n, 4) if dims is None else int(dims)
        self.d = int(d)
        if not 1 <= self.dims <= 4:
            raise ShapeMismatch(f"dims must lie in [1, 4], got {self.dims}")
        if not 0 <= self.d <= 3:
            raise ShapeMismatch(f"d must lie in [0, 3], got {self.d}")

    def params(self) -> dict:
        return {**super().params(), "dims": self.dims, "d": self.d}

    def run_trial(self, report, trial, rng):
        dim = self.dims
        cost = cost_operator([random_observable(dim, seed=rng) for _ in range(self.d)], dim)
        sigma, rho, tau = (random_state(dim, seed=rng) for _ in range(3))
        inputs = (sigma, rho, tau)

        def squared(a, b):
            return dquad(a, b, cost, self.options).value_squared

        sr, rs = squared(sigma, rho), squared(rho, sigma)
        st, tr = squared(sigma, tau), squared(tau, rho)
        ss, rr, tt = squared(sigma, sigma), squared(rho, rho), squared(tau, tau)
        self.record(report, trial, "symmetry", abs(sr - rs), 0.0, inputs)
        self.record(report, trial, "lower_bound", dquad_lower_bound(sigma, rho, cost), sr, inputs)
        self.record(report, trial, "self_cost", abs(ss - self_cost_identity(sigma, cost)), 0.0, inputs)
        self.record(report, trial, "average_self_cost", 0.5 * ss + 0.5 * rr, sr, inputs)
        root = lambda v: np.sqrt(max(v, 0.0))
        self.record(
            report, trial, "modified_triangle", root(sr), root(st) + root(tt) + root(tr), inputs
        )

        centered = centered_from_values(sr, ss, rr)
        via = centered_from_values(st, ss, tt) + centered_from_values(tr, tt, rr)
        if centered > via + self.tolerances["modified_triangle"]:
            report.note("centered_triangle_failures")
            logger.info(f"quadratic: centered triangle fails in trial {trial}, {centered:.6g} > {via:.6g}")

        channel = random_channel(dim, dim, int(rng.integers(1, 4)), seed=rng)
        image = DensityOperator(channel.apply(sigma.mat), dim)
        for R in cost.observables:
            self.record(
                report, trial, "lieb_monotonicity", 0.0, lieb_monotonicity_gap(channel, sigma, R), inputs
            )
        self.record(
            report,
            trial,
            "plan_optimality",
            squared(sigma, image),
            plan_cost(channel, sigma, image, cost),
            inputs,
        )


class DualitySuite(Suite):
    """Strong duality for W1, the witness Lipschitz constant and ``D_tr <= W1 <= n D_tr``."""

    name = "duality"
    tolerances = {"duality_gap": 1e-6, "witness_lipschitz": 1e-5, "sandwich_lower": 1e-6, "sandwich_upper": 1e-6}

    def run_trial(self, report, trial, rng):
        rho, sigma = random_state(self.shape, seed=rng), random_state(self.shape, seed=rng)
        if self.w1_hooked:
            value, dual = self.w1_fn(rho, sigma), self.w1_dual_fn(rho, sigma)
        else:
            primal, dual = w1_with_dual(rho, sigma, self.options)
            value = primal.value
        inputs = (rho, sigma)
        self.record(report, trial, "duality_gap", abs(value - dual.value), 0.0, inputs)
        self.record(report, trial, "witness_lipschitz", lipschitz(dual.witness, self.options).value, 1.0, inputs)
        distance = trace_distance(rho, sigma)
        self.record(report, trial, "sandwich_lower", distance, value, inputs)
        self.record(report, trial, "sandwich_upper", value, self.n * distance, inputs)


class NeighborSuite(Suite):
    """``W1 <= 1`` for random pairs that agree after tracing out one qubit."""

    name = "neighbor"
    tolerances = {"neighbor_bound": 1e-6}

    def run_trial(self, report, trial, rng):
        site = int(rng.integers(self.n))
        rho, sigma = random_neighbor_pair(self.n, site, rng)
        self.record(report, trial, "neighbor_bound", self.w1_fn(rho, sigma), 1.0, (rho, sigma))


SUITES = {
    suite.name: suite
    for suite in (
        PinskerSuite,
        MartonSuite,
        ConcentrationSuite,
        EntropyContinuitySuite,
        DataProcessingSuite,
        QuadraticSuite,
        DualitySuite,
        NeighborSuite,
    )
}


def suite_pinsker(trials: int, seed: int, n: int, **kwargs) -> SuiteReport:
    return PinskerSuite(n, trials, seed, **kwargs).run()


def suite_marton(trials: int, seed: int, n: int, **kwargs) -> SuiteReport:
    return MartonSuite(n, trials, seed, **kwargs).run()


def suite_concentration(trials: int, seed: int, n: int, delta_grid=DELTA_GRID, **kwargs) -> SuiteReport:
    return ConcentrationSuite(n, trials, seed, delta_grid=delta_grid, **kwargs).run()


def suite_entropy_continuity(trials: int, seed: int, n: int, **kwargs) -> SuiteReport:
    return EntropyContinuitySuite(n, trials, seed, **kwargs).run()


def suite_data_processing(trials: int, seed: int, n: int, **kwargs) -> SuiteReport:
    return DataProcessingSuite(n, trials, seed, **kwargs).run()


def suite_quadratic(trials: int, seed: int, dims: int = 2, d: int = 2, **kwargs) -> SuiteReport:
    return QuadraticSuite(1, trials, seed, dims=dims, d=d, **kwargs).run()


def suite_duality(trials: int, seed: int, n: int, **kwargs) -> SuiteReport:
    return DualitySuite(n, trials, seed, **kwargs).run()


def run_suite(name: str, n: int, trials: int, seed: int, **kwargs) -> list:
    """Run the suite called ``name``, or every suite for ``"all"``, and return the reports.

    Raises
    ------
    KeyError
        If ``name`` is not a suite name.
    """
    names = list(SUITES) if name == "all" else [name]
    for entry in names:
        if entry not in SUITES:
            raise KeyError(f"Unknown suite {entry!r}, expected one of {sorted(SUITES)} or 'all'")
    return [SUITES[entry](n, trials, seed, **kwargs).run() for entry in names]
