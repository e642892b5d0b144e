"""Monte-Carlo sweeps over compression strength.

Every trial draws its randomness from a seed derived from
``(base_seed, grid_index, trial_index, attempt, stream)`` with
:func:`derive_seed`, so results do not depend on execution order or on the
number of worker threads. Trials are gathered by index before reduction.

Seed derivation
---------------
``derive_seed`` feeds the five integers as entropy words to
:class:`numpy.random.SeedSequence` and returns the first 64-bit word of its
generated state. SeedSequence's hashing is covered by NumPy's stream
compatibility guarantee, so derived seeds are stable across releases.
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .bounds import BoundInputs, linreg_gen_bound, oracle_rate, tradeoff_bound
from .compressors import (
    c_wstar_estimate,
    codebook_diameter,
    diameter_reg_quantize,
    distortion,
    hessian_kmeans_quantize,
    kmeans_quantize,
    oracle_compress,
    rate_estimate,
    reconstruct,
)
from .errors import NumericalError, ParameterError, SingularityError, TrainingError
from .linreg import (
    LinearProblem,
    empirical_risk,
    erm_fit,
    hessian_diag,
    population_risk,
    sample_dataset,
    sample_problem,
)
from .nn import (
    compression_ratio,
    eval_losses,
    fisher_diag,
    load_csv_task,
    make_synth_task,
    quantize_mlp,
    train_mlp,
)

log = logging.getLogger(__name__)

THREADS_ENV = "POPCOMPRESS_THREADS"
METHODS = ("oracle", "kmeans", "hessian_kmeans", "diameter_reg")
MAX_RETRIES = 10
_MASK64 = (1 << 64) - 1


def derive_seed(base_seed: int, grid_index: int, trial_index: int,
                attempt: int = 0, stream: int = 0) -> int:
    """Deterministic 64-bit seed for one trial (see module docstring)."""
    words = [int(base_seed) & _MASK64, int(grid_index), int(trial_index), int(attempt), int(stream)]
    return int(np.random.SeedSequence(words).generate_state(1, np.uint64)[0])


def resolve_threads(threads: int | None) -> int:
    """0 or None means: the environment variable if set, else the CPU count."""
    if threads:
        return max(1, int(threads))
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ParameterError(f"{THREADS_ENV} must be an integer, got {env!r}") from None
    return os.cpu_count() or 1


def _pmap(fn, items, threads):
    items = list(items)
    n = resolve_threads(threads)
    if n == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def mean_se(values) -> tuple[float, float]:
    """Sample mean and standard error (sd with ddof=1 over sqrt(count); 0 for one value)."""
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        return math.nan, math.nan
    if v.size == 1:
        return float(v[0]), 0.0
    return float(v.mean()), float(v.std(ddof=1) / math.sqrt(v.size))


@dataclass
class SweepConfig:
    d: int = 50
    n: int = 80
    noise_var: float = 1.0
    sigma_x_diag: list | float | None = None
    trials: int = 500
    base_seed: int = 0
    method: str = "kmeans"
    grid: list = field(default_factory=lambda: [2, 3, 4, 6, 8, 12, 16, 25, 50])
    beta: float = 0.0
    k: int = 4
    beta_grid: list = field(default_factory=lambda: [0.0, 1.0, 10.0, 100.0])
    max_iters: int = 100
    restarts: int = 1
    rate_mode: str = "entropy"
    c_wstar_policy: str = "max"
    threads: int = 0

    def problem(self) -> LinearProblem:
        sigma = self.sigma_x_diag
        if sigma is None:
            sigma = np.ones(self.d)
        elif np.isscalar(sigma):
            sigma = np.full(self.d, float(sigma))
        return sample_problem(self.d, self.noise_var, sigma, seed=self.base_seed)

    def validate(self, grid=None, method=None):
        grid = self.grid if grid is None else grid
        method = self.method if method is None else method
        if self.trials < 1:
            raise ParameterError(f"trials must be >= 1, got {self.trials}")
        if len(grid) == 0:
            raise ParameterError("sweep grid is empty")
        if method not in METHODS:
            raise ParameterError(f"method must be one of {METHODS}, got {method!r}")
        if self.c_wstar_policy not in ("max", "mean"):
            raise ParameterError(f"c_wstar_policy must be 'max' or 'mean', got {self.c_wstar_policy!r}")
        if method == "oracle":
            top = self.d * self.noise_var / self.n
            if any(not 0 < g <= top * (1 + 1e-12) for g in grid):
                raise ParameterError(f"oracle grid values must lie in (0, {top}]")
        elif any(int(g) != g or not 1 <= g <= self.d for g in grid):
            raise ParameterError(f"clustering grid values must be integers in [1, {self.d}]")


@dataclass
class TrialResult:
    rate_nats: float
    distortion: float
    gen_error: float
    pop_risk: float
    emp_risk: float
    pop_risk_uncompressed: float
    emp_risk_uncompressed: float
    c_wstar: float
    diameter: float


@dataclass
class SweepRecord:
    method: str
    grid_value: float
    rate_nats: float
    rate_bits: float
    distortion_mean: float
    distortion_se: float
    gen_mean: float
    gen_se: float
    pop_mean: float
    pop_se: float
    pop_uncompressed_mean: float
    bound_thm3: float
    bound_cor1: float
    diameter_mean: float
    trials: int
    # not written to CSV
    pop_uncompressed_se: float = math.nan
    emp_mean: float = math.nan
    gen_uncompressed_mean: float = math.nan
    gen_uncompressed_se: float = math.nan
    diameter_median: float = math.nan
    c_wstar_mean: float = math.nan
    c_wstar_max: float = math.nan


CSV_COLUMNS = [f.name for f in fields(SweepRecord)][:15]


def run_trial(problem: LinearProblem, n: int, method: str, grid_value: float, *,
              base_seed: int, grid_index: int, trial_index: int, beta: float = 0.0,
              k: int | None = None, max_iters: int = 100, restarts: int = 1,
              rate_mode: str = "entropy") -> TrialResult:
    """One draw of S, its ERM fit, one compression, and the resulting risks.

    ``grid_value`` is the target distortion for ``oracle`` and the cluster
    count otherwise (``k`` overrides it, as in a beta sweep).
    """
    for attempt in range(MAX_RETRIES + 1):
        ds = sample_dataset(problem, n, derive_seed(base_seed, grid_index, trial_index, attempt))
        try:
            w = erm_fit(ds)
            break
        except SingularityError as exc:
            log.warning("trial %d/%d attempt %d: %s", grid_index, trial_index, attempt, exc)
    else:
        raise NumericalError(
            f"trial (grid {grid_index}, trial {trial_index}) hit a singular design "
            f"{MAX_RETRIES + 1} times in a row")
    cseed = derive_seed(base_seed, grid_index, trial_index, attempt, stream=1)

    diameter = math.nan
    if method == "oracle":
        w_hat = oracle_compress(w, problem, n, grid_value, seed=cseed)
        rate = oracle_rate(grid_value, problem.d, n, problem.noise_var)
    else:
        clusters = int(grid_value if k is None else k)
        if method == "kmeans":
            q = kmeans_quantize(w, clusters, max_iters, seed=cseed, restarts=restarts)
        elif method == "hessian_kmeans":
            q = hessian_kmeans_quantize(w, hessian_diag(ds), clusters, max_iters, seed=cseed,
                                        restarts=restarts)
        elif method == "diameter_reg":
            q = diameter_reg_quantize(w, hessian_diag(ds), clusters, beta, max_iters,
                                      seed=cseed, restarts=restarts)
        else:
            raise ParameterError(f"unknown method {method!r}")
        w_hat = reconstruct(q)
        rate = rate_estimate(q, problem.d, rate_mode)
        diameter = codebook_diameter(q)

    pop = population_risk(w_hat, problem)
    emp = empirical_risk(w_hat, ds)
    return TrialResult(
        rate_nats=rate,
        distortion=distortion(w_hat, w, ds),
        gen_error=pop - emp,
        pop_risk=pop,
        emp_risk=emp,
        pop_risk_uncompressed=population_risk(w, problem),
        emp_risk_uncompressed=empirical_risk(w, ds),
        c_wstar=c_wstar_estimate(w_hat, problem.w_star),
        diameter=diameter,
    )


def aggregate(method: str, grid_value: float, results: list, problem: LinearProblem, n: int,
              c_wstar_policy: str = "max") -> SweepRecord:
    """Reduce trial results to one record and attach bound values at the mean rate."""
    col = {f.name: np.array([getattr(r, f.name) for r in results]) for f in fields(TrialResult)}
    rate = float(col["rate_nats"].mean())
    dist_m, dist_se = mean_se(col["distortion"])
    gen_m, gen_se = mean_se(col["gen_error"])
    pop_m, pop_se = mean_se(col["pop_risk"])
    popu_m, popu_se = mean_se(col["pop_risk_uncompressed"])
    genu_m, genu_se = mean_se(col["pop_risk_uncompressed"] - col["emp_risk_uncompressed"])
    c_max = float(col["c_wstar"].max())
    c_mean = float(col["c_wstar"].mean())
    c_used = c_max if c_wstar_policy == "max" else c_mean

    d = problem.d
    thm3 = linreg_gen_bound(c_used, problem.sigma_x_norm, problem.noise_var, n, rate)
    if n > d + 1:
        cor1 = tradeoff_bound(rate, BoundInputs(n, d, problem.noise_var, c_used, problem.sigma_x_norm))
    else:
        cor1 = math.nan
    diam = col["diameter"]
    has_diam = not np.all(np.isnan(diam))
    return SweepRecord(
        method=method,
        grid_value=float(grid_value),
        rate_nats=rate,
        rate_bits=rate / math.log(2.0),
        distortion_mean=dist_m,
        distortion_se=dist_se,
        gen_mean=gen_m,
        gen_se=gen_se,
        pop_mean=pop_m,
        pop_se=pop_se,
        pop_uncompressed_mean=popu_m,
        bound_thm3=thm3,
        bound_cor1=cor1,
        diameter_mean=float(diam.mean()) if has_diam else math.nan,
        trials=len(results),
        pop_uncompressed_se=popu_se,
        emp_mean=float(col["emp_risk"].mean()),
        gen_uncompressed_mean=genu_m,
        gen_uncompressed_se=genu_se,
        diameter_median=float(np.median(diam)) if has_diam else math.nan,
        c_wstar_mean=c_mean,
        c_wstar_max=c_max,
    )


def _sweep(config: SweepConfig, points, return_trials=False):
    """``points`` is a list of (grid_value, method, beta, k) per grid index."""
    problem = config.problem()
    jobs = [(gi, ti) for gi in range(len(points)) for ti in range(config.trials)]

    def work(job):
        gi, ti = job
        value, method, beta, k = points[gi]
        return run_trial(problem, config.n, method, value, base_seed=config.base_seed,
                         grid_index=gi, trial_index=ti, beta=beta, k=k,
                         max_iters=config.max_iters, restarts=config.restarts,
                         rate_mode=config.rate_mode)

    results = _pmap(work, jobs, config.threads)
    records, per_point = [], []
    for gi, (value, method, _, _) in enumerate(points):
        chunk = results[gi * config.trials:(gi + 1) * config.trials]
        records.append(aggregate(method, value, chunk, problem, config.n, config.c_wstar_policy))
        per_point.append(chunk)
    return (records, per_point) if return_trials else records


def run_linreg_sweep(config: SweepConfig, return_trials: bool = False):
    """Sweep K (clustering methods) or D (oracle) at fixed w*."""
    config.validate()
    points = [(g, config.method, config.beta, None) for g in config.grid]
    return _sweep(config, points, return_trials)


def run_beta_sweep(config: SweepConfig, return_trials: bool = False):
    """Sweep the diameter penalty at fixed K with the diameter-regularized quantizer."""
    config.validate(grid=[config.k], method="diameter_reg")
    if len(config.beta_grid) == 0:
        raise ParameterError("beta grid is empty")
    if any(not (b >= 0 and math.isfinite(b)) for b in config.beta_grid):
        raise ParameterError("beta values must be finite and nonnegative")
    points = [(float(b), "diameter_reg", float(b), int(config.k)) for b in config.beta_grid]
    return _sweep(config, points, return_trials)


# -- neural-network sweep -----------------------------------------------------


@dataclass
class NnConfig:
    seeds: int = 20
    epochs: int = 2000
    lr: float = 0.5
    layers: list = field(default_factory=lambda: [2, 16, 16, 2])
    k_grid: list = field(default_factory=lambda: [2, 4, 8, 16, 32])
    beta_grid: list = field(default_factory=lambda: [0.0])
    n_train: int = 200
    n_test: int = 2000
    base_seed: int = 0
    data: str | None = None
    max_iters: int = 100
    threads: int = 0


@dataclass
class NnRecord:
    k: int
    beta: float
    compression_ratio: float
    train_ce_mean: float
    train_ce_se: float
    test_ce_mean: float
    test_ce_se: float
    gap_mean: float
    gap_se: float
    train_ce_orig_mean: float
    test_ce_orig_mean: float
    gap_orig_mean: float
    gap_orig_se: float
    seeds: int
    failed_seeds: int


NN_CSV_COLUMNS = [f.name for f in fields(NnRecord)]


def _normalized_fisher(model, train):
    h = fisher_diag(model, train)
    scale = h.mean()
    return h / scale if scale > 0 else np.ones_like(h)


def run_nn_sweep(config: NnConfig) -> list:
    """Train ``seeds`` models, quantize each at every (K, beta), and average the losses.

    The Fisher diagonal is rescaled to unit mean over all parameters before
    clustering so that ``beta`` is comparable across models.
    """
    if config.seeds < 1 or not config.k_grid or not config.beta_grid:
        raise ParameterError("need at least one seed, one K and one beta")
    if config.data:
        train, test = load_csv_task(config.data, seed=config.base_seed)
    else:
        train, test = make_synth_task(config.n_train, config.n_test, seed=config.base_seed)
    grid = [(int(k), float(b)) for k in config.k_grid for b in config.beta_grid]

    def work(s):
        try:
            model = train_mlp(train, config.layers, config.epochs, config.lr,
                              seed=derive_seed(config.base_seed, 0, s))
        except TrainingError as exc:
            log.warning("seed %d: %s", s, exc)
            return None
        h = _normalized_fisher(model, train)
        base = eval_losses(model, train, test)
        rows = []
        for gi, (k, beta) in enumerate(grid):
            q = quantize_mlp(model, h, k, beta, seed=derive_seed(config.base_seed, gi, s, 0, 1),
                             max_iters=config.max_iters)
            rows.append(eval_losses(q.model, train, test))
        return base, rows, model

    outcomes = _pmap(work, range(config.seeds), config.threads)
    ok = [o for o in outcomes if o is not None]
    failed = config.seeds - len(ok)
    if failed > 0.2 * config.seeds:
        raise NumericalError(f"{failed} of {config.seeds} seeds diverged during training")
    model0 = ok[0][2]
    base = np.array([o[0] for o in ok])
    records = []
    for gi, (k, beta) in enumerate(grid):
        q = np.array([o[1][gi] for o in ok])
        tr, tr_se = mean_se(q[:, 0])
        te, te_se = mean_se(q[:, 1])
        gap, gap_se = mean_se(q[:, 2])
        gap0, gap0_se = mean_se(base[:, 2])
        records.append(NnRecord(
            k=k, beta=beta, compression_ratio=compression_ratio(model0, k),
            train_ce_mean=tr, train_ce_se=tr_se, test_ce_mean=te, test_ce_se=te_se,
            gap_mean=gap, gap_se=gap_se,
            train_ce_orig_mean=float(base[:, 0].mean()), test_ce_orig_mean=float(base[:, 1].mean()),
            gap_orig_mean=gap0, gap_orig_se=gap0_se, seeds=len(ok), failed_seeds=failed))
    return records


def record_dict(record) -> dict:
    return asdict(record)
