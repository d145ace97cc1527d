"""Seeded Monte Carlo studies on the Gaussian-mediator family.

Child seeds are spawned from the master seed by (size index, replicate index),
so a single replicate can be reproduced in isolation and results do not depend
on scheduling.  Replicates run concurrently; the summary is reduced from the
index-ordered vector of estimates, so output is bitwise identical for any
thread count.
"""

from __future__ import annotations

import csv
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .bounds import SimDgpParams, simdgp_theta
from .dist import TreatmentPair
from .errors import AceboundsError, DomainError
from .estimators import ESTIMATOR_TAGS, estimate
from .fitting import CrossFitPlan, Dataset, ModelSpec, fit
from .quadrature import GaussHermiteZRule
from .special import expit

__all__ = [
    "McConfig",
    "McRow",
    "McSummary",
    "sample_dgp",
    "simdgp_truth_nuisances",
    "setting_model_specs",
    "run_mc",
    "MISSPECIFICATION_SETTINGS",
]

MISSPECIFICATION_SETTINGS = (0, 1, 2, 3, 4)


@dataclass(frozen=True)
class McConfig:
    params: SimDgpParams
    sizes: tuple = (5000,)
    replicates: int = 200
    tags: tuple = ESTIMATOR_TAGS
    setting: int = 0
    seed: int = 0
    threads: int = 1
    gh_nodes: int = 64
    crossfit: CrossFitPlan = field(default_factory=CrossFitPlan)

    def __post_init__(self):
        if self.replicates < 2:
            raise DomainError("need at least two replicates")
        if any(n < 10 for n in self.sizes):
            raise DomainError("sample sizes below 10 are not supported")
        if self.setting not in MISSPECIFICATION_SETTINGS:
            raise DomainError(f"setting must be one of {MISSPECIFICATION_SETTINGS}")
        unknown = set(self.tags) - set(ESTIMATOR_TAGS)
        if unknown:
            raise DomainError(f"unknown estimator tags {sorted(unknown)}")
        object.__setattr__(self, "sizes", tuple(int(n) for n in self.sizes))
        object.__setattr__(self, "tags", tuple(self.tags))


@dataclass(frozen=True)
class McRow:
    setting: int
    n: int
    tag: str
    bias: float
    bias_se: float
    emp_se: float
    scaled_var: float
    scaled_var_se: float
    mse: float
    mse_se: float


@dataclass
class McSummary:
    rows: list
    theta: float
    config: McConfig
    failed: dict  # n -> number of failed replicates

    CSV_HEADER = (
        "setting",
        "n",
        "tag",
        "bias",
        "bias_se",
        "emp_se",
        "scaled_var",
        "scaled_var_se",
        "mse",
        "mse_se",
    )

    def to_csv(self, target=None) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.CSV_HEADER)
        for r in self.rows:
            writer.writerow(
                [r.setting, r.n, r.tag]
                + [format(v, ".6g") for v in (r.bias, r.bias_se, r.emp_se, r.scaled_var, r.scaled_var_se, r.mse, r.mse_se)]
            )
        text = buf.getvalue()
        if target is not None:
            if hasattr(target, "write"):
                target.write(text)
            else:
                with open(target, "w", encoding="utf-8", newline="") as fh:
                    fh.write(text)
        return text

    def row(self, n: int, tag: str) -> McRow:
        for r in self.rows:
            if r.n == n and r.tag == tag:
                return r
        raise KeyError((n, tag))


def sample_dgp(params: SimDgpParams, n: int, seed) -> Dataset:
    """Draw n rows of (c, a, z, y); `seed` may be an int or a SeedSequence."""
    rng = np.random.default_rng(seed)
    c = (rng.random(n) < params.p_c).astype(float)
    a = (rng.random(n) < expit(params.alpha * c)).astype(float)
    z = params.beta * a + params.sigma_z * rng.standard_normal(n)
    y = params.gamma1 * z + params.gamma2 * c + params.sigma_y * rng.standard_normal(n)
    return Dataset(c, a, z, y, TreatmentPair(1.0, 0.0))


class _GaussianLaw:
    """Exact mediator law of the study family: N(beta * a, sigma_z^2)."""

    def __init__(self, beta: float, sigma_z: float):
        self.beta = beta
        self.sigma_z = sigma_z

    def location_scale(self, a, *rest):
        return self.beta * np.asarray(a, dtype=float), self.sigma_z

    def __call__(self, z, a, *rest):
        mu, sd = self.location_scale(a)
        z = np.asarray(z, dtype=float)
        return np.exp(-0.5 * ((z - mu) / sd) ** 2) / (sd * np.sqrt(2.0 * np.pi))


def simdgp_truth_nuisances(params: SimDgpParams, gh_nodes: int = 64):
    """Every nuisance slot filled with the exact laws of the study family."""
    from .influence import NuisanceSet

    p1 = params.p_a_marginal(1)
    law = _GaussianLaw(params.beta, params.sigma_z)
    g1, g2, al = params.gamma1, params.gamma2, params.alpha
    # p(C=1 | A=a) by Bayes on the binary covariate
    ec_a1 = float(expit(al)) * params.p_c / p1
    ec_a0 = (1.0 - float(expit(al))) * params.p_c / (1.0 - p1)

    def p_c(c):
        c = np.asarray(c, dtype=float)
        return np.where(c == 1.0, params.p_c, 1.0 - params.p_c)

    def p_a(a):
        a = np.asarray(a, dtype=float)
        return np.where(a == 1.0, p1, 1.0 - p1)

    def p_a_given_c(a, c):
        prop = expit(al * np.asarray(c, dtype=float))
        return np.where(np.asarray(a) == 1.0, prop, 1.0 - prop)

    def mean_y_zc(z, c):
        return g1 * np.asarray(z, dtype=float) + g2 * np.asarray(c, dtype=float)

    def mean_y_azc(a, z, c):
        out = mean_y_zc(z, c)
        return np.broadcast_to(out, np.broadcast_shapes(np.shape(a), out.shape))

    def mean_y_ac(a, c):
        return g1 * params.beta * np.asarray(a, dtype=float) + g2 * np.asarray(c, dtype=float)

    def mean_y_az(a, z):
        cond_c = np.where(np.asarray(a) == 1.0, ec_a1, ec_a0)
        return g1 * np.asarray(z, dtype=float) + g2 * cond_c

    return NuisanceSet(
        a_support=(0.0, 1.0),
        c_support=(0.0, 1.0),
        p_c=p_c,
        p_a=p_a,
        p_a_given_c=p_a_given_c,
        p_z_given_a=law,
        p_z_given_ac=law,
        mean_y_ac=mean_y_ac,
        mean_y_az=mean_y_az,
        mean_y_zc=mean_y_zc,
        mean_y_azc=mean_y_azc,
        z_integrator=GaussHermiteZRule(gh_nodes),
        manifest={"source": "study-family truth"},
    )


def setting_model_specs(setting: int) -> list:
    """ModelSpec list for a misspecification setting (0 = everything correct).

    The settings:
      1: the mediator law drops the treatment;
      2: everything except the mediator law is wrong: p(A=1) and p(C=1) pinned
         to 1/4, covariate dropped from the treated-outcome mean and the
         propensity, mediator dropped from both outcome means that use it;
      3: p(C=1) pinned to 1/4 and the mediator law drops the treatment;
      4: the propensity drops the covariate and the (z, c) outcome means drop
         the mediator.
    """
    if setting not in MISSPECIFICATION_SETTINGS:
        raise DomainError(f"setting must be one of {MISSPECIFICATION_SETTINGS}")
    specs = {
        "p_c": ModelSpec("p_c", "empirical"),
        "p_a": ModelSpec("p_a", "empirical"),
        "p_a_given_c": ModelSpec("p_a_given_c", "logistic", predictors=("c",)),
        "p_z_given_a": ModelSpec("p_z_given_a", "gaussian-density", predictors=("a",)),
        "p_z_given_ac": ModelSpec("p_z_given_ac", "gaussian-density", predictors=("a",)),
        "mean_y_ac": ModelSpec("mean_y_ac", "linear-mean", predictors=("a", "c")),
        "mean_y_az": ModelSpec("mean_y_az", "linear-mean", predictors=("a", "z")),
        "mean_y_zc": ModelSpec("mean_y_zc", "linear-mean", predictors=("z", "c")),
        "mean_y_azc": ModelSpec("mean_y_azc", "linear-mean", predictors=("z", "c")),
    }
    if setting == 1:
        specs["p_z_given_a"] = replace(specs["p_z_given_a"], omit=("a",))
        specs["p_z_given_ac"] = replace(specs["p_z_given_ac"], omit=("a",))
    elif setting == 2:
        specs["p_a"] = ModelSpec("p_a", "fixed-value", fix_value=0.25)
        specs["p_c"] = ModelSpec("p_c", "fixed-value", fix_value=0.25)
        specs["p_a_given_c"] = replace(specs["p_a_given_c"], omit=("c",))
        specs["mean_y_ac"] = replace(specs["mean_y_ac"], omit=("c",))
        specs["mean_y_az"] = replace(specs["mean_y_az"], omit=("z",))
        specs["mean_y_zc"] = replace(specs["mean_y_zc"], omit=("z",))
        specs["mean_y_azc"] = replace(specs["mean_y_azc"], omit=("z",))
    elif setting == 3:
        specs["p_c"] = ModelSpec("p_c", "fixed-value", fix_value=0.25)
        specs["p_z_given_a"] = replace(specs["p_z_given_a"], omit=("a",))
        specs["p_z_given_ac"] = replace(specs["p_z_given_ac"], omit=("a",))
    elif setting == 4:
        specs["p_a_given_c"] = replace(specs["p_a_given_c"], omit=("c",))
        specs["mean_y_zc"] = replace(specs["mean_y_zc"], omit=("z",))
        specs["mean_y_azc"] = replace(specs["mean_y_azc"], omit=("z",))
    return list(specs.values())


def _one_replicate(config: McConfig, specs, z_rule, size_index: int, rep_index: int, n: int):
    seed = np.random.SeedSequence(entropy=config.seed, spawn_key=(size_index, rep_index))
    data = sample_dgp(config.params, n, seed)
    eta = fit(data, specs, plan=config.crossfit, z_rule=z_rule)
    out = {}
    for tag in config.tags:
        out[tag] = estimate(data, eta, tag, td_reduced=True).theta_hat
    return out


def run_mc(config: McConfig) -> McSummary:
    """Run the study: per size, `replicates` seeded draws, fit, estimate, aggregate.

    Replicates that raise package errors are counted and excluded when they
    are fewer than 1% of the replicate count; otherwise the run fails.
    """
    specs = setting_model_specs(config.setting)
    pair = TreatmentPair(1.0, 0.0)
    theta = simdgp_theta(config.params, pair)
    z_rule = GaussHermiteZRule(config.gh_nodes)
    rows = []
    failed = {}
    for size_index, n in enumerate(config.sizes):
        results = [None] * config.replicates

        def work(k, _n=n, _si=size_index):
            try:
                return k, _one_replicate(config, specs, z_rule, _si, k, _n)
            except AceboundsError as exc:
                return k, exc

        if config.threads > 1:
            with ThreadPoolExecutor(max_workers=config.threads) as pool:
                for k, res in pool.map(work, range(config.replicates)):
                    results[k] = res
        else:
            for k in range(config.replicates):
                results[k] = work(k)[1]
        errors = [r for r in results if isinstance(r, Exception)]
        failed[n] = len(errors)
        if errors and len(errors) >= 0.01 * config.replicates:
            raise AceboundsError(
                f"{len(errors)}/{config.replicates} replicates failed at n={n}; first: {errors[0]}"
            )
        kept = [r for r in results if not isinstance(r, Exception)]
        count = len(kept)
        for tag in config.tags:
            thetas = np.array([r[tag] for r in kept])
            err = thetas - theta
            s = float(thetas.std(ddof=1))
            bias = float(err.mean())
            scaled = n * s * s
            rows.append(
                McRow(
                    setting=config.setting,
                    n=n,
                    tag=tag,
                    bias=bias,
                    bias_se=s / np.sqrt(count),
                    emp_se=s,
                    scaled_var=scaled,
                    scaled_var_se=float(np.sqrt(2.0 * scaled**2 / count)),
                    mse=float(np.mean(err**2)),
                    mse_se=float(np.std(err**2, ddof=1) / np.sqrt(count)),
                )
            )
    return McSummary(rows=rows, theta=theta, config=config, failed=failed)
