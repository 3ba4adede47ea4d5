"""Sharp regression-discontinuity estimation of the designation funding effect.

The running variable is the composite-score percentile, treatment switches at
the designation cutoff, and the outcome is log funding.  Bandwidth selection
follows the regularized Imbens-Kalyanaraman plug-in; estimation is weighted
least squares on a local polynomial with treatment interactions and optional
covariates, with HC1 sandwich standard errors.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy.stats import norm

from .engine import ScoreResult
from .errors import EstimationError

LOGGER = logging.getLogger(__name__)

Z975 = float(norm.ppf(0.975))

#: Plug-in constants C_K for the final bandwidth, by local-regression kernel.
KERNEL_CONSTANTS = {
    "triangular": 3.4375,
    "uniform": 144.0 ** 0.2,
}


class RddForm(str, enum.Enum):
    LOCAL_LINEAR = "local_linear"
    QUADRATIC = "quadratic"


@dataclass(frozen=True)
class RddDataset:
    """Aligned arrays for one discontinuity sample.

    ``covariates`` has one column per ``covariate_names`` entry; NaN marks a
    missing covariate cell (rows drop at estimation time when the covariate
    is used).
    """

    tract_ids: tuple[str, ...]
    running: np.ndarray
    outcome: np.ndarray
    treated: np.ndarray
    covariates: np.ndarray
    covariate_names: tuple[str, ...]
    cutoff: float = 75.0
    n_excluded_nonpositive: int = 0

    def __post_init__(self) -> None:
        x = np.asarray(self.running, dtype=float)
        y = np.asarray(self.outcome, dtype=float)
        d = np.asarray(self.treated, dtype=bool)
        if not (len(x) == len(y) == len(d) == len(self.tract_ids)):
            raise EstimationError("misaligned dataset arrays")
        if not np.isfinite(x).all() or not np.isfinite(y).all():
            raise EstimationError("running variable and outcome must be finite")
        if ((x >= self.cutoff) != d).any():
            bad = int(((x >= self.cutoff) != d).sum())
            raise EstimationError(
                f"sharp-design violation: treated != (running >= cutoff) "
                f"for {bad} rows"
            )
        object.__setattr__(self, "running", x)
        object.__setattr__(self, "outcome", y)
        object.__setattr__(self, "treated", d)
        object.__setattr__(
            self,
            "covariates",
            np.asarray(self.covariates, dtype=float).reshape(len(x), -1)
            if np.size(self.covariates)
            else np.empty((len(x), 0)),
        )

    @property
    def n(self) -> int:
        return len(self.running)


def build_rdd_dataset(
    results: Sequence[ScoreResult],
    funding: Mapping[str, float],
    covariates: Mapping[str, Mapping[str, float | None]] | None = None,
    cutoff: float = 75.0,
) -> RddDataset:
    """Assemble an RDD sample from score results and per-tract funding totals.

    The running variable is each tract's percentile; tracts without a
    percentile are skipped.  Log funding is the outcome; tracts with zero,
    negative, or absent funding are excluded and counted in
    ``n_excluded_nonpositive``.
    """
    names: tuple[str, ...] = ()
    if covariates:
        names = tuple(sorted({k for row in covariates.values() for k in row}))
    ids, xs, ys, zs = [], [], [], []
    excluded = 0
    for r in results:
        if r.percentile is None:
            continue
        amount = funding.get(r.tract_id)
        if amount is None or not amount > 0.0:
            excluded += 1
            continue
        ids.append(r.tract_id)
        xs.append(float(r.percentile))
        ys.append(math.log(amount))
        if names:
            row = (covariates or {}).get(r.tract_id, {})
            zs.append(
                [np.nan if row.get(k) is None else float(row[k]) for k in names]
            )
    x = np.asarray(xs, dtype=float)
    return RddDataset(
        tract_ids=tuple(ids),
        running=x,
        outcome=np.asarray(ys, dtype=float),
        treated=x >= cutoff,
        covariates=np.asarray(zs, dtype=float) if names else np.empty((len(ids), 0)),
        covariate_names=names,
        cutoff=cutoff,
        n_excluded_nonpositive=excluded,
    )


# ---------------------------------------------------------------------------
# OLS with HC1 sandwich covariance


def _collinear_columns(X: np.ndarray, names: Sequence[str]) -> list[str]:
    _, r = np.linalg.qr(X)
    diag = np.abs(np.diag(r))
    tol = diag.max() * max(X.shape) * np.finfo(float).eps if diag.size else 0.0
    return [names[j] for j in range(len(names)) if j < len(diag) and diag[j] <= tol]


def ols_hc1(
    X: np.ndarray,
    y: np.ndarray,
    weights: np.ndarray | None = None,
    names: Sequence[str] | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """(Weighted) least squares with the HC1 heteroskedasticity-robust covariance.

    Weights fold in as sqrt-scaling of rows (WLS); the sandwich is computed on
    the transformed model with the n/(n-p) small-sample factor.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    labels = list(names) if names is not None else [f"x{j}" for j in range(p)]
    if weights is not None:
        root = np.sqrt(np.asarray(weights, dtype=float))
        X = X * root[:, None]
        y = y * root
    if n <= p:
        raise EstimationError(f"too few rows ({n}) for {p} parameters")
    if np.linalg.matrix_rank(X) < p:
        bad = _collinear_columns(X, labels)
        raise EstimationError(f"rank-deficient design matrix; collinear columns: {bad}")
    xtx = X.T @ X
    beta = np.linalg.solve(xtx, X.T @ y)
    resid = y - X @ beta
    bread = np.linalg.inv(xtx)
    meat = X.T @ (X * (resid**2)[:, None])
    cov = bread @ meat @ bread * (n / (n - p))
    return beta, cov


# ---------------------------------------------------------------------------
# Imbens-Kalyanaraman bandwidth


def ik_bandwidth(
    x: np.ndarray,
    y: np.ndarray,
    cutoff: float,
    kernel: str = "triangular",
) -> float:
    """Regularized Imbens-Kalyanaraman plug-in bandwidth.

    Three stages: (1) density and conditional outcome variance at the cutoff
    from a Silverman-style pilot window; (2) global cubic fit on the
    inter-median sample for the third derivative, giving one-sided second
    stage windows; (3) one-sided quadratic fits for the second derivatives
    plus regularization terms, combined in the closed-form plug-in.
    """
    if kernel not in KERNEL_CONSTANTS:
        raise EstimationError(
            f"unknown kernel {kernel!r}; choose from {sorted(KERNEL_CONSTANTS)}"
        )
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    keep = np.isfinite(x) & np.isfinite(y)
    x, y = x[keep], y[keep]
    n = len(x)
    left_all = x < cutoff
    n_left, n_right = int(left_all.sum()), int((~left_all).sum())
    if n_left == 0 or n_right == 0:
        raise EstimationError("need observations on both sides of the cutoff")

    # Stage 1: density and variance at the cutoff.
    h1 = 1.84 * float(np.std(x, ddof=1)) * n ** (-0.2)
    in_l1 = (x >= cutoff - h1) & (x < cutoff)
    in_r1 = (x >= cutoff) & (x <= cutoff + h1)
    n_l1, n_r1 = int(in_l1.sum()), int(in_r1.sum())
    if n_l1 < 2 or n_r1 < 2:
        raise EstimationError("pilot window too sparse near the cutoff")
    f_hat = (n_l1 + n_r1) / (2.0 * n * h1)
    dev_l = y[in_l1] - y[in_l1].mean()
    dev_r = y[in_r1] - y[in_r1].mean()
    sigma2 = (float(dev_l @ dev_l) + float(dev_r @ dev_r)) / (n_l1 + n_r1)
    if sigma2 <= 0.0 or f_hat <= 0.0:
        raise EstimationError("degenerate variance or density at the cutoff")

    # Stage 2: third derivative from a global cubic on the inter-median range.
    med_l = float(np.median(x[left_all]))
    med_r = float(np.median(x[~left_all]))
    mid = (x >= med_l) & (x <= med_r)
    xc = x[mid] - cutoff
    d = (x[mid] >= cutoff).astype(float)
    design3 = np.column_stack([np.ones(xc.size), d, xc, xc**2, xc**3])
    if xc.size <= design3.shape[1]:
        raise EstimationError("too few inter-median observations for the cubic fit")
    coef3, *_ = np.linalg.lstsq(design3, y[mid], rcond=None)
    m3 = 6.0 * coef3[4]
    scale = (sigma2 / (f_hat * max(m3**2, 0.01))) ** (1.0 / 7.0)
    h2_l = 3.56 * scale * n_left ** (-1.0 / 7.0)
    h2_r = 3.56 * scale * n_right ** (-1.0 / 7.0)

    # Stage 3: one-sided curvatures and regularization.
    def curvature(side_mask: np.ndarray, h2: float) -> tuple[float, float]:
        sel = side_mask & (np.abs(x - cutoff) <= h2)
        m = int(sel.sum())
        if m < 4:
            raise EstimationError("second-stage window too sparse for quadratic fit")
        xs = x[sel] - cutoff
        design2 = np.column_stack([np.ones(m), xs, xs**2])
        coef2, *_ = np.linalg.lstsq(design2, y[sel], rcond=None)
        return 2.0 * coef2[2], 2160.0 * sigma2 / (m * h2**4)

    m2_l, r_l = curvature(left_all, h2_l)
    m2_r, r_r = curvature(~left_all, h2_r)
    denom = f_hat * ((m2_r - m2_l) ** 2 + r_l + r_r)
    return float(
        KERNEL_CONSTANTS[kernel] * (2.0 * sigma2 / denom) ** 0.2 * n ** (-0.2)
    )


# ---------------------------------------------------------------------------
# Estimation


@dataclass(frozen=True)
class RddEstimate:
    tau: float
    se: float
    percent: float
    percent_ci: tuple[float, float]
    bandwidth: float
    n_used: int
    n_left: int
    n_right: int
    form: RddForm
    covariates_used: tuple[str, ...]

    def __post_init__(self) -> None:
        lo, hi = self.percent_ci
        if not lo <= self.percent <= hi:
            raise EstimationError("percent CI does not bracket the point estimate")


def effect_to_percent(tau: float, se: float) -> tuple[float, tuple[float, float]]:
    """Log-scale effect to percent change with a delta-method normal CI.

    percent = 100 (e^tau - 1); the CI is percent +- z_.975 * 100 * e^tau * se,
    symmetric about the point estimate.
    """
    if not (np.isfinite(tau) and np.isfinite(se)):
        raise EstimationError("tau and se must be finite")
    percent = 100.0 * math.expm1(tau)
    half = Z975 * 100.0 * math.exp(tau) * se
    return percent, (percent - half, percent + half)


def _resolve_covariates(
    data: RddDataset, covariates: str | Sequence[str] | None
) -> tuple[np.ndarray, tuple[str, ...]]:
    if covariates is None:
        return np.empty((data.n, 0)), ()
    if isinstance(covariates, str):
        if covariates != "all":
            raise EstimationError("covariates must be None, 'all', or a list of names")
        names = data.covariate_names
    else:
        names = tuple(covariates)
        unknown = set(names) - set(data.covariate_names)
        if unknown:
            raise EstimationError(f"unknown covariates: {sorted(unknown)}")
    idx = [data.covariate_names.index(k) for k in names]
    return data.covariates[:, idx], names


def rdd_estimate(
    data: RddDataset,
    bandwidth: float | str | None = "ik",
    form: RddForm = RddForm.LOCAL_LINEAR,
    covariates: str | Sequence[str] | None = None,
    kernel: str = "uniform",
) -> RddEstimate:
    """Estimate the designation effect at the cutoff.

    Fits ``y ~ 1 + D + f(x-c) + f(x-c)*D + Z`` by (kernel-weighted) least
    squares over rows with ``|x - c| <= bandwidth``, where f is linear or
    quadratic per ``form``.  ``bandwidth='ik'`` computes the IK plug-in with
    the matching kernel constant.  The treatment coefficient is reported with
    an HC1 robust standard error and its percent-change transform.
    """
    if kernel not in ("uniform", "triangular"):
        raise EstimationError("kernel must be 'uniform' or 'triangular'")
    if bandwidth is None or (isinstance(bandwidth, str) and bandwidth == "ik"):
        h = ik_bandwidth(data.running, data.outcome, data.cutoff, kernel=kernel)
    else:
        h = float(bandwidth)
    if not h > 0.0:
        raise EstimationError(f"bandwidth must be positive, got {h}")
    z, z_names = _resolve_covariates(data, covariates)
    xc = data.running - data.cutoff
    keep = np.abs(xc) <= h
    if z_names:
        keep &= np.isfinite(z).all(axis=1)
    n_left = int((keep & ~data.treated).sum())
    n_right = int((keep & data.treated).sum())
    if n_left < 10 or n_right < 10:
        raise EstimationError(
            f"too few observations within bandwidth {h:.4g}: "
            f"{n_left} below, {n_right} above (need >= 10 each)"
        )
    xk = xc[keep]
    dk = data.treated[keep].astype(float)
    columns = [np.ones(xk.size), dk, xk, xk * dk]
    names = ["intercept", "treated", "x", "x:treated"]
    if form == RddForm.QUADRATIC:
        columns += [xk**2, xk**2 * dk]
        names += ["x^2", "x^2:treated"]
    for j, cname in enumerate(z_names):
        columns.append(z[keep][:, j])
        names.append(cname)
    design = np.column_stack(columns)
    weights = None
    if kernel == "triangular":
        weights = 1.0 - np.abs(xk) / h
    beta, cov = ols_hc1(design, data.outcome[keep], weights=weights, names=names)
    tau = float(beta[1])
    se = float(math.sqrt(cov[1, 1]))
    percent, ci = effect_to_percent(tau, se)
    return RddEstimate(
        tau=tau,
        se=se,
        percent=percent,
        percent_ci=ci,
        bandwidth=h,
        n_used=int(keep.sum()),
        n_left=n_left,
        n_right=n_right,
        form=form,
        covariates_used=z_names,
    )


# ---------------------------------------------------------------------------
# Robustness grid


@dataclass(frozen=True)
class RddGridCell:
    dataset: str
    bandwidth_label: str
    form: RddForm
    covariates_label: str
    estimate: RddEstimate | None
    error: str | None


def robustness_grid(
    datasets: Mapping[str, RddDataset],
    bandwidths: Mapping[str, float | str | None] | None = None,
    forms: Sequence[RddForm] = (RddForm.LOCAL_LINEAR, RddForm.QUADRATIC),
    covariate_sets: Mapping[str, str | Sequence[str] | None] | None = None,
    kernel: str = "uniform",
) -> list[RddGridCell]:
    """Cross-product of datasets x bandwidths x forms x covariate sets.

    Per-cell estimation errors are recorded in the cell (``error``) and never
    abort the remaining grid.
    """
    bandwidths = dict(bandwidths) if bandwidths is not None else {"ik": "ik", "10": 10.0}
    covariate_sets = (
        dict(covariate_sets) if covariate_sets is not None else {"all": "all", "none": None}
    )
    cells = []
    for ds_label, data in datasets.items():
        for bw_label, bw in bandwidths.items():
            for form in forms:
                for cov_label, cov in covariate_sets.items():
                    try:
                        est: RddEstimate | None = rdd_estimate(
                            data, bandwidth=bw, form=form, covariates=cov, kernel=kernel
                        )
                        err = None
                    except EstimationError as exc:
                        est, err = None, str(exc)
                    cells.append(
                        RddGridCell(
                            dataset=ds_label,
                            bandwidth_label=bw_label,
                            form=form,
                            covariates_label=cov_label,
                            estimate=est,
                            error=err,
                        )
                    )
    return cells


def grid_rows(cells: Sequence[RddGridCell]) -> list[dict[str, object]]:
    """Flatten grid cells for CSV/JSON export."""
    rows: list[dict[str, object]] = []
    for cell in cells:
        row: dict[str, object] = {
            "dataset": cell.dataset,
            "bandwidth": cell.bandwidth_label,
            "form": cell.form.value,
            "covariates": cell.covariates_label,
        }
        if cell.estimate is not None:
            e = cell.estimate
            row.update(
                tau=e.tau, se=e.se, percent=e.percent,
                percent_ci_low=e.percent_ci[0], percent_ci_high=e.percent_ci[1],
                bandwidth_value=e.bandwidth, n_used=e.n_used, error="",
            )
        else:
            row.update(
                tau="", se="", percent="", percent_ci_low="", percent_ci_high="",
                bandwidth_value="", n_used="", error=cell.error or "",
            )
        rows.append(row)
    return rows


# ---------------------------------------------------------------------------
# Dollar aggregation


@dataclass(frozen=True)
class DollarEffect:
    dollars: float
    ci_low: float
    ci_high: float
    mode: str
    n_tracts: int


def aggregate_dollar_effect(
    estimate: RddEstimate,
    tract_funding: Mapping[str, float] | Sequence[float],
    mode: str = "realized",
) -> DollarEffect:
    """Project the percent effect onto observed dollars.

    ``realized`` mode answers "how much of the observed funding is
    attributable to designation": sum of observed * (1 - 1/(1 + pct/100)).
    ``counterfactual`` mode answers "how much would these tracts gain if
    designated": sum of observed * pct/100.  The CI propagates the percent
    CI endpoints through the same sum.
    """
    amounts = (
        np.array(list(tract_funding.values()), dtype=float)
        if isinstance(tract_funding, Mapping)
        else np.asarray(list(tract_funding), dtype=float)
    )
    if amounts.size == 0:
        raise EstimationError("empty tract set")
    if mode not in ("realized", "counterfactual"):
        raise EstimationError("mode must be 'realized' or 'counterfactual'")
    total = float(amounts.sum())

    def project(pct: float) -> float:
        if mode == "counterfactual":
            return total * pct / 100.0
        ratio = 1.0 + pct / 100.0
        if ratio <= 0.0:
            raise EstimationError(
                f"percent effect {pct} at or below -100%; realized gain undefined"
            )
        return total * (1.0 - 1.0 / ratio)

    lo, hi = estimate.percent_ci
    bounds = sorted((project(lo), project(hi)))
    return DollarEffect(
        dollars=project(estimate.percent),
        ci_low=bounds[0],
        ci_high=bounds[1],
        mode=mode,
        n_tracts=int(amounts.size),
    )
