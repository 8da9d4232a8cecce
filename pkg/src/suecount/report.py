"""Fit summaries: averaged moments, dispersion split and the JSON report."""

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import brentq

from .distributions import EQUI_BAND, SueParams, classify_dispersion, sue_dispersion
from .regression import predicted_relative_frequencies, sample_relative_frequencies

SCHEMA_VERSION = 1


def sample_moments(dataset):
    """Mean and variance (divisor m) of the observed counts."""
    y = dataset.responses.astype(float)
    return float(y.mean()), float(y.var())


def mixture_moments(means, variances):
    """Mean, variance and variance-mean ratio of the fitted mixture.

    Averages the per-observation distributions: the mixture mean is the
    average fitted mean and the mixture variance adds the spread of fitted
    means to the average fitted variance.
    """
    means = np.asarray(means, dtype=float)
    variances = np.asarray(variances, dtype=float)
    mean = float(np.mean(means))
    var = float(np.mean(variances) + np.var(means))
    return mean, var, var / mean


def _vm_gap(rate, alpha, gamma_event, exposure):
    s = sue_dispersion(SueParams(rate, alpha, gamma_event, exposure))
    return s.variance - s.mean, s.mean


def equidispersion_crossing(alpha, gamma_event, exposure=1.0, rate_max=50.0, grid=400):
    """Smallest mean at which the SUE variance crosses the mean.

    Scans ``rate`` on a log grid up to ``rate_max`` and refines the first
    sign change of ``variance - mean`` (outside the equidispersion band) by
    root finding. Returns ``(rate, mean)`` or ``None`` if there is no
    crossing in range.
    """
    if alpha == 1.0:
        return None
    rates = np.geomspace(1e-3, rate_max, grid)
    prev_rate, prev_sign = None, 0
    for r in rates:
        gap, _ = _vm_gap(float(r), alpha, gamma_event, exposure)
        sign = 0 if abs(gap) <= EQUI_BAND else (1 if gap > 0 else -1)
        if sign == 0:
            continue
        if prev_sign and sign != prev_sign:
            root = brentq(lambda x: _vm_gap(x, alpha, gamma_event, exposure)[0], prev_rate, float(r), xtol=1e-12)
            return root, _vm_gap(root, alpha, gamma_event, exposure)[1]
        prev_rate, prev_sign = float(r), sign
    return None


@dataclass(frozen=True)
class DispersionSplit:
    under: int
    over: int
    equi: int
    crossing_mean: float
    left_of_crossing: int


def dispersion_split(result, dataset):
    """Classify each observation's fitted distribution and locate the crossing.

    ``left_of_crossing`` counts observations whose fitted mean is below the
    equidispersion crossing of the fitted SUE curve; with no crossing every
    observation is on the left and ``crossing_mean`` is infinite.
    """
    means, variances = result.fitted["mean"], result.fitted["variance"]
    labels = [classify_dispersion(m, v) for m, v in zip(means, variances)]
    crossing = math.inf
    if result.spec.family == "sue":
        rate_max = max(50.0, 4.0 * float(np.max(result.fitted["rate"])))
        found = equidispersion_crossing(
            math.exp(result.log_alpha), result.spec.gamma_event, dataset.exposure, rate_max
        )
        if found is not None:
            crossing = found[1]
    return DispersionSplit(
        under=labels.count("under"),
        over=labels.count("over"),
        equi=labels.count("equi"),
        crossing_mean=crossing,
        left_of_crossing=int(np.sum(np.asarray(means) < crossing)),
    )


def _clean(value):
    # JSON has no NaN/inf; map them to null and strings
    if isinstance(value, float):
        if math.isnan(value):
            return None
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
    if isinstance(value, dict):
        return {k: _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    return value


def _restore(value):
    if value is None:
        return math.nan
    if value == "inf":
        return math.inf
    if value == "-inf":
        return -math.inf
    return value


@dataclass(frozen=True)
class FitReport:
    """Everything printed by ``suecount fit``.

    ``coefficients`` is a list of ``(name, estimate, se)`` triples and
    ``observations`` a list of per-row ``(mean, variance)`` pairs.
    """

    model: dict
    coefficients: list
    loglik: float
    aic: float
    converged: bool
    iterations: int
    gradient_norm: float
    n_obs: int
    sample_mean: float
    sample_variance: float
    fitted_mean: float
    fitted_variance: float
    fitted_vm_ratio: float
    predicted_frequencies: list
    sample_frequencies: list
    observations: list
    dispersion: dict
    elapsed_seconds: float
    message: str = ""
    schema: int = field(default=SCHEMA_VERSION)

    def to_dict(self):
        return _clean(asdict(self))

    def to_json(self, indent=2):
        return json.dumps(self.to_dict(), indent=indent, allow_nan=False)

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        if data.get("schema") != SCHEMA_VERSION:
            raise ValueError(f"unsupported report schema {data.get('schema')!r}")
        for key in ("loglik", "aic", "gradient_norm", "sample_mean", "sample_variance",
                    "fitted_mean", "fitted_variance", "fitted_vm_ratio", "elapsed_seconds"):
            data[key] = _restore(data[key])
        data["coefficients"] = [(n, _restore(b), _restore(s)) for n, b, s in data["coefficients"]]
        data["observations"] = [(_restore(m), _restore(v)) for m, v in data["observations"]]
        data["predicted_frequencies"] = [_restore(p) for p in data["predicted_frequencies"]]
        data["dispersion"] = {k: _restore(v) for k, v in data["dispersion"].items()}
        return cls(**data)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def build_report(result, dataset, n_max=None):
    """Assemble a :class:`FitReport` from a fit."""
    if n_max is None:
        n_max = int(np.max(dataset.responses))
    spec = result.spec
    s_mean, s_var = sample_moments(dataset)
    f_mean, f_var, f_ratio = mixture_moments(result.fitted["mean"], result.fitted["variance"])
    split = dispersion_split(result, dataset)
    pred = predicted_relative_frequencies(dataset, spec, result.beta_hat, n_max)
    return FitReport(
        model={
            "family": spec.family,
            "gamma_event": spec.gamma_event if spec.family == "sue" else None,
            "label": spec.label(),
            "exposure": dataset.exposure,
        },
        coefficients=[
            (name, float(b), float(s)) for name, b, s in zip(result.coef_names, result.beta_hat, result.std_errors)
        ],
        loglik=float(result.loglik),
        aic=float(result.aic),
        converged=bool(result.converged),
        iterations=int(result.iterations),
        gradient_norm=float(result.gradient_norm),
        n_obs=dataset.n_obs,
        sample_mean=s_mean,
        sample_variance=s_var,
        fitted_mean=f_mean,
        fitted_variance=f_var,
        fitted_vm_ratio=f_ratio,
        predicted_frequencies=[float(p) for p in pred],
        sample_frequencies=[float(p) for p in sample_relative_frequencies(dataset, n_max)],
        observations=[(float(m), float(v)) for m, v in zip(result.fitted["mean"], result.fitted["variance"])],
        dispersion=asdict(split),
        elapsed_seconds=round(float(result.elapsed), 3),
        message=result.message,
    )


def render_table(report):
    """Plain-text coefficient table in the style of a regression results table."""
    lines = [f"{report.model['label']}  (m = {report.n_obs})", f"{'Variable':<16}{'Coef':>10}{'SE':>10}"]
    for name, b, s in report.coefficients:
        se = "NA" if math.isnan(s) else f"{s:.3f}"
        lines.append(f"{name:<16}{b:>10.3f}{se:>10}")
    lines.append(f"{'Log likelihood':<16}{report.loglik:>10.2f}")
    lines.append(f"{'AIC':<16}{report.aic:>10.2f}")
    lines.append(
        f"{'Fitted moments':<16}({report.fitted_mean:.3f}, {report.fitted_variance:.3f}, {report.fitted_vm_ratio:.3f})"
    )
    lines.append(f"{'Sample moments':<16}({report.sample_mean:.3f}, {report.sample_variance:.3f})")
    lines.append(f"{'Converged':<16}{str(report.converged):>10}")
    lines.append(f"{'Elapsed (s)':<16}{report.elapsed_seconds:>10.3f}")
    return "\n".join(lines)
