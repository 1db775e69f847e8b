"""Regression problems for PID-family control laws and their ridge solution.

For the linear PID law each sample ``k`` contributes one row::

    a_k = Kp/m * e_k + Ki/m * S_k + Kd/m * ed_k

with ``e_k = p* - p_k``, ``ed_k = v* - v_k`` and ``S_k`` the plain running
sum of ``e`` up to and including sample ``k`` (no dt factor, so the fitted
integral gain carries an implicit ``1/dt``).  There is never a bias column.

Regularization appends ``sqrt(lambda) * I`` rows to the design and zeros to
the target; the augmented system is solved by an SVD-based least squares.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import (
    DegenerateTarget,
    DimensionMismatch,
    Empty,
    InvalidSpec,
    LengthMismatch,
    NonFinite,
    PhaseTooShort,
    SingularSystem,
)
from .trialdata import ReferenceState, Trial, reference_state

DEFAULT_LAMBDA = 0.01
EXP_OVERFLOW_GUARD = 50.0
POLY_ORDERS = (7, 5, 3, 1)
INTEGRAL_CONVENTION = "plain sum over samples; Ki/m carries an implicit 1/dt"


class Term(str, enum.Enum):
    P = "P"
    I = "I"
    D = "D"


class Metric(str, enum.Enum):
    LINEAR = "Linear"
    POLYNOMIAL = "Polynomial"
    EXPONENTIAL = "Exponential"

    @classmethod
    def parse(cls, text: str) -> "Metric":
        for m in cls:
            if m.value.lower() == str(text).strip().lower():
                return m
        raise InvalidSpec(f"unknown error metric {text!r}")


_TERM_ORDER = (Term.P, Term.I, Term.D)


@dataclass(frozen=True)
class ControlLawSpec:
    """Which PID terms are active, the error metric and the ridge constant.

    ``derivative_powers`` selects the alternative reading of the polynomial
    derivative columns (powers of ``ed`` instead of chain-rule derivatives).
    """

    terms: frozenset
    metric: Metric = Metric.LINEAR
    lam: float = DEFAULT_LAMBDA
    derivative_powers: bool = False

    def __post_init__(self) -> None:
        terms = frozenset(Term(t) for t in self.terms)
        object.__setattr__(self, "terms", terms)
        object.__setattr__(self, "metric", Metric.parse(self.metric)
                           if not isinstance(self.metric, Metric) else self.metric)
        if not terms:
            raise InvalidSpec("at least one control term is required")
        if self.metric is not Metric.LINEAR and Term.I in terms:
            raise InvalidSpec(f"{self.metric.value} metric is defined only for P and D terms")
        if not (math.isfinite(self.lam) and self.lam >= 0):
            raise InvalidSpec("lambda must be finite and >= 0")

    @classmethod
    def parse(cls, law: str, metric: str = "Linear", lam: float = DEFAULT_LAMBDA,
              derivative_powers: bool = False) -> "ControlLawSpec":
        law = law.strip().upper()
        if not law or any(c not in "PID" for c in law) or len(set(law)) != len(law):
            raise InvalidSpec(f"control law must be a combination of P, I, D: {law!r}")
        return cls(frozenset(Term(c) for c in law), Metric.parse(metric), lam, derivative_powers)

    @property
    def law(self) -> str:
        return "".join(t.value for t in _TERM_ORDER if t in self.terms)

    @property
    def label(self) -> str:
        return f"{self.law}-{self.metric.value.lower()}"

    def columns(self) -> tuple[str, ...]:
        cols: list[str] = []
        for term in _TERM_ORDER:
            if term not in self.terms:
                continue
            gain = "k" + term.value.lower()
            if self.metric is Metric.LINEAR:
                cols.append(gain)
            elif self.metric is Metric.POLYNOMIAL:
                cols.extend(f"{gain}_e{n}" for n in POLY_ORDERS)
            else:
                cols.append(f"{gain}_exp")
        return tuple(cols)

    def as_dict(self) -> dict:
        out = {"law": self.law, "metric": self.metric.value, "lambda": self.lam}
        if Term.I in self.terms:
            out["integral_convention"] = INTEGRAL_CONVENTION
        if self.metric is Metric.POLYNOMIAL:
            out["derivative_columns"] = "powers" if self.derivative_powers else "chain_rule"
        return out


@dataclass(frozen=True)
class DesignMatrix:
    columns: tuple
    matrix: np.ndarray
    target: np.ndarray
    final_accumulated_error: float = 0.0

    @property
    def n_samples(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class FitResult:
    spec: ControlLawSpec
    columns: tuple
    coefficients: np.ndarray
    rms: float
    r2: float
    n_samples: int
    reference: ReferenceState
    label: str = "full"
    warnings: tuple = ()
    final_accumulated_error: float = 0.0

    @property
    def gains(self) -> dict:
        return {c: float(w) for c, w in zip(self.columns, self.coefficients)}

    def to_dict(self) -> dict:
        return {"label": self.label, "gains": self.gains, "rms": self.rms,
                "r2": self.r2, "n": self.n_samples}


@dataclass(frozen=True)
class SegmentFit:
    phases: tuple
    rms: float
    r2: float
    n_samples: int
    breakpoints: tuple = ()

    @property
    def warnings(self) -> tuple:
        return tuple(w for p in self.phases for w in p.warnings)


def build_design(trial: Trial, spec: ControlLawSpec, reference: ReferenceState,
                 initial_accumulated_error: float = 0.0) -> DesignMatrix:
    trial.require_kinematics(velocity=True, acceleration=True)
    return _design(trial.position, trial.velocity, trial.acceleration, spec, reference,
                   initial_accumulated_error)


def _design(position, velocity, accel, spec: ControlLawSpec, reference: ReferenceState,
            initial_accumulated_error: float) -> DesignMatrix:
    e = reference.p_star - np.asarray(position, dtype=float)
    ed = reference.v_star - np.asarray(velocity, dtype=float)
    running = initial_accumulated_error + np.cumsum(e)
    cols: list[np.ndarray] = []
    for term in _TERM_ORDER:
        if term not in spec.terms:
            continue
        if spec.metric is Metric.LINEAR:
            cols.append({Term.P: e, Term.I: running, Term.D: ed}[term])
        elif spec.metric is Metric.POLYNOMIAL:
            for n in POLY_ORDERS:
                if term is Term.P:
                    cols.append(e ** n)
                elif spec.derivative_powers:
                    cols.append(ed ** n)
                else:
                    # d/dt e^n = n e^(n-1) de/dt
                    cols.append(n * e ** (n - 1) * ed)
        else:
            signal = e if term is Term.P else ed
            if np.max(np.abs(signal)) > EXP_OVERFLOW_GUARD:
                raise NonFinite(f"|error| exceeds {EXP_OVERFLOW_GUARD} in exponential metric")
            cols.append(np.exp(signal))
    matrix = np.column_stack(cols)
    if not np.all(np.isfinite(matrix)):
        raise NonFinite("design matrix contains non-finite entries")
    return DesignMatrix(spec.columns(), matrix, np.array(accel, dtype=float),
                        float(running[-1]))


def ridge_solve(design, lam: float = DEFAULT_LAMBDA, target=None) -> np.ndarray:
    """Minimize ``||y - Xw||^2 + lam ||w||^2`` by row augmentation.

    ``design`` is a :class:`DesignMatrix`, or a bare matrix with ``target``.
    """
    if isinstance(design, DesignMatrix):
        x, y = design.matrix, design.target
    else:
        if target is None:
            raise DimensionMismatch("target is required with a bare matrix")
        x, y = np.asarray(design, dtype=float), np.asarray(target, dtype=float)
    if x.ndim != 2 or y.ndim != 1 or x.shape[0] != y.shape[0]:
        raise DimensionMismatch(f"design {x.shape} does not match target {y.shape}")
    if lam < 0 or not math.isfinite(lam):
        raise InvalidSpec("lambda must be finite and >= 0")
    k = x.shape[1]
    if lam == 0:
        if x.shape[0] < k or np.linalg.matrix_rank(x) < k:
            raise SingularSystem("rank-deficient design with lambda = 0")
        x_aug, y_aug = x, y
    else:
        x_aug = np.vstack([x, math.sqrt(lam) * np.eye(k)])
        y_aug = np.concatenate([y, np.zeros(k)])
    w, *_ = np.linalg.lstsq(x_aug, y_aug, rcond=None)
    return w


def predict(design: DesignMatrix, coefficients) -> np.ndarray:
    w = np.asarray(coefficients, dtype=float)
    if w.ndim != 1 or w.shape[0] != design.matrix.shape[1]:
        raise DimensionMismatch(
            f"{w.shape[0] if w.ndim else 0} coefficients for {design.matrix.shape[1]} columns")
    return design.matrix @ w


def _pair(predicted, observed) -> tuple[np.ndarray, np.ndarray]:
    f = np.asarray(predicted, dtype=float).reshape(-1)
    y = np.asarray(observed, dtype=float).reshape(-1)
    if f.shape != y.shape:
        raise LengthMismatch(f"{f.shape[0]} predictions vs {y.shape[0]} observations")
    if f.size == 0:
        raise Empty("no samples")
    return f, y


def rms_error(predicted, observed) -> float:
    f, y = _pair(predicted, observed)
    return math.sqrt(float(np.sum((f - y) ** 2)) / f.size)


def r_squared(predicted, observed) -> float:
    """Coefficient of determination; negative when worse than the mean."""
    f, y = _pair(predicted, observed)
    if f.size < 2:
        raise Empty("R^2 needs at least two samples")
    if np.ptp(y) == 0:
        raise DegenerateTarget("observed values are all equal")
    s_tot = float(np.sum((y - y.mean()) ** 2))
    return 1.0 - float(np.sum((f - y) ** 2)) / s_tot


def _gain_warnings(spec: ControlLawSpec, columns: Sequence[str], w: np.ndarray) -> tuple:
    checked = {"kp", "ki", "kd", "kp_e1", "kd_e1", "kp_exp", "kd_exp"}
    return tuple(f"negative fitted gain {c}={v:.4g}" for c, v in zip(columns, w)
                 if c in checked and v < 0)


def _fit_design(design: DesignMatrix, spec: ControlLawSpec, reference: ReferenceState,
                label: str) -> FitResult:
    w = ridge_solve(design, spec.lam)
    f = predict(design, w)
    return FitResult(
        spec=spec,
        columns=design.columns,
        coefficients=w,
        rms=rms_error(f, design.target),
        r2=r_squared(f, design.target),
        n_samples=design.n_samples,
        reference=reference,
        label=label,
        warnings=_gain_warnings(spec, design.columns, w),
        final_accumulated_error=design.final_accumulated_error,
    )


def fit_trial(trial: Trial, spec: ControlLawSpec) -> FitResult:
    """Fit one control law to all samples of a preprocessed trial."""
    reference = reference_state(trial)
    design = build_design(trial, spec, reference, 0.0)
    return _fit_design(design, spec, reference, "full")


def weighted_aggregate(sizes: Sequence[int], rms: Sequence[float],
                       r2: Sequence[float]) -> tuple[float, float]:
    """Whole-trial (rms, r2) from per-phase values weighted by sample count.

    RMS combines as a power mean so it equals the RMS over all samples.
    """
    n = np.asarray(sizes, dtype=float)
    total = float(n.sum())
    agg_rms = math.sqrt(float(np.sum(n * np.asarray(rms, dtype=float) ** 2)) / total)
    agg_r2 = float(np.sum(n * np.asarray(r2, dtype=float))) / total
    return agg_rms, agg_r2


def fit_segments(trial: Trial, seg, spec: ControlLawSpec) -> SegmentFit:
    """Fit each phase of ``seg`` independently.

    The running error sum is carried from one phase into the next, and
    every phase uses the full trial's last sample as its reference.
    """
    trial.require_kinematics(velocity=True, acceleration=True)
    reference = reference_state(trial)
    bounds = [0, *seg.breakpoints, len(trial)]
    labels = list(seg.phase_labels)
    n_cols = len(spec.columns())
    phases = []
    carried = 0.0
    for (start, end), label in zip(zip(bounds, bounds[1:]), labels):
        if end - start < max(n_cols, 2):
            raise PhaseTooShort(f"phase {label!r} has {end - start} samples for {n_cols} columns")
        cut = slice(start, end)
        design = _design(trial.position[cut], trial.velocity[cut], trial.acceleration[cut],
                         spec, reference, carried)
        result = _fit_design(design, spec, reference, label)
        carried = design.final_accumulated_error
        phases.append(result)
    sizes = [p.n_samples for p in phases]
    rms, r2 = weighted_aggregate(sizes, [p.rms for p in phases], [p.r2 for p in phases])
    return SegmentFit(tuple(phases), rms, r2, int(sum(sizes)), tuple(seg.breakpoints))


def predicted_acceleration(trial: Trial, fit) -> np.ndarray:
    """Model acceleration over the whole trial for a FitResult or SegmentFit."""
    trial.require_kinematics(velocity=True, acceleration=True)
    if isinstance(fit, FitResult):
        return predict(build_design(trial, fit.spec, fit.reference), fit.coefficients)
    bounds = [0, *fit.breakpoints, len(trial)]
    if len(bounds) - 1 != len(fit.phases):
        raise DimensionMismatch("segment fit does not match its breakpoints")
    out, carried = [], 0.0
    for (start, end), phase in zip(zip(bounds, bounds[1:]), fit.phases):
        cut = slice(start, end)
        design = _design(trial.position[cut], trial.velocity[cut], trial.acceleration[cut],
                         phase.spec, phase.reference, carried)
        carried = design.final_accumulated_error
        out.append(predict(design, phase.coefficients))
    return np.concatenate(out)

