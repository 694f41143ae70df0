"""Full-batch gradient descent with pluggable per-step label-noise multipliers.

Standard GD is the special case of all-ones multipliers. Each step draws a
fresh multiplier vector eps, descends the eps-weighted logistic loss, and
feeds the identical per-step quantities (loss derivatives, pre-activation
inner products) to the coefficient recurrences so decomposition and weights
stay in exact agreement.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import Dataset, SignalSpec, generate_dataset
from .decomposition import CoefficientState, iota_all, ratio_summary, update_coefficients
from .network import (
    Network,
    _forward_backward,
    init_network,
    logistic_loss,
    zero_one_error,
)
from .streams import STREAM_IDS, stream

__all__ = [
    "LabelNoiseSpec",
    "TrainConfig",
    "TraceRow",
    "TrainTrace",
    "StepContext",
    "RunAborted",
    "sample_multipliers",
    "train_step",
    "train_run",
    "run_training",
]

TRACE_COLUMNS = [
    "step",
    "clean_train_loss",
    "noisy_train_loss",
    "test_error_01",
    "max_gamma",
    "mean_gamma",
    "max_rho_bar",
    "mean_rho_bar",
    "min_rho_under",
    "ratio_rho_over_gamma",
    "iota_mean",
    "iota_max",
    "flip_count",
]


@dataclass(frozen=True)
class LabelNoiseSpec:
    """Distribution of the per-sample multipliers applied to y_i at each step."""

    kind: str  # none | flip | gaussian | uniform
    p: float = 0.0
    mean: float = 0.0
    std: float = 0.0
    lo: float = 0.0
    hi: float = 0.0

    def __post_init__(self):
        if self.kind == "none":
            pass
        elif self.kind == "flip":
            if not (0.0 <= self.p <= 1.0):
                raise ValueError(f"flip probability must be in [0, 1], got {self.p}")
        elif self.kind == "gaussian":
            if not (self.std >= 0.0):
                raise ValueError(f"gaussian std must be >= 0, got {self.std}")
        elif self.kind == "uniform":
            if not (self.lo < self.hi):
                raise ValueError(f"uniform bounds need lo < hi, got [{self.lo}, {self.hi}]")
        else:
            raise ValueError(f"unknown noise kind {self.kind!r}")

    @classmethod
    def none(cls) -> "LabelNoiseSpec":
        return cls(kind="none")

    @classmethod
    def flip(cls, p: float) -> "LabelNoiseSpec":
        return cls(kind="flip", p=p)

    @classmethod
    def gaussian(cls, mean: float, std: float) -> "LabelNoiseSpec":
        return cls(kind="gaussian", mean=mean, std=std)

    @classmethod
    def uniform(cls, lo: float, hi: float) -> "LabelNoiseSpec":
        return cls(kind="uniform", lo=lo, hi=hi)

    def describe(self) -> str:
        if self.kind == "none":
            return "none"
        if self.kind == "flip":
            return f"flip(p={self.p:g})"
        if self.kind == "gaussian":
            return f"gaussian({self.mean:g},{self.std:g})"
        return f"uniform({self.lo:g},{self.hi:g})"


def sample_multipliers(noise: LabelNoiseSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw the length-n multiplier vector for one step."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if noise.kind == "none":
        return np.ones(n)
    if noise.kind == "flip":
        return np.where(rng.random(n) < noise.p, -1.0, 1.0)
    if noise.kind == "gaussian":
        return noise.mean + noise.std * rng.standard_normal(n)
    return rng.uniform(noise.lo, noise.hi, n)


@dataclass(frozen=True)
class TrainConfig:
    eta: float
    steps: int
    noise: LabelNoiseSpec
    seed: int
    log_stride: int = 10
    n_test: int = 2000

    def __post_init__(self):
        if not (self.eta > 0):
            raise ValueError(f"eta must be positive, got {self.eta}")
        if self.steps < 0:
            raise ValueError(f"steps must be >= 0, got {self.steps}")
        if self.log_stride < 1 or (self.steps > 0 and self.log_stride > self.steps):
            raise ValueError(f"log_stride must be in [1, steps], got {self.log_stride}")
        if self.n_test < 1:
            raise ValueError(f"n_test must be >= 1, got {self.n_test}")


@dataclass(frozen=True)
class TraceRow:
    step: int
    clean_train_loss: float
    noisy_train_loss: float
    test_error_01: float
    max_gamma: float
    mean_gamma: float
    max_rho_bar: float
    mean_rho_bar: float
    min_rho_under: float
    ratio_rho_over_gamma: float
    iota_mean: float
    iota_max: float
    flip_count: int


@dataclass
class TrainTrace:
    """Logged rows plus run-level diagnostics and per-sample iota history."""

    rows: list[TraceRow] = field(default_factory=list)
    iota_history: list[tuple[int, np.ndarray]] = field(default_factory=list)
    aborted_at: int | None = None
    abort_reason: str = ""
    rho_bar_monotone_violations: int = 0
    n: int = 0
    d: int = 0
    noise_kind: str = "none"

    @property
    def final(self) -> TraceRow:
        return self.rows[-1]

    def rows_from(self, step: int) -> list[TraceRow]:
        return [r for r in self.rows if r.step >= step]


@dataclass(frozen=True)
class StepContext:
    """Per-step quantities shared between the weight update and the recurrences."""

    step: int
    q: int
    n: int
    m: int
    mu_norm_sq: float
    eps: np.ndarray  # (n,)
    lprime: np.ndarray  # (n,) loss derivatives at eps_i y_i f_i
    mu_proj: np.ndarray  # (2m,) <w_{j,r}, mu> at the pre-update weights
    noise_pre: np.ndarray  # (n, 2m) <w_{j,r}, xi_i> at the pre-update weights
    f: np.ndarray  # (n,) network outputs at the pre-update weights


class RunAborted(RuntimeError):
    """Raised when a step produces non-finite values; carries partial results."""

    def __init__(self, step: int, reason: str, net=None, trace=None, state=None):
        super().__init__(f"training aborted at step {step}: {reason}")
        self.step = step
        self.reason = reason
        self.net = net
        self.trace = trace
        self.state = state


def _step_context(net: Network, dataset: Dataset, multipliers: np.ndarray, step: int):
    f, lprime, mu_proj, noise_pre, grad = _forward_backward(net, dataset, multipliers)
    ctx = StepContext(
        step=step,
        q=net.q,
        n=len(dataset),
        m=net.m,
        mu_norm_sq=dataset.spec.mu_norm_sq,
        eps=multipliers,
        lprime=lprime,
        mu_proj=mu_proj,
        noise_pre=noise_pre,
        f=f,
    )
    return ctx, grad


def train_step(net: Network, dataset: Dataset, multipliers: np.ndarray, eta: float,
               step: int = 0) -> StepContext:
    """Apply one update W <- W - eta * grad in place; return the step context."""
    multipliers = np.asarray(multipliers, dtype=np.float64)
    if multipliers.shape != (len(dataset),):
        raise ValueError(f"multipliers must have shape ({len(dataset)},), got {multipliers.shape}")
    ctx, grad = _step_context(net, dataset, multipliers, step)
    if not np.all(np.isfinite(ctx.f)):
        raise RunAborted(step, "non-finite network outputs", net=net)
    if not np.all(np.isfinite(grad)):
        raise RunAborted(step, "non-finite gradient", net=net)
    np.subtract(net.weights, eta * grad, out=net.weights)
    return ctx


def _trace_row(step, ctx, state, labels, test_error, iotas) -> TraceRow:
    margins = labels * ctx.f
    clean = float(np.mean(logistic_loss(margins)))
    noisy = float(np.mean(logistic_loss(ctx.eps * margins)))
    same = state.same_class_mask[:, None, :]
    rho_bar_defined = state.rho_bar[np.broadcast_to(same, state.rho_bar.shape)]
    rho_under_defined = state.rho_under[np.broadcast_to(~same, state.rho_under.shape)]
    return TraceRow(
        step=step,
        clean_train_loss=clean,
        noisy_train_loss=noisy,
        test_error_01=test_error,
        max_gamma=float(state.gamma.max()),
        mean_gamma=float(state.gamma.mean()),
        max_rho_bar=float(rho_bar_defined.max()),
        mean_rho_bar=float(rho_bar_defined.mean()),
        min_rho_under=float(rho_under_defined.min()),
        ratio_rho_over_gamma=ratio_summary(state),
        iota_mean=float(iotas.mean()),
        iota_max=float(iotas.max()),
        flip_count=int(np.sum(ctx.eps == -1.0)),
    )


def run_training(net: Network, dataset: Dataset, test_dataset: Dataset, *,
                 eta: float, steps: int, noise: LabelNoiseSpec,
                 log_stride: int = 10, noise_rng: np.random.Generator | None = None,
                 observer=None) -> tuple[TrainTrace, CoefficientState]:
    """Train ``net`` in place; log a row every log_stride steps plus the final step.

    The row at step t reflects the weights after t updates and the multiplier
    vector drawn for step t (the loss the optimizer is about to descend).
    ``observer(step, net, state, dataset, row)`` runs at every logged step.
    Non-finite steps record the abort in the trace and raise RunAborted.
    """
    if noise.kind != "none" and noise_rng is None:
        raise ValueError("noise_rng is required for stochastic label noise")
    trace = TrainTrace(n=len(dataset), d=dataset.spec.d, noise_kind=noise.kind)
    state = CoefficientState.zeros(dataset, net)
    labels = dataset.labels
    check_monotone = noise.kind == "none"

    def log_at(t: int, ctx: StepContext):
        iotas = iota_all(state)
        err = zero_one_error(net, test_dataset)
        row = _trace_row(t, ctx, state, labels, err, iotas)
        trace.rows.append(row)
        trace.iota_history.append((t, iotas))
        if observer is not None:
            observer(t, net, state, dataset, row)

    for t in range(steps):
        eps = sample_multipliers(noise, len(dataset), noise_rng)
        try:
            ctx, grad = _step_context(net, dataset, eps, t)
            if not np.all(np.isfinite(ctx.f)) or not np.all(np.isfinite(grad)):
                raise RunAborted(t, "non-finite forward/gradient")
        except (RunAborted, FloatingPointError) as exc:
            trace.aborted_at = t
            trace.abort_reason = getattr(exc, "reason", str(exc))
            raise RunAborted(t, trace.abort_reason, net=net, trace=trace, state=state)
        if t % log_stride == 0:
            log_at(t, ctx)
        np.subtract(net.weights, eta * grad, out=net.weights)
        if check_monotone:
            before = state.rho_bar.copy()
            update_coefficients(state, ctx, eta)
            if np.any(state.rho_bar < before):
                trace.rho_bar_monotone_violations += int(np.sum(state.rho_bar < before))
        else:
            update_coefficients(state, ctx, eta)

    # Final row for the post-update weights; one extra multiplier draw keeps
    # every row's (weights, eps) pairing uniform.
    eps = sample_multipliers(noise, len(dataset), noise_rng)
    ctx, _ = _step_context(net, dataset, eps, steps)
    if not np.all(np.isfinite(ctx.f)):
        trace.aborted_at = steps
        trace.abort_reason = "non-finite network outputs at final evaluation"
        raise RunAborted(steps, trace.abort_reason, net=net, trace=trace, state=state)
    log_at(steps, ctx)
    return trace, state


def train_run(config: TrainConfig, spec: SignalSpec, n: int, m: int, q: int,
              sigma_0: float, observer=None):
    """Seed-derived end-to-end run: data, init, training, fixed test set.

    Returns (final network, trace, final coefficient state). All randomness
    comes from four named sub-streams of config.seed (see streams.STREAM_IDS).
    """
    data_rng = stream(config.seed, "data")
    init_rng = stream(config.seed, "init")
    noise_rng = stream(config.seed, "label_noise")
    test_rng = stream(config.seed, "test")
    dataset = generate_dataset(spec, n, data_rng)
    test_dataset = generate_dataset(spec, config.n_test, test_rng)
    net = init_network(spec.d, m, q, sigma_0, init_rng)
    trace, state = run_training(
        net,
        dataset,
        test_dataset,
        eta=config.eta,
        steps=config.steps,
        noise=config.noise,
        log_stride=config.log_stride,
        noise_rng=noise_rng,
        observer=observer,
    )
    return net, trace, state
