"""Two-layer convolutional network with fixed +/-1 second layer.

Both branches share the architecture F_j(W_j, x) = (1/m) sum_r sum_p
sigma(<w_{j,r}, x^(p)>) with sigma(z) = max(0, z)^q, and the network output
is f = F_{+1} - F_{-1}. Gradients are computed in closed form; the
architecture is fixed and tiny, so no autodiff framework is involved.

Internally the two branches live in one (d, 2m) array so the per-step
matmuls run as a single BLAS call; ``w_plus``/``w_minus`` are views.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .data import Dataset, Sample

__all__ = [
    "Network",
    "init_network",
    "activation",
    "activation_derivative",
    "forward",
    "logistic_loss",
    "loss_derivative",
    "clean_batch_loss",
    "full_batch_gradient",
    "zero_one_error",
    "network_to_json",
    "network_from_json",
]


class Network:
    """First-layer weights of both output branches plus activation exponent q."""

    def __init__(self, weights: np.ndarray, q: int):
        if weights.ndim != 2 or weights.shape[1] % 2 != 0:
            raise ValueError(f"weights must be (d, 2m), got {weights.shape}")
        if q < 2:
            raise ValueError(f"q must be >= 2, got {q}")
        if not np.all(np.isfinite(weights)):
            raise ValueError("weights must be finite")
        self._w = np.ascontiguousarray(weights, dtype=np.float64)
        self.q = int(q)

    @classmethod
    def from_branches(cls, w_plus: np.ndarray, w_minus: np.ndarray, q: int) -> "Network":
        if w_plus.shape != w_minus.shape:
            raise ValueError("branch shapes differ")
        return cls(np.hstack([w_plus, w_minus]), q)

    @property
    def d(self) -> int:
        return self._w.shape[0]

    @property
    def m(self) -> int:
        return self._w.shape[1] // 2

    @property
    def w_plus(self) -> np.ndarray:
        """(d, m) filters of the +1 branch (view; writes mutate the network)."""
        return self._w[:, : self.m]

    @property
    def w_minus(self) -> np.ndarray:
        return self._w[:, self.m :]

    @property
    def weights(self) -> np.ndarray:
        """(d, 2m) backing array: [+1 branch | -1 branch]."""
        return self._w

    def clone(self) -> "Network":
        return Network(self._w.copy(), self.q)

    def __eq__(self, other):
        if not isinstance(other, Network):
            return NotImplemented
        return self.q == other.q and np.array_equal(self._w, other._w)


def init_network(d: int, m: int, q: int, sigma_0: float, rng: np.random.Generator) -> Network:
    """Gaussian init: i.i.d. N(0, sigma_0^2) entries in both branches."""
    if d < 1 or m < 1:
        raise ValueError("d and m must be >= 1")
    if not (sigma_0 >= 0):
        raise ValueError(f"sigma_0 must be nonnegative, got {sigma_0}")
    return Network(sigma_0 * rng.standard_normal((d, 2 * m)), q)


def activation(z, q: int):
    """Polynomial ReLU max(0, z)^q."""
    return np.maximum(z, 0.0) ** q


def activation_derivative(z, q: int):
    """q * max(0, z)^(q-1)."""
    return q * np.maximum(z, 0.0) ** (q - 1)


def logistic_loss(z):
    """log(1 + exp(-z)), overflow-free for any margin."""
    return np.logaddexp(0.0, -np.asarray(z, dtype=np.float64))


def loss_derivative(z):
    """d/dz log(1 + exp(-z)) = -1 / (1 + exp(z)), computed without overflow."""
    return -np.exp(-np.logaddexp(0.0, np.asarray(z, dtype=np.float64)))


def _as_patches(point) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(point, Sample):
        return point.patch1, point.patch2
    p1, p2 = point
    return np.asarray(p1, dtype=np.float64), np.asarray(p2, dtype=np.float64)


def forward(net: Network, point) -> float:
    """Network output f = F_{+1} - F_{-1} on a Sample or a (patch1, patch2) pair."""
    p1, p2 = _as_patches(point)
    if p1.shape != (net.d,) or p2.shape != (net.d,):
        raise ValueError(f"patch dimension mismatch: expected ({net.d},), got {p1.shape}, {p2.shape}")
    pre = np.concatenate([p1 @ net._w, p2 @ net._w])  # (4m,): [p1|p1-, p2+|p2-]
    act = activation(pre, net.q)
    m = net.m
    f_plus = (act[:m].sum() + act[2 * m : 3 * m].sum()) / m
    f_minus = (act[m : 2 * m].sum() + act[3 * m :].sum()) / m
    return float(f_plus - f_minus)


def _batch_outputs(net: Network, dataset: Dataset) -> np.ndarray:
    """(n,) outputs f(W, x_i), vectorized over the dataset."""
    with np.errstate(over="ignore", invalid="ignore"):
        mu_proj = dataset.spec.mu @ net._w  # (2m,)
        sig_pre = np.multiply.outer(dataset.labels, mu_proj)  # (n, 2m)
        noise_pre = dataset.noise_matrix @ net._w  # (n, 2m)
        act = activation(sig_pre, net.q) + activation(noise_pre, net.q)
        m = net.m
        return (act[:, :m].sum(axis=1) - act[:, m:].sum(axis=1)) / m


def clean_batch_loss(net: Network, dataset: Dataset) -> float:
    """Mean logistic loss with the true labels."""
    if len(dataset) == 0:
        raise ValueError("empty dataset")
    f = _batch_outputs(net, dataset)
    return float(np.mean(logistic_loss(dataset.labels * f)))


def zero_one_error(net: Network, test_dataset: Dataset) -> float:
    """Fraction of points with y != sign(f); sign(0) counts as an error."""
    if len(test_dataset) == 0:
        raise ValueError("empty test set")
    f = _batch_outputs(net, test_dataset)
    return float(np.mean(np.sign(f) != test_dataset.labels))


def _forward_backward(net: Network, dataset: Dataset, multipliers: np.ndarray):
    """Shared forward/backward pass.

    Returns (f, lprime, mu_proj, noise_pre, grad) where grad is the full
    gradient of (1/n) sum_i loss(eps_i y_i f_i) in (d, 2m) layout. mu_proj
    is (2m,) filter-signal inner products <w_{j,r}, mu>; noise_pre is
    (n, 2m) inner products <w_{j,r}, xi_i>.
    """
    n, m, q = len(dataset), net.m, net.q
    with np.errstate(over="ignore", invalid="ignore"):
        y = dataset.labels
        mu_proj = dataset.spec.mu @ net._w
        sig_pre = np.multiply.outer(y, mu_proj)  # <w, y_i mu>
        noise_pre = dataset.noise_matrix @ net._w
        act = activation(sig_pre, q) + activation(noise_pre, q)
        f = (act[:, :m].sum(axis=1) - act[:, m:].sum(axis=1)) / m
        lprime = loss_derivative(multipliers * y * f)

        coef = lprime * multipliers  # (n,)
        sig_der = activation_derivative(sig_pre, q)
        noise_der = activation_derivative(noise_pre, q)
        grad = np.multiply.outer(dataset.spec.mu, coef @ sig_der)
        grad += dataset.noise_matrix.T @ ((coef * y)[:, None] * noise_der)
        grad[:, m:] *= -1.0  # second-layer sign j
        grad /= n * m
    return f, lprime, mu_proj, noise_pre, grad


def full_batch_gradient(net: Network, dataset: Dataset, multipliers: np.ndarray) -> np.ndarray:
    """Gradient of (1/n) sum_i loss(eps_i y_i f(W, x_i)) in (d, 2m) layout."""
    multipliers = np.asarray(multipliers, dtype=np.float64)
    if multipliers.shape != (len(dataset),):
        raise ValueError(f"multipliers must have shape ({len(dataset)},), got {multipliers.shape}")
    if not np.all(np.isfinite(multipliers)):
        raise ValueError("multipliers must be finite")
    return _forward_backward(net, dataset, multipliers)[4]


# --- JSON checkpoint format --------------------------------------------------
# {"format": "lngd-network-v1", "d": int, "m": int, "q": int,
#  "w_plus": row-major flat list, "w_minus": row-major flat list}

_NETWORK_FORMAT = "lngd-network-v1"


def network_to_json(net: Network) -> str:
    return json.dumps(
        {
            "format": _NETWORK_FORMAT,
            "d": net.d,
            "m": net.m,
            "q": net.q,
            "w_plus": net.w_plus.ravel().tolist(),
            "w_minus": net.w_minus.ravel().tolist(),
        }
    )


def network_from_json(text: str) -> Network:
    payload = json.loads(text)
    if payload.get("format") != _NETWORK_FORMAT:
        raise ValueError(f"unsupported network format: {payload.get('format')!r}")
    d, m = int(payload["d"]), int(payload["m"])
    w_plus = np.array(payload["w_plus"], dtype=np.float64).reshape(d, m)
    w_minus = np.array(payload["w_minus"], dtype=np.float64).reshape(d, m)
    return Network.from_branches(w_plus, w_minus, int(payload["q"]))
