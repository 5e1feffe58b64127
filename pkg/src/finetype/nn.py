"""Layers, parameter storage, Adam, and a finite-difference gradient checker.

All layers are thin compositions of :mod:`finetype.autodiff` operations so
that analytic gradients come from one backward pass. Parameters live in a
:class:`ParamStore` whose iteration order is insertion order, which makes
optimizer updates reproducible run to run.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ConfigError, DataError, DimensionError, NumericError, StateError


def glorot_uniform(shape, rng: np.random.Generator) -> np.ndarray:
    """Uniform(-a, a) with a = sqrt(6 / (fan_in + fan_out))."""
    fan_in, fan_out = (shape[0], shape[-1]) if len(shape) > 1 else (shape[0], shape[0])
    a = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-a, a, size=shape)


@dataclass
class ParamEntry:
    value: Tensor
    moment1: np.ndarray
    moment2: np.ndarray


class ParamStore:
    """Ordered name -> (value, gradient, Adam moments) map.

    Gradients live on the value tensors themselves (``Tensor.grad``); the
    store adds the optimizer state and the update step.
    """

    def __init__(self):
        self._entries: dict[str, ParamEntry] = {}
        self.step_count = 0

    def register(self, name: str, array: np.ndarray) -> Tensor:
        if name in self._entries:
            raise ConfigError(f"parameter {name!r} registered twice")
        t = Tensor(np.asarray(array, dtype=np.float64), requires_grad=True)
        self._entries[name] = ParamEntry(
            value=t, moment1=np.zeros_like(t.data), moment2=np.zeros_like(t.data)
        )
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._entries[name].value

    def __contains__(self, name: str) -> bool:
        return name in self._entries

    def names(self):
        return list(self._entries)

    def items(self):
        return [(name, e.value) for name, e in self._entries.items()]

    def zero_grad(self):
        for e in self._entries.values():
            e.value.grad = None

    def state_arrays(self) -> dict[str, np.ndarray]:
        return {name: e.value.data for name, e in self._entries.items()}

    def load_state(self, arrays: dict[str, np.ndarray]):
        for name, e in self._entries.items():
            if name not in arrays:
                raise DataError(f"checkpoint missing parameter {name!r}")
            if arrays[name].shape != e.value.data.shape:
                raise DimensionError(
                    f"parameter {name!r}: checkpoint shape {arrays[name].shape} "
                    f"!= model shape {e.value.data.shape}"
                )
            e.value.data = np.asarray(arrays[name], dtype=np.float64).copy()

    def adam_step(self, lr: float, beta1: float = 0.9, beta2: float = 0.999,
                  eps: float = 1e-8):
        """One Adam update with bias correction; gradients are consumed."""
        self.step_count += 1
        t = self.step_count
        for name, e in self._entries.items():
            g = e.value.grad
            if g is None:
                g = np.zeros_like(e.value.data)
            if not np.isfinite(g).all():
                raise NumericError(f"non-finite gradient for parameter {name!r}")
            e.moment1 = beta1 * e.moment1 + (1 - beta1) * g
            e.moment2 = beta2 * e.moment2 + (1 - beta2) * g * g
            m_hat = e.moment1 / (1 - beta1 ** t)
            v_hat = e.moment2 / (1 - beta2 ** t)
            e.value.data = e.value.data - lr * m_hat / (np.sqrt(v_hat) + eps)
            e.value.grad = None


# -- layers -------------------------------------------------------------------


def linear_forward(x: Tensor, W: Tensor, b: Tensor) -> Tensor:
    """y = xW + b with b broadcast over rows."""
    if x.data.shape[-1] != W.data.shape[0]:
        raise DimensionError(
            f"linear_forward: input {x.data.shape} incompatible with weight {W.data.shape}"
        )
    if W.data.shape[1] != b.data.shape[-1]:
        raise DimensionError(
            f"linear_forward: weight {W.data.shape} incompatible with bias {b.data.shape}"
        )
    return ad.add(ad.matmul(x, W), b)


_ACTIVATIONS = {
    "relu": ad.relu,
    "sigmoid": ad.sigmoid,
    "tanh": ad.tanh,
    "softmax_lastdim": ad.softmax_lastdim,
}


def activations(x: Tensor, kind: str) -> Tensor:
    if kind not in _ACTIVATIONS:
        raise ConfigError(f"unknown activation {kind!r}")
    if np.isnan(x.data).any():
        raise NumericError(f"activation {kind!r} received NaN input")
    return _ACTIVATIONS[kind](x)


def dropout_forward(x: Tensor, p: float, mode: str, rng: np.random.Generator):
    """Inverted dropout: train-time zero/rescale, eval is the identity.

    Returns (output, mask); the mask is all-ones in eval mode or when p=0.
    """
    if not 0.0 <= p < 1.0:
        raise ConfigError(f"dropout probability must be in [0, 1), got {p}")
    if mode not in ("train", "eval"):
        raise ConfigError(f"dropout mode must be 'train' or 'eval', got {mode!r}")
    if mode == "eval" or p == 0.0:
        return x, np.ones_like(x.data)
    keep = (rng.random(x.data.shape) >= p).astype(np.float64)
    mask = keep / (1.0 - p)
    return ad.mul(x, Tensor(mask)), mask


def bce_loss(scores: Tensor, targets: np.ndarray, mask: np.ndarray | None = None,
             eps: float = 1e-12) -> Tensor:
    """Binary cross entropy, mean over all unmasked elements.

    ``targets`` must be binary; ``mask`` (if given) flags rows to keep,
    where a "row" is everything but the last (label) axis. Scores are
    clamped to [eps, 1-eps] before the logs.
    """
    targets = np.asarray(targets, dtype=np.float64)
    if targets.shape != scores.data.shape:
        raise DimensionError(
            f"bce_loss: scores {scores.data.shape} vs targets {targets.shape}"
        )
    if not np.isin(targets, (0.0, 1.0)).all():
        raise DataError("bce_loss targets must be 0 or 1")
    y = ad.clip(scores, eps, 1.0 - eps)
    ell = ad.add(
        ad.mul(Tensor(-targets), ad.log(y)),
        ad.mul(Tensor(targets - 1.0), ad.log(ad.add(Tensor(1.0), ad.mul_scalar(y, -1.0)))),
    )
    if mask is None:
        return ad.mean(ell)
    mask = np.asarray(mask, dtype=np.float64)
    if mask.shape != scores.data.shape[:-1]:
        raise DimensionError(
            f"bce_loss: mask {mask.shape} vs score rows {scores.data.shape[:-1]}"
        )
    rows = mask.sum()
    if rows == 0:
        raise DataError("bce_loss: every row is masked out")
    n_elems = rows * scores.data.shape[-1]
    masked = ad.mul(ell, Tensor(mask[..., None]))
    return ad.mul_scalar(ad.tsum(masked), 1.0 / n_elems)


# -- GRU ----------------------------------------------------------------------


@dataclass
class GruCellParams:
    """One direction's gate parameters, registered in a shared ParamStore."""

    W_z: Tensor
    W_r: Tensor
    W_h: Tensor
    U_z: Tensor
    U_r: Tensor
    U_h: Tensor
    b_z: Tensor
    b_r: Tensor
    b_h: Tensor

    @classmethod
    def create(cls, store: ParamStore, prefix: str, input_dim: int, hidden: int,
               rng: np.random.Generator) -> "GruCellParams":
        def mat(name, shape):
            return store.register(f"{prefix}.{name}", glorot_uniform(shape, rng))

        def vec(name, n):
            return store.register(f"{prefix}.{name}", np.zeros(n))

        return cls(
            W_z=mat("W_z", (input_dim, hidden)),
            W_r=mat("W_r", (input_dim, hidden)),
            W_h=mat("W_h", (input_dim, hidden)),
            U_z=mat("U_z", (hidden, hidden)),
            U_r=mat("U_r", (hidden, hidden)),
            U_h=mat("U_h", (hidden, hidden)),
            b_z=vec("b_z", hidden),
            b_r=vec("b_r", hidden),
            b_h=vec("b_h", hidden),
        )


def gru_cell_forward(x_t: Tensor, h_prev: Tensor, p: GruCellParams) -> Tensor:
    """Single GRU step: h' = (1-z) * h_prev + z * h_tilde."""
    z = ad.sigmoid(ad.add(ad.add(ad.matmul(x_t, p.W_z), ad.matmul(h_prev, p.U_z)), p.b_z))
    r = ad.sigmoid(ad.add(ad.add(ad.matmul(x_t, p.W_r), ad.matmul(h_prev, p.U_r)), p.b_r))
    h_tilde = ad.tanh(
        ad.add(ad.add(ad.matmul(x_t, p.W_h), ad.matmul(ad.mul(r, h_prev), p.U_h)), p.b_h)
    )
    one_minus_z = ad.add(Tensor(1.0), ad.mul_scalar(z, -1.0))
    return ad.add(ad.mul(one_minus_z, h_prev), ad.mul(z, h_tilde))


def bigru_forward(seq: Tensor, fwd: GruCellParams, bwd: GruCellParams,
                  pad_mask: np.ndarray | None = None) -> Tensor:
    """Bidirectional GRU over seq[T, B, d] -> [T, B, 2H].

    Initial hidden states are zero in both directions. When ``pad_mask``
    (T x B, 1 = real token) is given, the hidden state is carried through
    pad positions unchanged, so trailing pads never perturb real outputs.
    """
    if seq.data.ndim != 3:
        raise DimensionError(f"bigru_forward expects [T,B,d], got {seq.data.shape}")
    T, B, _ = seq.data.shape
    if T < 1:
        raise DataError("bigru_forward: empty sequence")
    H = fwd.U_z.data.shape[0]

    def run(params: GruCellParams, time_order):
        h = Tensor(np.zeros((B, H)))
        outputs = {}
        for t in time_order:
            h_new = gru_cell_forward(seq[t], h, params)
            if pad_mask is not None:
                m = Tensor(pad_mask[t][:, None].astype(np.float64))
                keep = Tensor(1.0 - pad_mask[t][:, None].astype(np.float64))
                h_new = ad.add(ad.mul(m, h_new), ad.mul(keep, h))
            outputs[t] = h_new
            h = h_new
        return [outputs[t] for t in range(T)]

    fwd_states = run(fwd, range(T))
    bwd_states = run(bwd, range(T - 1, -1, -1))
    steps = [ad.concat([f, b], axis=-1) for f, b in zip(fwd_states, bwd_states)]
    return ad.stack(steps, axis=0)


# -- gradient checking ----------------------------------------------------------


@dataclass
class GradCheckReport:
    tolerance: float
    per_param: dict[str, float] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(v < self.tolerance for v in self.per_param.values())

    @property
    def worst(self) -> tuple[str, float]:
        name = max(self.per_param, key=self.per_param.get)
        return name, self.per_param[name]

    def failures(self) -> list[str]:
        return [n for n, v in self.per_param.items() if v >= self.tolerance]


def grad_check(closure, store: ParamStore, tolerance: float = 1e-4,
               h: float = 1e-5) -> GradCheckReport:
    """Compare analytic gradients against central finite differences.

    ``closure`` must map the current store contents to a scalar loss
    Tensor and be deterministic (dropout in eval mode or a frozen mask);
    two evaluations are compared to catch nondeterminism.
    """
    l1 = closure().data.item()
    l2 = closure().data.item()
    if l1 != l2:
        raise StateError(f"closure is not deterministic: {l1!r} != {l2!r}")

    store.zero_grad()
    loss = closure()
    loss.backward()
    analytic = {
        name: (t.grad.copy() if t.grad is not None else np.zeros_like(t.data))
        for name, t in store.items()
    }

    report = GradCheckReport(tolerance=tolerance)
    for name, t in store.items():
        flat = t.data.reshape(-1)
        numeric = np.zeros_like(flat)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = closure().data.item()
            flat[i] = orig - h
            down = closure().data.item()
            flat[i] = orig
            numeric[i] = (up - down) / (2 * h)
        a = analytic[name].reshape(-1)
        scale = np.maximum(np.maximum(np.abs(a), np.abs(numeric)), 1e-6)
        report.per_param[name] = float(np.max(np.abs(a - numeric) / scale))
    store.zero_grad()
    return report
