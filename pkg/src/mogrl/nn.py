"""Small fully connected networks with hand-written reverse-mode gradients.

Everything is float64 numpy.  A network is a shared MLP torso followed
by one or more typed heads (mixture parameters, Gaussian parameters,
categorical logits, scalars, bounded or positive vectors).  Parameters
live in a single flat array (`ParameterVector`) addressed through a
named layout, which keeps optimizer steps, gradient clipping,
finite-difference checks and checkpointing trivial.

Gradient convention: `forward` returns head outputs plus a
`ForwardTrace`; `backward` takes cotangents keyed by head name (one
entry per head you want gradients from, shaped like that head's
output) and returns the parameter gradient together with the gradient
with respect to the network input.  Heads flagged
`stop_gradient_to_torso` contribute gradients to their own weights
only; nothing flows back into the torso from them.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from typing import Iterable, Union

import numpy as np

from .distributions import SCALE_FLOOR, softplus, softplus_inverse

# Final head layers start near zero but not exactly at zero: exactly
# symmetric mixture components receive identical gradients forever and
# can never separate, so a tiny random factor breaks the tie while
# keeping initial outputs within ~1e-3 of their nominal values.
HEAD_INIT_SCALE = 1e-2


# ---------------------------------------------------------------------------
# parameter storage


@dataclass(frozen=True)
class Layout:
    """Ordered (name, shape) slots inside one flat parameter array."""

    entries: tuple[tuple[str, tuple[int, ...]], ...]

    def __post_init__(self):
        names = [n for n, _ in self.entries]
        if len(set(names)) != len(names):
            raise ValueError("duplicate parameter names in layout")

    @property
    def size(self) -> int:
        return int(sum(int(np.prod(s)) for _, s in self.entries))

    def offsets(self) -> dict[str, tuple[int, tuple[int, ...]]]:
        out = {}
        pos = 0
        for name, shape in self.entries:
            out[name] = (pos, shape)
            pos += int(np.prod(shape))
        return out


class ParameterVector:
    """Flat float64 parameter array with named views.

    Views share memory with `data`, so in-place edits through a view
    are visible in the flat array and vice versa.
    """

    __slots__ = ("data", "layout", "_views")

    def __init__(self, data: np.ndarray, layout: Layout):
        data = np.asarray(data, dtype=np.float64)
        if data.ndim != 1 or data.shape[0] != layout.size:
            raise ValueError(f"expected flat array of length {layout.size}")
        self.data = data
        self.layout = layout
        views = {}
        for name, (pos, shape) in layout.offsets().items():
            views[name] = data[pos : pos + int(np.prod(shape))].reshape(shape)
        self._views = views

    @classmethod
    def zeros(cls, layout: Layout) -> "ParameterVector":
        return cls(np.zeros(layout.size), layout)

    @classmethod
    def from_arrays(cls, layout: Layout, arrays: dict[str, np.ndarray]) -> "ParameterVector":
        pv = cls.zeros(layout)
        for name, a in arrays.items():
            view = pv.view(name)
            view[...] = a
        return pv

    def view(self, name: str) -> np.ndarray:
        return self._views[name]

    def names(self) -> Iterable[str]:
        return (n for n, _ in self.layout.entries)

    def copy(self) -> "ParameterVector":
        return ParameterVector(self.data.copy(), self.layout)

    @property
    def size(self) -> int:
        return self.data.shape[0]


# ---------------------------------------------------------------------------
# head and network specifications


@dataclass(frozen=True)
class MoGHead:
    """Mixture-of-Gaussians parameters: logits, locations, scales (K each)."""

    name: str
    components: int
    initial_scale: float = 0.5
    stop_gradient_to_torso: bool = False


@dataclass(frozen=True)
class GaussianHead:
    """Single Gaussian: scalar mean and scalar scale."""

    name: str
    initial_scale: float = 0.5
    stop_gradient_to_torso: bool = False


@dataclass(frozen=True)
class CategoricalHead:
    """Probabilities over a fixed value grid [vmin, vmax] with `atoms` points."""

    name: str
    atoms: int
    vmin: float
    vmax: float
    stop_gradient_to_torso: bool = False


@dataclass(frozen=True)
class ScalarHead:
    """A single real output, optionally through one extra hidden layer."""

    name: str
    hidden: int | None = None
    stop_gradient_to_torso: bool = False


@dataclass(frozen=True)
class BoundedVectorHead:
    """tanh-squashed vector scaled to [-bound, bound] per dimension."""

    name: str
    size: int
    bound: float = 1.0
    stop_gradient_to_torso: bool = False


@dataclass(frozen=True)
class PositiveVectorHead:
    """softplus vector plus a floor; used for policy standard deviations."""

    name: str
    size: int
    floor: float = 1e-3
    initial_value: float = 0.3
    stop_gradient_to_torso: bool = False


Head = Union[MoGHead, GaussianHead, CategoricalHead, ScalarHead, BoundedVectorHead, PositiveVectorHead]


@dataclass(frozen=True)
class NetworkSpec:
    input_dim: int
    torso: tuple[int, ...] = (256, 256)
    heads: tuple[Head, ...] = ()
    activation: str = "elu"

    def __post_init__(self):
        if self.input_dim < 1:
            raise ValueError("input_dim must be positive")
        if any(w < 1 for w in self.torso):
            raise ValueError("torso widths must be positive")
        if not self.heads:
            raise ValueError("a network needs at least one head")
        names = [h.name for h in self.heads]
        if len(set(names)) != len(names):
            raise ValueError("head names must be unique")
        if self.activation not in _ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")

    def head(self, name: str) -> Head:
        for h in self.heads:
            if h.name == name:
                return h
        raise KeyError(name)

    @property
    def feature_dim(self) -> int:
        return self.torso[-1] if self.torso else self.input_dim


# ---------------------------------------------------------------------------
# activations


def _elu(z):
    return np.where(z > 0.0, z, np.expm1(z))


def _elu_grad(z):
    return np.where(z > 0.0, 1.0, np.exp(z))


def _relu(z):
    return np.maximum(z, 0.0)


def _relu_grad(z):
    return (z > 0.0).astype(np.float64)


def _tanh(z):
    return np.tanh(z)


def _tanh_grad(z):
    t = np.tanh(z)
    return 1.0 - t * t


_ACTIVATIONS = {
    "elu": (_elu, _elu_grad),
    "relu": (_relu, _relu_grad),
    "tanh": (_tanh, _tanh_grad),
    "linear": (lambda z: z, lambda z: np.ones_like(z)),
}


# ---------------------------------------------------------------------------
# head outputs (also reused as cotangent containers)


@dataclass
class MoGOutput:
    logits: np.ndarray
    locations: np.ndarray
    scales: np.ndarray


@dataclass
class GaussianOutput:
    mean: np.ndarray
    scale: np.ndarray


@dataclass
class CategoricalOutput:
    """log_probs and probs over atoms.  Cotangents attach to log_probs."""

    log_probs: np.ndarray
    probs: np.ndarray


HeadOutput = Union[MoGOutput, GaussianOutput, CategoricalOutput, np.ndarray]


@dataclass
class ForwardTrace:
    """Cached intermediate values for one forward pass."""

    spec: NetworkSpec
    params: ParameterVector
    x: np.ndarray
    single: bool
    torso_inputs: list[np.ndarray]
    torso_preacts: list[np.ndarray]
    features: np.ndarray
    head_caches: dict[str, dict]


# ---------------------------------------------------------------------------
# layout construction and initialization


def _head_slots(head: Head, fan_in: int) -> list[tuple[str, tuple[int, ...]]]:
    p = f"head.{head.name}"
    if isinstance(head, MoGHead):
        k = head.components
        return [
            (f"{p}.logits.W", (k, fan_in)),
            (f"{p}.logits.b", (k,)),
            (f"{p}.loc.W", (k, fan_in)),
            (f"{p}.loc.b", (k,)),
            (f"{p}.scale.W", (k, fan_in)),
            (f"{p}.scale.b", (k,)),
        ]
    if isinstance(head, GaussianHead):
        return [
            (f"{p}.mean.W", (1, fan_in)),
            (f"{p}.mean.b", (1,)),
            (f"{p}.scale.W", (1, fan_in)),
            (f"{p}.scale.b", (1,)),
        ]
    if isinstance(head, CategoricalHead):
        return [(f"{p}.logits.W", (head.atoms, fan_in)), (f"{p}.logits.b", (head.atoms,))]
    if isinstance(head, ScalarHead):
        slots = []
        if head.hidden is not None:
            slots += [(f"{p}.hidden.W", (head.hidden, fan_in)), (f"{p}.hidden.b", (head.hidden,))]
            fan_in = head.hidden
        slots += [(f"{p}.out.W", (1, fan_in)), (f"{p}.out.b", (1,))]
        return slots
    if isinstance(head, BoundedVectorHead):
        return [(f"{p}.out.W", (head.size, fan_in)), (f"{p}.out.b", (head.size,))]
    if isinstance(head, PositiveVectorHead):
        return [(f"{p}.raw.W", (head.size, fan_in)), (f"{p}.raw.b", (head.size,))]
    raise TypeError(f"unknown head type {type(head)!r}")


def layout_for(spec: NetworkSpec) -> Layout:
    entries: list[tuple[str, tuple[int, ...]]] = []
    fan_in = spec.input_dim
    for i, width in enumerate(spec.torso):
        entries.append((f"torso.{i}.W", (width, fan_in)))
        entries.append((f"torso.{i}.b", (width,)))
        fan_in = width
    for head in spec.heads:
        entries.extend(_head_slots(head, fan_in))
    return Layout(tuple(entries))


def _truncated_normal(rng: np.random.Generator, shape, std: float) -> np.ndarray:
    """Normal(0, std) with draws beyond two sigma redrawn."""
    x = rng.standard_normal(shape)
    bad = np.abs(x) > 2.0
    while np.any(bad):
        x[bad] = rng.standard_normal(int(bad.sum()))
        bad = np.abs(x) > 2.0
    return std * x


def init_params(spec: NetworkSpec, rng: np.random.Generator) -> ParameterVector:
    """Truncated-normal torso scaled by 1/sqrt(fan_in); zero biases.

    Final head layers get weights shrunk by HEAD_INIT_SCALE so initial
    outputs sit near zero, except scale-producing layers whose weights
    are exactly zero with the bias chosen so the emitted scale equals
    the configured initial value.
    """
    layout = layout_for(spec)
    pv = ParameterVector.zeros(layout)
    for name in pv.names():
        view = pv.view(name)
        if not name.endswith(".W"):
            continue  # biases stay zero unless a head overrides below
        fan_in = view.shape[1]
        std = 1.0 / np.sqrt(fan_in)
        if name.startswith("head."):
            parts = name.split(".")
            head = spec.head(parts[1])
            sub = parts[2]
            if sub == "scale" or (isinstance(head, PositiveVectorHead) and sub == "raw"):
                continue  # scale layers keep zero weights
            if isinstance(head, ScalarHead) and sub == "hidden":
                view[...] = _truncated_normal(rng, view.shape, std)
                continue
            view[...] = _truncated_normal(rng, view.shape, std * HEAD_INIT_SCALE)
        else:
            view[...] = _truncated_normal(rng, view.shape, std)
    for head in spec.heads:
        if isinstance(head, (MoGHead, GaussianHead)):
            pv.view(f"head.{head.name}.scale.b")[...] = softplus_inverse(head.initial_scale - SCALE_FLOOR)
        elif isinstance(head, PositiveVectorHead):
            pv.view(f"head.{head.name}.raw.b")[...] = softplus_inverse(head.initial_value - head.floor)
    return pv


@dataclass
class Network:
    """A spec plus one concrete parameter vector."""

    spec: NetworkSpec
    params: ParameterVector

    def forward(self, x):
        return forward(self.params, self.spec, x)

    def with_params(self, params: ParameterVector) -> "Network":
        return Network(self.spec, params)


def make_network(spec: NetworkSpec, rng: np.random.Generator) -> Network:
    return Network(spec, init_params(spec, rng))


# ---------------------------------------------------------------------------
# forward


def _linear(params: ParameterVector, prefix: str, x: np.ndarray) -> np.ndarray:
    return x @ params.view(f"{prefix}.W").T + params.view(f"{prefix}.b")


def forward(params: ParameterVector, spec: NetworkSpec, x) -> tuple[dict[str, HeadOutput], ForwardTrace]:
    """Run the network.  x: (input_dim,) or (B, input_dim)."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    xb = x[None, :] if single else x
    if xb.ndim != 2 or xb.shape[1] != spec.input_dim:
        raise ValueError(f"expected input of width {spec.input_dim}, got shape {x.shape}")

    act, _ = _ACTIVATIONS[spec.activation]
    h = xb
    inputs, preacts = [], []
    for i in range(len(spec.torso)):
        z = _linear(params, f"torso.{i}", h)
        inputs.append(h)
        preacts.append(z)
        h = act(z)
    features = h

    outputs: dict[str, HeadOutput] = {}
    caches: dict[str, dict] = {}
    for head in spec.heads:
        p = f"head.{head.name}"
        if isinstance(head, MoGHead):
            logits = _linear(params, f"{p}.logits", features)
            locs = _linear(params, f"{p}.loc", features)
            raw = _linear(params, f"{p}.scale", features)
            scales = softplus(raw) + SCALE_FLOOR
            caches[head.name] = {"raw": raw}
            outputs[head.name] = MoGOutput(logits, locs, scales)
        elif isinstance(head, GaussianHead):
            mean = _linear(params, f"{p}.mean", features)[:, 0]
            raw = _linear(params, f"{p}.scale", features)[:, 0]
            caches[head.name] = {"raw": raw}
            outputs[head.name] = GaussianOutput(mean, softplus(raw) + SCALE_FLOOR)
        elif isinstance(head, CategoricalHead):
            u = _linear(params, f"{p}.logits", features)
            u = u - np.max(u, axis=-1, keepdims=True)
            log_probs = u - np.log(np.sum(np.exp(u), axis=-1, keepdims=True))
            probs = np.exp(log_probs)
            caches[head.name] = {"probs": probs}
            outputs[head.name] = CategoricalOutput(log_probs, probs)
        elif isinstance(head, ScalarHead):
            cache: dict = {}
            inp = features
            if head.hidden is not None:
                hz = _linear(params, f"{p}.hidden", features)
                inp = act(hz)
                cache["hidden_pre"] = hz
                cache["hidden_out"] = inp
            cache["out_in"] = inp
            caches[head.name] = cache
            outputs[head.name] = _linear(params, f"{p}.out", inp)[:, 0]
        elif isinstance(head, BoundedVectorHead):
            t = np.tanh(_linear(params, f"{p}.out", features))
            caches[head.name] = {"tanh": t}
            outputs[head.name] = head.bound * t
        elif isinstance(head, PositiveVectorHead):
            raw = _linear(params, f"{p}.raw", features)
            caches[head.name] = {"raw": raw}
            outputs[head.name] = softplus(raw) + head.floor
        else:
            raise TypeError(f"unknown head type {type(head)!r}")

    if single:
        outputs = {k: _squeeze_output(v) for k, v in outputs.items()}
    trace = ForwardTrace(spec, params, xb, single, inputs, preacts, features, caches)
    return outputs, trace


def _squeeze_output(out: HeadOutput) -> HeadOutput:
    if isinstance(out, MoGOutput):
        return MoGOutput(out.logits[0], out.locations[0], out.scales[0])
    if isinstance(out, GaussianOutput):
        return GaussianOutput(out.mean[0], out.scale[0])
    if isinstance(out, CategoricalOutput):
        return CategoricalOutput(out.log_probs[0], out.probs[0])
    return out[0]


# ---------------------------------------------------------------------------
# backward


def backward(
    trace: ForwardTrace,
    cotangents: dict[str, HeadOutput],
    respect_stop_gradients: bool = True,
) -> tuple[ParameterVector, np.ndarray]:
    """Accumulate gradients for the given head cotangents.

    Returns (parameter gradient, input gradient).  Head cotangents use
    the same container type as the head's output; omitted heads (or
    None entries) contribute nothing.  With respect_stop_gradients
    False the torso also receives contributions from heads flagged
    stop_gradient_to_torso, which is what action-gradient queries at
    fixed parameters want.
    """
    spec, params = trace.spec, trace.params
    grad = ParameterVector.zeros(params.layout)
    act_grad = _ACTIVATIONS[spec.activation][1]
    batch = trace.x.shape[0]
    dfeatures = np.zeros((batch, spec.feature_dim))

    unknown = set(cotangents) - {h.name for h in spec.heads}
    if unknown:
        raise KeyError(f"cotangents for unknown heads: {sorted(unknown)}")

    for head in spec.heads:
        ct = cotangents.get(head.name)
        if ct is None:
            continue
        p = f"head.{head.name}"
        cache = trace.head_caches[head.name]
        features = trace.features
        dfeat = np.zeros_like(dfeatures)

        def accumulate_linear(prefix: str, delta: np.ndarray, inp: np.ndarray) -> np.ndarray:
            grad.view(f"{prefix}.W")[...] += delta.T @ inp
            grad.view(f"{prefix}.b")[...] += delta.sum(axis=0)
            return delta @ params.view(f"{prefix}.W")

        if isinstance(head, MoGHead):
            assert isinstance(ct, MoGOutput)
            dlogits = np.asarray(ct.logits, dtype=np.float64).reshape(batch, head.components)
            dlocs = np.asarray(ct.locations, dtype=np.float64).reshape(batch, head.components)
            dscales = np.asarray(ct.scales, dtype=np.float64).reshape(batch, head.components)
            draw = dscales * _sigmoid(cache["raw"])
            dfeat += accumulate_linear(f"{p}.logits", dlogits, features)
            dfeat += accumulate_linear(f"{p}.loc", dlocs, features)
            dfeat += accumulate_linear(f"{p}.scale", draw, features)
        elif isinstance(head, GaussianHead):
            assert isinstance(ct, GaussianOutput)
            dmean = np.asarray(ct.mean, dtype=np.float64).reshape(batch, 1)
            dscale = np.asarray(ct.scale, dtype=np.float64).reshape(batch, 1)
            draw = dscale * _sigmoid(cache["raw"].reshape(batch, 1))
            dfeat += accumulate_linear(f"{p}.mean", dmean, features)
            dfeat += accumulate_linear(f"{p}.scale", draw, features)
        elif isinstance(head, CategoricalHead):
            assert isinstance(ct, CategoricalOutput)
            dlogp = np.asarray(ct.log_probs, dtype=np.float64).reshape(batch, head.atoms)
            probs = cache["probs"]
            dlogits = dlogp - probs * dlogp.sum(axis=-1, keepdims=True)
            dfeat += accumulate_linear(f"{p}.logits", dlogits, features)
        elif isinstance(head, ScalarHead):
            dval = np.asarray(ct, dtype=np.float64).reshape(batch, 1)
            dinp = accumulate_linear(f"{p}.out", dval, cache["out_in"])
            if head.hidden is not None:
                dz = dinp * act_grad(cache["hidden_pre"])
                dinp = accumulate_linear(f"{p}.hidden", dz, features)
            dfeat += dinp
        elif isinstance(head, BoundedVectorHead):
            dout = np.asarray(ct, dtype=np.float64).reshape(batch, head.size)
            t = cache["tanh"]
            dpre = dout * head.bound * (1.0 - t * t)
            dfeat += accumulate_linear(f"{p}.out", dpre, features)
        elif isinstance(head, PositiveVectorHead):
            dout = np.asarray(ct, dtype=np.float64).reshape(batch, head.size)
            draw = dout * _sigmoid(cache["raw"])
            dfeat += accumulate_linear(f"{p}.raw", draw, features)
        else:
            raise TypeError(f"unknown head type {type(head)!r}")

        if not head.stop_gradient_to_torso or not respect_stop_gradients:
            dfeatures += dfeat

    delta = dfeatures
    for i in reversed(range(len(spec.torso))):
        dz = delta * act_grad(trace.torso_preacts[i])
        grad.view(f"torso.{i}.W")[...] += dz.T @ trace.torso_inputs[i]
        grad.view(f"torso.{i}.b")[...] += dz.sum(axis=0)
        delta = dz @ params.view(f"torso.{i}.W")
    dx = delta
    if trace.single:
        dx = dx[0]
    return grad, dx


def _sigmoid(z):
    return np.where(z >= 0, 1.0 / (1.0 + np.exp(-z)), np.exp(z) / (1.0 + np.exp(z)))


# ---------------------------------------------------------------------------
# optimization


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0


def adam_init(params: ParameterVector) -> AdamState:
    return AdamState(np.zeros(params.size), np.zeros(params.size))


def adam_step(
    params: ParameterVector,
    grad: ParameterVector,
    state: AdamState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> tuple[ParameterVector, AdamState]:
    """One Adam update with bias correction.  Returns fresh arrays."""
    if params.layout is not grad.layout and params.layout != grad.layout:
        raise ValueError("parameter and gradient layouts differ")
    t = state.step + 1
    g = grad.data
    m = beta1 * state.m + (1.0 - beta1) * g
    v = beta2 * state.v + (1.0 - beta2) * g * g
    mhat = m / (1.0 - beta1**t)
    vhat = v / (1.0 - beta2**t)
    new = params.data - lr * mhat / (np.sqrt(vhat) + eps)
    return ParameterVector(new, params.layout), AdamState(m, v, t)


def clip_by_global_norm(grad: ParameterVector, max_norm: float) -> tuple[ParameterVector, float]:
    """Scale the whole gradient so its l2 norm is at most max_norm."""
    norm = float(np.linalg.norm(grad.data))
    if norm > max_norm and norm > 0.0:
        return ParameterVector(grad.data * (max_norm / norm), grad.layout), norm
    return grad, norm


def target_sync(online: ParameterVector, target: ParameterVector, period: int, step: int) -> ParameterVector:
    """Hard copy of the online parameters every `period` steps."""
    if period < 1:
        raise ValueError("period must be >= 1")
    if step % period == 0:
        return online.copy()
    return target


# ---------------------------------------------------------------------------
# checkpointing

_MAGIC = b"MOGP"


def save_params(path, params: ParameterVector) -> None:
    """Write `[magic][u32 header length][JSON layout][flat f64 LE]`."""
    header = json.dumps(
        {"version": 1, "entries": [[n, list(s)] for n, s in params.layout.entries]}
    ).encode("utf-8")
    with open(path, "wb") as f:
        f.write(_MAGIC)
        f.write(struct.pack("<I", len(header)))
        f.write(header)
        f.write(params.data.astype("<f8").tobytes())


def load_params(path) -> ParameterVector:
    with open(path, "rb") as f:
        if f.read(4) != _MAGIC:
            raise ValueError("not a parameter checkpoint")
        (hlen,) = struct.unpack("<I", f.read(4))
        header = json.loads(f.read(hlen).decode("utf-8"))
        layout = Layout(tuple((n, tuple(s)) for n, s in header["entries"]))
        data = np.frombuffer(f.read(), dtype="<f8").astype(np.float64)
    if data.shape[0] != layout.size:
        raise ValueError("checkpoint data length does not match its layout")
    return ParameterVector(data, layout)
