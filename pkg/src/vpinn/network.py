"""Fully connected tanh network and the boundary-annihilating trial function.

The trial function is T(x) = x (1 - x) NN(x), which satisfies the
homogeneous Dirichlet conditions structurally: no boundary penalty is
ever needed.  The network is evaluated on degree-2 jets so that T, T'
and T'' come out of one forward pass with parameter gradients attached.
"""

from dataclasses import dataclass, field

import numpy as np

from .autodiff import Jet2, Tape, jet_primitive, seed_jet

__all__ = [
    "MlpParams",
    "TrialFunction",
    "init_params",
    "param_count",
    "register_params",
    "mlp_forward",
    "trial",
    "trial_values",
    "save_params",
    "load_params",
]


@dataclass
class MlpParams:
    """Per-layer weights (out x in) and biases for a scalar-to-scalar MLP."""

    widths: list[int]
    weights: list[np.ndarray] = field(default_factory=list)
    biases: list[np.ndarray] = field(default_factory=list)

    def flatten(self) -> np.ndarray:
        """Parameters as one vector: W1 (row-major), b1, W2, b2, ..."""
        parts = []
        for w, b in zip(self.weights, self.biases):
            parts.append(w.ravel())
            parts.append(b)
        return np.concatenate(parts)

    def with_flat(self, theta: np.ndarray) -> "MlpParams":
        """New MlpParams with the same shape, values taken from `theta`."""
        theta = np.asarray(theta, dtype=np.float64)
        if theta.size != param_count(self.widths):
            raise ValueError("flat vector length does not match architecture")
        out = MlpParams(widths=list(self.widths))
        k = 0
        for w, b in zip(self.weights, self.biases):
            out.weights.append(theta[k : k + w.size].reshape(w.shape).copy())
            k += w.size
            out.biases.append(theta[k : k + b.size].copy())
            k += b.size
        return out


def param_count(widths: list[int]) -> int:
    """Total trainable parameters: sum over layers of n_k * n_{k-1} + n_k."""
    return sum(widths[k] * widths[k - 1] + widths[k] for k in range(1, len(widths)))


@dataclass
class TrialFunction:
    """The hard-constrained trial T(x) = x(1-x) NN(x) around a fixed
    parameter set; callable on plain points, jet-evaluable on a tape."""

    params: MlpParams

    def __call__(self, x) -> np.ndarray:
        return trial_values(self.params, x)

    def jet(self, tape: Tape, x: Jet2) -> Jet2:
        layers, _ = register_params(tape, self.params)
        return trial(tape, layers, x)


def init_params(widths: list[int], seed: int) -> MlpParams:
    """Glorot-uniform weights with bound sqrt(6 / (fan_in + fan_out)),
    zero biases; fully reproducible from `seed`."""
    if len(widths) < 2:
        raise ValueError("need at least an input and an output layer")
    if any(w < 1 for w in widths):
        raise ValueError("layer widths must be positive")
    if widths[0] != 1 or widths[-1] != 1:
        raise ValueError("the network maps one scalar to one scalar")
    rng = np.random.default_rng(seed)
    params = MlpParams(widths=list(widths))
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        params.weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        params.biases.append(np.zeros(fan_out))
    return params


def register_params(tape: Tape, params: MlpParams) -> tuple[list, list[int]]:
    """Put every weight and bias on the tape as a scalar leaf.

    Returns (layers, flat_refs) where layers[k] = (w_refs, b_refs) with
    w_refs an (out, in) nested list, and flat_refs follows the
    `MlpParams.flatten` ordering.
    """
    layers = []
    flat_refs = []
    for w, b in zip(params.weights, params.biases):
        w_refs = []
        for row in w:
            row_refs = [tape.leaf(float(v)) for v in row]
            w_refs.append(row_refs)
            flat_refs.extend(row_refs)
        b_refs = [tape.leaf(float(v)) for v in b]
        flat_refs.extend(b_refs)
        layers.append((w_refs, b_refs))
    return layers, flat_refs


def _affine(tape: Tape, w_refs, b_refs, inputs: list[Jet2]) -> list[Jet2]:
    # z_j = sum_i w_ji * in_i + b_j, coefficient-wise over the jet slots.
    # Weights do not depend on x, so each term is a plain scale.
    out = []
    for row, b in zip(w_refs, b_refs):
        acc = inputs[0].scale(row[0])
        for w, u in zip(row[1:], inputs[1:]):
            term = u.scale(w)
            acc = Jet2(
                tape,
                tape.add(acc.c0, term.c0),
                tape.add(acc.c1, term.c1),
                tape.add(acc.c2, term.c2),
            )
        out.append(acc.shift(b))
    return out


def mlp_forward(tape: Tape, layers, x: Jet2) -> Jet2:
    """NN(x) as a jet: tanh hidden layers, linear output layer."""
    acts = [x]
    for w_refs, b_refs in layers[:-1]:
        acts = [jet_primitive("tanh", z) for z in _affine(tape, w_refs, b_refs, acts)]
    w_refs, b_refs = layers[-1]
    return _affine(tape, w_refs, b_refs, acts)[0]


def trial(tape: Tape, layers, x: Jet2) -> Jet2:
    """T(x) = x (1 - x) NN(x); exactly zero at both endpoints."""
    factor = x * (1.0 - x)
    return factor * mlp_forward(tape, layers, x)


def trial_values(params: MlpParams, x: np.ndarray) -> np.ndarray:
    """Evaluate the trained trial function at points `x` (no gradients kept)."""
    tape = Tape()
    layers, _ = register_params(tape, params)
    xj = seed_jet(tape, np.asarray(x, dtype=np.float64))
    out = trial(tape, layers, xj)
    return np.broadcast_to(tape.vals[out.c0], np.shape(x)).copy()


def save_params(params: MlpParams, path) -> None:
    """Snapshot the flat parameter vector, little-endian float64.

    `.json` writes {"widths": [...], "theta": [...]}; any other suffix
    writes raw '<f8' bytes in layer order.
    """
    path = str(path)
    flat = params.flatten()
    if path.endswith(".json"):
        import json

        with open(path, "w", encoding="utf-8") as fh:
            json.dump({"widths": list(params.widths), "theta": flat.tolist()}, fh)
    else:
        with open(path, "wb") as fh:
            fh.write(flat.astype("<f8").tobytes())


def load_params(path, widths: list[int] | None = None) -> MlpParams:
    """Inverse of `save_params`; binary snapshots need `widths`."""
    path = str(path)
    if path.endswith(".json"):
        import json

        with open(path, "r", encoding="utf-8") as fh:
            blob = json.load(fh)
        widths = [int(w) for w in blob["widths"]]
        theta = np.asarray(blob["theta"], dtype=np.float64)
    else:
        if widths is None:
            raise ValueError("binary snapshots need the width list")
        with open(path, "rb") as fh:
            theta = np.frombuffer(fh.read(), dtype="<f8").astype(np.float64)
    template = init_params(widths, seed=0)
    return template.with_flat(theta)
