from typing import Optional, Sequence

import numpy as np


class QNetwork:
    """Multilayer perceptron approximating Q(s, .) over a discrete action set

    Hidden layers use the rectifier, the output layer is linear. Parameters are
    float64 numpy arrays: `weights[i]` has shape (fan_out, fan_in) and
    `biases[i]` has shape (fan_out,).

    Training minimises the TD regression loss

        L = 1/2 * mean_i (Q(s_i, a_i) - y_i)^2

    with plain gradient descent. The 1/2 factor makes a single-sample step of
    size alpha move Q(s, a) by exactly alpha * (y - Q(s, a)) when the network
    is linear over one-hot features without biases.

    Args:
        layer_sizes: (n_inputs, *hidden, n_outputs)
        seed: seed of the uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialisation
        bias: whether layers carry a bias vector
    """

    def __init__(self, layer_sizes: Sequence[int], seed: int = 0, bias: bool = True):
        layer_sizes = tuple(int(n) for n in layer_sizes)
        if len(layer_sizes) < 2 or min(layer_sizes) < 1:
            raise ValueError(f"invalid layer sizes {layer_sizes}")
        self.layer_sizes = layer_sizes
        self.bias = bias
        rng = np.random.default_rng(seed)
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
            bound = 1.0 / np.sqrt(fan_in)
            self.weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
            if bias:
                self.biases.append(rng.uniform(-bound, bound, size=fan_out))
            else:
                self.biases.append(np.zeros(fan_out))

    @property
    def n_inputs(self) -> int:
        return self.layer_sizes[0]

    @property
    def n_outputs(self) -> int:
        return self.layer_sizes[-1]

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def parameters(self) -> list[np.ndarray]:
        """All trainable arrays, weights and biases interleaved layer by layer"""
        params = []
        for w, b in zip(self.weights, self.biases):
            params.append(w)
            if self.bias:
                params.append(b)
        return params

    def copy(self) -> "QNetwork":
        clone = object.__new__(QNetwork)
        clone.layer_sizes = self.layer_sizes
        clone.bias = self.bias
        clone.weights = [w.copy() for w in self.weights]
        clone.biases = [b.copy() for b in self.biases]
        return clone

    def _as_batch(self, states: np.ndarray) -> np.ndarray:
        states = np.asarray(states, dtype=np.float64)
        batch = np.atleast_2d(states)
        if batch.ndim != 2 or batch.shape[1] != self.n_inputs:
            raise ValueError(
                f"network expects states of size {self.n_inputs}, "
                f"got shape {states.shape}"
            )
        return batch

    def forward_cache(self, states: np.ndarray) -> list[np.ndarray]:
        """Forward pass keeping [x, z1, a1, ..., z_out] for backpropagation"""
        activation = self._as_batch(states)
        cache = [activation]
        last = self.n_layers - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = activation @ w.T + b
            cache.append(z)
            activation = z if i == last else np.maximum(z, 0.0)
            if i != last:
                cache.append(activation)
        return cache

    def forward(self, states: np.ndarray) -> np.ndarray:
        """Q-values of shape (n_outputs,) for one state or (n, n_outputs) for a batch"""
        out = self.forward_cache(states)[-1]
        if np.asarray(states).ndim == 1:
            return out[0]
        return out

    def backward(
        self, cache: list[np.ndarray], d_out: np.ndarray
    ) -> list[np.ndarray]:
        """Gradients of a scalar loss given dL/d(output), ordered as parameters()"""
        grads_w: list[Optional[np.ndarray]] = [None] * self.n_layers
        grads_b: list[Optional[np.ndarray]] = [None] * self.n_layers
        dz = d_out
        for i in reversed(range(self.n_layers)):
            layer_input = cache[2 * i]
            grads_w[i] = dz.T @ layer_input
            grads_b[i] = dz.sum(axis=0)
            if i > 0:
                da = dz @ self.weights[i]
                dz = da * (cache[2 * i - 1] > 0.0)
        grads = []
        for gw, gb in zip(grads_w, grads_b):
            grads.append(gw)
            if self.bias:
                grads.append(gb)
        return grads

    def loss_and_gradients(
        self, states: np.ndarray, actions: np.ndarray, targets: np.ndarray
    ) -> tuple[float, list[np.ndarray]]:
        """Half the mean squared TD error on the taken actions and its gradients"""
        cache = self.forward_cache(states)
        q = cache[-1]
        actions = np.asarray(actions, dtype=np.int64)
        targets = np.asarray(targets, dtype=np.float64)
        n = q.shape[0]
        if actions.shape != (n,) or targets.shape != (n,):
            raise ValueError(
                f"batch of {n} states needs {n} actions and targets, got "
                f"{actions.shape} and {targets.shape}"
            )
        rows = np.arange(n)
        error = q[rows, actions] - targets
        loss = 0.5 * float(np.mean(error**2))
        d_out = np.zeros_like(q)
        d_out[rows, actions] = error / n
        return loss, self.backward(cache, d_out)

    def apply_gradients(self, grads: Sequence[np.ndarray], learning_rate: float):
        for param, grad in zip(self.parameters(), grads):
            param -= learning_rate * grad

    def same_parameters(self, other: "QNetwork") -> bool:
        return (
            self.layer_sizes == other.layer_sizes
            and self.bias == other.bias
            and all(
                np.array_equal(a, b)
                for a, b in zip(self.parameters(), other.parameters())
            )
        )
