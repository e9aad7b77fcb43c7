"""Adam with decoupled weight decay over the named parameter registry."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import Gradients, Tensor

__all__ = ["AdamState", "Adam"]


@dataclass
class AdamState:
    """First/second moment estimates plus the shared step counter."""

    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    step: int = 0
    lr: float = 0.005
    weight_decay: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    decay_names: frozenset[str] = field(default_factory=frozenset)


class Adam:
    """Standard bias-corrected Adam; weight decay is decoupled and applied
    only to parameters named in `decay` (the embedding/projection matrices).
    """

    def __init__(
        self,
        params: dict[str, Tensor],
        lr: float = 0.005,
        weight_decay: float = 0.001,
        decay: frozenset[str] | set[str] = frozenset(),
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        if lr <= 0:
            raise ValueError("learning rate must be positive")
        unknown = set(decay) - set(params)
        if unknown:
            raise ValueError(f"decay names not in params: {sorted(unknown)}")
        self.params = dict(params)
        self.state = AdamState(
            m={k: np.zeros_like(p.data) for k, p in params.items()},
            v={k: np.zeros_like(p.data) for k, p in params.items()},
            lr=lr,
            weight_decay=weight_decay,
            beta1=beta1,
            beta2=beta2,
            eps=eps,
            decay_names=frozenset(decay),
        )

    def step(self, grads: Gradients | dict[str, np.ndarray]) -> None:
        st = self.state
        st.step += 1
        bc1 = 1.0 - st.beta1**st.step
        bc2 = 1.0 - st.beta2**st.step
        for name, p in self.params.items():
            if isinstance(grads, Gradients):
                g = grads.get(p)
            else:
                g = grads.get(name)
            if g is None:
                g = np.zeros_like(p.data)
            g = np.asarray(g, dtype=np.float64)
            if g.shape != p.data.shape:
                raise ValueError(
                    f"gradient shape {g.shape} does not match parameter "
                    f"{name!r} shape {p.data.shape}"
                )
            if st.weight_decay and name in st.decay_names:
                p.data -= st.lr * st.weight_decay * p.data
            m = st.m[name]
            v = st.v[name]
            m *= st.beta1
            m += (1.0 - st.beta1) * g
            v *= st.beta2
            v += (1.0 - st.beta2) * (g * g)
            m_hat = m / bc1
            v_hat = v / bc2
            p.data -= st.lr * m_hat / (np.sqrt(v_hat) + st.eps)
