"""AdamW with decoupled weight decay over named parameter dictionaries."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def _decayable(name: str) -> bool:
    # bias and offset tensors are excluded from weight decay
    return not name.endswith("bias")


@dataclass
class AdamW:
    """Decoupled-weight-decay Adam over a dict of named float64 tensors.

    Update per tensor:

        m <- b1 m + (1 - b1) g          v <- b2 v + (1 - b2) g^2
        theta <- theta - lr * m_hat / (sqrt(v_hat) + eps) - lr * decay * theta

    with bias-corrected m_hat, v_hat. The decay term multiplies the current
    parameter value, not the gradient, and never touches bias tensors.
    The update sequence is fully deterministic.
    """

    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 1e-5
    step_count: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        """Apply one update in place; parameter order is sorted by name."""
        self.step_count += 1
        t = self.step_count
        bc1 = 1.0 - self.beta1**t
        bc2 = 1.0 - self.beta2**t
        for name in sorted(params):
            g = grads[name]
            if name not in self.m:
                self.m[name] = np.zeros_like(params[name])
                self.v[name] = np.zeros_like(params[name])
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * np.square(g)
            update = (m / bc1) / (np.sqrt(v / bc2) + self.eps)
            params[name] -= self.lr * update
            if self.weight_decay and _decayable(name):
                params[name] -= self.lr * self.weight_decay * params[name]

    def state_tensors(self) -> dict[str, np.ndarray]:
        out = {}
        for name, val in self.m.items():
            out[f"m.{name}"] = val
        for name, val in self.v.items():
            out[f"v.{name}"] = val
        return out

    @classmethod
    def from_state(
        cls, hyper: dict, tensors: dict[str, np.ndarray]
    ) -> "AdamW":
        opt = cls(
            lr=float(hyper["lr"]),
            beta1=float(hyper["beta1"]),
            beta2=float(hyper["beta2"]),
            eps=float(hyper["eps"]),
            weight_decay=float(hyper["weight_decay"]),
            step_count=int(hyper["step_count"]),
        )
        for name, val in tensors.items():
            if name.startswith("m."):
                opt.m[name[2:]] = val.copy()
            elif name.startswith("v."):
                opt.v[name[2:]] = val.copy()
        return opt

    def hyper(self) -> dict:
        return {
            "lr": self.lr,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "eps": self.eps,
            "weight_decay": self.weight_decay,
            "step_count": self.step_count,
        }


def adamw_step(
    state: AdamW, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]
) -> tuple[dict[str, np.ndarray], AdamW]:
    """Functional wrapper: one AdamW step, returning (params, state)."""
    state.step(params, grads)
    return params, state
