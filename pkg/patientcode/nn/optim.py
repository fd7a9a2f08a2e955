"""Adam optimizer with bias-corrected moments."""

from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np

from patientcode.errors import ConfigError, ShapeError

BETA1 = 0.9
BETA2 = 0.999
EPSILON = 1e-8


@dataclass
class AdamState:
    """Moment accumulators shaped like the parameters, plus the step counter."""

    learning_rate: float
    beta1: float = BETA1
    beta2: float = BETA2
    epsilon: float = EPSILON
    t: int = 0
    m: List[np.ndarray] = field(default_factory=list)
    v: List[np.ndarray] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate", f"must be positive, got {self.learning_rate}")
        for name in ("beta1", "beta2"):
            beta = getattr(self, name)
            if not 0.0 < beta < 1.0:
                raise ConfigError(name, f"must lie in (0, 1), got {beta}")

    @classmethod
    def for_params(cls, params: Sequence[np.ndarray], learning_rate: float, **kwargs) -> "AdamState":
        return cls(
            learning_rate,
            m=[np.zeros_like(p) for p in params],
            v=[np.zeros_like(p) for p in params],
            **kwargs,
        )


def adam_step(state: AdamState, params: Sequence[np.ndarray],
              grads: Sequence[np.ndarray]) -> Tuple[Sequence[np.ndarray], AdamState]:
    """Apply one Adam update to params in place.

    The step counter is incremented before bias correction. The state must
    have exactly one owner.

    Returns:
        (params, state), both updated.
    """
    if not state.m:
        state.m = [np.zeros_like(p) for p in params]
        state.v = [np.zeros_like(p) for p in params]
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ShapeError(f"{len(params)} params, {len(grads)} grads, {len(state.m)} moment slots")
    for p, g, m in zip(params, grads, state.m):
        if p.shape != np.shape(g) or p.shape != m.shape:
            raise ShapeError(f"param {p.shape}, grad {np.shape(g)} and moment {m.shape} disagree")

    state.t += 1
    correction1 = 1.0 - state.beta1 ** state.t
    correction2 = 1.0 - state.beta2 ** state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        g = np.asarray(g, dtype=p.dtype)
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        m_hat = m / correction1
        v_hat = v / correction2
        p -= (state.learning_rate * m_hat / (np.sqrt(v_hat) + state.epsilon)).astype(p.dtype, copy=False)
    return params, state
