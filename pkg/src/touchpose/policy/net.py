"""Small feed-forward policy/value network in plain numpy.

Parameters live in one flat float64 vector so gradients can be checked
against finite differences and checkpoints stay trivial. The trunk is
shared; two linear heads emit 12 action logits and a scalar value. A
fixed per-block input scaling keeps the observation blocks (radians,
meters, bits) in comparable ranges.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..features import STATE_DIM

N_ACTIONS = 12

# joints / euler / touch bits / boundary meters / memory sums
_DEFAULT_SCALE = np.concatenate(
    [np.full(5, 1.0 / 1.3), np.ones(3), np.ones(20), np.full(6, 2.0), np.ones(4)]
)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def softmax(logits: np.ndarray) -> np.ndarray:
    return np.exp(log_softmax(logits))


class PolicyNet:
    def __init__(self, obs_dim: int = STATE_DIM, n_actions: int = N_ACTIONS,
                 hidden=(64, 64), seed: int = 0):
        self.obs_dim = int(obs_dim)
        self.n_actions = int(n_actions)
        self.hidden = tuple(int(h) for h in hidden)
        if not self.hidden:
            raise ValueError("need at least one hidden layer")
        self.scale = (
            _DEFAULT_SCALE if obs_dim == STATE_DIM else np.ones(obs_dim)
        )
        self._shapes = []
        sizes = (self.obs_dim, *self.hidden)
        for a, b in zip(sizes[:-1], sizes[1:]):
            self._shapes += [(a, b), (b,)]
        last = self.hidden[-1]
        self._shapes += [(last, self.n_actions), (self.n_actions,)]
        self._shapes += [(last, 1), (1,)]
        self.params = self._init_params(np.random.default_rng(seed))

    # -- parameter layout ----------------------------------------------------

    @property
    def n_params(self) -> int:
        return sum(int(np.prod(s)) for s in self._shapes)

    def _init_params(self, rng) -> np.ndarray:
        chunks = []
        n_trunk = 2 * len(self.hidden)
        for i, shape in enumerate(self._shapes):
            if len(shape) == 1:
                chunks.append(np.zeros(shape))
            else:
                std = 1.0 / np.sqrt(shape[0])
                w = rng.normal(0.0, std, shape)
                if i >= n_trunk:  # heads start small
                    w *= 0.01
                chunks.append(w)
        return np.concatenate([c.ravel() for c in chunks])

    def unpack(self, params: np.ndarray) -> list:
        out = []
        at = 0
        for shape in self._shapes:
            size = int(np.prod(shape))
            out.append(params[at : at + size].reshape(shape))
            at += size
        return out

    def _pack(self, arrays) -> np.ndarray:
        return np.concatenate([a.ravel() for a in arrays])

    # -- forward / backward ---------------------------------------------------

    def forward(self, obs: np.ndarray, params: np.ndarray | None = None):
        """Returns (logits, values, cache) for a (B, obs_dim) batch."""
        p = self.unpack(self.params if params is None else params)
        x = np.asarray(obs, dtype=float).reshape(-1, self.obs_dim) * self.scale
        acts = [x]
        h = x
        for i in range(len(self.hidden)):
            w, b = p[2 * i], p[2 * i + 1]
            h = np.tanh(h @ w + b)
            acts.append(h)
        wp, bp, wv, bv = p[-4], p[-3], p[-2], p[-1]
        logits = h @ wp + bp
        values = (h @ wv + bv)[:, 0]
        return logits, values, acts

    def _backward(self, params, acts, dlogits, dvalues) -> np.ndarray:
        p = self.unpack(params)
        wp, wv = p[-4], p[-2]
        h = acts[-1]
        grads = [None] * len(self._shapes)
        grads[-4] = h.T @ dlogits
        grads[-3] = dlogits.sum(axis=0)
        grads[-2] = h.T @ dvalues[:, None]
        grads[-1] = np.array([dvalues.sum()])
        dh = dlogits @ wp.T + dvalues[:, None] @ wv.T
        for i in reversed(range(len(self.hidden))):
            hi = acts[i + 1]
            dz = dh * (1.0 - hi * hi)
            grads[2 * i] = acts[i].T @ dz
            grads[2 * i + 1] = dz.sum(axis=0)
            dh = dz @ p[2 * i].T
        return self._pack(grads)

    # -- acting ----------------------------------------------------------------

    def act(self, obs_vec: np.ndarray, rng: np.random.Generator | None = None):
        """(action, log-prob, value); samples with rng, argmax without."""
        logits, values, _ = self.forward(obs_vec[None, :])
        logp = log_softmax(logits)[0]
        if rng is None:
            action = int(np.argmax(logits[0]))
        else:
            probs = np.exp(logp)
            action = int(np.searchsorted(np.cumsum(probs), rng.random(), side="right"))
            action = min(action, self.n_actions - 1)
        return action, float(logp[action]), float(values[0])

    # -- PPO loss ---------------------------------------------------------------

    def loss_and_grad(self, params: np.ndarray, batch: dict, clip: float = 0.2,
                      value_coef: float = 0.5, entropy_coef: float = 0.01):
        """Clipped-surrogate PPO loss and its analytic gradient.

        ``batch`` needs obs, actions, logp_old, advantages, returns. The
        loss is surrogate + value_coef * value MSE - entropy_coef *
        entropy, averaged over the batch.
        """
        obs = batch["obs"]
        actions = np.asarray(batch["actions"], dtype=np.int64)
        logp_old = batch["logp_old"]
        adv = batch["advantages"]
        ret = batch["returns"]
        n = len(actions)
        if n == 0:
            raise ValueError("empty batch")

        logits, values, acts = self.forward(obs, params)
        logp_all = log_softmax(logits)
        probs = np.exp(logp_all)
        rows = np.arange(n)
        logp_a = logp_all[rows, actions]
        ratio = np.exp(logp_a - logp_old)
        clipped = np.clip(ratio, 1.0 - clip, 1.0 + clip)
        s1 = ratio * adv
        s2 = clipped * adv
        surrogate = np.minimum(s1, s2)
        entropy = -(probs * logp_all).sum(axis=1)
        v_err = values - ret
        loss = (
            -surrogate.mean()
            + value_coef * (v_err ** 2).mean()
            - entropy_coef * entropy.mean()
        )

        # d loss / d logp_a, honoring which branch the min selected and
        # whether the clip is active on the clipped branch.
        use_raw = s1 <= s2
        in_band = (ratio > 1.0 - clip) & (ratio < 1.0 + clip)
        dlogp_a = np.where(use_raw, adv * ratio, adv * ratio * in_band) * (-1.0 / n)
        dlogits = probs * (-dlogp_a[:, None])
        dlogits[rows, actions] += dlogp_a
        # entropy gradient: dH/dz_j = -p_j (log p_j + H); the loss carries
        # -entropy_coef * mean(H).
        dent = -probs * (logp_all + entropy[:, None])
        dlogits -= (entropy_coef / n) * dent
        dvalues = value_coef * 2.0 * v_err / n

        grad = self._backward(params, acts, dlogits, dvalues)
        stats = {
            "loss": float(loss),
            "surrogate": float(-surrogate.mean()),
            "value_mse": float((v_err ** 2).mean()),
            "entropy": float(entropy.mean()),
        }
        return float(loss), grad, stats


@dataclass
class AdamState:
    """Adam moment accumulators for one flat parameter vector."""

    m: np.ndarray
    v: np.ndarray
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @staticmethod
    def for_params(params: np.ndarray) -> "AdamState":
        return AdamState(np.zeros_like(params), np.zeros_like(params))

    def update(self, params: np.ndarray, grad: np.ndarray, lr: float) -> np.ndarray:
        self.step += 1
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * grad * grad
        mh = self.m / (1.0 - self.beta1 ** self.step)
        vh = self.v / (1.0 - self.beta2 ** self.step)
        return params - lr * mh / (np.sqrt(vh) + self.eps)
