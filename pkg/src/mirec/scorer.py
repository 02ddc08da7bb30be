"""Synthetic utility model standing in for the ranking layer.

A :class:`SyntheticWorld` fixes latent user/item vectors and per-channel biases
from a seed. Every random draw is keyed by ``(seed, purpose, t)`` so the same
stream is reproduced regardless of what the allocator does with it; this is
what lets different methods be compared on identical traffic.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
from scipy.special import expit

from .domain import Candidate, PageLayout, Request

# stream tags for independent random substreams
_ITEMS, _USER, _REQUEST, _NOISE, _CLICK = range(5)

ScoreVector = np.ndarray


@dataclass(frozen=True, eq=False)
class SyntheticWorld:
    seed: int
    channel_bias: np.ndarray
    item_vectors: np.ndarray  # (n_channels * items_per_channel, user_dim)
    candidates_per_channel: np.ndarray
    items_per_channel: int = 500
    user_dim: int = 8
    noise_sigma: float = 0.0

    @classmethod
    def build(
        cls,
        seed: int,
        channel_bias: Sequence[float],
        candidates_per_channel: Union[int, Sequence[int]] = 20,
        items_per_channel: int = 500,
        user_dim: int = 8,
        noise_sigma: float = 0.0,
    ) -> "SyntheticWorld":
        bias = np.asarray(channel_bias, dtype=float)
        n_channels = len(bias)
        per = np.broadcast_to(np.asarray(candidates_per_channel, dtype=np.int64), (n_channels,)).copy()
        if np.any(per > items_per_channel):
            raise ValueError("candidates_per_channel exceeds items_per_channel")
        rng = np.random.default_rng((seed, _ITEMS))
        # scale so that a user-item dot product has unit variance
        scale = user_dim ** -0.25
        vectors = rng.normal(0.0, scale, size=(n_channels * items_per_channel, user_dim))
        return cls(
            seed=seed,
            channel_bias=bias,
            item_vectors=vectors,
            candidates_per_channel=per,
            items_per_channel=items_per_channel,
            user_dim=user_dim,
            noise_sigma=noise_sigma,
        )

    @property
    def n_channels(self) -> int:
        return len(self.channel_bias)

    def channel_of(self, item_ids: np.ndarray) -> np.ndarray:
        return np.asarray(item_ids) // self.items_per_channel


def user_vector(world: SyntheticWorld, user_key: int) -> np.ndarray:
    rng = np.random.default_rng((world.seed, _USER, user_key))
    return rng.normal(0.0, world.user_dim ** -0.25, size=world.user_dim)


def true_utilities(world: SyntheticWorld, user_key: int, item_ids: np.ndarray) -> np.ndarray:
    item_ids = np.asarray(item_ids)
    logits = world.item_vectors[item_ids] @ user_vector(world, user_key)
    return expit(logits + world.channel_bias[world.channel_of(item_ids)])


def true_utility(world: SyntheticWorld, user_key: int, candidate: Candidate) -> float:
    """sigmoid(<user, item> + bias of the candidate's channel)."""
    vec = world.item_vectors[candidate.item_id]
    return float(expit(vec @ user_vector(world, user_key) + world.channel_bias[candidate.channel]))


def draw_request(world: SyntheticWorld, t: int, user_key: Optional[int] = None) -> Request:
    """I.i.d. arrival: a fresh user and a fresh candidate sample from every channel.

    The returned request carries true utilities in both ``utilities`` and
    ``true_utilities``; pass it through :func:`estimate` to add noise.
    """
    key = t if user_key is None else user_key
    rng = np.random.default_rng((world.seed, _REQUEST, key))
    pool = world.items_per_channel
    per = world.candidates_per_channel
    # uniform keys + partial sort = a uniform sample without replacement per channel
    keys = rng.random((world.n_channels, pool))
    kmax = int(per.max())
    top = np.argpartition(keys, kmax - 1, axis=1)[:, :kmax] if kmax < pool else np.argsort(keys, axis=1)
    top = np.sort(top, axis=1) + pool * np.arange(world.n_channels)[:, None]
    if np.all(per == kmax):
        ids = top.ravel()
    else:
        ids = np.concatenate([np.sort(np.argsort(keys[m])[:k]) + m * pool for m, k in enumerate(per)])
    chans = ids // pool
    u = true_utilities(world, key, ids)
    return Request(t=t, item_ids=ids, channels=chans, utilities=u, user_key=key, true_utilities=u)


def estimate(world: SyntheticWorld, request: Request, noise_sigma: Optional[float] = None) -> ScoreVector:
    """Noisy utility estimate, clamped to [0, 1]. Zero noise returns the true values exactly."""
    sigma = world.noise_sigma if noise_sigma is None else noise_sigma
    truth = request.true_utilities
    if truth is None:
        truth = true_utilities(world, request.user_key, request.item_ids)
    if sigma == 0:
        return truth.copy()
    rng = np.random.default_rng((world.seed, _NOISE, request.t))
    return np.clip(truth + rng.normal(0.0, sigma, size=len(truth)), 0.0, 1.0)


def realize_feedback(
    world: SyntheticWorld,
    layout: PageLayout,
    request: Request,
    slot_weights: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Per-slot Bernoulli(true utility * slot weight) clicks.

    Uniform draws are taken per slot from a stream keyed by ``request.t`` only,
    so two methods that place the same item in the same slot see the same click.
    """
    n = len(layout)
    w = np.ones(n) if slot_weights is None else np.asarray(slot_weights)[:n]
    truth = request.realized_utilities[layout.index]
    rng = np.random.default_rng((world.seed, _CLICK, request.t))
    return (rng.random(n) < truth * w).astype(np.int64)
