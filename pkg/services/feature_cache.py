#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Feature cache for frozen encoders.

Memoizes encoder tokens per (encoder digest, trajectory id, t, view) so probe
training and alignment encode each frame once. The cache is bounded by entry
count and evicts least recently used entries.
"""

import logging
from collections import OrderedDict
from typing import Any, Dict, Hashable, List, Optional, Sequence, Tuple

import numpy as np
import torch

from services.networks import Encoder, encoder_digest

logger = logging.getLogger(__name__)

FrameKey = Tuple[int, int, str]


class FeatureCache:
    """
    In-memory LRU cache of token arrays.

    Keys are tuples; values are float32 numpy arrays of shape P x C.
    """

    def __init__(self, max_entries: int = 50_000):
        """Initialize the cache."""
        self.max_entries = max_entries
        self._cache: "OrderedDict[Hashable, np.ndarray]" = OrderedDict()
        self._stats = {"hits": 0, "misses": 0, "sets": 0, "evictions": 0}

    def __len__(self) -> int:
        return len(self._cache)

    def get(self, key: Hashable) -> Optional[np.ndarray]:
        """
        Get a value from cache.

        Args:
            key: Cache key

        Returns:
            Cached tokens if present, None otherwise
        """
        if key not in self._cache:
            self._stats["misses"] += 1
            return None
        self._cache.move_to_end(key)
        self._stats["hits"] += 1
        return self._cache[key]

    def set(self, key: Hashable, value: np.ndarray) -> None:
        self._cache[key] = value
        self._cache.move_to_end(key)
        self._stats["sets"] += 1
        while len(self._cache) > self.max_entries:
            self._cache.popitem(last=False)
            self._stats["evictions"] += 1

    def clear(self) -> None:
        """Clear all cache entries."""
        self._cache.clear()

    def invalidate(self, digest: str) -> int:
        """
        Drop every entry of one encoder.

        Returns:
            Number of entries removed
        """
        stale = [key for key in self._cache if isinstance(key, tuple) and key[0] == digest]
        for key in stale:
            del self._cache[key]
        return len(stale)

    def get_stats(self) -> Dict[str, Any]:
        """
        Get cache statistics.

        Returns:
            Dictionary with cache stats
        """
        total_requests = self._stats["hits"] + self._stats["misses"]
        hit_rate = self._stats["hits"] / total_requests if total_requests > 0 else 0

        return {
            "size": len(self._cache),
            "hits": self._stats["hits"],
            "misses": self._stats["misses"],
            "sets": self._stats["sets"],
            "evictions": self._stats["evictions"],
            "hit_rate": hit_rate,
        }

    def reset_stats(self) -> None:
        """Reset cache statistics."""
        self._stats = {"hits": 0, "misses": 0, "sets": 0, "evictions": 0}


# Global cache instance
_cache = FeatureCache()


def get_feature_cache() -> FeatureCache:
    """
    Get the global feature cache instance.

    Returns:
        Global FeatureCache instance
    """
    return _cache


@torch.no_grad()
def encode_batch(encoder: Encoder, images: np.ndarray, batch_size: int = 256) -> np.ndarray:
    """Encode N x H x W x 3 uint8 images to N x P x C float32 tokens in eval mode."""
    was_training = encoder.training
    encoder.eval()
    try:
        outputs = [
            encoder(torch.from_numpy(np.ascontiguousarray(images[i : i + batch_size])))
            .to(torch.float32)
            .numpy()
            for i in range(0, len(images), batch_size)
        ]
    finally:
        encoder.train(was_training)
    if not outputs:
        return np.zeros((0, encoder.num_tokens, encoder.channels), dtype=np.float32)
    return np.concatenate(outputs)


def encode_frames(
    encoder: Encoder,
    keys: Sequence[FrameKey],
    images: Sequence[np.ndarray],
    cache: Optional[FeatureCache] = None,
    digest: Optional[str] = None,
    batch_size: int = 256,
) -> np.ndarray:
    """
    Tokens for frames identified by (trajectory id, t, view), reusing cached entries.

    Args:
        keys: one key per image
        images: H x W x 3 uint8 frames aligned with keys
        digest: encoder digest (computed when omitted)

    Returns:
        N x P x C float32 tokens in key order
    """
    cache = cache if cache is not None else get_feature_cache()
    digest = digest or encoder_digest(encoder)
    result: List[Optional[np.ndarray]] = [None] * len(keys)
    todo = []
    for i, key in enumerate(keys):
        hit = cache.get((digest, *key))
        if hit is None:
            todo.append(i)
        else:
            result[i] = hit
    if todo:
        fresh = encode_batch(encoder, np.stack([images[i] for i in todo]), batch_size)
        for i, tokens in zip(todo, fresh):
            cache.set((digest, *keys[i]), tokens)
            result[i] = tokens
        logger.debug(f"Encoded {len(todo)} frames, {len(keys) - len(todo)} from cache")
    if not keys:
        return np.zeros((0, encoder.num_tokens, encoder.channels), dtype=np.float32)
    return np.stack(result)
