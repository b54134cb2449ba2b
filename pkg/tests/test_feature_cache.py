"""
Tests for services/feature_cache.py - Frozen-encoder token cache
"""
import numpy as np
import pytest

from services.feature_cache import FeatureCache, encode_batch, encode_frames, get_feature_cache
from services.networks import Encoder, encoder_digest


class TestFeatureCache:
    """Test the LRU cache"""

    @pytest.mark.unit
    def test_set_and_get(self):
        """Test setting and getting values"""
        cache = FeatureCache()
        cache.set(("d", 0, 1, "static"), np.ones((2, 2), dtype=np.float32))
        assert np.array_equal(cache.get(("d", 0, 1, "static")), np.ones((2, 2)))

    @pytest.mark.unit
    def test_get_nonexistent(self):
        """Test getting nonexistent key"""
        assert FeatureCache().get("missing") is None

    @pytest.mark.unit
    def test_lru_eviction(self):
        """Test the least recently used entry is evicted"""
        cache = FeatureCache(max_entries=2)
        cache.set("a", np.zeros(1))
        cache.set("b", np.zeros(1))
        cache.get("a")
        cache.set("c", np.zeros(1))
        assert cache.get("b") is None
        assert cache.get("a") is not None
        assert cache.get_stats()["evictions"] == 1

    @pytest.mark.unit
    def test_invalidate(self):
        """Test dropping the entries of one encoder"""
        cache = FeatureCache()
        cache.set(("enc1", 0, 0, "static"), np.zeros(1))
        cache.set(("enc1", 0, 1, "static"), np.zeros(1))
        cache.set(("enc2", 0, 0, "static"), np.zeros(1))
        assert cache.invalidate("enc1") == 2
        assert len(cache) == 1

    @pytest.mark.unit
    def test_stats(self):
        """Test hit rate accounting"""
        cache = FeatureCache()
        cache.set("k", np.zeros(1))
        cache.get("k")
        cache.get("x")
        stats = cache.get_stats()
        assert stats["hits"] == 1
        assert stats["misses"] == 1
        assert stats["hit_rate"] == 0.5
        cache.reset_stats()
        assert cache.get_stats()["hits"] == 0

    @pytest.mark.unit
    def test_clear(self):
        """Test clearing all entries"""
        cache = FeatureCache()
        cache.set("k", np.zeros(1))
        cache.clear()
        assert len(cache) == 0

    @pytest.mark.unit
    def test_global_cache(self):
        """Test the shared instance"""
        assert get_feature_cache() is get_feature_cache()


class TestEncodeFrames:
    """Test cached encoding"""

    @pytest.mark.unit
    def test_matches_direct_encoding(self, tiny_encoder_config):
        """Test cached tokens equal a direct forward pass"""
        encoder = Encoder(tiny_encoder_config)
        frames = np.random.default_rng(0).integers(0, 256, size=(3, 16, 16, 3), dtype=np.uint8)
        keys = [(0, t, "static") for t in range(3)]
        cache = FeatureCache()
        first = encode_frames(encoder, keys, list(frames), cache)
        assert first.shape == (3, 16, 8)
        assert first.dtype == np.float32
        assert np.array_equal(first, encode_batch(encoder, frames, batch_size=2))

        second = encode_frames(encoder, keys, list(frames), cache)
        assert np.array_equal(first, second)
        assert cache.get_stats()["hits"] == 3

    @pytest.mark.unit
    def test_keys_include_digest(self, tiny_encoder_config):
        """Test different encoders do not share entries"""
        frames = np.zeros((1, 16, 16, 3), dtype=np.uint8)
        cache = FeatureCache()
        for seed in (1, 2):
            encoder = Encoder(tiny_encoder_config, init_seed=seed)
            encode_frames(encoder, [(0, 0, "static")], list(frames), cache, encoder_digest(encoder))
        assert len(cache) == 2

    @pytest.mark.unit
    def test_empty(self, tiny_encoder_config):
        """Test no keys gives an empty token array"""
        encoder = Encoder(tiny_encoder_config)
        assert encode_frames(encoder, [], [], FeatureCache()).shape == (0, 16, 8)

    @pytest.mark.unit
    def test_restores_training_mode(self, tiny_encoder_config):
        """Test encode_batch leaves the module mode unchanged"""
        encoder = Encoder(tiny_encoder_config)
        encoder.train()
        encode_batch(encoder, np.zeros((1, 16, 16, 3), dtype=np.uint8))
        assert encoder.training
