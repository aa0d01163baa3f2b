from __future__ import annotations

import time

import numpy as np
import pytest

from trolleywatch.vision.corpus import synthesize_patch
from trolleywatch.vision.network import LABELS, demo_network, save_weights
from trolleywatch.vision.train import TrainConfig, normalize_patches, predict, train


def _synth_batch(n: int, seed: int, patch: int = 16):
    rng = np.random.default_rng(seed)
    patches = np.stack([synthesize_patch(rng, LABELS[i % 2], patch)
                        for i in range(n)])
    labels = np.array([i % 2 for i in range(n)], dtype=np.intp)
    return patches, labels


@pytest.fixture(scope="session")
def quick_weights(tmp_path_factory) -> str:
    """Small but genuinely trained conv weights for plumbing tests."""
    patches, labels = _synth_batch(600, seed=11)
    net = demo_network(seed=0)
    net, _ = train(net, normalize_patches(patches), labels,
                   TrainConfig(epochs=5, seed=11))
    path = str(tmp_path_factory.mktemp("weights") / "quick.tw")
    save_weights(net, path)
    return path


@pytest.fixture(scope="session")
def full_training(tmp_path_factory) -> dict:
    """Train on 2000 synthetic patches, score 500 held-out ones.

    Shared across the acceptance tests: the detection-accuracy check
    asserts on the numbers, the scenario-level checks reuse the weights.
    """
    train_patches, train_labels = _synth_batch(2000, seed=42)
    eval_patches, eval_labels = _synth_batch(500, seed=43)

    started = time.monotonic()
    net = demo_network(seed=0)
    net, trace = train(net, normalize_patches(train_patches), train_labels,
                       TrainConfig(epochs=10, seed=42))
    elapsed = time.monotonic() - started

    guesses = predict(net, normalize_patches(eval_patches))
    acc = float(np.mean(guesses == eval_labels))

    path = str(tmp_path_factory.mktemp("weights") / "full.tw")
    save_weights(net, path)
    return {"path": path, "accuracy": acc, "train_seconds": elapsed,
            "loss_trace": trace, "eval_n": int(eval_labels.size)}
