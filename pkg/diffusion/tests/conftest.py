from __future__ import annotations

import numpy as np
import pytest

from bevdiff import consistency, data, edm

TRAIN_STEPS = 1200
DISTILL_STEPS = 700
HELD_OUT = 20


@pytest.fixture(scope="session")
def toy_corpus():
    samples = data.make_toy_dataset(200 + HELD_OUT, size=64, seed=1)
    return samples[:200], samples[200:]


@pytest.fixture(scope="session")
def teacher(toy_corpus):
    train_set, _ = toy_corpus
    net, losses = edm.train(train_set, edm.TrainConfig(steps=TRAIN_STEPS),
                            seed=7, log=None)
    return net, losses


@pytest.fixture(scope="session")
def student(teacher, toy_corpus):
    train_set, _ = toy_corpus
    net, losses = consistency.distill(
        teacher[0], train_set, consistency.DistillConfig(steps=DISTILL_STEPS),
        seed=11, log=None)
    return net, losses


@pytest.fixture
def rng():
    return np.random.default_rng(123)
