import math
import os
import subprocess

import numpy as np
import pytest

import sensekit as sk

CLI = os.environ.get("SENSEKIT_CLI", "sensekit")


def run_cli(*args, env=None, check=None):
    proc = subprocess.run([CLI, *map(str, args)], capture_output=True, text=True, env=env)
    if check is not None:
        assert proc.returncode == check, proc.stdout + proc.stderr
    return proc


@pytest.fixture
def cli():
    if not os.path.exists(CLI):
        pytest.skip("sensekit executable not built")
    return run_cli


TINY_CORPUS = """The river bank was muddy after the rain.
The bank raised its interest rate again.

She sat on the bank of the river and watched the water.
He went to the bank to deposit money.
<<<DOC>>>
Money flows into the bank when rates rise.
The water of the river rose over the bank.
"""


@pytest.fixture
def tiny_corpus(tmp_path):
    path = tmp_path / "corpus.txt"
    path.write_text(TINY_CORPUS)
    return path


def rigged_model(vocab):
    """Two senses for "bank"; the posterior follows whether "river" or
    "money" is in context. Every other word carries one direction in all of
    its vectors, so first-pass posteriors do not matter."""
    V, K, D = len(vocab), 2, 2
    model = sk.init_model(V, K, D, seed=1)
    g = np.zeros((V, D))
    v = np.zeros((V, K, D))
    d = np.zeros((V, K, D))
    bank = vocab.id_of("bank")
    for w in range(V):
        g[w] = (0.5, 0.5)
    g[vocab.id_of("river")] = (1.0, 0.0)
    g[vocab.id_of("money")] = (0.0, 1.0)
    for w in range(V):
        v[w, 0] = v[w, 1] = g[w]
    d[bank, 0] = (20.0, 0.0)
    d[bank, 1] = (0.0, 20.0)
    v[bank, 0] = (1.0, 0.0)
    v[bank, 1] = (0.0, 1.0)
    model.global_vectors = g
    model.sense_vectors = v
    model.disamb_vectors = d
    return model


def one_sense_model(vocab, angles):
    """K=1 model whose sense vectors sit at the given angles (radians)."""
    V, D = len(vocab), 2
    model = sk.init_model(V, 1, D, seed=1)
    g = np.full((V, D), 0.5)
    v = np.zeros((V, 1, D))
    v[:, 0] = (1.0, 0.0)
    for word, a in angles.items():
        v[vocab.id_of(word), 0] = (math.cos(a), math.sin(a))
    model.global_vectors = g
    model.sense_vectors = v
    return model
