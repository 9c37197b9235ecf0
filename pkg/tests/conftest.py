from pathlib import Path

import pytest
import torch

from banglahate.dataset import SCHEME_1A, SCHEME_1B, Example, load_dataset
from banglahate.encoder import StubBackend
from banglahate.model import ModelConfig, TextClassifier, build_head
from banglahate import textnorm

DATA_DIR = Path(__file__).parent / "data"


@pytest.fixture(autouse=True)
def _single_thread():
    torch.set_num_threads(1)


@pytest.fixture
def tiny_corpus_path() -> Path:
    return DATA_DIR / "tiny_1a.tsv"


@pytest.fixture
def tiny_corpus(tiny_corpus_path):
    return load_dataset(tiny_corpus_path, SCHEME_1A)


@pytest.fixture
def tiny_corpus_normalized(tiny_corpus):
    return [Example(e.id, textnorm.normalize(e.text), e.label) for e in tiny_corpus]


@pytest.fixture
def stub_classifier_1a():
    cfg = ModelConfig(seed=42)
    return TextClassifier(StubBackend(seed=0), build_head(cfg), SCHEME_1A)


def small_classifier(num_labels=6, seed=42, stub_seed=0):
    """Reduced-width classifier for fast functional tests."""
    scheme = SCHEME_1A if num_labels == 6 else SCHEME_1B
    cfg = ModelConfig(
        d_embed=32, gru_hidden=8, cnn_filters=8, fusion_dim=8,
        num_labels=num_labels, seed=seed,
    )
    return TextClassifier(StubBackend(seed=stub_seed, d_embed=32), build_head(cfg), scheme)
