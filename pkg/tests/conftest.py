import numpy as np
import pytest

from convfilter.corpus import Conversation, FineLabelSet, SpeakerRole, Utterance
from convfilter.extract.dictionary import default_dictionary
from convfilter.synth import PROFILES, synth_generate


@pytest.fixture(scope="session")
def dictionary():
    return default_dictionary()


@pytest.fixture(scope="session")
def small_corpus(dictionary):
    return synth_generate(PROFILES["desk"], 12, 3, dictionary)


@pytest.fixture(scope="session")
def clean_corpus(dictionary):
    return synth_generate(PROFILES["clean"], 40, 11, dictionary)


def make_conv(spec, conv_id="c0", gold=None):
    """``spec``: list of (speaker code, text, label codes)."""
    utts = tuple(
        Utterance(i, SpeakerRole.from_code(s), text, FineLabelSet.from_codes(labels))
        for i, (s, text, labels) in enumerate(spec)
    )
    return Conversation(conv_id, utts, gold or {"SYM": (), "MED": (), "COM": ()})


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def tiny_batch(cfg, B=2, T=5, seed=0, speakers=None, lengths=None):
    """Random Batch for a ModelConfig; ``speakers`` (B, T) overrides the random roles."""
    from convfilter.nn.model import Batch

    r = np.random.default_rng(seed)
    fc = cfg.feature
    lengths = np.full(B, T) if lengths is None else np.asarray(lengths)
    mask = np.arange(T)[None, :] < lengths[:, None]
    spk = r.integers(0, 3, (B, T)) if speakers is None else np.asarray(speakers)
    sem = np.zeros((B, T, fc.n_semantic_types))
    for b in range(B):
        for t in range(T):
            ty = r.integers(0, fc.n_semantic_types, r.integers(0, 3))
            for k in ty:
                sem[b, t, k] += 1.0 / len(ty)
    targets = (r.uniform(size=(B, T, 3)) < 0.35).astype(float) * mask[..., None]
    return Batch(r.normal(size=(B, T, fc.text_dim)) * mask[..., None], spk * mask,
                 r.integers(0, fc.position_bins, (B, T)) * mask, sem * mask[..., None],
                 targets, mask, lengths)


def tiny_config(**kw):
    """Feature dim 8: text 3 + speaker 2 + position 1 + semantic 2."""
    from convfilter.features import FeatureConfig
    from convfilter.nn.model import ModelConfig

    fc = FeatureConfig(text_dim=3, speaker_dim=2, position_dim=1, position_bins=4, semantic_dim=2, n_semantic_types=5)
    return ModelConfig(feature=fc, hidden_dim=4, **kw)


def pytest_terminal_summary(terminalreporter):
    """One pass/fail line per acceptance criterion, after the normal report."""
    lines = []
    for outcome in ("passed", "failed"):
        for rep in terminalreporter.stats.get(outcome, []):
            if "test_acceptance.py" in rep.nodeid and rep.when == "call":
                props = dict(rep.user_properties)
                if "criterion" in props:
                    lines.append((props["criterion"], outcome.upper()[:4], props.get("detail", "")))
    if lines:
        terminalreporter.section("acceptance criteria")
        for n, status, detail in sorted(lines):
            terminalreporter.write_line(f"criterion {n:2d}: {status}  {detail}")
