import numpy as np
import pytest

from glottkit.synth import SynthSpec, render

FS = 22050

# acceptance criteria append (label, passed, detail) here; printed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for label, ok, detail in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {label}: {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def tense_vowel():
    """Loud-class vowel with noise disabled."""
    return render(SynthSpec(noise_floor_db=-np.inf, seed=3))


@pytest.fixture(scope="session")
def vowel_1s():
    return render(SynthSpec(duration_s=1.0, seed=5))


@pytest.fixture(scope="session")
def effort_corpus(tmp_path_factory):
    """Default 60-stimulus effort corpus (20 per class, seed 0)."""
    from glottkit.synth import make_effort_corpus

    out = tmp_path_factory.mktemp("corpus")
    make_effort_corpus(out, n_per_class=20, seed=0)
    return out / "manifest.csv"


@pytest.fixture(scope="session")
def corpus_rows(effort_corpus):
    from glottkit.evaluation import run_corpus
    from glottkit.gif import Method
    from glottkit.manifest import CorpusManifest

    return run_corpus(CorpusManifest.read(effort_corpus), list(Method))


@pytest.fixture
def record():
    """Log one acceptance criterion outcome for the terminal summary."""
    def _record(label, ok, detail):
        ACCEPTANCE_LINES.append((label, bool(ok), detail))
        print(f"{'PASS' if ok else 'FAIL'}  {label}: {detail}")
    return _record
