import os

import numpy as np
import pandas as pd
import pytest
from hypothesis import settings

from helpers import ACCEPTANCE_LINES
from mldetect.data import UNSW_COLUMNS, multilabelize
from mldetect.synth import SynthSpec, separable_spec, synth_generate

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))



def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_corpus():
    raw = synth_generate(SynthSpec.uniform(3, 0.2, samples_per_category=120, seed=5, dim=4))
    return multilabelize(raw)


@pytest.fixture(scope="session")
def separable_corpus():
    return multilabelize(synth_generate(separable_spec(seed=0)))


def unsw_frame(rows):
    """A tiny frame in the official UNSW-NB15 column layout.

    ``rows`` is a list of (attack_cat, numeric fill value, proto).
    """
    records = []
    for i, (cat, v, proto) in enumerate(rows):
        rec = {c: v for c in UNSW_COLUMNS}
        rec.update(id=i + 1, proto=proto, service="-", state="FIN", attack_cat=cat, label=int(cat != "Normal"))
        records.append(rec)
    return pd.DataFrame(records, columns=list(UNSW_COLUMNS))


@pytest.fixture
def unsw_csv(tmp_path):
    def make(rows, name="unsw.csv"):
        p = tmp_path / name
        unsw_frame(rows).to_csv(p, index=False)
        return p

    return make
