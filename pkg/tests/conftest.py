import json
from typing import ClassVar

import numpy as np
import pytest
from attrs import field, frozen

from seqsense.detectors import DetectorModel, Hypothesis


@frozen
class ConstantLlr(DetectorModel):
    """Deterministic stub: every observation carries LLR ``+value`` under H1 and ``-value`` under H0."""

    kind: ClassVar[str] = "constant"
    value: float = field(default=1.0, converter=float)

    def generate(self, hyp, size, rng, history=None):
        sign = 1.0 if hyp == Hypothesis.H1 else -1.0
        return np.full(size, sign * self.value)

    def llr(self, samples, history=None):
        return np.asarray(samples, dtype=float)


@pytest.fixture
def gaussian_config():
    return {
        "models": [{"kind": "gaussian", "rho2": 1.0, "sigma_w2": 1.0}],
        "k_users": 2,
        "period": 4,
        "bits": [1],
        "schemes": [{"kind": "centralized"}, {"kind": "qsprt"}, {"kind": "rlt"}],
        "targets": [[0.1, 0.1], [0.01, 0.01], [0.001, 0.001]],
    }


@pytest.fixture
def gaussian_config_file(tmp_path, gaussian_config):
    fpath = tmp_path / "gauss.json"
    fpath.write_text(json.dumps(gaussian_config))
    return fpath
