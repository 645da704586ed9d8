import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from spherekg.model import ModelConfig, SphereModel  # noqa: E402

TOY_TRAIN = """a\tlikes\tb
a\tlikes\tc
b\tknows\tc
c\tknows\td
d\tlikes\ta
"""
TOY_VALID = "b\tlikes\td\n"
TOY_TEST = "a\tlikes\td\n"


@pytest.fixture
def toy_dir(tmp_path):
    d = tmp_path / "toy"
    d.mkdir()
    (d / "train.txt").write_text(TOY_TRAIN)
    (d / "valid.txt").write_text(TOY_VALID)
    (d / "test.txt").write_text(TOY_TEST)
    return d


def random_model(rng, k, n_entities=8, n_relations=2, n_blocks=2, **cfg):
    config = ModelConfig(k=k, n_blocks=n_blocks, **cfg)
    model = SphereModel.initialize(config, n_entities, n_relations, rng)
    model.centers = rng.normal(size=model.centers.shape)
    model.radii = rng.uniform(-0.3, 0.6, size=n_entities)
    if k != 2:
        model.rel_params = rng.normal(size=model.rel_params.shape)
        model.renormalize()
    return model


def pytest_terminal_summary(terminalreporter):
    import test_acceptance

    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(test_acceptance.RESULTS):
            terminalreporter.write_line(test_acceptance.RESULTS[n])
