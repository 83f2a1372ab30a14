import numpy as np
import pytest

from randimpute.core import Dataset, Unit, validate_dataset
from randimpute.rngkit import derive_stream
from randimpute.simgen import ScenarioConfig, generate_dataset

from oracles import reference_units


@pytest.fixture
def stream():
    return derive_stream(12345, 0)


@pytest.fixture
def reference_dataset():
    units = [Unit(i % 2, (i // 2) % 2, x1, x2) for i, (x1, x2) in enumerate(reference_units())]
    return validate_dataset(units)


@pytest.fixture
def scenario_data():
    """One scenario-1 ICIN high-association draw: (observed, before deletion)."""
    return generate_dataset(ScenarioConfig(), derive_stream(99, 1))


def random_binary_dataset(gen, n, miss1=0.3, miss2=0.3, beta=(0.2, 0.8, 0.9, 0.3, 0.5)):
    t = gen.integers(0, 2, n)
    x1 = gen.integers(0, 2, n)
    x2 = gen.integers(0, 2, n)
    eta = beta[0] + beta[1] * x1 + beta[2] * x2 + beta[3] * t + beta[4] * t * x2
    y = (gen.random(n) < 1 / (1 + np.exp(-eta))).astype(int)
    d1 = gen.random(n) < miss1
    d2 = gen.random(n) < miss2
    return Dataset.from_arrays(t, y, x1, x2, d1, d2)


def write_application_like_csv(path, seed=612):
    """Synthetic stand-in for the 612-person field experiment.

    About two thirds treated, X1 missing for 14 units (2.3%), X2 missing for
    159 units (26%, coded "perhaps"), and 9 outcome events (1.5%).
    """
    gen = np.random.default_rng(seed)
    n = 612
    t = np.zeros(n, int)
    t[gen.choice(n, 408, replace=False)] = 1
    x1 = (gen.random(n) < 0.55).astype(object)
    x2 = (gen.random(n) < 0.45).astype(object)
    y = np.zeros(n, int)
    # events in both arms so the ITT fit is not separated
    ctrl = np.flatnonzero(t == 0)
    trt = np.flatnonzero(t == 1)
    y[gen.choice(ctrl, 4, replace=False)] = 1
    y[gen.choice(trt, 5, replace=False)] = 1
    x1[gen.choice(n, 14, replace=False)] = ""
    x2[gen.choice(n, 159, replace=False)] = "perhaps"
    with open(path, "w") as fh:
        fh.write("id,t,y,x1,x2\n")
        for i in range(n):
            v1 = "" if x1[i] == "" else int(x1[i])
            v2 = x2[i] if x2[i] == "perhaps" else int(x2[i])
            fh.write(f"{i + 1},{t[i]},{y[i]},{v1},{v2}\n")
    return path


@pytest.fixture
def application_csv(tmp_path):
    return write_application_like_csv(tmp_path / "application_like.csv")
