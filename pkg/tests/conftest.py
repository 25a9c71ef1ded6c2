import numpy as np
import pytest

from driftscope import testkit
from driftscope.eventlog import from_rows, infer_schema
from driftscope.parameters import train_model


def make_log(columns, rows, trace_id="case", timestamp=None, numeric=()):
    schema = infer_schema(columns, trace_id=trace_id, timestamp=timestamp, numeric=numeric)
    return from_rows(schema, rows)


@pytest.fixture(scope="session")
def fig1_log():
    """Small process with planted FDs and a Markov activity chain."""
    log, truth = testkit.generate_log(testkit.default_spec(seed=11), 400)
    return log, truth


@pytest.fixture(scope="session")
def fig1_model(fig1_log):
    log, _ = fig1_log
    return train_model(log)


@pytest.fixture(scope="session")
def bench_scored():
    """Drift-benchmark log (drift at 600 of 1200) scored against its own head."""
    from driftscope.eventlog import split_train
    from driftscope.scoring import score_log_table

    spec, drift = testkit.drift_benchmark(seed=7, at_trace=600)
    log, truth = testkit.generate_log(spec, 1200, [drift])
    train, full = split_train(log, 2000)
    model = train_model(train)
    table = score_log_table(model, full)
    return model, full, table, truth
