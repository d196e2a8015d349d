import numpy as np
import pytest

# one line per acceptance criterion, printed after the test summary so the
# PASS/FAIL verdicts survive pytest's output capture
acceptance_results = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if acceptance_results:
        terminalreporter.write_sep("-", "acceptance criteria")
        for line in acceptance_results:
            terminalreporter.write_line(line)

from docevent.corpus import EventSchema, EventType
from docevent.generate import GenConfig, generate_synthetic
from docevent.model import ModelConfig


@pytest.fixture
def schema2():
    return EventSchema(types=(
        EventType("merge", ("buyer", "seller")),
        EventType("ipo", ("firm", "amount")),
    ))


@pytest.fixture
def tiny_model_config():
    # small dims keep finite-difference and overfit tests fast
    return ModelConfig(d=16, enc_layers=1, enc_heads=2, enc_ff=32,
                       ere_layers=1, ere_heads=2, dropout=0.1)


@pytest.fixture
def small_corpus(schema2):
    cfg = GenConfig(num_documents=8, scattering_spread=2,
                    sentences_per_doc=(3, 5), sentence_length=(6, 10))
    return generate_synthetic(schema2, cfg, seed=3)


def finite_difference_check(build_loss, params, rel=1e-4, step=1e-5,
                            abs_floor=1e-8, max_entries=None, rng=None):
    """Compare analytic gradients against central differences.

    build_loss() must recompute the scalar loss Tensor from the params'
    current .data. Returns the worst relative error seen.
    """
    for p in params:
        p.grad = None
    build_loss().backward()
    worst = 0.0
    for p in params:
        grad = p.grad if p.grad is not None else np.zeros_like(p.data)
        flat = p.data.reshape(-1)
        gflat = grad.reshape(-1)
        idxs = range(flat.size)
        if max_entries is not None and flat.size > max_entries:
            assert rng is not None
            idxs = rng.choice(flat.size, size=max_entries, replace=False)
        for i in idxs:
            orig = flat[i]
            flat[i] = orig + step
            lp = build_loss().item()
            flat[i] = orig - step
            lm = build_loss().item()
            flat[i] = orig
            fd = (lp - lm) / (2 * step)
            a = gflat[i]
            err = abs(a - fd)
            denom = max(abs(a), abs(fd))
            if err > abs_floor:
                relerr = err / max(denom, 1e-12)
                worst = max(worst, relerr)
                assert relerr <= rel, (
                    f"gradient mismatch for {getattr(p, 'name', '?')}[{i}]: "
                    f"analytic {a} vs fd {fd}")
    return worst
