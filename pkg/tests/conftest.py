import numpy as np
import pytest

from blindarx import (
    ArxModel,
    NoiseSpec,
    build_lifted_problem,
    gaussian_basis,
    simulate,
    zoh_basis,
)


@pytest.fixture
def paper_model():
    return ArxModel.from_coefficients([-0.3], [3.0, 2.0, 1.0])


def make_instance(kind="zoh", seed=0, eps=0.0, N=60, m=10, model=None):
    """Seeded (problem, truth) pair; truth holds x, u, model."""
    model = model or ArxModel.from_coefficients([-0.3], [3.0, 2.0, 1.0])
    basis = zoh_basis(N, 6) if kind == "zoh" else gaussian_basis(N, m, 1000 + seed)
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(basis.m)
    u = basis.D @ x
    y = simulate(model, u, NoiseSpec("uniform", eps), seed=seed + 7)
    return build_lifted_problem(y, basis, model.orders), dict(x=x, u=u, model=model, basis=basis, y=y)


@pytest.fixture
def instance():
    return make_instance


ACCEPTANCE = {}


def record(criterion, passed, detail=""):
    ACCEPTANCE[criterion] = (bool(passed), detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {key}: {detail}")
