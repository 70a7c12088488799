"""Shared test helpers."""

import numpy as np
import pytest

from anysr.autodiff import Tensor, finite_difference_check, track_kink_margins


def rng_for(seed):
    return np.random.Generator(np.random.Philox(seed))


def kink_margin(fn, x: Tensor) -> float:
    """Smallest distance of any relu/clamp input to its kink during fn(x)."""
    with track_kink_margins() as margins:
        fn(Tensor(x.data.copy()))
    return min(margins) if margins else np.inf


def checked_fd(fn, x: Tensor, eps: float = 1e-5, min_margin: float = 1e-3):
    """Finite-difference check fn at x, or None when x sits too close to a
    relu/clamp kink for central differences at this step to be meaningful."""
    if kink_margin(fn, x) < min_margin:
        return None
    return finite_difference_check(fn, x, eps)


def fd_trials(make_case, n_trials: int, eps: float = 1e-5, start_seed: int = 0,
              min_margin: float = 1e-3) -> list:
    """Collect n_trials finite-difference errors at generic (kink-free) points.

    make_case(seed) returns (fn, input_tensor); seeds whose forward pass runs
    too close to a kink are skipped deterministically.
    """
    errors = []
    seed = start_seed
    limit = start_seed + 60 * n_trials
    while len(errors) < n_trials:
        if seed >= limit:
            raise AssertionError("could not find enough kink-free sample points")
        fn, x = make_case(seed)
        err = checked_fd(fn, x, eps=eps, min_margin=min_margin)
        seed += 1
        if err is None:
            continue
        errors.append(err)
    return errors


def weight_fd(forward, layer, attr: str = "weight", eps: float = 1e-5) -> float:
    """FD-check a scalar forward() against one layer parameter.

    The probe tensor is swapped into the layer so the recorded graph reaches
    it; the original tensor is restored after every evaluation.
    """
    original = getattr(layer, attr)

    def fn(t):
        setattr(layer, attr, t)
        try:
            return forward()
        finally:
            setattr(layer, attr, original)

    return finite_difference_check(fn, original, eps)


@pytest.fixture
def philox():
    return rng_for
