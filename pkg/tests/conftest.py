"""Shared test utilities: finite-difference gradient checking."""

import numpy as np

from coslab.nn import ParamStore


def randomize_store(store: ParamStore, rng: np.random.Generator, scale: float = 0.3):
    """Replace every parameter with Gaussian noise (moves ReLU kinks off zero)."""
    for p in store.params.values():
        p.data[...] = scale * rng.standard_normal(p.data.shape)


def gradcheck(loss_fn, store: ParamStore, rng: np.random.Generator,
              n_coords: int = 12, h: float = 1e-5, tol: float = 1e-4,
              params: list | None = None) -> float:
    """Central finite differences on randomly sampled parameter coordinates.

    Returns the worst relative error; asserts it is below ``tol``.
    """
    store.zero_grad()
    loss = loss_fn()
    loss.backward()
    grads = store.grads()
    names = params if params is not None else list(store.params)
    worst = 0.0
    for _ in range(n_coords):
        name = names[int(rng.integers(len(names)))]
        p = store.params[name]
        idx = tuple(int(rng.integers(s)) for s in p.data.shape)
        orig = p.data[idx]
        p.data[idx] = orig + h
        up = loss_fn().item()
        p.data[idx] = orig - h
        dn = loss_fn().item()
        p.data[idx] = orig
        fd = (up - dn) / (2 * h)
        ad = grads[name][idx]
        rel = abs(ad - fd) / max(1e-6, abs(ad), abs(fd))
        worst = max(worst, rel)
        assert rel < tol, f"{name}{idx}: autodiff {ad} vs fd {fd} (rel {rel:.2e})"
    return worst
