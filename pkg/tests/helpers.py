import numpy as np

from blockchaos.model import InteractionSpec


def random_interaction(rng, n, kind=None):
    kind = kind or rng.choice(["zero", "scalar", "dense", "normal", "hermitian"])
    if kind == "zero":
        return InteractionSpec.zero()
    if kind == "scalar":
        return InteractionSpec.scalar(rng.uniform(-0.6, 0.6))
    if kind == "normal":
        q, _ = np.linalg.qr(rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)))
        vals = 0.4 * (rng.normal(size=n) + 1j * rng.normal(size=n))
        return InteractionSpec.dense(q @ np.diag(vals) @ q.conj().T)
    a = 0.4 * (rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))) / np.sqrt(n)
    if kind == "hermitian":
        a = 0.5 * (a + a.conj().T)
    return InteractionSpec.dense(a)
