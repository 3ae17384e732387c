"""Central finite differences for checking hand-written gradients."""
from __future__ import annotations

from typing import Callable

import numpy as np

# Absolute floor in the relative-error denominator.  Entries whose true
# gradient is below it are compared absolutely, since double-precision
# round-off in f(x +- h) / 2h sits around 1e-10 for h = 1e-4.
REL_FLOOR = 1e-7


def central_difference(f: Callable[[np.ndarray], float], x: np.ndarray, h: float = 1e-4,
                       index=None) -> np.ndarray:
    """Numerical gradient of scalar ``f`` at ``x``; optionally only at ``index`` positions."""
    x = np.array(x, dtype=np.float64)
    grad = np.zeros_like(x)
    positions = np.ndindex(x.shape) if index is None else index
    for pos in positions:
        old = x[pos]
        x[pos] = old + h
        fp = f(x)
        x[pos] = old - h
        fm = f(x)
        x[pos] = old
        grad[pos] = (fp - fm) / (2 * h)
    return grad


def max_relative_error(analytic, numeric, floor: float = REL_FLOOR) -> float:
    a = np.asarray(analytic, dtype=np.float64)
    b = np.asarray(numeric, dtype=np.float64)
    if a.size == 0:
        return 0.0
    den = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    return float((np.abs(a - b) / den).max())


# ---------------------------------------------------------------- suites
# Each suite builds one random configuration from ``seed`` and returns the
# worst relative error between the analytic and the numerical gradient.

def check_ce(seed: int, h: float = 1e-4) -> float:
    from .losses import ce_loss, softmax

    rng = np.random.default_rng(seed)
    classes = int(rng.integers(2, 5))
    logits = rng.normal(0, 2, (classes, 4, 4))
    target = rng.integers(0, classes, (4, 4))
    target[rng.random((4, 4)) < 0.2] = 255
    target[0, 0] = 0
    _, grad = ce_loss(softmax(logits), target)
    fd = central_difference(lambda z: ce_loss(softmax(z), target)[0], logits, h)
    return max_relative_error(grad, fd)


def smooth_fixture(seed: int, size: int = 20, w_margin: float = 0.05,
                   angle_margin: float = 0.05):
    """Noisy soft annulus plus (tau, beta) at which the surrogate is smooth.

    The surrogate has C1 corners where a pixel enters the soft support or an
    angular window taper.  A +-h stencil that straddles one measures the
    ramp, not the derivative, so the noise is redrawn until every pixel is
    clear of them.
    """
    from .polar import smooth_margins
    from .synthgen import annulus

    rng = np.random.default_rng(seed)
    r_in = float(rng.uniform(3.0, 4.0))
    r_out = r_in + float(rng.uniform(3.0, 4.0))
    tau = float(rng.uniform(0.08, 0.15))
    beta = float(rng.uniform(3.0, 8.0))
    for _ in range(200):
        c = size / 2 + rng.uniform(-0.5, 0.5, 2)
        band = annulus(r_in, r_out, size, (c[0], c[1]))
        p = np.clip(0.5 + 0.6 * (band - 0.5) + rng.normal(0, 0.04, band.shape), 0.0, 1.0)
        dw, da = smooth_margins(p, 8, tau=tau)
        if dw > w_margin and da > angle_margin:
            return p, tau, beta
    raise RuntimeError(f"no smooth fixture found for seed {seed}")


def check_phd_smooth(seed: int, h: float = 1e-4) -> float:
    from .polar import phd_smooth

    p, tau, beta = smooth_fixture(seed)
    _, grad = phd_smooth(p, 8, tau=tau, beta=beta)
    fd = central_difference(lambda q: phd_smooth(q, 8, tau=tau, beta=beta)[0], p, h)
    return max_relative_error(grad, fd)


def probe_problem(seed: int, size: int = 16, attempts: int = 200, relu_margin: float = 1e-3):
    """Small model and batch on which every loss term, PH included, is active.

    Encoder channel 0 passes the intensity through and the auxiliary head keys
    class 1 on it, so the class-1 edge probability map is an annulus.  All
    other weights are random.  Scenes and random channels are redrawn until
    the PH term fires and no ReLU input sits within ``relu_margin`` of its
    kink, where a central difference would straddle the corner.
    """
    from .imagecore import LabelMap
    from .synthgen import Scene, annulus
    from .trainer import (TrainConfig, _encode, copy_decoder_head, init_model, loss_and_grad,
                          make_batch)

    rng = np.random.default_rng(seed)
    cfg = TrainConfig(d_e=2, aux_weight=0.4, ph_weight=0.5, min_edge_pixels=8,
                      tau=0.1, beta=5.0, f1=3, f2=3, seed=seed)
    for attempt in range(attempts):
        m = copy_decoder_head(init_model(3, 3, 3, seed=seed * 1000 + attempt))
        m.w1[0] = 0.0
        m.w1[0, 0, 4] = 1.0
        m.w2[0] = 0.0
        m.w2[0, 0, 4] = 1.0
        m.b1[0] = m.b2[0] = 0.0
        m.we[:] = rng.normal(0, 0.1, m.we.shape)
        m.we[1, 0] = 8.0
        m.be[:] = [0.0, -4.0, -3.0]
        scenes = []
        for k in range(2):
            c = size / 2 + rng.uniform(-0.5, 0.5, 2)
            band = annulus(3.0, 5.0 + float(rng.uniform(0, 0.5)), size, (c[0], c[1]))
            img = np.clip(0.15 + 0.7 * band + rng.normal(0, 0.02, band.shape), 0, 1)
            scenes.append(Scene(k, seed, img, LabelMap(band.astype(np.int64), 3)))
        batch = make_batch(scenes, cfg.d_e)
        _, (_, a1, _, a2) = _encode(m, batch.images[:, None])
        if min(np.abs(a1).min(), np.abs(a2).min()) < relu_margin:
            continue
        if loss_and_grad(m, batch, cfg)[2].ph_terms > 0:
            return m, batch, cfg
    raise RuntimeError(f"no kink-free probe problem with an active PH term for seed {seed}")


def check_trainer(seed: int, h: float = 1e-4) -> float:
    from .trainer import loss_and_grad

    model, batch, cfg = probe_problem(seed)
    _, grads, record = loss_and_grad(model, batch, cfg)
    if record.ph_terms == 0:
        raise RuntimeError("probe problem did not activate the PH term")
    worst = 0.0
    for name, arr in model.tensors().items():
        def f(x, name=name):
            m = model.copy()
            setattr(m, name, x)
            return loss_and_grad(m, batch, cfg)[0]
        worst = max(worst, max_relative_error(grads[name], central_difference(f, arr, h)))
    return worst


SUITES = {"ce_loss": check_ce, "phd_smooth": check_phd_smooth, "trainer": check_trainer}
