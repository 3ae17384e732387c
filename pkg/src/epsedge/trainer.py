"""Desk-scale edge-aware training with a copied decoder head.

The network is two 3x3 convolutions (replicate padding, ReLU) followed by a
1x1 decoder head.  The auxiliary head is a copy of the decoder head taken
after initialization; it reads the same encoder features, is supervised by
the edge ground truth, and is ignored at inference.

All gradients are written out by hand so they can be checked against finite
differences.
"""
from __future__ import annotations

import csv
import io
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

import numpy as np

from .edges import extract_edge_label_map
from .errors import DegeneratePrediction, EmptyTarget, ShapeError
from .imagecore import LabelMap
from .losses import ce_from_logits, softmax
from .metrics import ConfusionMatrix, accumulate, macc, miou
from .polar import phd_smooth
from .synthgen import Scene

OFFSETS = [(dy, dx) for dy in (-1, 0, 1) for dx in (-1, 0, 1)]


@dataclass
class ModelParams:
    w1: np.ndarray  # (F1, 1, 9)
    b1: np.ndarray
    w2: np.ndarray  # (F2, F1, 9)
    b2: np.ndarray
    wd: np.ndarray  # (C, F2) decoder head
    bd: np.ndarray
    we: np.ndarray | None = None  # auxiliary (edge) head
    be: np.ndarray | None = None

    @property
    def has_aux(self) -> bool:
        return self.we is not None

    @property
    def classes(self) -> int:
        return self.wd.shape[0]

    def tensors(self) -> dict[str, np.ndarray]:
        names = ["w1", "b1", "w2", "b2", "wd", "bd"] + (["we", "be"] if self.has_aux else [])
        return {k: getattr(self, k) for k in names}

    def copy(self) -> "ModelParams":
        return ModelParams(*(None if v is None else v.copy() for v in astuple_shallow(self)))

    def without_aux(self) -> "ModelParams":
        return replace(self.copy(), we=None, be=None)


def astuple_shallow(m: ModelParams) -> tuple:
    return (m.w1, m.b1, m.w2, m.b2, m.wd, m.bd, m.we, m.be)


def init_model(classes: int, f1: int = 8, f2: int = 8, seed: int = 0) -> ModelParams:
    """He-normal weights, zero biases, no auxiliary head."""
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), 0x1D1])))
    return ModelParams(
        w1=rng.normal(0, np.sqrt(2 / 9), (f1, 1, 9)), b1=np.zeros(f1),
        w2=rng.normal(0, np.sqrt(2 / (9 * f1)), (f2, f1, 9)), b2=np.zeros(f2),
        wd=rng.normal(0, np.sqrt(1 / f2), (classes, f2)), bd=np.zeros(classes),
    )


def copy_decoder_head(model: ModelParams) -> ModelParams:
    """Return a model whose auxiliary head is an unshared copy of the decoder head."""
    out = model.copy()
    out.we = model.wd.copy()
    out.be = model.bd.copy()
    return out


# ------------------------------------------------------------------ layers

def _patches(x: np.ndarray) -> np.ndarray:
    # (B, I, H, W) -> (B, I, 9, H, W), clamp-to-edge padding
    h, w = x.shape[-2:]
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)), mode="edge")
    return np.stack([xp[:, :, 1 + dy:1 + dy + h, 1 + dx:1 + dx + w] for dy, dx in OFFSETS], axis=2)


def _unpad_adjoint(gp: np.ndarray) -> np.ndarray:
    # transpose of edge padding by one pixel: fold the border back in
    g = gp[:, :, 1:-1, 1:-1].copy()
    g[:, :, 0, :] += gp[:, :, 0, 1:-1]
    g[:, :, -1, :] += gp[:, :, -1, 1:-1]
    g[:, :, :, 0] += gp[:, :, 1:-1, 0]
    g[:, :, :, -1] += gp[:, :, 1:-1, -1]
    g[:, :, 0, 0] += gp[:, :, 0, 0]
    g[:, :, 0, -1] += gp[:, :, 0, -1]
    g[:, :, -1, 0] += gp[:, :, -1, 0]
    g[:, :, -1, -1] += gp[:, :, -1, -1]
    return g


def _conv(w: np.ndarray, b: np.ndarray, patches: np.ndarray) -> np.ndarray:
    bsz, i, k, h, wd = patches.shape
    out = w.reshape(w.shape[0], i * k) @ patches.reshape(bsz, i * k, h * wd)
    return out.reshape(bsz, w.shape[0], h, wd) + b[None, :, None, None]


def _conv_backward(w, patches, g_out):
    bsz, i, k, h, wd = patches.shape
    o = w.shape[0]
    g2 = g_out.reshape(bsz, o, h * wd)
    p2 = patches.reshape(bsz, i * k, h * wd)
    g_w = (g2 @ p2.transpose(0, 2, 1)).sum(axis=0).reshape(w.shape)
    g_b = g_out.sum(axis=(0, 2, 3))
    g_p = (w.reshape(o, i * k).T @ g2).reshape(bsz, i, k, h, wd)
    g_pad = np.zeros((bsz, i, h + 2, wd + 2))
    for t, (dy, dx) in enumerate(OFFSETS):
        g_pad[:, :, 1 + dy:1 + dy + h, 1 + dx:1 + dx + wd] += g_p[:, :, t]
    return g_w, g_b, _unpad_adjoint(g_pad)


def _head(w, b, feats):
    return np.einsum("cf,bfhw->bchw", w, feats) + b[None, :, None, None]


def _as_batch(images) -> np.ndarray:
    x = np.asarray(images, dtype=np.float64)
    if x.ndim == 2:
        x = x[None]
    if x.ndim != 3:
        raise ShapeError(f"expected (H, W) or (B, H, W) input, got {x.shape}")
    return x[:, None]


def _encode(model: ModelParams, x: np.ndarray):
    p1 = _patches(x)
    a1 = _conv(model.w1, model.b1, p1)
    h1 = np.maximum(a1, 0.0)
    p2 = _patches(h1)
    a2 = _conv(model.w2, model.b2, p2)
    h2 = np.maximum(a2, 0.0)
    return h2, (p1, a1, p2, a2)


def forward(model: ModelParams, images):
    """Return (main logits, aux logits or None), each (B, C, H, W)."""
    x = _as_batch(images)
    if model.w1.shape[1] != x.shape[1]:
        raise ShapeError("input channel count does not match the model")
    h2, _ = _encode(model, x)
    main = _head(model.wd, model.bd, h2)
    aux = _head(model.we, model.be, h2) if model.has_aux else None
    return main, aux


def infer(model: ModelParams, image) -> LabelMap:
    """Argmax of the main head (lowest class id wins ties); aux head unused."""
    x = _as_batch(image)
    h2, _ = _encode(model, x)
    main = _head(model.wd, model.bd, h2)
    return LabelMap(np.argmax(main[0], axis=0), model.classes)


# ---------------------------------------------------------------- training

@dataclass(frozen=True)
class TrainConfig:
    d_e: int = 2
    aux_weight: float = 0.4
    ph_weight: float = 0.001
    n: int = 8
    sigma: float = 0.1
    delta: float = 2.0
    tau: float = 0.05
    beta: float = 20.0
    lr: float = 0.1
    steps: int = 300
    batch_size: int = 8
    seed: int = 0
    min_edge_pixels: int = 32
    f1: int = 8
    f2: int = 8

    def __post_init__(self):
        if self.lr <= 0 or self.steps < 0 or self.batch_size < 1:
            raise ValueError("learning rate, steps and batch size must be positive")
        if self.aux_weight < 0 or self.ph_weight < 0:
            raise ValueError("loss weights must be non-negative")
        if self.n < 4:
            raise ValueError("need at least 4 rays")


@dataclass
class StepRecord:
    step: int
    main_ce: float
    aux_ce: float
    aux_ph: float
    total: float
    ph_terms: int = 0
    ph_skipped: int = 0


@dataclass
class Batch:
    images: np.ndarray  # (B, H, W)
    gt: np.ndarray  # (B, H, W) class ids
    edge_gt: np.ndarray  # (B, H, W) class ids on edges, ignore elsewhere
    classes: int
    ignore_index: int = 255


def make_batch(scenes: Sequence[Scene], d_e: int) -> Batch:
    if not scenes:
        raise ValueError("empty batch")
    images = np.stack([s.image for s in scenes])
    gt = np.stack([s.gt.data for s in scenes])
    edges = np.stack([extract_edge_label_map(s.gt, d_e).data for s in scenes])
    return Batch(images, gt, edges, scenes[0].gt.classes, scenes[0].gt.ignore_index)


def _ph_term(aux_logits, cfg: TrainConfig):
    """Mean smoothed PH loss over (image, foreground class) maps that qualify."""
    probs = softmax(aux_logits, axis=1)
    g_probs = np.zeros_like(probs)
    terms = []
    skipped = 0
    bsz, classes = probs.shape[:2]
    for b in range(bsz):
        for c in range(1, classes):
            pmap = probs[b, c]
            if int((pmap > 0.5).sum()) < cfg.min_edge_pixels:
                continue
            try:
                value, grad = phd_smooth(pmap, cfg.n, cfg.sigma, cfg.delta, cfg.tau, cfg.beta)
            except DegeneratePrediction:
                skipped += 1
                continue
            sign = 1.0 if value >= cfg.d_e else -1.0
            terms.append(((b, c), abs(value - cfg.d_e), sign * grad))
    if not terms:
        return 0.0, None, 0, skipped
    k = len(terms)
    for (b, c), _, grad in terms:
        g_probs[b, c] += grad / k
    loss = sum(t[1] for t in terms) / k
    # back through the class softmax
    g_logits = probs * (g_probs - (g_probs * probs).sum(axis=1, keepdims=True))
    return loss, g_logits, k, skipped


def loss_and_grad(model: ModelParams, batch: Batch, cfg: TrainConfig):
    """Total loss, its gradient for every parameter tensor, and a StepRecord."""
    x = batch.images[:, None]
    h2, (p1, a1, p2, a2) = _encode(model, x)
    main = _head(model.wd, model.bd, h2)
    main_ce, g_main = ce_from_logits(main, batch.gt, batch.ignore_index)
    grads = {"wd": np.einsum("bchw,bfhw->cf", g_main, h2), "bd": g_main.sum(axis=(0, 2, 3))}
    g_h2 = np.einsum("cf,bchw->bfhw", model.wd, g_main)
    aux_ce = aux_ph = 0.0
    ph_terms = ph_skipped = 0
    if model.has_aux:
        aux = _head(model.we, model.be, h2)
        try:
            aux_ce, g_aux = ce_from_logits(aux, batch.edge_gt, batch.ignore_index)
        except EmptyTarget:
            aux_ce, g_aux = 0.0, np.zeros_like(aux)
        g_aux = cfg.aux_weight * g_aux
        if cfg.ph_weight > 0:
            aux_ph, g_ph, ph_terms, ph_skipped = _ph_term(aux, cfg)
            if g_ph is not None:
                g_aux = g_aux + cfg.ph_weight * g_ph
        grads["we"] = np.einsum("bchw,bfhw->cf", g_aux, h2)
        grads["be"] = g_aux.sum(axis=(0, 2, 3))
        g_h2 = g_h2 + np.einsum("cf,bchw->bfhw", model.we, g_aux)
    g_a2 = g_h2 * (a2 > 0)
    grads["w2"], grads["b2"], g_h1 = _conv_backward(model.w2, p2, g_a2)
    g_a1 = g_h1 * (a1 > 0)
    grads["w1"], grads["b1"], _ = _conv_backward(model.w1, p1, g_a1)
    total = main_ce + cfg.aux_weight * aux_ce + cfg.ph_weight * aux_ph
    record = StepRecord(0, main_ce, aux_ce, aux_ph, total, ph_terms, ph_skipped)
    return total, grads, record


def train_step(model: ModelParams, batch: Batch, cfg: TrainConfig):
    """One plain gradient-descent step; returns (new model, StepRecord)."""
    _, grads, record = loss_and_grad(model, batch, cfg)
    new = model.copy()
    for name, g in grads.items():
        setattr(new, name, getattr(new, name) - cfg.lr * g)
    return new, record


@dataclass
class TrainReport:
    condition: str
    config: TrainConfig
    steps: list[StepRecord] = field(default_factory=list)
    val_miou: float = float("nan")
    val_macc: float = float("nan")
    confusion: ConfusionMatrix | None = None

    def steps_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["step", "main_ce", "aux_ce", "aux_ph", "total"])
        for r in self.steps:
            w.writerow([r.step, f"{r.main_ce:.10g}", f"{r.aux_ce:.10g}", f"{r.aux_ph:.10g}",
                        f"{r.total:.10g}"])
        return buf.getvalue()


def split_by_parity(scenes: Sequence[Scene]):
    train = [s for s in scenes if s.index % 2 == 0]
    val = [s for s in scenes if s.index % 2 == 1]
    return train, val


def evaluate(model: ModelParams, scenes: Sequence[Scene]) -> ConfusionMatrix:
    cm = ConfusionMatrix.zeros(model.classes)
    for s in scenes:
        cm = accumulate(cm, infer(model, s.image), s.gt)
    return cm


def train(cfg: TrainConfig, train_scenes: Sequence[Scene], condition: str = "custom",
          log_every: int = 1, with_aux: bool | None = None) -> tuple[ModelParams, TrainReport]:
    """Train from the seeded initialization.

    The auxiliary head is attached when either auxiliary weight is positive,
    unless ``with_aux`` says otherwise.
    """
    classes = train_scenes[0].gt.classes
    model = init_model(classes, cfg.f1, cfg.f2, cfg.seed)
    if with_aux is None:
        with_aux = cfg.aux_weight > 0 or cfg.ph_weight > 0
    if with_aux:
        model = copy_decoder_head(model)
    prepared = make_batch(train_scenes, cfg.d_e)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([int(cfg.seed), 0xBA7C])))
    report = TrainReport(condition, cfg)
    count = len(train_scenes)
    order = rng.permutation(count)
    cursor = 0
    for step in range(cfg.steps):
        if cursor + cfg.batch_size > count:
            order, cursor = rng.permutation(count), 0
        idx = np.sort(order[cursor:cursor + cfg.batch_size])
        cursor += cfg.batch_size
        batch = Batch(prepared.images[idx], prepared.gt[idx], prepared.edge_gt[idx],
                      prepared.classes, prepared.ignore_index)
        model, record = train_step(model, batch, cfg)
        record.step = step
        if step % log_every == 0 or step == cfg.steps - 1:
            report.steps.append(record)
    return model, report


CONDITIONS = ("baseline", "eps", "eps_ph")


def condition_config(cfg: TrainConfig, condition: str) -> TrainConfig:
    if condition == "baseline":
        return replace(cfg, aux_weight=0.0, ph_weight=0.0)
    if condition == "eps":
        return replace(cfg, ph_weight=0.0)
    if condition == "eps_ph":
        return cfg
    raise ValueError(f"unknown condition {condition!r}")


@dataclass
class ExperimentReport:
    seed: int
    reports: dict[str, TrainReport]
    models: dict[str, ModelParams] = field(default_factory=dict)

    def summary_rows(self):
        return [(c, r.val_miou, r.val_macc) for c, r in self.reports.items()]

    def summary_csv(self) -> str:
        lines = ["condition,seed,mIoU,mAcc"]
        for c, mi, ma in self.summary_rows():
            lines.append(f"{c},{self.seed},{mi:.4f},{ma:.4f}")
        return "\n".join(lines) + "\n"


def run_experiment(cfg: TrainConfig, scenes: Sequence[Scene],
                   conditions: Sequence[str] = CONDITIONS,
                   keep_models: bool = False) -> ExperimentReport:
    """Train each condition from the same seed and score it on the odd-index scenes."""
    train_scenes, val_scenes = split_by_parity(scenes)
    if not train_scenes or not val_scenes:
        raise ValueError("dataset needs both even (train) and odd (val) indices")
    reports, models = {}, {}
    for cond in conditions:
        model, report = train(condition_config(cfg, cond), train_scenes, cond)
        cm = evaluate(model, val_scenes)
        report.confusion = cm
        report.val_miou, report.val_macc = miou(cm), macc(cm)
        reports[cond] = report
        if keep_models:
            models[cond] = model
    return ExperimentReport(cfg.seed, reports, models)


def config_dict(cfg: TrainConfig) -> dict:
    return asdict(cfg)
