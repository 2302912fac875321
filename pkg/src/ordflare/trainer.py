"""Deterministic SGD trainer for the BCE vs BCE-SF comparison protocol.

The full-scale CNN backbone is out of scope here; a fixed block-mean
feature map plus a small scorer (linear, or one hidden tanh layer)
stands in for it, which is enough to exercise the loss, the plateau
schedule, threshold calibration and the skill-score protocol end to end
at desk scale.  Everything is seeded and single-threaded: a fixed
(seed, config, data) triple reproduces parameters bit for bit.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from . import metrics
from .loss import _LOG10_BETA, FlareClass, LossConfig, sigmoid, bce

__all__ = [
    "Scorer",
    "TrainConfig",
    "TrainHistory",
    "SyntheticSpec",
    "SampleSet",
    "PlateauScheduler",
    "ConfigError",
    "TrainingDivergedError",
    "pool_features",
    "sgd_epoch",
    "train",
    "gen_synthetic",
    "compare_protocol",
    "ComparisonReport",
    "parse_config",
    "save_scorer",
    "load_scorer",
]

LOSS_KINDS = ("bce", "bce-sf")

# Parameters subject to weight decay; biases are excluded.
_DECAYED = frozenset({"w", "w1", "w2"})


class ConfigError(ValueError):
    """Invalid training configuration or degenerate data split."""


class TrainingDivergedError(RuntimeError):
    """Training aborted on a non-finite loss."""


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters of one training run.

    ``initial_lr``/``weight_decay``/``batch_size``/``alpha`` default to
    the grid-search optimum of the ordinal loss (lr 0.001, decay 0.001,
    batch 64, alpha 2); the plateau schedule is fixed at factor 0.3 with
    a patience of 2 epochs.
    """

    initial_lr: float = 0.001
    weight_decay: float = 0.001
    batch_size: int = 64
    epochs: int = 50
    alpha: float = 2.0
    loss_kind: str = "bce-sf"
    seed: int = 0
    plateau_factor: float = 0.3
    plateau_patience: int = 2

    def __post_init__(self):
        if not self.initial_lr > 0:
            raise ConfigError(f"initial_lr must be positive, got {self.initial_lr}")
        if self.weight_decay < 0:
            raise ConfigError(f"weight_decay must be nonnegative, got {self.weight_decay}")
        if self.batch_size < 1 or self.epochs < 1:
            raise ConfigError("batch_size and epochs must be positive integers")
        if self.loss_kind not in LOSS_KINDS:
            raise ConfigError(f"loss_kind must be one of {LOSS_KINDS}, got {self.loss_kind!r}")
        if not 0.0 < self.plateau_factor < 1.0:
            raise ConfigError(f"plateau_factor must be in (0, 1), got {self.plateau_factor}")
        if self.plateau_patience < 1:
            raise ConfigError(f"plateau_patience must be >= 1, got {self.plateau_patience}")


_CONFIG_KEYS = {
    "initial_lr": ("initial_lr", float),
    "weight_decay": ("weight_decay", float),
    "batch_size": ("batch_size", int),
    "epochs": ("epochs", int),
    "alpha": ("alpha", float),
    "loss": ("loss_kind", str),
    "seed": ("seed", int),
    "plateau_factor": ("plateau_factor", float),
    "plateau_patience": ("plateau_patience", int),
}


def parse_config(path):
    """Read a plain ``key = value`` training config file."""
    kwargs = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            if "=" not in text:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line.rstrip()!r}")
            key, value = (part.strip() for part in text.split("=", 1))
            if key not in _CONFIG_KEYS:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            attr, conv = _CONFIG_KEYS[key]
            try:
                kwargs[attr] = conv(value)
            except ValueError as exc:
                raise ConfigError(f"{path}:{lineno}: bad value for {key}: {value!r}") from exc
    return TrainConfig(**kwargs)


@dataclass
class SampleSet:
    """Feature matrix with labels, flare classes and AR longitudes."""

    features: np.ndarray    # (n, dim) float
    classes: np.ndarray     # (n,) FlareClass codes
    labels: np.ndarray      # (n,) in {0, 1}
    longitudes: np.ndarray  # (n,) degrees in [-90, +90]

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float)
        self.classes = np.asarray(self.classes, dtype=int)
        self.labels = np.asarray(self.labels, dtype=int)
        self.longitudes = np.asarray(self.longitudes, dtype=float)
        n = len(self.features)
        if not len(self.classes) == len(self.labels) == len(self.longitudes) == n:
            raise ValueError("all sample-set fields must share one length")

    def __len__(self):
        return len(self.features)

    @property
    def dim(self):
        return self.features.shape[1]


def pool_features(image, grid=16):
    """Block-mean features of a 512x512 byte image, scaled to [0, 1].

    The image is tiled into grid x grid blocks (32x32 pixels each for
    the default grid); each feature is the block's mean over 255.
    """
    img = np.asarray(image)
    if img.shape != (512, 512):
        raise ValueError(f"pool_features expects a 512x512 image, got {img.shape}")
    if 512 % grid:
        raise ValueError(f"grid {grid} does not divide 512")
    block = 512 // grid
    means = img.reshape(grid, block, grid, block).astype(float).mean(axis=(1, 3))
    return means.ravel() / 255.0


class Scorer:
    """Single-logit scorer: ``linear`` (w.x + b) or ``one_hidden``
    (w2.tanh(W1 x + b1) + b2).

    Parameters are seeded uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)].
    """

    def __init__(self, kind, input_dim, hidden_dim=8, seed=0):
        if kind not in ("linear", "one_hidden"):
            raise ValueError(f"kind must be 'linear' or 'one_hidden', got {kind!r}")
        if input_dim < 1:
            raise ValueError("input_dim must be >= 1")
        if kind == "one_hidden" and hidden_dim < 1:
            raise ValueError("hidden_dim must be >= 1 for the one_hidden scorer")
        self.kind = kind
        self.input_dim = input_dim
        self.hidden_dim = hidden_dim if kind == "one_hidden" else 0
        rng = np.random.default_rng(seed)
        d, h = input_dim, self.hidden_dim
        if kind == "linear":
            s = 1.0 / np.sqrt(d)
            self.params = {
                "w": rng.uniform(-s, s, size=d),
                "b": rng.uniform(-s, s, size=()),
            }
        else:
            s1 = 1.0 / np.sqrt(d)
            s2 = 1.0 / np.sqrt(h)
            self.params = {
                "w1": rng.uniform(-s1, s1, size=(h, d)),
                "b1": rng.uniform(-s1, s1, size=h),
                "w2": rng.uniform(-s2, s2, size=h),
                "b2": rng.uniform(-s2, s2, size=()),
            }

    def forward(self, x):
        """Logits for a (n, dim) batch or a single (dim,) vector."""
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        X = x[None, :] if single else x
        if X.shape[1] != self.input_dim:
            raise ValueError(f"feature dim {X.shape[1]} != scorer input dim {self.input_dim}")
        if self.kind == "linear":
            z = X @ self.params["w"] + self.params["b"]
        else:
            hidden = np.tanh(X @ self.params["w1"].T + self.params["b1"])
            z = hidden @ self.params["w2"] + self.params["b2"]
        return float(z[0]) if single else z

    def grads(self, X, dz):
        """Parameter gradients given per-instance dL/dlogit values."""
        X = np.asarray(X, dtype=float)
        dz = np.asarray(dz, dtype=float)
        if self.kind == "linear":
            return {"w": X.T @ dz, "b": np.asarray(dz.sum())}
        hidden = np.tanh(X @ self.params["w1"].T + self.params["b1"])
        dh = np.outer(dz, self.params["w2"]) * (1.0 - hidden ** 2)
        return {
            "w1": dh.T @ X,
            "b1": dh.sum(axis=0),
            "w2": hidden.T @ dz,
            "b2": np.asarray(dz.sum()),
        }

    def param_names(self):
        return tuple(sorted(self.params))

    def flat_params(self):
        return np.concatenate([np.ravel(self.params[k]) for k in self.param_names()])

    def set_flat_params(self, flat):
        flat = np.asarray(flat, dtype=float)
        offset = 0
        for name in self.param_names():
            shape = self.params[name].shape
            size = int(np.prod(shape)) if shape else 1
            self.params[name] = flat[offset:offset + size].reshape(shape).copy()
            offset += size
        if offset != flat.size:
            raise ValueError(f"expected {offset} parameters, got {flat.size}")


def _instance_weights(classes, cfg):
    if cfg.loss_kind == "bce":
        return np.ones(len(classes))
    return cfg.alpha / _LOG10_BETA[np.asarray(classes, dtype=int)]


def _finite_logits(z, context):
    if not np.all(np.isfinite(z)):
        raise TrainingDivergedError(f"non-finite logits in {context}")
    return z


def _mean_loss(scorer, data, cfg):
    with np.errstate(over="ignore", invalid="ignore"):
        z = _finite_logits(scorer.forward(data.features), "loss evaluation")
        w = _instance_weights(data.classes, cfg)
        return float(np.mean(w * bce(sigmoid(z), data.labels)))


def sgd_epoch(scorer, data, cfg, lr, rng):
    """One pass of mini-batch SGD; returns the epoch's mean train loss.

    Update rule per batch: theta <- theta - lr * (grad + decay * theta),
    decay applied to weights only.  Batch order comes from a seeded
    shuffle drawn from ``rng``, so the caller controls determinism.
    """
    if len(data) == 0:
        raise ConfigError("cannot run an epoch on an empty sample set")
    order = rng.permutation(len(data))
    total = 0.0
    # divergence is detected explicitly, so let inf/nan flow to the check
    with np.errstate(over="ignore", invalid="ignore"):
        for start in range(0, len(order), cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            X = data.features[idx]
            y = data.labels[idx].astype(float)
            w = _instance_weights(data.classes[idx], cfg)
            z = _finite_logits(scorer.forward(X), f"batch starting at {start}")
            p = sigmoid(z)
            batch_loss = float(np.mean(w * bce(p, y)))
            if not np.isfinite(batch_loss):
                raise TrainingDivergedError(
                    f"non-finite loss {batch_loss} in batch starting at {start}")
            total += batch_loss * len(idx)
            dz = w * (p - y) / len(idx)
            grads = scorer.grads(X, dz)
            for name, g in grads.items():
                step = g
                if cfg.weight_decay and name in _DECAYED:
                    step = g + cfg.weight_decay * scorer.params[name]
                scorer.params[name] = scorer.params[name] - lr * step
    return total / len(data)


class PlateauScheduler:
    """Reduce-on-plateau learning rate rule.

    An epoch *improves* when its validation loss drops at least
    ``min_delta`` below the best seen so far; after ``patience``
    consecutive non-improving epochs the rate is multiplied by
    ``factor`` and the counter resets.
    """

    def __init__(self, lr, factor=0.3, patience=2, min_delta=1e-8):
        if not 0.0 < factor < 1.0:
            raise ValueError(f"factor must be in (0, 1), got {factor}")
        if patience < 1:
            raise ValueError(f"patience must be >= 1, got {patience}")
        self.lr = lr
        self.factor = factor
        self.patience = patience
        self.min_delta = min_delta
        self.best = np.inf
        self.bad_epochs = 0

    def step(self, val_loss):
        """Record one epoch's validation loss; returns the new rate."""
        if self.best - val_loss >= self.min_delta:
            self.best = val_loss
            self.bad_epochs = 0
        else:
            self.bad_epochs += 1
            if self.bad_epochs >= self.patience:
                self.lr *= self.factor
                self.bad_epochs = 0
        return self.lr


@dataclass
class TrainHistory:
    config: TrainConfig
    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    lr: list = field(default_factory=list)
    val_css: list = field(default_factory=list)


def _check_split(name, data):
    if data is None or len(data) == 0:
        raise ConfigError(f"{name} set is empty")
    if len(np.unique(data.labels)) < 2:
        raise ConfigError(f"{name} set does not contain both labels")


def train(cfg, train_set, val_set, kind="linear", hidden_dim=8):
    """Train a scorer and calibrate its decision threshold.

    Runs ``cfg.epochs`` epochs of SGD with the plateau schedule, logging
    train/validation loss, the learning rate in force and the validation
    CSS at the 0.5 monitoring threshold.  After the last epoch the
    threshold maximizing validation CSS on the 0.01..0.99 grid is
    selected once.  Returns (scorer, history, threshold).
    """
    _check_split("train", train_set)
    _check_split("validation", val_set)
    scorer = Scorer(kind, train_set.dim, hidden_dim=hidden_dim, seed=cfg.seed)
    rng = np.random.default_rng(cfg.seed)
    sched = PlateauScheduler(cfg.initial_lr, cfg.plateau_factor, cfg.plateau_patience)
    history = TrainHistory(config=cfg)
    lr = cfg.initial_lr
    for _ in range(cfg.epochs):
        train_loss = sgd_epoch(scorer, train_set, cfg, lr, rng)
        val_loss = _mean_loss(scorer, val_set, cfg)
        if not np.isfinite(val_loss):
            raise TrainingDivergedError(f"non-finite validation loss {val_loss}")
        val_scores = sigmoid(scorer.forward(val_set.features))
        monitor = metrics.skill_report(
            metrics.confusion(val_scores, val_set.labels, 0.5), 0.5)
        history.train_loss.append(train_loss)
        history.val_loss.append(val_loss)
        history.lr.append(lr)
        history.val_css.append(monitor.css if monitor.css is not None else 0.0)
        lr = sched.step(val_loss)
    val_scores = sigmoid(scorer.forward(val_set.features))
    sweep = metrics.sweep_threshold(val_scores, val_set.labels)
    return scorer, history, sweep.best_threshold


@dataclass(frozen=True)
class SyntheticSpec:
    """Desk-scale ordinal dataset: one signal direction, Gaussian noise.

    Every instance of class c is mu_c * u + noise, with the fixed unit
    direction u drawn once per dataset; mu must increase strictly along
    the flare scale so ordinality carries signal.
    """

    counts: dict = field(default_factory=lambda: {
        FlareClass.FQ: 150, FlareClass.A: 50, FlareClass.B: 50,
        FlareClass.C: 50, FlareClass.M: 30, FlareClass.X: 20,
    })
    mu: dict = field(default_factory=lambda: {
        FlareClass.FQ: -2.0, FlareClass.A: -1.4, FlareClass.B: -0.9,
        FlareClass.C: -0.5, FlareClass.M: 0.5, FlareClass.X: 1.0,
    })
    noise: float = 0.35
    dim: int = 8
    seed: int = 0

    def __post_init__(self):
        mus = [self.mu[c] for c in FlareClass]
        if not all(a < b for a, b in zip(mus, mus[1:])):
            raise ValueError("class means must increase strictly from FQ to X")
        if self.noise < 0:
            raise ValueError("noise scale must be nonnegative")
        if self.dim < 1:
            raise ValueError("feature dim must be >= 1")
        if any(n < 0 for n in self.counts.values()):
            raise ValueError("class counts must be nonnegative")


def _gen_split(spec, u, rng):
    feats, classes, labels, lons = [], [], [], []
    for cls in FlareClass:
        n = spec.counts.get(cls, 0)
        if n == 0:
            continue
        eps = rng.normal(0.0, spec.noise, size=(n, spec.dim)) if spec.noise else np.zeros((n, spec.dim))
        feats.append(spec.mu[cls] * u + eps)
        classes.append(np.full(n, int(cls)))
        labels.append(np.full(n, int(cls >= FlareClass.M)))
        lons.append(rng.uniform(-90.0, 90.0, size=n))
    return SampleSet(
        features=np.concatenate(feats),
        classes=np.concatenate(classes),
        labels=np.concatenate(labels),
        longitudes=np.concatenate(lons),
    )


def gen_synthetic(spec):
    """Deterministic (train, val, test) sample sets from a spec."""
    rng = np.random.default_rng(spec.seed)
    u = rng.normal(size=spec.dim)
    u = u / np.linalg.norm(u)
    return tuple(_gen_split(spec, u, rng) for _ in range(3))


DEFAULT_ZONES = (
    metrics.ZoneSpec(0.0, 30.0, "cumulative"),
    metrics.ZoneSpec(0.0, 60.0, "cumulative"),
    metrics.ZoneSpec(0.0, 90.0, "cumulative"),
)


@dataclass
class ComparisonReport:
    """Per-seed, per-loss, per-zone test skill of both loss functions."""

    rows: list          # (seed, loss_kind, SkillReport with zone)
    overall: dict       # (seed, loss_kind) -> full-disk SkillReport
    thresholds: dict    # (seed, loss_kind) -> calibrated threshold

    def css_delta(self, seed):
        a = self.overall[(seed, "bce-sf")].css or 0.0
        b = self.overall[(seed, "bce")].css or 0.0
        return a - b

    @property
    def seeds(self):
        return sorted({seed for seed, _ in self.overall})

    @property
    def mean_css_delta(self):
        return float(np.mean([self.css_delta(s) for s in self.seeds]))

    def to_csv(self, path):
        import csv as _csv

        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = _csv.writer(fh)
            writer.writerow(("seed", "loss") + metrics.REPORT_COLUMNS)
            for seed, loss_kind, rep in self.rows:
                writer.writerow([seed, loss_kind] + metrics.report_row(rep))

    def summary(self):
        lines = []
        for seed in self.seeds:
            lines.append(
                f"seed {seed}: css bce={self.overall[(seed, 'bce')].css:.4f} "
                f"bce-sf={self.overall[(seed, 'bce-sf')].css:.4f} "
                f"delta={self.css_delta(seed):+.4f}")
        lines.append(f"mean css delta (bce-sf - bce): {self.mean_css_delta:+.4f}")
        return "\n".join(lines)


def compare_protocol(seeds, cfg_bce, cfg_bcesf, spec, zones=DEFAULT_ZONES, kind="linear"):
    """Head-to-head BCE vs BCE-SF over several seeds on synthetic data.

    Per seed: regenerate the dataset, train both configurations with the
    same seed, calibrate each threshold on validation, then score the
    test set globally and per longitude zone.
    """
    seeds = list(seeds)
    if len(seeds) < 5:
        raise ConfigError(f"need at least 5 seeds, got {len(seeds)}")
    if cfg_bce.loss_kind != "bce" or cfg_bcesf.loss_kind != "bce-sf":
        raise ConfigError("configs must carry their respective loss kinds")
    rows, overall, thresholds = [], {}, {}
    for seed in seeds:
        data = gen_synthetic(replace(spec, seed=seed))
        train_set, val_set, test_set = data
        for cfg in (cfg_bce, cfg_bcesf):
            cfg_seeded = replace(cfg, seed=seed)
            try:
                scorer, _, threshold = train(cfg_seeded, train_set, val_set, kind=kind)
            except TrainingDivergedError as exc:
                raise TrainingDivergedError(
                    f"seed {seed} ({cfg.loss_kind}): {exc}") from exc
            test_scores = sigmoid(scorer.forward(test_set.features))
            cm = metrics.confusion(test_scores, test_set.labels, threshold)
            overall[(seed, cfg.loss_kind)] = metrics.skill_report(cm, threshold)
            thresholds[(seed, cfg.loss_kind)] = threshold
            for rep in metrics.zone_report(
                    test_scores, test_set.labels, test_set.longitudes, threshold, zones):
                rows.append((seed, cfg.loss_kind, rep))
    return ComparisonReport(rows=rows, overall=overall, thresholds=thresholds)


_MODEL_MAGIC = "ORDFLARE-SCORER"


def save_scorer(scorer, path, threshold=None):
    """Write the versioned text model file: header, then one parameter
    per line at full decimal precision."""
    header = (
        f"{_MODEL_MAGIC} v1 kind={scorer.kind} input_dim={scorer.input_dim} "
        f"hidden_dim={scorer.hidden_dim}"
    )
    if threshold is not None:
        header += f" threshold={threshold!r}"
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(header + "\n")
        for value in scorer.flat_params():
            fh.write(repr(float(value)) + "\n")


def load_scorer(path):
    """Read a model file; returns (scorer, threshold or None)."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        values = [float(line) for line in fh if line.strip()]
    fields = header.split()
    if len(fields) < 2 or fields[0] != _MODEL_MAGIC or fields[1] != "v1":
        raise ValueError(f"{path}: not a v1 scorer file")
    meta = dict(part.split("=", 1) for part in fields[2:])
    hidden = int(meta["hidden_dim"])
    scorer = Scorer(
        meta["kind"], int(meta["input_dim"]),
        hidden_dim=hidden if hidden else 8, seed=0,
    )
    scorer.set_flat_params(np.asarray(values))
    threshold = float(meta["threshold"]) if "threshold" in meta else None
    return scorer, threshold
