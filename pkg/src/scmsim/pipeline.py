"""End-to-end wiring: transmit chain, staged training, baselines, metrics.

The deep superposition chain is

    x -> u1 = enc1(x) -> modulator 1 -> y1   (basic layer)
    x -> u2 = enc2(x) -> r = u2 - W u1 - b -> modulator 2 -> y2
    tx = sqrt(a) y1 + sqrt(1-a) y2, each layer power-normalized per sequence
    receiver i sees tx + AWGN(sigma_i^2) and runs its own classifier and
    reconstructor on the 2n interleaved I/Q reals.

Training runs three stages: the basic layer alone against receiver 1, then
the refinement layer (with the decorrelator) against receiver 2 with the
basic layer frozen, then a joint fine-tune of everything. The conventional
baseline replaces the two layers by a single encoder/modulator on the
rectangular product constellation.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import tensor as T
from .channel import ChannelConfig, noise_components, sigma2_from_snr, validate_degraded
from .config import RunConfig
from .constellation import Constellation, make_square_qam, superpose
from .data import generate, to_arrays
from .decorrelator import (TrainableDecorrelator, batch_standardize, cross_cov,
                           entropy_upper_bound)
from .errors import ContractError
from .models import (Classifier, Encoder, LossWeights, Reconstructor,
                     loss_stage1, loss_stage2, loss_stage3)
from .modulator import (GumbelConfig, Modulator, gumbel_softmax_sample,
                        normalize_power_t, symbol_components)
from .optim import Adam, LrSchedule, lr_at
from .tensor import Tensor


def rate(n: int, k: int) -> Fraction:
    """Channel uses per source dimension."""
    if k <= 0:
        raise ContractError(f"rate needs k > 0, got {k}")
    return Fraction(n, k)


def psnr(x, x_hat, max_val: float = 1.0) -> float:
    """10*log10(max^2/MSE) in dB, capped at the 99 dB sentinel."""
    if max_val <= 0:
        raise ContractError(f"max_val must be positive, got {max_val}")
    a = np.asarray(getattr(x, "data", x), dtype=np.float64)
    b = np.asarray(getattr(x_hat, "data", x_hat), dtype=np.float64)
    if a.shape != b.shape:
        raise ContractError(f"psnr shape mismatch: {a.shape} vs {b.shape}")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return 99.0
    return min(10.0 * float(np.log10(max_val**2 / mse)), 99.0)


# ---------------------------------------------------------------------------
# parameter containers


@dataclass
class DeepscmParams:
    enc1: Encoder
    mod1: Modulator
    cls1: Classifier
    rec1: Reconstructor
    enc2: Encoder
    dec: TrainableDecorrelator
    mod2: Modulator
    cls2: Classifier
    rec2: Reconstructor
    c1: Constellation
    c2: Constellation

    def group1(self):
        return (self.enc1.params() + self.mod1.params()
                + self.cls1.params() + self.rec1.params())

    def group2(self):
        return (self.enc2.params() + self.dec.params() + self.mod2.params()
                + self.cls2.params() + self.rec2.params())

    def all_params(self):
        return self.group1() + self.group2()

    def named_params(self) -> dict:
        out: dict = {}
        out.update(self.enc1.named_params("enc1"))
        out.update(self.mod1.named_params("mod1"))
        out.update(self.cls1.named_params("cls1"))
        out.update(self.rec1.named_params("rec1"))
        out.update(self.enc2.named_params("enc2"))
        out.update(self.dec.named_params("dec"))
        out.update(self.mod2.named_params("mod2"))
        out.update(self.cls2.named_params("cls2"))
        out.update(self.rec2.named_params("rec2"))
        return out


@dataclass
class CmParams:
    enc: Encoder
    mod: Modulator
    cls1: Classifier
    rec1: Reconstructor
    cls2: Classifier
    rec2: Reconstructor
    c: Constellation

    def tx_params(self):
        return self.enc.params() + self.mod.params()

    def rx_params(self, which: int):
        if which == 1:
            return self.cls1.params() + self.rec1.params()
        return self.cls2.params() + self.rec2.params()

    def all_params(self):
        return self.tx_params() + self.rx_params(1) + self.rx_params(2)

    def named_params(self) -> dict:
        out: dict = {}
        out.update(self.enc.named_params("enc"))
        out.update(self.mod.named_params("mod"))
        out.update(self.cls1.named_params("cls1"))
        out.update(self.rec1.named_params("rec1"))
        out.update(self.cls2.named_params("cls2"))
        out.update(self.rec2.named_params("rec2"))
        return out


def build_params(cfg: RunConfig, rng: np.random.Generator) -> DeepscmParams:
    c1 = make_square_qam(cfg.m1)
    c2 = make_square_qam(cfg.m2)
    return DeepscmParams(
        enc1=Encoder(cfg.k, cfg.n, cfg.hidden, rng),
        mod1=Modulator(cfg.n, c1, cfg.hidden, rng),
        cls1=Classifier(cfg.n, cfg.l1, cfg.hidden, rng),
        rec1=Reconstructor(cfg.n, cfg.k, cfg.hidden, rng),
        enc2=Encoder(cfg.k, cfg.n, cfg.hidden, rng),
        dec=TrainableDecorrelator(2 * cfg.n),
        mod2=Modulator(cfg.n, c2, cfg.hidden, rng),
        cls2=Classifier(cfg.n, cfg.l2, cfg.hidden, rng),
        rec2=Reconstructor(cfg.n, cfg.k, cfg.hidden, rng),
        c1=c1, c2=c2,
    )


def build_cm_params(cfg: RunConfig, rng: np.random.Generator) -> CmParams:
    c = make_square_qam(cfg.m1 * cfg.m2)
    return CmParams(
        enc=Encoder(cfg.k, cfg.n, cfg.hidden, rng),
        mod=Modulator(cfg.n, c, cfg.hidden, rng),
        cls1=Classifier(cfg.n, cfg.l1, cfg.hidden, rng),
        rec1=Reconstructor(cfg.n, cfg.k, cfg.hidden, rng),
        cls2=Classifier(cfg.n, cfg.l2, cfg.hidden, rng),
        rec2=Reconstructor(cfg.n, cfg.k, cfg.hidden, rng),
        c=c,
    )


# ---------------------------------------------------------------------------
# forward passes


@dataclass
class ForwardOut:
    s1_logits: Tensor | None
    x_hat1: Tensor | None
    s2_logits: Tensor | None
    x_hat2: Tensor | None
    r: Tensor | None
    # diagnostics (data-only use)
    u1: Tensor | None = None
    y1: Tensor | None = None
    y2: Tensor | None = None
    tx: Tensor | None = None

    def __iter__(self):
        return iter((self.s1_logits, self.x_hat1, self.s2_logits,
                     self.x_hat2, self.r))


def _transmit_layer(features: Tensor, mod: Modulator, cfg: RunConfig,
                    rng: np.random.Generator, hard: bool) -> Tensor:
    dist = mod.symbol_logits(features)
    onehots = gumbel_softmax_sample(dist, GumbelConfig(cfg.tau, hard), rng)
    comps = symbol_components(onehots, mod.constellation)
    return normalize_power_t(comps, cfg.power, cfg.n)


def forward_deepscm(batch, params: DeepscmParams, cfg: RunConfig,
                    rng: np.random.Generator, stage: str = "full",
                    hard: bool | None = None) -> ForwardOut:
    """Run the transmit/receive chain for one batch of source rows.

    stage wiring: "stage1" transmits the basic layer alone and runs only
    receiver 1; "stage2" freezes the basic branch (its graph is cut) and
    runs only receiver 2; "full" runs everything end to end.
    """
    if stage not in ("stage1", "stage2", "full"):
        raise ContractError(f"unknown stage {stage!r}")
    validate_degraded(ChannelConfig(cfg.power, cfg.snr1_db, cfg.snr2_db))
    if hard is None:
        hard = cfg.train_hard
    x = T.as_tensor(batch)
    if x.data.ndim != 2:
        raise ContractError(f"batch must be [B, k], got {x.shape}")
    bsz = x.shape[0]
    a = cfg.paf
    sigma2_1 = sigma2_from_snr(cfg.power, cfg.snr1_db)
    sigma2_2 = sigma2_from_snr(cfg.power, cfg.snr2_db)

    u1 = params.enc1(x)
    y1 = _transmit_layer(u1, params.mod1, cfg, rng, hard)

    if stage == "stage1":
        tx = y1 if cfg.stage1_full_power else T.mul_scalar(y1, np.sqrt(a))
        z1 = T.add(tx, Tensor(noise_components(tx.shape, sigma2_1, rng)))
        return ForwardOut(params.cls1(z1), params.rec1(z1), None, None, None,
                          u1=u1, y1=y1, tx=tx)

    if stage == "stage2":
        # basic branch frozen: cut its graph so no gradients build up there
        u1 = T.detach(u1)
        y1 = T.detach(y1)

    u2 = params.enc2(x)
    r = params.dec.residual(u1, u2)
    r_in = batch_standardize(r) if bsz > 1 else r
    y2 = _transmit_layer(r_in, params.mod2, cfg, rng, hard)
    tx = T.add(T.mul_scalar(y1, np.sqrt(a)), T.mul_scalar(y2, np.sqrt(1.0 - a)))

    if stage == "stage2":
        z2 = T.add(tx, Tensor(noise_components(tx.shape, sigma2_2, rng)))
        return ForwardOut(None, None, params.cls2(z2), params.rec2(z2), r,
                          u1=u1, y1=y1, y2=y2, tx=tx)

    z1 = T.add(tx, Tensor(noise_components(tx.shape, sigma2_1, rng)))
    z2 = T.add(tx, Tensor(noise_components(tx.shape, sigma2_2, rng)))
    return ForwardOut(params.cls1(z1), params.rec1(z1),
                      params.cls2(z2), params.rec2(z2), r,
                      u1=u1, y1=y1, y2=y2, tx=tx)


def forward_cm(batch, params: CmParams, cfg: RunConfig, rng: np.random.Generator,
               receivers=(1, 2), hard: bool | None = None) -> ForwardOut:
    """Single-layer baseline chain on the rectangular product constellation."""
    if hard is None:
        hard = cfg.train_hard
    x = T.as_tensor(batch)
    u = params.enc(x)
    y = _transmit_layer(u, params.mod, cfg, rng, hard)
    out = ForwardOut(None, None, None, None, None, u1=u, y1=y, tx=y)
    if 1 in receivers:
        z1 = T.add(y, Tensor(noise_components(y.shape, sigma2_from_snr(cfg.power, cfg.snr1_db), rng)))
        out.s1_logits = params.cls1(z1)
        out.x_hat1 = params.rec1(z1)
    if 2 in receivers:
        z2 = T.add(y, Tensor(noise_components(y.shape, sigma2_from_snr(cfg.power, cfg.snr2_db), rng)))
        out.s2_logits = params.cls2(z2)
        out.x_hat2 = params.rec2(z2)
    return out


# ---------------------------------------------------------------------------
# training


@dataclass
class TrainReport:
    stage1_losses: list = field(default_factory=list)
    stage2_losses: list = field(default_factory=list)
    stage3_losses: list = field(default_factory=list)
    stage2_diag: list = field(default_factory=list)  # dicts per epoch
    cm_losses: list = field(default_factory=list)
    # byte image of the frozen transmitter after a two-phase baseline's
    # first phase, so the freeze contract can be audited afterwards
    cm_tx_snapshot: dict | None = None


def _weights(cfg: RunConfig) -> LossWeights:
    return LossWeights(cfg.lambda1, cfg.lambda2, cfg.lambda3, cfg.beta)


def _batches(n: int, batch_size: int, rng: np.random.Generator):
    perm = rng.permutation(n)
    for start in range(0, n, batch_size):
        yield perm[start:start + batch_size]


def _residual_diag(params: DeepscmParams, x: np.ndarray, n: int) -> dict:
    u1 = params.enc1(Tensor(x)).data
    u2 = params.enc2(Tensor(x)).data
    r = u2 - u1 @ params.dec.w.T - params.dec.b.data
    cc = cross_cov(u1, r)
    msq = float(np.mean(np.sum(r * r, axis=1)))
    bound = entropy_upper_bound(r, n) if msq > 0 else float("-inf")
    return {"r_norm_sq": msq, "crosscov_max": float(np.max(np.abs(cc))),
            "entropy_bound": bound}


def train_stage1(cfg: RunConfig, params: DeepscmParams, data,
                 rng: np.random.Generator, report: TrainReport | None = None) -> DeepscmParams:
    """Stage 1: basic layer and receiver 1 only."""
    x, s1, _ = data
    w = _weights(cfg)
    opt = Adam(params.group1())
    sched = LrSchedule(cfg.lr1, cfg.lr_min, cfg.lr_t0, cfg.lr_tmult)
    for epoch in range(cfg.epochs1):
        lr = lr_at(epoch, sched)
        losses = []
        for idx in _batches(len(x), cfg.batch_size, rng):
            out = forward_deepscm(x[idx], params, cfg, rng, stage="stage1")
            loss = loss_stage1(out.s1_logits, s1[idx], out.x_hat1, x[idx], w)
            opt.zero_grad()
            T.backward(loss)
            opt.step(lr)
            losses.append(float(loss.data))
        if report is not None:
            report.stage1_losses.append(float(np.mean(losses)))
    return params


def train_stage2(cfg: RunConfig, params: DeepscmParams, data,
                 rng: np.random.Generator, report: TrainReport | None = None) -> DeepscmParams:
    """Stage 2: refinement layer and receiver 2, basic branch frozen."""
    x, _, s2 = data
    w = _weights(cfg)
    opt = Adam(params.group2())
    sched = LrSchedule(cfg.lr2, cfg.lr_min, cfg.lr_t0, cfg.lr_tmult)
    for epoch in range(cfg.epochs2):
        lr = lr_at(epoch, sched)
        losses = []
        for idx in _batches(len(x), cfg.batch_size, rng):
            out = forward_deepscm(x[idx], params, cfg, rng, stage="stage2")
            loss = loss_stage2(out.s2_logits, s2[idx], out.x_hat2, x[idx], out.r, w)
            opt.zero_grad()
            T.backward(loss)
            opt.step(lr)
            losses.append(float(loss.data))
        if report is not None:
            report.stage2_losses.append(float(np.mean(losses)))
            report.stage2_diag.append({"epoch": epoch, **_residual_diag(params, x, cfg.n)})
    return params


def train_stage3(cfg: RunConfig, params: DeepscmParams, data,
                 rng: np.random.Generator, report: TrainReport | None = None) -> DeepscmParams:
    """Stage 3: joint fine-tune of all parameters on l1 + beta*l2."""
    x, s1, s2 = data
    w = _weights(cfg)
    opt = Adam(params.all_params())
    sched = LrSchedule(cfg.lr3, cfg.lr_min, cfg.lr_t0, cfg.lr_tmult)
    for epoch in range(cfg.epochs3):
        lr = lr_at(epoch, sched)
        losses = []
        for idx in _batches(len(x), cfg.batch_size, rng):
            out = forward_deepscm(x[idx], params, cfg, rng, stage="full")
            l1 = loss_stage1(out.s1_logits, s1[idx], out.x_hat1, x[idx], w)
            l2 = loss_stage2(out.s2_logits, s2[idx], out.x_hat2, x[idx], out.r, w)
            loss = loss_stage3(l1, l2, w.beta)
            opt.zero_grad()
            T.backward(loss)
            opt.step(lr)
            losses.append(float(loss.data))
        if report is not None:
            report.stage3_losses.append(float(np.mean(losses)))
    return params


def train_deepscm(cfg: RunConfig, params: DeepscmParams, data,
                  rng: np.random.Generator, report: TrainReport | None = None) -> DeepscmParams:
    train_stage1(cfg, params, data, rng, report)
    train_stage2(cfg, params, data, rng, report)
    train_stage3(cfg, params, data, rng, report)
    return params


def _cm_loss(out: ForwardOut, x, s1, s2, w: LossWeights, receivers) -> Tensor:
    parts = []
    if 1 in receivers:
        parts.append(loss_stage1(out.s1_logits, s1, out.x_hat1, x, w))
    if 2 in receivers:
        ce = T.cross_entropy(out.s2_logits, s2)
        part = T.add(ce, T.mul_scalar(T.mse(out.x_hat2, T.as_tensor(x)), w.lambda2)) \
            if w.lambda2 > 0 else ce
        parts.append(part)
    loss = parts[0]
    for p in parts[1:]:
        loss = T.add(loss, p)
    return loss


def train_cm(cfg: RunConfig, params: CmParams, data,
             rng: np.random.Generator, report: TrainReport | None = None) -> CmParams:
    """Conventional-modulation baselines.

    cm_joint trains transmitter and both receivers on the equal-weight sum
    of the two receivers' objectives. cm_rx1 trains the transmitter with
    receiver 1 only, then fits receiver 2's decoders with the transmitter
    frozen; cm_rx2 is the mirror image.
    """
    if cfg.mode not in ("cm_joint", "cm_rx1", "cm_rx2"):
        raise ContractError(f"train_cm on mode {cfg.mode!r}")
    x, s1, s2 = data
    w = _weights(cfg)
    sched = LrSchedule(cfg.lr1, cfg.lr_min, cfg.lr_t0, cfg.lr_tmult)

    def run(epochs: int, trainable, receivers):
        opt = Adam(trainable)
        for epoch in range(epochs):
            lr = lr_at(epoch, sched)
            losses = []
            for idx in _batches(len(x), cfg.batch_size, rng):
                out = forward_cm(x[idx], params, cfg, rng, receivers=receivers)
                loss = _cm_loss(out, x[idx], s1[idx], s2[idx], w, receivers)
                opt.zero_grad()
                T.backward(loss)
                opt.step(lr)
                losses.append(float(loss.data))
            if report is not None:
                report.cm_losses.append(float(np.mean(losses)))

    def freeze_tx():
        if report is not None:
            report.cm_tx_snapshot = {k: v.data.tobytes()
                                     for k, v in params.named_params().items()
                                     if k.startswith(("enc.", "mod."))}

    if cfg.mode == "cm_joint":
        run(cfg.total_cm_epochs, params.all_params(), (1, 2))
    elif cfg.mode == "cm_rx1":
        run(cfg.total_cm_epochs, params.tx_params() + params.rx_params(1), (1,))
        freeze_tx()
        run(cfg.total_cm_decoder_epochs, params.rx_params(2), (2,))
    else:
        run(cfg.total_cm_epochs, params.tx_params() + params.rx_params(2), (2,))
        freeze_tx()
        run(cfg.total_cm_decoder_epochs, params.rx_params(1), (1,))
    return params


# ---------------------------------------------------------------------------
# evaluation


@dataclass
class Metrics:
    acc1: float
    acc2: float
    psnr1: float
    psnr2: float
    acc1_se: float
    acc2_se: float
    r_norm_sq: float
    crosscov_max: float
    entropy_bound: float

    def __post_init__(self):
        for name in ("acc1", "acc2"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ContractError(f"{name} outside [0,1]: {v}")


def evaluate(params, cfg: RunConfig, test_data, trials: int | None = None,
             rng: np.random.Generator | None = None) -> Metrics:
    """Monte Carlo metrics over the test set with hard symbol sampling.

    Each trial redraws symbol sampling noise and channel noise for the whole
    test set; accuracies average over trials (standard error across trials),
    PSNR pools the squared error over everything.
    """
    x, s1, s2 = test_data
    if trials is None:
        trials = cfg.eval_noise_draws
    if rng is None:
        rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0xE7A1]))
    acc1_t, acc2_t, se1_t, se2_t = [], [], [], []
    sq_err1 = 0.0
    sq_err2 = 0.0
    deep = isinstance(params, DeepscmParams)
    for _ in range(trials):
        if deep:
            out = forward_deepscm(x, params, cfg, rng, stage="full", hard=True)
        else:
            out = forward_cm(x, params, cfg, rng, hard=True)
        pred1 = out.s1_logits.data.argmax(axis=1)
        pred2 = out.s2_logits.data.argmax(axis=1)
        acc1_t.append(float(np.mean(pred1 == s1)))
        acc2_t.append(float(np.mean(pred2 == s2)))
        sq_err1 += float(np.sum((out.x_hat1.data - x) ** 2))
        sq_err2 += float(np.sum((out.x_hat2.data - x) ** 2))
    mse1 = sq_err1 / (trials * x.size)
    mse2 = sq_err2 / (trials * x.size)
    if deep:
        diag = _residual_diag(params, x, cfg.n)
    else:
        diag = {"r_norm_sq": float("nan"), "crosscov_max": float("nan"),
                "entropy_bound": float("nan")}
    return Metrics(
        acc1=float(np.mean(acc1_t)),
        acc2=float(np.mean(acc2_t)),
        psnr1=99.0 if mse1 == 0 else min(10.0 * float(np.log10(1.0 / mse1)), 99.0),
        psnr2=99.0 if mse2 == 0 else min(10.0 * float(np.log10(1.0 / mse2)), 99.0),
        acc1_se=float(np.std(acc1_t) / np.sqrt(trials)),
        acc2_se=float(np.std(acc2_t) / np.sqrt(trials)),
        **diag,
    )


# ---------------------------------------------------------------------------
# experiment driver


@dataclass
class RunResult:
    params: object
    report: TrainReport
    metrics: Metrics
    cfg: RunConfig


def _streams(cfg: RunConfig):
    kids = np.random.SeedSequence(cfg.seed).spawn(6)
    names = ("data_train", "data_test", "init", "train", "eval", "hist")
    return dict(zip(names, kids))


def load_datasets(cfg: RunConfig):
    spec = cfg.hier_spec()
    st = _streams(cfg)
    n_train = max(1, round(0.8 * cfg.n_samples))
    n_test = max(1, cfg.n_samples - n_train)
    train = to_arrays(generate(spec, n_train, st["data_train"]))
    test = to_arrays(generate(spec, n_test, st["data_test"]))
    return train, test


def run_experiment(cfg: RunConfig) -> RunResult:
    """Train per cfg.mode and evaluate; fully determined by the config."""
    st = _streams(cfg)
    train, test = load_datasets(cfg)
    report = TrainReport()
    train_rng = np.random.default_rng(st["train"])
    init_rng = np.random.default_rng(st["init"])
    if cfg.mode == "deepscm":
        params = build_params(cfg, init_rng)
        train_deepscm(cfg, params, train, train_rng, report)
    else:
        params = build_cm_params(cfg, init_rng)
        train_cm(cfg, params, train, train_rng, report)
    metrics = evaluate(params, cfg, test, rng=np.random.default_rng(st["eval"]))
    return RunResult(params=params, report=report, metrics=metrics, cfg=cfg)


METRICS_COLUMNS = ["mode", "a", "n", "snr1_db", "snr2_db", "acc1", "acc2",
                   "psnr1", "psnr2", "r_norm_sq", "crosscov_max",
                   "entropy_bound", "seed"]


def metrics_row(cfg: RunConfig, m: Metrics) -> dict:
    return {"mode": cfg.mode, "a": cfg.paf, "n": cfg.n,
            "snr1_db": cfg.snr1_db, "snr2_db": cfg.snr2_db,
            "acc1": m.acc1, "acc2": m.acc2, "psnr1": m.psnr1, "psnr2": m.psnr2,
            "r_norm_sq": m.r_norm_sq, "crosscov_max": m.crosscov_max,
            "entropy_bound": m.entropy_bound, "seed": cfg.seed}


# ---------------------------------------------------------------------------
# sweeps


def paf_sweep(cfg: RunConfig, a_values) -> list[dict]:
    """Full train+evaluate per power allocation factor; one row per value."""
    rows = []
    for a in a_values:
        cfg_a = dataclasses.replace(cfg, paf=float(a))
        rows.append(metrics_row(cfg_a, run_experiment(cfg_a).metrics))
    return rows


def _paired_sweep(cfg: RunConfig, points: list[dict]) -> list[dict]:
    rows = []
    for overrides in points:
        for mode in ("deepscm", "cm_joint"):
            cfg_p = dataclasses.replace(cfg, mode=mode, **overrides)
            rows.append(metrics_row(cfg_p, run_experiment(cfg_p).metrics))
    return rows


def snr_sweep(cfg: RunConfig, snr2_values) -> list[dict]:
    """Paired deepscm/cm_joint runs (same seed) per receiver-2 SNR."""
    return _paired_sweep(cfg, [{"snr2_db": float(v)} for v in snr2_values])


def rate_sweep(cfg: RunConfig, n_values) -> list[dict]:
    """Paired deepscm/cm_joint runs per channel-use count n."""
    return _paired_sweep(cfg, [{"n": int(v)} for v in n_values])


# ---------------------------------------------------------------------------
# constellation histogram


def constellation_histogram(params, cfg: RunConfig, trials: int,
                            rng: np.random.Generator | None = None) -> list[dict]:
    """Empirical counts over the super-constellation from hard transmissions.

    Feeds ``trials`` fresh source rows through the trained transmitter; each
    row contributes n symbols. Rows come back as (i, q, count) over the
    M1*M2 product grid (or the M-point grid for the baseline transmitter).
    """
    if trials < 1:
        raise ContractError(f"need trials >= 1, got {trials}")
    if rng is None:
        rng = np.random.default_rng(_streams(cfg)["hist"])
    spec = cfg.hier_spec()
    x, _, _ = to_arrays(generate(spec, trials, rng.integers(0, 2**63 - 1)))
    xt = Tensor(x)
    gc = GumbelConfig(cfg.tau, True)

    def hard_indices(mod: Modulator, feats) -> np.ndarray:
        dist = mod.symbol_logits(feats)
        oh = gumbel_softmax_sample(dist, gc, rng)
        idx = oh.data.argmax(axis=-1)  # [B, n, 2]
        side = len(mod.constellation.levels)
        return idx[..., 0] * side + idx[..., 1]  # I-major point index

    if isinstance(params, DeepscmParams):
        u1 = params.enc1(xt)
        inner = hard_indices(params.mod1, u1)
        u2 = params.enc2(xt)
        r = params.dec.residual(u1, u2)
        outer = hard_indices(params.mod2, batch_standardize(r) if trials > 1 else r)
        sc = superpose(params.c1, params.c2, cfg.paf, cfg.power)
        combined = inner * params.c2.order + outer
        points = sc.points
    else:
        combined = hard_indices(params.mod, params.enc(xt))
        points = np.sqrt(cfg.power) * params.c.points
    counts = np.bincount(combined.ravel(), minlength=len(points))
    return [{"i": float(points[j].real), "q": float(points[j].imag),
             "count": int(counts[j])} for j in range(len(points))]
