"""Network pools: train, measure, persist one JSON record per network, correlate, report.

A run directory looks like::

    <output_dir>/config.json        the config the pool was started with
    <output_dir>/records/net_0007.json
    <output_dir>/nets/net_0007.ckpt  trained parameters
    <output_dir>/nets/net_0007.pred  uint8 test-set predictions (ensemble agreement)
    <output_dir>/records.csv        aggregated view, rewritten after every stage

Records hold no timings outside their ``timings`` key, so two runs of the same
config on the same data agree byte for byte once that key is dropped.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from . import data_io, fcv, mlp, regions, sharpness, stats

SCHEMA_VERSION = 1
MASK64 = (1 << 64) - 1

SKIPPED = "skipped"      # disabled by the config
PENDING = "pending"      # stage not run yet
UNDEFINED = "undefined"  # measured, but no value exists (e.g. EA of an error-free net)
MARKERS = (SKIPPED, PENDING, UNDEFINED)

STAGES = ("train", "measure", "pairproxy", "agreement")
MEASURES = ("hessian_trace", "weight_l1", "weight_l2", "l1_count", "l2_count",
            "k_free", "free_params", "pair_proxy", "ea")
# unchanged by the function-preserving rescalings of reparam
INVARIANT = {"hessian_trace": False, "weight_l1": False, "weight_l2": False, "l1_count": True,
             "l2_count": True, "k_free": True, "free_params": True, "pair_proxy": True, "ea": True}
MIN_CORRELATE = 10

RECORD_COLUMNS = ("index", "seed", "status", "learning_rate", "epochs", "train_acc", "test_acc",
                  *MEASURES, "margin")
CORRELATION_COLUMNS = ("measure", "rho", "p_value", "n", "method", "invariant")
CROSS_COLUMNS = ("n_train", "n_small", "n_large", "acc_small", "acc_large", "delta_pp",
                 "welch_t", "welch_p", "hessian_small", "hessian_large")


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration."""


class DataError(RuntimeError):
    """Missing or malformed data, or an unusable run directory."""


class ReportError(RuntimeError):
    """Nothing to report."""


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def mix_seed(master_seed: int, index: int) -> int:
    """Per-network seed: ``splitmix64(splitmix64(master) ^ index)``, a 64-bit value."""
    if index < 0:
        raise ValueError("index must be nonnegative")
    return splitmix64(splitmix64(master_seed & MASK64) ^ (index & MASK64))


@dataclass
class ExperimentConfig:
    dataset: str = "mnist"
    widths: tuple = (64, 8)
    n_train: int = 250
    n_probe: int = 100
    n_test: int | None = None          # None: the whole official test set
    probe_source: str = "leftover"     # "leftover" training pool or "test" set
    n_networks: int = 100
    batch_size: int = 64
    lr_min: float = 0.01
    lr_max: float = 0.05
    max_epochs: int = 2000
    target_train_accuracy: float = 1.0
    min_train_accuracy: float | None = None  # filter applied by correlate/report
    margin_policy: str = "fixed"       # "fixed" or "adaptive"
    margin: float = 1e-3
    adaptive_factor: float = 0.5
    margin_sweep: tuple = (1e-4, 1e-3, 1e-2)
    measure_hessian: bool = True
    measure_regions: bool = True
    measure_pair_proxy: bool = True
    measure_ea: bool = True
    hessian_probes: int = sharpness.DEFAULT_PROBES
    hessian_seed: int = 0
    master_seed: int = 0
    split_seed: int | None = None      # None: master_seed
    output_dir: str = "runs/default"

    def __post_init__(self):
        self.widths = tuple(self.widths)
        self.margin_sweep = tuple(float(m) for m in self.margin_sweep)
        self.validate()

    def validate(self) -> None:
        def need(ok, msg):
            if not ok:
                raise ConfigError(msg)
        need(self.dataset in ("mnist", "fashion"), f"unknown dataset {self.dataset!r}")
        need(len(self.widths) == 2 and all(isinstance(w, int) and w >= 1 for w in self.widths),
             "widths must be two positive integers")
        need(self.n_networks >= 1, "n_networks must be at least 1")
        need(self.n_train >= 1 and self.n_probe >= 0, "n_train must be positive, n_probe nonnegative")
        need(self.n_test is None or self.n_test >= 1, "n_test must be positive")
        need(self.probe_source in ("leftover", "test"), "probe_source must be 'leftover' or 'test'")
        need(self.batch_size >= 1 and self.max_epochs >= 1, "batch_size and max_epochs must be positive")
        need(0 < self.lr_min <= self.lr_max, "need 0 < lr_min <= lr_max")
        need(0 < self.target_train_accuracy <= 1, "target_train_accuracy must lie in (0, 1]")
        need(self.min_train_accuracy is None or 0 <= self.min_train_accuracy <= 1,
             "min_train_accuracy must lie in [0, 1]")
        need(self.margin_policy in ("fixed", "adaptive"), "margin_policy must be 'fixed' or 'adaptive'")
        need(self.margin > 0 and 0 < self.adaptive_factor < 1, "margin > 0 and 0 < adaptive_factor < 1")
        need(all(m > 0 for m in self.margin_sweep), "sweep margins must be positive")
        need(self.hessian_probes >= 1, "hessian_probes must be positive")
        need(self.master_seed >= 0 and (self.split_seed is None or self.split_seed >= 0),
             "seeds must be nonnegative")

    def to_json(self) -> dict:
        d = asdict(self)
        d["widths"] = list(self.widths)
        d["margin_sweep"] = list(self.margin_sweep)
        return {"schema_version": SCHEMA_VERSION, **d}

    @classmethod
    def from_json(cls, obj: dict) -> "ExperimentConfig":
        obj = dict(obj)
        version = obj.pop("schema_version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise ConfigError(f"config schema_version {version}, this build reads {SCHEMA_VERSION}")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(obj) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        try:
            return cls(**obj)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            obj = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"{path}: {exc}") from None
        if not isinstance(obj, dict):
            raise ConfigError(f"{path}: expected a JSON object")
        return cls.from_json(obj)

    def replace(self, **changes) -> "ExperimentConfig":
        return ExperimentConfig.from_json({**self.to_json(), **changes})

    def identity(self) -> dict:
        """Fields that determine record contents (the output location does not)."""
        d = self.to_json()
        for k in ("output_dir", "min_train_accuracy"):
            d.pop(k)
        return d


def learning_rate(config: ExperimentConfig, seed: int) -> float:
    """Uniform draw from ``[lr_min, lr_max]`` on a stream of its own."""
    if config.lr_min == config.lr_max:
        return float(config.lr_min)
    u = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, 1]))).random()
    return float(config.lr_min + (config.lr_max - config.lr_min) * u)


# ---------------------------------------------------------------- data

@dataclass(eq=False)
class PoolData:
    """Inputs shared by every network of a pool."""

    train_x: np.ndarray
    train_y: np.ndarray
    probe_x: np.ndarray
    test_x: np.ndarray
    test_y: np.ndarray


_CORPORA: dict = {}


def _corpus(name: str, root):
    key = (name, str(root))
    if key not in _CORPORA:
        try:
            _CORPORA[key] = data_io.load_corpus(name, root)
        except (OSError, data_io.FormatError) as exc:
            raise DataError(str(exc)) from exc
    return _CORPORA[key]


def pool_data(config: ExperimentConfig, corpus) -> PoolData:
    seed = config.master_seed if config.split_seed is None else config.split_seed
    n_test_pool = len(corpus.test)
    try:
        if config.probe_source == "leftover":
            split = data_io.make_split(corpus.train, config.n_train, config.n_probe, seed, n_test_pool)
            probe_x, _ = corpus.train.subset(split.probe_indices)
            test_idx = split.test_indices
        else:
            split = data_io.make_split(corpus.train, config.n_train, 0, seed, None)
            perm = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, 2]))).permutation(n_test_pool)
            if config.n_probe >= n_test_pool:
                raise ValueError(f"cannot draw {config.n_probe} probes from {n_test_pool} test points")
            probe_x, _ = corpus.test.subset(perm[:config.n_probe])
            test_idx = np.sort(perm[config.n_probe:])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if config.n_test is not None:
        if config.n_test > len(test_idx):
            raise ConfigError(f"n_test={config.n_test} exceeds the {len(test_idx)} available test points")
        test_idx = test_idx[:config.n_test]
    train_x, train_y = corpus.train.subset(split.train_indices)
    test_x, test_y = corpus.test.subset(test_idx)
    return PoolData(train_x, train_y, probe_x, test_x, test_y)


# ---------------------------------------------------------------- records

def _net_name(index: int) -> str:
    return f"net_{index:04d}"


def empty_record(config: ExperimentConfig, index: int) -> dict:
    seed = mix_seed(config.master_seed, index)
    rec = {"index": index, "seed": seed, "status": PENDING, "error": None,
           "learning_rate": learning_rate(config, seed), "epochs": PENDING,
           "train_acc": PENDING, "test_acc": PENDING,
           "margin": PENDING, "max_margin": PENDING, "pair_proxy_sweep": PENDING,
           "lp": PENDING, "stages": [], "timings": {}}
    enabled = {"hessian_trace": config.measure_hessian, "weight_l1": True, "weight_l2": True,
               "l1_count": config.measure_regions, "l2_count": config.measure_regions,
               "k_free": config.measure_regions, "free_params": config.measure_regions,
               "pair_proxy": config.measure_pair_proxy,
               "ea": config.measure_ea and config.n_networks > 1}
    for m in MEASURES:
        rec[m] = PENDING if enabled[m] else SKIPPED
    if not config.measure_pair_proxy:
        rec["margin"] = rec["max_margin"] = rec["pair_proxy_sweep"] = rec["lp"] = SKIPPED
    return rec


def record_bytes(record: dict) -> bytes:
    return (json.dumps(record, sort_keys=True, indent=1) + "\n").encode()


def strip_timings(record: dict) -> dict:
    return {k: v for k, v in record.items() if k != "timings"}


def _atomic_write(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix="." + path.name)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class RunStore:
    """The run directory; only the owning process writes to it."""

    def __init__(self, root):
        self.root = Path(root)
        self.records_dir = self.root / "records"
        self.nets_dir = self.root / "nets"

    def record_path(self, index: int) -> Path:
        return self.records_dir / (_net_name(index) + ".json")

    def ckpt_path(self, index: int) -> Path:
        return self.nets_dir / (_net_name(index) + ".ckpt")

    def pred_path(self, index: int) -> Path:
        return self.nets_dir / (_net_name(index) + ".pred")

    def bind(self, config: ExperimentConfig) -> None:
        """Create the run directory, or check that an existing one belongs to ``config``."""
        path = self.root / "config.json"
        if path.exists():
            try:
                old = ExperimentConfig.from_json(json.loads(path.read_text()))
            except (json.JSONDecodeError, ConfigError) as exc:
                raise DataError(f"{path}: {exc}") from None
            if old.identity() != config.identity():
                raise ConfigError(f"{self.root} holds a run with a different config")
            return
        _atomic_write(path, (json.dumps(config.to_json(), sort_keys=True, indent=1) + "\n").encode())

    def load(self, index: int) -> dict | None:
        path = self.record_path(index)
        if not path.exists():
            return None
        try:
            return json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: {exc}") from None

    def save(self, record: dict) -> None:
        _atomic_write(self.record_path(record["index"]), record_bytes(record))

    def records(self) -> list[dict]:
        if not self.records_dir.exists():
            return []
        out = []
        for path in sorted(self.records_dir.glob("net_*.json")):
            try:
                out.append(json.loads(path.read_text()))
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}: {exc}") from None
        return sorted(out, key=lambda r: r["index"])


def load_records(run_dir) -> list[dict]:
    store = RunStore(run_dir)
    if not store.root.exists():
        raise DataError(f"{store.root}: no such run directory")
    return store.records()


# ---------------------------------------------------------------- per-network work

def _train_stage(config, data, rec, paths):
    tc = mlp.TrainConfig(widths=config.widths, batch_size=config.batch_size,
                         learning_rate=rec["learning_rate"], max_epochs=config.max_epochs,
                         target_train_accuracy=config.target_train_accuracy, seed=rec["seed"])
    try:
        params, log = mlp.train(tc, data.train_x, data.train_y)
    except (mlp.TrainingError, mlp.NumericError) as exc:
        rec["status"] = "diverged"
        rec["error"] = str(exc)
        rec["epochs"] = getattr(exc, "epoch", UNDEFINED)
        for k in ("train_acc", "test_acc", *MEASURES, "margin", "max_margin", "pair_proxy_sweep", "lp"):
            if rec[k] == PENDING:
                rec[k] = UNDEFINED
        return None
    params.save(paths["ckpt"])
    pred = mlp.predict(params, data.test_x).astype(np.uint8)
    _atomic_write(Path(paths["pred"]), pred.tobytes())
    rec["status"] = "ok"
    rec["epochs"] = log.epochs
    rec["train_acc"] = float(log.final_train_accuracy)
    rec["test_acc"] = float(np.mean(pred == data.test_y))
    return params


def _measure_stage(config, data, rec, params):
    rec["weight_l1"], rec["weight_l2"] = sharpness.weight_norms(params)
    if config.measure_hessian:
        rec["hessian_trace"] = sharpness.hessian_trace(
            params, (data.train_x, data.train_y), config.hessian_probes, config.hessian_seed).value
    if config.measure_regions:
        table = regions.region_table(params, data.train_x, data.test_x)
        rec["l1_count"] = regions.pattern_count(params, data.test_x, 1)
        rec["l2_count"] = regions.pattern_count(params, data.test_x, 2)
        rec["k_free"] = table.k_free
        rec["free_params"] = regions.free_parameters(table, params.W2.shape[0])


def _pairproxy_stage(config, data, rec, params):
    fm = fcv.FeatureMatrix(mlp.features(params, data.train_x), data.train_y,
                           mlp.features(params, data.probe_x), params.W3.shape[0])
    try:
        eps_star = fcv.max_margin(fm)
    except fcv.DegeneratePolicyError:
        eps_star = 0.0
    rec["max_margin"] = eps_star
    if eps_star <= 0:
        for k in ("pair_proxy", "margin", "pair_proxy_sweep", "lp"):
            rec[k] = UNDEFINED
        return
    margin = config.adaptive_factor * eps_star if config.margin_policy == "adaptive" else config.margin
    res = fcv.pair_proxy(fm, margin, known_witness=(params.W3, params.b3))
    rec["margin"] = margin
    rec["pair_proxy"] = res.total
    # strict feasibility is scale free, so the count cannot depend on the margin;
    # the sweep records it per margin together with whether the margin is below eps*
    rec["pair_proxy_sweep"] = [{"margin": m, "pair_proxy": res.total, "below_max_margin": m < eps_star}
                               for m in config.margin_sweep]
    rec["lp"] = {"n_lps": res.n_lps, "n_shortcut": res.n_shortcut, "pivots": res.pivots}


def process_network(config_json: dict, data_root, rec: dict, stages, paths: dict) -> dict:
    """Run the requested per-network stages on ``rec``; safe to call in a worker process."""
    config = ExperimentConfig.from_json(config_json)
    data = pool_data(config, _corpus(config.dataset, data_root))
    rec = json.loads(json.dumps(rec))
    params = None
    if "train" in stages and "train" not in rec["stages"]:
        t0 = time.perf_counter()
        params = _train_stage(config, data, rec, paths)
        rec["stages"].append("train")
        rec["timings"]["train"] = time.perf_counter() - t0
    if rec["status"] != "ok":
        return rec
    for stage, fn in (("measure", _measure_stage), ("pairproxy", _pairproxy_stage)):
        if stage not in stages or stage in rec["stages"]:
            continue
        if stage == "pairproxy" and not config.measure_pair_proxy:
            rec["stages"].append(stage)
            continue
        if params is None:
            params = mlp.MlpParams.load(paths["ckpt"])
        t0 = time.perf_counter()
        fn(config, data, rec, params)
        rec["stages"].append(stage)
        rec["timings"][stage] = time.perf_counter() - t0
    rec["stages"] = [s for s in STAGES if s in rec["stages"]]
    return rec


def _agreement(config: ExperimentConfig, store: RunStore, records: list[dict], test_y) -> None:
    ok = [r for r in records if r["status"] == "ok"]
    preds = {r["index"]: np.frombuffer(store.pred_path(r["index"]).read_bytes(), dtype=np.uint8)
             for r in ok}
    for r in records:
        if "agreement" in r["stages"]:
            continue
        if r["ea"] != SKIPPED:
            if r["status"] != "ok":
                r["ea"] = UNDEFINED
            else:
                peers = [preds[i] for i in sorted(preds) if i != r["index"]]
                ea = regions.agreement_from_predictions(preds[r["index"]], peers, test_y) if peers else None
                r["ea"] = UNDEFINED if ea is None else ea
        r["stages"] = [s for s in STAGES if s in r["stages"] or s == "agreement"]
        store.save(r)


def run_pool(config: ExperimentConfig, data_root=None, stages=STAGES, workers: int = 1,
             progress=None) -> list[dict]:
    """Train and measure ``config.n_networks`` networks; finished stages are skipped on rerun.

    Workers only compute; this process is the single writer of the run directory.
    Ensemble agreement needs every network's predictions, so it runs last, over the
    whole pool, once all networks have trained.
    """
    stages = tuple(s for s in STAGES if s in stages)
    unknown = set(stages) - set(STAGES)
    if unknown:
        raise ConfigError(f"unknown stages {sorted(unknown)}")
    store = RunStore(config.output_dir)
    store.bind(config)
    try:
        data_root = str(data_io.data_dir(data_root))
    except FileNotFoundError as exc:
        raise DataError(str(exc)) from None
    corpus = _corpus(config.dataset, data_root)
    data = pool_data(config, corpus)

    records = {}
    todo = []
    cfg_json = config.to_json()
    per_net = tuple(s for s in stages if s != "agreement")
    for i in range(config.n_networks):
        rec = store.load(i) or empty_record(config, i)
        records[i] = rec
        missing = [s for s in per_net if s not in rec["stages"]]
        if missing and rec["status"] != "diverged":
            todo.append(i)

    def paths(i):
        return {"ckpt": str(store.ckpt_path(i)), "pred": str(store.pred_path(i))}

    store.nets_dir.mkdir(parents=True, exist_ok=True)
    if todo:
        if workers <= 1:
            results = (process_network(cfg_json, data_root, records[i], per_net, paths(i)) for i in todo)
            for rec in results:
                records[rec["index"]] = rec
                store.save(rec)
                if progress:
                    progress(rec)
        else:
            with ProcessPoolExecutor(max_workers=workers) as ex:
                futures = [ex.submit(process_network, cfg_json, data_root, records[i], per_net, paths(i))
                           for i in todo]
                for fut in futures:
                    rec = fut.result()
                    records[rec["index"]] = rec
                    store.save(rec)
                    if progress:
                        progress(rec)

    ordered = [records[i] for i in range(config.n_networks)]
    if "agreement" in stages and all("train" in r["stages"] for r in ordered):
        _agreement(config, store, ordered, data.test_y)
    write_records_csv(ordered, store.root / "records.csv")
    return ordered


# ---------------------------------------------------------------- tables

def _cell(v) -> str:
    if v is None:
        return UNDEFINED
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def records_csv(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RECORD_COLUMNS)
    for r in sorted(records, key=lambda r: r["index"]):
        w.writerow([_cell(r.get(c, UNDEFINED)) for c in RECORD_COLUMNS])
    return buf.getvalue()


def write_records_csv(records, path) -> None:
    _atomic_write(Path(path), records_csv(records).encode())


def filter_records(records, min_train_accuracy=None) -> list[dict]:
    out = [r for r in records if r.get("status") == "ok"]
    if min_train_accuracy is not None:
        out = [r for r in out if r["train_acc"] >= min_train_accuracy]
    return out


def _numeric(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


@dataclass
class CorrelationRow:
    measure: str
    result: stats.CorrelationResult | None
    n: int
    invariant: bool
    reason: str = ""

    def cells(self) -> list[str]:
        if self.result is None:
            return [self.measure, UNDEFINED, UNDEFINED, str(self.n), UNDEFINED, _cell(self.invariant)]
        r = self.result
        return [self.measure, repr(r.rho), repr(r.p_value), str(r.n), r.method, _cell(self.invariant)]

    def to_json(self) -> dict:
        out = {"measure": self.measure, "n": self.n, "invariant": self.invariant}
        if self.result is None:
            out.update(rho=UNDEFINED, p_value=UNDEFINED, reason=self.reason)
        else:
            out.update(self.result.to_json())
        return out


def correlate(records, measure: str, method: str = stats.T_APPROX, seed: int = 0) -> CorrelationRow:
    """Spearman of ``measure`` against test accuracy over records that carry a value.

    A constant column gives an undefined row rather than an error.
    """
    if measure not in MEASURES:
        raise ValueError(f"unknown measure {measure!r}")
    rows = [r for r in records if _numeric(r.get(measure)) and _numeric(r.get("test_acc"))]
    if len(rows) < MIN_CORRELATE:
        raise ValueError(f"need at least {MIN_CORRELATE} records with {measure}, have {len(rows)}")
    xs = [float(r[measure]) for r in rows]
    ys = [float(r["test_acc"]) for r in rows]
    try:
        res = stats.spearman(xs, ys, method=method, seed=seed)
    except stats.UndefinedCorrelation as exc:
        return CorrelationRow(measure, None, len(rows), INVARIANT[measure], str(exc))
    return CorrelationRow(measure, res, len(rows), INVARIANT[measure])


def correlation_table(records, measures=MEASURES, method: str = stats.T_APPROX) -> list[CorrelationRow]:
    """One row per measure with enough values; measures with fewer than the minimum are left out."""
    out = []
    for m in measures:
        have = sum(1 for r in records if _numeric(r.get(m)) and _numeric(r.get("test_acc")))
        if have >= MIN_CORRELATE:
            out.append(correlate(records, m, method))
    return out


def correlation_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CORRELATION_COLUMNS)
    for row in rows:
        w.writerow(row.cells())
    return buf.getvalue()


@dataclass
class CrossRegimeRow:
    n_train: int
    n_small: int
    n_large: int
    acc_small: float
    acc_large: float
    delta_pp: float
    welch_t: float
    welch_p: float
    hessian_small: float
    hessian_large: float

    def cells(self) -> list[str]:
        return [_cell(getattr(self, c)) for c in CROSS_COLUMNS]


def cross_regime(small, large, n_train: int | None = None) -> CrossRegimeRow:
    """Mean test accuracy per regime, large minus small in percentage points, Welch p, mean Hessian."""
    small = [r for r in small if r.get("status") == "ok"]
    large = [r for r in large if r.get("status") == "ok"]
    if len(small) < 2 or len(large) < 2:
        raise ValueError("each regime needs at least two trained networks")
    a_s = np.array([r["test_acc"] for r in small])
    a_l = np.array([r["test_acc"] for r in large])
    try:
        t, p = stats.welch(a_l, a_s)
    except stats.DegenerateVariance:
        t, p = (0.0, 1.0) if a_s.mean() == a_l.mean() else (math.copysign(math.inf, a_l.mean() - a_s.mean()), 0.0)

    def mean_h(rs):
        hs = [r["hessian_trace"] for r in rs if _numeric(r.get("hessian_trace"))]
        return float(np.mean(hs)) if hs else math.nan
    return CrossRegimeRow(int(n_train if n_train is not None else -1), len(small), len(large),
                          float(a_s.mean()), float(a_l.mean()), float(100.0 * (a_l.mean() - a_s.mean())),
                          float(t), float(p), mean_h(small), mean_h(large))


def cross_regime_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CROSS_COLUMNS)
    for row in rows:
        w.writerow(row.cells())
    return buf.getvalue()


def regime_configs(base: ExperimentConfig, n_train: int, n_networks: int = 10):
    """Small-batch (bs 64, lr 0.01-0.05) and full-batch (bs n, lr 0.2-0.5) configs on 784-256-128-10."""
    root = Path(base.output_dir)
    common = dict(widths=[256, 128], n_train=n_train, n_networks=n_networks, measure_pair_proxy=False,
                  measure_regions=False, measure_ea=False)
    small = base.replace(**common, batch_size=64, lr_min=0.01, lr_max=0.05,
                         output_dir=str(root / f"n{n_train}_small"))
    large = base.replace(**common, batch_size=n_train, lr_min=0.2, lr_max=0.5,
                         output_dir=str(root / f"n{n_train}_large"))
    return small, large


# ---------------------------------------------------------------- report

def _plot_csv(records, measure) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("index", "x", "y"))
    for r in sorted(records, key=lambda r: r["index"]):
        if _numeric(r.get(measure)):
            w.writerow((r["index"], _cell(float(r[measure])), _cell(float(r["test_acc"]))))
    return buf.getvalue()


def report(records, out_dir, min_train_accuracy=None, method: str = stats.T_APPROX) -> dict:
    """Write ``records.csv``, ``correlations.csv``, ``summary.json`` and ``plot_<measure>.csv``.

    Everything is computed before the first byte is written, so a failure leaves
    no partial output.
    """
    records = list(records)
    if not records:
        raise ReportError("no records to report")
    kept = filter_records(records, min_train_accuracy)
    if not kept:
        raise ReportError("no trained networks pass the filter")
    table = correlation_table(kept, method=method)
    files = {"records.csv": records_csv(kept), "correlations.csv": correlation_csv(table)}
    plotted = [m for m in MEASURES if any(_numeric(r.get(m)) for r in kept)]
    for m in plotted:
        files[f"plot_{m}.csv"] = _plot_csv(kept, m)
    summary = {"n_records": len(records), "n_used": len(kept), "min_train_accuracy": min_train_accuracy,
               "mean_test_acc": float(np.mean([r["test_acc"] for r in kept])),
               "correlations": [row.to_json() for row in table],
               "plot_files": [f"plot_{m}.csv" for m in plotted]}
    files["summary.json"] = json.dumps(summary, sort_keys=True, indent=1) + "\n"
    out = Path(out_dir)
    staged = []
    try:
        out.mkdir(parents=True, exist_ok=True)
        for name, text in files.items():
            fd, tmp = tempfile.mkstemp(dir=out, prefix=f".{name}")
            staged.append((tmp, out / name))
            with os.fdopen(fd, "w") as fh:
                fh.write(text)
    except OSError as exc:
        for tmp, _ in staged:
            if os.path.exists(tmp):
                os.unlink(tmp)
        raise OSError(f"{out}: {exc}") from exc
    for tmp, dest in staged:
        os.replace(tmp, dest)
    return summary
