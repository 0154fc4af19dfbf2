"""Monte-Carlo experiment harness.

Two experiments over seeded independent runs of the DS-CDMA scenario:

* ``run_mse_vs_rank`` sweeps the decomposition rank and records the
  steady-state squared error of every algorithm (mean over the final 20%
  of the packet, error measured against the true transmitted symbols).
* ``run_ber_vs_symbols`` records the bit error rate at every symbol
  index of the packet.

Adaptation is data-aided for the first ``training`` symbols of each
packet and decision-directed afterwards.  Results aggregate across runs
into ``CurvePoint`` rows that serialize to CSV with the schema
``x,algo,metric,mean,stderr,runs,seed``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np

from . import baselines, simulator, switched_rls

__all__ = [
    "ExperimentConfig",
    "ConfigError",
    "CurvePoint",
    "load_config",
    "parse_config_text",
    "run_mse_vs_rank",
    "run_ber_vs_symbols",
    "emit_csv",
    "read_csv",
    "KNOWN_ALGOS",
]

KNOWN_ALGOS = ("glrds", "full_rls", "eig", "mmse_oracle")
CSV_COLUMNS = ("x", "algo", "metric", "mean", "stderr", "runs", "seed")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    # geometry
    users: int = 8
    spreading_gain: int = 16
    antennas: int = 3
    channel_taps: int = 10
    # adaptive scheme
    rank: int = 4
    ranks: tuple = (1, 2, 3, 4, 5, 6, 7, 8)
    basis_len: int = 3
    branches: int = 4
    iterations: int = 2
    forgetting: float = 0.999
    init_scale: float = 0.01
    # scenario
    snr_db: float = 12.0
    jammer_offset_db: float = 20.0
    jammer_doa: bool = False
    power_std_db: float = 1.5
    doppler: float = 1e-4
    isi: bool = False
    # protocol
    packet: int = 1500
    training: int = 200
    runs: int = 20
    seed: int = 1
    algos: tuple = ("glrds", "full_rls", "eig", "mmse_oracle")
    eig_refit: int = 50

    def geometry(self):
        return simulator.SystemGeometry(
            users=self.users, spreading_gain=self.spreading_gain,
            antennas=self.antennas, channel_taps=self.channel_taps,
        )

    def validate(self):
        geo = self.geometry()
        M = geo.samples_per_symbol
        if self.channel_taps < 5:
            raise ConfigError(
                "channel_taps must be >= 5 to fit three paths spaced up to 2 chips")
        if self.training > self.packet:
            raise ConfigError(
                f"training ({self.training}) exceeds packet length ({self.packet})")
        if self.runs < 1:
            raise ConfigError("runs must be >= 1")
        if self.eig_refit < 1:
            raise ConfigError("eig_refit must be >= 1")
        for algo in self.algos:
            if algo not in KNOWN_ALGOS:
                raise ConfigError(
                    f"unknown algorithm {algo!r}; known: {', '.join(KNOWN_ALGOS)}")
        for D in (*self.ranks, self.rank):
            if not 1 <= D <= M:
                raise ConfigError(f"rank {D} outside 1..{M}")
            # every branch placement must land on the vector
            top = (D - 1) * (M // D) + (self.branches - 1)
            if top >= M:
                raise ConfigError(
                    f"rank {D} with {self.branches} branches places a basis "
                    f"filter at row {top} >= M={M}")
        return self


_BOOL_WORDS = {"on": True, "true": True, "yes": True, "1": True,
               "off": False, "false": False, "no": False, "0": False}


def _parse_value(name, kind, raw):
    raw = raw.strip()
    try:
        if kind is bool:
            if raw.lower() not in _BOOL_WORDS:
                raise ValueError(f"expected on/off, got {raw!r}")
            return _BOOL_WORDS[raw.lower()]
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        if kind is tuple:
            items = [s.strip() for s in raw.split(",") if s.strip()]
            if name in ("ranks",):
                return tuple(int(s) for s in items)
            return tuple(items)
    except ValueError as exc:
        raise ConfigError(f"bad value for {name}: {exc}") from None
    raise ConfigError(f"unsupported config field type for {name}")


def parse_config_text(text):
    """Parse ``key = value`` lines into an ExperimentConfig.

    Blank lines and ``#`` comments are ignored; unknown keys are errors.
    """
    types = {f.name: (type(f.default) if not isinstance(f.default, tuple) else tuple)
             for f in fields(ExperimentConfig)}
    overrides = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = (part.strip() for part in body.split("=", 1))
        if key not in types:
            raise ConfigError(f"line {lineno}: unknown config key {key!r}")
        if key in overrides:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        overrides[key] = _parse_value(key, types[key], raw)
    return ExperimentConfig(**overrides).validate()


def load_config(path):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config_text(fh.read())


@dataclass(frozen=True)
class CurvePoint:
    x: float
    algo: str
    metric: str
    mean: float
    stderr: float
    runs: int
    seed: int


# --- per-run machinery -------------------------------------------------------


@dataclass
class _Packet:
    received: np.ndarray   # (P, M)
    symbols: np.ndarray    # (P, K)
    bits: np.ndarray       # (P, K, 2)


def _make_packet(config, run_index):
    """Scenario and received stream of one run; identical for every
    algorithm and rank."""
    rng = np.random.default_rng([config.seed, run_index])
    geo = config.geometry()
    scenario = simulator.make_scenario(
        geo, rng, snr_db=config.snr_db, power_std_db=config.power_std_db,
        jammer_offset_db=config.jammer_offset_db,
        jammer_doa_structured=config.jammer_doa,
        doppler=config.doppler, isi=config.isi,
    )
    bits = rng.integers(0, 2, size=(config.packet, geo.users, 2))
    symbols = simulator.qpsk_modulate(bits)
    received = simulator.simulate_packet(scenario, symbols)
    return _Packet(received=received, symbols=symbols, bits=bits)


def _run_glrds(packet, config, rank):
    state = switched_rls.init_state(
        config.geometry().samples_per_symbol, rank, config.users,
        basis_len=config.basis_len, num_branches=config.branches,
        forgetting=config.forgetting, iterations=config.iterations,
        init_scale=config.init_scale,
    )
    P = packet.received.shape[0]
    errors = np.empty(P)
    decided = np.empty_like(packet.symbols)
    for i in range(P):
        training = i < config.training
        out = switched_rls.step(
            state, packet.received[i],
            x=packet.symbols[i] if training else None,
            decide=simulator.qpsk_decide,
        )
        resid = packet.symbols[i] - out.estimate
        errors[i] = np.vdot(resid, resid).real
        decided[i] = simulator.qpsk_decide(out.estimate)
    return errors, decided


def _run_full_rls(packet, config):
    geo = config.geometry()
    state = baselines.init_full_rank_rls(
        geo.samples_per_symbol, geo.users,
        forgetting=config.forgetting, init_scale=config.init_scale,
    )
    P = packet.received.shape[0]
    errors = np.empty(P)
    decided = np.empty_like(packet.symbols)
    for i in range(P):
        training = i < config.training
        est = baselines.full_rank_rls_step(
            state, packet.received[i],
            x=packet.symbols[i] if training else None,
            decide=simulator.qpsk_decide,
        )
        resid = packet.symbols[i] - est
        errors[i] = np.vdot(resid, resid).real
        decided[i] = simulator.qpsk_decide(est)
    return errors, decided


def _run_eig(packet, config, rank):
    """Periodically refit the dominant-subspace filter on the sample
    covariances of the data seen so far (decisions stand in for the
    desired signal after training)."""
    P, K = packet.symbols.shape
    M = packet.received.shape[1]
    errors = np.empty(P)
    decided = np.empty_like(packet.symbols)
    W = None
    S = None
    targets = np.zeros((P, K), dtype=np.complex128)
    min_fit = max(2 * rank, 8)
    for i in range(P):
        r = packet.received[i]
        if S is None:
            est = np.zeros(K, dtype=np.complex128)
        else:
            est = W.conj().T @ (S.conj().T @ r)
        decided[i] = simulator.qpsk_decide(est)
        targets[i] = packet.symbols[i] if i < config.training else decided[i]
        resid = packet.symbols[i] - est
        errors[i] = np.vdot(resid, resid).real
        seen = i + 1
        if seen >= min_fit and (seen % config.eig_refit == 0 or seen == config.training):
            cov = baselines.estimate_covariances(packet.received[:seen], targets[:seen])
            try:
                S = baselines.eigen_subspace(cov.R, rank)
                W = baselines.optimal_reduced_filter(S, cov)
            except np.linalg.LinAlgError:
                S = W = None
    return errors, decided


def _oracle_mmse(packet, ranks):
    """Residual MSE of the dominant-subspace optimum per rank, from the
    whole packet's sample covariances with the true symbols."""
    cov = baselines.estimate_covariances(packet.received, packet.symbols)
    _, vecs = np.linalg.eigh(0.5 * (cov.R + cov.R.conj().T))
    vecs = vecs[:, ::-1]
    out = {}
    for D in ranks:
        S = vecs[:, :D]
        out[D] = baselines.mmse_value(S, cov)
    return out


def _steady_state(errors, packet_len):
    tail = errors[int(0.8 * packet_len):]
    return float(np.mean(tail))


def _mean_stderr(values):
    values = np.asarray(values, dtype=float)
    mean = float(np.mean(values))
    if values.size > 1:
        stderr = float(np.std(values, ddof=1) / math.sqrt(values.size))
    else:
        stderr = 0.0
    return mean, stderr


def run_mse_vs_rank(config, details=None):
    """Steady-state MSE of every configured algorithm at every rank.

    Returns CurvePoint rows with linear (``mse``) and decibel
    (``mse_db``) metrics.  Pass a dict as ``details`` to receive the
    per-run steady-state values keyed by (algo, rank).
    """
    config.validate()
    per_run = {}

    for run in range(config.runs):
        packet = _make_packet(config, run)
        if "full_rls" in config.algos:
            errors, _ = _run_full_rls(packet, config)
            val = _steady_state(errors, config.packet)
            for D in config.ranks:
                per_run.setdefault(("full_rls", D), []).append(val)
        if "mmse_oracle" in config.algos:
            for D, val in _oracle_mmse(packet, config.ranks).items():
                per_run.setdefault(("mmse_oracle", D), []).append(val)
        for D in config.ranks:
            if "glrds" in config.algos:
                errors, _ = _run_glrds(packet, config, D)
                per_run.setdefault(("glrds", D), []).append(
                    _steady_state(errors, config.packet))
            if "eig" in config.algos:
                errors, _ = _run_eig(packet, config, D)
                per_run.setdefault(("eig", D), []).append(
                    _steady_state(errors, config.packet))

    points = []
    for algo in config.algos:
        for D in config.ranks:
            values = per_run[(algo, D)]
            mean, stderr = _mean_stderr(values)
            points.append(CurvePoint(x=float(D), algo=algo, metric="mse",
                                     mean=mean, stderr=stderr,
                                     runs=config.runs, seed=config.seed))
            if mean > 0:
                db = 10.0 * math.log10(mean)
                db_err = 10.0 / math.log(10.0) * stderr / mean
            else:
                db, db_err = float("-inf"), 0.0
            points.append(CurvePoint(x=float(D), algo=algo, metric="mse_db",
                                     mean=db, stderr=db_err,
                                     runs=config.runs, seed=config.seed))
    if details is not None:
        details.update(per_run)
    return points


def run_ber_vs_symbols(config, details=None):
    """Bit error rate at every symbol index, averaged across users and
    runs.  The residual-MSE oracle has no decision path and is skipped.
    """
    config.validate()
    algos = [a for a in config.algos if a != "mmse_oracle"]
    P, K = config.packet, config.users
    per_run = {algo: np.empty((config.runs, P)) for algo in algos}

    for run in range(config.runs):
        packet = _make_packet(config, run)
        for algo in algos:
            if algo == "glrds":
                _, decided = _run_glrds(packet, config, config.rank)
            elif algo == "full_rls":
                _, decided = _run_full_rls(packet, config)
            else:
                _, decided = _run_eig(packet, config, config.rank)
            wrong = simulator.qpsk_bits(decided) != packet.bits
            per_run[algo][run] = wrong.reshape(P, -1).mean(axis=1)

    points = []
    for algo in algos:
        for i in range(P):
            mean, stderr = _mean_stderr(per_run[algo][:, i])
            points.append(CurvePoint(x=float(i), algo=algo, metric="ber",
                                     mean=mean, stderr=stderr,
                                     runs=config.runs, seed=config.seed))
    if details is not None:
        details.update(per_run)
    return points


# --- CSV ----------------------------------------------------------------------


def _fmt(value):
    if isinstance(value, float):
        return repr(value)
    return str(value)


def emit_csv(points, path, metadata=None):
    """Write CurvePoints as CSV.

    Optional ``metadata`` (str -> value) is recorded as ``# key=value``
    comment lines above the header, keys sorted, so result files are
    self-describing.  Output is deterministic: same points and metadata,
    same bytes.
    """
    lines = []
    for key in sorted(metadata or {}):
        lines.append(f"# {key}={_fmt(metadata[key])}")
    lines.append(",".join(CSV_COLUMNS))
    for pt in points:
        lines.append(",".join([
            _fmt(pt.x), pt.algo, pt.metric, _fmt(pt.mean), _fmt(pt.stderr),
            str(pt.runs), str(pt.seed),
        ]))
    text = "\n".join(lines) + "\n"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def read_csv(path):
    """Parse a file written by ``emit_csv`` back into CurvePoints."""
    points = []
    with open(path, "r", encoding="utf-8") as fh:
        rows = [ln.rstrip("\n") for ln in fh if not ln.startswith("#")]
    if not rows or rows[0] != ",".join(CSV_COLUMNS):
        raise ValueError(f"{path}: missing or unexpected header")
    for row in rows[1:]:
        if not row:
            continue
        x, algo, metric, mean, stderr, runs, seed = row.split(",")
        points.append(CurvePoint(x=float(x), algo=algo, metric=metric,
                                 mean=float(mean), stderr=float(stderr),
                                 runs=int(runs), seed=int(seed)))
    return points
