"""Command-line front end.

Configuration is a flat ``key = value`` file (``--config``) with command-line
overrides (``--K 5``, ``--eta-grid 0.5,1,2`` or ``--set key=value``).  Every
CSV starts with a ``# config:`` block echoing the resolved configuration, and
such a file can itself be passed back as ``--config`` to repeat the run.

Exit codes: 0 success, 2 configuration error, 3 numerical error,
4 simulation failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import io
import sys
from dataclasses import dataclass, field, fields

import numpy as np

from . import __version__
from .analytics import sf_averages, write_averages_csv
from .bf import solve_bf, stage_km1_closed_form, write_surface_csv
from .errors import ConfigError, GeofwdError
from .geometry import HopContext, build_progress_model
from .netsim.network import write_network_csv
from .netsim.onehop import MIN_TRIALS
from .netsim.sweep import E2EPoint, OnehopPoint, network_for, sweep, write_rows
from .rng import SEED_MAX
from .sf import calibrate_threshold, solve_alpha

COMMANDS = ("solve-bf", "solve-alpha", "onehop", "e2e", "analytics", "sweep")
CONFIG_PREFIX = "config: "


@dataclass
class RunConfig:
    command: str = "analytics"
    K: int = 5
    L_i: float = 10.0
    eta: float = 2.0
    alpha: float | None = None
    gamma: float | None = None
    policy: str = "SF"
    trials: int = 100_000
    transfers: int = 1000
    L: float = 10.0
    lam: float = field(default=5.0, metadata={"key": "lambda"})
    r_c: float = 1.0
    T: float = 1.0
    t_I: float = 0.005
    t_D: float = 0.03
    n_grid: int = 1024
    n_w: int = 100
    n_b: int = 100
    K_grid: str | None = None
    eta_grid: str | None = None
    alpha_grid: str | None = None
    gamma_grid: str | None = None
    kind: str = "onehop"
    max_retries: int = 1000
    seed: int = 0
    # not echoed: neither may change the output bytes
    jobs: int = field(default=1, metadata={"echo": False})
    out: str = field(default="-", metadata={"echo": False})
    network_out: str | None = field(default=None, metadata={"echo": False})


def _key(f: dataclasses.Field) -> str:
    return f.metadata.get("key", f.name)


_FIELDS = {_key(f): f for f in fields(RunConfig)}


def _convert(f: dataclasses.Field, raw: str):
    kind = f.type if isinstance(f.type, str) else f.type.__name__
    raw = raw.strip()
    if "None" in kind and raw.lower() in ("", "none"):
        return None
    try:
        if kind.startswith("int"):
            return int(raw)
        if kind.startswith("float"):
            return float(raw)
    except ValueError:
        raise ConfigError(f"{_key(f)}: cannot parse {raw!r}") from None
    return raw


def parse_config_text(text: str) -> dict[str, str]:
    """Parse ``key = value`` lines.

    Lines of the form ``# config: key=value`` are read as settings too, so a
    CSV produced by this tool doubles as its own config file; when such lines
    are present every other line is ignored.
    """
    lines = text.splitlines()
    echoed = [ln.strip()[1:].strip()[len(CONFIG_PREFIX):] for ln in lines
              if ln.strip().startswith("#") and ln.strip()[1:].strip().startswith(CONFIG_PREFIX)]
    body = echoed if echoed else [ln for ln in lines if not ln.strip().startswith("#")]
    out = {}
    for n, ln in enumerate(body, 1):
        if not ln.strip():
            continue
        key, sep, val = ln.partition("=")
        if not sep:
            raise ConfigError(f"config line {n}: expected key=value, got {ln!r}")
        out[key.strip()] = val.strip()
    return out


def build_config(settings: dict[str, str]) -> RunConfig:
    cfg = RunConfig()
    for key, raw in settings.items():
        f = _FIELDS.get(key)
        if f is None:
            raise ConfigError(f"unknown config key {key!r}")
        setattr(cfg, f.name, _convert(f, raw))
    validate(cfg)
    return cfg


def parse_grid(spec: str | None, default=None) -> list[float]:
    """``a:b:step`` (inclusive of b) or a comma list."""
    if spec is None:
        return list(default) if default is not None else []
    spec = spec.strip()
    if not spec:
        return []
    try:
        if ":" in spec:
            a, b, step = (float(x) for x in spec.split(":"))
            if step <= 0 or b < a:
                raise ConfigError(f"bad grid {spec!r}: need step > 0 and start <= stop")
            n = int(np.floor((b - a) / step + 1e-9)) + 1
            return [round(a + i * step, 12) for i in range(n)]
        return [float(x) for x in spec.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"cannot parse grid {spec!r}") from None


def _policies(cfg: RunConfig) -> list[str]:
    return [p.strip().upper() for p in cfg.policy.split(",") if p.strip()]


def validate(cfg: RunConfig) -> None:
    def need(ok: bool, msg: str) -> None:
        if not ok:
            raise ConfigError(msg)

    need(cfg.command in COMMANDS, f"command must be one of {COMMANDS}")
    need(cfg.kind in ("onehop", "e2e"), "kind must be onehop or e2e")
    need(cfg.K >= 1, "K must be >= 1")
    need(cfg.L_i > cfg.r_c, "L_i must exceed r_c (a relay, not a sink neighbor)")
    need(cfg.eta > 0, "eta must be positive")
    need(cfg.alpha is None or 0 <= cfg.alpha <= 1, "alpha must lie in [0, 1]")
    need(cfg.gamma is None or 0 <= cfg.gamma <= 1, "gamma must lie in [0, 1]")
    need(cfg.trials >= MIN_TRIALS, f"trials must be >= {MIN_TRIALS}")
    need(cfg.transfers >= 1, "transfers must be >= 1")
    need(cfg.L > 0 and cfg.lam > 0 and cfg.lam * cfg.L**2 >= 1, "need L > 0, lambda > 0, lambda L^2 >= 1")
    need(cfg.r_c > 0 and cfg.T > 0, "r_c and T must be positive")
    need(0 < cfg.t_I <= cfg.T and cfg.t_D >= 0, "need 0 < t_I <= T and t_D >= 0")
    need(abs(cfg.T / cfg.t_I - round(cfg.T / cfg.t_I)) < 1e-9, "T / t_I must be an integer")
    need(cfg.n_grid >= 64, "n_grid must be >= 64")
    need(cfg.n_w >= 2 and cfg.n_b >= 2, "n_w and n_b must be >= 2")
    need(cfg.max_retries >= 1, "max_retries must be >= 1")
    need(0 <= cfg.seed <= SEED_MAX, "seed must be a 64-bit unsigned integer")
    need(cfg.jobs >= 1, "jobs must be >= 1")
    for g in parse_grid(cfg.K_grid):
        need(g >= 1 and g == int(g), "K_grid entries must be positive integers")
    for g in parse_grid(cfg.eta_grid):
        need(g > 0, "eta_grid entries must be positive")
    for g in parse_grid(cfg.alpha_grid):
        need(0 <= g <= 1, "alpha_grid entries must lie in [0, 1]")
    for g in parse_grid(cfg.gamma_grid):
        need(0 <= g <= 1, "gamma_grid entries must lie in [0, 1]")
    known = {"BF", "SF", "FF", "MF", "SF-HAT"}
    need(all(p in known for p in _policies(cfg)), f"policy entries must be among {sorted(known)}")


def header(cfg: RunConfig) -> list[str]:
    lines = [f"geofwd {__version__}"]
    for f in fields(RunConfig):
        if f.metadata.get("echo", True):
            val = getattr(cfg, f.name)
            lines.append(f"{CONFIG_PREFIX}{_key(f)}={'' if val is None else val}")
    return lines


def _ks(cfg: RunConfig) -> list[int]:
    return [int(k) for k in parse_grid(cfg.K_grid, [cfg.K])]


def cmd_solve_bf(cfg: RunConfig, out) -> str:
    ctx = HopContext(cfg.L_i / cfg.r_c, cfg.K)
    model = build_progress_model(ctx, cfg.n_grid)
    surface = solve_bf(ctx, model, cfg.eta, cfg.n_w, cfg.n_b)
    write_surface_csv(surface, out, header(cfg))
    err = 0.0
    if cfg.K >= 2:
        W, B = np.meshgrid(surface.grid_w, surface.grid_b, indexing="ij")
        err = float(np.max(np.abs(surface.stage(cfg.K - 1) - stage_km1_closed_form(model, cfg.eta, W, B))))
    return (f"K={cfg.K} eta={cfg.eta!r} grid={cfg.n_w}x{cfg.n_b} "
            f"max_abs_stage_K-1_error={err:.3e}")


def cmd_solve_alpha(cfg: RunConfig, out) -> None:
    rows = []
    for K in _ks(cfg):
        model = build_progress_model(HopContext(cfg.L_i / cfg.r_c, K), cfg.n_grid)
        gammas = parse_grid(cfg.gamma_grid, [] if cfg.gamma is None else [cfg.gamma])
        if gammas:
            for g in gammas:
                th = calibrate_threshold(g, K, model)
                rows.append({"K": K, "L_i": model.L_i, "gamma": g, "eta_o": th.eta_o, "alpha": th.alpha})
        else:
            for eta in parse_grid(cfg.eta_grid, [cfg.eta]):
                th = solve_alpha(K, eta, model)
                rows.append({"K": K, "L_i": model.L_i, "eta": eta, "eta_o": th.eta_o, "alpha": th.alpha})
    write_rows(["K", "L_i", "eta", "gamma", "eta_o", "alpha"], rows, out, header(cfg))


def cmd_analytics(cfg: RunConfig, out) -> None:
    rows = []
    for K in _ks(cfg):
        model = build_progress_model(HopContext(cfg.L_i / cfg.r_c, K), cfg.n_grid)
        if cfg.eta_grid is not None:
            for eta in parse_grid(cfg.eta_grid):
                rows.append(sf_averages(K, solve_alpha(K, eta, model).alpha, model, eta=eta))
        else:
            for a in parse_grid(cfg.alpha_grid, parse_grid("0:1:0.1")):
                rows.append(sf_averages(K, a, model))
    write_averages_csv(rows, out, header(cfg))


def _onehop_grid(cfg: RunConfig) -> list[OnehopPoint]:
    pts = []
    for K in _ks(cfg):
        for pol in _policies(cfg):
            if pol == "SF" and cfg.alpha is not None:
                pts.append(OnehopPoint(pol, K, cfg.L_i / cfg.r_c, alpha=cfg.alpha))
                continue
            for eta in parse_grid(cfg.eta_grid, [cfg.eta]):
                pts.append(OnehopPoint(pol, K, cfg.L_i / cfg.r_c, eta=eta))
    return pts


def _e2e_grid(cfg: RunConfig) -> list[E2EPoint]:
    gammas = parse_grid(cfg.gamma_grid, [0.0 if cfg.gamma is None else cfg.gamma])
    return [E2EPoint(pol, g) for pol in _policies(cfg) for g in gammas]


def _base(cfg: RunConfig) -> dict:
    return {"seed": cfg.seed, "jobs": cfg.jobs, "n_grid": cfg.n_grid, "trials": cfg.trials,
            "n_w": cfg.n_w, "n_b": cfg.n_b, "transfers": cfg.transfers, "L": cfg.L,
            "lambda": cfg.lam, "r_c": cfg.r_c, "T": cfg.T, "t_I": cfg.t_I, "t_D": cfg.t_D,
            "max_retries": cfg.max_retries}


def cmd_onehop(cfg: RunConfig, out) -> None:
    if "SF-HAT" in _policies(cfg):
        raise ConfigError("SF-HAT is an end-to-end policy")
    out.write(sweep("onehop", _onehop_grid(cfg), _base(cfg), header(cfg)))


def cmd_e2e(cfg: RunConfig, out) -> None:
    if "BF" in _policies(cfg):
        raise ConfigError("BF is not available end to end")
    if cfg.network_out:
        net = network_for(cfg.seed, cfg.L, cfg.lam, cfg.r_c, cfg.max_retries)
        with open(cfg.network_out, "w", newline="") as fh:
            write_network_csv(net, fh, header(cfg))
    out.write(sweep("e2e", _e2e_grid(cfg), _base(cfg), header(cfg)))


def cmd_sweep(cfg: RunConfig, out) -> None:
    (cmd_onehop if cfg.kind == "onehop" else cmd_e2e)(cfg, out)


def run(cfg: RunConfig) -> str:
    """Execute ``cfg`` and return the CSV text; also writes it to ``cfg.out``."""
    buf = io.StringIO()
    summary = None
    if cfg.command == "solve-bf":
        summary = cmd_solve_bf(cfg, buf)
    else:
        {"solve-alpha": cmd_solve_alpha, "onehop": cmd_onehop, "e2e": cmd_e2e,
         "analytics": cmd_analytics, "sweep": cmd_sweep}[cfg.command](cfg, buf)
    text = buf.getvalue()
    if cfg.out == "-":
        sys.stdout.write(text)
        if summary:
            print(summary, file=sys.stderr)
    else:
        with open(cfg.out, "w", newline="") as fh:
            fh.write(text)
        if summary:
            print(summary)
    return text


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="geofwd", description=__doc__.split("\n\n")[0])
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="key=value config file (a previous output CSV also works)")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override any config key; repeatable")
    for key, f in _FIELDS.items():
        if key == "command":
            continue
        p.add_argument(f"--{key.replace('_', '-')}", dest=f"opt_{key}", metavar=key.upper())
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        settings = {}
        if args.config:
            try:
                with open(args.config) as fh:
                    settings.update(parse_config_text(fh.read()))
            except OSError as exc:
                raise ConfigError(f"cannot read config: {exc}") from None
        settings["command"] = args.command
        for item in args.set:
            key, sep, val = item.partition("=")
            if not sep:
                raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
            settings[key.strip()] = val
        for key in _FIELDS:
            val = getattr(args, f"opt_{key}", None)
            if val is not None:
                settings[key] = val
        cfg = build_config(settings)
        run(cfg)
    except GeofwdError as exc:
        print(f"geofwd: error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
