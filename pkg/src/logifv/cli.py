"""Command-line front end.

Subcommands:

* ``simulate``: particle-system replicates; writes trajectory.csv (replicate
  0, columns scaled_time, N_bar, freq_0, ...) and, for more than one
  replicate, replicates.csv with a leading replicate column.
* ``coalescent``: merge rates (rates.csv: n, k, rate) and block-count laws
  (blocks.csv: t, state, prob) of the model's dual coalescent.
* ``fv``: limit frequency paths (fv.csv: path, t, x).
* ``duality``: forward-versus-dual moment report (duality.json) plus the
  grid as a table (duality.csv: t, n, forward_mean, forward_se, forward_n,
  dual, z).
* ``occupation``: per-replicate band statistics of the scaled size
  (occupation.csv: replicate, sup_dev, frac_outside).
* ``selftest``: quick built-in battery; exits 3 on any failure.

Every run reads an INI config (except selftest), writes its tables in CSV or
JSON-lines format, and drops a metadata.json sidecar holding the config
digest, the seed, and derived model quantities. No timestamps are recorded,
so rerunning a command with the same inputs reproduces every output byte.

Exit codes: 0 success, 1 configuration error, 2 runtime failure,
3 selftest failure.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .coalescent import (BetaScaled, PointMassAtZero, UniformScaled,
                         block_count_distribution, lambda_from_model,
                         merge_rate)
from .dynamics import (ModelParams, engine_backend, occupation_stats,
                       scaling_for, simulate_replicates)
from .errors import ConfigError, ParameterError
from .offspring import make_explicit, make_zeta, sampler_chi_square
from .verify import limit_duality, particle_duality

_MODEL_KEYS = {"regime", "b", "d", "c", "k", "law", "pmf", "alpha"}
_SCHEMA = {
    "model": _MODEL_KEYS,
    "simulate": {"init", "horizon", "obs", "replicates"},
    "coalescent": {"n_max", "t"},
    "fv": {"x0", "obs", "paths", "dt", "eps"},
    "duality": {"x0", "t", "n", "paths", "dt", "eps", "source",
                "replicates", "init", "threshold"},
    "occupation": {"eps_band", "init", "horizon", "obs", "replicates"},
}


def _parse_args(argv):
    ap = argparse.ArgumentParser(
        prog="logifv",
        description="logistic branching particle systems and their "
                    "coalescent duals")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("simulate", "coalescent", "fv", "duality", "occupation"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="INI config file")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--format", choices=("csv", "jsonl"), default="csv")
    sub.add_parser("selftest")
    return ap.parse_args(argv)


def _load_config(path: str) -> configparser.ConfigParser:
    cfg = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        with open(path, "r", encoding="utf-8") as fh:
            cfg.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc
    for section in cfg.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown config section [{section}]")
        for key in cfg[section]:
            if key not in _SCHEMA[section]:
                raise ConfigError(
                    f"unknown key {key!r} in section [{section}]")
    return cfg


def _section(cfg: configparser.ConfigParser,
             name: str) -> configparser.SectionProxy:
    if name not in cfg:
        raise ConfigError(f"config needs a [{name}] section")
    return cfg[name]


def _get(sec, key: str, conv, default=None):
    if key not in sec:
        if default is not None:
            return default
        raise ConfigError(f"section [{sec.name}] needs key {key!r}")
    raw = sec[key]
    try:
        return conv(raw)
    except (ValueError, TypeError) as exc:
        raise ConfigError(
            f"bad value for {key!r} in [{sec.name}]: {raw!r}") from exc


def _float_list(raw: str) -> list[float]:
    vals = [float(x) for x in raw.split(",") if x.strip()]
    if not vals:
        raise ValueError("empty list")
    return vals


def _int_list(raw: str) -> list[int]:
    vals = [int(x) for x in raw.split(",") if x.strip()]
    if not vals:
        raise ValueError("empty list")
    return vals


def load_model(cfg: configparser.ConfigParser) -> ModelParams:
    sec = _section(cfg, "model")
    law_kind = _get(sec, "law", str)
    if law_kind == "explicit":
        law = make_explicit(_get(sec, "pmf", _float_list))
    elif law_kind == "zeta":
        law = make_zeta(_get(sec, "alpha", float))
    else:
        raise ConfigError(f"law must be 'explicit' or 'zeta', got {law_kind!r}")
    try:
        return ModelParams(
            b=_get(sec, "b", float),
            d=_get(sec, "d", float),
            c=_get(sec, "c", float),
            K=_get(sec, "k", int),
            law=law,
            regime=_get(sec, "regime", str),
        )
    except ParameterError as exc:
        raise ConfigError(f"invalid model: {exc}") from exc


def _model_desc(params: ModelParams) -> dict:
    law = params.law
    desc = {"kind": law.kind}
    if law.kind == "zeta":
        desc["alpha"] = law.alpha
    else:
        desc["pmf"] = law.head_probs.tolist()
    return {"regime": params.regime, "b": params.b, "d": params.d,
            "c": params.c, "K": params.K, "law": desc}


def _measure_desc(measure) -> dict:
    if isinstance(measure, PointMassAtZero):
        return {"kind": "point_mass_at_zero", "mass": measure.mass}
    if isinstance(measure, BetaScaled):
        return {"kind": "beta_scaled", "alpha": measure.alpha,
                "scale": measure.scale}
    return {"kind": "uniform_scaled", "scale": measure.scale}


def _write_table(path: Path, fmt: str, header: list[str], rows) -> None:
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v
                             for v in row])
        path.write_text(buf.getvalue(), encoding="utf-8")
        return
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(dict(zip(header, row)), sort_keys=True))
            fh.write("\n")


def _write_metadata(outdir: Path, command: str, args, config_path: str,
                    extra: dict, outputs: list[str]) -> None:
    digest = hashlib.sha256(Path(config_path).read_bytes()).hexdigest()
    doc = {
        "command": command,
        "config_sha256": digest,
        "engine_backend": engine_backend(),
        "format": args.format,
        "outputs": sorted(outputs),
        "seed": args.seed,
        "threads": args.threads,
        "version": __version__,
    }
    doc.update(extra)
    (outdir / "metadata.json").write_text(
        json.dumps(doc, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def _scaling_desc(params: ModelParams) -> dict:
    s = scaling_for(params)
    return {"time_factor": s.time_factor, "size_factor": s.size_factor,
            "n_star": s.n_star, "effective_pop": s.effective_pop}


def _run_replicates(params, args, sec):
    init = _get(sec, "init", _int_list)
    horizon = _get(sec, "horizon", float)
    obs = _get(sec, "obs", _float_list)
    replicates = _get(sec, "replicates", int, default=1)
    rs = simulate_replicates(params, init, horizon, obs,
                             master_seed=args.seed, replicates=replicates,
                             threads=args.threads)
    return rs, init, horizon, obs


def _traj_header(n_types: int) -> list[str]:
    return ["scaled_time", "N_bar"] + [f"freq_{i}" for i in range(n_types)]


def cmd_simulate(cfg, args, outdir: Path) -> dict:
    params = load_model(cfg)
    rs, init, horizon, obs = _run_replicates(
        params, args, _section(cfg, "simulate"))
    n_types = rs.counts.shape[2]
    header = _traj_header(n_types)
    ext = "csv" if args.format == "csv" else "jsonl"
    rows = [[float(rs.scaled_times[i]), float(rs.n_bar[0, i])]
            + [float(v) for v in rs.freqs[0, i]]
            for i in range(rs.scaled_times.size)]
    _write_table(outdir / f"trajectory.{ext}", args.format, header, rows)
    outputs = [f"trajectory.{ext}"]
    if rs.n_replicates > 1:
        rep_rows = []
        for r in range(rs.n_replicates):
            for i in range(rs.scaled_times.size):
                rep_rows.append(
                    [r, float(rs.scaled_times[i]), float(rs.n_bar[r, i])]
                    + [float(v) for v in rs.freqs[r, i]])
        _write_table(outdir / f"replicates.{ext}", args.format,
                     ["replicate"] + header, rep_rows)
        outputs.append(f"replicates.{ext}")
    measure = lambda_from_model(params)
    extra = {
        "model": _model_desc(params),
        "scaling": _scaling_desc(params),
        "lambda_total": measure.total_mass,
        "measure": _measure_desc(measure),
        "init": list(init),
        "horizon": horizon,
        "replicates": rs.n_replicates,
        "extinct_replicates": int(rs.extinct.any(axis=1).sum()),
    }
    _write_metadata(outdir, "simulate", args, args.config, extra, outputs)
    return extra


def cmd_coalescent(cfg, args, outdir: Path) -> dict:
    params = load_model(cfg)
    measure = lambda_from_model(params)
    sec = _section(cfg, "coalescent")
    n_max = _get(sec, "n_max", int)
    ts = _get(sec, "t", _float_list)
    ext = "csv" if args.format == "csv" else "jsonl"
    rate_rows = [[n, k, merge_rate(measure, n, k)]
                 for n in range(2, n_max + 1) for k in range(2, n + 1)]
    _write_table(outdir / f"rates.{ext}", args.format, ["n", "k", "rate"],
                 rate_rows)
    block_rows = []
    for t in ts:
        p = block_count_distribution(measure, n_max, t)
        block_rows.extend([t, j, float(p[j])] for j in range(1, n_max + 1))
    _write_table(outdir / f"blocks.{ext}", args.format,
                 ["t", "state", "prob"], block_rows)
    extra = {
        "model": _model_desc(params),
        "measure": _measure_desc(measure),
        "lambda_total": measure.total_mass,
        "n_max": n_max,
        "times": ts,
    }
    _write_metadata(outdir, "coalescent", args, args.config, extra,
                    [f"rates.{ext}", f"blocks.{ext}"])
    return extra


def cmd_fv(cfg, args, outdir: Path) -> dict:
    from .flemingviot import simulate_lfv, simulate_wf

    params = load_model(cfg)
    measure = lambda_from_model(params)
    sec = _section(cfg, "fv")
    x0 = _get(sec, "x0", float)
    obs = _get(sec, "obs", _float_list)
    paths = _get(sec, "paths", int)
    dt = _get(sec, "dt", float, default=1e-4)
    eps = _get(sec, "eps", float, default=1e-3)
    rng = np.random.Philox(np.random.SeedSequence(entropy=args.seed,
                                                  spawn_key=(1, 0)))
    gen = np.random.Generator(rng)
    if isinstance(measure, PointMassAtZero):
        x = simulate_wf(measure.mass, x0, obs, gen, paths, dt=dt)
    else:
        x = simulate_lfv(measure, x0, obs, gen, paths, eps=eps, dt=dt)
    ext = "csv" if args.format == "csv" else "jsonl"
    rows = [[p, float(t), float(x[p, i])]
            for p in range(paths) for i, t in enumerate(obs)]
    _write_table(outdir / f"fv.{ext}", args.format, ["path", "t", "x"], rows)
    extra = {
        "model": _model_desc(params),
        "measure": _measure_desc(measure),
        "lambda_total": measure.total_mass,
        "x0": x0,
        "paths": paths,
        "dt": dt,
        "eps": eps,
    }
    _write_metadata(outdir, "fv", args, args.config, extra, [f"fv.{ext}"])
    return extra


def cmd_duality(cfg, args, outdir: Path) -> dict:
    params = load_model(cfg)
    measure = lambda_from_model(params)
    sec = _section(cfg, "duality")
    source = _get(sec, "source", str, default="limit")
    ts = _get(sec, "t", _float_list)
    ns = _get(sec, "n", _int_list)
    threshold = _get(sec, "threshold", float, default=3.0)
    if source == "limit":
        x0 = _get(sec, "x0", float)
        paths = _get(sec, "paths", int)
        dt = _get(sec, "dt", float, default=1e-4)
        eps = _get(sec, "eps", float, default=1e-3)
        gen = np.random.Generator(np.random.Philox(
            np.random.SeedSequence(entropy=args.seed, spawn_key=(1, 0))))
        report = limit_duality(measure, x0, ts, ns, gen, paths, eps=eps,
                               dt=dt, threshold=threshold)
    elif source == "particle":
        init = _get(sec, "init", _int_list)
        replicates = _get(sec, "replicates", int)
        report = particle_duality(params, init, ts, ns,
                                  master_seed=args.seed,
                                  replicates=replicates,
                                  threads=args.threads,
                                  threshold=threshold)
    else:
        raise ConfigError(f"source must be 'limit' or 'particle', "
                          f"got {source!r}")
    doc = report.to_jsonable()
    doc["measure"] = _measure_desc(measure)
    (outdir / "duality.json").write_text(
        json.dumps(doc, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    ext = "csv" if args.format == "csv" else "jsonl"
    grid = [[c.t, c.n, c.forward.mean, c.forward.se, c.forward.n_samples,
             c.dual, c.z] for c in report.cells]
    _write_table(outdir / f"duality.{ext}", args.format,
                 ["t", "n", "forward_mean", "forward_se", "forward_n",
                  "dual", "z"], grid)
    extra = {
        "model": _model_desc(params),
        "measure": _measure_desc(measure),
        "lambda_total": measure.total_mass,
        "x0": report.x0,
        "passed": report.passed,
    }
    _write_metadata(outdir, "duality", args, args.config, extra,
                    ["duality.json", f"duality.{ext}"])
    return extra


def cmd_occupation(cfg, args, outdir: Path) -> dict:
    params = load_model(cfg)
    sec = _section(cfg, "occupation")
    eps_band = _get(sec, "eps_band", float)
    rs, init, horizon, obs = _run_replicates(params, args, sec)
    n_star = scaling_for(params).n_star
    ext = "csv" if args.format == "csv" else "jsonl"
    rows = []
    for r in range(rs.n_replicates):
        oc = occupation_stats(rs.trajectory(r), n_star, eps_band,
                              horizon=horizon)
        rows.append([r, oc.sup_dev, oc.frac_outside])
    _write_table(outdir / f"occupation.{ext}", args.format,
                 ["replicate", "sup_dev", "frac_outside"], rows)
    extra = {
        "model": _model_desc(params),
        "scaling": _scaling_desc(params),
        "n_star": n_star,
        "eps_band": eps_band,
        "horizon": horizon,
        "replicates": rs.n_replicates,
    }
    _write_metadata(outdir, "occupation", args, args.config, extra,
                    [f"occupation.{ext}"])
    return extra


def cmd_selftest() -> int:
    """Small fixed battery; prints one PASS/FAIL line per check."""
    failures = 0

    def check(name: str, ok: bool) -> None:
        nonlocal failures
        print(f"{'PASS' if ok else 'FAIL'} {name}")
        failures += 0 if ok else 1

    from . import _engine_py
    from .dynamics import simulate

    law = make_explicit([1.0])
    p = ModelParams(b=2.0, d=1.0, c=1.0, K=100, law=law,
                    regime="finite_variance")
    a = simulate(p, [50, 50], 0.5, [0.1, 0.5], seed=123)
    b = simulate(p, [50, 50], 0.5, [0.1, 0.5], seed=123)
    check("determinism: same seed reproduces the trajectory",
          bool(np.array_equal(a.counts, b.counts)))

    try:
        from . import _engine_cy
        zl = make_zeta(1.0)
        kw = (np.array([30, 20], dtype=np.int64), 1.0, 0.0, 0.02,
              zl.head_cum, True, 1.0, zl.tail_start - 1,
              np.linspace(0.1, 2.0, 10))
        ss = np.random.SeedSequence(entropy=5, spawn_key=(0, 0))
        rp = _engine_py.run_sim(*kw, np.random.Philox(ss), 0)
        rc = _engine_cy.run_sim(*kw, np.random.Philox(ss), 0)
        check("kernel lanes bit-identical",
              bool(np.array_equal(rp[0], rc[0]) and rp[1:] == rc[1:]))
    except ImportError:
        print("SKIP kernel lanes (compiled extension not built)")

    rng = np.random.Generator(np.random.Philox(42))
    for name, lw in [("zeta alpha=1", make_zeta(1.0)),
                     ("zeta alpha=1.5", make_zeta(1.5)),
                     ("explicit", make_explicit([0.3, 0.5, 0.2]))]:
        _, pval, _ = sampler_chi_square(lw, 200_000, rng)
        check(f"offspring sampler chi-square ({name}), p={pval:.4f}",
              pval > 1e-3)

    gen = np.random.Generator(np.random.Philox(43))
    rep = limit_duality(PointMassAtZero(4.0), 0.5, [0.2], [2, 3], gen,
                        paths=10_000, dt=1e-3, threshold=4.0)
    check(f"diffusion matches coalescent dual, max |z|={rep.max_abs_z:.2f}",
          rep.passed)

    lam = UniformScaled(1.0)
    rec_ok = all(
        abs(merge_rate(lam, n, k) - merge_rate(lam, n + 1, k)
            - merge_rate(lam, n + 1, k + 1)) < 1e-12
        for n in range(2, 12) for k in range(2, n + 1))
    check("merge-rate consistency recursion", rec_ok)

    print(f"selftest: {'OK' if failures == 0 else f'{failures} failure(s)'}")
    return 0 if failures == 0 else 3


_COMMANDS = {
    "simulate": cmd_simulate,
    "coalescent": cmd_coalescent,
    "fv": cmd_fv,
    "duality": cmd_duality,
    "occupation": cmd_occupation,
}


def run(argv=None) -> int:
    args = _parse_args(argv)
    if args.command == "selftest":
        return cmd_selftest()
    try:
        cfg = _load_config(args.config)
        handler = _COMMANDS[args.command]
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    try:
        outdir = Path(args.out)
        outdir.mkdir(parents=True, exist_ok=True)
        handler(cfg, args, outdir)
    except (ConfigError, ParameterError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2
    return 0


def main() -> int:
    return run(sys.argv[1:])


if __name__ == "__main__":
    sys.exit(main())
