"""Command-line entry point: ``modflow simulate|price|asymmetry|verify <config>``."""

from __future__ import annotations

import argparse
import io
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import checks
from .asymmetry import simulate_asymmetry_path
from .config import ExperimentConfig, load_config
from .dynamics import build_dynamics
from .errors import ModflowError
from .infoflow import simulate_info_path
from .pricing import call_price, mc_call_price
from .stochastic import TimeGrid

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def fmt(v: float) -> str:
    """17 significant digits in scientific notation; infinities as +inf/-inf."""
    if v == np.inf:
        return "+inf"
    if v == -np.inf:
        return "-inf"
    return f"{v + 0.0:.16e}"


def mask_bits(row) -> str:
    return "".join("1" if b else "0" for b in row)


def _header(cfg: ExperimentConfig, command: str) -> str:
    return f"# modflow {command} config_sha256={cfg.digest} seed={cfg.seed}\n"


# --------------------------------------------------------------------------- #
# per-path workers (module level so they pickle)
# --------------------------------------------------------------------------- #

def _simulate_rows(cfg: ExperimentConfig, paths) -> str:
    out = io.StringIO()
    for p in paths:
        path = simulate_info_path(cfg.prior, cfg.sources, cfg.field, cfg.grid, cfg.seed, p)
        dyn = build_dynamics(cfg.prior, path)
        led = dyn.ledger
        for k in range(path.times.size):
            cells = [str(p), fmt(path.times[k]), mask_bits(path.active[k])]
            cells += [fmt(v) for v in path.modulated[k]]
            cells += [fmt(dyn.xi_hat[k]), fmt(dyn.sigma_hat[k]), fmt(dyn.x_mean[k]), fmt(dyn.x_var[k]),
                      fmt(dyn.m[k]), fmt(dyn.w[k]), str(int(led.c_count[k])), str(int(led.n_count[k]))]
            out.write(",".join(cells) + "\n")
    return out.getvalue()


def _asymmetry_rows(cfg: ExperimentConfig, paths) -> str:
    a1, a2 = cfg.agents
    out = io.StringIO()
    for p in paths:
        r = simulate_asymmetry_path(cfg.prior, cfg.sources, a1, a2, cfg.grid, cfg.seed, p)
        for k in range(r.times.size):
            out.write(",".join([str(p), fmt(r.times[k]), fmt(r.kl[k]), fmt(r.a_half[k]), fmt(r.b_half[k]),
                                mask_bits(r.mask1[k]), mask_bits(r.mask2[k])]) + "\n")
    return out.getvalue()


def _asymmetry_events(cfg: ExperimentConfig, paths) -> str:
    a1, a2 = cfg.agents
    out = io.StringIO()
    for p in paths:
        r = simulate_asymmetry_path(cfg.prior, cfg.sources, a1, a2, cfg.grid, cfg.seed, p)
        for t, agent, kind in r.events:
            out.write(f"{p},{fmt(t)},{agent},{kind}\n")
    return out.getvalue()


def _chunks(n: int, threads: int):
    size = max(1, -(-n // (threads * 4)))
    return [range(s, min(s + size, n)) for s in range(0, n, size)]


def _map_paths(worker, cfg: ExperimentConfig, threads: int) -> str:
    chunks = _chunks(cfg.n_paths, threads)
    if threads <= 1 or len(chunks) == 1:
        return "".join(worker(cfg, c) for c in chunks)
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return "".join(pool.map(worker, [cfg] * len(chunks), chunks))


# --------------------------------------------------------------------------- #
# commands
# --------------------------------------------------------------------------- #

def cmd_simulate(cfg: ExperimentConfig, threads: int) -> str:
    n = len(cfg.sources)
    cols = ["path_id", "t", "active_mask"] + [f"mod_{i + 1}" for i in range(n)]
    cols += ["xi_hat", "sigma_hat", "x_mean", "x_var", "m", "w", "c_count", "n_count"]
    return _header(cfg, "simulate") + ",".join(cols) + "\n" + _map_paths(_simulate_rows, cfg, threads)


def cmd_price(cfg: ExperimentConfig) -> str:
    if cfg.call is None:
        raise ModflowError("the price command needs a pricing block (pricing.strike, pricing.exercise)")
    res = call_price(cfg.call, cfg.curve)
    est, se = mc_call_price(cfg.call, cfg.curve, cfg.mc_paths, cfg.seed)
    lines = [_header(cfg, "price"), "kind,mask,probability,price,critical,stderr\n"]
    for k, p, c, s in zip(res.states, res.probabilities, res.prices, res.critical):
        lines.append(f"state,{mask_bits(k)},{fmt(p)},{fmt(c)},{fmt(s)},\n")
    lines.append(f"total,,{fmt(float(res.probabilities.sum()))},{fmt(res.total)},,\n")
    lines.append(f"mc,,,{fmt(est)},,{fmt(se)}\n")
    return "".join(lines)


def cmd_asymmetry(cfg: ExperimentConfig, threads: int) -> str:
    if cfg.agents is None:
        raise ModflowError("the asymmetry command needs asymmetry.agent1.* and asymmetry.agent2.* keys")
    head = "path_id,t,kl_sym,a_half,b_half,agent1_mask,agent2_mask\n"
    return _header(cfg, "asymmetry") + head + _map_paths(_asymmetry_rows, cfg, threads)


def asymmetry_events_csv(cfg: ExperimentConfig, threads: int) -> str:
    return _header(cfg, "asymmetry-events") + "path_id,t,agent,kind\n" + _map_paths(_asymmetry_events, cfg, threads)


def spot_check(cfg: ExperimentConfig, n_paths: int) -> checks.SuiteResult:
    """Invariants of emitted columns on sample paths of the configured experiment."""
    lo, hi = cfg.prior.atoms[0], cfg.prior.atoms[-1]
    bad = 0
    for p in range(n_paths):
        path = simulate_info_path(cfg.prior, cfg.sources, cfg.field, cfg.grid, cfg.seed, p)
        dyn = build_dynamics(cfg.prior, path)
        span = 1e-12 * max(1.0, hi - lo)
        bad += int(np.any(dyn.x_mean < lo - span) or np.any(dyn.x_mean > hi + span))
        bad += int(np.any(dyn.x_var < 0.0))
        bad += int(np.any(dyn.jump_x[~dyn.ledger.delta] != 0.0))
        bad += int(np.any(dyn.w[1:][dyn.sigma_hat[:-1] == 0.0] != dyn.w[:-1][dyn.sigma_hat[:-1] == 0.0]))
        bad += int(dyn.ledger.c_count[-1] != path.switch.event_times.size)
    return checks.SuiteResult("column invariants", bad == 0, {"paths": n_paths, "violations": bad})


def cmd_verify(cfg: ExperimentConfig, out) -> bool:
    v = cfg.verify
    seed = cfg.seed
    suites = [
        lambda: spot_check(cfg, v["spot_paths"]),
        lambda: checks.bridge_covariance(v["bridge_paths"], seed),
        lambda: checks.reduction_identity(v["reduction_cases"], seed + 1),
        lambda: checks.bayes_oracle(v["bayes_cases"], seed + 2),
    ]
    sample = {}

    def mc():
        if "s" not in sample:
            sample["s"] = checks.simulate_sample(cfg.prior, cfg.sources, cfg.field, TimeGrid(v["mc_steps"]),
                                                 v["mc_paths"], seed + 3)
        return sample["s"]

    suites += [
        lambda: checks.martingale(mc(), min_bin=min(500, max(50, v["mc_paths"] // 100))),
        lambda: checks.supermartingale(mc()),
        lambda: checks.brownian_increments(v["brownian_paths"], seed=seed + 4),
        lambda: checks.jump_law(v["jump_samples"], seed + 5),
        lambda: checks.euler_convergence(v["euler_paths"], seed + 6),
        lambda: checks.fk_residual(v["fk_grid"]),
        lambda: checks.call_price_suite(v["price_specs"], v["price_paths"], seed + 8),
        lambda: checks.asymmetry_suite(v["asymmetry_paths"], seed + 9),
    ]
    if cfg.call is not None:
        def configured_price():
            exact = call_price(cfg.call, cfg.curve).total
            est, se = mc_call_price(cfg.call, cfg.curve, cfg.mc_paths, seed)
            z = abs(exact - est) / se if se > 0 else (0.0 if abs(exact - est) < 1e-12 else np.inf)
            return checks.SuiteResult("configured call price", z <= 3.0,
                                      {"price": exact, "mc": est, "stderr": se, "z": z})
        suites.append(configured_price)

    ok = True
    for run in suites:
        res = run()
        ok &= res.passed
        out.write(res.line() + "\n")
        out.flush()
    out.write(("ALL PASSED" if ok else "VERIFICATION FAILED") + "\n")
    return ok


# --------------------------------------------------------------------------- #

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="modflow", description="Filtering experiments with switching information sources.")
    ap.add_argument("command", choices=["simulate", "price", "asymmetry", "verify"])
    ap.add_argument("config", help="path to a key = value config file")
    ap.add_argument("--seed", type=int, default=None, help="override the config seed")
    ap.add_argument("--threads", type=int, default=None, help="worker processes for path-level work")
    ap.add_argument("--out", default=None, help="output file (default: stdout)")
    ap.add_argument("--events", default=None, help="asymmetry only: also write switch events to this CSV")
    return ap


def _write(text: str, path) -> None:
    if path is None:
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    with open(path, "w", newline="\n") as fh:
        fh.write(text)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        seed = args.seed
        env = os.environ.get("MODFLOW_SEED")
        if env is not None:
            try:
                seed = int(env)
            except ValueError:
                raise ModflowError(f"MODFLOW_SEED must be an integer, got {env!r}") from None
        if seed is not None:
            cfg = cfg.with_seed(seed)
        threads = args.threads if args.threads is not None else (os.cpu_count() or 1)
        if threads < 1:
            raise ModflowError("--threads must be >= 1")

        if args.command == "simulate":
            _write(cmd_simulate(cfg, threads), args.out)
        elif args.command == "price":
            _write(cmd_price(cfg), args.out)
        elif args.command == "asymmetry":
            _write(cmd_asymmetry(cfg, threads), args.out)
            if args.events:
                _write(asymmetry_events_csv(cfg, threads), args.events)
        else:
            if args.out:
                with open(args.out, "w", newline="\n") as fh:
                    ok = cmd_verify(cfg, fh)
            else:
                ok = cmd_verify(cfg, sys.stdout)
            return EXIT_OK if ok else EXIT_FAIL
    except (ModflowError, ValueError) as exc:
        print(f"modflow: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
