"""Command-line front end: bounds sweeps, campaign simulation, protocol
traces and the acceptance-check runner, all emitting self-describing CSV.

Exit codes: 0 ok, 1 usage, 2 config, 3 acceptance failure, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from importlib import resources

import numpy as np

from . import acceptance
from .bounds import (
    QuadratureError,
    RelayBoundMethod,
    direct_bound,
    relay_energy_mc,
    relay_upper_bound,
)
from .config import ConfigError, ScenarioConfig, defaults_dump, parse_config, TOOL_VERSION
from .simkit import Scheme, run_campaign, replication_rng, ring_scenario, _build_env, _DrawBuffer
from .protocol import run_selection_round, DeviceSnapshot
from .channel import Hop, SnrSample
from .energy import SelectionMode

EXIT_OK, EXIT_USAGE, EXIT_CONFIG, EXIT_ACCEPT, EXIT_NUMERIC = 0, 1, 2, 3, 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        sys.exit(EXIT_USAGE)


def _load_config(path: str | None) -> ScenarioConfig:
    if path is None:
        return ScenarioConfig()
    if not os.path.exists(path):
        candidate = resources.files("d2dee").joinpath("presets", os.path.basename(path))
        if candidate.is_file():
            from .config import parse_config_text
            return parse_config_text(candidate.read_text(), source=str(candidate))
    return parse_config(path)


def _open_out(path: str | None):
    return open(path, "w", encoding="utf-8") if path else sys.stdout


def _emit(fh, cfg: ScenarioConfig, header: str, rows):
    for line in cfg.echo_lines():
        fh.write(line + "\n")
    fh.write(header + "\n")
    for row in rows:
        fh.write(",".join(str(v) for v in row) + "\n")


def cmd_bounds(cfg: ScenarioConfig, args) -> int:
    n_sweep = args.n_sweep or [10, 100, 1000, 10000]
    rows = []
    status = EXIT_OK
    for i, n in enumerate(n_sweep):
        s = ring_scenario(cfg, n)
        bp = relay_upper_bound(s, RelayBoundMethod.CLOSED_FORM)
        rng = replication_rng(cfg.seed, i)
        mc, se = relay_energy_mc(s, args.trials, rng)
        lower = ""
        if n == 1:
            db = direct_bound(s)
            lower = db.lower if db.lower is not None else ""
        if mc > bp.oracle + 3.0 * se:
            status = EXIT_ACCEPT
        rows.append((n, f"{s.mean_snr_db:.6f}", s.sigma_db, lower, bp.upper, bp.oracle,
                     f"{mc:.9g}", str(bp.closed_form_ok).lower()))
    with _open_out(args.out) as fh:
        _emit(fh, cfg, "N,gamma_bar_db,sigma_db,lower_J,upper_J,oracle_J,mc_J,closed_form_ok", rows)
    return status


def cmd_simulate(cfg: ScenarioConfig, args) -> int:
    if not args.schemes:
        print("error: --schemes must name at least one scheme", file=sys.stderr)
        return EXIT_USAGE
    try:
        schemes = [Scheme(s.strip()) for s in args.schemes]
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    n_sweep = args.n_sweep or [cfg.n_devices]
    rows = []
    for scheme in schemes:
        for n in n_sweep:
            c = ScenarioConfig(**{**cfg.__dict__, "n_devices": n})
            res = run_campaign(c, scheme, threads=args.threads)
            dep = res.n_tx_until_depletion if res.n_tx_until_depletion is not None else ""
            dep_se = res.stderr_depletion if res.stderr_depletion is not None else ""
            rows.append((scheme.value, n, res.layout, f"{res.mean_energy_J:.9g}", f"{res.stderr_energy_J:.3g}",
                         f"{res.energy_efficiency_bpj:.9g}", f"{res.stderr_efficiency_bpj:.3g}",
                         dep, dep_se, f"{res.relay_fraction_p:.6f}"))
    with _open_out(args.out) as fh:
        _emit(fh, cfg, "scheme,N,layout,mean_energy_J,stderr,ee_bpJ,stderr,n_tx_depletion,stderr,relay_fraction", rows)
    return EXIT_OK


def cmd_protocol_trace(cfg: ScenarioConfig, args) -> int:
    rng = replication_rng(cfg.seed, 0)
    env = _build_env(cfg, rng)
    buf = _DrawBuffer(rng)
    lines = []
    for slot in range(args.slots):
        src = int(rng.integers(0, cfg.n_devices))
        cand_ids = env.neighbors[src]
        z = buf.normals(1 + cand_ids.size)
        f = buf.exponentials(cand_ids.size)
        x_src = env.mean_bs_db[src] + cfg.sigma_db * float(z[0])
        src_snap = DeviceSnapshot(src, SnrSample.from_db(x_src, Hop.TO_BASE_STATION),
                                  None, env.devices[src].pckt_w)
        cands = []
        for j, cid in enumerate(cand_ids):
            x_c = env.mean_bs_db[cid] + cfg.sigma_db * float(z[1 + j])
            g_d = env.d2d_mean_lin[src, cid] * float(f[j])
            cands.append(DeviceSnapshot(int(cid), SnrSample.from_db(x_c, Hop.TO_BASE_STATION),
                                        SnrSample.from_linear(max(g_d, 1e-300), Hop.DEVICE_TO_DEVICE),
                                        env.devices[cid].pckt_w))
        outcome = run_selection_round(
            src_snap, cands, SelectionMode.SINGLE_HOP, env.oh, env.backoff, env.radio,
            gamma_th_db=cfg.gamma_th_db, gamma_th_d2d_db=cfg.gamma_th_d2d_db,
            contention=env.adjacency, collect_events=True)
        lines.append(f"# slot {slot}: source={src} path={outcome.path.value} "
                     f"reason={outcome.reason.value} relay={outcome.relay_id} "
                     f"total_J={outcome.breakdown.total_J:.6e} latency_s={outcome.latency_s:.6e}")
        for ev in sorted(outcome.events, key=lambda e: (e.time_s, e.device_id)):
            lines.append(f"{ev.time_s:.9f},{ev.device_id},{ev.kind},{ev.energy_J:.9e}")
    with _open_out(args.out) as fh:
        for line in cfg.echo_lines():
            fh.write(line + "\n")
        fh.write("time_s,device_id,event_kind,energy_J\n")
        fh.write("\n".join(lines) + "\n")
    return EXIT_OK


def cmd_verify(cfg: ScenarioConfig, args) -> int:
    results = acceptance.run_all(master_seed=cfg.seed, threads=args.threads, only=args.only)
    out_lines = [f"{TOOL_VERSION} acceptance report"]
    all_ok = True
    for r in results:
        flag = "PASS" if r.passed else "FAIL"
        all_ok &= r.passed
        out_lines.append(f"[{flag}] criterion {r.cid}: {r.name} ({r.runtime_s:.1f}s)")
        for line in r.measured.splitlines():
            out_lines.append(f"        {line}")
    text = "\n".join(out_lines)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    print(text)
    return EXIT_OK if all_ok else EXIT_ACCEPT


def _int_list(raw: str) -> list[int]:
    try:
        return [int(x) for x in raw.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma list of integers: {raw!r}")


def main(argv: list[str] | None = None) -> int:
    parser = _Parser(prog="d2dee", description=__doc__)
    parser.add_argument("--config", help="scenario config file (key = value lines) or preset name")
    parser.add_argument("--out", help="output path (default stdout)")
    parser.add_argument("--seed", type=int, help="override the config master seed")
    parser.add_argument("--threads", type=int,
                        default=int(os.environ.get("D2DEE_THREADS", "1")),
                        help="worker processes for campaigns (env D2DEE_THREADS)")
    sub = parser.add_subparsers(dest="command", required=True)

    p_bounds = sub.add_parser("bounds", help="bound/scaling verification sweep (CSV)")
    p_bounds.add_argument("--n-sweep", type=_int_list, help="comma list of device counts")
    p_bounds.add_argument("--trials", type=int, default=100_000)

    p_sim = sub.add_parser("simulate", help="campaign metrics per scheme and N (CSV)")
    p_sim.add_argument("--schemes", type=lambda s: s.split(","), required=True,
                       help=f"comma list from {[s.value for s in Scheme]}")
    p_sim.add_argument("--n-sweep", type=_int_list)

    p_trace = sub.add_parser("protocol-trace", help="per-event log of contention rounds")
    p_trace.add_argument("--slots", type=int, default=5)

    p_verify = sub.add_parser("verify", help="run the acceptance suite")
    p_verify.add_argument("--only", type=_int_list, help="restrict to these criterion ids")

    sub.add_parser("defaults", help="print every config key with its default")

    args = parser.parse_args(argv)

    if args.command == "defaults":
        print(defaults_dump(), end="")
        return EXIT_OK

    try:
        cfg = _load_config(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        cfg.validate()
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        if args.command == "bounds":
            return cmd_bounds(cfg, args)
        if args.command == "simulate":
            return cmd_simulate(cfg, args)
        if args.command == "protocol-trace":
            return cmd_protocol_trace(cfg, args)
        if args.command == "verify":
            return cmd_verify(cfg, args)
    except QuadratureError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except np.linalg.LinAlgError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    raise AssertionError("unreachable")


if __name__ == "__main__":
    sys.exit(main())
