"""Command-line front end.

Subcommands:

    run     simulate a trace in all configured modes, write a JSON report
    gen     emit a synthetic trace (loop or random workload)
    check   differential audit; nonzero exit on asserted violations
    sweep   grid of buffer shapes -> CSV (or JSON) of counts and power

Exit codes: 0 success, 1 configuration error, 2 I/O error, 3 trace parse
error.  Reports are deterministic: identical invocations produce
byte-identical output.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from typing import Dict, List, Optional

import yaml

from . import engine, harness, trace_io
from .energy_stats import (
    Counters,
    EnergyParams,
    evaluate,
    mab_power_lookup,
    power_state_for_mode,
)
from .engine import LaneSpec
from .geometry import CacheGeometry
from .icache_path import TraceOrderError
from .mab import MabConfig
from .trace_io import TraceParseError

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_IO = 2
EXIT_TRACE = 3

D_MODE_SLOTS = ("baseline", "mab")
I_MODE_SLOTS = ("baseline", "intra_only", "full_mab")

DEFAULT_CONFIG: dict = {
    "geometry": {
        "address_bits": 32,
        "offset_bits": 5,
        "index_bits": 9,
        "ways": 2,
        "instr_stride_bytes": 4,
    },
    "d_mab": {"n_tag_rows": 2, "n_index_cols": 8, "precise_invalidation": True},
    "i_mab": {"n_tag_rows": 2, "n_index_cols": 16, "precise_invalidation": True},
    "d_modes": ["baseline", "mab"],
    "i_modes": ["baseline", "intra_only", "full_mab"],
    "counting": {
        "refill_tag_writes": 1,
        "refill_way_writes": 1,
        "allocate_on_store": True,
    },
    "energy": {
        "e_way": 2.0e-10,        # placeholder; supply circuit-specific values
        "e_tag": 1.0e-10,        # placeholder
        "p_mab_active": None,    # None -> built-in power table by buffer shape
        "p_mab_sleep": None,
        "clock_hz": 360.0e6,
        "cycles_per_access": 1,
    },
    "audit": True,
    "trace": None,               # path, or {"generator": "loop"|"random", ...}
    "seed": 0,
}


class ConfigError(ValueError):
    pass


class _CliUsageError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors; the CLI reserves 2 for I/O, so bad
    # usage is rerouted to the config-error exit code.
    def error(self, message):
        raise _CliUsageError(message)


def _deep_merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], value)
        else:
            out[key] = value
    return out


def load_config(path: Optional[str]) -> dict:
    cfg = DEFAULT_CONFIG
    if path is not None:
        with open(path, "r", encoding="utf-8") as fh:
            loaded = yaml.safe_load(fh)
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, dict):
            raise ConfigError(f"config root must be a mapping, got {type(loaded).__name__}")
        unknown = set(loaded) - set(DEFAULT_CONFIG)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg = _deep_merge(cfg, loaded)
    return cfg


def _build_geometry(cfg: dict) -> CacheGeometry:
    g = cfg["geometry"]
    try:
        return CacheGeometry.from_bits(
            address_bits=int(g["address_bits"]),
            offset_bits=int(g["offset_bits"]),
            index_bits=int(g["index_bits"]),
            ways=int(g["ways"]),
            instr_stride_bytes=int(g["instr_stride_bytes"]),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigError(f"bad geometry: {e}") from e


def _build_mab(cfg: dict, key: str) -> MabConfig:
    m = cfg[key]
    try:
        return MabConfig(
            n_tag_rows=int(m["n_tag_rows"]),
            n_index_cols=int(m["n_index_cols"]),
            precise_invalidation=bool(m["precise_invalidation"]),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigError(f"bad {key}: {e}") from e


def _build_lanes(cfg: dict, literal_policy: bool) -> List[LaneSpec]:
    d_mab = _build_mab(cfg, "d_mab")
    i_mab = _build_mab(cfg, "i_mab")
    lanes: List[LaneSpec] = []
    for mode in cfg["d_modes"]:
        if mode not in D_MODE_SLOTS:
            raise ConfigError(f"unknown d mode {mode!r}")
        lanes.append(LaneSpec("d", mode, d_mab if mode == "mab" else None))
    for mode in cfg["i_modes"]:
        if mode not in I_MODE_SLOTS:
            raise ConfigError(f"unknown i mode {mode!r}")
        lanes.append(LaneSpec("i", mode, i_mab if mode == "full_mab" else None))
    if literal_policy:
        if "mab" in cfg["d_modes"]:
            lanes.append(LaneSpec("d", "mab", replace(d_mab, precise_invalidation=False)))
        if "full_mab" in cfg["i_modes"]:
            lanes.append(LaneSpec("i", "full_mab", replace(i_mab, precise_invalidation=False)))
    return lanes


def _energy_params(cfg: dict, mab: MabConfig, mab_power_needed: bool = True) -> EnergyParams:
    e = cfg["energy"]
    active, sleep = e["p_mab_active"], e["p_mab_sleep"]
    if active is None or sleep is None:
        table = mab_power_lookup(mab.n_tag_rows, mab.n_index_cols)
        if table is None:
            if mab_power_needed:
                raise ConfigError(
                    f"no tabulated buffer power for {mab.n_tag_rows}x{mab.n_index_cols}; "
                    "set energy.p_mab_active and energy.p_mab_sleep"
                )
            table = (0.0, 0.0)
        active = table[0] if active is None else active
        sleep = table[1] if sleep is None else sleep
    try:
        return EnergyParams(
            e_way=float(e["e_way"]),
            e_tag=float(e["e_tag"]),
            p_mab_active=float(active),
            p_mab_sleep=float(sleep),
            clock_hz=float(e["clock_hz"]),
            cycles_per_access=int(e["cycles_per_access"]),
        )
    except (KeyError, TypeError, ValueError) as err:
        raise ConfigError(f"bad energy parameters: {err}") from err


def _load_trace(cfg: dict, trace_arg: Optional[str], seed: int, geometry: CacheGeometry):
    source = trace_arg if trace_arg is not None else cfg["trace"]
    if source is None:
        raise ConfigError("no trace configured: pass --trace or set 'trace' in the config")
    if isinstance(source, dict):
        return _generate(dict(source), seed)
    with open(source, "r", encoding="utf-8") as fh:
        return trace_io.parse(fh, address_bits=geometry.address_bits)


def _generate(spec: dict, seed: int):
    kind = spec.pop("generator", None)
    spec.setdefault("seed", seed)
    try:
        if kind == "loop":
            return trace_io.gen_loop(**spec)
        if kind == "random":
            return trace_io.gen_random(**spec)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"bad generator spec: {e}") from e
    raise ConfigError(f"unknown generator {kind!r} (expected 'loop' or 'random')")


def _zeroed_power() -> dict:
    d = evaluate(Counters(), EnergyParams(), "off").as_dict()
    d["p_mab_state"] = "off"
    return d


def _reduction_pct(base: float, value: float) -> float:
    if base <= 0:
        return 0.0
    return 100.0 * (1.0 - value / base)


def _build_report(cfg: dict, geometry: CacheGeometry, report: harness.AuditReport) -> dict:
    counters: Dict[str, dict] = {"d": {}, "i": {}}
    power: Dict[str, dict] = {"d": {}, "i": {}}
    reductions: Dict[str, dict] = {"d": {}, "i": {}}
    mabs = {"d": _build_mab(cfg, "d_mab"), "i": _build_mab(cfg, "i_mab")}

    for side, slots in (("d", D_MODE_SLOTS), ("i", I_MODE_SLOTS)):
        params = _energy_params(cfg, mabs[side])
        for mode in slots:
            name = f"{side}:{mode}"
            c = report.counters.get(name, Counters())
            counters[side][mode] = c.as_dict()
            state = power_state_for_mode(mode)
            p = evaluate(c, params, state).as_dict()
            p["p_mab_state"] = state
            if name not in report.counters:
                p = _zeroed_power()
            power[side][mode] = p
        base = report.counters.get(f"{side}:baseline")
        base_power = power[side]["baseline"]["average_power"]
        for mode in slots[1:]:
            name = f"{side}:{mode}"
            if base is None or name not in report.counters:
                reductions[side][mode] = {"tag_reads_pct": 0.0, "power_pct": 0.0}
                continue
            c = report.counters[name]
            reductions[side][mode] = {
                "tag_reads_pct": _reduction_pct(base.tag_reads, c.tag_reads),
                "power_pct": _reduction_pct(base_power, power[side][mode]["average_power"]),
            }

    # lanes beyond the standard slots (e.g. literal-policy twins)
    extra = {
        name: c.as_dict()
        for name, c in report.counters.items()
        if name.count(":") > 1
    }

    return {
        "backend": engine.active_backend(),
        "geometry": {
            "address_bits": geometry.address_bits,
            "offset_bits": geometry.offset_bits,
            "index_bits": geometry.index_bits,
            "tag_bits": geometry.tag_bits,
            "ways": geometry.ways,
            "line_bytes": geometry.line_bytes,
            "sets": geometry.sets,
            "instr_stride_bytes": geometry.instr_stride_bytes,
        },
        "modes": {"d": list(cfg["d_modes"]), "i": list(cfg["i_modes"])},
        "trace_records": report.steps,
        "counters": counters,
        "extra_lanes": extra,
        "power": power,
        "reductions": reductions,
        "violations": [v.as_dict() for v in report.violations],
        "violations_total": report.violations_total,
        "literal_policy_warning": bool(report.findings),
    }


def _write_output(text: str, out: Optional[str]) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _run_differential(args, literal_policy: bool) -> tuple:
    cfg = load_config(args.config)
    seed = args.seed if args.seed is not None else int(cfg["seed"])
    geometry = _build_geometry(cfg)
    lanes = _build_lanes(cfg, literal_policy)
    records = _load_trace(cfg, args.trace, seed, geometry)
    counting = cfg["counting"]
    report = harness.differential_run(
        records,
        geometry,
        lanes,
        audit=bool(cfg["audit"]),
        allocate_on_store=bool(counting["allocate_on_store"]),
        refill_tag_writes=int(counting["refill_tag_writes"]),
        refill_way_writes=int(counting["refill_way_writes"]),
        backend=args.backend,
        tamper=getattr(args, "_tamper", None),
    )
    return cfg, geometry, report


def cmd_run(args) -> int:
    if args.format != "json":
        raise ConfigError("the run report is JSON; use --format json")
    cfg, geometry, report = _run_differential(args, args.literal_policy)
    _write_output(_dump_json(_build_report(cfg, geometry, report)), args.out)
    return EXIT_OK


def cmd_check(args) -> int:
    if args.format != "json":
        raise ConfigError("the check report is JSON; use --format json")
    if args.inject_fault:
        def _tamper(results):
            # flip one recorded outcome in the last lane to prove the
            # transparency checker trips
            for res in reversed(list(results.values())):
                hits = res.arrays["cache_hit"]
                idx = hits.nonzero()[0]
                if idx.size:
                    hits[idx[0]] ^= 1
                    return
        args._tamper = _tamper
    cfg, geometry, report = _run_differential(args, args.literal_policy)
    _write_output(_dump_json(_build_report(cfg, geometry, report)), args.out)
    if not report.ok:
        print(f"check FAILED: {len(report.asserted_violations)} asserted violation(s)",
              file=sys.stderr)
        return EXIT_CONFIG
    if report.findings:
        print(f"check passed with {len(report.findings)} policy finding(s)", file=sys.stderr)
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    seed = args.seed if args.seed is not None else int(cfg["seed"])
    geometry = _build_geometry(cfg)
    records = _load_trace(cfg, args.trace, seed, geometry)
    try:
        n1_list = [int(x) for x in args.n1.split(",") if x]
        n2_list = [int(x) for x in args.n2.split(",") if x]
    except ValueError as e:
        raise ConfigError(f"bad n1/n2 list: {e}") from e
    mab = _build_mab(cfg, "d_mab" if args.side == "d" else "i_mab")
    # per-cell power comes from the table; fall back to explicit values
    energy_cfg = dict(cfg["energy"])
    if energy_cfg["p_mab_active"] is None or energy_cfg["p_mab_sleep"] is None:
        base = mab_power_lookup(mab.n_tag_rows, mab.n_index_cols) or (0.0, 0.0)
        if energy_cfg["p_mab_active"] is None:
            energy_cfg["p_mab_active"] = base[0]
        if energy_cfg["p_mab_sleep"] is None:
            energy_cfg["p_mab_sleep"] = base[1]
    params = EnergyParams(
        e_way=float(energy_cfg["e_way"]),
        e_tag=float(energy_cfg["e_tag"]),
        p_mab_active=float(energy_cfg["p_mab_active"]),
        p_mab_sleep=float(energy_cfg["p_mab_sleep"]),
        clock_hz=float(energy_cfg["clock_hz"]),
        cycles_per_access=int(energy_cfg["cycles_per_access"]),
    )
    counting = cfg["counting"]
    cells = harness.sweep(
        records,
        geometry,
        n1_list,
        n2_list,
        side=args.side,
        precise=mab.precise_invalidation,
        energy=params,
        allocate_on_store=bool(counting["allocate_on_store"]),
        refill_tag_writes=int(counting["refill_tag_writes"]),
        refill_way_writes=int(counting["refill_way_writes"]),
        backend=args.backend,
    )
    if args.format == "csv":
        lines = ["n1,n2,tag_reads,way_accesses,mab_hits,total_energy,avg_power"]
        for cell in cells:
            lines.append(
                f"{cell.n1},{cell.n2},{cell.counters.tag_reads},"
                f"{cell.counters.way_accesses},{cell.counters.mab_hits},"
                f"{cell.power.total_energy!r},{cell.power.average_power!r}"
            )
        _write_output("\n".join(lines) + "\n", args.out)
    else:
        payload = [
            {
                "n1": cell.n1,
                "n2": cell.n2,
                "counters": cell.counters.as_dict(),
                "power": cell.power.as_dict(),
            }
            for cell in cells
        ]
        _write_output(_dump_json(payload), args.out)
    return EXIT_OK


def cmd_gen(args) -> int:
    seed = args.seed if args.seed is not None else 0
    if args.generator == "loop":
        records = trace_io.gen_loop(
            iterations=args.iterations,
            body_fetches=args.body_fetches,
            loads_per_iter=args.loads_per_iter,
            distinct_bases=args.distinct_bases,
            disp_stride=args.disp_stride,
            stores=args.stores,
            start_pc=args.start_pc,
            line_bytes=args.line_bytes,
            instr_stride=args.instr_stride,
            seed=seed,
        )
    else:
        records = trace_io.gen_random(
            args.n,
            seed,
            pc_start=args.pc_start,
            pc_range=args.pc_range,
            base_pool=args.base_pool,
            far_disp_frac=args.far_disp_frac,
            store_frac=args.store_frac,
        )
    _write_output(trace_io.emit(records), args.out)
    return EXIT_OK


def _hex_int(text: str) -> int:
    return int(text, 0)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="YAML/JSON config file")
    common.add_argument("--seed", type=int, default=None, help="override the config seed")
    common.add_argument("--out", metavar="PATH", help="output file (default stdout)")
    common.add_argument("--format", choices=("json", "csv"), default=None)
    common.add_argument("--backend", choices=("python", "compiled"), default=None,
                        help="force a simulation engine")

    parser = _Parser(prog="waymemo",
                     description="Way-memoization cache simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", parents=[common], help="simulate a trace, emit a JSON report")
    run.add_argument("--trace", metavar="PATH", help="trace file (overrides config)")
    run.add_argument("--literal-policy", action="store_true",
                     help="also run update-rules-only invalidation lanes")
    run.set_defaults(func=cmd_run, fmt_default="json")

    check = sub.add_parser("check", parents=[common],
                           help="differential audit; nonzero exit on violations")
    check.add_argument("--trace", metavar="PATH")
    check.add_argument("--literal-policy", action="store_true")
    check.add_argument("--inject-fault", action="store_true", help=argparse.SUPPRESS)
    check.set_defaults(func=cmd_check, fmt_default="json")

    swp = sub.add_parser("sweep", parents=[common], help="grid of buffer shapes")
    swp.add_argument("--trace", metavar="PATH")
    swp.add_argument("--side", choices=("d", "i"), default="d")
    swp.add_argument("--n1", default="1,2", help="comma list of tag-row counts")
    swp.add_argument("--n2", default="4,8,16,32", help="comma list of index-column counts")
    swp.set_defaults(func=cmd_sweep, fmt_default="csv")

    gen = sub.add_parser("gen", parents=[common], help="generate a synthetic trace")
    gsub = gen.add_subparsers(dest="generator", required=True)
    loop = gsub.add_parser("loop", parents=[common])
    loop.add_argument("--iterations", "--iters", type=int, default=1000)
    loop.add_argument("--body-fetches", type=int, default=16)
    loop.add_argument("--loads-per-iter", type=int, default=0)
    loop.add_argument("--distinct-bases", type=int, default=1)
    loop.add_argument("--disp-stride", type=int, default=4)
    loop.add_argument("--stores", action="store_true")
    loop.add_argument("--start-pc", type=_hex_int, default=0x1000)
    loop.add_argument("--line-bytes", type=int, default=32)
    loop.add_argument("--instr-stride", type=int, default=4)
    loop.set_defaults(func=cmd_gen, fmt_default="json")
    rnd = gsub.add_parser("random", parents=[common])
    rnd.add_argument("--n", type=int, default=100000)
    rnd.add_argument("--pc-start", type=_hex_int, default=0x4000)
    rnd.add_argument("--pc-range", type=_hex_int, default=1 << 16)
    rnd.add_argument("--base-pool", type=int, default=8)
    rnd.add_argument("--far-disp-frac", type=float, default=0.02)
    rnd.add_argument("--store-frac", type=float, default=0.3)
    rnd.set_defaults(func=cmd_gen, fmt_default="json")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.format is None:
            args.format = getattr(args, "fmt_default", "json")
        return args.func(args)
    except _CliUsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except TraceParseError as e:
        print(f"trace error: {e}", file=sys.stderr)
        return EXIT_TRACE
    except TraceOrderError as e:
        print(f"trace error: {e}", file=sys.stderr)
        return EXIT_TRACE
    except yaml.YAMLError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as e:
        print(f"i/o error: {e}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
