"""Command-line harness.

Every CSV written here starts with one ``#`` comment line holding the
package version, a hash of the package sources and the fully resolved
configuration, followed by a single header row.  Floats use 6 decimals.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import itertools
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field, fields, replace
from importlib import metadata, resources
from pathlib import Path
from typing import IO, Any, Sequence

import numpy as np

from .costmodel import CostVector, score
from .exceptions import OutOfMemoryBudget, TNRefineError
from .execution import (
    DEFAULT_MEM_BUDGET,
    VALIDATION_COLUMNS,
    materialize,
    paired_validation,
    value_digest,
)
from .netcore import (
    ContractionTree,
    TensorNetwork,
    network_from_document,
    network_to_document,
    tree_from_document,
)
from .refine import RefineConfig, Rule, mechanism_stats, refine
from .seeds import export_tree, greedy_seed, import_tree, randomized_greedy_seed
from .topo import Family, TopologySpec, generate

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PARTIAL = 3

SEEDER_STREAM = 0x5EED
VALUE_STREAM = 0x7A1E


class ConfigError(ValueError):
    pass


def source_hash() -> str:
    h = hashlib.sha256()
    pkg = resources.files("tnrefine")
    for name in sorted(p.name for p in pkg.iterdir() if p.name.endswith(".py")):
        h.update(name.encode())
        h.update(pkg.joinpath(name).read_bytes())
    return h.hexdigest()[:12]


def package_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0+unknown"


# ---------------------------------------------------------------- config


@dataclass
class RunConfig:
    family: str = Family.SYCAMORE_LIKE.value
    n: list[int] = field(default_factory=lambda: [100])
    rows: int | None = None
    cols: int | None = None
    chi: list[int] = field(default_factory=lambda: [2])
    p: float = 1.0
    depth: list[int] = field(default_factory=lambda: [4])
    seed: int = 0
    seeds: int = 1
    rule: str = Rule.PARETO.value
    budget_s: float = 8.0
    walkers: int = 8
    s_cap: float | None = None
    seeder: str = "randomized"
    temperature: float = 1.0
    mem_budget: int = DEFAULT_MEM_BUDGET
    win_threshold: float = 0.05
    flop_factor: int = 2
    exec_cap_bits: float = 34.0
    jobs: int = 1

    def validate(self) -> RunConfig:
        try:
            Family(self.family)
            Rule(self.rule)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if self.seeder not in ("greedy", "randomized"):
            raise ConfigError(f"unknown seeder {self.seeder!r}")
        if self.seeds < 1 or self.walkers < 1 or self.jobs < 1:
            raise ConfigError("seeds, walkers and jobs must be >= 1")
        if not self.budget_s > 0:
            raise ConfigError("budget_s must be positive")
        if self.flop_factor < 1:
            raise ConfigError("flop_factor must be >= 1")
        return self


_LIST_KEYS = {"n", "chi", "depth"}


def _parse_ints(text: str) -> list[int]:
    out = []
    for part in str(text).split(","):
        part = part.strip()
        if not part:
            continue
        if ":" in part:
            out.extend(range(*(int(x) for x in part.split(":"))))
        else:
            out.append(int(part))
    return out


def _coerce(key: str, value: Any) -> Any:
    types = {f.name: f.type for f in fields(RunConfig)}
    if key not in types:
        raise ConfigError(f"unknown config key {key!r}")
    if value is None or (isinstance(value, str) and value.strip().lower() in ("", "none")):
        return None
    try:
        if key in _LIST_KEYS:
            return value if isinstance(value, list) else _parse_ints(value)
        kind = types[key]
        if "int" in kind and "float" not in kind:
            return int(value)
        if "float" in kind:
            return float(value)
        return str(value)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {value!r}") from exc


def read_config_file(path: str | Path) -> dict[str, Any]:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = _coerce(key.replace("-", "_"), value)
    return out


def resolve_config(args: argparse.Namespace) -> RunConfig:
    values: dict[str, Any] = {}
    if getattr(args, "config", None):
        values.update(read_config_file(args.config))
    for f in fields(RunConfig):
        v = getattr(args, f.name, None)
        if v is not None:
            values[f.name] = _coerce(f.name, v)
    values = {k: v for k, v in values.items() if v is not None or k == "s_cap"}
    return RunConfig(**values).validate()


def header_comment(config: RunConfig | dict) -> str:
    payload = asdict(config) if isinstance(config, RunConfig) else config
    return f"# tnrefine {package_version()} src={source_hash()} config={json.dumps(payload, sort_keys=True)}"


# ---------------------------------------------------------------- cells


@dataclass(frozen=True)
class Cell:
    family: str
    n: int | None
    rows: int | None
    cols: int | None
    chi: int
    p: float
    depth: int
    seed: int

    def topology(self) -> TopologySpec:
        return TopologySpec(
            family=self.family,
            n=self.n,
            rows=self.rows,
            cols=self.cols,
            p=self.p,
            m=self.depth,
            chi=self.chi,
            seed=self.seed,
        )

    @property
    def net_id(self) -> str:
        fam = Family(self.family)
        if fam is Family.SYCAMORE_CIRCUIT:
            size = f"m{self.depth}"
        elif self.rows is not None and self.cols is not None:
            size = f"{self.rows}x{self.cols}"
        else:
            size = f"n{self.n}"
        return f"{fam.value}-{size}-chi{self.chi}-s{self.seed}"


def expand_cells(config: RunConfig) -> list[Cell]:
    fam = Family(config.family)
    sizes: Sequence[int | None]
    if fam is Family.SYCAMORE_CIRCUIT:
        sizes, depths = [None], config.depth
    elif fam is Family.SYCAMORE_53 or (config.rows is not None and config.cols is not None):
        sizes, depths = [None], config.depth[:1]
    else:
        sizes, depths = config.n, config.depth[:1]
    seeds = range(config.seed, config.seed + config.seeds)
    return [
        Cell(fam.value, n, config.rows, config.cols, chi, config.p, m, s)
        for n, m, chi, s in itertools.product(sizes, depths, config.chi, seeds)
    ]


def build_seed(net: TensorNetwork, cell: Cell, config: RunConfig) -> ContractionTree:
    """Seed tree for a cell.

    Uniform-bond networks are seeded on their bond-2 copy, so the seed
    depends on topology and cell seed only and a chi sweep reuses it.
    """
    if len(set(net.bonds)) == 1:
        net = net.with_bonds(2)
    if config.seeder == "greedy":
        return greedy_seed(net)
    rng = np.random.default_rng([cell.seed, SEEDER_STREAM])
    return randomized_greedy_seed(net, rng, config.temperature)


def refine_config(config: RunConfig, cell_seed: int) -> RefineConfig:
    return RefineConfig(
        rule=config.rule,
        budget_s=config.budget_s,
        walkers=config.walkers,
        s_cap=config.s_cap,
        seed=cell_seed,
        flop_factor=config.flop_factor,
    )


def _f(x: float) -> str:
    return f"{x:.6f}"


SWEEP_COLUMNS = (
    ["net_id", "family", "n", "chi", "seed", "seeder", "rule", "status"]
    + [f"seed_{c}" for c in ("f_T", "f_S", "f_sigma", "f_eps")]
    + [f"ref_{c}" for c in ("f_T", "f_S", "f_sigma", "f_eps")]
    + ["delta_f_T", "win", "certificate", "t_seed", "t_refine", "accepted", "message"]
)


def _sweep_row(cell: Cell, config: RunConfig, net_n: int | str, seed_cost, ref_cost, status, cert, t_seed, t_ref, accepted, msg):
    row = [cell.net_id, cell.family, net_n, cell.chi, cell.seed, config.seeder, config.rule, status]
    for cost in (seed_cost, ref_cost):
        row += cost.csv_fields() if cost is not None else [""] * 4
    if seed_cost is not None and ref_cost is not None:
        delta = seed_cost.f_T - ref_cost.f_T
        row += [_f(delta), int(delta > config.win_threshold)]
    else:
        row += ["", ""]
    row += [cert, _f(t_seed), _f(t_ref), accepted, msg]
    return row


def run_sweep_cell(cell: Cell, config: RunConfig) -> tuple[list, dict | None]:
    """One sweep row plus the two trees (or ``None`` on failure)."""
    t_seed = t_ref = 0.0
    net_n: int | str = cell.n if cell.n is not None else ""
    try:
        net = generate(cell.topology())
        net_n = net.n_tensors
        start = time.perf_counter()
        seed_tree = build_seed(net, cell, config)
        t_seed = time.perf_counter() - start
        result = refine(net, seed_tree, refine_config(config, cell.seed))
        t_ref = result.elapsed
        trees = {
            "net_id": cell.net_id,
            "cell": asdict(cell),
            "seed_tree": export_tree(seed_tree)["pairs"],
            "refined_tree": export_tree(result.tree)["pairs"],
            "rule": config.rule,
            "certificate": result.certificate.value,
        }
        row = _sweep_row(
            cell, config, net_n, result.seed_cost, result.cost, "OK",
            result.certificate.value, t_seed, t_ref, result.accepted, "",
        )
        return row, trees
    except Exception as exc:  # noqa: BLE001 - per-cell failures become rows
        msg = f"{type(exc).__name__}: {exc}".replace("\n", " ")
        return _sweep_row(cell, config, net_n, None, None, "ERROR", "", t_seed, t_ref, 0, msg), None


def _map_cells(fn, cells: list[Cell], config: RunConfig) -> list:
    if config.jobs == 1 or len(cells) == 1:
        return [fn(c, config) for c in cells]
    with ProcessPoolExecutor(max_workers=config.jobs) as pool:
        return list(pool.map(fn, cells, itertools.repeat(config)))


@contextmanager
def _output(path: str | None):
    if path in (None, "-"):
        yield sys.stdout
        return
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        yield fh


def write_csv(out: IO[str], config, columns: Sequence[str], rows: Sequence[Sequence[Any]]) -> None:
    out.write(header_comment(config) + "\n")
    w = csv.writer(out, lineterminator="\n")
    w.writerow(columns)
    w.writerows(rows)
    out.flush()


def read_csv(path: str | Path) -> tuple[str, list[dict[str, str]]]:
    """Return the header comment and the data rows of a harness CSV."""
    with open(path, newline="") as fh:
        comment = fh.readline().rstrip("\n")
        return comment, list(csv.DictReader(fh))


# ---------------------------------------------------------------- commands


def cmd_sweep(config: RunConfig, out: str | None, trees_out: str | None = None) -> int:
    cells = expand_cells(config)
    results = _map_cells(run_sweep_cell, cells, config)
    rows = [r for r, _ in results]
    with _output(out) as fh:
        write_csv(fh, config, SWEEP_COLUMNS, rows)
    if trees_out:
        with open(trees_out, "w") as fh:
            fh.write(json.dumps({"config": asdict(config)}) + "\n")
            for _, trees in results:
                if trees is not None:
                    fh.write(json.dumps(trees) + "\n")
    failed = sum(1 for r in rows if r[7] != "OK")
    return EXIT_PARTIAL if failed else EXIT_OK


def cmd_rescore(trees_path: str, out: str | None, flop_factor: int, s_cap: float | None = None) -> int:
    """Recompute a sweep's cost columns from its saved trees."""
    lines = Path(trees_path).read_text().splitlines()
    config = RunConfig(**json.loads(lines[0])["config"])
    config = replace(config, flop_factor=flop_factor, s_cap=s_cap if s_cap is not None else config.s_cap)
    rows = []
    for line in lines[1:]:
        rec = json.loads(line)
        cell = Cell(**rec["cell"])
        net = generate(cell.topology())
        seed_tree = tree_from_document({"pairs": rec["seed_tree"]}, net.n_tensors)
        ref_tree = tree_from_document({"pairs": rec["refined_tree"]}, net.n_tensors)
        sc = score(seed_tree, net, config.s_cap, flop_factor=flop_factor)
        rc = score(ref_tree, net, config.s_cap, flop_factor=flop_factor)
        rows.append(_sweep_row(cell, config, net.n_tensors, sc, rc, "OK", "", 0.0, 0.0, 0, "rescored"))
    with _output(out) as fh:
        write_csv(fh, config, SWEEP_COLUMNS, rows)
    return EXIT_OK


MECHANISM_COLUMNS = ("net_id", "family", "n", "chi", "seed", "seeder", "seed_f_T", "p_pareto", "best_dfT", "status")


def run_mechanism_cell(cell: Cell, config: RunConfig) -> list:
    try:
        net = generate(cell.topology())
        tree = build_seed(net, cell, config)
        stats = mechanism_stats(net, tree, config.s_cap)
        f_T = score(tree, net).f_T
        return [cell.net_id, cell.family, net.n_tensors, cell.chi, cell.seed, config.seeder,
                _f(f_T), _f(stats.p_pareto), _f(stats.best_single_move_dfT), "OK"]
    except Exception as exc:  # noqa: BLE001
        return [cell.net_id, cell.family, cell.n or "", cell.chi, cell.seed, config.seeder,
                "", "", "", f"ERROR {type(exc).__name__}: {exc}"]


def cmd_mechanism(config: RunConfig, out: str | None) -> int:
    rows = _map_cells(run_mechanism_cell, expand_cells(config), config)
    with _output(out) as fh:
        write_csv(fh, config, MECHANISM_COLUMNS, rows)
    return EXIT_PARTIAL if any(r[-1] != "OK" for r in rows) else EXIT_OK


VALIDATE_COLUMNS = (*VALIDATION_COLUMNS, "status")


def run_validate_cell(cell: Cell, config: RunConfig) -> list[list]:
    net_id = cell.net_id
    try:
        net = generate(cell.topology())
        seed_tree = build_seed(net, cell, config)
        refined = refine(net, seed_tree, refine_config(config, cell.seed)).tree
        model = "circuit_gates" if Family(cell.family) is Family.SYCAMORE_CIRCUIT else "random_gaussian"
        worst = max(score(seed_tree, net).f_T, score(refined, net).f_T)
        if worst > config.exec_cap_bits:
            return [[net_id, "pair", "", "", "", "", f"SKIPPED f_T {worst:.2f} bits over exec cap"]]
        tensors = materialize(net, np.random.default_rng([cell.seed, VALUE_STREAM]), model, config.mem_budget)
        report = paired_validation(net, seed_tree, refined, tensors, config.mem_budget)
    except OutOfMemoryBudget as exc:
        return [[net_id, "pair", "", "", "", "", f"SKIPPED {exc}"]]
    except Exception as exc:  # noqa: BLE001
        return [[net_id, "pair", "", "", "", "", f"ERROR {type(exc).__name__}: {exc}"]]
    agreement = repr(report.agreement)
    rows = []
    for tree_id, flops, f_T, value in (
        ("seed", report.flops_a, report.f_T_a, report.value_a),
        ("refined", report.flops_b, report.f_T_b, report.value_b),
    ):
        digest = value_digest(value)
        rows.append([net_id, tree_id, flops, _f(f_T), digest, agreement, "OK"])
    return rows


def cmd_validate(config: RunConfig, out: str | None) -> int:
    results = _map_cells(run_validate_cell, expand_cells(config), config)
    rows = [r for rs in results for r in rs]
    with _output(out) as fh:
        write_csv(fh, config, VALIDATE_COLUMNS, rows)
    return EXIT_PARTIAL if any(r[-1].startswith("ERROR") for r in rows) else EXIT_OK


def _write_json(obj: Any, out: str | None) -> None:
    text = json.dumps(obj, indent=None, separators=(",", ":"))
    if out in (None, "-"):
        print(text)
    else:
        Path(out).write_text(text + "\n")


def _load_network(args, config: RunConfig) -> TensorNetwork:
    if getattr(args, "net", None):
        return network_from_document(json.loads(Path(args.net).read_text()))
    cells = expand_cells(replace(config, seeds=1))
    return generate(cells[0].topology())


def cmd_generate(args, config: RunConfig) -> int:
    _write_json(network_to_document(_load_network(args, config)), args.out)
    return EXIT_OK


def cmd_seed(args, config: RunConfig) -> int:
    net = _load_network(args, config)
    cell = expand_cells(replace(config, seeds=1))[0]
    tree = build_seed(net, cell, config)
    _write_json(export_tree(tree, score(tree, net, config.s_cap, flop_factor=config.flop_factor)), args.out)
    return EXIT_OK


def cmd_score(args, config: RunConfig) -> int:
    net = _load_network(args, config)
    tree = import_tree(args.tree, net.n_tensors)
    cost = score(tree, net, config.s_cap, flop_factor=config.flop_factor)
    with _output(args.out) as fh:
        write_csv(fh, config, ("n", *CostVector._fields), [[net.n_tensors, *cost.csv_fields()]])
    return EXIT_OK


def cmd_refine(args, config: RunConfig) -> int:
    net = _load_network(args, config)
    if args.tree:
        seed_tree = import_tree(args.tree, net.n_tensors)
    else:
        seed_tree = build_seed(net, expand_cells(replace(config, seeds=1))[0], config)
    result = refine(net, seed_tree, refine_config(config, config.seed))
    doc = export_tree(result.tree, result.cost)
    doc["certificate"] = result.certificate.value
    doc["seed_cost"] = result.seed_cost.csv_fields()
    _write_json(doc, args.out)
    if args.trace:
        with open(args.trace, "w", newline="") as fh:
            fh.write(header_comment(config) + "\n")
            result.write_trace_csv(fh)
    return EXIT_OK


# ---------------------------------------------------------------- parser


def _add_common(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("instance and run settings")
    g.add_argument("--config", help="flat key = value file; flags override it")
    g.add_argument("--family", choices=[f.value for f in Family])
    g.add_argument("--n", help="tensor count(s), e.g. 100 or 50,100")
    g.add_argument("--rows", type=int)
    g.add_argument("--cols", type=int)
    g.add_argument("--chi", help="bond dimension(s), e.g. 2,4,8")
    g.add_argument("--p", type=float, help="diagonal density for grid_diag_p")
    g.add_argument("--depth", help="circuit depth(s) m")
    g.add_argument("--seed", type=int, help="first instance seed")
    g.add_argument("--seeds", type=int, help="number of consecutive seeds")
    g.add_argument("--rule", choices=[r.value for r in Rule])
    g.add_argument("--budget-s", dest="budget_s", type=float)
    g.add_argument("--walkers", type=int)
    g.add_argument("--s-cap", dest="s_cap", type=float)
    g.add_argument("--seeder", choices=["greedy", "randomized"])
    g.add_argument("--temperature", type=float, help="seeder noise in bits")
    g.add_argument("--mem-budget", dest="mem_budget", type=int, help="bytes")
    g.add_argument("--win-threshold", dest="win_threshold", type=float)
    g.add_argument("--flop-factor", dest="flop_factor", type=int)
    g.add_argument("--exec-cap-bits", dest="exec_cap_bits", type=float, help="skip validation cells above this f_T")
    g.add_argument("--jobs", type=int)
    g.add_argument("--out", help="output path (default stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tnrefine", description="contraction-tree refinement harness")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in (
        ("generate", "write a network document"),
        ("seed", "write a seed tree document"),
        ("score", "score a tree"),
        ("refine", "refine a seed tree"),
        ("mechanism", "one-move Pareto statistics of seed trees"),
        ("validate", "paired dense execution of seed and refined trees"),
        ("sweep", "seed + refine over a grid of cells"),
        ("rescore", "recompute a sweep from its saved trees"),
    ):
        p = sub.add_parser(name, help=help_)
        _add_common(p)
        if name in ("generate", "seed", "score", "refine"):
            p.add_argument("--net", help="network document (instead of generating one)")
        if name in ("score", "refine"):
            p.add_argument("--tree", required=name == "score", help="tree document or path")
        if name == "refine":
            p.add_argument("--trace", help="write per-walker cost trace CSV here")
        if name == "sweep":
            p.add_argument("--trees-out", dest="trees_out", help="JSON lines of seed/refined trees")
        if name == "rescore":
            p.add_argument("--trees", required=True, help="--trees-out file of a sweep")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = resolve_config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.command == "sweep":
            return cmd_sweep(config, args.out, args.trees_out)
        if args.command == "rescore":
            return cmd_rescore(args.trees, args.out, config.flop_factor, args.s_cap)
        if args.command == "mechanism":
            return cmd_mechanism(config, args.out)
        if args.command == "validate":
            return cmd_validate(config, args.out)
        return {"generate": cmd_generate, "seed": cmd_seed, "score": cmd_score, "refine": cmd_refine}[
            args.command
        ](args, config)
    except (TNRefineError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    raise SystemExit(main())
