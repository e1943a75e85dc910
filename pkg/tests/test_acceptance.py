"""End-to-end acceptance checks.

Each test records one PASS/FAIL line (shown in the terminal summary) and
then asserts.  Sweeps run once per session through the command-line
harness and are shared between checks; criterion 10 rescores every sweep
written here.
"""

import json
import statistics
from pathlib import Path

import numpy as np
import pytest

from conftest import ACCEPTANCE, random_network
from tnrefine.cli import Cell, main, read_csv
from tnrefine.costmodel import score
from tnrefine.netcore import tree_from_document
from tnrefine.nni import apply, neighborhood, revert
from tnrefine.oracle import dp_optimal_fT, enumerate_trees
from tnrefine.refine import RefineConfig, Rule, refine
from tnrefine.seeds import random_seed
from tnrefine.topo import generate, sycamore_circuit

CIRCUIT_TARGETS = {4: 385, 6: 526, 8: 660, 10: 786, 12: 924}


def record(k: int, ok: bool, detail: str) -> None:
    ACCEPTANCE[k] = (ok, detail)
    print(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


class Harness:
    """Runs named CLI sweeps on demand and caches their outputs."""

    def __init__(self, root: Path):
        self.root = root
        self.sweeps: dict[str, tuple[Path, Path]] = {}

    def sweep(self, name: str, *args: str) -> list[dict[str, str]]:
        if name not in self.sweeps:
            csv_path, trees = self.root / f"{name}.csv", self.root / f"{name}.jsonl"
            code = main(["sweep", *args, "--out", str(csv_path), "--trees-out", str(trees)])
            assert code == 0, f"sweep {name} exited {code}"
            self.sweeps[name] = (csv_path, trees)
        return read_csv(self.sweeps[name][0])[1]

    def trees(self, name: str) -> list[dict]:
        lines = self.sweeps[name][1].read_text().splitlines()
        return [json.loads(line) for line in lines[1:]]

    def table(self, command: str, name: str, *args: str) -> list[dict[str, str]]:
        path = self.root / f"{name}.csv"
        if not path.exists():
            code = main([command, *args, "--out", str(path)])
            assert code == 0, f"{command} {name} exited {code}"
        return read_csv(path)[1]


@pytest.fixture(scope="session")
def harness(tmp_path_factory):
    return Harness(tmp_path_factory.mktemp("acceptance"))


SYC100 = ("--family", "sycamore_like", "--n", "100", "--chi", "2")
RR100 = ("--family", "random_regular", "--n", "100", "--chi", "2")


def _col(rows, key):
    return [float(r[key]) for r in rows]


def _paired(a, b):
    by_id = {r["net_id"]: r for r in b}
    return [(r, by_id[r["net_id"]]) for r in a]


def test_execution_identity(harness):
    grids = {
        "validate_rr_chi2": ("--family", "random_regular", "--n", "10:101:10", "--chi", "2", "--seeds", "5"),
        "validate_rr_chi4": ("--family", "random_regular", "--n", "10:25:2", "--chi", "4", "--seeds", "3"),
        "validate_syc_chi2": ("--family", "sycamore_like", "--n", "10,12,16,20", "--chi", "2", "--seeds", "2"),
    }
    rows = [r for name, args in grids.items() for r in harness.table("validate", name, *args)]
    errors = [r for r in rows if r["status"].startswith("ERROR")]
    done = [r for r in rows if r["status"] == "OK" and r["tree_id"] == "refined"]
    skipped = {r["net_id"] for r in rows if r["status"].startswith("SKIPPED")}
    worst = max(abs(float(r["agreement"]) - 1) for r in done)
    ok = not errors and len(done) >= 50 and worst <= 1e-6
    record(1, ok, f"{len(done)} executed pairs, {len(skipped)} skipped, {len(errors)} errors, "
                  f"max |agreement-1| = {worst:.2e}")


def test_oracle_equivalence():
    rng = np.random.default_rng(2024)
    mismatches = reached = undercut = 0
    total = 200
    for _ in range(total):
        n = int(rng.integers(3, 8))
        net = random_network(rng, n, extra=float(rng.uniform(0, 1.5)), chi=(2, 3, 4),
                             dangling=int(rng.integers(0, 2)))
        best = min(score(t, net).f_T for t in enumerate_trees(n))
        opt, _ = dp_optimal_fT(net)
        mismatches += best != opt
        res = refine(net, random_seed(net, rng), RefineConfig(rule=Rule.SCALAR, seed=int(rng.integers(2**31))))
        reached += res.cost.f_T == opt
        undercut += res.cost.f_T < opt
    ok = mismatches == 0 and undercut == 0 and reached >= total / 2
    record(2, ok, f"enumeration/DP mismatches {mismatches}/{total}, scalar refine optimal on "
                  f"{reached}/{total}, undercuts {undercut}")


def test_nni_combinatorics():
    rng = np.random.default_rng(7)
    bad_sizes = [n for n in range(3, 51) for _ in range(3) if len(neighborhood(random_seed(n, rng))) != 4 * (n - 2)]
    broken = 0
    pairs = 10_000
    for _ in range(pairs):
        tree = random_seed(int(rng.integers(3, 51)), rng)
        moves = neighborhood(tree)
        move = moves[int(rng.integers(len(moves)))]
        back = revert(apply(tree, move), move)
        broken += (back.left, back.right, back.root) != (tree.left, tree.right, tree.root)
    ok = not bad_sizes and broken == 0
    record(3, ok, f"size mismatches at n={sorted(set(bad_sizes))}, apply/revert failures {broken}/{pairs}")


def _dominates(a, b):
    return all(x <= y for x, y in zip(a, b)) and any(x < y for x, y in zip(a, b))


def _pareto_sweeps(harness):
    harness.sweep("syc100", *SYC100, "--seeds", "15")
    harness.sweep("rr100", *RR100, "--seeds", "15")
    harness.sweep("ablation_pareto", "--family", "sycamore_like", "--n", "50,100", "--chi", "2",
                  "--seeds", "5", "--rule", "pareto")


def _scalar_sweeps(harness):
    harness.sweep("ablation_scalar", "--family", "sycamore_like", "--n", "50,100", "--chi", "2",
                  "--seeds", "5", "--rule", "scalar")
    harness.sweep("logit_scalar", *SYC100, "--seeds", "10", "--rule", "scalar")


def test_certificate_soundness(harness):
    _pareto_sweeps(harness)
    _scalar_sweeps(harness)
    checked = violations = 0
    for name in list(harness.sweeps):
        for rec in harness.trees(name):
            if rec["certificate"] not in ("PARETO_LOCAL", "FT_LOCAL"):
                continue
            net = generate(Cell(**rec["cell"]).topology())
            tree = tree_from_document({"pairs": rec["refined_tree"]}, net.n_tensors)
            cur = tuple(score(tree, net))
            for move in neighborhood(tree):
                cand = tuple(score(apply(tree, move), net))
                if rec["rule"] == "pareto" and _dominates(cand, cur):
                    violations += 1
                if rec["rule"] == "scalar" and cand[0] < cur[0]:
                    violations += 1
            checked += 1
    record(4, checked > 0 and violations == 0,
           f"{checked} terminated runs rescanned, {violations} improving neighbors found")


def test_topology_specificity(harness):
    syc = harness.sweep("syc100", *SYC100, "--seeds", "15")
    rr = harness.sweep("rr100", *RR100, "--seeds", "15")
    mech_syc = harness.table("mechanism", "mech_syc100", *SYC100, "--seeds", "15")
    mech_rr = harness.table("mechanism", "mech_rr100", *RR100, "--seeds", "15")
    d_syc, d_rr = statistics.median(_col(syc, "delta_f_T")), statistics.median(_col(rr, "delta_f_T"))
    p_syc, p_rr = statistics.median(_col(mech_syc, "p_pareto")), statistics.median(_col(mech_rr, "p_pareto"))
    ok = d_syc > d_rr and p_syc > p_rr
    record(5, ok, f"median delta f_T {d_syc:.2f} vs {d_rr:.2f} bits, "
                  f"median P_pareto {p_syc:.3f} vs {p_rr:.3f} (sycamore_like vs random_regular)")


def test_chi_monotonicity(harness):
    rows = harness.sweep("chi_sweep", "--family", "sycamore_like", "--n", "100", "--chi", "2,4,8,16",
                         "--seeds", "10")
    seeds_by_cell: dict[int, set] = {}
    for rec in harness.trees("chi_sweep"):
        seeds_by_cell.setdefault(rec["cell"]["seed"], set()).add(json.dumps(rec["seed_tree"]))
    same_seeds = all(len(s) == 1 for s in seeds_by_cell.values())
    medians = [statistics.median(_col([r for r in rows if r["chi"] == str(chi)], "delta_f_T"))
               for chi in (2, 4, 8, 16)]
    ok = same_seeds and all(a <= b for a, b in zip(medians, medians[1:]))
    record(6, ok, "median delta f_T by chi 2/4/8/16: " + ", ".join(f"{m:.2f}" for m in medians)
                  + f"; shared seed trees: {same_seeds}")


def test_ablation(harness):
    _pareto_sweeps(harness)
    _scalar_sweeps(harness)
    pairs = _paired(harness.sweep("ablation_scalar"), harness.sweep("ablation_pareto"))
    exhausted = sum(r["certificate"] == "BUDGET_EXHAUSTED" for pair in pairs for r in pair)
    d_S = [float(s["ref_f_S"]) - float(p["ref_f_S"]) for s, p in pairs]
    d_T = statistics.median(float(s["ref_f_T"]) - float(p["ref_f_T"]) for s, p in pairs)
    unequal = sum(d != 0 for d in d_S)
    ok = exhausted == 0 and unequal == 0 and abs(d_T) <= 0.5
    record(7, ok, f"{exhausted} runs hit the budget, f_S differs in {unequal}/{len(pairs)} cells "
                  f"(range {min(d_S):+.0f}..{max(d_S):+.0f} bits), median f_T difference {d_T:+.3f} bits")


def test_logit_robustness(harness):
    _scalar_sweeps(harness)
    logit = harness.sweep("logit", *SYC100, "--seeds", "10", "--rule", "logit_br")
    pairs = _paired(logit, harness.sweep("logit_scalar"))
    gaps = [abs(float(a["ref_f_T"]) - float(b["ref_f_T"])) for a, b in pairs]
    close = sum(g <= 0.01 for g in gaps)
    ok = close >= 0.8 * len(pairs)
    record(8, ok, f"logit_br within 0.01 bits of scalar on {close}/{len(pairs)} cells "
                  f"(median gap {statistics.median(gaps):.2f} bits)")


def test_circuit_calibration(harness):
    counts = {m: sycamore_circuit(m).n_tensors for m in CIRCUIT_TARGETS}
    off = {m: counts[m] / CIRCUIT_TARGETS[m] - 1 for m in counts}
    increasing = all(counts[a] < counts[b] for a, b in zip(sorted(counts), sorted(counts)[1:]))
    rows = harness.sweep("circuits", "--family", "sycamore_circuit", "--depth", "4:13:2", "--seeds", "5",
                         "--budget-s", "3")
    wins = {m: sum(float(r["delta_f_T"]) > 0 for r in rows if r["n"] == str(counts[m])) for m in counts}
    ok = increasing and all(abs(x) <= 0.05 for x in off.values())
    record(9, ok, "counts " + ", ".join(f"m={m}: {counts[m]} ({off[m]:+.1%})" for m in counts)
                  + "; refiner wins per depth (not gated) " + ", ".join(f"{wins[m]}/5" for m in counts))


def test_convention_invariance(harness):
    _pareto_sweeps(harness)
    _scalar_sweeps(harness)
    shifts, drift, cells = [], [], 0
    for name in list(harness.sweeps):
        trees = harness.sweeps[name][1]
        out2, out1 = harness.root / f"{name}.ff2.csv", harness.root / f"{name}.ff1.csv"
        assert main(["rescore", "--trees", str(trees), "--flop-factor", "2", "--out", str(out2)]) == 0
        assert main(["rescore", "--trees", str(trees), "--flop-factor", "1", "--out", str(out1)]) == 0
        for a, b in zip(read_csv(out2)[1], read_csv(out1)[1]):
            cells += 1
            for key in ("seed_f_T", "ref_f_T"):
                shifts.append(float(a[key]) - float(b[key]))
            drift.append(abs(float(a["delta_f_T"]) - float(b["delta_f_T"])))
        for rec in harness.trees(name):
            net = generate(Cell(**rec["cell"]).topology())
            t_seed = tree_from_document({"pairs": rec["seed_tree"]}, net.n_tensors)
            t_ref = tree_from_document({"pairs": rec["refined_tree"]}, net.n_tensors)
            two = [score(t, net).f_T for t in (t_seed, t_ref)]
            one = [score(t, net, flop_factor=1).f_T for t in (t_seed, t_ref)]
            shifts.extend(x - y for x, y in zip(two, one))
            drift.append(abs((two[0] - two[1]) - (one[0] - one[1])))
    worst_shift = max(abs(s - 1.0) for s in shifts)
    ok = cells > 0 and worst_shift <= 1e-9 and max(drift) <= 1e-9
    record(10, ok, f"{cells} rescored rows, max |f_T shift - 1| = {worst_shift:.1e}, "
                   f"max delta f_T change = {max(drift):.1e}")
