"""Scenario runner: ``evoasym run | validate | plot``.

A scenario is a JSON document with ``operators``, ``systems``, ``curves`` and
an ordered list of ``experiments``. Any value written as ``"$name"`` is
replaced by ``constants[name]``. Parameters that control an approximation
(horizons, resolutions, tolerances, tail windows) have no defaults.
"""

from __future__ import annotations

import argparse
import copy
import json
import os
import sys
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np

from . import asymptotics as asy
from . import means as mn
from .core import Interpolation, SampledCurve, TimeGrid, read_curve_csv, write_curve_csv, write_table
from .errors import EvoAsymError, ScenarioError
from .operators import Forcing, OperatorSpec
from .systems import (
    ProductSystemSpec,
    StepSequence,
    make_closed_form_system,
    make_flow_system,
    make_product_system,
    orbit,
    sces_profile,
)

ENV_OUT = "EVOASYM_OUT"
DEFAULT_OUT = "evoasym-out"

EXPERIMENT_PARAMS: dict[str, tuple[str, ...]] = {
    "simulate": ("system", "t0", "x0", "grid"),
    "defect": ("curve", "system", "t_grid", "H", "h_res", "tol", "tail_start"),
    "aae": ("systems", "seeds", "t_grid", "H", "h_res", "tol", "tail_start"),
    "asp": ("system", "points", "t_grid", "H", "h_res", "tol", "tail_start"),
    "sces": ("system", "curves", "t_list", "s_list", "pairs", "seed", "threshold",
             "t_grid", "H", "h_res", "defect_tol", "tail_start", "tol"),
    "mean": ("family", "curve", "t_grid"),
    "almost-convergence": ("family", "curve", "t_grid", "H_max", "h_res", "tol", "tail_start"),
    "hyp-h": ("family", "curve", "K_list", "t_list", "tol"),
    "hyp-hu": ("family", "curve", "K", "k_res", "t_list", "tol"),
    "omega": ("system", "curve", "x_star", "s_times", "gap_growth", "tol"),
    "modulus": ("curve", "deltas", "tail_start"),
}
# mean experiments that name a system also check the almost-orbit precondition
MEAN_WITH_SYSTEM = ("H", "h_res", "tol", "tail_start")

SECTIONS = ("operators", "systems", "curves")


@dataclass
class Scenario:
    """Validated scenario document; equality is equality of the documents."""

    dimension: int | None
    constants: dict
    operators: dict
    systems: dict
    curves: dict
    experiments: list
    output_dir: str | None = None

    def to_document(self) -> dict:
        doc = {
            "dimension": self.dimension,
            "constants": self.constants,
            "operators": self.operators,
            "systems": self.systems,
            "curves": self.curves,
            "experiments": self.experiments,
        }
        if self.output_dir is not None:
            doc["output_dir"] = self.output_dir
        return doc

    def resolved(self, value):
        return _resolve(value, self.constants)

    def experiment_name(self, index: int) -> str:
        exp = self.experiments[index]
        if "name" in exp:
            return str(exp["name"])
        kinds = [e["kind"] for e in self.experiments]
        return exp["kind"] if kinds.count(exp["kind"]) == 1 else f"{exp['kind']}_{index}"


def _resolve(value, constants):
    if isinstance(value, str) and value.startswith("$"):
        key = value[1:]
        if key not in constants:
            raise ScenarioError(f"unknown constant '{key}'")
        return copy.deepcopy(constants[key])
    if isinstance(value, list):
        return [_resolve(v, constants) for v in value]
    if isinstance(value, dict):
        return {k: _resolve(v, constants) for k, v in value.items()}
    return value


def _need(d: dict, key: str, where: str):
    if not isinstance(d, dict):
        raise ScenarioError(f"{where}: expected an object")
    if key not in d:
        raise ScenarioError(f"{where}: missing required parameter '{key}'")
    return d[key]


def _ref(table: dict, name, what: str, where: str):
    if not isinstance(name, str) or name not in table:
        raise ScenarioError(f"{where}: unresolved reference to {what} '{name}'")
    return name


def parse_scenario(text: str) -> Scenario:
    """Parse and validate a scenario document."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(exc.msg, exc.lineno, exc.colno) from None
    if not isinstance(doc, dict):
        raise ScenarioError("top level must be an object")
    unknown = set(doc) - {"dimension", "constants", "output_dir", "experiments", *SECTIONS}
    if unknown:
        raise ScenarioError(f"unknown top-level keys: {sorted(unknown)}")
    sc = Scenario(
        dimension=doc.get("dimension"),
        constants=doc.get("constants", {}),
        operators=doc.get("operators", {}),
        systems=doc.get("systems", {}),
        curves=doc.get("curves", {}),
        experiments=doc.get("experiments", []),
        output_dir=doc.get("output_dir"),
    )
    for sec in ("constants", *SECTIONS):
        if not isinstance(getattr(sc, sec), dict):
            raise ScenarioError(f"'{sec}' must be an object")
    if not isinstance(sc.experiments, list):
        raise ScenarioError("'experiments' must be a list")
    _validate(sc)
    return sc


def _validate(sc: Scenario) -> None:
    for name, spec in sc.operators.items():
        where = f"operator '{name}'"
        spec = sc.resolved(spec)
        kind = _need(spec, "type", where)
        if kind == "sum":
            for t in _need(spec, "terms", where):
                _ref(sc.operators, t, "operator", where)
                if t == name:
                    raise ScenarioError(f"{where}: refers to itself")
        elif kind not in ("identity", "linear", "skew", "quadratic", "l1", "box"):
            raise ScenarioError(f"{where}: unknown operator type '{kind}'")
    for name, spec in sc.systems.items():
        where = f"system '{name}'"
        spec = sc.resolved(spec)
        kind = _need(spec, "type", where)
        if kind == "closed-form":
            _need(spec, "formula", where)
        elif kind == "flow":
            _ref(sc.operators, _need(spec, "operator", where), "operator", where)
            _need(spec, "h_int", where)
        elif kind == "product":
            _ref(sc.operators, _need(spec, "operator", where), "operator", where)
            _need(spec, "steps", where)
        else:
            raise ScenarioError(f"{where}: unknown system type '{kind}'")
    for name, spec in sc.curves.items():
        where = f"curve '{name}'"
        spec = sc.resolved(spec)
        kind = _need(spec, "type", where)
        if kind == "orbit":
            _ref(sc.systems, _need(spec, "system", where), "system", where)
            for k in ("t0", "x0", "grid"):
                _need(spec, k, where)
        elif kind == "perturbed":
            base = _ref(sc.curves, _need(spec, "base", where), "curve", where)
            if base == name:
                raise ScenarioError(f"{where}: refers to itself")
            _need(spec, "perturbation", where)
        elif kind == "block-indicator":
            _need(spec, "t_max", where)
        elif kind == "constant":
            _need(spec, "value", where)
            _need(spec, "grid", where)
        elif kind == "csv":
            _need(spec, "path", where)
        else:
            raise ScenarioError(f"{where}: unknown curve type '{kind}'")
    _check_acyclic(sc.operators, "operator", lambda s: s.get("terms", []) if s.get("type") == "sum" else [])
    _check_acyclic(sc.curves, "curve", lambda s: [s["base"]] if s.get("type") == "perturbed" else [])
    names = set()
    for i, exp in enumerate(sc.experiments):
        where = f"experiment {i}"
        exp = sc.resolved(exp)
        kind = _need(exp, "kind", where)
        if kind not in EXPERIMENT_PARAMS:
            raise ScenarioError(f"{where}: unknown experiment kind '{kind}'")
        where = f"experiment {i} ({kind})"
        for p in EXPERIMENT_PARAMS[kind]:
            _need(exp, p, where)
        if kind == "mean" and "system" in exp:
            for p in MEAN_WITH_SYSTEM:
                _need(exp, p, where)
        if "system" in exp:
            _ref(sc.systems, exp["system"], "system", where)
        if "systems" in exp:
            if len(exp["systems"]) != 2:
                raise ScenarioError(f"{where}: 'systems' must name exactly two systems")
            for s in exp["systems"]:
                _ref(sc.systems, s, "system", where)
        if "curve" in exp:
            _ref(sc.curves, exp["curve"], "curve", where)
        if "curves" in exp:
            if len(exp["curves"]) != 2:
                raise ScenarioError(f"{where}: 'curves' must name exactly two curves")
            for c in exp["curves"]:
                _ref(sc.curves, c, "curve", where)
        nm = sc.experiment_name(i)
        if nm in names:
            raise ScenarioError(f"{where}: duplicate experiment name '{nm}'")
        names.add(nm)


def _check_acyclic(table: dict, what: str, deps) -> None:
    state: dict[str, int] = {}

    def visit(name, path):
        if state.get(name) == 1:
            return
        if state.get(name) == 0:
            raise ScenarioError(f"{what} reference cycle: {' -> '.join(path + [name])}")
        state[name] = 0
        for d in deps(table[name]):
            visit(d, path + [name])
        state[name] = 1

    for name in table:
        visit(name, [])


def serialize_scenario(sc: Scenario) -> str:
    return json.dumps(sc.to_document(), indent=2, sort_keys=True) + "\n"


def fixture_names() -> list[str]:
    root = resources.files("evoasym") / "scenarios"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def load_scenario_text(ref: str) -> str:
    """Read a scenario file, or a shipped fixture when ``ref`` names one."""
    path = Path(ref)
    if path.is_file():
        return path.read_text()
    res = resources.files("evoasym") / "scenarios" / f"{ref}.json"
    if res.is_file():
        return res.read_text()
    raise ScenarioError(f"no scenario file or fixture named '{ref}' (fixtures: {', '.join(fixture_names())})")


# ---------------------------------------------------------------- building


def _grid(spec) -> TimeGrid:
    if isinstance(spec, dict):
        return TimeGrid.uniform(float(spec["start"]), float(spec["stop"]), float(spec["step"]))
    return TimeGrid(np.asarray(spec, dtype=float))


def _points(spec) -> np.ndarray:
    return _grid(spec).points


def _family(spec) -> mn.MeasureFamily:
    if isinstance(spec, str):
        return mn.MeasureFamily(spec)
    return mn.MeasureFamily(spec["kind"], spec.get("width"))


def _forcing(spec) -> Forcing:
    kind = spec["type"]
    if kind == "zero":
        return Forcing.zero()
    if kind == "power-decay":
        return Forcing.power_decay(spec["c"], spec["p"], spec["direction"])
    raise ScenarioError(f"unknown forcing type '{kind}'")


class _Registry:
    """Builds named entities on demand, once each, thread-safely."""

    def __init__(self, sc: Scenario, base_dir: Path):
        self.sc = sc
        self.base_dir = base_dir
        self._cache: dict[tuple[str, str], Any] = {}
        self._lock = threading.RLock()

    def get(self, section: str, name: str):
        with self._lock:
            key = (section, name)
            if key not in self._cache:
                spec = self.sc.resolved(getattr(self.sc, section)[name])
                self._cache[key] = getattr(self, "_build_" + section)(spec)
            return self._cache[key]

    def _build_operators(self, s):
        kind = s["type"]
        if kind == "identity":
            return OperatorSpec.identity(int(s.get("dim", self.sc.dimension)))
        if kind == "linear":
            return OperatorSpec.linear(s["matrix"], check_monotone=s.get("check_monotone", True))
        if kind == "skew":
            return OperatorSpec.skew(s["matrix"])
        if kind == "quadratic":
            return OperatorSpec.quadratic(s["Q"], s.get("b"))
        if kind == "l1":
            return OperatorSpec.l1(s["weight"], int(s.get("dim", self.sc.dimension)))
        if kind == "box":
            return OperatorSpec.box(s["lo"], s["hi"])
        return OperatorSpec.sum_of(*(self.get("operators", t) for t in s["terms"]))

    def _build_systems(self, s):
        kind = s["type"]
        if kind == "closed-form":
            params = {k: s[k] for k in ("rate", "omega") if k in s}
            return make_closed_form_system(s["formula"], **params)
        op = self.get("operators", s["operator"])
        if kind == "flow":
            return make_flow_system(op, _forcing(s.get("forcing", {"type": "zero"})), float(s["h_int"]))
        st = s["steps"]
        k = st["type"]
        if k == "power":
            seq = StepSequence.power(st["c"], st["alpha"], st.get("n_max", 1_000_000))
        elif k == "constant":
            seq = StepSequence.constant(st["c"], st.get("n_max", 1_000_000))
        elif k == "explicit":
            seq = StepSequence.explicit(st["values"])
        else:
            raise ScenarioError(f"unknown step sequence type '{k}'")
        return make_product_system(ProductSystemSpec(seq, op))

    def _build_curves(self, s):
        kind = s["type"]
        interp = Interpolation(s.get("interpolation", Interpolation.LINEAR.value))
        if kind == "orbit":
            sys_ = self.get("systems", s["system"])
            return orbit(sys_, float(s["t0"]), s["x0"], _grid(s["grid"]), interp)
        if kind == "perturbed":
            return asy.perturb_to_almost_orbit(self.get("curves", s["base"]), _forcing(s["perturbation"]))
        if kind == "block-indicator":
            return mn.block_indicator_curve(float(s["t_max"]))
        if kind == "constant":
            return SampledCurve.constant(_grid(s["grid"]), s["value"], interp)
        path = Path(s["path"])
        return read_curve_csv(path if path.is_absolute() else self.base_dir / path, interp)


# ---------------------------------------------------------------- running


@dataclass
class ExperimentResult:
    index: int
    kind: str
    name: str
    status: str
    verdict: str = ""
    seconds: float = 0.0
    files: list = field(default_factory=list)
    error: str = ""
    params: dict = field(default_factory=dict)


@dataclass
class RunReport:
    out_dir: Path
    results: list

    @property
    def exit_code(self) -> int:
        return 0 if all(r.status == "ok" for r in self.results) else 1


def _params_comment(sc: Scenario, exp: dict) -> str:
    used = {}
    for s in [exp.get("system"), *exp.get("systems", [])]:
        if s:
            used[s] = sc.resolved(sc.systems[s])
    return "params: " + json.dumps({"experiment": exp, "systems": used}, sort_keys=True)


def _run_one(reg: _Registry, exp: dict, out: Path, stem: str, comments: list) -> tuple[str, list]:
    kind = exp["kind"]
    csv = out / f"{stem}.csv"

    if kind == "simulate":
        u = orbit(reg.get("systems", exp["system"]), float(exp["t0"]), exp["x0"], _grid(exp["grid"]))
        write_curve_csv(u, csv, comments)
        return "completed", [csv]

    if kind == "defect":
        prof = asy.defect_profile(reg.get("curves", exp["curve"]), reg.get("systems", exp["system"]),
                                  _points(exp["t_grid"]), exp["H"], exp["h_res"])
        v = asy.is_almost_orbit(prof, exp["tol"], exp["tail_start"])
        prof.to_csv(csv, comments)
        return ("almost-orbit" if v.ok else "not-almost-orbit") + f" (max tail psi {v.max_tail:.3e})", [csv]

    if kind == "aae":
        U, V = (reg.get("systems", s) for s in exp["systems"])
        seeds = [(float(t0), x0) for t0, x0 in exp["seeds"]]
        rep = asy.aae_check(U, V, seeds, _points(exp["t_grid"]), exp["H"], exp["h_res"],
                            exp["tol"], exp["tail_start"])
        return rep.verdict.value, rep.write(out, stem, comments)

    if kind == "asp":
        reps = asy.asp_scan(reg.get("systems", exp["system"]), exp["points"], _points(exp["t_grid"]),
                            exp["H"], exp["h_res"], exp["tol"], exp["tail_start"])
        d = reps[0].point.size if reps else 0
        header = [f"x{i}" for i in range(d)] + ["classification", "max_defect", "max_tail_defect"]
        rows = [[*r.point, r.classification.value, max(v for _, v in r.defect_at), r.decay.max_tail]
                for r in reps]
        write_table(csv, header, rows, comments)
        counts = {c.value: sum(r.classification is c for r in reps) for c in asy.ASPClass}
        return " ".join(f"{k}={v}" for k, v in counts.items()), [csv]

    if kind == "sces":
        sys_ = reg.get("systems", exp["system"])
        prof = sces_profile(sys_, exp["t_list"], exp["s_list"], int(exp["pairs"]), int(exp["seed"]),
                            threshold=exp["threshold"], dim=reg.sc.dimension)
        curves = [reg.get("curves", c) for c in exp["curves"]]
        ts = _points(exp["t_grid"])
        verdicts = tuple(
            asy.is_almost_orbit(asy.defect_profile(c, sys_, ts, exp["H"], exp["h_res"]),
                                exp["defect_tol"], exp["tail_start"])
            for c in curves
        )
        chk = asy.sces_consequence_check(prof, curves[0], curves[1], exp["tail_start"], exp["tol"], verdicts)
        chk.to_csv(csv, comments)
        return "converges" if chk.ok else "does-not-converge", [csv]

    if kind == "mean":
        fam = _family(exp["family"])
        u = reg.get("curves", exp["curve"])
        ts = _points(exp["t_grid"])
        if "system" in exp:
            tr = mn.average_inheritance_trace(fam, reg.get("systems", exp["system"]), u, ts,
                                              exp["H"], exp["h_res"], exp["tol"], exp["tail_start"])
            verdict = "cauchy" if tr.cauchy_ok else "not-cauchy"
        else:
            tr = mn.mean_trace(fam, u, ts)
            verdict = "completed"
        tr.to_csv(csv, comments)
        return verdict + f" (final |mean| {tr.norms[-1]:.3e})", [csv]

    if kind == "almost-convergence":
        prof = mn.almost_convergence_profile(_family(exp["family"]), reg.get("curves", exp["curve"]),
                                             _points(exp["t_grid"]), exp["H_max"], exp["h_res"],
                                             exp["tol"], exp["tail_start"])
        prof.to_csv(csv, comments)
        return "supported" if prof.supported else "not-supported", [csv]

    if kind in ("hyp-h", "hyp-hu"):
        fam = _family(exp["family"])
        g = reg.get("curves", exp["curve"])
        if kind == "hyp-h":
            rep = mn.hypothesis_h_falsify(fam, g, exp["K_list"], exp["t_list"], exp["tol"])
        else:
            rep = mn.hypothesis_hu_falsify(fam, g, exp["K"], exp["k_res"], exp["t_list"], exp["tol"])
        rep.to_csv(csv, comments)
        return rep.verdict.value, [csv]

    if kind == "omega":
        tr = asy.omega_invariance_check(reg.get("systems", exp["system"]), reg.get("curves", exp["curve"]),
                                        exp["x_star"], exp["s_times"], bool(exp["gap_growth"]), exp["tol"])
        tr.to_csv(csv, comments)
        return f"final transported distance {tr.transported[-1]:.3e}", [csv]

    if kind == "modulus":
        rows = asy.modulus_of_continuity(reg.get("curves", exp["curve"]), exp["deltas"], exp["tail_start"])
        write_table(csv, ["delta", "modulus"], rows, comments)
        return f"modulus at smallest delta {min(rows)[1]:.3e}", [csv]

    raise ScenarioError(f"unknown experiment kind '{kind}'")


def resolve_out_dir(sc: Scenario, cli_out: str | None) -> Path:
    return Path(cli_out or sc.output_dir or os.environ.get(ENV_OUT) or DEFAULT_OUT)


def run_scenario(sc: Scenario, out_dir, jobs: int = 1, base_dir=".") -> RunReport:
    """Run every experiment; failures are recorded and do not stop the run."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    reg = _Registry(sc, Path(base_dir))

    def task(i: int) -> ExperimentResult:
        exp = sc.resolved(sc.experiments[i])
        name = sc.experiment_name(i)
        res = ExperimentResult(i, exp["kind"], name, "ok", params=exp)
        t0 = time.perf_counter()
        try:
            res.verdict, files = _run_one(reg, exp, out, name, [_params_comment(sc, exp)])
            res.files = [p.name for p in files]
        except (EvoAsymError, ValueError, KeyError, TypeError) as exc:
            res.status = "failed"
            res.error = f"{type(exc).__name__}: {exc}"
        res.seconds = time.perf_counter() - t0
        return res

    idx = range(len(sc.experiments))
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(task, idx))
    else:
        results = [task(i) for i in idx]
    report = RunReport(out, results)
    _write_report(report)
    return report


def _write_report(rep: RunReport) -> None:
    lines = [f"experiments: {len(rep.results)}", f"exit status: {rep.exit_code}", ""]
    for r in rep.results:
        lines.append(f"[{r.index}] {r.name} kind={r.kind} status={r.status} time={r.seconds:.3f}s")
        lines.append(f"    params: {json.dumps(r.params, sort_keys=True)}")
        if r.status == "ok":
            lines.append(f"    verdict: {r.verdict}")
            lines.append(f"    files: {', '.join(r.files)}")
        else:
            lines.append(f"    error: {r.error}")
    (rep.out_dir / "report.txt").write_text("\n".join(lines) + "\n")
    manifest = [
        {"index": r.index, "kind": r.kind, "name": r.name, "status": r.status, "verdict": r.verdict,
         "files": r.files, "overlay": r.params.get("overlay")}
        for r in rep.results
    ]
    (rep.out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")


# ---------------------------------------------------------------- plotting

PLOT_SCRIPT = '''"""Render every *.plot.csv in this directory (needs matplotlib)."""
import glob
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

here = os.path.dirname(os.path.abspath(__file__))
for path in sorted(glob.glob(os.path.join(here, "*.plot.csv"))):
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    fig, ax = plt.subplots()
    for j, name in enumerate(header[1:], start=1):
        ax.plot(data[:, 0], data[:, j], label=name)
    ax.set_xlabel(header[0])
    ax.legend()
    fig.savefig(path[: -len(".plot.csv")] + ".png", dpi=120)
    plt.close(fig)
'''


def _read_csv(path: Path) -> tuple[list[str], np.ndarray]:
    if not path.is_file():
        raise ScenarioError(f"missing CSV: {path}")
    lines = [ln for ln in path.read_text().splitlines() if ln and not ln.startswith("#")]
    header = lines[0].split(",")
    rows = []
    for ln in lines[1:]:
        rows.append([float(x) if _isfloat(x) else np.nan for x in ln.split(",")])
    return header, np.array(rows, dtype=float).reshape(len(rows), len(header))


def _isfloat(s: str) -> bool:
    try:
        float(s)
        return True
    except ValueError:
        return False


def emit_plot_data(report_dir) -> list[Path]:
    """Write ``<name>.plot.csv`` per completed experiment plus ``plot.py``."""
    d = Path(report_dir)
    man_path = d / "manifest.json"
    if not man_path.is_file():
        raise ScenarioError(f"no manifest.json in {d}")
    written = []
    for entry in json.loads(man_path.read_text()):
        if entry["status"] != "ok":
            continue
        kind, name = entry["kind"], entry["name"]
        if kind == "aae":
            hf, fw = _read_csv(d / f"{name}.forward.csv")
            _, bw = _read_csv(d / f"{name}.backward.csv")
            header, cols = ["t", "forward", "backward"], [fw[:, 0], fw[:, 1], bw[:, 1]]
        else:
            header, data = _read_csv(d / f"{name}.csv")
            if kind == "simulate":
                cols = [data[:, 0], np.linalg.norm(data[:, 1:], axis=1)]
                header = ["t", "norm"]
            elif kind == "mean":
                cols = [data[:, 0], np.linalg.norm(data[:, 1:], axis=1)]
                header = ["t", "mean_norm"]
                if entry.get("overlay") == "2/t":
                    cols.append(2.0 / data[:, 0])
                    header.append("ref_2_over_t")
            elif kind in ("hyp-h", "hyp-hu"):
                ts = np.unique(data[:, 0])
                Ks = np.unique(data[:, 1])
                cols = [ts] + [data[data[:, 1] == K, 2] for K in Ks]
                header = ["t"] + [f"K={K:g}" for K in Ks]
            elif kind == "asp":
                n = header.index("max_tail_defect")
                cols = [np.arange(data.shape[0], dtype=float), data[:, n]]
                header = ["point", "max_tail_defect"]
            elif kind == "omega":
                cols = [data[:, 0], data[:, 3], data[:, 4]]
                header = ["n", "transported", "fixed"]
            else:
                cols = [data[:, 0], data[:, 1]]
                header = header[:2]
        path = d / f"{name}.plot.csv"
        write_table(path, header, zip(*cols))
        written.append(path)
    script = d / "plot.py"
    script.write_text(PLOT_SCRIPT)
    written.append(script)
    return written


# ---------------------------------------------------------------- entry point


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="evoasym", description="Asymptotics of evolution systems: scenario runner.")
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run a scenario file or shipped fixture")
    r.add_argument("scenario")
    r.add_argument("--out", help=f"output directory (default: scenario output_dir, ${ENV_OUT}, ./{DEFAULT_OUT})")
    r.add_argument("--jobs", type=int, default=1, help="experiments to run concurrently")
    v = sub.add_parser("validate", help="parse and validate a scenario")
    v.add_argument("scenario")
    p = sub.add_parser("plot", help="emit plot data for a finished run")
    p.add_argument("report_dir")
    sub.add_parser("fixtures", help="list shipped fixture scenarios")
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "fixtures":
            print("\n".join(fixture_names()))
            return 0
        if args.command == "plot":
            for path in emit_plot_data(args.report_dir):
                print(path)
            return 0
        sc = parse_scenario(load_scenario_text(args.scenario))
        if args.command == "validate":
            print(f"ok: {len(sc.operators)} operators, {len(sc.systems)} systems, "
                  f"{len(sc.curves)} curves, {len(sc.experiments)} experiments")
            return 0
        base = Path(args.scenario).parent if Path(args.scenario).is_file() else Path(".")
        rep = run_scenario(sc, resolve_out_dir(sc, args.out), jobs=max(1, args.jobs), base_dir=base)
        for r in rep.results:
            tail = r.verdict if r.status == "ok" else r.error
            print(f"[{r.index}] {r.name}: {r.status}: {tail}")
        print(f"report: {rep.out_dir / 'report.txt'}")
        return rep.exit_code
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
