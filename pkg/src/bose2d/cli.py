"""Command-line entry point ``bose2d``.

Exit codes: 0 on success, 1 on invalid input, 2 on a numerical failure
(a solver, bound or acceptance check that did not hold). Option values
come from the command line, then a JSON ``--config`` file, then defaults.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import math
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from . import lattice_sums as ls
from .bogoliubov import QuadraticModel, cp_coefficients, diagonalize
from .coefficients import (GPParams, bogoliubov_defect, build_table,
                           check_scattering_identity, norm_checks)
from .fock_ed import DEFAULT_BUDGET, compare_analytic, gp_slice_check
from .potentials import Potential
from .scattering import (eigenvalue_residual, far_field_defect, intvf_residual,
                         solve_sweep, w_bounds_check)


class UsageError(Exception):
    """Invalid command line or configuration; maps to exit code 1."""

    def __init__(self, message: str, usage: str | None = None):
        super().__init__(message)
        self.usage = usage


class ChecksFailed(RuntimeError):
    """One or more acceptance checks did not hold."""


# ---------------------------------------------------------------- output


def _normalize(obj):
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        obj = obj.as_dict() if hasattr(obj, "as_dict") else dataclasses.asdict(obj)
    if isinstance(obj, dict):
        return {str(k): _normalize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_normalize(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_normalize(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    return obj


def _fmt_float(x: float) -> str:
    if not math.isfinite(x):
        return "null"
    s = format(x, ".17g")
    if not any(c in s for c in ".en"):
        s += ".0"
    return s


def _dump(obj, indent: int, level: int, out: list[str]) -> None:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{\n")
        for i, (k, v) in enumerate(obj.items()):
            out.append(f"{pad}{json.dumps(k)}: ")
            _dump(v, indent, level + 1, out)
            out.append(",\n" if i < len(obj) - 1 else "\n")
        out.append(end + "}")
    elif isinstance(obj, list):
        if not obj:
            out.append("[]")
            return
        out.append("[\n")
        for i, v in enumerate(obj):
            out.append(pad)
            _dump(v, indent, level + 1, out)
            out.append(",\n" if i < len(obj) - 1 else "\n")
        out.append(end + "]")
    elif isinstance(obj, bool) or obj is None:
        out.append(json.dumps(obj))
    elif isinstance(obj, float):
        out.append(_fmt_float(obj))
    elif isinstance(obj, int):
        out.append(str(obj))
    else:
        out.append(json.dumps(str(obj)))


def to_json(obj) -> str:
    """JSON with every float printed to 17 significant digits; NaN and inf become null."""
    out: list[str] = []
    _dump(_normalize(obj), 2, 0, out)
    return "".join(out) + "\n"


def _cell(v) -> str:
    v = _normalize(v)
    if v is None:
        return ""
    if isinstance(v, float):
        return "" if not math.isfinite(v) else _fmt_float(v)
    if isinstance(v, list):
        return " ".join(_cell(x) for x in v)
    return str(v)


def to_csv(rows: list[dict], columns: list[str] | None = None) -> str:
    columns = columns or (list(rows[0]) if rows else [])
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_cell(r.get(c)) for c in columns])
    return buf.getvalue()


def _flatten(d: dict, prefix: str = "") -> dict:
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        else:
            out[key] = v
    return out


def emit(result, fmt: str) -> str:
    if fmt == "json":
        return to_json(result)
    data = _normalize(result)
    rows = data if isinstance(data, list) else [data]
    return to_csv([_flatten(r) for r in rows])


def _write(text: str, path: str | None) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


# ---------------------------------------------------------------- parsing helpers


def parse_potential(spec: str) -> Potential:
    """``soft-disk:v0=2,R0=1``, ``gaussian:v0=1,R0=1,width=0.5`` or ``csv:path``."""
    kind, _, rest = spec.partition(":")
    kind = kind.strip().lower()
    if kind == "csv":
        if not rest:
            raise ValueError("csv potential needs a path, e.g. csv:pot.csv")
        return Potential.from_csv(rest)
    kw = {}
    for item in filter(None, (s.strip() for s in rest.split(","))):
        key, eq, val = item.partition("=")
        if not eq:
            raise ValueError(f"malformed potential parameter {item!r}")
        kw[key.strip()] = float(val)
    allowed = {"soft-disk": {"v0", "R0"}, "gaussian": {"v0", "R0", "width"}}
    if kind not in allowed:
        raise ValueError(f"unknown potential kind {kind!r}; use soft-disk, gaussian or csv")
    extra = set(kw) - allowed[kind]
    if extra:
        raise ValueError(f"unknown parameters for {kind}: {sorted(extra)}")
    if "v0" not in kw:
        raise ValueError("potential needs v0")
    if kind == "soft-disk":
        return Potential.soft_disk(kw["v0"], kw.get("R0", 1.0))
    return Potential.gaussian_truncated(kw["v0"], kw.get("R0", 1.0), kw.get("width"))


def parse_pairs(text: str) -> list[tuple[float, float]]:
    pairs = []
    for chunk in filter(None, (c.strip() for c in text.split(";"))):
        parts = chunk.split(",")
        if len(parts) != 2:
            raise ValueError(f"pair {chunk!r} must be 'F,G'")
        pairs.append((float(parts[0]), float(parts[1])))
    if not pairs:
        raise ValueError("--pairs is empty")
    return pairs


def parse_sweep(text: str) -> list[float]:
    parts = text.split(":")
    if len(parts) != 3:
        raise ValueError("--sweep must be R1:R2:n")
    r1, r2, n = float(parts[0]), float(parts[1]), int(parts[2])
    if not (r1 > 0 and r2 >= r1 and n >= 1):
        raise ValueError("--sweep needs 0 < R1 <= R2 and n >= 1")
    if n == 1:
        return [r1]
    return [float(x) for x in np.geomspace(r1, r2, n)]


def resolve_threads(value: int | None) -> int:
    if value is None:
        env = os.environ.get("BOSE2D_THREADS")
        value = int(env) if env else 1
    if value < 0:
        raise ValueError("threads must be >= 0")
    return value or (os.cpu_count() or 1)


@dataclass
class ShellRows:
    """Shell data read back from a ``coeffs`` CSV."""

    shells: np.ndarray
    multiplicity: np.ndarray
    F: np.ndarray
    G: np.ndarray


def read_table_csv(path: str) -> ShellRows:
    with open(path, newline="") as fh:
        rows = [r for r in csv.DictReader(fh) if r.get("F")]
    if not rows:
        raise ValueError(f"{path}: no shell rows with F, G columns")
    try:
        return ShellRows(np.array([int(r["m"]) for r in rows]),
                         np.array([int(r["multiplicity"]) for r in rows]),
                         np.array([float(r["F"]) for r in rows]),
                         np.array([float(r["G"]) for r in rows]))
    except KeyError as exc:
        raise ValueError(f"{path}: missing column {exc}") from None


# ---------------------------------------------------------------- subcommands


def cmd_scatter(o: dict) -> tuple[object, str | None]:
    V = parse_potential(o["potential"])
    if o.get("sweep"):
        radii = parse_sweep(o["sweep"])
    elif o.get("radius") is not None:
        radii = [float(o["radius"])]
    else:
        raise UsageError("scatter needs --radius or --sweep")
    sols = solve_sweep(V, radii, o["tol"], threads=o["threads"])
    records = []
    for sol in sols:
        rec = {"R": sol.R, "lambda": sol.lam, "eps_sq": sol.eps_sq, "intVf": sol.intVf,
               "a": sol.a, "tol": o["tol"]}
        if sol.a is not None:
            L = math.log(sol.R / sol.a)
            ev, iv = eigenvalue_residual(sol), intvf_residual(sol)
            defects = {"eigenvalue": ev, "eigenvalue_scaled": ev * sol.R**2 * L**3,
                       "intVf": iv, "intVf_scaled": iv * L**3}
            if sol.R >= 10.0 * V.R0:
                ff = far_field_defect(sol)
                defects["far_field"] = ff
                defects["far_field_scaled"] = ff / (sol.eps_sq**2 * math.log(math.sqrt(sol.eps_sq)) ** 2)
            rec["asymptotic_defects"] = defects
            wb = w_bounds_check(sol)
            rec["w_bounds"] = {"c_w": wb.c_w, "c_dw": wb.c_dw, "min_f": wb.min_f,
                               "max_f": wb.max_f}
        records.append(rec)
    return records, o.get("out")


def cmd_coeffs(o: dict) -> tuple[object, str | None]:
    V = parse_potential(o["potential"])
    params = GPParams(int(o["N"]), o["alpha"], o["nu"], p_max=o.get("pmax"),
                      gamma_c=o["gamma_c"], gamma=o["gamma"])
    table = build_table(V, params, tol=o["tol"], threads=o["threads"])
    rows = table.rows()
    if o["format"] == "csv" and not o.get("csv"):
        return rows, o.get("out")
    if o.get("csv"):
        _write(to_csv(rows), o["csv"])
    defect = bogoliubov_defect(table)
    summary = {
        "N": params.N, "alpha": params.alpha, "nu": params.nu, "ell": params.ell,
        "R": table.R, "a": table.a, "lambda": table.lam, "eps_sq": table.eps_sq,
        "g_N": table.g_N, "g_N_from_omega_hat0": table.omega_hat0 / math.pi,
        "intVf": table.intVf, "omega_hat0_minus_N_intVf": table.omega_hat0 - params.N * table.intVf,
        "eta0": table.eta0, "cutoff": params.cutoff, "P_L": params.p_L,
        "shells": int(table.shells.size), "bound_violations": table.bound_violations,
        "norms": norm_checks(table), "bogoliubov_defect": defect,
        "tol": o["tol"],
    }
    if o.get("identity_qcut") is not None:
        summary["scattering_identity"] = check_scattering_identity(table, V, o["identity_qcut"])
    return summary, o.get("out")


def cmd_energy(o: dict) -> tuple[object, str | None]:
    if o.get("R") is not None:
        res = ls.energy_ENR(o["R"], int(o["N"]), o["a"], sbog_cutoff=o.get("sbog_cutoff"),
                            j0_strategy=o["j0_strategy"])
        out = res.as_dict()
        out["thermo_deviation"] = ls.large_r_deviation(o["R"], int(o["N"]), o["a"])
        return out, o.get("out")
    res = ls.energy_EN(int(o["N"]), o["a"], o["form"],
                       sbog_cutoff=o.get("sbog_cutoff") or 400.0 * math.pi,
                       j0_strategy=o["j0_strategy"], j0_cutoff=o.get("j0_cutoff"))
    return res.as_dict(), o.get("out")


def cmd_spectrum(o: dict) -> tuple[object, str | None]:
    levels = ls.spectrum_enumerate(o["zeta"], o["coupling"])
    rows = [{"value": lv.value, "degeneracy": lv.degeneracy,
             "occupation_labels": list(lv.occupation_labels)} for lv in levels]
    if o.get("csv"):
        _write(to_csv(rows, ["value", "degeneracy", "occupation_labels"]), o["csv"])
    if o["format"] == "csv":
        return rows, o.get("out")
    # the ladder is exact up to the relative budget tolerance
    return {"zeta": o["zeta"], "coupling": o["coupling"], "cutoff": o["zeta"],
            "tail_bound": 0.0, "levels": rows}, o.get("out")


def cmd_sums(o: dict) -> tuple[object, str | None]:
    kind = o["kind"]
    if kind == "sbog":
        res = ls.sum_sbog(o.get("cutoff") or 400.0 * math.pi,
                          o.get("strategy") or "integral-tail", o["coupling"])
    elif kind == "j0":
        if o.get("ell") is None:
            raise UsageError("sums --kind j0 needs --ell")
        res = ls.sum_j0(o["ell"], o.get("cutoff"), o.get("strategy") or "ewald", o["tau"])
    else:
        raise UsageError("--kind must be sbog or j0")
    return res.as_dict(), o.get("out")


def cmd_diag(o: dict) -> tuple[object, str | None]:
    model = QuadraticModel.from_fg([(o["F"], o["G"])])
    d = diagonalize(model)
    cp = cp_coefficients(o["F"], o["G"])
    ch, sh = d.coshsinh[0]
    return {"F": o["F"], "G": o["G"], "e": d.frequencies[0], "shift": d.shift,
            "cosh": ch, "sinh": sh, "alpha": cp.alpha, "normalization": cp.normalization,
            "tail_bound": 0.0}, o.get("out")


def cmd_ed(o: dict) -> tuple[object, str | None]:
    if o.get("from_table"):
        table = read_table_csv(o["from_table"])
        reps = gp_slice_check(table, int(o["shells"]), int(o["nmax"]), budget=int(o["budget"]))
        return {"n_max": int(o["nmax"]), "shells": reps}, o.get("out")
    if not o.get("pairs"):
        raise UsageError("ed needs --pairs or --from-table")
    model = QuadraticModel.from_fg(parse_pairs(o["pairs"]))
    rep = compare_analytic(model, int(o["nmax"]), int(o["levels"]),
                           dense=True if o["dense"] else None, budget=int(o["budget"]))
    return {"n_max": int(o["nmax"]), **rep.as_dict()}, o.get("out")


def cmd_verify(o: dict) -> tuple[object, str | None]:
    from .verify import run_suite

    report = run_suite(o["suite"], threads=o["threads"])
    report["seed"] = o["seed"]
    if o["format"] == "csv":
        rows = [{**c, "measured": json.dumps(_normalize(c["measured"]))} for c in report["checks"]]
        text = to_csv(rows, ["name", "criterion", "passed", "tolerance", "measured"])
    else:
        text = to_json(report)
    _write(text, o.get("out"))
    if not report["passed"]:
        failed = [c["name"] for c in report["checks"] if not c["passed"]]
        raise ChecksFailed("failed checks: " + ", ".join(failed))
    return None, None


# ---------------------------------------------------------------- parser


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        raise UsageError(message, self.format_usage())


_NUM = float

# per subcommand: {dest: default}; ``REQUIRED`` marks options with no default
REQUIRED = object()

OPTIONS: dict[str, dict[str, tuple]] = {
    "scatter": {
        "potential": (str, "soft-disk:v0=2,R0=1", "potential spec: soft-disk:v0=..,R0=.. | gaussian:.. | csv:PATH"),
        "radius": (_NUM, None, "disk radius R"),
        "sweep": (str, None, "geometric sweep R1:R2:n"),
        "tol": (_NUM, 1e-10, "relative tolerance on lambda"),
    },
    "coeffs": {
        "N": (int, REQUIRED, "particle number"),
        "alpha": (_NUM, 2.5, "l = N^-alpha"),
        "nu": (_NUM, 0.2, "P_L = N^(alpha+nu)"),
        "potential": (str, "soft-disk:v0=2,R0=1", "potential spec"),
        "pmax": (_NUM, None, "tabulation cutoff (default min(P_L, 64 pi))"),
        "gamma_c": (_NUM, 0.0, "constant c in F^gamma = (1 - c N^-gamma) p^2 + omega_hat"),
        "gamma": (_NUM, 0.125, "exponent gamma"),
        "tol": (_NUM, 1e-10, "Neumann solver tolerance"),
        "csv": (str, None, "write the shell table to this CSV file"),
        "identity_qcut": (_NUM, None, "also check the scattering identity up to |p| <= q"),
    },
    "energy": {
        "N": (int, REQUIRED, "particle number"),
        "a": (_NUM, REQUIRED, "scattering length"),
        "form": (str, "eN", "eN | remark4"),
        "R": (_NUM, None, "coupling R (large-R energy)"),
        "sbog_cutoff": (_NUM, None, "S_Bog shell cutoff"),
        "j0_strategy": (str, "ewald", "ewald | shell-average"),
        "j0_cutoff": (_NUM, None, "cutoff for shell-average"),
    },
    "spectrum": {
        "zeta": (_NUM, REQUIRED, "energy budget"),
        "coupling": (_NUM, 1.0, "coupling R in eps(p) = sqrt(p^4 + 8 pi R p^2)"),
        "csv": (str, None, "write the levels to this CSV file"),
    },
    "sums": {
        "kind": (str, REQUIRED, "sbog | j0"),
        "ell": (_NUM, None, "Bessel scale for j0"),
        "cutoff": (_NUM, None, "shell cutoff"),
        "strategy": (str, None, "summation strategy"),
        "coupling": (_NUM, 1.0, "coupling for sbog"),
        "tau": (_NUM, 0.08, "Ewald splitting parameter"),
    },
    "diag": {
        "F": (_NUM, REQUIRED, "diagonal coefficient"),
        "G": (_NUM, REQUIRED, "pairing coefficient"),
    },
    "ed": {
        "pairs": (str, None, "pairs 'F,G;F,G'"),
        "from_table": (str, None, "coefficient CSV from 'coeffs --csv'"),
        "shells": (int, 1, "number of shells with --from-table"),
        "nmax": (int, 30, "maximal total occupation"),
        "levels": (int, 6, "number of eigenvalues"),
        "dense": (bool, False, "force dense diagonalization"),
        "budget": (int, DEFAULT_BUDGET, "nonzero budget for the Hamiltonian"),
    },
    "verify": {
        "suite": (str, "all", "scattering | coefficients | identities | energy | ed | spectrum | all"),
    },
}

GLOBAL = {
    "threads": (int, None, "worker threads, 0 = all cores (env BOSE2D_THREADS)"),
    "format": (str, "json", "json | csv"),
    "out": (str, None, "output file (default stdout)"),
    "seed": (int, 0, "seed recorded in reports"),
    "config": (str, None, "JSON config file"),
}

HANDLERS = {
    "scatter": cmd_scatter, "coeffs": cmd_coeffs, "energy": cmd_energy,
    "spectrum": cmd_spectrum, "sums": cmd_sums, "diag": cmd_diag, "ed": cmd_ed,
    "verify": cmd_verify,
}


def _add(p: argparse.ArgumentParser, dest: str, spec: tuple) -> None:
    typ, default, help_ = spec
    flag = "--" + dest.replace("_", "-")
    if default is REQUIRED:
        help_ += " (required)"
    elif default is not None and typ is not bool:
        help_ += f" (default {default})"
    if typ is bool:
        p.add_argument(flag, dest=dest, action="store_true", default=argparse.SUPPRESS, help=help_)
    else:
        p.add_argument(flag, dest=dest, type=typ, default=argparse.SUPPRESS, help=help_)


def build_parser() -> _Parser:
    common = _Parser(add_help=False)
    for dest, spec in GLOBAL.items():
        _add(common, dest, spec)
    common.add_argument("--json", dest="format", action="store_const", const="json",
                        default=argparse.SUPPRESS, help="shorthand for --format json")
    parser = _Parser(prog="bose2d", description="Bogoliubov numerics for the 2D Bose gas.",
                     parents=[common])
    parser.add_argument("--version", action="version", version=f"bose2d {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    for name, opts in OPTIONS.items():
        p = sub.add_parser(name, parents=[common], help=f"{name} computations")
        for dest, spec in opts.items():
            _add(p, dest, spec)
    return parser


def _coerce(value, typ, key: str):
    if value is None:
        return None
    if typ is bool:
        if not isinstance(value, bool):
            raise UsageError(f"config key {key!r} must be true or false")
        return value
    try:
        return typ(value)
    except (TypeError, ValueError):
        raise UsageError(f"config key {key!r} has invalid value {value!r}") from None


def resolve_options(command: str, ns: argparse.Namespace) -> dict:
    """Merge flags over the JSON config over defaults and check required options."""
    specs = {**GLOBAL, **OPTIONS[command]}
    flags = {k: v for k, v in vars(ns).items() if k != "command"}
    config: dict = {}
    if flags.get("config"):
        try:
            config = json.loads(Path(flags["config"]).read_text())
        except OSError as exc:
            raise UsageError(f"cannot read config: {exc}") from None
        except json.JSONDecodeError as exc:
            raise UsageError(f"config is not valid JSON: {exc}") from None
        if not isinstance(config, dict):
            raise UsageError("config must be a JSON object")
        config = {k.replace("-", "_"): v for k, v in config.items()}
        unknown = sorted(set(config) - set(specs) - {"config"})
        if unknown:
            raise UsageError(f"unknown config keys for {command}: {unknown}")
        config = {k: _coerce(v, specs[k][0], k) for k, v in config.items() if k != "config"}
    merged = {k: spec[1] for k, spec in specs.items()}
    merged.update(config)
    merged.update(flags)
    missing = [k for k, v in merged.items() if v is REQUIRED]
    if missing:
        raise UsageError("missing required option(s): "
                         + ", ".join("--" + k.replace("_", "-") for k in missing))
    if merged["format"] not in ("json", "csv"):
        raise UsageError("--format must be json or csv")
    try:
        merged["threads"] = resolve_threads(merged["threads"])
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return merged


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
        if not getattr(ns, "command", None):
            raise UsageError("a subcommand is required", parser.format_usage())
        try:
            opts = resolve_options(ns.command, ns)
        except UsageError as exc:
            sub = parser._subparsers._group_actions[0].choices[ns.command]
            raise UsageError(str(exc), exc.usage or sub.format_usage()) from None
        result, path = HANDLERS[ns.command](opts)
        if result is not None:
            _write(emit(result, opts["format"]), path)
        return 0
    except UsageError as exc:
        if exc.usage:
            sys.stderr.write(exc.usage)
        print(f"bose2d: error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"bose2d: invalid input: {exc}", file=sys.stderr)
        return 1
    except (RuntimeError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"bose2d: numerical failure ({type(exc).__name__}): {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
