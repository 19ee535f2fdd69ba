"""Batch front-end: flat key-value run configurations, subcommands
roots | solve | field | verify | report, parallel sweeps with deterministic
merging, and CSV + figure outputs.

Exit codes: 0 success, 2 tolerance failure (verify), 3 numerical error,
4 configuration error.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import math
import re
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import ConfigError, CritLayerError, NumericalError
from .regime import Case, RegimeParams, critical_wavenumber
from .spectrum import RootFamily
from .modes import mode_table
from .packets import (
    DEFAULT_NODES_PER_LOBE,
    Grid,
    WavePacketSpec,
    app_packets,
    boundary_layer_packets,
    default_grid,
    incident_packet,
    synth,
)
from . import diagnostics as dg
from . import figures

_FLOAT_FMT = "{:.17g}"

_NUMBER_EXPR = re.compile(r"^[0-9pi\s./*+-]+$")


def _parse_number(text):
    """Float literal, optionally using 'pi' (e.g. 'pi/6', '0.75', '3*pi/8')."""
    text = text.strip()
    try:
        return float(text)
    except ValueError:
        pass
    if not _NUMBER_EXPR.match(text) or "pi" not in text:
        raise ConfigError(f"not a number: {text!r}")
    try:
        return float(eval(text, {"__builtins__": {}}, {"pi": math.pi}))  # noqa: S307
    except Exception as exc:
        raise ConfigError(f"not a number: {text!r}") from exc


def _parse_bool(text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def _parse_eps_list(text):
    vals = [_parse_number(v) for v in text.split(",") if v.strip()]
    if not vals:
        raise ConfigError("eps_list must not be empty")
    if any(not 0 < v < 0.5 for v in vals):
        raise ConfigError("every eps must lie in (0, 0.5)")
    if any(b >= a for a, b in zip(vals, vals[1:])):
        raise ConfigError("eps_list must be strictly decreasing")
    return tuple(vals)


def _parse_matrix(text):
    pairs = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        try:
            c, b = item.split(":")
            pairs.append((Case(int(c)), float(b)))
        except (ValueError, KeyError) as exc:
            raise ConfigError(f"bad matrix entry {item!r}; expected case:beta") from exc
    if not pairs:
        raise ConfigError("matrix must not be empty")
    return tuple(pairs)


@dataclass(frozen=True)
class RunConfig:
    """Validated run configuration (see README for the key list)."""

    gamma: float = math.pi / 6
    case: Case = Case.CASE1
    beta: float = 3.0
    nu0: float = 1.0
    kappa0: float = 1.0
    eps_list: tuple = (0.1, 0.05, 0.02, 0.01)
    k0: float = 1.0
    chi: str = "bump"
    nodes: int = DEFAULT_NODES_PER_LOBE
    grid_x_points: int = 96
    grid_x_periods: float = 1.0
    grid_y_points: int = 160
    t: float = 0.0
    out: str = "out"
    threads: int = 1
    real_part: bool = False
    matrix: tuple = dg.DEFAULT_MATRIX
    strict: bool = False

    def params(self, case=None, beta=None):
        return RegimeParams(
            gamma=self.gamma,
            case_id=Case(case if case is not None else self.case),
            beta=float(beta if beta is not None else self.beta),
            nu0=self.nu0,
            kappa0=self.kappa0,
        )


_KEY_PARSERS = {
    "gamma": _parse_number,
    "case": lambda v: Case(int(v)),
    "beta": _parse_number,
    "nu0": _parse_number,
    "kappa0": _parse_number,
    "eps_list": _parse_eps_list,
    "k0": _parse_number,
    "chi": str.strip,
    "nodes": lambda v: int(v),
    "grid_x_points": lambda v: int(v),
    "grid_x_periods": _parse_number,
    "grid_y_points": lambda v: int(v),
    "t": _parse_number,
    "out": str.strip,
    "threads": lambda v: int(v),
    "real_part": _parse_bool,
    "matrix": _parse_matrix,
    "strict": _parse_bool,
}


def load_config(path=None, overrides=None) -> RunConfig:
    """Parse a flat key=value file; '#' starts a comment; unknown keys fail."""
    values = {}
    if path is not None:
        text = Path(path).read_text()
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key = value, got {raw!r}")
            key, _, val = line.partition("=")
            key = key.strip()
            if key not in _KEY_PARSERS:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            try:
                values[key] = _KEY_PARSERS[key](val.strip())
            except ConfigError:
                raise
            except Exception as exc:
                raise ConfigError(f"{path}:{lineno}: bad value for {key}: {val.strip()!r}") from exc
    if overrides:
        values.update(overrides)
    cfg = RunConfig(**values)
    if cfg.nodes < 32:
        raise ConfigError("nodes must be at least 32 per lobe per dimension")
    if cfg.grid_y_points < 32 or cfg.grid_x_points < 8:
        raise ConfigError("grid too coarse to resolve the layers")
    if cfg.threads < 1:
        raise ConfigError("threads must be positive")
    try:
        cfg.params()
    except CritLayerError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg


# ---------------------------------------------------------------------------
# CSV helpers


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return _FLOAT_FMT.format(float(x))
    return str(x)


def write_csv(path, header, rows):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")
    return Path(path)


# ---------------------------------------------------------------------------
# subcommands


def cmd_roots(cfg: RunConfig, out_dir: Path):
    """Per (eps, spectral node): six labeled roots with decay flags."""
    params = cfg.params()
    header = ["eps", "lobe", "ik", "im", "k", "m", "omega", "zeta",
              "family", "re_lambda", "im_lambda", "q_single", "decays"]
    rows = []
    for e in cfg.eps_list:
        setup = critical_wavenumber(params, e, k0=cfg.k0)
        spec = WavePacketSpec.from_setup(setup, n=cfg.nodes, chi_name=cfg.chi)
        for lobe in (+1, -1):
            k, _, m, _ = spec.lobe_nodes(lobe)
            K, M = np.meshgrid(k, m, indexing="ij")
            t = mode_table(params, e, K.ravel(), M.ravel())
            for fam, lam in t.lam.items():
                lamr = lam.reshape(K.shape)
                for i in range(K.shape[0]):
                    for j in range(K.shape[1]):
                        lv = lamr[i, j]
                        rows.append([
                            e, lobe, i, j, K[i, j], M[i, j],
                            t.omega.reshape(K.shape)[i, j], t.zeta.reshape(K.shape)[i, j],
                            fam.value, lv.real, lv.imag,
                            math.log(abs(lv)) / math.log(e), lv.real > 0,
                        ])
    path = write_csv(out_dir / "roots.csv", header, rows)
    sc = dg.scalar_sweep(params, np.asarray(cfg.eps_list)) if len(cfg.eps_list) >= 2 else None
    if sc is not None:
        import matplotlib.pyplot as plt

        fig, ax = plt.subplots(figsize=(5, 3.6))
        for name, vals in sc["lam"].items():
            ax.loglog(sc["eps"], vals, "o-", label=name)
        ax.set_xlabel("eps")
        ax.set_ylabel("|lambda| at packet center")
        ax.legend(fontsize=7)
        fig.tight_layout()
        fig.savefig(out_dir / "roots.png")
        plt.close(fig)
    return [path]


def cmd_solve(cfg: RunConfig, out_dir: Path):
    """Center-node amplitude system across eps, with fitted exponents."""
    params = cfg.params()
    header = ["eps", "abs_det", "re_det", "im_det",
              "abs_a2", "re_a2", "im_a2", "abs_a3", "re_a3", "im_a3",
              "abs_a5", "re_a5", "im_a5", "abs_B5", "re_B5", "im_B5"]
    rows = []
    for e in cfg.eps_list:
        setup = critical_wavenumber(params, e, k0=cfg.k0)
        t = mode_table(params, e, setup.k0, setup.m0)
        dec = list(t.a.keys())
        det = complex(t.det[0])
        a2, a3, a5 = (complex(t.a[f][0]) for f in dec)
        B5 = complex(t.B[dec[2]][0])
        rows.append([e, abs(det), det.real, det.imag,
                     abs(a2), a2.real, a2.imag, abs(a3), a3.real, a3.imag,
                     abs(a5), a5.real, a5.imag, abs(B5), B5.real, B5.imag])
    paths = [write_csv(out_dir / "solve.csv", header, rows)]
    if len(cfg.eps_list) >= 4:
        pred = dg.predictions(params)
        arr = np.array([[r[0], r[1], r[4], r[7], r[10], r[13]] for r in rows], float)
        fit_rows = []
        for idx, (label, predicted) in enumerate([
            ("det", pred.det_exponent),
            ("amp_bl2", pred.amp_exponents["bl2"]),
            ("amp_bl3", pred.amp_exponents["bl3"]),
            ("amp_bl5", pred.amp_exponents["bl5"]),
            ("b5_prandtl", pred.b5_exponent),
        ], start=1):
            fit = dg.fit_exponent(list(zip(arr[:, 0], arr[:, idx])))
            fit_rows.append([label, predicted, fit.slope, abs(fit.slope - predicted), fit.r2])
        paths.append(write_csv(out_dir / "solve_fits.csv",
                               ["quantity", "predicted", "fitted", "abs_diff", "r2"], fit_rows))
    return paths


def _field_rows(sample, real_part):
    xs = np.asarray(sample.grid.x)
    ys = np.asarray(sample.grid.y)
    rows = []
    for i, xv in enumerate(xs):
        for j, yv in enumerate(ys):
            row = [xv, yv]
            for comp in ("u", "w", "b", "p"):
                z = sample.component(comp)[i, j]
                row.append(z.real)
                if not real_part:
                    row.append(z.imag)
            rows.append(row)
    return rows


def cmd_field(cfg: RunConfig, out_dir: Path):
    """Columnar field dumps (CSV + npz) for the incident packet, each
    boundary-layer packet, and the assembled solution, plus figures."""
    params = cfg.params()
    paths = []
    for e in cfg.eps_list:
        tag = ("%g" % e).replace(".", "p")
        setup = critical_wavenumber(params, e, k0=cfg.k0)
        spec = WavePacketSpec.from_setup(setup, n=cfg.nodes, chi_name=cfg.chi)
        bl, tables = boundary_layer_packets(params, setup, spec, amplitudes="lift")
        inc = incident_packet(params, setup, spec)
        grid = default_grid(params, setup, tables=tables, nx=cfg.grid_x_points,
                            ny=cfg.grid_y_points, x_periods=cfg.grid_x_periods, t=cfg.t)
        named = [("incident", [inc])] + [(pk.name, [pk]) for pk in bl] + [("app", [inc] + bl)]
        if cfg.real_part:
            cols_c = ["re_u", "re_w", "re_b", "re_p"]
        else:
            cols_c = ["re_u", "im_u", "re_w", "im_w", "re_b", "im_b", "re_p", "im_p"]
        header = ["x", "y"] + cols_c
        npz = {}
        for name, pks in named:
            sample = synth(pks, grid)
            paths.append(write_csv(out_dir / f"field_{tag}_{name}.csv", header,
                                   _field_rows(sample, cfg.real_part)))
            for comp in ("u", "w", "b", "p"):
                npz[f"{name}_{comp}"] = sample.component(comp)
            paths.append(figures.field_figure(sample, f"{name} (eps={e:g})",
                                              out_dir / f"field_{tag}_{name}.png"))
        npz["x"] = np.asarray(grid.x)
        npz["y"] = np.asarray(grid.y)
        npz["t"] = np.asarray(cfg.t)
        np.savez_compressed(out_dir / f"field_{tag}.npz", **npz)
        paths.append(out_dir / f"field_{tag}.npz")
    return paths


def _case_report_job(args):
    (case, beta, gamma, nu0, kappa0, nodes) = args
    params = RegimeParams(gamma=gamma, case_id=Case(case), beta=beta, nu0=nu0, kappa0=kappa0)
    rows, samples = dg.case_report(params, n=nodes)
    return case, beta, rows, samples


def _run_matrix(cfg: RunConfig):
    jobs = [(int(c), float(b), cfg.gamma, cfg.nu0, cfg.kappa0, cfg.nodes) for c, b in cfg.matrix]
    if cfg.threads > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=cfg.threads) as ex:
            results = list(ex.map(_case_report_job, jobs))
    else:
        results = [_case_report_job(j) for j in jobs]
    rows = []
    samples = {}
    for case, beta, r, s in results:  # ordered merge: deterministic output
        rows.extend(r)
        samples[(case, beta)] = s
    return rows, samples


_REPORT_HEADER = ["case", "beta", "table", "label", "predicted", "fitted",
                  "abs_diff", "tol", "r2", "status", "note"]


def _report_csv_rows(rows):
    return [[r.case, r.beta, r.table, r.label, r.predicted, r.fitted,
             r.diff, r.tol, r.r2, r.status, r.note.replace(",", ";")] for r in rows]


def _write_text_report(rows, path, failing, strict):
    lines = [f"{'case':>4} {'beta':>5} {'table':<12} {'label':<24} "
             f"{'predicted':>10} {'fitted':>10} {'tol':>6} {'r2':>7} status"]
    for r in rows:
        lines.append(
            f"{r.case:>4} {r.beta:>5g} {r.table:<12} {r.label:<24} "
            f"{r.predicted:>10.4f} {r.fitted:>10.4f} {r.tol:>6.3g} {r.r2:>7.4f} {r.status}"
            + (f"  [{r.note}]" if r.note else "")
        )
    n_pass = sum(r.status == "PASS" for r in rows)
    n_kd = sum(r.status == "KNOWN-DEFECT" for r in rows)
    n_info = sum(r.status == "INFO" for r in rows)
    lines.append("")
    lines.append(f"rows: {len(rows)}  pass: {n_pass}  known-defect: {n_kd}  "
                 f"info: {n_info}  fail: {len([r for r in rows if r.status == 'FAIL'])}")
    lines.append(f"gate ({'strict' if strict else 'default'}): "
                 + ("FAIL" if failing else "PASS"))
    for r in failing:
        lines.append(f"  failing: C{r.case} b={r.beta:g} {r.table}/{r.label} "
                     f"pred {r.predicted:+.4f} fit {r.fitted:+.4f} tol {r.tol}")
    Path(path).write_text("\n".join(lines) + "\n")
    return Path(path)


def cmd_verify(cfg: RunConfig, out_dir: Path):
    """Full verification matrix; exit status 2 when any gated row fails."""
    rows, samples = _run_matrix(cfg)
    failing = dg.gate(rows, strict=cfg.strict)
    write_csv(out_dir / "verify_report.csv", _REPORT_HEADER, _report_csv_rows(rows))
    _write_text_report(rows, out_dir / "verify_report.txt", failing, cfg.strict)
    figures.comparison_chart(rows, out_dir / "verify_exponents.png")
    for (case, beta), s in samples.items():
        tag = f"c{case}_b{('%g' % beta).replace('.', 'p')}"
        case_rows = [r for r in rows if r.case == case and r.beta == beta]
        figures.fit_panels(case, beta, s, case_rows, out_dir / f"verify_fits_{tag}.png")
    print(Path(out_dir, "verify_report.txt").read_text())
    return 2 if failing else 0


def cmd_report(cfg: RunConfig, out_dir: Path):
    """Single-regime deep dive: every verification table plus raw sweeps."""
    params = cfg.params()
    rows, samples = dg.case_report(params, n=cfg.nodes)
    write_csv(out_dir / "report.csv", _REPORT_HEADER, _report_csv_rows(rows))
    failing = dg.gate(rows, strict=cfg.strict)
    _write_text_report(rows, out_dir / "report.txt", failing, cfg.strict)
    sc = samples["scalar"]
    sweep_rows = []
    for i, e in enumerate(sc["eps"]):
        row = [float(e), sc["det"][i], sc["b5"][i], sc["re_lam2"][i], sc["census"][i]]
        for name in ("bl2", "bl3", "bl5"):
            row.append(sc["a"][name][i])
        for name, vals in sc["lam"].items():
            row.append(vals[i])
        sweep_rows.append(row)
    header = (["eps", "abs_det", "abs_B5", "re_lam2", "census", "abs_a2", "abs_a3", "abs_a5"]
              + [f"abs_lam_{n}" for n in sc["lam"]])
    write_csv(out_dir / "report_scalar_sweep.csv", header, sweep_rows)
    if "field" in samples:
        fs = samples["field"]
        names = list(fs["packet_linf"].keys())
        header = ["eps"] + [f"linf_{n}" for n in names] + [f"l2_{n}" for n in names] + [
            "incident_linf", "incident_l2", "residual_l2", "residual_nu_l2", "residual_kappa_l2",
            "wall_ratio_u", "wall_ratio_w", "wall_ratio_dyb"]
        frows = []
        for i, e in enumerate(fs["eps"]):
            row = [float(e)]
            row += [fs["packet_linf"][n][i] for n in names]
            row += [fs["packet_l2"][n][i] for n in names]
            row += [fs["incident_linf"][i], fs["incident_l2"][i], fs["residual_l2"][i],
                    fs["residual_nu_l2"][i], fs["residual_kappa_l2"][i]]
            row += list(fs["wall"][i].ratios)
            frows.append(row)
        write_csv(out_dir / "report_field_sweep.csv", header, frows)
    figures.fit_panels(int(params.case_id), params.beta, samples, rows, out_dir / "report_fits.png")
    figures.comparison_chart(rows, out_dir / "report_exponents.png")
    print(Path(out_dir, "report.txt").read_text())
    return 0


def build_parser():
    p = argparse.ArgumentParser(
        prog="critlayer",
        description="Near-critical internal-wave reflection: layer spectra, packets, verification.",
    )
    p.add_argument("command", choices=["roots", "solve", "field", "verify", "report"])
    p.add_argument("--config", help="flat key=value configuration file")
    p.add_argument("--out", help="output directory (default from config)")
    p.add_argument("--threads", type=int, help="worker processes for sweeps")
    p.add_argument("--eps", help="comma list overriding eps_list")
    p.add_argument("--real-part", action="store_true", help="write only real parts of fields")
    p.add_argument("--strict", action="store_true",
                   help="gate also the documented published-table defects")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        overrides = {}
        if args.eps:
            overrides["eps_list"] = _parse_eps_list(args.eps)
        if args.out:
            overrides["out"] = args.out
        if args.threads:
            overrides["threads"] = args.threads
        if args.real_part:
            overrides["real_part"] = True
        if args.strict:
            overrides["strict"] = True
        cfg = load_config(args.config, overrides)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 4
    out_dir = Path(cfg.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        if args.command == "roots":
            cmd_roots(cfg, out_dir)
            return 0
        if args.command == "solve":
            cmd_solve(cfg, out_dir)
            return 0
        if args.command == "field":
            cmd_field(cfg, out_dir)
            return 0
        if args.command == "report":
            return cmd_report(cfg, out_dir)
        return cmd_verify(cfg, out_dir)
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 3
    except CritLayerError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
