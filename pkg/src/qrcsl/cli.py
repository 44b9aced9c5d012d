"""Command-line front end.

    qrcsl <subcommand> [--config FILE] [--seed N] [--out PATH] [--format csv|json] [--quiet]

Exit codes: 0 success, 1 configuration error, 2 numerical failure,
3 statistics flagged unreliable (the output is still written).
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .config import SUBCOMMANDS, ConfigError, RunConfig, parse_config
from .excitation import (
    EXPERIMENTAL_BOUND,
    NucleusSpec,
    exclusion_scan,
    quadrupole_rate_qrcsl,
    quadrupole_rate_rcsl,
)
from .free_rates import (
    TwoPacketState,
    collapse_decay_rate,
    cross_term_bound,
    energy_rate_asymptote,
    energy_rate_exact,
)
from .kernels import (
    CLOSED_FORM,
    QUADRATURE,
    delta_normalization,
    fourier_onshell_kernel,
    gaussian_nomeasure_integral,
    gaussian_onshell_integral,
    smeared_commutator_radial,
    smeared_profile_scan,
)
from .numerics import AccuracyError, DomainError
from .params import ModelParams
from .trajectories import (
    EnsembleConfig,
    Grid1D,
    IntegrationError,
    build_collapse_operators,
    coherence,
    master_evolve,
    packet_state,
    run_ensemble,
)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2
EXIT_UNRELIABLE = 3


@dataclass
class Outcome:
    """Records, an optional table and the exit status of one run."""

    records: list = field(default_factory=list)
    columns: list = field(default_factory=list)   # (name, unit) pairs
    rows: list = field(default_factory=list)
    unreliable: list = field(default_factory=list)

    def add(self, name, value, units="1", method="", tolerance=None):
        self.records.append({"name": name, "value": value, "units": units,
                             "method": method, "tolerance": tolerance})


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def _run_kernels(cfg: RunConfig, out: Outcome):
    k = cfg.section("kernels")
    out.columns = [("quantity", ""), ("mu", "1"), ("argument", "1"), ("closed_form", "1"),
                   ("numerical", "1"), ("relative_difference", "1")]
    for mu in k["mu_values"]:
        for p in k["momenta"]:
            exact = gaussian_onshell_integral(p, mu, CLOSED_FORM).value
            quad = gaussian_onshell_integral(p, mu, QUADRATURE).value
            out.rows.append(("gaussian_onshell", mu, p, exact, quad, quad / exact - 1.0))
            e1 = math.sqrt(1.0 + (p / mu) ** 2)
            exact = gaussian_nomeasure_integral(e1, mu, CLOSED_FORM).value
            quad = gaussian_nomeasure_integral(e1, mu, QUADRATURE).value
            out.rows.append(("gaussian_nomeasure", mu, p, exact, quad, quad / exact - 1.0))
        for mr in k["compton_radii"]:
            r = mr / mu
            exact = fourier_onshell_kernel(r, mu, CLOSED_FORM).value
            quad = fourier_onshell_kernel(r, mu, QUADRATURE).value
            out.rows.append(("fourier_onshell", mu, mr, exact, quad, quad / exact - 1.0))
        exact = 2.0 * math.pi**2 / mu**2
        quad = delta_normalization(mu)
        out.rows.append(("delta_normalization", mu, 0.0, exact, quad, quad / exact - 1.0))
    mu = k["profile_mu"]
    seps = k["profile_separations"]
    mc = smeared_profile_scan(seps, mu, n_samples=k["profile_samples"], seed=cfg.seed)
    for d, est in zip(seps, mc):
        radial = smeared_commutator_radial(d, mu)
        out.rows.append(("smeared_profile", mu, d, radial, est.mean, est.mean / radial - 1.0))
        out.add(f"smeared_profile[d={d!r}]", est.mean, "1", "monte-carlo", est.std_error)
        if est.low_confidence:
            out.unreliable.append(f"smeared profile at d = {d!r} has relative error {est.relative_error:.2g}")


def _run_collapse(cfg: RunConfig, out: Outcome):
    c = cfg.section("collapse")
    base = cfg.params()
    state = TwoPacketState(c["separation"], c["width"], c["weight_L"])
    out.columns = [("mu", "1"), ("rate_over_lambda", "1"), ("rate", "1/s"),
                   ("deviation", "1"), ("cross_term_bound", "1")]
    for mu in c["mu_values"]:
        params = ModelParams(lam=base.lam, a=base.a, M=mu / base.a, alpha_fs=base.alpha_fs)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            res = collapse_decay_rate(state, params=params)
        bound = cross_term_bound(state, mu)
        out.rows.append((mu, res.value_dimensionless, res.value_physical,
                         1.0 - res.value_dimensionless, bound))
        out.add(f"collapse_rate[mu={mu!r}]", res.value_physical, "1/s", "quadrature", 1e-12)


def _run_energy(cfg: RunConfig, out: Outcome):
    e = cfg.section("energy")
    decades = math.log10(e["mu_max"] / e["mu_min"])
    n = max(1, int(round(decades * e["points_per_decade"]))) + 1
    mus = np.logspace(math.log10(e["mu_min"]), math.log10(e["mu_max"]), n)
    out.columns = [("mu", ""), ("g_mu", ""), ("asymptote", ""), ("relative_deviation", "")]
    params = cfg.params()
    for mu in mus:
        mu = float(mu)
        p = ModelParams(lam=params.lam, a=params.a, M=mu / params.a, alpha_fs=params.alpha_fs)
        g = energy_rate_exact(mu, e["particles"], p)
        asym = energy_rate_asymptote(mu)
        out.rows.append((mu, g.value_dimensionless, asym, g.value_dimensionless / asym - 1.0))
    g = energy_rate_exact(params.mu, e["particles"], params)
    out.add("energy_rate", g.value_physical, g.units, "closed-form", 1e-12)


def _run_simulate(cfg: RunConfig, out: Outcome):
    s = cfg.section("simulate")
    grid = Grid1D(s["n_points"], s["dx"], s["dt"])
    ops = build_collapse_operators(grid, s["variant"], mu=s["mu"], p_max=s["p_max"])
    state = TwoPacketState(s["separation"], s["width"], s["weight_L"])
    ens = run_ensemble(state, ops, EnsembleConfig(
        n_traj=s["n_traj"], t_final=s["t_final"], scheme=s["scheme"], seed=cfg.seed,
        record_every=s["record_every"]))
    psi = ops.project(packet_state(grid, state)).normalized()
    rho0 = np.outer(psi, psi.conj())
    rho_master = master_evolve(rho0, ops, s["t_final"])
    out.add("left_fraction", ens.left_fraction, "1", "ensemble", ens.left_fraction_stderr)
    out.add("dead_fraction", ens.dead_fraction, "1", "ensemble")
    out.add("coherence_ensemble", coherence(ens.rho, grid, state), "1", "ensemble")
    out.add("coherence_master", coherence(rho_master, grid, state), "1", "master-equation")
    out.add("residual_operator_norm", float(np.linalg.norm(ens.rho - rho_master, 2)), "1", "ensemble")
    out.columns = [("time", "1/lambda"), ("martingale_mean", "1"), ("martingale_stderr", "1")]
    for t, m, e in zip(ens.times, ens.martingale_mean, ens.martingale_stderr):
        out.rows.append((float(t), float(m), float(e)))
    if ens.flagged:
        out.unreliable.append(f"dead-trajectory fraction {ens.dead_fraction:.3g} exceeds 1%")
    if not ens.martingale_ok():
        out.unreliable.append("norm martingale drifts by more than 3 standard errors")


def _nucleus(cfg, which="nuclei_per_kg"):
    n = cfg.section("nucleus")
    return NucleusSpec(k=n["k"], tau=n["tau"], delta_e=n["delta_e"],
                       nuclei_per_kg=n[which], label=n["label"])


def _run_excitation(cfg: RunConfig, out: Outcome):
    params = cfg.params()
    out.columns = [("nuclei_per_kg", "1/kg"), ("rate_qrcsl", "counts/kg/day"), ("flag_qrcsl", ""),
                   ("rate_rcsl", "counts/kg/day"), ("flag_rcsl", ""), ("bound", "counts/kg/day")]
    for which in ("nuclei_per_kg", "nuclei_per_kg_all"):
        nuc = _nucleus(cfg, which)
        q, qf = quadrupole_rate_qrcsl(nuc, params)
        r, rf = quadrupole_rate_rcsl(nuc, params)
        out.rows.append((nuc.nuclei_per_kg, q, qf, r, rf, EXPERIMENTAL_BOUND))
        suffix = "" if which == "nuclei_per_kg" else "_all_isotopes"
        out.add("rate_qrcsl" + suffix, q, "counts/kg/day", "closed-form")
        out.add("flag_qrcsl" + suffix, qf, "", "bound-comparison")
        out.add("rate_rcsl" + suffix, r, "counts/kg/day", "closed-form")
        out.add("flag_rcsl" + suffix, rf, "", "bound-comparison")


def _run_scan(cfg: RunConfig, out: Outcome):
    s = cfg.section("scan")

    def axis(lo, hi, n):
        if n == 0:
            return []
        if n == 1:
            return [lo]
        return [float(v) for v in np.logspace(math.log10(lo), math.log10(hi), n)]

    rows = exclusion_scan(axis(s["lambda_min"], s["lambda_max"], s["lambda_points"]),
                          axis(s["a_min"], s["a_max"], s["a_points"]),
                          _nucleus(cfg), cfg.params())
    out.columns = [("lambda", "1/s"), ("a", "cm"), ("rate_qrcsl", "counts/kg/day"), ("flag_qrcsl", ""),
                   ("rate_rcsl", "counts/kg/day"), ("flag_rcsl", "")]
    for r in rows:
        out.rows.append((r["lambda"], r["a"], r["rate_qrcsl"], r["flag_qrcsl"],
                         r["rate_rcsl"], r["flag_rcsl"]))


DISPATCH = {
    "kernels": _run_kernels,
    "collapse-rate": _run_collapse,
    "energy-rate": _run_energy,
    "simulate": _run_simulate,
    "excitation": _run_excitation,
    "scan": _run_scan,
}


# ---------------------------------------------------------------------------
# Envelope and output
# ---------------------------------------------------------------------------

def run(cfg: RunConfig):
    """Execute ``cfg`` and return ``(envelope, exit_code)``."""
    start = time.perf_counter()
    out = Outcome()
    errors = []
    code = EXIT_OK
    try:
        DISPATCH[cfg.subcommand](cfg, out)
    except (AccuracyError, IntegrationError) as exc:
        errors.append({"kind": "numerical", "message": str(exc)})
        code = EXIT_NUMERICAL
    except DomainError as exc:
        errors.append({"kind": "config", "message": str(exc)})
        code = EXIT_CONFIG
    if code == EXIT_OK and out.unreliable:
        code = EXIT_UNRELIABLE
        errors.extend({"kind": "statistics", "message": m} for m in out.unreliable)
    envelope = {
        "artifact": "qrcsl",
        "version": __version__,
        "subcommand": cfg.subcommand,
        "seed": cfg.seed,
        "config": cfg.to_dict(),
        "config_text": cfg.to_text(),
        "records": out.records,
        "table": {"columns": [_header(c) for c in out.columns], "rows": [list(r) for r in out.rows]},
        "errors": errors,
        "exit_code": code,
        "wall_time_s": time.perf_counter() - start,
    }
    return envelope, code


def _header(col):
    name, unit = col
    return f"{name}[{unit}]" if unit else name


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return "%.17g" % v
    return str(v)


def render_csv(envelope):
    table = envelope["table"]
    if table["columns"]:
        header, rows = table["columns"], table["rows"]
    else:
        header = ["name", "value", "units", "method", "tolerance"]
        rows = [[r["name"], r["value"], r["units"], r["method"],
                 "" if r["tolerance"] is None else r["tolerance"]] for r in envelope["records"]]
    lines = [",".join(header)]
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def _json_default(v):
    if isinstance(v, np.floating):
        return float(v)
    if isinstance(v, np.integer):
        return int(v)
    raise TypeError(f"not serializable: {type(v)!r}")


def render_json(envelope):
    return json.dumps(envelope, indent=2, default=_json_default, allow_nan=True) + "\n"


def write_atomic(path, text):
    """Write via a temporary file in the target directory, then rename."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".qrcsl-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _parser():
    ap = argparse.ArgumentParser(prog="qrcsl", description=__doc__.splitlines()[0])
    ap.add_argument("subcommand", nargs="?", choices=SUBCOMMANDS,
                    help="overrides [run] subcommand in the config")
    ap.add_argument("--config", help="configuration file")
    ap.add_argument("--seed", type=int, help="64-bit seed, overrides the config")
    ap.add_argument("--out", help="output path (stdout when omitted)")
    ap.add_argument("--format", choices=("csv", "json"), default="json")
    ap.add_argument("--quiet", action="store_true", help="suppress the summary on stderr")
    return ap


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        text = ""
        if args.config:
            with open(args.config, encoding="utf-8") as fh:
                text = fh.read()
        cfg = parse_config(text)
        if args.subcommand:
            cfg.values["run"]["subcommand"] = args.subcommand
        if args.seed is not None:
            if not 0 <= args.seed < 2**64:
                raise ConfigError(["--seed: must be an unsigned 64-bit integer"])
            cfg = cfg.with_seed(args.seed)
    except (ConfigError, OSError) as exc:
        errs = exc.errors if isinstance(exc, ConfigError) else [str(exc)]
        for e in errs:
            print(json.dumps({"kind": "config", "message": e}), file=sys.stderr)
        return EXIT_CONFIG

    envelope, code = run(cfg)
    if code in (EXIT_CONFIG, EXIT_NUMERICAL):
        for e in envelope["errors"]:
            print(json.dumps(e), file=sys.stderr)
        return code
    text = render_csv(envelope) if args.format == "csv" else render_json(envelope)
    if args.out:
        write_atomic(args.out, text)
    else:
        sys.stdout.write(text)
    if not args.quiet:
        for e in envelope["errors"]:
            print(json.dumps(e), file=sys.stderr)
        print(f"qrcsl {cfg.subcommand}: exit {code}, {len(envelope['records'])} records, "
              f"{len(envelope['table']['rows'])} rows", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
