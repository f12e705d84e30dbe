"""Command line front end: JSON configs in, CSV tables and JSON summaries out."""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile

import jsonschema
import numpy as np

from . import (
    chains,
    coupling,
    duals,
    errors,
    intertwining,
    kernels,
    spectra,
    stationary_times,
)

CONFIG_SCHEMA = {
    "type": "object",
    "properties": {
        "kind": {
            "enum": [
                "dense",
                "bd",
                "moran",
                "moran_mutation",
                "bernoulli_laplace",
                "wright_fisher",
            ]
        },
        "N": {"type": "integer", "minimum": 0},
        "matrix": {"type": "array", "items": {"type": "array", "items": {"type": "number"}}},
        "p": {"type": "array", "items": {"type": "number", "minimum": 0, "maximum": 1}},
        "q": {"type": "array", "items": {"type": "number", "minimum": 0, "maximum": 1}},
        "r": {"type": "array", "items": {"type": "number", "minimum": 0, "maximum": 1}},
        "bias": {"type": "array", "items": {"type": "number", "minimum": 0, "maximum": 1}},
        "a1": {"type": "number", "minimum": 0},
        "a2": {"type": "number", "minimum": 0},
        "dual": {
            "type": "object",
            "properties": {
                "family": {
                    "enum": [
                        "siegmund",
                        "ultrametric",
                        "hypergeometric",
                        "vandermonde",
                        "potential",
                    ]
                },
                "k": {"type": "integer", "minimum": 0},
                "alpha": {"type": "number", "minimum": 0},
                "beta": {"type": "number", "minimum": 0},
                "R": {"type": "array"},
            },
            "required": ["family"],
        },
        "options": {
            "type": "object",
            "properties": {
                "n_max": {"type": "integer", "minimum": 1},
                "trials": {"type": "integer", "minimum": 1},
                "seed": {"type": "integer", "minimum": 0},
                "start": {"type": "integer", "minimum": 0},
                "sweep": {"type": "array", "items": {"type": "integer", "minimum": 1}},
                "series": {"type": "string"},
            },
        },
    },
    "required": ["kind"],
}

COMMANDS = (
    "build",
    "dual",
    "intertwine",
    "spectrum",
    "ssd",
    "simulate",
    "cutoff",
    "verify",
    "plotdata",
)


def load_config(path: str) -> dict:
    try:
        with open(path) as f:
            cfg = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise errors.ConfigError(f"cannot read config {path}: {e}")
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as e:
        raise errors.ConfigError(f"config schema violation: {e.message}")
    return cfg


def build_chain(cfg: dict):
    """Resolve a config to (Kernel, BDParams-or-None)."""
    kind = cfg["kind"]
    if kind == "dense":
        if "matrix" not in cfg:
            raise errors.ConfigError("dense chain needs a matrix")
        return kernels.validate_kernel(cfg["matrix"], require="stochastic"), None
    if kind == "bd":
        if "p" not in cfg or "q" not in cfg:
            raise errors.ConfigError("bd chain needs p and q")
        params = chains.make_bd(cfg["p"], cfg["q"], cfg.get("r"))
        return chains.bd_kernel(params), params
    if kind == "moran":
        if "N" not in cfg or "bias" not in cfg:
            raise errors.ConfigError("moran chain needs N and a bias table")
        params = chains.moran_kernel(cfg["N"], chains.make_bias(cfg["bias"]))
        return chains.bd_kernel(params), params
    if kind == "moran_mutation":
        for key in ("N", "a1", "a2"):
            if key not in cfg:
                raise errors.ConfigError("moran_mutation needs N, a1, a2")
        bias = chains.mutation_bias(cfg["a1"], cfg["a2"], cfg["N"])
        params = chains.moran_kernel(cfg["N"], bias)
        return chains.bd_kernel(params), params
    if kind == "bernoulli_laplace":
        if "N" not in cfg:
            raise errors.ConfigError("bernoulli_laplace needs N")
        params = spectra.bernoulli_laplace_params(cfg["N"])
        return chains.bd_kernel(params), params
    if kind == "wright_fisher":
        if "N" not in cfg or "bias" not in cfg:
            raise errors.ConfigError("wright_fisher needs N and a bias table")
        return chains.wright_fisher_kernel(cfg["N"], chains.make_bias(cfg["bias"])), None
    raise errors.ConfigError(f"unknown kind {kind!r}")


def build_dual(cfg: dict, P):
    spec = cfg.get("dual", {"family": "siegmund"})
    family = spec["family"]
    N = P.n - 1
    if family == "siegmund":
        return duals.siegmund_function(N), duals.siegmund_dual(P)
    if family == "ultrametric":
        for key in ("k", "alpha", "beta"):
            if key not in spec:
                raise errors.ConfigError("ultrametric dual needs k, alpha, beta")
        H = duals.ultrametric_function(N, spec["k"], spec["alpha"], spec["beta"])
        return H, duals.ultrametric_dual(P, spec["k"], spec["alpha"], spec["beta"])
    if family in ("hypergeometric", "vandermonde"):
        H = duals.dual_function(family, N)
        return H, duals.dual_via_solve(P, H)
    if family == "potential":
        if "R" not in spec:
            raise errors.ConfigError("potential dual needs the substochastic matrix R")
        H = duals.potential_function(np.array(spec["R"], dtype=float))
        return H, duals.dual_via_solve(P, H)
    raise errors.ConfigError(f"unknown dual family {family!r}")


def _fmt(x) -> str:
    return "%.17g" % float(x)


def write_csv(path: str, header, rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) if not isinstance(v, str) else v for v in row))
    _atomic_write(path, "\n".join(lines) + "\n")


def write_matrix_csv(path: str, m: np.ndarray) -> None:
    m = np.atleast_2d(np.asarray(m, dtype=float))
    header = [f"c{j}" for j in range(m.shape[1])]
    write_csv(path, header, m)


def write_json(path: str, payload: dict) -> None:
    _atomic_write(path, json.dumps(_plain(payload), indent=2, sort_keys=True) + "\n")


def _atomic_write(path: str, text: str) -> None:
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", text=True)
    try:
        with os.fdopen(fd, "w") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    return obj


def _out(outdir: str, name: str) -> str:
    os.makedirs(outdir, exist_ok=True)
    return os.path.join(outdir, name)


def cmd_build(cfg, outdir, opts):
    P, params = build_chain(cfg)
    write_matrix_csv(_out(outdir, "kernel.csv"), P.matrix)
    summary = {
        "kind": cfg["kind"],
        "n": P.n,
        "irreducible": kernels.is_irreducible(P),
        "monotone": duals.is_monotone(P),
    }
    if summary["irreducible"]:
        summary["stationary"] = kernels.stationary(P)
    write_json(_out(outdir, "build_summary.json"), summary)
    return 0


def cmd_dual(cfg, outdir, opts):
    P, _ = build_chain(cfg)
    H, report = build_dual(cfg, P)
    write_matrix_csv(_out(outdir, "dual.csv"), report.dual)
    write_matrix_csv(_out(outdir, "dual_function.csv"), H.matrix)
    summary = {
        "family": cfg.get("dual", {"family": "siegmund"})["family"],
        "feasible": report.feasible,
        "residual": report.residual,
        "mass_leaks": report.mass_leaks,
        "leak0": float(report.mass_leaks[0]),
        "violations": report.violations[:10],
        "diagnostics": report.diagnostics,
    }
    write_json(_out(outdir, "dual_summary.json"), summary)
    return 0 if report.feasible else 2


def _pipeline(cfg, opts):
    P, params = build_chain(cfg)
    H, report = build_dual(cfg, P)
    if not report.feasible:
        return P, params, H, report, None
    res = intertwining.build_intertwining(P, H, report.dual)
    return P, params, H, report, res


def cmd_intertwine(cfg, outdir, opts):
    P, params, H, report, res = _pipeline(cfg, opts)
    if res is None:
        write_json(_out(outdir, "intertwine_summary.json"), {
            "feasible": False,
            "violations": report.violations[:10],
        })
        return 2
    write_matrix_csv(_out(outdir, "link.csv"), res.link)
    write_matrix_csv(_out(outdir, "p_tilde.csv"), res.p_tilde)
    write_matrix_csv(_out(outdir, "k_map.csv"), res.K)
    write_csv(_out(outdir, "phi.csv"), ["state", "phi", "pi"],
              [(str(i), res.phi[i], res.pi[i]) for i in range(P.n)])
    write_json(_out(outdir, "intertwine_summary.json"), {
        "feasible": True,
        "diagnostics": res.diagnostics,
        "class_constants": res.class_constants,
    })
    return 0


def cmd_spectrum(cfg, outdir, opts):
    P, params = build_chain(cfg)
    if params is None:
        raise errors.ConfigError("spectrum needs a birth-death chain")
    spec = spectra.spectral_weights(params)
    rows = [(str(k), spec.eigenvalues[k], spec.weights[k]) for k in range(spec.n)]
    write_csv(_out(outdir, "spectrum.csv"), ["k", "t_k", "mu_k"], rows)
    checks = spectra.spectrum_monotonicity_checks(params)
    write_json(_out(outdir, "spectrum_summary.json"), {
        "gap": spec.gap,
        "monotone": checks["monotone"],
        "min_eigenvalue": checks["min_eigenvalue"],
        "min_holding": checks["min_holding"],
        "spectrally_nonnegative": checks["spectrally_nonnegative"],
    })
    return 0


def cmd_ssd(cfg, outdir, opts):
    P, params, H, report, res = _pipeline(cfg, opts)
    if res is None:
        write_json(_out(outdir, "ssd_summary.json"), {"feasible": False})
        return 2
    start = opts.get("start", 0)
    pi0 = res.link[start]
    pt0 = np.zeros(P.n)
    pt0[start] = 1.0
    n_max = opts.get("n_max", 100)
    sharp = stationary_times.verify_sharpness(
        P.matrix, res.p_tilde, res.link, pi0, pt0, n_max=n_max
    )
    write_csv(_out(outdir, "ssd.csv"), ["n", "separation", "survival"], sharp.table)
    ex = stationary_times.absorption_exact(res.p_tilde, pt0, sharp.boundary)
    summary = {
        "boundary": sharp.boundary,
        "witness": sharp.witness,
        "sharp": sharp.sharp,
        "max_gap": sharp.max_gap,
        "mean": ex.mean,
        "variance": ex.variance,
    }
    if params is not None and sharp.boundary == P.n - 1 and start == 0:
        spec = spectra.bd_spectrum(params)
        sp = stationary_times.absorption_spectral(spec)
        summary["mean_spectral"] = sp.mean
        summary["variance_spectral"] = sp.variance
    write_json(_out(outdir, "ssd_summary.json"), summary)
    return 0


def cmd_simulate(cfg, outdir, opts):
    P, params, H, report, res = _pipeline(cfg, opts)
    if res is None:
        write_json(_out(outdir, "simulate_summary.json"), {"feasible": False})
        return 2
    start = opts.get("start", 0)
    pt0 = np.zeros(P.n)
    pt0[start] = 1.0
    pk = coupling.product_kernel(P.matrix, res.p_tilde, res.link)
    batch = coupling.simulate(
        pk,
        pt0,
        n_steps=opts.get("n_max", 50),
        n_paths=opts.get("trials", 10000),
        seed=opts.get("seed", 0),
    )
    rep = coupling.empirical_report(batch, pk, pt0)
    rows = []
    for t in (batch.n_steps // 2, batch.n_steps):
        if t == 0:
            continue
        fx = np.bincount(batch.x[:, t], minlength=pk.n) / batch.n_paths
        mu = kernels.evolve(pt0 @ pk.link, P, t)
        for s in range(pk.n):
            rows.append((str(t), "observed", str(s), fx[s], mu[s]))
    write_csv(_out(outdir, "empirical.csv"),
              ["time", "coordinate", "state", "frequency", "exact"], rows)
    write_json(_out(outdir, "simulate_summary.json"), {
        "ok": rep["ok"],
        "checks": rep["checks"],
        "n_paths": batch.n_paths,
        "seed": batch.seed,
        "fingerprint": batch.fingerprint,
    })
    return 0


def cmd_cutoff(cfg, outdir, opts):
    if cfg["kind"] != "moran_mutation":
        raise errors.ConfigError("cutoff sweeps are defined for moran_mutation configs")
    sweep = opts.get("sweep")
    if not sweep:
        raise errors.ConfigError("cutoff needs options.sweep with a list of N")
    a1, a2 = cfg["a1"], cfg["a2"]
    a = a1 + a2
    out = stationary_times.cutoff_report(
        lambda N: spectra.moran_mutation_spectrum(N, a1, a2), sweep
    )
    rows = []
    for row in out["rows"]:
        N = row["N"]
        asym = N * (math.log(N) + math.log(a)) / a if a > 0 else float("nan")
        rows.append((
            str(N), row["mean"], row["variance"], row["relative_variance"],
            row["gap_times_mean"], row["mean"] / asym if asym > 0 else float("nan"),
        ))
    write_csv(_out(outdir, "cutoff.csv"),
              ["N", "mean", "variance", "relative_variance", "gap_times_mean",
               "ratio_to_asymptote"], rows)
    write_json(_out(outdir, "cutoff_summary.json"), {"cutoff_flag": out["cutoff_flag"]})
    return 0


def cmd_verify(cfg, outdir, opts):
    """Gated end-to-end verification with one pass/fail entry per identity."""
    P, params, H, report, res = _pipeline(cfg, opts)
    checks = {}

    def record(name, value, tol):
        checks[name] = {"value": float(value), "passed": bool(value <= tol)}

    record("dual_nonnegative", 0.0 if report.feasible else
           max(abs(v[2]) for v in report.violations), 0.0)
    if not report.feasible:
        write_json(_out(outdir, "verify_summary.json"), {
            "feasible": False,
            "checks": checks,
            "skipped": ["pipeline", "spectrum", "sharpness", "absorption"],
        })
        return 2

    vd = duals.verify_duality(P, H, report.dual, n_max=opts.get("n_max", 20))
    record("duality_static", vd["static"], 1e-10)
    record("duality_dynamic", vd["dynamic"], 1e-9)
    d = res.diagnostics
    record("harmonic_fixed_point", d["phi_harmonic"], 1e-10)
    record("link_intertwining", d["intertwining"], 1e-10)
    record("k_duality", d["k_duality"], 1e-10)
    record("boundary_rows_carry_pi",
           max(d["absorbing_rows"].values()) if d["absorbing_rows"] else 0.0, 1e-10)
    record("trace_match", d["trace_comparison"]["max_deviation"],
           1e-8 * P.n)

    start = opts.get("start", 0)
    pt0 = np.zeros(P.n)
    pt0[start] = 1.0
    try:
        sharp = stationary_times.verify_sharpness(
            P.matrix, res.p_tilde, res.link, res.link[start], pt0,
            n_max=opts.get("n_max", 100),
        )
        record("separation_dominated_by_survival", 0.0, 0.0)
        if sharp.sharp:
            record("sharp_equality", sharp.max_gap, 1e-9)
        boundary = sharp.boundary
    except errors.DualChainError as e:
        checks["separation_dominated_by_survival"] = {
            "value": float("nan"), "passed": False, "detail": str(e),
        }
        boundary = None

    if params is not None and boundary == P.n - 1 and start == 0:
        ex = stationary_times.absorption_exact(res.p_tilde, pt0, boundary)
        sp = stationary_times.absorption_spectral(spectra.bd_spectrum(params))
        dev = max(
            abs(ex.mean - sp.mean) / sp.mean if sp.mean else 0.0,
            abs(ex.variance - sp.variance) / sp.variance if sp.variance else 0.0,
        )
        record("absorption_agreement", dev, 1e-8)

    passed = all(c.get("passed") for c in checks.values())
    write_json(_out(outdir, "verify_summary.json"), {
        "feasible": True,
        "checks": checks,
        "all_passed": passed,
    })
    return 0 if passed else 1


def cmd_plotdata(cfg, outdir, opts):
    series = opts.get("series")
    if not series:
        raise errors.ConfigError("plotdata needs --series or options.series")
    rows = []
    if series == "spectrum":
        P, params = build_chain(cfg)
        if params is None:
            raise errors.ConfigError("spectrum series needs a birth-death chain")
        spec = spectra.bd_spectrum(params)
        rows = [(str(k), series, spec.eigenvalues[k]) for k in range(spec.n)]
    elif series == "phi_profile":
        P, params, H, report, res = _pipeline(cfg, opts)
        if res is None:
            return 2
        rows = [(str(x), series, res.phi[x]) for x in range(P.n)]
    elif series in ("sep_vs_survival", "absorption_pmf"):
        P, params, H, report, res = _pipeline(cfg, opts)
        if res is None:
            return 2
        start = opts.get("start", 0)
        pt0 = np.zeros(P.n)
        pt0[start] = 1.0
        sharp = stationary_times.verify_sharpness(
            P.matrix, res.p_tilde, res.link, res.link[start], pt0,
            n_max=opts.get("n_max", 50),
        )
        if series == "sep_vs_survival":
            for n, sep, surv in sharp.table:
                rows.append((str(int(n)), "separation", sep))
                rows.append((str(int(n)), "survival", surv))
        else:
            ex = stationary_times.absorption_exact(res.p_tilde, pt0, sharp.boundary)
            rows = [(str(n), series, ex.pmf[n]) for n in range(ex.n_max + 1)]
    else:
        raise errors.ConfigError(f"unknown series {series!r}")
    write_csv(_out(outdir, "series.csv"), ["n", "series", "value"], rows)
    return 0


HANDLERS = {
    "build": cmd_build,
    "dual": cmd_dual,
    "intertwine": cmd_intertwine,
    "spectrum": cmd_spectrum,
    "ssd": cmd_ssd,
    "simulate": cmd_simulate,
    "cutoff": cmd_cutoff,
    "verify": cmd_verify,
    "plotdata": cmd_plotdata,
}


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="dualchain",
        description="Duality, intertwining and strong stationary times "
        "for finite Markov chains.",
    )
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True, help="path to a JSON chain config")
    ap.add_argument("--out", default=".", help="output directory (default: cwd)")
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--nmax", type=int, default=None)
    ap.add_argument("--trials", type=int, default=None)
    ap.add_argument("--series", default=None, help="plotdata series name")
    return ap


def run(argv=None) -> int:
    args = make_parser().parse_args(argv)
    cfg = load_config(args.config)
    opts = dict(cfg.get("options", {}))
    if args.seed is not None:
        opts["seed"] = args.seed
    if args.nmax is not None:
        opts["n_max"] = args.nmax
    if args.trials is not None:
        opts["trials"] = args.trials
    if args.series is not None:
        opts["series"] = args.series
    return HANDLERS[args.command](cfg, args.out, opts)


def main() -> None:
    try:
        sys.exit(run())
    except errors.DualChainError as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        sys.exit(1)
    except Exception as e:  # surface location for genuine bugs
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        sys.exit(1)


if __name__ == "__main__":
    main()
