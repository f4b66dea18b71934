"""Command-line front end: boundary sweeps, scheme simulation, verification, rd queries.

Exit codes: 0 ok, 1 usage/config error, 2 budget exceeded, 3 verification failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import bounds, ratedist, schemes, spheregeom
from .errors import BudgetExceeded, GaussMacError
from .mcsim import DecoderMode, SimConfig, sim_superposition, sim_uncoded_mac, sim_vq
from .model import DistortionPair, MacChannel, RatePair, SourceParams

EXIT_OK, EXIT_USAGE, EXIT_BUDGET, EXIT_VERIFY = 0, 1, 2, 3
SEED_ENV = "GAUSSMAC_SEED"

SWEEP_COLUMNS = {
    "lower": "d_lower",
    "separation": "d_sep",
    "uncoded": "d_uncoded",
    "vq": "d_vq",
    "superposition": "d_sup",
    "asymptote": "d_asym",
}

# key -> parser; flat key=value simulation config
CONFIG_KEYS = {
    "sigma2": float,
    "rho": float,
    "p1": float,
    "p2": float,
    "noise": float,
    "n": int,
    "trials": int,
    "epsilon": float,
    "seed": int,
    "rate1": float,
    "rate2": float,
    "alpha1": float,
    "alpha2": float,
    "mode": str,
    "scheme": str,
}
CONFIG_DEFAULTS = {
    "sigma2": 1.0, "rho": 0.5, "p1": 1.0, "p2": 1.0, "noise": 1.0,
    "n": 1000, "trials": 10, "epsilon": 0.05, "seed": 0,
    "rate1": 0.5, "rate2": 0.5, "alpha1": 0.0, "alpha2": 0.0,
    "mode": "genie", "scheme": "uncoded",
}
MODES = {"genie": DecoderMode.Genie, "full": DecoderMode.FullJoint}
SCHEMES = ("uncoded", "vq", "superposition")


class ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return "%.9g" % x


def write_csv(rows, header, out) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])


# --- config ------------------------------------------------------------------------


def parse_config(text: str, source: str = "<config>") -> dict:
    """Parse flat ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key=value, got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in CONFIG_KEYS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        try:
            out[key] = CONFIG_KEYS[key](value)
        except ValueError:
            raise ConfigError(f"{source}:{lineno}: bad value for {key!r}: {value!r}") from None
    return out


def resolve_config(file_values: dict, flag_values: dict, env=None) -> dict:
    """Defaults < file < environment seed < command-line flags."""
    env = os.environ if env is None else env
    cfg = dict(CONFIG_DEFAULTS)
    cfg.update(file_values)
    if env.get(SEED_ENV):
        try:
            cfg["seed"] = int(env[SEED_ENV])
        except ValueError:
            raise ConfigError(f"{SEED_ENV}: bad seed {env[SEED_ENV]!r}") from None
    cfg.update({k: v for k, v in flag_values.items() if v is not None})
    if cfg["mode"] not in MODES:
        raise ConfigError(f"mode: expected one of {sorted(MODES)}, got {cfg['mode']!r}")
    if cfg["scheme"] not in SCHEMES:
        raise ConfigError(f"scheme: expected one of {list(SCHEMES)}, got {cfg['scheme']!r}")
    return cfg


# --- sweep ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SweepSpec:
    rho: float = 0.5
    sigma2: float = 1.0
    snr_min: float = 0.1
    snr_max: float = 3.0
    points: int = 30
    scale: str = "linear"
    schemes: tuple = tuple(SWEEP_COLUMNS)

    def __post_init__(self):
        if not self.snr_min > 0:
            raise ConfigError("snr_min must be positive")
        if self.snr_max < self.snr_min:
            raise ConfigError("snr_max must be >= snr_min")
        if self.points < 2:
            raise ConfigError("points must be >= 2")
        if self.scale not in ("linear", "log"):
            raise ConfigError(f"scale must be linear or log, got {self.scale!r}")
        bad = set(self.schemes) - set(SWEEP_COLUMNS)
        if bad:
            raise ConfigError(f"unknown schemes: {sorted(bad)}")

    def grid(self):
        if self.scale == "log":
            return np.geomspace(self.snr_min, self.snr_max, self.points)
        return np.linspace(self.snr_min, self.snr_max, self.points)


def _sweep_row(args):
    spec, snr = args
    src = SourceParams(spec.sigma2, spec.rho)
    s = spec.sigma2
    p, noise = float(snr), 1.0
    row = {"snr": p}
    if "lower" in spec.schemes:
        row["d_lower"] = bounds.lower_bound_sym(src, p, noise) / s
    if "separation" in spec.schemes:
        row["d_sep"] = bounds.separation_sym(src, p, noise) / s
    if "uncoded" in spec.schemes:
        row["d_uncoded"] = bounds.uncoded_sym_dstar(src, p, noise)[0] / s
    if "vq" in spec.schemes:
        row["d_vq"] = bounds.vq_sym_opt(src, p, noise)[0] / s
    if "superposition" in spec.schemes:
        row["d_sup"] = bounds.sp_sym_opt(src, p, noise)[0] / s
    if "asymptote" in spec.schemes:
        row["d_asym"] = bounds.high_snr_asymptote_sym(src, p, noise) / s
    return row


SWEEP_HEADER = ["snr", *SWEEP_COLUMNS.values()]


def run_sweep(spec: SweepSpec, workers: int = 1):
    """Rows of normalized distortions D/sigma2, one per SNR, in grid order."""
    jobs = [(spec, snr) for snr in spec.grid()]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            rows = list(pool.map(_sweep_row, jobs))
    else:
        rows = [_sweep_row(j) for j in jobs]
    return [[row.get(col) for col in SWEEP_HEADER] for row in rows]


# --- simulate -------------------------------------------------------------------------

SIM_HEADER = [
    "scheme", "mode", "n", "trials", "d1_hat", "d2_hat", "se1", "se2",
    "d1_ref", "d2_ref", "z1", "z2", "encode_failure_rate", "decode_error_rate",
    "decode_trials", "power1", "power2",
]


def _z(hat, ref, se):
    if se > 0:
        return (hat - ref) / se
    return 0.0 if hat == ref else math.inf


def run_simulate(cfg: dict, workers: int = 1):
    """One aggregate row of empirics with closed-form references and z-scores."""
    src = SourceParams(cfg["sigma2"], cfg["rho"])
    ch = MacChannel(cfg["p1"], cfg["p2"], cfg["noise"])
    sim = SimConfig(n=cfg["n"], trials=cfg["trials"], epsilon=cfg["epsilon"], seed=cfg["seed"],
                    decoder_mode=MODES[cfg["mode"]], workers=workers)
    scheme = cfg["scheme"]
    if scheme == "uncoded":
        emp = sim_uncoded_mac(sim, src, ch)
        ref = schemes.mac_uncoded(src, ch)
    elif scheme == "vq":
        r = RatePair(cfg["rate1"], cfg["rate2"])
        emp = sim_vq(sim, src, ch, r)
        ref = schemes.vq_distortions(r, src)
    else:
        sp = schemes.SuperpositionConfig(cfg["rate1"], cfg["rate2"], cfg["alpha1"], cfg["alpha2"])
        emp = sim_superposition(sim, src, ch, sp)
        ref = schemes.sp_distortions(schemes.sp_derive(sp, src, ch), src)
    return [[
        scheme, cfg["mode"], sim.n, emp.trials_run, emp.d1_hat, emp.d2_hat, emp.se1, emp.se2,
        ref.d1, ref.d2, _z(emp.d1_hat, ref.d1, emp.se1), _z(emp.d2_hat, ref.d2, emp.se2),
        emp.encode_failure_rate, emp.decode_error_rate, emp.decode_trials,
        emp.power_used[0], emp.power_used[1],
    ]]


# --- verify ----------------------------------------------------------------------------


def _check_rd_oracle():
    d = np.linspace(0.01, 1.0, 100)
    d1, d2 = (a.ravel() for a in np.meshgrid(d, d))
    worst = 0.0
    for rho in (0.1, 0.5, 0.9):
        closed = ratedist.rd_rate_array(d1, d2, 1.0, rho)
        oracle, _ = ratedist.reference_rates(d1, d2, 1.0, rho)
        worst = max(worst, float(np.max(np.abs(closed - oracle))))
    return worst, 1e-6


def _check_rd_continuity():
    worst = 0.0
    for rho in (0.1, 0.5, 0.9):
        src = SourceParams(1.0, rho)
        for d1 in np.linspace(0.05, 0.95, 19):
            # region-1 boundary d2 = 1 - rho^2 + rho^2 d1, and the region 2/3 boundary
            edges = [1 - rho * rho + rho * rho * d1, 1 - rho * rho / (1 - d1)]
            for d2 in edges:
                if not 0.02 < d2 < 0.999:
                    continue
                lo = ratedist.rd_rate(DistortionPair(d1, d2 * (1 - 1e-10)), src)
                hi = ratedist.rd_rate(DistortionPair(d1, d2 * (1 + 1e-10)), src)
                worst = max(worst, abs(hi - lo))
    return worst, 1e-6


def _check_uncoded_equality():
    src, ch = SourceParams(1.0, 0.5), MacChannel(1.0, 1.0, 2.0)
    _, slack = bounds.necessary_condition(schemes.mac_uncoded(src, ch), src, ch)
    return abs(slack), 1e-9


def _check_sp_reduction():
    src = SourceParams(1.0, 0.5)
    worst = 0.0
    for r in np.linspace(0.05, 2.0, 10):
        for snr in np.geomspace(0.1, 100, 10):
            ch = MacChannel(snr, snr, 1.0)
            der = schemes.sp_derive(schemes.SuperpositionConfig(r, r, 0.0, 0.0), src, ch)
            dsp = schemes.sp_distortions(der, src)
            dvq = schemes.vq_distortions(RatePair(r, r), src)
            f_sp, s_sp = schemes.sp_rate_feasible(der, src)
            f_vq, s_vq = schemes.vq_rate_feasible(RatePair(r, r), src, ch)
            if f_sp != f_vq:
                return math.inf, 1e-9
            worst = max(worst, abs(dsp.d1 - dvq.d1), abs(dsp.d2 - dvq.d2),
                        *(abs(a - b) for a, b in zip(s_sp, s_vq)), der.residual)
    return worst, 1e-9


def _check_cap_sandwich(samples=200_000):
    rng = np.random.Generator(np.random.Philox(2024))
    worst = 0.0
    for n in (10, 20, 50):
        pts = spheregeom.sample_sphere(n, 1.0, rng, size=samples)
        for deg in (30, 45, 60):
            phi = math.radians(deg)
            b = spheregeom.cap_ratio_bounds(n, phi)
            frac = float(np.mean(pts[:, 0] >= math.cos(phi)))
            margin = 4 * math.sqrt(max(frac * (1 - frac), 1 / samples) / samples)
            # positive values measure how far outside the sandwich the estimate is
            worst = max(worst, b.lower - frac - margin, frac - b.upper - margin)
    return max(worst, 0.0), 0.0


def _check_gamma_ratio():
    from scipy.special import gammaln

    xs = np.geomspace(5, 1e4, 200)
    exact = np.exp(gammaln(xs + 0.5) - gammaln(xs))
    approx = np.array([spheregeom.gamma_half_ratio(x) for x in xs])
    return float(np.max(np.abs(approx / exact - 1))), 1e-6


def _check_ordering():
    src = SourceParams(1.0, 0.5)
    worst = -math.inf
    for snr in (0.25, 0.5, 1.0, 2.0, 4.0):
        lb = bounds.lower_bound_sym(src, snr, 1.0)
        sp = bounds.sp_sym_opt(src, snr, 1.0)[0]
        vq = bounds.vq_sym_opt(src, snr, 1.0)[0]
        un = bounds.uncoded_sym_dstar(src, snr, 1.0)[0]
        sep = bounds.separation_sym(src, snr, 1.0)
        worst = max(worst, lb - sp, sp - min(vq, un), vq - sep)
    return max(worst, 0.0), 1e-9


VERIFY_CHECKS = {
    "rd_vs_waterfill": _check_rd_oracle,
    "rd_boundary_continuity": _check_rd_continuity,
    "uncoded_necessary_equality": _check_uncoded_equality,
    "superposition_vq_reduction": _check_sp_reduction,
    "cap_bound_sandwich": _check_cap_sandwich,
    "gamma_half_ratio_series": _check_gamma_ratio,
    "symmetric_ordering": _check_ordering,
}


def run_verify(checks=None):
    """Rows ``(check, max_error, tolerance, status)``; errors compare with ``<=``."""
    rows = []
    for name, fn in (checks or VERIFY_CHECKS).items():
        try:
            result = fn()
            err, tol = result if isinstance(result, tuple) else (result, 0.0)
        except GaussMacError:
            err, tol = math.inf, 0.0
        rows.append([name, err, tol, "pass" if err <= tol else "fail"])
    return rows


# --- entry point -----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="gaussmac", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sw = sub.add_parser("sweep", help="symmetric boundary sweep over P/N")
    sw.add_argument("--rho", type=float, default=0.5)
    sw.add_argument("--sigma2", type=float, default=1.0)
    sw.add_argument("--snr-min", type=float, default=0.1)
    sw.add_argument("--snr-max", type=float, default=3.0)
    sw.add_argument("--points", type=int, default=30)
    sw.add_argument("--scale", choices=("linear", "log"), default="linear")
    sw.add_argument("--schemes", default=",".join(SWEEP_COLUMNS),
                    help="comma-separated subset of " + ",".join(SWEEP_COLUMNS))
    sw.add_argument("--workers", type=int, default=1)
    sw.add_argument("-o", "--output")

    sim = sub.add_parser("simulate", help="Monte Carlo run of one scheme")
    sim.add_argument("--config", help="flat key=value file")
    for key, typ in CONFIG_KEYS.items():
        sim.add_argument(f"--{key}", type=typ, default=None)
    sim.add_argument("--workers", type=int, default=1)
    sim.add_argument("-o", "--output")

    ver = sub.add_parser("verify", help="oracle-equivalence and invariant checks")
    ver.add_argument("-o", "--output")

    rd = sub.add_parser("rd", help="rate-distortion function at one point")
    rd.add_argument("--d1", type=float, required=True)
    rd.add_argument("--d2", type=float, required=True)
    rd.add_argument("--rho", type=float, required=True)
    rd.add_argument("--sigma2", type=float, default=1.0)
    rd.add_argument("-o", "--output")
    return ap


def _emit(args, header, rows):
    buf = io.StringIO()
    write_csv(rows, header, buf)
    if args.output:
        with open(args.output, "w", encoding="utf-8", newline="") as fh:
            fh.write(buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "sweep":
            spec = SweepSpec(args.rho, args.sigma2, args.snr_min, args.snr_max, args.points,
                             args.scale, tuple(s for s in args.schemes.split(",") if s))
            SourceParams(args.sigma2, args.rho)
            _emit(args, SWEEP_HEADER, run_sweep(spec, workers=args.workers))
        elif args.command == "simulate":
            file_values = {}
            if args.config:
                with open(args.config, encoding="utf-8") as fh:
                    file_values = parse_config(fh.read(), args.config)
            flags = {k: getattr(args, k) for k in CONFIG_KEYS}
            cfg = resolve_config(file_values, flags)
            _emit(args, SIM_HEADER, run_simulate(cfg, workers=args.workers))
        elif args.command == "verify":
            rows = run_verify()
            _emit(args, ["check", "max_error", "tolerance", "status"], rows)
            if any(r[3] != "pass" for r in rows):
                return EXIT_VERIFY
        elif args.command == "rd":
            src = SourceParams(args.sigma2, abs(args.rho))
            d = DistortionPair(args.d1, args.d2)
            _emit(args, ["d1", "d2", "rho", "sigma2", "rate", "region"], [[
                d.d1, d.d2, src.rho, src.sigma2, ratedist.rd_rate(d, src),
                ratedist.classify_region(d, src).name,
            ]])
    except BudgetExceeded as exc:
        print(f"gaussmac: budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (ConfigError, GaussMacError, OSError) as exc:
        print(f"gaussmac: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
