"""Command-line experiment runner.

Every command reads an optional JSON config, writes one or more CSV tables,
a summary.json and a manifest.json into --out.  Outputs depend only on the
resolved config and the seed, so reruns are byte-identical.
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
import os
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import click
import numpy as np

from . import __version__
from .errors import ConfigInvalid, ResonanceError
from .spectral import PotentialSpec, dirichlet_eigen, fmt

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


def version_hash() -> str:
    """sha256 over the package sources, so a manifest pins the exact code."""
    h = hashlib.sha256()
    root = Path(__file__).resolve().parent
    for p in sorted(root.glob("*.py")):
        h.update(p.name.encode())
        h.update(p.read_bytes())
    return h.hexdigest()[:16]


def _num(x):
    """Numbers as decimal strings in manifests."""
    if isinstance(x, bool) or x is None or isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return fmt(float(x))
    if isinstance(x, dict):
        return {k: _num(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_num(v) for v in x]
    return str(x)


def _cell(x):
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return fmt(float(x))
    return str(x)


def write_csv(path: Path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_cell(v) for v in r])


def write_json(path: Path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


class Ctx:
    def __init__(self, config, seed, threads, out):
        self.config = config
        self.seed = seed
        self.threads = threads
        self.out = out
        self.files = []

    def get(self, key, default=None, kind=None, required=False):
        if key in self.config:
            v = self.config[key]
        elif required:
            raise ConfigInvalid(f"missing field {key!r}", field=key)
        else:
            v = default
        if kind is not None and v is not None:
            try:
                v = kind(v)
            except (TypeError, ValueError) as e:
                raise ConfigInvalid(f"field {key!r}: {e}", field=key)
        self.config.setdefault(key, v)
        return v

    def interval(self, key, default):
        v = self.get(key, default)
        if not (isinstance(v, (list, tuple)) and len(v) == 2 and float(v[0]) < float(v[1])):
            raise ConfigInvalid(f"field {key!r} must be [lo, hi] with lo < hi", field=key)
        return (float(v[0]), float(v[1]))

    def rect(self, key, default):
        v = self.get(key, default)
        if not (isinstance(v, (list, tuple)) and len(v) == 4):
            raise ConfigInvalid(f"field {key!r} must be [x0, x1, y0, y1]", field=key)
        v = tuple(float(a) for a in v)
        if not (v[0] < v[1] and v[2] < v[3]):
            raise ConfigInvalid(f"field {key!r} has empty extent", field=key)
        return v

    def csv(self, name, header, rows):
        write_csv(self.out / name, header, rows)
        self.files.append(name)

    def finish(self, command, summary):
        write_json(self.out / "summary.json", _num(summary))
        manifest = dict(command=command, config=_num(self.config), seed=str(self.seed),
                        version=__version__, version_hash=version_hash(),
                        files=sorted(self.files + ["summary.json"]))
        write_json(self.out / "manifest.json", manifest)


def _load_config(path):
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigInvalid(f"cannot read config: {e}", field="config")
    if not isinstance(cfg, dict):
        raise ConfigInvalid("config must be a JSON object", field="config")
    return cfg


def _periodic(ctx, default=(0.0, 1.0)):
    v = ctx.get("potential", list(default))
    if isinstance(v, dict) and "periodic" in v:
        v = v["periodic"]
    if not (isinstance(v, (list, tuple)) and len(v) >= 1):
        raise ConfigInvalid("potential must be a list of periodic values", field="potential")
    try:
        return tuple(float(a) for a in v)
    except (TypeError, ValueError):
        raise ConfigInvalid("potential values must be numbers", field="potential")


def _law(ctx):
    law = ctx.get("law", ["uniform", 0.0, 1.0])
    if not isinstance(law, (list, tuple)) or not law:
        raise ConfigInvalid("law must be [name, ...]", field="law")
    law = (str(law[0]),) + tuple(float(a) for a in law[1:])
    PotentialSpec.anderson(0, law)
    return law


def _ensemble(ctx):
    from .random import AndersonEnsemble
    return AndersonEnsemble(_law(ctx), int(ctx.seed))


def _geometry(ctx):
    g = ctx.get("geometry", "halfline")
    if g not in ("halfline", "line"):
        raise ConfigInvalid("geometry must be 'halfline' or 'line'", field="geometry")
    return g


def _map(ctx, fn, items):
    """Realization-parallel map; results come back in input order."""
    if ctx.threads > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=ctx.threads) as ex:
            return list(ex.map(fn, items))
    return [fn(i) for i in items]


# -- command bodies ----------------------------------------------------------

def cmd_bands(ctx):
    from .periodic import band_spectrum
    V = _periodic(ctx)
    bs = band_spectrum(V)
    ctx.csv("bands.csv", ["band", "lower", "upper"],
            [[i, lo, hi] for i, (lo, hi) in enumerate(bs.bands)])
    return dict(p=len(V), bands=len(bs.bands), edges=2 * len(bs.bands))


def cmd_dirichlet(ctx):
    V = _periodic(ctx)
    L = ctx.get("L", 20, int)
    spec = dirichlet_eigen(PotentialSpec.periodic(V), L)
    ctx.csv("dirichlet.csv", ["j", "lambda", "log_aN", "log_aZ", "sign_phi0", "log_phi0",
                              "sign_phiL", "log_phiL", "b", "d"], spec.rows())
    return dict(L=L, eigenvalues=spec.n, sum_aN=float(np.exp(spec.aN).sum()),
                sum_b=float(spec.b.sum()))


RES_HEADER = ["realization", "j", "re", "im", "log_width", "logscale_flag", "multiplicity",
              "method", "residual"]


def _res_rows(r, res):
    for z in res:
        im = float("nan") if z.logscale else z.energy.imag
        yield [r, z.j, z.energy.real, im, z.log_width, int(z.logscale), z.multiplicity,
               z.method, z.residual]


def _random_res_job(args):
    law, seed, r, L, geometry, I, depth = args
    from .random import AndersonEnsemble, resonances_random
    ens = AndersonEnsemble(law, seed)
    spec = dirichlet_eigen(ens.potential(r, L), L, with_b=False)
    res, _ = resonances_random(spec, geometry, I=I, certify_depth=depth)
    return [(complex(z.energy), z.j, z.log_width, z.logscale, z.multiplicity, z.method, z.residual)
            for z in res]


class _Z:
    def __init__(self, t):
        self.energy, self.j, self.log_width, self.logscale, self.multiplicity, self.method, \
            self.residual = t


def cmd_resonances(ctx):
    from .resonances import find_resonances
    geometry = _geometry(ctx)
    L = ctx.get("L", 40, int)
    kind = ctx.get("kind", "periodic")
    if kind == "periodic":
        V = _periodic(ctx, (0.0,))
        region = ctx.rect("region", [-1.99, 1.99, -3.0, 0.05])
        spec = dirichlet_eigen(PotentialSpec.periodic(V), L)
        res = []
        if not np.allclose(V, 0):
            res = find_resonances(spec, geometry, region=region, certify=True)
        ctx.csv("resonances.csv", RES_HEADER, _res_rows(0, res))
        return dict(kind=kind, L=L, count=len(res))
    if kind != "anderson":
        raise ConfigInvalid("kind must be 'periodic' or 'anderson'", field="kind")
    law = _law(ctx)
    R = ctx.get("realizations", 1, int)
    I = ctx.interval("I", [-1.75, -1.4])
    depth = ctx.get("certify_depth", None)
    jobs = [(law, int(ctx.seed), r, L, geometry, I, depth) for r in range(R)]
    out = _map(ctx, _random_res_job, jobs)
    rows = []
    for r, res in enumerate(out):
        rows += list(_res_rows(r, [_Z(t) for t in res]))
    ctx.csv("resonances.csv", RES_HEADER, rows)
    return dict(kind=kind, L=L, realizations=R, count=len(rows))


def cmd_predict(ctx):
    from .periodic import c_functions, dip_points, predict_resonances
    V = _periodic(ctx)
    k = ctx.get("k", 0, int)
    L = ctx.get("L", 240, int)
    I = ctx.interval("I", [-1.9, 1.9])
    geometry = _geometry(ctx)
    cf = c_functions(V, k)
    dips = [e for e, _ in dip_points(cf, k, geometry, I)]
    pr = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for lo, hi in cf.bs.bands:
            # stay clear of the band edges where the square-root branch point sits
            pad = 1e-3 * (hi - lo)
            a, b = max(lo + pad, I[0]), min(hi - pad, I[1])
            if a < b:
                pr += predict_resonances(cf, k, L, (a, b), geometry, dips=dips)
    ctx.csv("predict.csv", ["l", "lambda", "re_ztilde", "L_im_ztilde", "re_first_order", "dip_flag"],
            [[q.l, q.lam, q.ztilde.real, L * q.ztilde.imag, q.zfirst.real, int(q.dip)] for q in pr])
    return dict(L=L, k=k, predictions=len(pr), dips=dips)


def _energies(ctx, default):
    E = ctx.get("energies", default)
    try:
        return np.array([float(e) for e in E])
    except (TypeError, ValueError):
        raise ConfigInvalid("energies must be a list of numbers", field="energies")


def cmd_lyapunov(ctx):
    from .random import lyapunov
    ens = _ensemble(ctx)
    E = _energies(ctx, [-1.5, -1.0, 0.0, 0.5, 1.0])
    length = ctx.get("length", 10000, int)
    replicas = ctx.get("replicas", 4, int)
    rho, err = lyapunov(ens, E, length, replicas)
    ctx.csv("lyapunov.csv", ["E", "rho", "stderr"], zip(E, rho, err))
    return dict(points=len(E), length=length, replicas=replicas)


def cmd_ids(ctx):
    from .random import ids
    ens = _ensemble(ctx)
    E = _energies(ctx, [-1.5, -1.0, 0.0, 0.5, 1.0])
    L = ctx.get("L", 2000, int)
    replicas = ctx.get("replicas", 2, int)
    N = ids(ens, E, L, replicas)
    ctx.csv("ids.csv", ["E", "N"], zip(E, np.atleast_1d(N)))
    return dict(points=len(E), L=L, replicas=replicas)


def _rescaled(ctx):
    from .random import eta, lyapunov_curve, rescale, rescale_deep
    ens = _ensemble(ctx)
    geometry = _geometry(ctx)
    L = ctx.get("L", 200, int)
    E0 = ctx.get("E0", -1.6, float)
    R = ctx.get("realizations", 10, int)
    window = ctx.get("window", 0.1, float)
    deep = bool(ctx.get("deep", False))
    cur = lyapunov_curve(ens, length=ctx.get("curve_length", 10000, int),
                         ids_L=ctx.get("curve_ids_L", 10000, int))
    n0 = float(cur.n_at(E0))
    rho0 = float(cur.rho_at(E0))
    I = (E0 - window, E0 + window)
    jobs = [(ens.law, int(ctx.seed), r, L, geometry, I, None) for r in range(R)]
    out = _map(ctx, _random_res_job, jobs)
    pts = []
    for r, res in enumerate(out):
        zs = [_Z(t) for t in res]
        f = rescale_deep if deep else rescale
        pts.append(f(zs, E0, L, eta(geometry), n0, rho0, realization=r))
    return pts, dict(L=L, E0=E0, n0=n0, rho0=rho0, realizations=R, geometry=geometry, deep=deep)


def cmd_rescale(ctx):
    pts, meta = _rescaled(ctx)
    ctx.csv("points.csv", ["realization", "x", "y", "scale"],
            [[p.realization, p.x, p.y, p.scale] for ps in pts for p in ps])
    meta["points"] = sum(len(p) for p in pts)
    return meta


def cmd_poisson(ctx):
    from .stats import GOF_COLUMNS, box_counts, poisson_gof
    boxes = ctx.get("boxes", [[-2.0, 0.0, 0.2, 0.5], [0.0, 2.0, 0.2, 0.5],
                              [-2.0, 0.0, 0.5, 0.8], [0.0, 2.0, 0.5, 0.8]])
    pts, meta = _rescaled(ctx)
    exp = box_counts(pts, boxes)
    rep = poisson_gof(exp, alpha=ctx.get("alpha", 0.01, float),
                      min_realizations=ctx.get("min_realizations", 100, int))
    ctx.csv("poisson.csv", GOF_COLUMNS, rep.rows())
    lines = [f"box {i}: mu={fmt(b.mu)} mean={fmt(b.mean)} var={fmt(b.variance)} "
             f"chi2={fmt(b.chi2)} dof={b.dof} p={fmt(b.pvalue)}" for i, b in enumerate(rep.boxes)]
    lines.append(f"combined chi2={fmt(rep.chi2)} dof={rep.dof} p={fmt(rep.pvalue)} "
                 f"rejected={int(rep.rejected)}")
    lines.append(f"max covariance z={fmt(rep.max_cov_z)} (consistency check only)")
    with open(ctx.out / "report.txt", "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    ctx.files.append("report.txt")
    meta.update(chi2=rep.chi2, dof=rep.dof, pvalue=rep.pvalue, rejected=rep.rejected,
                means_ok=rep.means_ok)
    return meta


def cmd_xi_zeros(ctx):
    from .random import xi_zeros
    ens = _ensemble(ctx)
    r = ctx.get("realization", 0, int)
    L_aux = ctx.get("L_aux", 400, int)
    region = ctx.rect("region", [-1.75, -1.4, -2.0, -1e-6])
    zs = xi_zeros(ens, r, region, L_aux)
    ctx.csv("xi_zeros.csv", ["re", "im", "log_width", "multiplicity"],
            [[z.energy.real, z.energy.imag, z.log_width, z.multiplicity] for z in zs])
    return dict(realization=r, L_aux=L_aux, zeros=len(zs))


def cmd_free_strip(ctx):
    from .resonances import resonance_free_strip
    geometry = _geometry(ctx)
    L = ctx.get("L", 120, int)
    I = ctx.interval("I", [-1.0, 1.0])
    kind = ctx.get("kind", "periodic")
    if kind == "periodic":
        spec = dirichlet_eigen(PotentialSpec.periodic(_periodic(ctx)), L, with_b=False)
    else:
        ens = _ensemble(ctx)
        spec = dirichlet_eigen(ens.potential(ctx.get("realization", 0, int), L), L, with_b=False)
    s = resonance_free_strip(spec, geometry, I)
    ctx.csv("strip.csv", ["log_depth", "method", "floor_log", "count_lambda"],
            [[s.log_depth, s.method, s.floor_log, s.count_lambda]])
    return dict(L=L, log_depth=s.log_depth, method=s.method)


def cmd_decay_fit(ctx):
    from .stats import decay_fit
    samples = ctx.get("samples", None)
    if samples is None:
        # gap-eigenvalue widths of a periodic potential along fixed L mod p
        from .resonances import CharFunction, newton_from_perturbative
        V = _periodic(ctx, (-1.0, 0.5, 0.0))
        E = ctx.get("E", -1.5, float)
        Ls = ctx.get("Ls", list(range(60, 181, 12)))
        geometry = _geometry(ctx)
        samples = []
        for L in Ls:
            spec = dirichlet_eigen(PotentialSpec.periodic(V), int(L))
            j = int(np.argmin(np.abs(spec.lambdas - E)))
            r = newton_from_perturbative(CharFunction(spec, geometry), j)
            if r is None:
                raise ResonanceError(f"no resonance near E={E} at L={L}")
            samples.append((int(L), r.log_width))
    try:
        samples = [(float(a), float(b)) for a, b in samples]
    except (TypeError, ValueError):
        raise ConfigInvalid("samples must be [L, log_width] pairs", field="samples")
    slope, icpt, r2 = decay_fit(samples)
    ctx.csv("decay.csv", ["L", "log_width"], sorted(samples))
    return dict(slope=slope, intercept=icpt, r2=r2, points=len(samples))


COMMANDS = {
    "bands": cmd_bands, "dirichlet": cmd_dirichlet, "resonances": cmd_resonances,
    "predict": cmd_predict, "lyapunov": cmd_lyapunov, "ids": cmd_ids, "rescale": cmd_rescale,
    "poisson": cmd_poisson, "xi-zeros": cmd_xi_zeros, "free-strip": cmd_free_strip,
    "decay-fit": cmd_decay_fit,
}


def run(command: str, config: dict, seed: int = 0, threads: int = 1, out="out") -> int:
    """Run one command; returns the exit status."""
    out = Path(out)
    try:
        if command not in COMMANDS:
            raise ConfigInvalid(f"unknown command {command!r}", field="command")
        if not (0 <= int(seed) < 2 ** 64):
            raise ConfigInvalid("seed must be an unsigned 64-bit integer", field="seed")
        if int(threads) < 1:
            raise ConfigInvalid("threads must be >= 1", field="threads")
        out.mkdir(parents=True, exist_ok=True)
        ctx = Ctx(dict(config), int(seed), int(threads), out)
        summary = COMMANDS[command](ctx)
        ctx.finish(command, summary)
    except ConfigInvalid as e:
        fld = f" [{e.field}]" if getattr(e, "field", None) else ""
        click.echo(f"config error{fld}: {e}", err=True)
        return EXIT_CONFIG
    except (ResonanceError, FloatingPointError, np.linalg.LinAlgError) as e:
        click.echo(f"numerical failure in {command}: {type(e).__name__}: {e}", err=True)
        return EXIT_NUMERIC
    return EXIT_OK


@click.group(context_settings=dict(help_option_names=["-h", "--help"]))
@click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None,
              help="JSON file with command parameters.")
@click.option("--seed", type=int, default=0, show_default=True, help="Master seed (u64).")
@click.option("--threads", type=int, default=1, show_default=True,
              help="Worker processes for realization loops.")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default="out",
              show_default=True, help="Output directory.")
@click.version_option(__version__)
@click.pass_context
def cli(ctx, config_path, seed, threads, out_dir):
    """Resonances of truncated one-dimensional lattice operators."""
    ctx.obj = dict(config_path=config_path, seed=seed, threads=threads, out=out_dir)


def _make(name):
    @click.pass_context
    def _cmd(ctx):
        o = ctx.obj
        try:
            cfg = _load_config(o["config_path"])
        except ConfigInvalid as e:
            click.echo(f"config error: {e}", err=True)
            ctx.exit(EXIT_CONFIG)
        ctx.exit(run(name, cfg, o["seed"], o["threads"], o["out"]))
    _cmd.__doc__ = COMMANDS[name].__doc__ or f"Run the {name} experiment."
    return click.command(name)(_cmd)


_DOCS = {
    "bands": "Band edges of a periodic potential.",
    "dirichlet": "Dirichlet eigenvalues and boundary weights.",
    "resonances": "Resonances of a periodic or Anderson box.",
    "predict": "Closed-form resonance predictions for a periodic potential.",
    "lyapunov": "Lyapunov exponent of the Anderson cocycle.",
    "ids": "Integrated density of states.",
    "rescale": "Rescaled resonance point process.",
    "poisson": "Poisson goodness-of-fit of rescaled resonances.",
    "xi-zeros": "Zeros of the limiting half-line Xi function.",
    "free-strip": "Depth of the resonance-free strip below an interval.",
    "decay-fit": "Linear fit of log-widths against L.",
}

for _name in COMMANDS:
    COMMANDS[_name].__doc__ = _DOCS[_name]
    cli.add_command(_make(_name))


def main(argv=None):
    try:
        cli.main(args=argv, prog_name="lattice-resonances", standalone_mode=True)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_OK
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
