"""Command-line interface.

Exit codes: 0 success, 1 usage, 2 input format, 3 numerical failure,
4 selftest failure.
"""

from __future__ import annotations

import argparse
import contextlib
import json
import statistics
import sys
import time

import numpy as np

from .errors import FormatError, NumericalFailure, ValidationError


class _Parser(argparse.ArgumentParser):
    """argparse with the exit-code contract (usage errors exit 1)."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


@contextlib.contextmanager
def _out_stream(path):
    if path == "-":
        yield sys.stdout
    else:
        with open(path, "w") as fh:
            yield fh


def _thread_limit(n):
    from threadpoolctl import threadpool_limits
    return threadpool_limits(limits=n)


def _fmt(x) -> str:
    return f"{x:.17g}"


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_measure(args) -> int:
    from .macromeasure import Convention, measure_F, measure_I
    from .spincore import read_msdm

    rho = read_msdm(args.infile)
    conv = Convention.Raw if args.convention == "raw" else Convention.QubitNormalized
    results = []
    if args.measure in ("I", "both"):
        results.append(measure_I(rho, convention=conv, restarts=args.restarts,
                                 seed=args.seed, tol=args.tol))
    if args.measure in ("F", "both"):
        results.append(measure_F(rho, restarts=args.restarts, seed=args.seed,
                                 tol=args.tol))
    with _out_stream(args.out) as fh:
        if len(results) == 1:
            fh.write(results[0].to_json() + "\n")
        else:
            fh.write("[" + ",\n".join(r.to_json() for r in results) + "]\n")
    return 0


def cmd_wigner(args) -> int:
    from .phasespace import (characteristic_table, wigner_grid, wigner_to_csv)
    from .spincore import DensityMatrix, SystemDescriptor

    s2 = args.spin
    if s2 < 1:
        raise ValidationError("--spin must be a positive integer (2S)")
    if not 0.0 <= args.gamma <= 1.0:
        raise ValidationError("--gamma must lie in [0, 1]")
    d = s2 + 1
    m = np.zeros((d, d), dtype=complex)
    m[0, 0] = m[-1, -1] = 0.5
    m[0, -1] = m[-1, 0] = 0.5 * args.gamma
    rho = DensityMatrix(SystemDescriptor(1, s2), m)
    grid = wigner_grid(characteristic_table(rho), args.ntheta, args.nphi)
    with _out_stream(args.out) as fh:
        wigner_to_csv(grid, fh)
    return 0


def cmd_ising_sweep(args) -> int:
    from .isingqpt import block_rdm, sweep_block, sweep_to_csv
    from .macromeasure import measure_F, measure_I
    from .spincore import purity

    lambdas = np.linspace(args.lmin, args.lmax, args.steps)
    rows = []
    failed = None
    for length in sorted(args.block_sizes):
        for lam in lambdas:
            try:
                rho = block_rdm(float(lam), length)
                iv = measure_I(rho, restarts=args.restarts, seed=args.seed).value
                fv = (measure_F(rho, restarts=args.restarts, seed=args.seed).value
                      if rho.descriptor.total_dim <= args.fcap else float("nan"))
                rows.append((float(lam), length, iv, fv, purity(rho)))
            except NumericalFailure as exc:
                rows.append((float(lam), length,
                             float("nan"), float("nan"), float("nan")))
                failed = (lam, length, str(exc))
                break
        if failed:
            break
    with _out_stream(args.out) as fh:
        fh.write("lambda,L,I,F,purity\n")
        for lam, length, iv, fv, pur in rows:
            fh.write(f"{_fmt(lam)},{length},{_fmt(iv)},{_fmt(fv)},{_fmt(pur)}\n")
    if failed:
        print(f"numerical failure at lambda={failed[0]}, L={failed[1]}: "
              f"{failed[2]}", file=sys.stderr)
        return 3
    return 0


def cmd_ising_scaling(args) -> int:
    from .isingqpt import scaling_exponent, scaling_to_csv

    slope, records = scaling_exponent(args.chain_sizes, lam=args.lam,
                                      restarts=args.restarts, seed=args.seed)
    with _out_stream(args.out) as fh:
        fh.write("N,maxvar_per_particle\n")
        for n, v in records:
            fh.write(f"{n},{_fmt(v)}\n")
    print(f"fitted exponent: {_fmt(slope)}", file=sys.stderr)
    return 0


def cmd_dissipate(args) -> int:
    from .lindblad import (LindbladSpec, dicke_evolve, dicke_ghz, evolve)
    from .spincore import ghz_state

    spec = LindbladSpec(rabi_frequency=args.omega,
                        dissipation_rate=args.gamma)
    dt = args.dt
    if dt is None:
        rate = max(args.gamma * (args.N + 1), abs(args.omega), 1e-12)
        dt = 0.1 / rate
    nsave = max(1, int(round(args.tmax / (dt * args.save_every))))
    t_grid = np.linspace(0.0, args.tmax, nsave + 1)
    use_dicke = args.N > 10 or not args.full
    if use_dicke:
        traj = dicke_evolve(dicke_ghz(args.N), spec, t_grid, dt=dt)
    else:
        traj = evolve(ghz_state(args.N), spec, t_grid, dt=dt,
                      compute_measures=True, restarts=args.restarts,
                      seed=args.seed)
    with _out_stream(args.out) as fh:
        fh.write("t,purity,I,F\n")
        for t, p, iv, fv in zip(traj.times, traj.purity,
                                traj.i_values, traj.f_values):
            fh.write(f"{_fmt(t)},{_fmt(p)},{_fmt(iv)},{_fmt(fv)}\n")
    return 0


def cmd_bench(args) -> int:
    from .macromeasure import build_V, build_W, optimize_direction
    from .spincore import SystemDescriptor, random_density

    records = []
    with _thread_limit(1):
        for n in args.system_sizes:
            desc = SystemDescriptor(n, 1)
            states = [random_density(desc, desc.total_dim, args.seed, stream=k)
                      for k in range(args.samples)]
            # time matrix construction alone, then optimization alone
            vmats = [build_V(s) for s in states]
            wmats = [build_W(s) for s in states]

            def run_phase(fn):
                fn()  # warmup
                samples = []
                for _ in range(args.reps):
                    t0 = time.perf_counter()
                    fn()
                    samples.append(time.perf_counter() - t0)
                return statistics.median(samples)

            timings = {
                "BuildV": run_phase(lambda: [build_V(s) for s in states]),
                "BuildW": run_phase(lambda: [build_W(s) for s in states]),
                "OptimizeV": run_phase(lambda: [optimize_direction(
                    m, restarts=args.restarts, seed=args.seed) for m in vmats]),
                "OptimizeW": run_phase(lambda: [optimize_direction(
                    m, restarts=args.restarts, seed=args.seed) for m in wmats]),
            }
            for phase, sec in timings.items():
                records.append((n, phase, sec, args.samples))
    with _out_stream(args.out) as fh:
        fh.write("N,phase,median_seconds,samples\n")
        for n, phase, sec, k in records:
            fh.write(f"{n},{phase},{_fmt(sec)},{k}\n")
    return 0


def _selftest_checks():
    from .isingqpt import block_rdm, g_coefficient
    from .lindblad import dicke_ghz, dicke_ground, dicke_measures
    from .macromeasure import Convention, measure_F, measure_I
    from .phasespace import characteristic_table, purity_from_characteristic
    from .spincore import (DensityMatrix, SystemDescriptor, ghz_state, purity,
                           random_density)

    def ghz4():
        rho = ghz_state(4)
        iv = measure_I(rho, restarts=20, seed=0).value
        fv = measure_F(rho, restarts=20, seed=0).value
        return abs(iv - 4) < 1e-8 and abs(fv - 4) < 1e-8, f"I={iv}, F={fv}"

    def product_floor():
        plus = np.full(16, 0.25)
        rho = DensityMatrix(SystemDescriptor(4, 1), np.outer(plus, plus))
        iv = measure_I(rho, restarts=20, seed=0).value
        return abs(iv - 1) < 1e-8, f"I={iv}"

    def mixed_bell():
        desc = SystemDescriptor(2, 1)
        b00 = np.zeros(4)
        b00[0] = 1
        b11 = np.zeros(4)
        b11[3] = 1
        rho0 = 0.5 * (np.outer(b00, b00) + np.outer(b11, b11))
        bell = (b00 + b11) / np.sqrt(2)
        rho1 = np.outer(bell, bell)
        vals = []
        for a in (0.0, 0.5, 1.0):
            rho = DensityMatrix(desc, a * rho0 + (1 - a) * rho1)
            vals.append(measure_I(rho, convention=Convention.Raw,
                                  restarts=30, seed=0).value)
        ok = (abs(vals[0] - 1) < 1e-8 and abs(vals[1] - 0.9) < 1e-8
              and abs(vals[2] - 0.5) < 1e-8)
        return ok, f"values={vals}"

    def dicke_anchors():
        i0, f0 = dicke_measures(dicke_ghz(50))
        i1, f1 = dicke_measures(dicke_ground(50))
        ok = (abs(i0 - 50) < 1e-6 and abs(f0 - 50) < 1e-6
              and abs(i1 - 1) < 1e-8 and abs(f1 - 1) < 1e-8)
        return ok, f"ghz=({i0},{f0}), steady=({i1},{f1})"

    def ising_g0():
        g = g_coefficient(1.0, 0)
        return abs(g.real + 2 / np.pi) < 1e-9 and abs(g.imag) < 1e-9, f"g0={g}"

    def ising_block():
        rho = block_rdm(1e-12, 2)
        up = np.zeros(4)
        up[0] = 1
        dev = np.abs(rho.entries - np.outer(up, up)).max()
        return dev < 1e-8, f"deviation={dev}"

    def wigner_purity():
        rho = random_density(SystemDescriptor(1, 4), 5, 11)
        chi = characteristic_table(rho)
        dev = abs(purity_from_characteristic(chi) - purity(rho))
        return dev < 1e-10, f"deviation={dev}"

    return [
        ("ghz-n4-measures", ghz4),
        ("product-state-floor", product_floor),
        ("mixed-bell-triple", mixed_bell),
        ("dicke-anchors-n50", dicke_anchors),
        ("ising-g0-critical", ising_g0),
        ("ising-block-product-limit", ising_block),
        ("wigner-purity-identity", wigner_purity),
    ]


def cmd_selftest(args) -> int:
    report = []
    first_fail = None
    for name, fn in _selftest_checks():
        try:
            ok, detail = fn()
        except Exception as exc:  # a crashed check is a failed check
            ok, detail = False, f"exception: {exc}"
        report.append({"name": name, "pass": bool(ok), "detail": detail})
        if not ok and first_fail is None:
            first_fail = name
        if not args.json:
            print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    if args.json:
        print(json.dumps({"ok": first_fail is None, "checks": report}, indent=2))
    if first_fail is not None:
        print(f"selftest failed: {first_fail}", file=sys.stderr)
        return 4
    return 0


# ---------------------------------------------------------------------------

def _int_list(text):
    return [int(x) for x in text.split(",") if x]


def build_parser() -> _Parser:
    p = _Parser(prog="spinmacro",
                description="Quantum macroscopicity toolkit for spin systems")
    p.add_argument("--threads", type=int, default=None,
                   help="BLAS thread cap (ignored by bench, which pins to 1)")
    sub = p.add_subparsers(dest="command", required=True)

    m = sub.add_parser("measure", help="evaluate measures on a state file")
    m.add_argument("--in", dest="infile", required=True)
    m.add_argument("--measure", choices=["I", "F", "both"], default="both")
    m.add_argument("--convention", choices=["raw", "qubit"], default="qubit")
    m.add_argument("--restarts", type=int, default=200)
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--tol", type=float, default=1e-9)
    m.add_argument("--out", default="-")
    m.set_defaults(func=cmd_measure)

    w = sub.add_parser("wigner", help="Wigner grid of the superposition family")
    w.add_argument("--spin", type=int, required=True, help="2S")
    w.add_argument("--gamma", type=float, default=1.0)
    w.add_argument("--ntheta", type=int, default=None)
    w.add_argument("--nphi", type=int, default=None)
    w.add_argument("--out", default="-")
    w.set_defaults(func=cmd_wigner)

    s = sub.add_parser("ising-sweep", help="block-measure sweep over lambda")
    s.add_argument("--lmin", type=float, default=0.05)
    s.add_argument("--lmax", type=float, default=20.0)
    s.add_argument("--steps", type=int, default=20)
    s.add_argument("--L", dest="block_sizes", type=_int_list, default=[2, 4, 8])
    s.add_argument("--restarts", type=int, default=60)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--fcap", type=int, default=256,
                   help="largest 2^L for which the QFI measure is evaluated")
    s.add_argument("--out", default="-")
    s.set_defaults(func=cmd_ising_sweep)

    c = sub.add_parser("ising-scaling", help="critical scaling of max variance")
    c.add_argument("--N", dest="chain_sizes", type=_int_list,
                   default=[8, 10, 12, 14])
    c.add_argument("--lam", type=float, default=1.0)
    c.add_argument("--restarts", type=int, default=60)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--out", default="-")
    c.set_defaults(func=cmd_ising_scaling)

    d = sub.add_parser("dissipate", help="collective-decay trajectory from GHZ")
    d.add_argument("--N", type=int, required=True)
    d.add_argument("--gamma", type=float, default=1.0)
    d.add_argument("--omega", type=float, default=0.0)
    d.add_argument("--tmax", type=float, default=1.0)
    d.add_argument("--dt", type=float, default=None)
    d.add_argument("--save-every", type=int, default=10)
    d.add_argument("--full", action="store_true",
                   help="force the full-space path (N <= 10 only)")
    d.add_argument("--restarts", type=int, default=50)
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--out", default="-")
    d.set_defaults(func=cmd_dissipate)

    b = sub.add_parser("bench", help="V-vs-W timing benchmark (single thread)")
    b.add_argument("--N", dest="system_sizes", type=_int_list,
                   default=[4, 6, 8, 10])
    b.add_argument("--samples", type=int, default=25)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--reps", type=int, default=5)
    b.add_argument("--restarts", type=int, default=10)
    b.add_argument("--out", default="-")
    b.set_defaults(func=cmd_bench)

    t = sub.add_parser("selftest", help="run the embedded golden-value suite")
    t.add_argument("--json", action="store_true")
    t.set_defaults(func=cmd_selftest)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    ctx = (_thread_limit(args.threads)
           if args.threads and args.command != "bench"
           else contextlib.nullcontext())
    try:
        with ctx:
            return args.func(args)
    except FormatError as exc:
        print(f"input format error: {exc}", file=sys.stderr)
        return 2
    except ValidationError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return 2
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
