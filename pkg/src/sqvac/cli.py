"""Batch command line: codewords, preparation runs, KL sweeps and Wigner grids.

Every invocation writes into its own directory, named after a hash of the
effective configuration, under ``--out-root`` (default ``$SQVAC_OUTPUT_ROOT`` or
``./runs``). ``--out`` names the directory explicitly instead.

Exit codes: 0 success, 1 other numerical failure (e.g. non-convergence),
2 invalid input, 3 unreachable measurement branch, 4 every sweep point failed.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import os
import sys
from pathlib import Path

from . import __version__
from .circuits import Mode, prepare_equal_superposition, prepare_even, prepare_pow2
from .codewords import (
    Basis,
    CodeSpec,
    Construction,
    Family,
    build_pair,
    calibrate_cat_alpha,
    calibrate_squeezing_r,
    pair_to_json,
    psi_k_closed_form,
    psi_k_superposition,
    support_summary,
)
from .errors import SqvacError, UnreachableBranchError, ValidationError
from .fockspace import FockVector
from .klmetrics import dual_basis, reports_to_csv, reports_to_json, sweep
from .noise import ChannelKind
from .wigner import default_axis, grid_to_csv, grid_to_json, grid_to_pgm, wigner

log = logging.getLogger("sqvac")

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_VALIDATION = 2
EXIT_UNREACHABLE = 3
EXIT_SWEEP_FAILED = 4

OUTPUT_ROOT_ENV = "SQVAC_OUTPUT_ROOT"
# options that change where or how fast results are produced, not what they are
_NOT_HASHED = {"command", "config", "out", "out_root", "jobs", "verbose", "func"}


# -- parsing helpers -----------------------------------------------------------------

def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in str(text).split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _str_list(text: str) -> list[str]:
    return [t.strip() for t in str(text).split(",") if t.strip()]


def _gamma_grid(text: str) -> list[float]:
    """``"0,0.05,0.1"`` or ``"start:stop:step"`` (stop included)."""
    text = str(text).strip()
    try:
        if ":" in text:
            start, stop, step = (float(t) for t in text.split(":"))
            if step <= 0:
                raise ValueError
            count = int(math.floor((stop - start) / step + 1e-9)) + 1
            return [round(start + i * step, 12) for i in range(max(count, 0))]
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"gamma grid must be 'g1,g2,...' or 'start:stop:step', got {text!r}") from None


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


def read_config(path: str | os.PathLike) -> dict[str, str]:
    """Flat ``key = value`` file; ``#`` starts a comment; keys may use dashes or underscores."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat 'key = value' file; command-line flags take precedence")
    p.add_argument("--out", help="output directory (default: <out-root>/<command>-<config hash>)")
    p.add_argument("--out-root", help=f"root for output directories (default: ${OUTPUT_ROOT_ENV} or ./runs)")
    p.add_argument("--format", choices=["csv", "json"], default="json",
                   help="format of tabular data files (default: json)")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")


def _add_code_args(p: argparse.ArgumentParser, strength_required: bool = True) -> None:
    p.add_argument("--family", choices=[f.value for f in Family], default="squeezed",
                   help="code family (default: squeezed)")
    p.add_argument("--m", type=int, default=2, help="number of legs, even (default: 2)")
    p.add_argument("--strength", type=float, required=strength_required,
                   help="squeezing r (squeezed family) or coherent amplitude |alpha| (cat family); dimensionless")
    p.add_argument("--n-max", type=int, help="Fock cutoff (default: from the analytic tail, x1.5 safety)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sqvac",
        description="Squeezed-vacuum rotation-symmetric bosonic codes: codewords, preparation "
                    "circuits, Knill-Laflamme sweeps and Wigner grids.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("codeword", help="build a logical codeword pair and report its Fock support")
    _add_common(p)
    _add_code_args(p)
    p.add_argument("--k", type=int, help="also emit psi_k of the squeezed family (0 <= k < m)")
    p.add_argument("--construction", choices=[c.value for c in Construction], default="closed_form",
                   help="closed_form (filtered Fock series) or superposition (sum of rotated "
                        "squeezers / displaced vacua); default closed_form")
    p.set_defaults(func=cmd_codeword)

    p = sub.add_parser("prepare", help="simulate a qubit-assisted preparation circuit")
    _add_common(p)
    p.add_argument("--algorithm", choices=["pow2", "equal", "even"], default="pow2",
                   help="pow2: 2^k legs by conditional rotations; equal: in-phase m-legged "
                        "superposition by phased rotations; even: any even m in two stages")
    p.add_argument("--m", type=int, default=2, help="number of legs (power of two for pow2)")
    p.add_argument("--r", type=float, required=True, help="squeezing magnitude r (dimensionless)")
    p.add_argument("--target", type=int, choices=[0, 1], default=0, help="logical state to herald (default 0)")
    p.add_argument("--mode", choices=[m.value for m in Mode], default="postselect",
                   help="postselect on the wanted outcomes, or feedforward with logical-X "
                        "corrections (default postselect)")
    p.add_argument("--seed", type=int, default=0, help="64-bit seed for sampled measurements (default 0)")
    p.add_argument("--n-max", type=int, help="Fock cutoff (default: from the analytic tail)")
    p.add_argument("--trace", action="store_true", help="also write a Wigner grid after every round")
    p.add_argument("--extent", type=float, default=6.0, help="trace grid half-width in q and p (default 6)")
    p.add_argument("--points", type=int, default=101, help="trace grid points per axis (default 101)")
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("klsweep", help="Knill-Laflamme violation over a grid of noise strengths")
    _add_common(p)
    p.add_argument("--families", type=_str_list, default=["squeezed"],
                   help="comma-separated code families (default squeezed)")
    p.add_argument("--legs-list", type=_int_list, default=[2, 4, 8],
                   help="comma-separated even leg counts (default 2,4,8)")
    p.add_argument("--channel", choices=[c.value for c in ChannelKind], required=True)
    p.add_argument("--basis", choices=[b.value for b in Basis], default="computational",
                   help="computational (0,1) or dual (+,-) codewords (default computational)")
    p.add_argument("--gamma-grid", type=_gamma_grid, default=_gamma_grid("0:0.2:0.02"),
                   help="noise strengths, 'g1,g2,...' or 'start:stop:step' (default 0:0.2:0.02)")
    p.add_argument("--match-nbar", type=float,
                   help="calibrate every code so its logical-0 has this mean photon number")
    p.add_argument("--strength", type=float, help="fixed r or |alpha| when not matching mean photon number")
    p.add_argument("--all-pairs", action="store_true",
                   help="report all four (i, j) index pairs instead of only the off-diagonal one")
    p.add_argument("--epsilon", type=float, default=1e-12, help="Kraus completeness tolerance (default 1e-12)")
    p.add_argument("--no-convergence", action="store_true",
                   help="skip the re-evaluation at 1.4x cutoff that certifies each value")
    p.add_argument("--jobs", type=int, default=1, help="worker processes; output does not depend on it")
    p.set_defaults(func=cmd_klsweep)

    p = sub.add_parser("wigner", help="Wigner function of a codeword on a phase-space grid")
    _add_common(p)
    _add_code_args(p)
    p.add_argument("--logical", choices=["0", "1", "plus", "minus"], default="0",
                   help="which codeword: 0, 1, plus or minus (default 0)")
    p.add_argument("--extent", type=float, default=6.0, help="grid half-width in q and p (default 6)")
    p.add_argument("--points", type=int, default=201, help="grid points per axis (default 201)")
    p.add_argument("--pgm", action="store_true", help="also write an 8-bit PGM heat map")
    p.set_defaults(func=cmd_wigner)
    return parser


def _explicit_dests(parser: argparse.ArgumentParser, argv: list[str], command: str) -> set[str]:
    """Names of options that were given on the command line."""
    sub = _subparser(parser, command)
    seen = set()
    for action in sub._actions:
        for opt in action.option_strings:
            for tok in argv:
                if tok == opt or tok.startswith(opt + "="):
                    seen.add(action.dest)
    return seen


def _subparser(parser: argparse.ArgumentParser, command: str) -> argparse.ArgumentParser:
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices[command]
    raise KeyError(command)


def _apply_config(parser, args: argparse.Namespace, argv: list[str]) -> None:
    if not getattr(args, "config", None):
        return
    values = read_config(args.config)
    sub = _subparser(parser, args.command)
    actions = {a.dest: a for a in sub._actions if a.option_strings}
    explicit = _explicit_dests(parser, argv, args.command)
    for key, raw in values.items():
        action = actions.get(key)
        if action is None or key in ("config",):
            raise ValidationError(f"unknown configuration key {key!r} for '{args.command}'")
        if key in explicit:
            log.warning("config key %r ignored: command-line flag wins", key)
            continue
        if isinstance(action, (argparse._StoreTrueAction, argparse._StoreFalseAction)):
            value = _bool(raw)
        else:
            try:
                value = action.type(raw) if action.type else raw
            except (argparse.ArgumentTypeError, ValueError) as exc:
                raise ValidationError(f"config key {key!r}: {exc}") from None
            if action.choices is not None and value not in action.choices:
                raise ValidationError(f"config key {key!r}: {value!r} not in {list(action.choices)}")
        setattr(args, key, value)


def config_dict(args: argparse.Namespace) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in _NOT_HASHED}


def config_hash(args: argparse.Namespace) -> str:
    blob = json.dumps({"command": args.command, **config_dict(args)}, sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:12]


def output_dir(args: argparse.Namespace) -> Path:
    if args.out:
        path = Path(args.out)
    else:
        root = args.out_root or os.environ.get(OUTPUT_ROOT_ENV) or "runs"
        path = Path(root) / f"{args.command}-{config_hash(args)}"
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write(path: Path, text: str | bytes) -> None:
    if isinstance(text, bytes):
        path.write_bytes(text)
    else:
        path.write_text(text if text.endswith("\n") else text + "\n", encoding="utf-8")
    log.info("wrote %s", path)


def _write_run_record(out: Path, args: argparse.Namespace, extra: dict | None = None) -> None:
    rec = {"command": args.command, "config": config_dict(args), "config_hash": config_hash(args)}
    if extra:
        rec.update(extra)
    _write(out / "run.json", json.dumps(rec, indent=1, sort_keys=True))


def _vector_json(v) -> str:
    return json.dumps({"n_max": v.n_max,
                       "amplitudes": [[float(c.real), float(c.imag)] for c in v.amplitudes]})


def _code_spec(args) -> CodeSpec:
    return CodeSpec(Family(args.family), args.m, args.strength, args.n_max)


# -- commands ------------------------------------------------------------------------

def cmd_codeword(args) -> int:
    spec = _code_spec(args)
    construction = Construction(args.construction)
    if args.k is not None and not 0 <= args.k < spec.m:
        raise ValidationError(f"--k must be in [0, {spec.m - 1}]")
    pair = build_pair(spec, construction)
    summary = support_summary(pair)
    out = output_dir(args)
    _write(out / "pair.json", pair_to_json(pair))
    _write(out / "support.json", json.dumps(summary, indent=1))
    if args.k is not None:
        if spec.family is not Family.SQUEEZED:
            raise ValidationError("--k applies to the squeezed family only")
        build = psi_k_closed_form if construction is Construction.CLOSED_FORM else psi_k_superposition
        _write(out / f"psi_{args.k}.json", _vector_json(build(spec.m, args.k, spec.strength, spec.n_max)))
    _write_run_record(out, args, {"n_max": spec.n_max})
    z, o = summary["zero_L"], summary["one_L"]
    print(f"{spec.family.value} m={spec.m} strength={spec.strength:g} n_max={spec.n_max}")
    print(f"  |0_L>: levels {z['first_levels'][:8]}... nbar={z['mean_photon_number']:.6f}")
    print(f"  |1_L>: levels {o['first_levels'][:8]}... nbar={o['mean_photon_number']:.6f}")
    print(f"  |<0_L|1_L>| = {summary['overlap_abs']:.3g}; output in {out}")
    return EXIT_OK


def cmd_prepare(args) -> int:
    mode = Mode(args.mode)
    m = args.m
    if args.algorithm == "pow2":
        if m < 2 or m & (m - 1):
            raise ValidationError(f"pow2 needs m to be a power of two >= 2, got {m}")
        result = prepare_pow2(m.bit_length() - 1, args.r, args.target, mode, args.seed, args.n_max)
    elif args.algorithm == "equal":
        if m < 1:
            raise ValidationError(f"equal needs m >= 1, got {m}")
        result = prepare_equal_superposition(m, args.r, args.seed, args.n_max)
    else:
        result = prepare_even(m, args.r, args.target, mode, args.seed, args.n_max)
    out = output_dir(args)
    meta = result.metadata
    _write(out / "metadata.json", meta.to_json())
    _write(out / "state.json", _vector_json(result.state))
    if args.trace:
        axis = default_axis(args.extent, args.points)
        for idx, state in enumerate(result.trace):
            grid = wigner(state.normalized(), axis, axis)
            name = f"trace_{idx:02d}.{args.format}"
            _write(out / name, grid_to_csv(grid) if args.format == "csv" else grid_to_json(grid))
    _write_run_record(out, args)
    print(f"{meta.algorithm}: outcomes {meta.outcomes}, cumulative probability "
          f"{meta.cumulative_probability:.10f}, fidelity to target {meta.fidelity:.12f}")
    print(f"output in {out}")
    return EXIT_OK


def _calibrated_codes(args) -> tuple[list[CodeSpec], list[dict]]:
    codes, calib = [], []
    for fam in args.families:
        family = Family(fam) if fam in {f.value for f in Family} else None
        if family is None:
            raise ValidationError(f"unknown family {fam!r}")
        for m in args.legs_list:
            if args.match_nbar is not None:
                if family is Family.SQUEEZED:
                    s = calibrate_squeezing_r(m, args.match_nbar)
                else:
                    s = calibrate_cat_alpha(m, args.match_nbar)
            elif args.strength is not None:
                s = args.strength
            else:
                raise ValidationError("give either --match-nbar or --strength")
            codes.append(CodeSpec(family, m, s))
            calib.append({"family": family.value, "m": m, "strength": s,
                          "target_nbar": args.match_nbar})
    return codes, calib


def cmd_klsweep(args) -> int:
    if args.jobs < 1:
        raise ValidationError("--jobs must be >= 1")
    for g in args.gamma_grid:
        if g < 0 or (args.channel == "loss" and g >= 1):
            raise ValidationError(f"noise strength {g} out of range for {args.channel}")
    codes, calib = _calibrated_codes(args)
    pairs = ((0, 0), (0, 1), (1, 0), (1, 1)) if args.all_pairs else ((0, 1),)
    reports = sweep(codes, ChannelKind(args.channel), args.gamma_grid, Basis(args.basis), pairs,
                    jobs=args.jobs, epsilon=args.epsilon, check_convergence=not args.no_convergence)
    out = output_dir(args)
    name = f"kl.{args.format}"
    _write(out / name, reports_to_csv(reports) if args.format == "csv" else reports_to_json(reports))
    _write(out / "calibration.json", json.dumps(calib, indent=1))
    _write_run_record(out, args)
    failed = [r for r in reports if r.error]
    for rep in reports:
        vals = ", ".join(f"V[{i},{j}]={v:.6g}" for i, j, v in rep.pairs) or rep.error
        print(f"{rep.code.family.value:8s} m={rep.code.m} gamma={rep.channel.gamma if rep.channel else float('nan'):.4g} "
              f"{vals} converged={rep.converged}")
    print(f"{len(reports) - len(failed)}/{len(reports)} points ok; output in {out}")
    if reports and len(failed) == len(reports):
        return EXIT_SWEEP_FAILED
    return EXIT_OK


def cmd_wigner(args) -> int:
    spec = _code_spec(args)
    if args.points < 2 or not args.extent > 0:
        raise ValidationError("grid needs --points >= 2 and --extent > 0")
    if spec.strength == 0 and args.logical == "0":
        state = FockVector.vacuum(spec.n_max)
    else:
        pair = build_pair(spec)
        if args.logical in ("plus", "minus"):
            pair = dual_basis(pair)
            state = pair.zero_L if args.logical == "plus" else pair.one_L
        else:
            state = pair.codeword(int(args.logical))
    axis = default_axis(args.extent, args.points)
    grid = wigner(state, axis, axis)
    out = output_dir(args)
    _write(out / f"wigner.{args.format}", grid_to_csv(grid) if args.format == "csv" else grid_to_json(grid))
    if args.pgm:
        _write(out / "wigner.pgm", grid_to_pgm(grid))
    _write_run_record(out, args, {"n_pad": grid.n_pad})
    print(f"W(0,0) = {grid.at(0.0, 0.0):.10f} (1/pi = {1 / math.pi:.10f}); "
          f"integral {grid.integral():.6f}; output in {out}")
    return EXIT_OK


def _error_line(exc: BaseException) -> str:
    return json.dumps({"error": type(exc).__name__, "message": str(exc)})


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse already printed usage
        return EXIT_OK if exc.code == 0 else EXIT_VALIDATION
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        _apply_config(parser, args, argv)
        return args.func(args)
    except UnreachableBranchError as exc:
        print(_error_line(exc), file=sys.stderr)
        return EXIT_UNREACHABLE
    except (ValidationError, ValueError, OSError) as exc:
        print(_error_line(exc), file=sys.stderr)
        return EXIT_VALIDATION
    except SqvacError as exc:
        print(_error_line(exc), file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
