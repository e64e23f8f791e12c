"""Command-line front end.

Subcommands ``simulate``, ``attack``, ``sweep``, ``crossover`` and
``metrics``. Options may also come from a ``--config`` file of
``key = value`` lines (``#`` starts a comment) whose keys are the long flag
names; flags given on the command line win.

Exit codes: 0 success, 2 invalid configuration, 3 runtime or statistical
failure (including an empty sifted key), 4 I/O error.
"""

from __future__ import annotations

import argparse
import math
import sys
from typing import Sequence

from . import analysis
from ._validation import BracketError, EmptyKeyError, InvalidArgumentError
from .adversary import AttackStrategy, PassThrough, estimate_attack_params
from .protocols import ChannelModel, Scheme, SchemeConfig, empirical_metrics, run_session
from .svg import line_chart

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_IO = 0, 2, 3, 4
SCHEME_CHOICES = [s.value for s in Scheme] + ["all"]
SWEEP_HEADER = "p_o,mu_r,rk_bb84,rk_iwy,rk_blt,rk_blt_plus"
SCHEME_LABELS = {Scheme.BB84: "BB84", Scheme.IWY: "IWY", Scheme.BLT: "BLT", Scheme.BLT_PLUS: "BLT+"}

DEFAULTS = {
    "scheme": "all",
    "m": 2,
    "trains": 100_000,
    "seed": None,
    "flip": 0.0,
    "attack": False,
    "attack_fraction": 1.0,
    "pass_through": PassThrough.BLOCK.value,
    "nbar": None,
    "po_min": 0.0,
    "po_max": 0.25,
    "po_step": 0.005,
    "out": None,
    "svg": None,
    "workers": 1,
}
# crossover searches the whole physical range by default
COMMAND_DEFAULTS = {"crossover": {"po_max": 0.5}}


class ConfigError(Exception):
    pass


def fmt(x) -> str:
    """CSV number: integers verbatim, floats to 9 significant digits."""
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    if isinstance(x, int) and not isinstance(x, bool):
        return str(x)
    return f"{float(x):.9g}"


def _bool(text: str) -> bool:
    lowered = str(text).strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"not a boolean: {text!r}")


def _add_common(p: argparse.ArgumentParser, *, scheme=True, sim=False, grid=False):
    p.add_argument("--config", default=None, help="key = value file; command-line flags override it")
    p.add_argument("--out", default=None, help="CSV output path (default stdout)")
    if scheme:
        p.add_argument("--scheme", choices=SCHEME_CHOICES, default=None)
    p.add_argument("--m", type=int, default=None, help="transmitter delay elements (iwy, blt)")
    if sim:
        p.add_argument("--trains", type=int, default=None)
        p.add_argument("--seed", type=int, default=None, help="required")
        p.add_argument("--workers", type=int, default=None)
        p.add_argument("--flip", type=float, default=None, help="detector-label flip probability")
        p.add_argument("--attack-fraction", type=float, default=None)
        p.add_argument(
            "--pass-through", choices=[v.value for v in PassThrough], default=None,
            help="eavesdropper action on an unpaired-bin outcome",
        )
    if grid:
        p.add_argument("--po-min", type=float, default=None)
        p.add_argument("--po-max", type=float, default=None)
        p.add_argument("--po-step", type=float, default=None)
    p.add_argument("--nbar", type=float, default=None, help="mean photon number for leakage terms")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fiberqkd", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="Monte Carlo key exchange")
    _add_common(p, sim=True)
    p.add_argument("--attack", type=_bool, nargs="?", const=True, default=None, help="enable the eavesdropper")
    p.set_defaults(handler=simulate_cmd)

    p = sub.add_parser("attack", help="estimate eta_e and p_d under full interception")
    _add_common(p, sim=True)
    p.set_defaults(handler=attack_cmd)

    p = sub.add_parser("sweep", help="retained key fraction over a p_o grid")
    _add_common(p, scheme=False, grid=True)
    p.add_argument("--svg", default=None, help="also write an SVG chart")
    p.set_defaults(handler=sweep_cmd)

    p = sub.add_parser("crossover", help="error rate where two schemes retain equal key")
    p.add_argument("schemes", nargs=2, choices=[s.value for s in Scheme], metavar="SCHEME")
    _add_common(p, scheme=False, grid=True)
    p.set_defaults(handler=crossover_cmd)

    p = sub.add_parser("metrics", help="closed-form scheme constants")
    _add_common(p)
    p.set_defaults(handler=metrics_cmd)
    return parser


def read_config_file(path: str) -> dict[str, str]:
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            values[key.lstrip("-").replace("-", "_")] = value
    return values


def resolve(parser: argparse.ArgumentParser, args: argparse.Namespace) -> argparse.Namespace:
    """Merge defaults < config file < command line and validate ranges."""
    sub = parser._subparsers._group_actions[0].choices[args.command]
    actions = {a.dest: a for a in sub._actions if a.dest not in ("help", "config")}
    defaults = {**DEFAULTS, **COMMAND_DEFAULTS.get(args.command, {})}
    merged = {k: defaults.get(k) for k in actions}
    if args.config:
        for key, text in read_config_file(args.config).items():
            if key not in actions:
                raise ConfigError(f"unknown config key {key!r} for {args.command}")
            action = actions[key]
            convert = action.type or str
            try:
                value = convert(text)
            except (TypeError, ValueError, argparse.ArgumentTypeError) as exc:
                raise ConfigError(f"bad value for {key}: {exc}") from None
            if action.choices is not None and value not in action.choices:
                raise ConfigError(f"{key} must be one of {sorted(action.choices)}")
            merged[key] = value
    for key in actions:
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value
    merged["command"] = args.command
    merged["handler"] = args.handler
    ns = argparse.Namespace(**merged)
    _validate(ns)
    return ns


def _validate(ns):
    if ns.command in ("simulate", "attack"):
        if ns.seed is None:
            raise ConfigError(f"{ns.command} requires --seed")
        if ns.trains is None or ns.trains < 1:
            raise ConfigError("--trains must be >= 1")
        if ns.workers is None or ns.workers < 1:
            raise ConfigError("--workers must be >= 1")
        if not 0.0 <= ns.flip <= 0.5:
            raise ConfigError("--flip must lie in [0, 0.5]")
        if not 0.0 <= ns.attack_fraction <= 1.0:
            raise ConfigError("--attack-fraction must lie in [0, 1]")
    if ns.m < 1:
        raise ConfigError("--m must be >= 1")
    if ns.nbar is not None and ns.nbar < 0:
        raise ConfigError("--nbar must be >= 0")


def _config_for(scheme: Scheme, m: int, explicit: bool) -> SchemeConfig:
    # blt_plus is pinned to m=2 unless the user asked for it by name
    if scheme is Scheme.BLT_PLUS and not explicit:
        return SchemeConfig(scheme, 2)
    return SchemeConfig(scheme, m)


def _configs(ns) -> list[SchemeConfig]:
    if ns.scheme in (None, "all"):
        return [_config_for(s, ns.m, False) for s in Scheme]
    return [_config_for(Scheme.parse(ns.scheme), ns.m, True)]


def _emit(ns, lines: Sequence[str]):
    text = "\n".join(lines) + "\n"
    if ns.out:
        with open(ns.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _note(msg: str):
    print(msg, file=sys.stderr)


def simulate_cmd(ns) -> int:
    lines = ["scheme,m,n_trains,seed,eta_p_hat,p_o_hat,eve_fraction_hat,sifted_bits"]
    channel = ChannelModel(ns.flip, ns.attack_fraction if ns.attack else 0.0)
    for config in _configs(ns):
        adversary = AttackStrategy.for_scheme(config, ns.pass_through) if ns.attack else None
        record = run_session(config, ns.trains, channel, adversary, ns.seed, workers=ns.workers)
        em = empirical_metrics(record)
        ref = analysis.scheme_metrics(config)
        lines.append(
            ",".join(
                [config.scheme.value, fmt(config.m), fmt(ns.trains), fmt(ns.seed), fmt(em.eta_p_hat),
                 fmt(em.p_o_hat), fmt(em.eve_fraction_hat), fmt(em.sifted_bits)]
            )
        )
        msg = (
            f"{config}: eta_p_hat={em.eta_p_hat:.4f} (analytic {ref.eta_p:.4f}), "
            f"p_o_hat={em.p_o_hat:.4f}, eve_fraction_hat={em.eve_fraction_hat:.4f}"
        )
        if ns.attack and config.is_train_scheme and em.p_o_hat > 0:
            msg += f", eve/p_o={em.eve_fraction_hat / em.p_o_hat:.3f} (analytic eta_e/p_d {ref.ratio:.3f})"
        _note(msg)
    _emit(ns, lines)
    return EXIT_OK


def _dev(hat, target, sigma):
    if sigma == 0:
        return 0.0 if hat == target else math.inf
    return (hat - target) / sigma


def attack_cmd(ns) -> int:
    lines = [
        "scheme,m,n_trains,seed,eta_e_hat,eta_e,eta_e_dev_sigma,p_d_hat,p_d,p_d_dev_sigma,"
        "guess_success_hat,guess_success,sifted_bits"
    ]
    for config in _configs(ns):
        est = estimate_attack_params(config, ns.trains, ns.seed, pass_through=ns.pass_through, workers=ns.workers)
        ref = analysis.scheme_metrics(config)
        if config.scheme is Scheme.BB84:
            guess_target = math.cos(math.pi / 8) ** 2
            eta_dev = None
        else:
            guess_target = None
            eta_dev = _dev(est.eta_e_hat, ref.eta_e, est.sigma(ref.eta_e))
        p_dev = _dev(est.p_d_hat, ref.p_d, est.sigma(ref.p_d))
        lines.append(
            ",".join(
                [config.scheme.value, fmt(config.m), fmt(ns.trains), fmt(ns.seed),
                 fmt(est.eta_e_hat), fmt(ref.eta_e), fmt(eta_dev),
                 fmt(est.p_d_hat), fmt(ref.p_d), fmt(p_dev),
                 fmt(est.guess_success_hat), fmt(guess_target), fmt(est.sifted_bits)]
            )
        )
        msg = f"{config}: eta_e_hat={est.eta_e_hat:.4f} (analytic {ref.eta_e:.4f}), p_d_hat={est.p_d_hat:.4f} (analytic {ref.p_d:.4f}, {p_dev:+.2f} sigma)"
        if guess_target is not None:
            msg += f", guess_success_hat={est.guess_success_hat:.4f} (analytic {guess_target:.4f}); eta_e={ref.eta_e} is an information bound"
        _note(msg)
    _emit(ns, lines)
    return EXIT_OK


def _sweep_configs(ns) -> list[SchemeConfig]:
    return [_config_for(s, ns.m, False) for s in Scheme]


def sweep_cmd(ns) -> int:
    grid = analysis.po_grid(ns.po_min, ns.po_max, ns.po_step)
    configs = _sweep_configs(ns)
    rows = analysis.sweep(configs, grid)
    lines = [SWEEP_HEADER]
    for r in rows:
        lines.append(",".join([fmt(r.p_o), fmt(r.mu_r)] + [fmt(r.key_fractions[c.scheme]) for c in configs]))
    _emit(ns, lines)
    if ns.svg:
        series = {
            SCHEME_LABELS[c.scheme]: (grid, list(analysis.curve_array(rows, c.scheme))) for c in configs
        }
        chart = line_chart(
            series, x_label="error probability p_o", y_label="retained key fraction R_k",
            title="Retained key fraction vs error rate",
        )
        with open(ns.svg, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(chart)
    return EXIT_OK


CLAIMS = {
    frozenset({Scheme.BLT, Scheme.BLT_PLUS}): "BLT leads below p_o of about 0.13",
    frozenset({Scheme.IWY, Scheme.BLT_PLUS}): "BLT+ beats IWY above error rates of about 2-3%",
}


def crossover_cmd(ns) -> int:
    a, b = (Scheme.parse(s) for s in ns.schemes)
    lo, hi = ns.po_min, ns.po_max
    if not hi > lo:
        raise ConfigError("--po-max must exceed --po-min")
    ca, cb = _config_for(a, ns.m, False), _config_for(b, ns.m, False)
    root = analysis.find_crossover(ca, cb, lo, hi, step=min(1e-3, (hi - lo) / 10))
    if root is None:
        raise BracketError(f"no crossover in ({lo:g}, {hi:g}) between {a.value} and {b.value}")
    print(f"{root:.6f}")
    claim = CLAIMS.get(frozenset({a, b}))
    if claim:
        _note(f"published claim: {claim}")
    return EXIT_OK


def metrics_cmd(ns) -> int:
    lines = ["scheme,m,n_pulses,eta_p,eta_e,p_d,ratio,extrapolated,multiphoton_leakage"]
    for config in _configs(ns):
        mt = analysis.scheme_metrics(config)
        leak = analysis.multiphoton_leakage(config, ns.nbar) if ns.nbar is not None else None
        lines.append(
            ",".join(
                [mt.scheme.value, fmt(mt.m), fmt(mt.n_pulses), fmt(mt.eta_p), fmt(mt.eta_e), fmt(mt.p_d),
                 fmt(mt.ratio), str(mt.extrapolated).lower(), fmt(leak)]
            )
        )
    _emit(ns, lines)
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        ns = resolve(parser, args)
        return ns.handler(ns)
    except (ConfigError, InvalidArgumentError) as exc:
        _note(f"error: {exc}")
        return EXIT_CONFIG
    except OSError as exc:
        _note(f"I/O error: {exc}")
        return EXIT_IO
    except (EmptyKeyError, BracketError) as exc:
        _note(f"error: {exc}")
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
