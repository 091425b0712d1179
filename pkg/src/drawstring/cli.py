"""Command-line front end: construct, certify, sequence, torus-green, cross-check."""
import argparse
import csv
import io
import json
import math
import os
import sys
from datetime import datetime, timezone

import numpy as np

COMMANDS = ("construct", "certify", "sequence", "torus-green", "cross-check")
EXIT_OK, EXIT_ERROR, EXIT_CERT = 0, 1, 2

# field -> (parser, validator, message)
_pos = (lambda v: math.isfinite(v) and v > 0, "must be a positive finite number")
_fin = (lambda v: math.isfinite(v), "must be finite")
FIELDS = {
    "k": (float, *_fin),
    "epsilon": (float, *_pos),
    "delta": (float, lambda v: math.isfinite(v) and 0 < v < 1, "must lie in (0, 1)"),
    "r0": (float, *_pos),
    "method": (str, lambda v: v in ("A", "B"), "must be A or B"),
    "topology": (str, lambda v: v in ("T3", "S2xS1"), "must be T3 or S2xS1"),
    "i_max": (int, lambda v: v >= 2, "must be an integer >= 2"),
    "p": (lambda s: [float(x) for x in str(s).split(",")], lambda v: all(1 <= x < 2 for x in v),
          "must be a comma list of values in [1, 2)"),
    "z": (lambda s: [complex(x.replace(" ", "")) for x in str(s).split(",")],
          lambda v: all(x.imag > 0 for x in v), "must be a comma list of complex numbers with Im > 0"),
    "c1": (float, *_pos),
    "c2": (float, lambda v: math.isfinite(v) and v >= 0, "must be a nonnegative finite number"),
    "grid": (int, lambda v: v >= 16, "must be an integer >= 16"),
    "out": (str, lambda v: True, ""),
    "csv": (str, lambda v: True, ""),
}
DEFAULTS = dict(k=0.0, epsilon=0.1, delta=0.1, r0=1e-3, method="B", topology="T3", i_max=16, p="1,1.5,1.9",
                z="1j,0.5+1j,2j", c1=0.1, c2=0.1, grid=4000, out=None, csv=None)


class ConfigError(ValueError):
    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field
        self.message = message


def read_config_file(path):
    """Flat key=value text; '#' starts a comment."""
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}", "expected key=value")
            key, val = (x.strip() for x in line.split("=", 1))
            key = key.replace("-", "_")
            if key != "command" and key not in FIELDS:
                raise ConfigError(key, "unknown key")
            out[key] = val
    return out


def resolve(file_values, flag_values):
    """Merge defaults < file < flags and validate every field."""
    raw = dict(DEFAULTS)
    raw.update(file_values)
    raw.update({k: v for k, v in flag_values.items() if v is not None})
    cfg = {}
    for key, (conv, ok, msg) in FIELDS.items():
        v = raw.get(key)
        if v is None:
            cfg[key] = None
            continue
        try:
            v = conv(v)
        except (TypeError, ValueError):
            raise ConfigError(key, f"cannot parse {raw.get(key)!r}") from None
        if not ok(v):
            raise ConfigError(key, msg)
        cfg[key] = v
    cmd = raw.get("command")
    if cmd not in COMMANDS:
        raise ConfigError("command", f"must be one of {', '.join(COMMANDS)}")
    cfg["command"] = cmd
    return cfg


# ---------------------------------------------------------------------------
# commands


def _spec(cfg):
    from .params import DrawstringSpec
    return DrawstringSpec(k=cfg["k"], epsilon=cfg["epsilon"], delta=cfg["delta"], r0=cfg["r0"], method=cfg["method"])


def _build(spec):
    from .cutoff_construction import build_drawstring_B
    from .gluing_construction import build_drawstring_A
    return (build_drawstring_A if spec.method == "A" else build_drawstring_B)(spec)


def _profile_rows(p, n=2000):
    from .radial_metric import profile_csv_rows
    return [("r", "w", "f", "f1", "f2", "u", "u1", "R", "H")] + profile_csv_rows(p, n)


def cmd_construct(cfg):
    from .certifier import certify
    spec = _spec(cfg)
    p = _build(spec)
    rep = certify(p, spec, n=cfg["grid"])
    res = dict(spec=dict(k=spec.k, epsilon=spec.epsilon, delta=spec.delta, r0=spec.r0, method=spec.method),
               segments=[dict(label=s.label, a=s.a, b=s.b) for s in p.segments],
               certification=rep.to_dict())
    return res, _profile_rows(p), rep.passed


def cmd_certify(cfg):
    from .certifier import certify
    spec = _spec(cfg)
    rep = certify(_build(spec), spec, n=cfg["grid"])
    rows = [("condition", "status", "worst_margin", "r", "grid_size", "tol_abs")]
    for name, c in rep.conditions.items():
        rows.append((name, c.status, c.worst_margin, c.r, c.grid_size, c.tol_abs))
    return dict(certification=rep.to_dict()), rows, rep.passed


def cmd_sequence(cfg):
    from .sequence_assembly import build_sequence, mina_certificate, scrunch_report
    workers = int(os.environ.get("DRAWSTRING_THREADS", "1") or 1)
    seq = build_sequence(cfg["topology"], cfg["i_max"], cfg["method"], n=cfg["grid"], workers=workers)
    p_list = tuple(sorted(set(cfg["p"]) | {1.5}))
    recs = scrunch_report(seq, p_list)
    mina = [mina_certificate(m.profile, cfg["topology"], m.report) for m in seq]
    ok = all(m.report.passed for m in seq) and all(all(r.checks.values()) for r in recs) and all(c["valid"] for c in mina)
    rows = [("i", "eps", "delta", "H", "volU", "w1p_1.5")]
    rows += [(r.i, r.eps_i, r.delta_i, r.H_i, r.vol_Ui, r.w1p[1.5]) for r in recs]
    res = dict(topology=cfg["topology"], method=cfg["method"], records=[r.to_dict() for r in recs],
               certifications=[dict(i=m.i, passed=m.report.passed) for m in seq], mina=mina)
    return res, rows, ok


def cmd_torus_green(cfg):
    from .flat_torus_analysis import (FITTED, FlatTorus, GreenEvaluator, extremal_length_check, fit_C1,
                                      green_grid_rows, green_mean, project_to_domain, systole)
    evs = [GreenEvaluator(FlatTorus(project_to_domain(z))) for z in cfg["z"]]
    per = []
    for ev in evs:
        z = ev.torus.z
        per.append(dict(z=str(z), sigma=ev.sigma, nreal=ev.nreal, nrec=ev.nrec, real_tail=ev.real_tail,
                        dual_tail=ev.dual_tail, mean=green_mean(ev), systole=systole(z),
                        extremal_length=extremal_length_check(ev.torus)))
    fit = fit_C1(evs)
    rows = [("x", "y", "G")] + green_grid_rows(evs[0], 0j, 64)
    ok = all(d["extremal_length"]["all_below"] for d in per)
    return dict(tori=per, C1_fit=fit, frozen_constants=FITTED), rows, ok


def cmd_cross_check(cfg):
    from .certifier import closed_form_cross_check, fd_oracle, reference_volume
    from .radial_metric import axis_distance, prototype_profile, tube_volume
    proto = prototype_profile(cfg["c1"], cfg["c2"])
    cf = closed_form_cross_check(proto)
    fd = fd_oracle(proto)
    spec = _spec(cfg)
    rows = [("method", "r1", "axis_distance", "tube_volume", "V0")]
    comp = {}
    cap = None
    for m in ("A", "B"):
        # B is capped at A's outer radius so both are compared at one scale
        s = type(spec)(k=spec.k, epsilon=spec.epsilon, delta=spec.delta, r0=spec.r0, method=m, r1_max=cap)
        p = _build(s)
        r1 = p.meta["params"].values["r1"]
        d = axis_distance(p)
        v = tube_volume(p, 1.0)
        V0 = reference_volume(s.k, r1)
        comp[m] = dict(r1=r1, axis_distance=d, tube_volume=v, V0=V0, distance_ok=bool(d < s.r0),
                       volume_ok=bool(v < 100 * V0))
        rows.append((m, r1, d, v, V0))
        cap = r1
    ratio = comp["A"]["tube_volume"] / comp["B"]["tube_volume"]
    ok = (cf <= 1e-8 and all(c["distance_ok"] and c["volume_ok"] for c in comp.values())
          and 1 / 20 <= ratio <= 20)
    return dict(closed_form=dict(c1=cfg["c1"], c2=cfg["c2"], max_rel_dev=cf, tol=1e-8), fd_oracle=fd, constructions=comp, volume_ratio_A_over_B=ratio), rows, ok


DISPATCH = {"construct": cmd_construct, "certify": cmd_certify, "sequence": cmd_sequence,
            "torus-green": cmd_torus_green, "cross-check": cmd_cross_check}


# ---------------------------------------------------------------------------
# output


def _clean(x):
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else repr(x)
    if isinstance(x, complex):
        return str(x)
    return x


def render_report(command, cfg, body, status, timestamp=None):
    doc = dict(schema=1, command=command, status=status,
               timestamp=timestamp or datetime.now(timezone.utc).isoformat(),
               config={k: v for k, v in cfg.items() if k not in ("out", "csv")}, result=body)
    return json.dumps(_clean(doc), indent=2, sort_keys=True) + "\n"


def render_csv(rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def _emit(text, path):
    if path:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def build_parser():
    ap = argparse.ArgumentParser(prog="drawstring", description=__doc__)
    ap.add_argument("command", nargs="?", choices=COMMANDS)
    ap.add_argument("--config", help="key=value config file; flags override it")
    for key in FIELDS:
        ap.add_argument("--" + key.replace("_", "-"), dest=key, default=None)
    return ap


def run(argv=None):
    """Parse, dispatch, write outputs; returns the exit status."""
    args = build_parser().parse_args(argv)
    flags = {k: v for k, v in vars(args).items() if k not in ("config", "command")}
    flags["command"] = args.command
    try:
        file_values = read_config_file(args.config) if args.config else {}
        cfg = resolve(file_values, flags)
    except ConfigError as e:
        err = dict(schema=1, status="error", error=dict(field=e.field, message=e.message))
        sys.stdout.write(json.dumps(err, indent=2, sort_keys=True) + "\n")
        return EXIT_ERROR
    except OSError as e:
        err = dict(schema=1, status="error", error=dict(field="config", message=str(e)))
        sys.stdout.write(json.dumps(err, indent=2, sort_keys=True) + "\n")
        return EXIT_ERROR
    cmd = cfg["command"]
    try:
        body, rows, ok = DISPATCH[cmd](cfg)
    except (ValueError, RuntimeError, ArithmeticError) as e:
        field = getattr(e, "stage", None) or "runtime"
        _emit(render_report(cmd, cfg, dict(error=dict(field=field, message=str(e))), "error"), cfg["out"])
        return EXIT_ERROR
    _emit(render_report(cmd, cfg, body, "pass" if ok else "fail"), cfg["out"])
    if cfg["csv"]:
        _emit(render_csv(rows), cfg["csv"])
    return EXIT_OK if ok else EXIT_CERT


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
